"""Additive regression models over mixed covariates.

Fits models of the form ``E[Y] = g^-1(alpha + sum_j f_j(X^(j)))`` where each
component is linear, a penalized cubic-spline smooth, a set of dummy
indicators (categorical covariates), or a set of FPCA-score sub-components
(functional covariates).  The identity link is fit by backfitting with all
parametric pieces solved jointly by weighted least squares and each smooth
refit against its partial residuals; the logit link wraps the same
backfitting in an IRLS (local scoring) loop over working responses.

Nested fits are compared with an approximate F-test on residual sums of
squares and effective degrees of freedom (identity link) or a chi-square
test on the deviance difference (logit link).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as sps
from scipy.special import expit

from .data_model import Covariate, Dataset, StructuralError
from .fpca import FpcaBasis, fpca
from .splines import SmoothFit, smooth_fit

__all__ = [
    "TermSpec",
    "AdditiveModel",
    "ModelComparison",
    "fit_additive",
    "compare_models",
    "choose_contribution",
    "candidate_term_variants",
]

MAX_SWEEPS = 50
MAX_IRLS = 30
ETA_CLIP = 15.0
MIN_UNIQUE_FOR_SMOOTH = 4


@dataclass(frozen=True)
class TermSpec:
    """How one covariate contributes to the model.

    ``form`` is one of ``linear``, ``smooth``, ``dummy_set`` or
    ``fpca_scores``; ``df`` caps the effective degrees of freedom of smooth
    pieces, ``k`` is the number of FPCA components, and ``score_form``
    chooses how each score enters a functional term.  ``fixed_df`` pins
    smooth pieces at a fixed effective df instead of selecting it by GCV
    (used for honestly calibrated nested comparisons).
    """

    covariate: str
    form: str
    df: float = 8.0
    k: int = 4
    score_form: str = "linear"
    fixed_df: float | None = None


@dataclass
class _ParamBlock:
    """A group of design columns belonging to one term, with the recipe for
    rebuilding them on new data."""

    term: str
    kind: str  # linear | dummy | scores
    centers: np.ndarray
    levels: tuple[str, ...] | None = None
    basis: FpcaBasis | None = None

    def build(self, c: Covariate) -> np.ndarray:
        if self.kind == "linear":
            vals = c.values[:, None] if c.values.ndim == 1 else c.values
            return vals - self.centers
        if self.kind == "dummy":
            codes = _translate_levels(c, self.levels)
            one_hot = np.zeros((c.n, len(self.levels)))
            one_hot[np.arange(c.n), codes] = 1.0
            return one_hot[:, 1:] - self.centers
        return self.basis.transform(c.values) - self.centers

    @property
    def width(self) -> int:
        return self.centers.size


@dataclass
class _SmoothComp:
    """One smooth sub-component: either a scalar covariate directly or a
    single FPCA score of a functional covariate."""

    term: str
    basis: FpcaBasis | None  # None for plain scalar input
    score_index: int
    fit: SmoothFit | None = None
    center: float = 0.0
    df_cap: float = 8.0
    target_df: float | None = None

    def input_values(self, c: Covariate) -> np.ndarray:
        if self.basis is None:
            return np.asarray(c.values, dtype=float)
        return self.basis.transform(c.values)[:, self.score_index]

    def predict(self, c: Covariate) -> np.ndarray:
        return self.fit.predict(self.input_values(c)) - self.center


def _translate_levels(c: Covariate, levels: tuple[str, ...]) -> np.ndarray:
    if c.levels == levels:
        return c.values
    index = {lev: i for i, lev in enumerate(levels)}
    try:
        return np.array([index[c.levels[code]] for code in c.values], dtype=np.int64)
    except KeyError as exc:
        raise StructuralError(
            f"level {exc.args[0]!r} of covariate {c.name!r} was not seen in training"
        ) from exc


@dataclass
class AdditiveModel:
    """A fitted additive model."""

    link: str
    intercept: float
    beta: np.ndarray
    param_blocks: list[_ParamBlock]
    smooth_comps: list[_SmoothComp]
    term_specs: tuple[TermSpec, ...]
    term_edf: dict[str, float]
    fitted: np.ndarray
    residuals: np.ndarray
    edf: float
    deviance: float
    null_deviance: float
    deviance_explained: float
    n: int
    flags: tuple[str, ...] = ()
    response_levels: tuple[str, ...] | None = None

    def predict_link(self, covariates: Mapping[str, Covariate] | Dataset) -> np.ndarray:
        if isinstance(covariates, Dataset):
            covariates = covariates.candidate_map()
        n_new = None
        for blk in self.param_blocks:
            n_new = covariates[blk.term].n
            break
        for comp in self.smooth_comps:
            n_new = covariates[comp.term].n
            break
        if n_new is None:  # null model: any covariate sets the length
            n_new = next(iter(covariates.values())).n if covariates else 0
        eta = np.full(n_new, self.intercept)
        col = 0
        for blk in self.param_blocks:
            cols = blk.build(covariates[blk.term])
            eta += cols @ self.beta[col:col + blk.width]
            col += blk.width
        for comp in self.smooth_comps:
            eta += comp.predict(covariates[comp.term])
        return eta

    def predict(self, covariates: Mapping[str, Covariate] | Dataset) -> np.ndarray:
        """Predicted response: the mean for identity link, the class-1
        probability for the logit link."""
        eta = self.predict_link(covariates)
        if self.link == "identity":
            return eta
        return expit(np.clip(eta, -ETA_CLIP, ETA_CLIP))

    def predict_class(self, covariates: Mapping[str, Covariate] | Dataset) -> np.ndarray:
        if self.link != "logit":
            raise ValueError("class prediction needs a logit-link model")
        return (self.predict(covariates) > 0.5).astype(np.int64)

    @property
    def term_names(self) -> list[str]:
        return [t.covariate for t in self.term_specs]


@dataclass(frozen=True)
class ModelComparison:
    statistic: float
    p_value: float
    accept_full: bool
    df_num: float
    df_den: float
    note: str = ""


def _response_vector(data: Dataset, link: str) -> np.ndarray:
    if link == "logit":
        if data.response.kind != "categorical":
            raise ValueError("logit link needs a binary categorical response")
        return np.asarray(data.response.values, dtype=float)
    if data.response.kind != "scalar":
        raise ValueError("identity link needs a scalar response")
    return np.asarray(data.response.values, dtype=float)


def _binomial_deviance(y: np.ndarray, mu: np.ndarray) -> float:
    mu = np.clip(mu, 1e-10, 1.0 - 1e-10)
    return float(-2.0 * np.sum(y * np.log(mu) + (1.0 - y) * np.log(1.0 - mu)))


def _wls(design: np.ndarray, target: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, float]:
    """Weighted least squares via SVD; returns coefficients and rank."""
    sw = np.sqrt(w)
    coef, _, rank, _ = np.linalg.lstsq(design * sw[:, None], target * sw, rcond=None)
    return coef, float(rank)


@dataclass
class _FitState:
    alpha: float
    beta: np.ndarray
    smooth_values: list[np.ndarray]
    param_rank: float
    smooth_edfs: list[float]
    converged: bool


def _backfit(z: np.ndarray, w: np.ndarray, design: np.ndarray,
             smooth_inputs: list[np.ndarray], df_caps: list[float],
             targets: list[float | None],
             lams: list[float | None], state: _FitState | None,
             tol_scale: float) -> _FitState:
    """One weighted backfitting run to convergence.

    ``design`` holds all parametric columns (without intercept); the
    intercept is solved jointly with them.  ``lams`` carries frozen
    smoothing parameters (None while GCV is still choosing).
    """
    n = z.size
    full = np.column_stack([np.ones(n), design]) if design.shape[1] else np.ones((n, 1))
    if state is None:
        state = _FitState(0.0, np.zeros(design.shape[1]), [np.zeros(n) for _ in smooth_inputs],
                          0.0, [0.0] * len(smooth_inputs), False)
    smooth_sum = np.sum(state.smooth_values, axis=0) if smooth_inputs else np.zeros(n)
    fitted = np.full(n, np.nan)
    tol = 1e-6 * tol_scale
    fits: list[SmoothFit | None] = [None] * len(smooth_inputs)
    for sweep in range(MAX_SWEEPS):
        coef, rank = _wls(full, z - smooth_sum, w)
        state.alpha = float(coef[0])
        state.beta = coef[1:]
        state.param_rank = max(rank - 1.0, 0.0)
        param_fit = design @ state.beta if design.shape[1] else np.zeros(n)
        for j, x_j in enumerate(smooth_inputs):
            smooth_sum -= state.smooth_values[j]
            partial = z - state.alpha - param_fit - smooth_sum
            fit = smooth_fit(x_j, partial, weights=w, max_df=df_caps[j],
                             lam=lams[j], target_df=targets[j])
            if lams[j] is None and targets[j] is None and sweep >= 2:
                lams[j] = fit.lam
            center = float(np.sum(w * fit.fitted) / np.sum(w))
            state.smooth_values[j] = fit.fitted - center
            state.alpha += center
            state.smooth_edfs[j] = max(fit.edf - 1.0, 0.0)
            fits[j] = fit
            smooth_sum += state.smooth_values[j]
        new_fitted = state.alpha + param_fit + smooth_sum
        if np.all(np.abs(new_fitted - fitted) < tol) or not smooth_inputs:
            fitted = new_fitted
            state.converged = True
            break
        fitted = new_fitted
    else:
        state.converged = False
    state.fits = fits  # type: ignore[attr-defined]
    state.fitted = fitted  # type: ignore[attr-defined]
    return state


def fit_additive(data: Dataset, terms: Sequence[TermSpec],
                 link: str = "identity") -> AdditiveModel:
    """Fit an additive model with the given term forms.

    Terms referencing constant covariates are dropped with a flag;
    non-convergence of backfitting or IRLS flags the result but still
    returns the fit reached.
    """
    if link not in ("identity", "logit"):
        raise ValueError(f"unknown link {link!r}")
    y = _response_vector(data, link)
    n = y.size
    seen: set[str] = set()
    for spec in terms:
        if spec.covariate in seen:
            raise ValueError(f"duplicate term for covariate {spec.covariate!r}")
        seen.add(spec.covariate)

    flags: list[str] = []
    blocks: list[_ParamBlock] = []
    comps: list[_SmoothComp] = []
    kept_specs: list[TermSpec] = []
    df_global_cap = max(n / 4.0, 2.0)

    for spec in terms:
        c = data.candidate(spec.covariate)
        form = spec.form
        if form in ("linear", "smooth") and c.kind in ("scalar", "vector"):
            if c.is_constant():
                flags.append(f"dropped:{c.name}")
                continue
            if form == "smooth" and c.kind == "scalar" \
                    and len(np.unique(c.values)) >= MIN_UNIQUE_FOR_SMOOTH:
                comps.append(_SmoothComp(c.name, None, 0,
                                         df_cap=min(spec.df, df_global_cap),
                                         target_df=spec.fixed_df))
            else:
                if form == "smooth":
                    flags.append(f"degraded_to_linear:{c.name}")
                vals = c.values[:, None] if c.values.ndim == 1 else c.values
                blocks.append(_ParamBlock(c.name, "linear", vals.mean(axis=0)))
        elif form == "dummy_set" and c.kind == "categorical":
            one_hot = np.zeros((n, len(c.levels)))
            one_hot[np.arange(n), c.values] = 1.0
            cols = one_hot[:, 1:]
            blocks.append(_ParamBlock(c.name, "dummy", cols.mean(axis=0), levels=c.levels))
        elif form == "fpca_scores" and c.kind == "functional":
            basis = fpca(c, spec.k)
            if basis.truncated:
                flags.append(f"fpca_truncated:{c.name}")
            if spec.score_form == "smooth":
                for r in range(basis.k):
                    comps.append(_SmoothComp(c.name, basis, r,
                                             df_cap=min(spec.df, df_global_cap),
                                             target_df=spec.fixed_df))
            else:
                blocks.append(_ParamBlock(c.name, "scores",
                                          basis.scores.mean(axis=0), basis=basis))
        else:
            raise ValueError(
                f"term form {form!r} does not apply to covariate kind {c.kind!r}"
            )
        kept_specs.append(spec)

    design = np.column_stack([blk.build(data.candidate(blk.term)) for blk in blocks]) \
        if blocks else np.zeros((n, 0))
    smooth_inputs = [comp.input_values(data.candidate(comp.term)) for comp in comps]
    df_caps = [comp.df_cap for comp in comps]
    targets = [comp.target_df for comp in comps]
    lams: list[float | None] = [None] * len(comps)

    if link == "identity":
        sd_y = float(np.std(y)) or 1.0
        state = _backfit(y, np.ones(n), design, smooth_inputs, df_caps, targets,
                         lams, None, sd_y)
        fitted = state.fitted
        mu = fitted
        deviance = float(np.sum((y - fitted) ** 2))
        null_dev = float(np.sum((y - y.mean()) ** 2))
        residuals = y - fitted
        irls_converged = True
    else:
        ybar = min(max(float(y.mean()), 1.0 / (n + 1.0)), n / (n + 1.0))
        null_dev = _binomial_deviance(y, np.full(n, ybar))
        eta = np.full(n, math.log(ybar / (1.0 - ybar)))
        mu = expit(eta)
        state = None
        deviance = _binomial_deviance(y, mu)
        irls_converged = False
        for _ in range(MAX_IRLS):
            w = np.clip(mu * (1.0 - mu), 1e-6, None)
            z = eta + (y - mu) / w
            state = _backfit(z, w, design, smooth_inputs, df_caps, targets,
                             lams, state, max(float(np.std(z)), 1e-8))
            eta = np.clip(state.fitted, -ETA_CLIP, ETA_CLIP)
            mu = expit(eta)
            new_dev = _binomial_deviance(y, mu)
            if abs(new_dev - deviance) < max(1e-8 * null_dev, 1e-10):
                deviance = new_dev
                irls_converged = True
                break
            deviance = new_dev
        fitted = mu
        residuals = y - mu

    if not state.converged or not irls_converged:
        flags.append("non_convergent")

    # smooth_values are the centered contributions; the raw spline keeps the
    # constant, so the prediction-time center is their difference
    for j, comp in enumerate(comps):
        comp.fit = state.fits[j]
        comp.center = float(np.mean(comp.fit.fitted - state.smooth_values[j]))

    term_edf: dict[str, float] = {}
    for blk in blocks:
        term_edf[blk.term] = term_edf.get(blk.term, 0.0) + blk.width
    for j, comp in enumerate(comps):
        term_edf[comp.term] = term_edf.get(comp.term, 0.0) + state.smooth_edfs[j]
    edf = 1.0 + state.param_rank + float(np.sum(state.smooth_edfs))

    if null_dev <= 0 or (not blocks and not comps):
        dev_expl = 0.0
    else:
        dev_expl = min(max(1.0 - deviance / null_dev, 0.0), 1.0)
    return AdditiveModel(
        link=link,
        intercept=state.alpha,
        beta=state.beta,
        param_blocks=blocks,
        smooth_comps=comps,
        term_specs=tuple(kept_specs),
        term_edf=term_edf,
        fitted=fitted,
        residuals=residuals,
        edf=edf,
        deviance=deviance,
        null_deviance=null_dev,
        deviance_explained=dev_expl,
        n=n,
        flags=tuple(flags),
        response_levels=data.response.levels,
    )


def compare_models(reduced: AdditiveModel, full: AdditiveModel,
                   alpha_model: float = 0.05) -> ModelComparison:
    """Approximate nested-model test.

    Identity link: F-test on the RSS drop per effective degree of freedom.
    Logit link: chi-square test on the deviance difference.  A full model
    with no effective-df gain is a degenerate comparison and is rejected.
    """
    if reduced.link != full.link or reduced.n != full.n:
        raise ValueError("models must share link and data")
    if not set(t.covariate for t in reduced.term_specs) <= set(
            t.covariate for t in full.term_specs):
        raise ValueError("reduced model terms must be a subset of the full model's")
    df_num = full.edf - reduced.edf
    if df_num <= 1e-9:
        return ModelComparison(0.0, 1.0, False, max(df_num, 0.0), 0.0, "degenerate")
    if full.link == "identity":
        df_den = full.n - full.edf
        if df_den <= 1e-9 or full.deviance <= 0.0:
            return ModelComparison(0.0, 1.0, False, df_num, max(df_den, 0.0), "degenerate")
        stat = max(reduced.deviance - full.deviance, 0.0) / df_num / (full.deviance / df_den)
        p = float(sps.f.sf(stat, df_num, df_den))
        return ModelComparison(stat, p, p <= alpha_model, df_num, df_den)
    stat = max(reduced.deviance - full.deviance, 0.0)
    p = float(sps.chi2.sf(stat, df_num))
    return ModelComparison(stat, p, p <= alpha_model, df_num, 0.0)


COMPARISON_DF = 4.0  # fixed smooth df used by the smooth-vs-linear gate


def candidate_term_variants(c: Covariate, catalog: str,
                            df: float = 8.0, k: int = 4) -> list[TermSpec]:
    """The admissible term forms of a candidate under a catalog, ordered
    from simplest to richest."""
    if catalog not in ("linear_only", "linear_or_smooth"):
        raise ValueError(f"unknown catalog {catalog!r}")
    if c.kind == "categorical":
        return [TermSpec(c.name, "dummy_set")]
    if c.kind == "functional":
        variants = [TermSpec(c.name, "fpca_scores", df=df, k=k, score_form="linear")]
        if catalog == "linear_or_smooth":
            variants.append(TermSpec(c.name, "fpca_scores", df=df, k=k, score_form="smooth"))
        return variants
    if c.kind == "vector":
        return [TermSpec(c.name, "linear")]
    variants = [TermSpec(c.name, "linear")]
    if catalog == "linear_or_smooth":
        variants.append(TermSpec(c.name, "smooth", df=df))
    return variants


def choose_contribution(current: AdditiveModel, candidate: Covariate,
                        data: Dataset, catalog: str = "linear_or_smooth",
                        alpha_model: float = 0.05, df: float = 8.0,
                        k: int = 4) -> tuple[AdditiveModel, bool]:
    """Refit with the candidate appended under each admissible form and
    test whether the best extension beats the current model.

    Existing terms keep their chosen forms.  Under ``linear_or_smooth`` the
    linear form is preferred unless the smooth-vs-linear nested comparison
    accepts the smooth one; that gate fits the candidate's smooth pieces at
    a fixed effective df so the F-test is not biased by data-driven df
    selection, and only the accepted form is refit with GCV smoothing.
    """
    if candidate.name in current.term_names:
        raise ValueError(f"candidate {candidate.name!r} is already in the model")
    variants = candidate_term_variants(candidate, catalog, df=df, k=k)
    base = list(current.term_specs)
    best = fit_additive(data, base + [variants[0]], link=current.link)
    for richer_spec in variants[1:]:
        gate_fit = fit_additive(
            data, base + [replace(richer_spec, fixed_df=COMPARISON_DF)],
            link=current.link)
        if compare_models(best, gate_fit, alpha_model).accept_full:
            best = fit_additive(data, base + [richer_spec], link=current.link)
    accepted = compare_models(current, best, alpha_model).accept_full
    return best, accepted
