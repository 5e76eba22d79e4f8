"""Forward selection driven by distance correlation with residuals.

Starting from the null model, each round screens every remaining candidate
against the current residuals (distance correlation plus a permutation test
of independence), picks the highest-dCor candidate among those rejecting
independence, and lets the model catalog decide its contribution.  A
candidate whose contribution fails the nested-model test is discarded for
the rest of the run and the walk continues down the same screening order
(the residuals are unchanged, so the dCor values are too).  The loop stops
when no remaining candidate rejects independence, when the candidate set is
exhausted, or at the iteration cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .additive import (
    AdditiveModel,
    TermSpec,
    choose_contribution,
    compare_models,
    fit_additive,
)
from .data_model import Covariate, Dataset, scalar_covariate
from .dcor import (
    DEFAULT_MEMORY_BUDGET,
    DistanceMatrixCache,
    ScreenResult,
    independence_test,
    screen_candidates,
)

__all__ = [
    "SelectorConfig",
    "TraceRow",
    "SelectionEvent",
    "SelectionState",
    "run_selection",
    "diagnose_saturation",
]


@dataclass(frozen=True)
class SelectorConfig:
    """Tuning knobs of one selection run."""

    alpha_screen: float = 0.05
    alpha_model: float = 0.05
    n_perm: int = 499
    catalog: str = "linear_or_smooth"
    max_iterations: int | None = None
    seed: int = 0
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    block_size: int | None = None
    smooth_df: float = 8.0
    fpca_components: int = 4

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha_screen < 1.0 and 0.0 < self.alpha_model < 1.0):
            raise ValueError("alpha_screen and alpha_model must lie in (0, 1)")
        if self.n_perm < 1:
            raise ValueError("n_perm must be >= 1")
        if self.catalog not in ("linear_only", "linear_or_smooth"):
            raise ValueError(f"unknown catalog {self.catalog!r}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.block_size is not None and self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.memory_budget < 1:
            raise ValueError("memory_budget must be positive")


@dataclass(frozen=True)
class TraceRow:
    """One screening entry: candidate dCor against the residuals at a given
    iteration, its p-value, and the test-filtered value."""

    iteration: int
    candidate: str
    dcor: float
    p_value: float
    filtered: float


@dataclass(frozen=True)
class SelectionEvent:
    iteration: int
    candidate: str
    action: str  # "accepted" | "rejected"
    form: str
    statistic: float = 0.0
    p_value: float = 1.0


@dataclass
class SelectionState:
    """Full record of a selection run."""

    M: list[tuple[str, TermSpec]] = field(default_factory=list)
    S: list[str] = field(default_factory=list)
    rejected: list[str] = field(default_factory=list)
    residuals: np.ndarray | None = None
    current_model: AdditiveModel | None = None
    iteration: int = 0
    n_screens: int = 0
    trace: list[TraceRow] = field(default_factory=list)
    events: list[SelectionEvent] = field(default_factory=list)

    @property
    def selected_names(self) -> list[str]:
        return [name for name, _ in self.M]


def _derived_seed(seed: int, *tags: int) -> int:
    words = [t if t >= 0 else (1 << 63) + t for t in (seed, *tags)]
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


def _residual_covariate(model: AdditiveModel, data: Dataset) -> Covariate:
    return scalar_covariate("(residuals)", model.residuals)


def _screening_target(model: AdditiveModel, data: Dataset, state: SelectionState) -> Covariate:
    # before any model update, a categorical response is screened under its
    # own 0/sqrt(2) metric; afterwards residuals are real-valued
    if data.response.kind == "categorical" and state.iteration == 0:
        return data.response
    return _residual_covariate(model, data)


def run_selection(data: Dataset, config: SelectorConfig) -> tuple[AdditiveModel, SelectionState]:
    """Run the forward-selection loop and return the final model and state.

    Deterministic given ``config.seed``.
    """
    if data.n < 10:
        raise ValueError("selection needs at least 10 observations")
    if not data.candidates:
        raise ValueError("selection needs at least one candidate")

    link = "logit" if data.response.kind == "categorical" else "identity"
    model = fit_additive(data, [], link)
    state = SelectionState(S=list(data.candidate_names))
    state.current_model = model
    state.residuals = model.residuals
    cache = DistanceMatrixCache(config.memory_budget)
    max_iter = config.max_iterations or len(data.candidates)
    cand_map = data.candidate_map()

    while state.S:
        target = _screening_target(model, data, state)
        remaining = [cand_map[name] for name in state.S]
        state.n_screens += 1
        rows = screen_candidates(
            target, remaining, config.n_perm,
            _derived_seed(config.seed, 1, state.n_screens),
            alpha=config.alpha_screen, cache=cache,
            memory_budget=config.memory_budget, block_size=config.block_size,
        )
        for row in rows:
            state.trace.append(TraceRow(state.n_screens, row.name, row.dcor,
                                        row.p_value, row.filtered))
        ranked = sorted(
            (r for r in rows if r.significant and r.dcor > 0.0),
            key=lambda r: (-r.dcor, state.S.index(r.name)),
        )
        accepted_one = False
        for row in ranked:
            candidate = cand_map[row.name]
            state.S.remove(row.name)
            best, accepted = choose_contribution(
                model, candidate, data, config.catalog,
                alpha_model=config.alpha_model, df=config.smooth_df,
                k=config.fpca_components,
            )
            cmp = compare_models(model, best, config.alpha_model)
            if accepted:
                spec = best.term_specs[-1]
                state.M.append((row.name, spec))
                state.events.append(SelectionEvent(state.n_screens, row.name,
                                                   "accepted", spec.form,
                                                   cmp.statistic, cmp.p_value))
                model = best
                state.current_model = model
                state.residuals = model.residuals
                state.iteration += 1
                accepted_one = True
                break
            state.rejected.append(row.name)
            state.events.append(SelectionEvent(state.n_screens, row.name,
                                               "rejected", "",
                                               cmp.statistic, cmp.p_value))
        if not accepted_one or state.iteration >= max_iter:
            break

    return model, state


def diagnose_saturation(model: AdditiveModel, data: Dataset,
                        config: SelectorConfig) -> list[tuple[str, float, float]]:
    """Independence test of each covariate already in the model against the
    current residuals.

    Purely diagnostic: a significant entry means the chosen contribution is
    not absorbing all the information of that covariate.  Never feeds back
    into the selection loop.
    """
    if not model.term_specs:
        raise ValueError("diagnose_saturation needs a model with at least one term")
    residuals = scalar_covariate("(residuals)", model.residuals)
    out = []
    for idx, spec in enumerate(model.term_specs):
        c = data.candidate(spec.covariate)
        res = independence_test(
            residuals, c, config.n_perm, _derived_seed(config.seed, 2, idx),
            memory_budget=config.memory_budget, block_size=config.block_size,
        )
        out.append((spec.covariate, res.dcor, res.p_value))
    return out
