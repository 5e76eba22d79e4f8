"""Simulation scenario generators and the benchmark harness.

Eight designs are provided.  YR1-YR5 are scalar-covariate regressions with
p=8 candidates (linear, nonlinear, and correlated-design variants);
FUN_INDEP / FUN_COLLIN mix five functional covariates (Ornstein-Uhlenbeck
paths on [0, 1]) with five scalars, optionally overwriting some candidates
with near-copies of the relevant ones; CLASS_CROWN is a binary
classification problem whose two relevant coordinates live on a circular
crown among 48 noise variables.

``run_benchmark`` repeats generate -> select -> score over seeded
replications and aggregates per-candidate selection frequencies and
held-out prediction error.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data_model import (
    Covariate,
    Dataset,
    categorical_covariate,
    functional_covariate,
    rmspe,
    scalar_covariate,
    trapezoid_weights,
)
from .selector import SelectorConfig, SelectionState, run_selection

__all__ = [
    "ScenarioSpec",
    "Replication",
    "BenchResult",
    "scenario",
    "generate",
    "candidate_names",
    "gen_yr",
    "gen_functional",
    "gen_classification",
    "ou_paths",
    "run_benchmark",
    "SCENARIO_IDS",
]

SCENARIO_IDS = ("YR1", "YR2", "YR3", "YR4", "YR5",
                "FUN_INDEP", "FUN_COLLIN", "CLASS_CROWN")

FUN_GRID_SIZE = 101
# Ornstein-Uhlenbeck parameters: dX = -X dt + dW started from the
# stationary law N(0, 1/2); sampled exactly through the AR(1) transition.
OU_RATE = 1.0
OU_VOL = 1.0


@dataclass(frozen=True)
class ScenarioSpec:
    """A simulation design plus its sample sizes and replication count."""

    id: str
    n_train: int
    n_test: int
    B: int = 1
    theta: float = 0.6
    a: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        if self.id not in SCENARIO_IDS:
            raise ValueError(f"unknown scenario {self.id!r}")
        if not (-1.0 < self.theta < 1.0):
            raise ValueError("theta must lie in (-1, 1)")
        if self.B < 1:
            raise ValueError("B must be >= 1")
        if any(v <= 0 for v in self.a):
            raise ValueError("all entries of a must be positive")


def scenario(scenario_id: str, B: int = 1,
             a: tuple[float, float, float, float] | None = None,
             n_train: int | None = None, n_test: int | None = None) -> ScenarioSpec:
    """Scenario spec with the design's default sample sizes."""
    if scenario_id.startswith("YR"):
        defaults = (100, 100)
    elif scenario_id.startswith("FUN"):
        defaults = (200, 200)
    else:
        defaults = (1000, 200)
    return ScenarioSpec(
        scenario_id,
        n_train if n_train is not None else defaults[0],
        n_test if n_test is not None else defaults[1],
        B=B,
        a=tuple(a) if a is not None else (1.0, 1.0, 1.0, 1.0),
    )


def _rng(seed: int, *tags: int) -> np.random.Generator:
    words = [t if t >= 0 else (1 << 63) + t for t in (seed, *tags)]
    return np.random.default_rng(np.random.SeedSequence(words))


def _yr_covariates(spec: ScenarioSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    p = 8
    if spec.id == "YR1":
        return rng.normal(size=(n, p))
    if spec.id == "YR2":
        z = np.empty((n, p))
        z[:, 0] = rng.normal(size=n)
        z[:, 1] = rng.normal(scale=2.0, size=n)
        z[:, 2] = rng.uniform(-1.5, 1.5, size=n)
        z[:, 3:] = rng.uniform(-1.0, 1.0, size=(n, 5))
        return z
    if spec.id == "YR3":
        z = np.empty((n, p))
        z[:, 0] = rng.normal(scale=1.4, size=n)
        z[:, 1] = rng.uniform(-1.7, 1.7, size=n)
        z[:, 2] = rng.normal(scale=0.8, size=n)
        z[:, 3:] = rng.normal(size=(n, 5))
        return z
    if spec.id == "YR4":
        cov = np.full((p, p), spec.theta)
        np.fill_diagonal(cov, 1.0)
    else:  # YR5
        idx = np.arange(p)
        cov = spec.theta ** np.abs(idx[:, None] - idx[None, :])
    chol = np.linalg.cholesky(cov)
    return rng.normal(size=(n, p)) @ chol.T


def _yr_response(spec: ScenarioSpec, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = z.shape[0]
    if spec.id in ("YR1", "YR4", "YR5"):
        return z[:, 0] + z[:, 1] + z[:, 2] + rng.normal(scale=2.0, size=n)
    if spec.id == "YR2":
        eps = rng.normal(size=n)
        return np.log(4.0 + np.sin(3.0 * z[:, 0]) + np.sin(z[:, 1])
                      + z[:, 2] ** 2 + z[:, 3] + 0.1 * eps)
    return np.abs(z[:, 0]) + z[:, 1] ** 2 + z[:, 2] ** 2  # YR3, noiseless


def _yr_dataset(spec: ScenarioSpec, rng: np.random.Generator, n: int) -> Dataset:
    z = _yr_covariates(spec, rng, n)
    y = _yr_response(spec, z, rng)
    cands = tuple(scalar_covariate(f"Z{j + 1}", z[:, j]) for j in range(z.shape[1]))
    return Dataset(scalar_covariate("Y", y), cands)


def gen_yr(spec: ScenarioSpec, seed: int) -> tuple[Dataset, Dataset]:
    """Train and test datasets for the YR designs (disjoint seed substreams)."""
    if not spec.id.startswith("YR"):
        raise ValueError(f"{spec.id} is not a YR scenario")
    train = _yr_dataset(spec, _rng(seed, 0), spec.n_train)
    test = _yr_dataset(spec, _rng(seed, 1), spec.n_test)
    return train, test


def ou_paths(rng: np.random.Generator, n: int, grid: np.ndarray,
             rate: float = OU_RATE, vol: float = OU_VOL) -> np.ndarray:
    """Exact sample paths of a stationary Ornstein-Uhlenbeck process.

    The transition over a step h is Gaussian AR(1) with factor exp(-rate*h)
    and innovation variance vol^2/(2*rate) * (1 - exp(-2*rate*h)), so there
    is no discretization error at the grid points.
    """
    stat_var = vol * vol / (2.0 * rate)
    paths = np.empty((n, grid.size))
    paths[:, 0] = rng.normal(scale=math.sqrt(stat_var), size=n)
    steps = np.diff(grid)
    for g, h in enumerate(steps, start=1):
        phi = math.exp(-rate * h)
        innov_sd = math.sqrt(stat_var * (1.0 - phi * phi))
        paths[:, g] = phi * paths[:, g - 1] + rng.normal(scale=innov_sd, size=n)
    return paths


def _fun_dataset(spec: ScenarioSpec, rng: np.random.Generator, n: int) -> Dataset:
    grid = np.linspace(0.0, 1.0, FUN_GRID_SIZE)
    w = trapezoid_weights(grid)
    x = [ou_paths(rng, n, grid) for _ in range(5)]
    z = [rng.uniform(0.0, 1.0, size=n), rng.normal(size=n), rng.normal(size=n),
         rng.uniform(0.0, 1.0, size=n), rng.normal(size=n)]
    if spec.id == "FUN_COLLIN":
        x[2] = 0.95 * x[0] + 0.05 * x[2]
        x[3] = 0.95 * x[1] + 0.05 * x[3]
        z[2] = 0.95 * z[0] + 0.05 * z[2]
        z[3] = 0.95 * z[1] + 0.05 * z[3]
    a1, a2, a3, a4 = spec.a
    beta1 = 2.0 * grid + np.sin(4.0 * np.pi * grid + 0.1)
    inner = x[0] @ (w * beta1)
    sq_norm = np.sqrt((x[1] ** 4) @ w)  # L2 norm of the squared path
    eps = rng.normal(scale=0.25, size=n)
    y = 10.0 + a1 * inner + a2 * sq_norm + 3.0 * a3 * z[0] + a4 * z[1] ** 2 + eps
    star = "*" if spec.id == "FUN_COLLIN" else ""
    cands = tuple(
        functional_covariate(f"X{j + 1}{star if j in (2, 3) else ''}", grid, x[j])
        for j in range(5)
    ) + tuple(
        scalar_covariate(f"Z{j + 1}{star if j in (2, 3) else ''}", z[j])
        for j in range(5)
    )
    return Dataset(scalar_covariate("Y", y), cands)


def gen_functional(spec: ScenarioSpec, seed: int) -> tuple[Dataset, Dataset]:
    """Train and test datasets for the functional designs."""
    if not spec.id.startswith("FUN"):
        raise ValueError(f"{spec.id} is not a functional scenario")
    train = _fun_dataset(spec, _rng(seed, 0), spec.n_train)
    test = _fun_dataset(spec, _rng(seed, 1), spec.n_test)
    return train, test


def _crown_dataset(rng: np.random.Generator, n: int) -> Dataset:
    # rejection-sample (X1, X2) into the crown 0.6 <= ||(X1, X2)|| <= 1
    xs = np.empty((0, 2))
    while xs.shape[0] < n:
        draw = rng.uniform(-1.0, 1.0, size=(4 * n, 2))
        norms = np.linalg.norm(draw, axis=1)
        keep = draw[(norms >= 0.6) & (norms <= 1.0)]
        xs = np.vstack([xs, keep])
    xs = xs[:n]
    labels = (np.linalg.norm(xs, axis=1) > 0.8).astype(int)
    noise = rng.uniform(-1.0, 1.0, size=(n, 48))
    cands = (scalar_covariate("X1", xs[:, 0]), scalar_covariate("X2", xs[:, 1]))
    cands += tuple(scalar_covariate(f"Z{j + 1}", noise[:, j]) for j in range(48))
    resp = categorical_covariate("Y", [str(v) for v in labels], levels=("0", "1"))
    return Dataset(resp, cands)


def gen_classification(spec: ScenarioSpec, seed: int) -> tuple[Dataset, Dataset]:
    """Train and test datasets for the circular-crown classification design."""
    if spec.id != "CLASS_CROWN":
        raise ValueError(f"{spec.id} is not the classification scenario")
    return _crown_dataset(_rng(seed, 0), spec.n_train), _crown_dataset(_rng(seed, 1), spec.n_test)


def generate(spec: ScenarioSpec, seed: int) -> tuple[Dataset, Dataset]:
    if spec.id.startswith("YR"):
        return gen_yr(spec, seed)
    if spec.id.startswith("FUN"):
        return gen_functional(spec, seed)
    return gen_classification(spec, seed)


def candidate_names(spec: ScenarioSpec) -> list[str]:
    """Candidate names of a scenario, in generation order."""
    if spec.id.startswith("YR"):
        return [f"Z{j}" for j in range(1, 9)]
    if spec.id.startswith("FUN"):
        star = "*" if spec.id == "FUN_COLLIN" else ""
        return ["X1", "X2", f"X3{star}", f"X4{star}", "X5",
                "Z1", "Z2", f"Z3{star}", f"Z4{star}", "Z5"]
    return ["X1", "X2"] + [f"Z{j}" for j in range(1, 49)]


@dataclass(frozen=True)
class Replication:
    """Outcome of one replication: its seed, selected covariates (in order),
    and held-out metrics."""

    seed: int
    selected: tuple[str, ...]
    rmspe: float | None
    misclassification: float | None


@dataclass
class BenchResult:
    """Aggregated benchmark outcome over B replications."""

    scenario: ScenarioSpec
    config: SelectorConfig
    candidate_names: list[str]
    frequencies: dict[str, float]
    mean_rmspe: float | None
    mean_misclassification: float | None
    replications: list[Replication]
    failures: int = 0


def _replicate(spec: ScenarioSpec, config: SelectorConfig, rep_seed: int) -> Replication:
    train, test = generate(spec, rep_seed)
    model, state = run_selection(train, replace(config, seed=rep_seed))
    test_map = test.candidate_map()
    if model.link == "identity":
        pred = model.predict(test_map)
        return Replication(rep_seed, tuple(state.selected_names),
                           rmspe(test.response.values, pred), None)
    classes = model.predict_class(test_map)
    miss = float(np.mean(classes != test.response.values))
    return Replication(rep_seed, tuple(state.selected_names), None, miss)


def run_benchmark(spec: ScenarioSpec, config: SelectorConfig,
                  n_jobs: int = 1) -> BenchResult:
    """Run B seeded replications of generate -> select -> score.

    Replications use disjoint seed substreams derived from ``config.seed``
    and can run in parallel processes; failed replications are excluded and
    counted.
    """
    rep_seeds = [int(_rng(config.seed, 100 + b).integers(0, 2 ** 62)) for b in range(spec.B)]
    reps: list[Replication] = []
    failures = 0
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(_replicate, spec, config, s) for s in rep_seeds]
            for fut in futures:
                try:
                    reps.append(fut.result())
                except Exception:
                    failures += 1
    else:
        for s in rep_seeds:
            try:
                reps.append(_replicate(spec, config, s))
            except Exception:
                failures += 1

    names = candidate_names(spec)
    counts = {name: 0 for name in names}
    for rep in reps:
        for name in rep.selected:
            counts[name] = counts.get(name, 0) + 1
    total = max(len(reps), 1)
    freqs = {name: counts.get(name, 0) / total for name in names}
    rmspes = [r.rmspe for r in reps if r.rmspe is not None]
    misses = [r.misclassification for r in reps if r.misclassification is not None]
    return BenchResult(
        scenario=spec,
        config=config,
        candidate_names=names,
        frequencies=freqs,
        mean_rmspe=float(np.mean(rmspes)) if rmspes else None,
        mean_misclassification=float(np.mean(misses)) if misses else None,
        replications=reps,
        failures=failures,
    )
