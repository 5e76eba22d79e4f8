"""Empirical distance correlation, blockwise evaluation, and permutation tests.

Given pairwise distance matrices a_kl and b_kl of two samples, both are
double centered::

    A_kl = a_kl - rowmean_k - colmean_l + grandmean

and the dependence statistics are the V-statistics::

    dcov2  = sum(A * B) / N^2
    dvar_x = sum(A * A) / N^2      (same for dvar_y)
    dcor   = sqrt( dcov2 / sqrt(dvar_x * dvar_y) )

``dcor`` is 0 by convention when either sample is constant (zero distance
variance).  The blockwise path evaluates the same sums from L x L distance
tiles recomputed on the fly, so peak auxiliary memory is O(L^2 + N) and
arbitrary sample sizes stay within a fixed budget.  The permutation test of
independence permutes observation indices of one sample; distances are
re-gathered, never recomputed from raw values in the direct path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .data_model import Covariate, distance_matrix

__all__ = [
    "CenteringStats",
    "DCorResult",
    "BlockPlan",
    "MemoryBudgetError",
    "DistanceMatrixCache",
    "ScreenResult",
    "centering_stats",
    "double_center",
    "dcor_direct",
    "dcor_blockwise",
    "dcor_auto",
    "independence_test",
    "screen_candidates",
    "matrix_bytes",
    "auto_block_size",
]

DEFAULT_MEMORY_BUDGET = 1 << 30  # 1 GiB


class MemoryBudgetError(MemoryError):
    """Raised when a direct N x N computation would exceed the memory budget."""


@dataclass(frozen=True)
class CenteringStats:
    """Row sums and grand sum of a pairwise distance matrix."""

    row_sums: np.ndarray
    grand_sum: float
    n: int


@dataclass(frozen=True)
class DCorResult:
    """Distance-correlation statistics for one pair of samples."""

    dcor: float
    dcov2: float
    dvar_x: float
    dvar_y: float
    p_value: float | None = None


@dataclass(frozen=True)
class BlockPlan:
    """Tiling plan for blockwise evaluation with L x L submatrices."""

    block_size: int

    def __post_init__(self) -> None:
        if self.block_size < 1:
            raise ValueError("block size must be >= 1")

    def n_blocks(self, n: int) -> int:
        return -(-n // self.block_size)

    def passes(self, n: int) -> int:
        """Number of L x L tile pairs visited in one accumulation pass."""
        return self.n_blocks(n) ** 2

    def blocks(self, n: int) -> Iterable[slice]:
        for start in range(0, n, self.block_size):
            yield slice(start, min(start + self.block_size, n))


def matrix_bytes(n: int) -> int:
    """Paper-style accounting of one stored distance matrix (float64)."""
    return max(n * (n - 1) // 2 - n, 0) * 8


def auto_block_size(budget_bytes: int) -> int:
    """Largest power-of-two L whose L x L float64 tile fits the budget."""
    size = 1
    while (2 * size) ** 2 * 8 <= max(budget_bytes, 8):
        size *= 2
    return size


def centering_stats(c: Covariate, block_size: int | None = None) -> CenteringStats:
    """Exact row sums and grand sum of the full pairwise distance matrix.

    With ``block_size`` set, the matrix is streamed in L x L tiles and never
    materialized; otherwise it is computed in one shot.
    """
    n = c.n
    if n < 2:
        raise ValueError("centering stats need at least 2 observations")
    feats = c.feature_matrix()
    if block_size is None:
        d = cdist(feats, feats)
        row_sums = d.sum(axis=1)
        return CenteringStats(row_sums, float(row_sums.sum()), n)
    plan = BlockPlan(block_size)
    row_sums = np.zeros(n)
    for rows in plan.blocks(n):
        for cols in plan.blocks(n):
            row_sums[rows] += cdist(feats[rows], feats[cols]).sum(axis=1)
    return CenteringStats(row_sums, float(row_sums.sum()), n)


def double_center(d: np.ndarray) -> np.ndarray:
    """Subtract row and column means and add back the grand mean."""
    n = d.shape[0]
    row = d.sum(axis=1) / n
    grand = row.sum() / n
    return d - row[:, None] - row[None, :] + grand


def _center_tile(tile: np.ndarray, stats: CenteringStats,
                 rows: slice, cols: slice) -> np.ndarray:
    n = stats.n
    out = tile - stats.row_sums[rows, None] / n
    out -= stats.row_sums[None, cols] / n
    out += stats.grand_sum / (n * n)
    return out


def _stats_from_centered(a: np.ndarray, b: np.ndarray) -> DCorResult:
    n = a.shape[0]
    dcov2 = float(np.sum(a * b)) / (n * n)
    dvar_x = float(np.sum(a * a)) / (n * n)
    dvar_y = float(np.sum(b * b)) / (n * n)
    return _assemble(dcov2, dvar_x, dvar_y)


def _assemble(dcov2: float, dvar_x: float, dvar_y: float) -> DCorResult:
    if dvar_x <= 0.0 or dvar_y <= 0.0:
        return DCorResult(0.0, max(dcov2, 0.0), max(dvar_x, 0.0), max(dvar_y, 0.0))
    ratio = dcov2 / math.sqrt(dvar_x * dvar_y)
    dcor = math.sqrt(max(ratio, 0.0))
    return DCorResult(dcor, dcov2, dvar_x, dvar_y)


def _check_pair(x: Covariate, y: Covariate) -> int:
    if x.n != y.n:
        raise ValueError(
            f"covariates {x.name!r} and {y.name!r} have different sample sizes"
        )
    if x.n < 2:
        raise ValueError("distance correlation needs at least 2 observations")
    return x.n


def dcor_direct(x: Covariate, y: Covariate,
                memory_budget: int | None = None) -> DCorResult:
    """Distance correlation from fully materialized distance matrices.

    Raises :class:`MemoryBudgetError` when two N x N float64 matrices would
    not fit in ``memory_budget``; callers should fall back to
    :func:`dcor_blockwise` in that case.
    """
    n = _check_pair(x, y)
    if memory_budget is not None and 2 * n * n * 8 > memory_budget:
        raise MemoryBudgetError(
            f"direct mode needs ~{2 * n * n * 8} bytes for two {n}x{n} matrices, "
            f"exceeding the budget of {memory_budget} bytes; "
            f"use dcor_blockwise with block size {auto_block_size(memory_budget // 8)}"
        )
    a = double_center(distance_matrix(x))
    b = double_center(distance_matrix(y))
    return _stats_from_centered(a, b)


def dcor_blockwise(x: Covariate, y: Covariate, plan: BlockPlan) -> DCorResult:
    """Distance correlation accumulated from L x L tiles.

    Two passes: the first collects :class:`CenteringStats` for both samples,
    the second re-streams distance tiles, centers them on the fly and
    accumulates the three sums.  Agrees with :func:`dcor_direct` up to
    floating-point associativity.
    """
    n = _check_pair(x, y)
    stats_x = centering_stats(x, plan.block_size)
    stats_y = centering_stats(y, plan.block_size)
    return _blockwise_from_stats(x, y, stats_x, stats_y, plan)


def _blockwise_from_stats(x: Covariate, y: Covariate,
                          stats_x: CenteringStats, stats_y: CenteringStats,
                          plan: BlockPlan,
                          perm: np.ndarray | None = None) -> DCorResult:
    """Accumulation pass; ``perm`` applies a permutation to y's indices."""
    n = stats_x.n
    feats_x = x.feature_matrix()
    feats_y = y.feature_matrix()
    y_rows = stats_y.row_sums if perm is None else stats_y.row_sums[perm]
    sum_ab = sum_a2 = sum_b2 = 0.0
    for rows in plan.blocks(n):
        fy_r = feats_y[rows] if perm is None else feats_y[perm[rows]]
        for cols in plan.blocks(n):
            a = cdist(feats_x[rows], feats_x[cols])
            a -= stats_x.row_sums[rows, None] / n
            a -= stats_x.row_sums[None, cols] / n
            a += stats_x.grand_sum / (n * n)
            fy_c = feats_y[cols] if perm is None else feats_y[perm[cols]]
            b = cdist(fy_r, fy_c)
            b -= y_rows[rows, None] / n
            b -= y_rows[None, cols] / n
            b += stats_y.grand_sum / (n * n)
            sum_ab += float(np.sum(a * b))
            sum_a2 += float(np.sum(a * a))
            sum_b2 += float(np.sum(b * b))
    n2 = n * n
    return _assemble(sum_ab / n2, sum_a2 / n2, sum_b2 / n2)


def dcor_auto(x: Covariate, y: Covariate,
              memory_budget: int | None = DEFAULT_MEMORY_BUDGET,
              block_size: int | None = None) -> DCorResult:
    """Direct mode when the matrices fit the budget, blockwise otherwise."""
    try:
        return dcor_direct(x, y, memory_budget)
    except MemoryBudgetError:
        size = block_size or auto_block_size((memory_budget or DEFAULT_MEMORY_BUDGET) // 8)
        return dcor_blockwise(x, y, BlockPlan(size))


def independence_test(x: Covariate, y: Covariate, n_perm: int, seed: int,
                      memory_budget: int | None = DEFAULT_MEMORY_BUDGET,
                      block_size: int | None = None) -> DCorResult:
    """Permutation test of independence based on the distance covariance.

    The observation indices of ``y`` are permuted ``n_perm`` times; the
    returned p-value is ``(1 + #{permuted dcov2 >= observed}) / (n_perm + 1)``.
    Deterministic given ``seed``.
    """
    n = _check_pair(x, y)
    if n < 4:
        raise ValueError("independence test needs at least 4 observations")
    if n_perm < 1:
        raise ValueError("n_perm must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([_nonneg(seed)]))
    fits_direct = memory_budget is None or 2 * n * n * 8 <= memory_budget
    if fits_direct:
        a = double_center(distance_matrix(x))
        b = double_center(distance_matrix(y))
        observed = _stats_from_centered(a, b)
        if observed.dvar_x <= 0.0 or observed.dvar_y <= 0.0:
            return replace(observed, p_value=1.0)
        count = 0
        n2 = n * n
        for _ in range(n_perm):
            perm = rng.permutation(n)
            stat = float(np.sum(a * b[np.ix_(perm, perm)])) / n2
            if stat >= observed.dcov2:
                count += 1
        return replace(observed, p_value=(1 + count) / (n_perm + 1))

    plan = BlockPlan(block_size or auto_block_size((memory_budget or DEFAULT_MEMORY_BUDGET) // 8))
    stats_x = centering_stats(x, plan.block_size)
    stats_y = centering_stats(y, plan.block_size)
    observed = _blockwise_from_stats(x, y, stats_x, stats_y, plan)
    if observed.dvar_x <= 0.0 or observed.dvar_y <= 0.0:
        return replace(observed, p_value=1.0)
    count = 0
    for _ in range(n_perm):
        perm = rng.permutation(n)
        stat = _blockwise_from_stats(x, y, stats_x, stats_y, plan, perm=perm)
        if stat.dcov2 >= observed.dcov2:
            count += 1
    return replace(observed, p_value=(1 + count) / (n_perm + 1))


def _nonneg(seed: int) -> int:
    return seed if seed >= 0 else (1 << 63) + seed


class DistanceMatrixCache:
    """Budget-bounded cache of double-centered distance matrices.

    Screening recomputes distance correlations against the same candidates
    at every iteration, so their centered matrices are computed once and
    reused while they fit the budget.  Entries beyond the budget are simply
    not cached and fall back to per-query computation.
    """

    def __init__(self, memory_budget: int | None = DEFAULT_MEMORY_BUDGET) -> None:
        self.memory_budget = memory_budget
        self._entries: dict[str, tuple[np.ndarray, float]] = {}
        self._bytes = 0

    def centered(self, c: Covariate) -> tuple[np.ndarray, float]:
        """Centered matrix and its distance variance, cached when affordable."""
        hit = self._entries.get(c.name)
        if hit is not None:
            return hit
        a = double_center(distance_matrix(c))
        dvar = float(np.sum(a * a)) / (c.n * c.n)
        cost = a.nbytes
        if self.memory_budget is None or self._bytes + cost <= self.memory_budget:
            self._entries[c.name] = (a, dvar)
            self._bytes += cost
        return a, dvar

    def fits_direct(self, n: int) -> bool:
        return self.memory_budget is None or 2 * n * n * 8 <= self.memory_budget


@dataclass(frozen=True)
class ScreenResult:
    """Screening row for one candidate: dCor against the residuals and the
    permutation p-value, plus the test-filtered value used in reports."""

    name: str
    dcor: float
    p_value: float
    alpha: float

    @property
    def significant(self) -> bool:
        return self.p_value <= self.alpha

    @property
    def filtered(self) -> float:
        return self.dcor if self.significant else 0.0


def screen_candidates(residuals: Covariate, candidates: Sequence[Covariate],
                      n_perm: int, seed: int, alpha: float = 0.05,
                      cache: DistanceMatrixCache | None = None,
                      memory_budget: int | None = DEFAULT_MEMORY_BUDGET,
                      block_size: int | None = None) -> list[ScreenResult]:
    """Distance correlation and independence p-value of every candidate
    against the residuals.

    Output order is the input order.  All candidates share one stream of
    residual-side permutations (statistically equivalent to permuting each
    candidate, since only relative labelings matter), which lets the
    permuted statistics for every candidate be accumulated with one matrix
    product per permutation block.
    """
    if not candidates:
        raise ValueError("screen_candidates needs at least one candidate")
    n = residuals.n
    if cache is None:
        cache = DistanceMatrixCache(memory_budget)
    if not cache.fits_direct(n):
        return _screen_blockwise(residuals, candidates, n_perm, seed, alpha,
                                 memory_budget, block_size)

    a = double_center(distance_matrix(residuals))
    n2 = n * n
    dvar_r = float(np.sum(a * a)) / n2

    centered = []
    observed = np.zeros(len(candidates))
    dvars = np.zeros(len(candidates))
    results: list[DCorResult] = []
    for i, c in enumerate(candidates):
        b, dvar_c = cache.centered(c)
        centered.append(b)
        dvars[i] = dvar_c
        observed[i] = float(np.sum(a * b)) / n2
        results.append(_assemble(observed[i], dvar_r, dvar_c))

    live = [i for i in range(len(candidates)) if dvar_r > 0.0 and dvars[i] > 0.0]
    counts = np.zeros(len(candidates), dtype=np.int64)
    if live:
        b_flat = np.stack([centered[i].ravel() for i in live], axis=1)
        rng = np.random.default_rng(np.random.SeedSequence([_nonneg(seed)]))
        chunk = _perm_chunk(n, n_perm, memory_budget)
        a_flat = np.empty((chunk, n2))
        done = 0
        while done < n_perm:
            m = min(chunk, n_perm - done)
            for r in range(m):
                perm = rng.permutation(n)
                a_flat[r] = a[np.ix_(perm, perm)].ravel()
            stats = a_flat[:m] @ b_flat  # (m, n_live), still scaled by n^2
            counts[live] += (stats / n2 >= observed[live][None, :]).sum(axis=0)
            done += m

    rows = []
    for i, c in enumerate(candidates):
        if dvar_r <= 0.0 or dvars[i] <= 0.0:
            p = 1.0
        else:
            p = (1 + int(counts[i])) / (n_perm + 1)
        rows.append(ScreenResult(c.name, results[i].dcor, p, alpha))
    return rows


def _perm_chunk(n: int, n_perm: int, memory_budget: int | None) -> int:
    budget = (memory_budget or DEFAULT_MEMORY_BUDGET) // 4
    return int(np.clip(budget // max(n * n * 8, 1), 1, min(n_perm, 256)))


def _screen_blockwise(residuals: Covariate, candidates: Sequence[Covariate],
                      n_perm: int, seed: int, alpha: float,
                      memory_budget: int | None, block_size: int | None) -> list[ScreenResult]:
    rows = []
    base = _nonneg(seed)
    for i, c in enumerate(candidates):
        res = independence_test(residuals, c, n_perm, base + i,
                                memory_budget=memory_budget, block_size=block_size)
        rows.append(ScreenResult(c.name, res.dcor, res.p_value, alpha))
    return rows
