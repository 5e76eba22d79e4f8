"""Functional principal component analysis for curves on a fixed grid.

Eigen-decomposition of the quadrature-weighted sample covariance operator.
With trapezoid weights w, the discretized operator eigenproblem is
symmetrized as ``W^(1/2) C W^(1/2)`` so a standard dense symmetric solver
applies; eigenfunctions come back orthonormal under the quadrature inner
product ``<f, g> = sum(w * f * g)`` and scores are the projections of the
centered curves onto them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import Covariate, trapezoid_weights

__all__ = ["FpcaBasis", "fpca"]

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class FpcaBasis:
    """Mean curve, leading eigenfunctions/eigenvalues, and training scores."""

    grid: np.ndarray
    mean: np.ndarray
    eigenfunctions: np.ndarray  # (k, G), orthonormal under the weighted product
    eigenvalues: np.ndarray  # (k,), nonincreasing
    scores: np.ndarray  # (N, k)
    truncated: bool = False  # requested k exceeded the available rank

    @property
    def k(self) -> int:
        return self.eigenfunctions.shape[0]

    def transform(self, curves: np.ndarray) -> np.ndarray:
        """Scores of new curves sampled on the training grid."""
        curves = np.asarray(curves, dtype=float)
        w = trapezoid_weights(self.grid)
        return (curves - self.mean) @ (w[:, None] * self.eigenfunctions.T)


def fpca(c: Covariate, k: int) -> FpcaBasis:
    """Top-``k`` principal components of a functional covariate.

    If fewer than ``k`` numerically nonzero eigenvalues exist, the basis is
    truncated to the available rank and flagged.  The sign of each
    eigenfunction is fixed by making its largest-magnitude entry positive.
    """
    if c.kind != "functional":
        raise ValueError("fpca needs a functional covariate")
    if k < 1:
        raise ValueError("k must be >= 1")
    curves = c.values
    n = curves.shape[0]
    if n <= k:
        raise ValueError("fpca needs more observations than components")
    w = trapezoid_weights(c.grid)
    sqrt_w = np.sqrt(w)
    mean = curves.mean(axis=0)
    centered = curves - mean
    cov = centered.T @ centered / n
    sym = sqrt_w[:, None] * cov * sqrt_w[None, :]
    eigvals, eigvecs = np.linalg.eigh(sym)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]

    rank = int(np.sum(eigvals > max(eigvals[0], 0.0) * RANK_RTOL)) if eigvals.size else 0
    k_eff = min(k, max(rank, 0))
    truncated = k_eff < k
    if k_eff == 0:
        # all curves equal to the mean: keep a zero component for shape stability
        phi = np.zeros((1, c.grid.size))
        return FpcaBasis(c.grid, mean, phi, np.zeros(1), np.zeros((n, 1)), True)

    phi = (eigvecs[:, :k_eff] / sqrt_w[:, None]).T
    signs = np.sign(phi[np.arange(k_eff), np.argmax(np.abs(phi), axis=1)])
    signs[signs == 0] = 1.0
    phi = phi * signs[:, None]
    scores = centered @ (w[:, None] * phi.T)
    return FpcaBasis(c.grid, mean, phi, eigvals[:k_eff], scores, truncated)
