"""Perron-Frobenius operators of expanding circle maps.

The pushforward is evaluated pointwise from the inverse branches (collocation
on the grid, with the source density read off its trigonometric
interpolant).  An exact Ulam discretization is provided as an independent
cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigs

from .cone import hilbert_theta, log_lipschitz
from .density import GridDensity, fourier_interpolate
from .system import circle_distance

__all__ = [
    "ExpandingMap1D",
    "BranchError",
    "inverse_branches",
    "preimages",
    "pushforward",
    "invariant_density",
    "c2_distance",
    "operator_c2_distance",
    "ulam_matrix",
    "ulam_invariant_density",
    "ulam_pushforward",
    "cell_averages",
]

DEGREE_RTOL = 1e-8
NEWTON_TOL = 1e-13


class BranchError(RuntimeError):
    """Inverse-branch solve failed to converge."""


@dataclass(frozen=True)
class ExpandingMap1D:
    """Expanding circle map given by a lift ``func(x, n)`` returning the n-th derivative.

    ``degree`` is ``func(1) - func(0)`` rounded; the lift must be increasing.
    """

    func: Callable
    degree: int = 0
    min_expansion: float = 0.0
    check_resolution: int = 4096

    def __post_init__(self):
        raw = float(self.func(np.array([1.0]))[0] - self.func(np.array([0.0]))[0])
        degree = int(round(raw))
        if abs(raw - degree) > DEGREE_RTOL:
            raise ValueError(f"lift is not a circle map: L(1)-L(0) = {raw!r}")
        x = np.arange(self.check_resolution) / self.check_resolution
        d1 = self.func(x, 1)
        if np.any(d1 <= 0):
            raise ValueError("lift derivative must be positive")
        lam = float(d1.min())
        if lam <= 1.0:
            raise ValueError(f"map is not expanding (min derivative {lam:.4g})")
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "min_expansion", lam)

    def __call__(self, x, n=0):
        return self.func(np.asarray(x, dtype=float), n)

    def reduced(self, x):
        return np.mod(self(x), 1.0)


def preimages(fmap: ExpandingMap1D, y, max_iter=100):
    """All preimages of the angles ``y``; returns ``(x, dL(x))`` of shape ``y.shape + (degree,)``.

    Each preimage solves ``L(x) = y + k`` for the ``degree`` integers ``k``
    whose target lies in ``[L(0), L(0) + degree)``, by Newton iteration
    safeguarded by bisection on the bracket ``[0, 1]``.
    """
    y = np.mod(np.asarray(y, dtype=float), 1.0)
    d = fmap.degree
    L0 = float(fmap(np.array([0.0]))[0])
    k0 = np.ceil(L0 - y)
    target = (y[..., None] + k0[..., None] + np.arange(d)).reshape(-1)
    lo = np.zeros_like(target)
    hi = np.ones_like(target)
    x = (target - L0) / d
    done = np.zeros(target.size, dtype=bool)
    for _ in range(max_iter):
        val = fmap(x) - target
        done = np.abs(val) < NEWTON_TOL * max(1.0, d)
        if done.all():
            break
        neg = val < 0
        lo = np.where(neg, x, lo)
        hi = np.where(neg, hi, x)
        step = x - val / fmap(x, 1)
        inside = (step > lo) & (step < hi)
        x = np.where(done, x, np.where(inside, step, 0.5 * (lo + hi)))
    else:
        val = fmap(x) - target
        if np.any(np.abs(val) > 1e3 * NEWTON_TOL * max(1.0, d)):
            raise BranchError(f"inverse branch solve did not converge (max residual {np.abs(val).max():.3g})")
    x = np.mod(x, 1.0).reshape(y.shape + (d,))
    return x, fmap(x, 1)


def inverse_branches(fmap: ExpandingMap1D, y):
    """Sorted list of ``(preimage, derivative at preimage)`` for a single angle ``y``."""
    x, dx = preimages(fmap, np.array([y]))
    order = np.argsort(x[0])
    return [(float(x[0, j]), float(dx[0, j])) for j in order]


def pushforward(fmap: ExpandingMap1D, psi: GridDensity, M=None):
    """Transfer operator image sampled on the grid of size ``M`` (default ``psi.M``)."""
    M = psi.M if M is None else M
    y = np.arange(M) / M
    x, dx = preimages(fmap, y)
    vals = fourier_interpolate(psi.values, x) / dx
    return GridDensity(vals.sum(axis=-1), allow_zero=psi.allow_zero)


def invariant_density(fmap: ExpandingMap1D, M=1024, tol=1e-10, max_iter=500, b=None):
    """Fixed point of the transfer operator by power iteration from the uniform density.

    Successive iterates are compared in ``theta_b``.  When ``b`` is not given
    it is taken as ``1 + 2 * max log-slope`` of the two iterates, which keeps
    both strictly inside the cone.
    """
    psi = GridDensity.uniform(M)
    for it in range(1, max_iter + 1):
        nxt = pushforward(fmap, psi).normalized()
        bb = b if b is not None else 1.0 + 2.0 * max(log_lipschitz(psi), log_lipschitz(nxt))
        dist = hilbert_theta(psi, nxt, bb)
        psi = nxt
        if dist < tol:
            return psi
    raise RuntimeError(f"invariant_density did not converge in {max_iter} iterations (last theta {dist:.3g})")


def c2_distance(map1, map2, M=1024):
    """Max over the grid of value (circle), first and second derivative gaps of two lifts."""
    x = np.arange(M) / M
    gaps = (
        circle_distance(map1(x), map2(x)).max(),
        np.abs(map1(x, 1) - map2(x, 1)).max(),
        np.abs(map1(x, 2) - map2(x, 2)).max(),
    )
    return float(max(gaps))


def operator_c2_distance(map1, map2, psi, a, M=1024):
    """``(theta_a(f_* psi, g_* psi), d_C2(f, g))`` for maps of equal degree."""
    if map1.degree != map2.degree:
        raise ValueError(f"degree mismatch: {map1.degree} vs {map2.degree}")
    p1 = pushforward(map1, psi)
    p2 = pushforward(map2, psi)
    return hilbert_theta(p1, p2, a), c2_distance(map1, map2, M)


def ulam_matrix(fmap: ExpandingMap1D, K):
    """Exact Ulam matrix on ``K`` equal cells as a column-stochastic sparse matrix.

    Entry ``(j, i)`` is ``K * |I_i intersect f^{-1}(I_j)|``, computed by
    splitting every cell at the preimages of the cell boundaries.
    """
    edges = np.arange(K) / K
    pre, _ = preimages(fmap, edges)
    cuts = np.unique(np.concatenate([pre.reshape(-1), edges, [1.0]]))
    left, right = cuts[:-1], cuts[1:]
    keep = right - left > 0
    left, right = left[keep], right[keep]
    mid = 0.5 * (left + right)
    src = np.minimum((mid * K).astype(int), K - 1)
    dst = np.minimum((fmap.reduced(mid) * K).astype(int), K - 1)
    data = K * (right - left)
    return sparse.csr_matrix((data, (dst, src)), shape=(K, K))


def ulam_invariant_density(fmap: ExpandingMap1D, K):
    """Cell values of the leading eigenvector of the Ulam matrix, normalized to integral 1."""
    P = ulam_matrix(fmap, K)
    _, vec = eigs(P, k=1, which="LM", v0=np.ones(K))
    v = np.abs(vec[:, 0].real)
    return v / v.mean()


def ulam_pushforward(fmap: ExpandingMap1D, cell_values):
    """Ulam image of a vector of cell averages."""
    cell_values = np.asarray(cell_values, dtype=float)
    return ulam_matrix(fmap, cell_values.size) @ cell_values


def cell_averages(psi: GridDensity, K, sub=8):
    """Averages of the interpolant of ``psi`` over ``K`` equal cells (midpoint rule on ``sub`` points)."""
    fine = psi.resample(max(psi.M, K * sub)) if K * sub > psi.M else psi
    if fine.M % K:
        raise ValueError("K must divide the resampled grid")
    shift = fine.shifted(0.5 / fine.M)
    return shift.reshape(K, -1).mean(axis=1)
