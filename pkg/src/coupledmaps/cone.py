"""Cones of log-Lipschitz densities and their Hilbert projective metric.

The cone ``V_a`` holds positive densities with ``|psi'/psi| < a``.  Two
independent evaluations of the projective ratio ``beta_a`` are provided: a
pointwise formula in terms of ``psi`` and ``psi'`` (:func:`hilbert_beta`) and
a supremum over pairs of points of an exponential-ratio expression
(:func:`hilbert_beta_alt`).  They agree on the cone and serve as each
other's oracle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import GridDensity

__all__ = [
    "ConeParams",
    "ConeBoundaryError",
    "log_lipschitz",
    "cone_membership",
    "hilbert_beta",
    "hilbert_beta_alt",
    "hilbert_theta",
    "birkhoff_factor",
    "random_cone_density",
    "random_log_density",
    "empirical_diameter",
    "cone_invariant_suite",
    "SUITE_COLUMNS",
    "BOUNDARY_RTOL",
    "THETA_CLAMP",
]

BOUNDARY_RTOL = 1e-6
THETA_CLAMP = 1e-10


class ConeBoundaryError(ValueError):
    """A density lies on (or outside) the boundary of the requested cone."""


@dataclass(frozen=True)
class ConeParams:
    """Inner cone parameter ``a`` and optional outer parameter ``b > a``."""

    a: float
    b: float | None = None

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("cone parameter a must be positive")
        if self.b is not None and not self.b > self.a:
            raise ValueError("outer cone parameter b must exceed a")


def log_lipschitz(psi: GridDensity):
    """Grid maximum of ``|psi'/psi|``."""
    return float(np.max(np.abs(psi.d1 / psi.values)))


def cone_membership(psi: GridDensity, a):
    """Return ``(inside, margin)`` with ``margin = a - max|psi'/psi|``."""
    if np.any(psi.values <= 0):
        raise ValueError("density must be positive")
    margin = float(a) - log_lipschitz(psi)
    return margin > 0, margin


def _require_inside(psi, a, name):
    inside, margin = cone_membership(psi, a)
    if margin <= BOUNDARY_RTOL * a:
        raise ConeBoundaryError(f"{name} is not strictly inside V_{a:g} (margin {margin:.3g})")


def _check_pair(psi1, psi2):
    if psi1.M != psi2.M:
        raise ValueError("densities live on different grids")


def hilbert_beta(psi1: GridDensity, psi2: GridDensity, a):
    """Projective ratio ``beta_a(psi1, psi2)`` from the pointwise formula.

    Supremum over the grid of ``psi2/psi1`` and ``(a psi2 -+ psi2')/(a psi1 -+ psi1')``.
    """
    _check_pair(psi1, psi2)
    _require_inside(psi1, a, "psi1")
    _require_inside(psi2, a, "psi2")
    p1, p2 = psi1.values, psi2.values
    q1, q2 = psi1.d1, psi2.d1
    r = np.maximum(p2 / p1, np.maximum((a * p2 - q2) / (a * p1 - q1), (a * p2 + q2) / (a * p1 + q1)))
    return float(r.max())


def _pair_ratio(v1x, v1y, v2x, v2y, d, a):
    e = np.exp(a * d)
    return (v2x * e - v2y) / (v1x * e - v1y)


def hilbert_beta_alt(psi1: GridDensity, psi2: GridDensity, a, *, all_pairs_max=256,
                     window=32, strata=64, refine=(4, 16, 64), seed=0):
    """Projective ratio ``beta_a`` as a supremum over pairs of points.

    For ``M <= all_pairs_max`` every ordered pair of distinct grid points is
    used.  Above that the pair set is stratified: all offsets up to
    ``window`` grid steps, plus one random offset per stratum of the
    remaining range.  The supremum is typically approached as the pair
    collapses, so sub-grid pairs at spacing ``1/(r M)`` for ``r`` in
    ``refine`` are added using the trigonometric interpolant.  Pass
    ``refine=()`` to restrict to grid pairs.
    """
    _check_pair(psi1, psi2)
    _require_inside(psi1, a, "psi1")
    _require_inside(psi2, a, "psi2")
    M = psi1.M
    v1, v2 = psi1.values, psi2.values
    best = float(np.max(v2 / v1))
    if M <= all_pairs_max:
        offsets = np.arange(1, M)
    else:
        rng = np.random.default_rng(seed)
        near = np.arange(1, window + 1)
        edges = np.linspace(window + 1, M - window, strata + 1).astype(int)
        far = np.array([rng.integers(lo, max(lo + 1, hi)) for lo, hi in zip(edges[:-1], edges[1:])])
        offsets = np.unique(np.concatenate([near, far, M - near]))
    for off in offsets:
        d = min(off, M - off) / M
        ratio = _pair_ratio(v1, np.roll(v1, -off), v2, np.roll(v2, -off), d, a)
        best = max(best, float(ratio.max()))
    for r in refine:
        d = 1.0 / (r * M)
        for sgn in (1.0, -1.0):
            w1, w2 = psi1.shifted(sgn * d), psi2.shifted(sgn * d)
            best = max(best, float(_pair_ratio(v1, w1, v2, w2, d, a).max()))
    return best


def hilbert_theta(psi1: GridDensity, psi2: GridDensity, a, beta=hilbert_beta):
    """Hilbert projective distance ``log beta(1,2) + log beta(2,1)``, clamped at 1e-10."""
    theta = np.log(beta(psi1, psi2, a)) + np.log(beta(psi2, psi1, a))
    return 0.0 if theta < THETA_CLAMP else float(theta)


def birkhoff_factor(diam):
    """Contraction coefficient ``1 - exp(-diam)``; infinite diameter gives 1."""
    if diam < 0:
        raise ValueError("diameter must be nonnegative")
    if np.isinf(diam):
        return 1.0
    return float(-np.expm1(-diam))


def random_log_density(rng, M, slope, modes=4):
    """Probability density ``exp(g)`` with ``g`` a random trig polynomial, ``max|g'| = slope``."""
    x = np.arange(M) / M
    k = np.arange(1, modes + 1)
    amp = rng.normal(size=modes) / k ** 1.5
    phase = rng.uniform(0, 2 * np.pi, size=modes)
    fine = np.arange(8 * M) / (8 * M)
    dg = -(amp * 2 * np.pi * k * np.sin(2 * np.pi * np.outer(fine, k) + phase)).sum(axis=1)
    scale = slope / np.max(np.abs(dg))
    g = scale * (amp * np.cos(2 * np.pi * np.outer(x, k) + phase)).sum(axis=1)
    return GridDensity(np.exp(g)).normalized()


def random_cone_density(rng, M, a, fill=(0.05, 0.9), modes=4):
    """Random probability density in ``V_a`` with log-slope uniform in ``fill * a``."""
    slope = rng.uniform(*fill) * a
    return random_log_density(rng, M, slope, modes)


def empirical_diameter(densities, b):
    """Largest pairwise ``theta_b`` among ``densities`` (a lower bound on the true diameter)."""
    best = 0.0
    for i in range(len(densities)):
        for j in range(i + 1, len(densities)):
            best = max(best, hilbert_theta(densities[i], densities[j], b))
    return best


SUITE_COLUMNS = ["check", "instances", "worst", "tolerance", "passed"]


def _row(name, values, tol):
    values = np.asarray(values, dtype=float)
    worst = float(values.max()) if values.size else 0.0
    return {"check": name, "instances": int(values.size), "worst": worst, "tolerance": tol, "passed": bool(worst <= tol)}


def cone_invariant_suite(pairs=100, a=2.0, M=1024, seed=0, tol=1e-9, beta_rtol=1e-3):
    """Randomized checks of the Hilbert metric and its contraction properties.

    Every row reports the worst violation over its instances (a positive
    number means a violated inequality, except for the relative ``beta``
    gap), so a row passes when ``worst <= tolerance``.
    """
    rng = np.random.default_rng(seed)
    beta_gap, sym, tri, proj, dual = [], [], [], [], []
    for _ in range(pairs):
        p1, p2, p3 = (random_cone_density(rng, M, a) for _ in range(3))
        for u, v in ((p1, p2), (p2, p1)):
            b1, b2 = hilbert_beta(u, v, a), hilbert_beta_alt(u, v, a)
            beta_gap.append(abs(b1 - b2) / b1)
        t12, t21 = hilbert_theta(p1, p2, a), hilbert_theta(p2, p1, a)
        sym.append(abs(t12 - t21))
        tri.append(hilbert_theta(p1, p3, a) - t12 - hilbert_theta(p2, p3, a))
        proj.append(abs(hilbert_theta(p1.scaled(rng.uniform(0.1, 10.0)), p2, a) - t12))
        dual.append(1.0 - hilbert_beta(p1, p2, a) * hilbert_beta(p2, p1, a))
    convex, simplex, split, mult = [], [], [], []
    for inst in range(pairs):
        n = (2, 3, 5)[inst % 3]
        r1 = [random_cone_density(rng, M, a) for _ in range(n)]
        r2 = [random_cone_density(rng, M, a) for _ in range(n)]
        w = rng.dirichlet(np.ones(n))
        mix1 = GridDensity(sum(wi * r.values for wi, r in zip(w, r1)))
        mix2 = GridDensity(sum(wi * r.values for wi, r in zip(w, r2)))
        convex.append(hilbert_theta(mix1, mix2, a) - max(hilbert_theta(x, y, a) for x, y in zip(r1, r2)))
        c1, c2 = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        s1 = GridDensity(sum(ci * r.values for ci, r in zip(c1, r1)))
        s2 = GridDensity(sum(ci * r.values for ci, r in zip(c2, r1)))
        T = np.array([[hilbert_theta(x, y, a) for y in r1] for x in r1])
        D = 2.0 * T.max(axis=0).min()
        span = np.log(np.max(np.outer(c1, c2) / np.outer(c2, c1)))
        simplex.append(hilbert_theta(s1, s2, a) - birkhoff_factor(D) * span)
        # two factors in V_1 each; the product lives in V_2 inside V_4
        f = [random_cone_density(rng, M, 1.0) for _ in range(4)]
        lhs = hilbert_theta(GridDensity(f[0].values * f[1].values), GridDensity(f[2].values * f[3].values), 4.0)
        split.append(lhs - hilbert_theta(f[0], f[2], 3.0) - hilbert_theta(f[1], f[3], 3.0))
        phi, q1, q2 = random_cone_density(rng, M, 1.0), random_cone_density(rng, M, a), random_cone_density(rng, M, a)
        mult.append(hilbert_theta(GridDensity(phi.values * q1.values), GridDensity(phi.values * q2.values), a + 1.0)
                    - hilbert_theta(q1, q2, a))
    return [
        _row("beta_vs_pair_sup_rel", beta_gap, beta_rtol),
        _row("theta_symmetry", sym, tol),
        _row("theta_triangle", tri, tol),
        _row("theta_projectivity", proj, tol),
        _row("beta_duality", dual, tol),
        _row("convex_combination", convex, tol),
        _row("simplex_bound", simplex, tol),
        _row("product_splitting", split, tol),
        _row("multiplication", mult, tol),
    ]
