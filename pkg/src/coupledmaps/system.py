"""Globally coupled circle maps.

The state lives on the N-torus and evolves as

    x_i  ->  f_i(x_i) + (1/N) * sum_j w_ij h(x_i, x_j)   (mod 1)

with the sum running over every j in [1, N], self-coupling included.  All
arithmetic is done on real lifts; reduction mod 1 happens only in
:func:`eval_map`.

Site maps and couplings carry closed-form derivatives up to order three, so
the regularity datum (kappa, K, E) is computed from exact derivative values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi

__all__ = [
    "SmoothCircleFunction",
    "ExpandingSiteMap",
    "CustomSiteMap",
    "TrigCoupling",
    "CustomCoupling",
    "CoupledMapSystem",
    "SystemDatum",
    "InvalidSystemError",
    "eval_map",
    "eval_lift",
    "jacobian",
    "estimate_datum",
    "interaction_datum",
    "uncoupled_system",
    "diffusive_system",
    "circle_distance",
    "SITE_CATALOG",
    "site_from_config",
    "coupling_from_config",
    "system_from_config",
]


class InvalidSystemError(ValueError):
    """Raised when a system violates the structural assumptions (e.g. f' <= 0)."""


def circle_distance(a, b):
    """Distance on R/Z between (arrays of) angles."""
    d = np.mod(np.asarray(a) - np.asarray(b), 1.0)
    return np.minimum(d, 1.0 - d)


def _sin_derivative(theta, n):
    # d^n/dtheta^n sin(theta)
    return np.sin(theta + 0.5 * np.pi * n)


class SmoothCircleFunction:
    """Base class for period-1 functions with exact derivatives to order 3."""

    arity = 1
    max_order = 3


class ExpandingSiteMap(SmoothCircleFunction):
    """Lift ``degree*x + shift + sum_k amp_k sin(2 pi k x + phase_k)``.

    Parameters
    ----------
    degree : int
        Winding number of the lift.
    modes : sequence of (amplitude, wavenumber, phase)
        Trigonometric perturbation terms.
    shift : float
        Constant offset.
    """

    arity = 1

    def __init__(self, degree=2, modes=(), shift=0.0):
        self.degree = int(degree)
        self.shift = float(shift)
        self.modes = tuple((float(a), int(k), float(p)) for a, k, p in modes)

    def __call__(self, x, n=0):
        x = np.asarray(x, dtype=float)
        if n == 0:
            out = self.degree * x + self.shift
        elif n == 1:
            out = np.full_like(x, float(self.degree))
        else:
            out = np.zeros_like(x)
        for amp, k, phase in self.modes:
            out = out + amp * (TWO_PI * k) ** n * _sin_derivative(TWO_PI * k * x + phase, n)
        return out

    def describe(self):
        return {"kind": "expanding", "degree": self.degree, "shift": self.shift,
                "modes": [list(m) for m in self.modes]}

    def __repr__(self):
        return f"ExpandingSiteMap(degree={self.degree}, modes={self.modes}, shift={self.shift})"


class CustomSiteMap(SmoothCircleFunction):
    """User-supplied site map; ``derivatives`` holds callables for orders 0..3."""

    arity = 1

    def __init__(self, derivatives: Sequence[Callable]):
        if len(derivatives) != 4:
            raise ValueError("a custom site map needs value and derivatives of order 1, 2, 3")
        self._d = tuple(derivatives)

    def __call__(self, x, n=0):
        return np.asarray(self._d[n](np.asarray(x, dtype=float)), dtype=float)

    def describe(self):
        return {"kind": "custom"}


class TrigCoupling(SmoothCircleFunction):
    """Coupling ``h(x, y) = sum_t amp_t sin(2 pi (p_t x + q_t y) + phase_t)``.

    The default single term ``(eps, -1, 1, 0)`` is the diffusive coupling
    ``eps * sin(2 pi (y - x))``.
    """

    arity = 2

    def __init__(self, terms):
        self.terms = tuple((float(a), int(p), int(q), float(ph)) for a, p, q, ph in terms)

    @classmethod
    def diffusive(cls, eps):
        return cls([(eps, -1, 1, 0.0)])

    def __call__(self, x, y, nx=0, ny=0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for amp, p, q, ph in self.terms:
            c = amp * (TWO_PI * p) ** nx * (TWO_PI * q) ** ny
            if c != 0.0:
                out = out + c * _sin_derivative(TWO_PI * (p * x + q * y) + ph, nx + ny)
        return out

    def mean_against(self, x, weights, nx=0):
        """``integral d^nx/dx^nx h(x, y) w(y) dy`` for w sampled on the uniform grid.

        Uses the closed form in the Fourier moments of ``w``; equals the
        periodic trapezoid rule applied to the integrand exactly.
        """
        x = np.asarray(x, dtype=float)
        w = np.asarray(weights, dtype=float)
        grid = np.arange(w.size) / w.size
        out = np.zeros_like(x)
        for amp, p, q, ph in self.terms:
            c = amp * (TWO_PI * p) ** nx
            if c == 0.0:
                continue
            cq = np.mean(w * np.cos(TWO_PI * q * grid))
            sq = np.mean(w * np.sin(TWO_PI * q * grid))
            alpha = TWO_PI * p * x + ph
            out = out + c * (_sin_derivative(alpha, nx) * cq + _sin_derivative(alpha + 0.5 * np.pi, nx) * sq)
        return out

    def field_sums(self, X, nx=0):
        """``(1/N) sum_j d^nx/dx^nx h(x_i, x_j)`` for every row of ``X`` (all-ones weights)."""
        X = np.asarray(X, dtype=float)
        out = np.zeros_like(X)
        for amp, p, q, ph in self.terms:
            c = amp * (TWO_PI * p) ** nx
            if c == 0.0:
                continue
            theta = TWO_PI * q * X
            cq = np.mean(np.cos(theta), axis=-1, keepdims=True)
            sq = np.mean(np.sin(theta), axis=-1, keepdims=True)
            alpha = TWO_PI * p * X + ph
            out += c * (_sin_derivative(alpha, nx) * cq + _sin_derivative(alpha + 0.5 * np.pi, nx) * sq)
        return out

    def c3_norm_bound(self):
        """Upper bound on max over partials of order <= 3 of |h|."""
        best = 0.0
        for nx in range(4):
            for ny in range(4 - nx):
                best = max(best, sum(abs(a) * (TWO_PI * abs(p)) ** nx * (TWO_PI * abs(q)) ** ny
                                     for a, p, q, _ in self.terms))
        return best

    def describe(self):
        return {"kind": "trig", "terms": [list(t) for t in self.terms]}

    def __repr__(self):
        return f"TrigCoupling({self.terms})"


class CustomCoupling(SmoothCircleFunction):
    """User-supplied coupling; ``partials[(nx, ny)]`` for all nx + ny <= 3."""

    arity = 2

    def __init__(self, partials: dict):
        missing = [(a, b) for a in range(4) for b in range(4 - a) if (a, b) not in partials]
        if missing:
            raise ValueError(f"custom coupling lacks partial derivatives {missing}")
        self._p = dict(partials)

    def __call__(self, x, y, nx=0, ny=0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.asarray(self._p[(nx, ny)](x, y), dtype=float) * np.ones(np.broadcast(x, y).shape)

    def mean_against(self, x, weights, nx=0):
        x = np.asarray(x, dtype=float)
        w = np.asarray(weights, dtype=float)
        grid = np.arange(w.size) / w.size
        flat = x.reshape(-1)
        out = np.empty(flat.size)
        step = max(1, 2_000_000 // w.size)
        for s in range(0, flat.size, step):
            blk = flat[s:s + step]
            out[s:s + step] = self(blk[:, None], grid[None, :], nx, 0) @ w / w.size
        return out.reshape(x.shape)

    def describe(self):
        return {"kind": "custom"}


def _diag_derivative(h, x, n):
    """n-th derivative of x -> h(x, x)."""
    if n == 0:
        return h(x, x)
    return sum(comb(n, a) * h(x, x, a, n - a) for a in range(n + 1))


@dataclass(frozen=True)
class CoupledMapSystem:
    """The coupled map on the N-torus.

    ``site_maps`` holds N site maps (a single map is broadcast).  The pairwise
    couplings are ``w_ij * h`` with one shared coupling function ``h`` and an
    optional weight matrix (all ones when omitted).  The 1/N prefactor is
    always applied.
    """

    N: int
    site_maps: tuple
    coupling: SmoothCircleFunction
    weights: np.ndarray | None = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        sites = self.site_maps
        if isinstance(sites, SmoothCircleFunction):
            sites = (sites,) * self.N
        sites = tuple(sites)
        if len(sites) != self.N:
            raise ValueError(f"expected {self.N} site maps, got {len(sites)}")
        object.__setattr__(self, "site_maps", sites)
        if self.weights is not None:
            w = np.array(self.weights, dtype=float)
            if w.shape != (self.N, self.N):
                raise ValueError("weights must be N x N")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    @property
    def shared_site(self):
        """True when every site uses the same map object."""
        return all(s is self.site_maps[0] for s in self.site_maps)

    @property
    def exchangeable(self):
        """Full permutation symmetry: shared site map and all-ones weights."""
        return self.shared_site and self.weights is None

    def weight(self, i, j):
        return 1.0 if self.weights is None else float(self.weights[i, j])

    def site_values(self, X, n=0):
        X = np.asarray(X, dtype=float)
        if self.shared_site:
            return self.site_maps[0](X, n)
        out = np.empty_like(X)
        for i, f in enumerate(self.site_maps):
            out[..., i] = f(X[..., i], n)
        return out

    def coupling_sums(self, X, nx=0):
        """``(1/N) sum_j w_ij d^nx/dx^nx h(x_i, x_j)`` for each coordinate i."""
        X = np.asarray(X, dtype=float)
        h = self.coupling
        if self.weights is None and hasattr(h, "field_sums"):
            return h.field_sums(X, nx)
        H = h(X[..., :, None], X[..., None, :], nx, 0)
        if self.weights is not None:
            H = H * self.weights
        return H.sum(axis=-1) / self.N

    def to_config(self):
        out = {"N": self.N, "site": self.site_maps[0].describe(), "coupling": self.coupling.describe()}
        if not self.shared_site:
            out["sites"] = [s.describe() for s in self.site_maps]
        if self.weights is not None:
            out["weights"] = self.weights.tolist()
        return out


def _check_point(system, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != system.N:
        raise ValueError(f"point has {x.shape[-1]} coordinates, system has N={system.N}")
    return x


def eval_lift(system, x):
    """Lifted image of ``x`` (no reduction mod 1); works on stacked points."""
    x = _check_point(system, x)
    return system.site_values(x) + system.coupling_sums(x)


def eval_map(system, x):
    """Image of ``x`` under the coupled map, reduced mod 1."""
    return np.mod(eval_lift(system, x), 1.0)


def jacobian(system, x):
    """N x N matrix of partial derivatives d_j F_i at ``x`` (stacked points give stacked matrices)."""
    x = _check_point(system, x)
    N = system.N
    h = system.coupling
    xi, xj = x[..., :, None], x[..., None, :]
    J = h(xi, xj, 0, 1) / N
    diag = system.site_values(x, 1) + system.coupling_sums(x, 1)
    if system.weights is not None:
        J = J * system.weights
    idx = np.arange(N)
    J[..., idx, idx] += diag
    return J


@dataclass(frozen=True)
class SystemDatum:
    """Regularity datum: expansion ``kappa``, site bound ``bigK``, coupling bound ``bigE``."""

    kappa: float
    bigK: float
    bigE: float

    @property
    def distortion(self):
        return (self.bigK + self.bigE) / self.kappa ** 2

    @property
    def valid(self):
        return self.kappa - self.bigE > 1.0


def estimate_datum(system, grid_resolution=256):
    """Estimate (kappa, K, E) on a uniform grid.

    ``kappa`` is the grid minimum of |f_i'| lowered by the interpolation margin
    ``max|f_i'''| / (8 M^2)``, which makes it a lower bound for the true
    infimum.  ``bigE`` is the grid maximum of every partial derivative of
    ``w_ij h`` up to order three.
    """
    M = int(grid_resolution)
    if M < 16:
        raise ValueError("grid_resolution must be at least 16")
    grid = np.arange(M) / M
    kappa, bigK = np.inf, 0.0
    seen = []
    for f in system.site_maps:
        if any(f is g for g in seen):
            continue
        seen.append(f)
        d1, d2, d3 = f(grid, 1), f(grid, 2), f(grid, 3)
        if np.any(d1 <= 0):
            raise InvalidSystemError("site map derivative is not positive everywhere")
        d3max = float(np.max(np.abs(d3)))
        kappa = min(kappa, float(d1.min()) - d3max / (8.0 * M * M))
        bigK = max(bigK, float(np.max(np.abs(d2))), d3max)
    X, Y = np.meshgrid(grid, grid, indexing="ij")
    cnorm = 0.0
    for nx in range(4):
        for ny in range(4 - nx):
            cnorm = max(cnorm, float(np.max(np.abs(system.coupling(X, Y, nx, ny)))))
    wmax = 1.0 if system.weights is None else float(np.max(np.abs(system.weights)))
    return SystemDatum(kappa=kappa, bigK=bigK, bigE=wmax * cnorm)


def interaction_datum(system, grid_resolution=256):
    """First-derivative datum ``(kappa_H, E_H)`` of the coupled map itself.

    ``|d_i F_i| > kappa_H`` and ``|d_j F_i| <= E_H / N`` for j != i hold on the
    whole torus.  These are the constants entering the inverse-Jacobian and
    foliation estimates.
    """
    M = int(grid_resolution)
    grid = np.arange(M) / M
    X, Y = np.meshgrid(grid, grid, indexing="ij")
    hx = float(np.max(np.abs(system.coupling(X, Y, 1, 0))))
    hy = float(np.max(np.abs(system.coupling(X, Y, 0, 1))))
    N = system.N
    if system.weights is None:
        row, wdiag, wmax = 1.0, 1.0, 1.0
    else:
        W = np.abs(system.weights)
        row = float(W.sum(axis=1).max()) / N
        wdiag = float(np.diag(W).max())
        wmax = float(W.max())
    f1min = min(float(f(grid, 1).min() - np.abs(f(grid, 2)).max() / (2.0 * M)) for f in system.site_maps)
    kappa_h = f1min - row * hx - wdiag * hy / N
    return kappa_h, wmax * hy


def uncoupled_system(N, site=None):
    """N copies of ``site`` (doubling by default) with zero coupling."""
    site = site if site is not None else ExpandingSiteMap(2)
    return CoupledMapSystem(N, site, TrigCoupling([]), label="uncoupled")


def diffusive_system(N, eps, site=None):
    """Shared site map with coupling ``eps * sin(2 pi (y - x))``."""
    site = site if site is not None else ExpandingSiteMap(2)
    return CoupledMapSystem(N, site, TrigCoupling.diffusive(eps), label=f"diffusive eps={eps}")


SITE_CATALOG = {
    "doubling": {"kind": "expanding", "degree": 2, "shift": 0.0, "modes": []},
    "tripling": {"kind": "expanding", "degree": 3, "shift": 0.0, "modes": []},
    "perturbed-doubling": {"kind": "expanding", "degree": 2, "shift": 0.0, "modes": [[0.05, 1, 0.0]]},
}


def site_from_config(spec):
    """Site map from a catalog name or a ``{"kind": "expanding", ...}`` mapping."""
    if isinstance(spec, str):
        if spec not in SITE_CATALOG:
            raise InvalidSystemError(f"unknown site map {spec!r}; catalog: {sorted(SITE_CATALOG)}")
        spec = SITE_CATALOG[spec]
    if spec.get("kind") != "expanding":
        raise InvalidSystemError(f"site kind must be 'expanding', got {spec.get('kind')!r}")
    return ExpandingSiteMap(spec.get("degree", 2), spec.get("modes", ()), spec.get("shift", 0.0))


def coupling_from_config(spec):
    """Coupling from ``{"kind": "trig", "terms": [...]}``, ``{"kind": "diffusive", "eps": e}`` or ``"none"``."""
    if spec == "none":
        return TrigCoupling([])
    kind = spec.get("kind")
    if kind == "diffusive":
        return TrigCoupling.diffusive(spec["eps"])
    if kind == "trig":
        return TrigCoupling(spec.get("terms", ()))
    raise InvalidSystemError(f"coupling kind must be 'trig' or 'diffusive', got {kind!r}")


def system_from_config(spec, N=None):
    """Inverse of :meth:`CoupledMapSystem.to_config` (``N`` overrides the stored size)."""
    N = spec["N"] if N is None else N
    if "sites" in spec:
        sites = tuple(site_from_config(s) for s in spec["sites"])
    else:
        sites = site_from_config(spec["site"])
    weights = spec.get("weights")
    return CoupledMapSystem(N, sites, coupling_from_config(spec["coupling"]),
                            None if weights is None else np.asarray(weights, dtype=float))
