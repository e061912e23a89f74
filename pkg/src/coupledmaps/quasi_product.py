"""Joint densities at small N: disintegrations, Lipschitz classes, martingales and concentration.

A :class:`JointDensity` is a positive density sampled on the uniform grid of
``M`` points per axis of the N-torus, ``N <= 5``.  Axis ``j`` of the value
tensor is coordinate ``j`` (0-based).  Integrals are periodic trapezoid
sums, i.e. grid means.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage, stats

from .cone import ConeBoundaryError, hilbert_theta
from .density import GridDensity, fourier_interpolate, is_power_of_two, spectral_derivative
from .ensemble import STREAM_INITIAL, sample_product
from .foliation import InvarianceCertificate, fiber_map_G, frozen_slice, phi_jacobian, straighten_batch
from .sto import ProductMeasure, _field_weights, mean_field_map
from .system import CoupledMapSystem, TrigCoupling, _sin_derivative, eval_lift, jacobian
from .transfer import ExpandingMap1D, c2_distance, preimages, pushforward

__all__ = [
    "JointDensity",
    "LipschitzReport",
    "BranchEnumerationError",
    "conditional_density",
    "ab_quantities",
    "lipschitz_report",
    "brute_force_pushforward",
    "martingale_levels",
    "martingale_identity_gap",
    "martingale_difference_bound",
    "oscillation",
    "bk_lower_bound",
    "concentration_experiment",
    "good_set_experiment",
    "lipschitz_envelope",
    "perturbed_density",
]

MAX_N = 5
INTEGRAL_TOL = 1e-8
# Lipschitz entries below this are spectral round-off and reported as 0
L_ROUNDOFF = 1e-12


class BranchEnumerationError(RuntimeError):
    """Preimages of a grid point could not be separated into distinct branches."""


@dataclass(frozen=True, eq=False)
class JointDensity:
    """Positive density on the N-torus sampled on an ``M**N`` grid.

    ``factors`` optionally records the marginals of a product density; it
    lets :meth:`evaluate` use exact trigonometric interpolation.
    """

    values: np.ndarray
    factors: tuple | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        N = v.ndim
        if not 1 <= N <= MAX_N:
            raise ValueError(f"N must be between 1 and {MAX_N}")
        M = v.shape[0]
        if any(s != M for s in v.shape) or not is_power_of_two(M):
            raise ValueError("values must be an M x ... x M tensor with M a power of two")
        if np.any(v <= 0):
            raise ValueError("joint density must be positive")
        if abs(v.mean() - 1.0) > INTEGRAL_TOL:
            raise ValueError(f"joint density integrates to {v.mean()!r}, not 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def N(self):
        return self.values.ndim

    @property
    def M(self):
        return self.values.shape[0]

    @property
    def grid(self):
        return np.arange(self.M) / self.M

    def partial(self, axis, order=1):
        return spectral_derivative(self.values, order, axis=axis)

    def mixed(self, i, j):
        """``d_i d_j rho`` (``i == j`` gives the second derivative)."""
        if i == j:
            return self.partial(i, 2)
        return spectral_derivative(self.partial(i, 1), 1, axis=j)

    @classmethod
    def from_values(cls, values):
        v = np.asarray(values, dtype=float)
        return cls(v / v.mean())

    @classmethod
    def from_function(cls, func, N, M):
        axes = np.meshgrid(*([np.arange(M) / M] * N), indexing="ij")
        return cls.from_values(func(*axes))

    @classmethod
    def product(cls, marginals):
        marginals = tuple(m.normalized() for m in marginals)
        v = marginals[0].values
        for m in marginals[1:]:
            v = np.multiply.outer(v, m.values)
        return cls(v / v.mean(), marginals)

    @classmethod
    def uniform(cls, N, M):
        return cls.product([GridDensity.uniform(M)] * N)

    def evaluate(self, points):
        """Density at arbitrary points (last axis = coordinates).

        Products use exact trigonometric interpolation of each factor;
        general densities use periodic quintic splines.
        """
        pts = np.mod(np.asarray(points, dtype=float), 1.0)
        if self.factors is not None:
            out = np.ones(pts.shape[:-1])
            for j, f in enumerate(self.factors):
                out = out * fourier_interpolate(f.values, pts[..., j])
            return out
        coords = np.moveaxis(pts, -1, 0).reshape(self.N, -1) * self.M
        vals = ndimage.map_coordinates(self.values, coords, order=5, mode="grid-wrap")
        return vals.reshape(pts.shape[:-1])

    def marginal(self, axes):
        """Marginal density on the listed axes (in the given order)."""
        axes = list(axes)
        rest = tuple(a for a in range(self.N) if a not in axes)
        m = self.values.mean(axis=rest) if rest else self.values
        kept = [a for a in range(self.N) if a in axes]
        return np.moveaxis(m, list(range(len(kept))), [axes.index(a) for a in kept])

    def save(self, path):
        """Raw little-endian float64 tensor plus a JSON header next to it."""
        path = Path(path)
        self.values.astype("<f8").tofile(path)
        header = {"N": self.N, "M": self.M, "dtype": "<f8", "ordering": "row-major, axis j is coordinate j"}
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        path = Path(path)
        header = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        vals = np.fromfile(path, dtype=header["dtype"]).reshape((header["M"],) * header["N"])
        return cls(vals)


def perturbed_density(N, M, delta):
    """``1 + delta * cos(2 pi (x_1 + ... + x_N))`` on the ``M**N`` grid."""
    return JointDensity.from_function(lambda *xs: 1.0 + delta * np.cos(2 * np.pi * sum(xs)), N, M)


def _snap(rho, x_hat):
    idx = np.round(np.asarray(x_hat, dtype=float) * rho.M).astype(int) % rho.M
    snapped = np.allclose(idx / rho.M, np.mod(x_hat, 1.0), atol=1e-12)
    return idx, snapped


def conditional_density(rho: JointDensity, i, x_hat, interpolate=False):
    """Normalized fiber density along coordinate ``i`` at ``x_hat`` (the other N-1 coordinates).

    Returns ``(density, exact)``; ``exact`` is False when ``x_hat`` was
    snapped to the grid, or interpolated with ``interpolate=True``.
    """
    x_hat = np.atleast_1d(np.asarray(x_hat, dtype=float))
    if x_hat.size != rho.N - 1:
        raise ValueError(f"x_hat needs {rho.N - 1} coordinates")
    if interpolate:
        pts = np.insert(np.broadcast_to(x_hat, (rho.M, rho.N - 1)), i, rho.grid, axis=1)
        vals = rho.evaluate(pts)
        exact = False
    else:
        idx, exact = _snap(rho, x_hat)
        sl = list(idx)
        sl.insert(i, slice(None))
        vals = rho.values[tuple(sl)]
    total = vals.mean()
    if total < 1e-14:
        raise ValueError("density vanishes on the fiber")
    return GridDensity(vals / total), exact


def _ratios(eta, di, dk, dki, b):
    r1 = dk / eta
    r2 = (b * dk - dki) / (b * eta - di)
    r3 = (b * dk + dki) / (b * eta + di)
    return r1, r2, r3


def ab_quantities(rho: JointDensity, i, k, b):
    """``A^{(i,k)}`` and ``B^{(i,k)}`` on every grid fiber along ``i``.

    Returns ``(A, B, sup(A - B))`` with ``A`` and ``B`` indexed by the other
    coordinates in their natural order.
    """
    if k == i:
        raise ValueError("k must differ from i")
    eta = rho.values
    di = rho.partial(i)
    if np.max(np.abs(di / eta)) >= b * (1 - 1e-6):
        raise ConeBoundaryError(f"fiber densities along {i} are not strictly inside V_{b:g}")
    dk = rho.partial(k)
    dki = rho.mixed(k, i)
    r = _ratios(eta, di, dk, dki, b)
    A = np.max(np.maximum(np.maximum(r[0], r[1]), r[2]), axis=i)
    B = np.min(np.minimum(np.minimum(r[0], r[1]), r[2]), axis=i)
    return A, B, float(np.max(A - B))


@dataclass(frozen=True)
class LipschitzReport:
    """Fitted cone parameter, Lipschitz matrix and second-derivative bound of a joint density."""

    a_fit: float
    L_matrix: np.ndarray
    alpha_fit: float
    a: float
    b: float
    L: float | None
    alpha: float | None
    membership: dict = field(default_factory=dict)

    @property
    def max_L(self):
        off = self.L_matrix[~np.eye(self.L_matrix.shape[0], dtype=bool)]
        return float(off.max()) if off.size else 0.0

    def recompute(self):
        out = {"V_a": self.a_fit <= self.a}
        if self.L is not None:
            out["M_abL"] = self.a_fit <= self.a and self.max_L <= self.L
        if self.alpha is not None:
            out["C2_alpha"] = self.alpha_fit <= self.alpha
        return out


def lipschitz_report(rho: JointDensity, a, b, L=None, alpha=None):
    """Cone fit, Lipschitz matrix ``sup(A - B)`` per ordered pair and ``max |d_i d_j rho / rho|``."""
    if not b > a:
        raise ValueError("need b > a")
    N = rho.N
    eta = rho.values
    a_fit = max(float(np.max(np.abs(rho.partial(i) / eta))) for i in range(N))
    Lm = np.zeros((N, N))
    for i in range(N):
        for k in range(N):
            if k != i:
                gap = ab_quantities(rho, i, k, b)[2]
                Lm[i, k] = gap if gap > L_ROUNDOFF else 0.0
    alpha_fit = max(float(np.max(np.abs(rho.mixed(i, j) / eta))) for i in range(N) for j in range(i, N))
    rep = LipschitzReport(a_fit, Lm, alpha_fit, a, b, L, alpha)
    return LipschitzReport(a_fit, Lm, alpha_fit, a, b, L, alpha, rep.recompute())


def brute_force_pushforward(system: CoupledMapSystem, rho: JointDensity, tol=1e-12, max_iter=50):
    """Density of the pushforward of ``rho`` on the same grid by summing over all inverse branches.

    Branches are seeded with products of the site-map inverse branches and
    refined by Newton on the full map.
    """
    N, M = rho.N, rho.M
    if N != system.N:
        raise ValueError("dimension mismatch")
    if N > 4 or M > 64:
        raise ValueError("brute force needs N <= 4 and M <= 64")
    grid = rho.grid
    seeds = []
    for j in range(N):
        site = ExpandingMap1D(system.site_maps[j])
        pre, _ = preimages(site, grid)
        seeds.append(pre)
    degrees = [s.shape[1] for s in seeds]
    X = np.stack(np.meshgrid(*([grid] * N), indexing="ij"), axis=-1).reshape(-1, N)
    pidx = np.stack(np.meshgrid(*([np.arange(M)] * N), indexing="ij"), axis=-1).reshape(-1, N)
    branches = np.stack(np.meshgrid(*[np.arange(d) for d in degrees], indexing="ij"), axis=-1).reshape(-1, N)
    out = np.zeros(X.shape[0])
    sols = []
    for br in branches:
        Y = np.stack([seeds[j][pidx[:, j], br[j]] for j in range(N)], axis=1)
        target = X + np.round(eval_lift(system, Y) - X)
        for _ in range(max_iter):
            r = eval_lift(system, Y) - target
            if np.max(np.abs(r)) < tol:
                break
            Y = Y - np.linalg.solve(jacobian(system, Y), r[..., None])[..., 0]
        else:
            raise BranchEnumerationError(f"Newton failed on branch {tuple(br)} (residual {np.max(np.abs(r)):.3g})")
        Y = np.mod(Y, 1.0)
        sols.append(Y)
        out += rho.evaluate(Y) / np.abs(np.linalg.det(jacobian(system, Y)))
    S = np.stack(sols, axis=1)
    for a in range(len(sols)):
        d = np.abs(S[:, a + 1:, :] - S[:, a:a + 1, :])
        d = np.minimum(d, 1.0 - d).max(axis=-1)
        if d.size and d.min() < 1e-8:
            raise BranchEnumerationError("two branches converged to the same preimage")
    vals = out.reshape((M,) * N)
    return JointDensity(vals / vals.mean()), float(vals.mean())


def _values_of(g, rho):
    if callable(g):
        axes = np.meshgrid(*([rho.grid] * rho.N), indexing="ij")
        return np.asarray(g(*axes), dtype=float)
    g = np.asarray(g, dtype=float)
    if g.shape != rho.values.shape:
        raise ValueError("observable must be given on the density grid")
    return g


def martingale_levels(rho: JointDensity, g, k):
    """Conditional expectation of ``g`` given the first ``k`` coordinates, as an ``M**k`` array.

    ``k = 0`` gives the mean, ``k = N`` gives ``g`` itself.
    """
    N = rho.N
    if not 0 <= k <= N:
        raise ValueError(f"k must be between 0 and {N}")
    gv = _values_of(g, rho)
    rest = tuple(range(k, N))
    if not rest:
        return gv.copy()
    num = (gv * rho.values).mean(axis=rest)
    den = rho.values.mean(axis=rest)
    return num / den


def martingale_identity_gap(rho: JointDensity, g):
    """Max over k of ``|E[g_{k+1} | first k] - g_k|`` on the grid."""
    N = rho.N
    gap = 0.0
    for k in range(N):
        gk1 = martingale_levels(rho, g, k + 1)
        gk = martingale_levels(rho, g, k)
        w = rho.marginal(list(range(k + 1)))
        cond = (w * gk1).mean(axis=k) / w.mean(axis=k)
        gap = max(gap, float(np.max(np.abs(cond - gk))))
    return gap


def oscillation(g, j, rho=None):
    """Sup over fibers of ``max - min`` of ``g`` along axis ``j`` (``g`` on the grid, or callable with ``rho``)."""
    gv = _values_of(g, rho) if rho is not None else np.asarray(g, dtype=float)
    return float(np.max(gv.max(axis=j) - gv.min(axis=j)))


def martingale_difference_bound(rho: JointDensity, g, c=10.0):
    """``max_k max |g_{k+1} - g_k|`` with the margin against ``(1/N)(1 + c/N)`` and the fitted ``c``."""
    N = rho.N
    gv = _values_of(g, rho)
    osc = max(oscillation(gv, j) for j in range(N))
    if osc > 1.0 / N + 1e-12:
        raise ValueError(f"observable oscillation {osc:.4g} exceeds 1/N")
    worst = 0.0
    for k in range(N):
        gk1 = martingale_levels(rho, gv, k + 1)
        gk = martingale_levels(rho, gv, k)
        worst = max(worst, float(np.max(np.abs(gk1 - gk[..., None]))))
    bound = (1.0 + c / N) / N
    return {"max_difference": worst, "bound": bound, "margin": bound - worst, "fitted_c": N * N * (worst - 1.0 / N)}


def _conditional_block(rho, k, cond_idx):
    """Normalized conditional density on the last N-k axes given grid indices of the first k."""
    block = rho.values[tuple(cond_idx)]
    return block / block.mean()


def _scale_to_osc1(psi):
    osc = max(float(np.max(psi.max(axis=j) - psi.min(axis=j))) for j in range(psi.ndim))
    return psi / osc if osc > 0 else psi


def bk_lower_bound(rho: JointDensity, k, test_family_size=64, seed=0, pairs=64):
    """Lower bound on ``B(k)``: maximized over random tests in ``O_1`` and random conditioning pairs.

    Tests are random trigonometric polynomials rescaled to oscillation 1 in
    every coordinate, plus for every pair the sign test ``sign(difference)/2``
    and the additive test built from the signs of the one-dimensional
    marginal differences.  Conditioning uses the first ``k`` coordinates.
    The true ``B(k)`` is a supremum over an infinite class; this is only a
    lower bound.
    """
    N, M = rho.N, rho.M
    if N > 4:
        raise ValueError("bk_lower_bound supports N <= 4")
    if not 1 <= k < N:
        return 0.0
    rng = np.random.default_rng(seed)
    dims = N - k
    axes = np.meshgrid(*([rho.grid] * dims), indexing="ij")
    tests = []
    for _ in range(test_family_size):
        psi = np.zeros((M,) * dims)
        for _ in range(3):
            freq = rng.integers(-2, 3, size=dims)
            phase = rng.uniform(0, 2 * np.pi)
            psi += rng.normal() * np.cos(2 * np.pi * sum(f * x for f, x in zip(freq, axes)) + phase)
        tests.append(_scale_to_osc1(psi))
    best = 0.0
    for _ in range(pairs):
        base = rng.integers(0, M, size=k)
        j = rng.integers(0, k)
        other = base.copy()
        other[j] = rng.integers(0, M)
        diff = _conditional_block(rho, k, base) - _conditional_block(rho, k, other)
        cands = [float(np.mean(t * diff)) for t in tests]
        cands.append(float(np.mean(0.5 * np.sign(diff) * diff)))
        add = np.zeros_like(diff)
        for a in range(dims):
            rest = tuple(b for b in range(dims) if b != a)
            md = diff.mean(axis=rest) if rest else diff
            shape = [1] * dims
            shape[a] = M
            add = add + 0.5 * np.sign(md).reshape(shape)
        cands.append(float(np.mean(add * diff)))
        best = max(best, max(abs(c) for c in cands))
    return best


def _probe_oscillation(g, N, rng, bases=4, levels=16):
    worst = 0.0
    vals = np.arange(levels) / levels
    for _ in range(bases):
        x = rng.random(N)
        pts = np.repeat(x[None, None, :], N, axis=0).repeat(levels, axis=1)
        for j in range(N):
            pts[j, :, j] = vals
        out = np.asarray(g(pts.reshape(-1, N))).reshape(N, levels)
        worst = max(worst, float(np.max(out.max(axis=1) - out.min(axis=1))))
    return worst


def concentration_experiment(mu: ProductMeasure, g, N, eps_list, P, seed, C_conf=1.1, confidence=0.99,
                             chunk=100_000):
    """Empirical ``mu(|g - mean g| >= eps)`` with Wilson intervals against ``2 exp(-eps^2 N / C_conf)``.

    ``g`` maps a ``(P, N)`` array to ``P`` values.  Its oscillation in every
    coordinate is probed on a grid before sampling and must not exceed 1/N.
    """
    if mu.N != N:
        raise ValueError("measure dimension differs from N")
    rng = np.random.default_rng(seed)
    osc = _probe_oscillation(g, N, rng)
    if osc > 1.0 / N * (1 + 1e-9):
        raise ValueError(f"observable oscillation {osc:.4g} exceeds 1/N")
    vals = np.empty(P)
    for s in range(0, P, chunk):
        n = min(chunk, P - s)
        ens = sample_product(mu, n, seed, (STREAM_INITIAL << 32) | N, row_start=s)
        vals[s:s + n] = g(ens.particles)
    dev = np.abs(vals - vals.mean())
    rows = []
    for eps in eps_list:
        hits = int(np.count_nonzero(dev >= eps))
        ci = stats.binomtest(hits, P).proportion_ci(confidence_level=confidence, method="wilson")
        bound = 2.0 * np.exp(-eps * eps * N / C_conf)
        rows.append({"eps": float(eps), "tail": hits / P, "hits": hits, "wilson_lo": float(ci.low),
                     "wilson_hi": float(ci.high), "bound": float(bound),
                     "below": bool(hits / P < bound and ci.high < bound)})
    return rows


def _trig_slice_gaps(system, i, Xhat, field, grid):
    """C2 gaps between the frozen slices at the rows of ``Xhat`` and the mean-field map.

    For trigonometric couplings the difference of the two lifts only
    involves Fourier moments of the empirical and mean-field densities.
    """
    N = system.N
    w = np.ones(N) if system.weights is None else system.weights[i]
    wo = np.delete(w, i) / N
    fgrid = np.arange(field.size) / field.size
    diffs = [np.zeros((Xhat.shape[0], grid.size)) for _ in range(3)]
    for amp, p, q, ph in system.coupling.terms:
        dc = np.cos(2 * np.pi * q * Xhat) @ wo - np.mean(field * np.cos(2 * np.pi * q * fgrid))
        ds = np.sin(2 * np.pi * q * Xhat) @ wo - np.mean(field * np.sin(2 * np.pi * q * fgrid))
        alpha = 2 * np.pi * p * grid + ph
        for n in range(3):
            c = amp * (2 * np.pi * p) ** n
            if c != 0.0:
                diffs[n] += c * (np.outer(dc, _sin_derivative(alpha, n))
                                 + np.outer(ds, _sin_derivative(alpha + 0.5 * np.pi, n)))
    d0 = np.mod(diffs[0], 1.0)
    gaps = np.max(np.minimum(d0, 1.0 - d0), axis=1)
    for n in (1, 2):
        gaps = np.maximum(gaps, np.max(np.abs(diffs[n]), axis=1))
    return gaps


def good_set_experiment(system: CoupledMapSystem, mu: ProductMeasure, eps_list, P, seed, tracked=(0,), M=256,
                        chunk=20_000):
    """Fraction of sampled ``x_hat`` whose frozen slice is more than ``eps`` from the mean-field map in C2.

    Returns one row per (tracked coordinate, eps) with the bad fraction and
    the largest ``c`` such that ``bad <= exp(-c N eps^2) / eps``.
    """
    N = system.N
    grid = np.arange(M) / M
    rows = []
    for i in tracked:
        mf = mean_field_map(system, mu, i).map
        gaps = []
        for s in range(0, P, chunk):
            n = min(chunk, P - s)
            X = sample_product(mu, n, seed, (STREAM_INITIAL << 32) | N, row_start=s).particles
            Xhat = np.delete(X, i, axis=1)
            if isinstance(system.coupling, TrigCoupling):
                field, _ = _field_weights(system, mu, i, "frozen")
                gaps.append(_trig_slice_gaps(system, i, Xhat, field, grid))
            else:
                gaps.append(np.array([c2_distance(frozen_slice(system, i, xh), mf, M) for xh in Xhat]))
        gaps = np.concatenate(gaps)
        for eps in eps_list:
            bad = float(np.mean(gaps > eps))
            c_fit = float(-np.log(eps * bad) / (N * eps * eps)) if bad > 0 else float("inf")
            rows.append({"coord": int(i), "N": N, "eps": float(eps), "bad_fraction": bad, "P": P,
                         "max_gap": float(gaps.max()), "c_fit": c_fit})
    return rows


def lipschitz_envelope(system, rho: JointDensity, cert: InvarianceCertificate, b, fibers=8, delta=1e-3, seed=0,
                       i=0, M_fiber=64):
    """One-step Lipschitz envelope ``C/N`` predicted from the straightened decomposition.

    Three measured ingredients are combined with the certificate: ``L_chart``,
    the Lipschitz constant along coordinate ``i`` of ``|D Phi_i| * (rho o Phi_i)``
    (chart step); ``s_fiber``, the sensitivity of ``G_i(.; y_hat)_*`` to
    ``y_hat`` measured in ``theta_b`` (fiber step); and the fiber-mixing
    factor ``(1 + a0)/kappa + D``.  The stationary envelope divides the
    one-step source by ``1 - rate`` where ``rate`` is the certificate's
    contraction rate.
    """
    N, M = rho.N, rho.M
    grid = rho.grid
    others = [k for k in range(N) if k != i]
    base = np.stack(np.meshgrid(*([grid] * N), indexing="ij"), axis=-1).reshape(-1, N)
    X, _, _ = straighten_batch(system, i, base[:, i], base[:, others])
    D = phi_jacobian(system, i, base[:, i], base[:, others], X)
    w = np.abs(np.linalg.det(D)) * rho.evaluate(X)
    eta1 = JointDensity.from_values(w.reshape((M,) * N))
    L_chart = max(ab_quantities(eta1, i, k, b)[2] for k in others)
    rng = np.random.default_rng(seed)
    s_fiber = 0.0
    for _ in range(fibers):
        idx = rng.integers(0, M, size=N - 1)
        yhat = idx / M
        psi, _ = conditional_density(eta1, i, yhat)
        psi = psi.resample(M_fiber) if M_fiber > M else psi
        for c, k in enumerate(others):
            e = np.zeros(N - 1)
            e[c] = delta
            Gp = fiber_map_G(system, i, yhat + e, M=M_fiber).G
            Gm = fiber_map_G(system, i, yhat - e, M=M_fiber).G
            s_fiber = max(s_fiber, hilbert_theta(pushforward(Gp, psi).normalized(), pushforward(Gm, psi).normalized(), b)
                          / (2 * delta))
    mixing = (1 + cert.a0) / cert.kappa + cert.distortion
    one_step = mixing * (cert.Lambda * L_chart + s_fiber)
    rate = cert.contraction_rate
    stationary = one_step / (1.0 - rate) if rate < 1 else float("inf")
    return {"L_chart": float(L_chart), "s_fiber": float(s_fiber), "mixing": float(mixing),
            "one_step": float(one_step), "rate": float(rate), "envelope": float(stationary)}
