"""Straightening of the pull-back foliation of the coupled map.

For a coordinate ``i`` the chart ``Phi_i`` sends ``(y_i, y_hat)`` to the point
``x`` with ``x_i = y_i`` whose other image coordinates agree with those of
``(0, y_hat)``:

    F_hat_i(Phi_i(y_i, y_hat)) = F_hat_i(0, y_hat).

All equations are solved on lifts, so the solution is the one on the leaf
through ``(0, y_hat)`` reached by moving ``y_i`` continuously from 0.  Two
independent solvers are provided: damped Newton on the ``N - 1`` free
coordinates and fixed-step RK4 integration of the leaf tangent field.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cone import birkhoff_factor, empirical_diameter, random_cone_density
from .density import fourier_interpolate, spectral_derivative
from .system import (CoupledMapSystem, InvalidSystemError, _diag_derivative, estimate_datum,
                     eval_lift, interaction_datum, jacobian)
from .transfer import ExpandingMap1D

__all__ = [
    "StraightenedPoint",
    "StraightenError",
    "JacobianInverseReport",
    "FiberMap",
    "InvarianceCertificate",
    "jacobian_inverse_bounds",
    "straighten",
    "straighten_batch",
    "trace_leaf",
    "phi_jacobian",
    "phi_inverse",
    "leaf_closure_gap",
    "decomposition_gap",
    "phi_derivative_table",
    "frozen_slice",
    "fiber_map_G",
    "fiber_gap_scaling",
    "invariance_certificate",
    "SCALING_COLUMNS",
]

SCALING_COLUMNS = ["case_label", "N", "max_abs_estimate", "fitted_slope"]
TRACE_STEP = 1.0 / 1024
BATCH = 256


class StraightenError(RuntimeError):
    """Neither Newton nor leaf tracing produced a point on the leaf."""


@dataclass(frozen=True)
class StraightenedPoint:
    """Base point ``(y_i, y_hat)``, its image under ``Phi_i`` and the constraint residual."""

    i: int
    base: tuple
    image: np.ndarray
    image_lift: np.ndarray
    residual: float
    method: str


def _others(N, i):
    return np.array([j for j in range(N) if j != i], dtype=int)


def _full(i, y, yhat):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    yhat = np.atleast_2d(np.asarray(yhat, dtype=float))
    return np.insert(yhat, i, y, axis=1)


def _constraint(system, i, X, target, idx):
    return eval_lift(system, X)[:, idx] - target


def _newton(system, i, X, target, tol, max_iter=50):
    """Damped Newton on the free coordinates of every row of ``X``; returns (X, residual)."""
    idx = _others(system.N, i)
    X = X.copy()
    r = _constraint(system, i, X, target, idx)
    res = np.max(np.abs(r), axis=1)
    for _ in range(max_iter):
        active = res >= tol
        if not active.any():
            break
        A = jacobian(system, X[active])[:, idx][:, :, idx]
        dz = np.linalg.solve(A, r[active][..., None])[..., 0]
        step = np.ones(active.sum())
        base = X[active]
        old = res[active]
        for _ in range(30):
            trial = base.copy()
            trial[:, idx] -= step[:, None] * dz
            rt = _constraint(system, i, trial, target[active], idx)
            rn = np.max(np.abs(rt), axis=1)
            worse = rn > old
            if not worse.any() or step.min() < 1e-6:
                break
            step = np.where(worse, 0.5 * step, step)
        X[active] = trial
        r[active] = rt
        res[active] = rn
    return X, res


def _tangent(system, i, X, idx):
    J = jacobian(system, X)
    A = J[:, idx][:, :, idx]
    return -np.linalg.solve(A, J[:, idx, i][..., None])[..., 0]


def trace_leaf(system, i, y, yhat, project=True, step=TRACE_STEP, tol=1e-13):
    """Leaf through ``(0, y_hat)`` followed to ``y_i = y`` by fixed-step RK4.

    Every row uses ``ceil(max|y| / step)`` steps, so no row moves more than
    ``step`` in ``y_i`` per step.  With ``project=True`` one Newton correction
    onto the constraint follows every step.  Returns ``(X, residual)``.
    """
    idx = _others(system.N, i)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    X = _full(i, np.zeros_like(y), yhat)
    target = eval_lift(system, X)[:, idx]
    n = max(1, int(np.ceil(np.max(np.abs(y)) / step)))
    h = y / n

    def rhs(state, s):
        Z = state.copy()
        Z[:, i] = s
        return _tangent(system, i, Z, idx)

    for k in range(n):
        s0 = k * h
        z = X[:, idx]
        k1 = rhs(X, s0)
        Xa = X.copy()
        Xa[:, idx] = z + 0.5 * h[:, None] * k1
        k2 = rhs(Xa, s0 + 0.5 * h)
        Xa[:, idx] = z + 0.5 * h[:, None] * k2
        k3 = rhs(Xa, s0 + 0.5 * h)
        Xa[:, idx] = z + h[:, None] * k3
        k4 = rhs(Xa, s0 + h)
        X[:, idx] = z + h[:, None] * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        X[:, i] = (k + 1) * h
        if project:
            X, _ = _newton(system, i, X, target, tol, max_iter=1)
    res = np.max(np.abs(_constraint(system, i, X, target, idx)), axis=1)
    return X, res


def straighten_batch(system, i, y, yhat, tol=1e-13, method="newton"):
    """Vectorized ``Phi_i``.  Returns ``(X_lift, residual, method_used)``.

    ``method="newton"`` starts Newton at ``(y_i, y_hat)`` and falls back to
    projected leaf tracing for rows that stall; ``method="trace"`` always
    traces (with projection).
    """
    if tol < 1e-13:
        raise ValueError("tol must be at least 1e-13")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    yhat = np.atleast_2d(np.asarray(yhat, dtype=float))
    if yhat.shape != (y.size, system.N - 1):
        raise ValueError(f"y_hat must have shape ({y.size}, {system.N - 1})")
    idx = _others(system.N, i)
    used = np.full(y.size, method, dtype=object)
    X = np.empty((y.size, system.N))
    res = np.empty(y.size)
    for s in range(0, y.size, BATCH):
        sl = slice(s, s + BATCH)
        target = eval_lift(system, _full(i, np.zeros(y[sl].size), yhat[sl]))[:, idx]
        if method == "newton":
            Xb, rb = _newton(system, i, _full(i, y[sl], yhat[sl]), target, tol)
            bad = rb >= tol
            if bad.any():
                Xt, rt = trace_leaf(system, i, y[sl][bad], yhat[sl][bad], project=True, tol=tol)
                Xt, rt = _newton(system, i, Xt, target[bad], tol)
                Xb[bad], rb[bad] = Xt, rt
                used[sl][bad] = "trace"
        elif method == "trace":
            Xb, rb = trace_leaf(system, i, y[sl], yhat[sl], project=True, tol=tol)
            Xb, rb = _newton(system, i, Xb, target, tol)
        else:
            raise ValueError("method must be 'newton' or 'trace'")
        X[sl], res[sl] = Xb, rb
    if np.any(res >= tol):
        worst = int(np.argmax(res))
        raise StraightenError(f"no solver reached tol={tol:g}; worst residual {res[worst]:.3g} at row {worst}")
    return X, res, used


def straighten(system: CoupledMapSystem, i, y_i, y_hat, tol=1e-13, method="newton"):
    """``Phi_i(y_i, y_hat)`` for a single base point."""
    if not 0 <= i < system.N:
        raise IndexError(f"coordinate {i} out of range")
    X, res, used = straighten_batch(system, i, [y_i], [y_hat], tol, method)
    return StraightenedPoint(i, (float(y_i), tuple(np.asarray(y_hat, dtype=float))), np.mod(X[0], 1.0),
                             X[0], float(res[0]), str(used[0]))


def phi_jacobian(system, i, y, yhat, X=None):
    """Exact derivative matrices ``D[p, m, k] = d_k Phi_{i,m}`` from implicit differentiation."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    yhat = np.atleast_2d(np.asarray(yhat, dtype=float))
    if X is None:
        X, _, _ = straighten_batch(system, i, y, yhat)
    idx = _others(system.N, i)
    JX = jacobian(system, X)
    J0 = jacobian(system, _full(i, np.zeros_like(y), yhat))
    A = JX[:, idx][:, :, idx]
    rhs = np.concatenate([-JX[:, idx, i][..., None], J0[:, idx][:, :, idx]], axis=2)
    sol = np.linalg.solve(A, rhs)
    P, N = y.size, system.N
    D = np.zeros((P, N, N))
    D[:, i, i] = 1.0
    D[:, idx, i] = sol[:, :, 0]
    D[np.ix_(np.arange(P), idx, idx)] = sol[:, :, 1:]
    return D


def phi_inverse(system, i, x, tol=1e-13):
    """Base points ``(y_i, y_hat)`` with ``Phi_i(y_i, y_hat) = x``; returns the full array with ``y_i`` in column i."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    idx = _others(system.N, i)
    target = eval_lift(system, x)[:, idx]
    Y = x.copy()
    Y[:, i] = 0.0
    for _ in range(50):
        r = eval_lift(system, Y)[:, idx] - target
        if np.max(np.abs(r)) < tol:
            break
        A = jacobian(system, Y)[:, idx][:, :, idx]
        Y[:, idx] -= np.linalg.solve(A, r[..., None])[..., 0]
    Y[:, i] = x[:, i]
    return Y


def decomposition_gap(system, i, x):
    """Max circle distance between ``G(Phi_i^{-1}(x))`` and ``F(x)`` over the rows of ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    Y = phi_inverse(system, i, x)
    idx = _others(system.N, i)
    X, _, _ = straighten_batch(system, i, Y[:, i], Y[:, idx])
    G = np.empty_like(x)
    G[:, i] = eval_lift(system, X)[:, i]
    base = Y.copy()
    base[:, i] = 0.0
    G[:, idx] = eval_lift(system, base)[:, idx]
    d = np.mod(G - eval_lift(system, x), 1.0)
    return float(np.max(np.minimum(d, 1.0 - d)))


def leaf_closure_gap(system, i, yhat, project=False):
    """Distance (on lifts) between the start and the end of a leaf traced once around ``y_i``."""
    yhat = np.atleast_2d(np.asarray(yhat, dtype=float))
    X, _ = trace_leaf(system, i, np.ones(yhat.shape[0]), yhat, project=project)
    idx = _others(system.N, i)
    return float(np.max(np.abs(X[:, idx] - yhat)))


@dataclass(frozen=True)
class JacobianInverseReport:
    """Worst margins of the three inverse-Jacobian inequalities over the sampled points."""

    N: int
    kappa: float
    bigE: float
    offdiag_bound: float
    diag_upper_bound: float
    max_offdiag: float
    max_diag: float
    offdiag_margin: float
    diag_upper_margin: float
    diag_lower_margin: float
    samples: int

    @property
    def all_hold(self):
        return self.offdiag_margin > 0 and self.diag_upper_margin >= 0 and self.diag_lower_margin >= 0


def jacobian_inverse_bounds(system, sample_count=1000, seed=0, chunk=None):
    """Check the entrywise bounds on the inverse Jacobian at uniformly random points.

    Uses the first-derivative datum ``(kappa, E)`` with ``|d_i F_i| > kappa``
    and ``|d_j F_i| <= E/N``; requires ``kappa - E > 1``.
    """
    kappa, E = interaction_datum(system)
    if not kappa - E > 1:
        raise InvalidSystemError(f"kappa - E = {kappa - E:.4g} <= 1")
    N = system.N
    c = E + E * E / (kappa - E)
    off_bound = c / (kappa * N)
    up_bound = (1.0 + E * c / N) / kappa
    rng = np.random.default_rng(seed)
    pts = rng.random((sample_count, N))
    chunk = chunk or max(1, 2_000_000 // (N * N))
    mo, md, low = 0.0, 0.0, np.inf
    idx = np.arange(N)
    for s in range(0, sample_count, chunk):
        J = jacobian(system, pts[s:s + chunk])
        if np.any(np.abs(np.linalg.det(J)) == 0):
            raise InvalidSystemError("singular Jacobian at a sampled point")
        Jinv = np.linalg.inv(J)
        diag = np.abs(Jinv[:, idx, idx])
        off = np.abs(Jinv)
        off[:, idx, idx] = 0.0
        mo = max(mo, float(off.max()))
        md = max(md, float(diag.max()))
        lower = (1.0 - E * c / N) / np.abs(J[:, idx, idx])
        low = min(low, float(np.min(diag - lower)))
    return JacobianInverseReport(N, kappa, E, off_bound, up_bound, mo, md, off_bound - mo, up_bound - md,
                                 low, sample_count)


def _random_bases(rng, count, N):
    return rng.random(count), rng.random((count, N - 1))


def _fd_phi(system, i, y, yhat, k, h, tol):
    """Richardson-extrapolated central difference of ``Phi_i`` along base coordinate ``k``."""
    base = _full(i, y, yhat)
    idx = _others(system.N, i)

    def at(delta):
        pts = base.copy()
        pts[:, k] += delta
        X, _, _ = straighten_batch(system, i, pts[:, i], pts[:, idx], tol)
        return X

    d1 = (at(h) - at(-h)) / (2 * h)
    d2 = (at(h / 2) - at(-h / 2)) / h
    return (4 * d2 - d1) / 3


def _fit(Ns, vals):
    Ns, vals = np.asarray(Ns, dtype=float), np.asarray(vals, dtype=float)
    ok = vals > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(Ns[ok]), np.log(vals[ok]), 1)[0])


CASES = ("m=k=i", "m=i,k!=i", "m=k!=i", "m=k!=i (|d-1|)", "k=i,m!=k", "k!=i,m!=k", "d_i d_i Phi_m, m!=i")


def _case_maxima(D, i, second=None):
    P, N, _ = D.shape
    idx = _others(N, i)
    A = np.abs(D)
    out = {
        "m=k=i": float(A[:, i, i].max()),
        "m=i,k!=i": float(A[:, i, idx].max()) if N > 1 else 0.0,
        "m=k!=i": float(A[:, idx, idx].max()),
        "m=k!=i (|d-1|)": float(np.abs(D[:, idx, idx] - 1.0).max()),
        "k=i,m!=k": float(A[:, idx, i].max()),
    }
    off = A[:, :, idx].copy()
    for c, k in enumerate(idx):
        off[:, k, c] = 0.0
    out["k!=i,m!=k"] = float(off.max())
    if second is not None:
        out["d_i d_i Phi_m, m!=i"] = float(np.abs(second[:, idx]).max())
    return out


def phi_derivative_table(system_family, i=0, sample_count=16, fd_step=1e-4, N_list=(8, 16, 32, 64), seed=0,
                         tol=1e-13, second_step=1e-3):
    """Sup-estimates of the partial derivatives of ``Phi_i`` grouped by index case, with log-log slopes in N.

    First partials are central differences of :func:`straighten` along every
    base coordinate (step ``fd_step`` with one Richardson extrapolation).
    The second partial ``d_i d_i Phi_m`` uses central differences of the
    exact first derivative with step ``second_step``.  Returns
    ``(rows, detail)`` where ``rows`` follow ``SCALING_COLUMNS`` and
    ``detail[N]`` holds the finite-difference and exact derivative arrays.
    """
    per_N, detail = {}, {}
    for N in N_list:
        system = system_family(N)
        rng = np.random.default_rng([seed, N])
        y, yhat = _random_bases(rng, sample_count, N)
        X, _, _ = straighten_batch(system, i, y, yhat, tol)
        D_exact = phi_jacobian(system, i, y, yhat, X)
        D_fd = np.empty_like(D_exact)
        for k in range(N):
            D_fd[:, :, k] = _fd_phi(system, i, y, yhat, k, fd_step, tol)
        hp = phi_jacobian(system, i, y + second_step, yhat)[:, :, i]
        hm = phi_jacobian(system, i, y - second_step, yhat)[:, :, i]
        second = (hp - hm) / (2 * second_step)
        per_N[N] = _case_maxima(D_fd, i, second)
        detail[N] = {"fd": D_fd, "exact": D_exact, "second": second}
    noise = 10 * tol / fd_step
    rows = []
    for case in CASES:
        vals = [per_N[N][case] for N in N_list]
        resolved = [v if v > noise else 0.0 for v in vals]
        slope = _fit(N_list, resolved) if case not in ("m=k=i", "m=i,k!=i", "m=k!=i") else float("nan")
        for N, v in zip(N_list, vals):
            rows.append({"case_label": case, "N": N, "max_abs_estimate": v, "fitted_slope": slope})
    return rows, detail


def frozen_slice(system, i, xhat):
    """``x -> F_i(x; x_hat)`` as a 1D expanding map with exact derivatives."""
    N = system.N
    idx = _others(N, i)
    xhat = np.asarray(xhat, dtype=float)
    w = np.ones(N) if system.weights is None else system.weights[i]
    wo = w[idx] / N
    wii = w[i] / N
    site = system.site_maps[i]
    h = system.coupling

    def lift(x, n=0):
        x = np.asarray(x, dtype=float)
        out = site(x, n) + h(x[..., None], xhat, n, 0) @ wo
        if wii:
            out = out + wii * _diag_derivative(h, x, n)
        return out

    return ExpandingMap1D(lift)


@dataclass(frozen=True)
class FiberMap:
    """The fiber map ``G_i(.; y_hat)`` next to the frozen slice ``H_i(.; y_hat)``."""

    G: ExpandingMap1D
    H: ExpandingMap1D
    c2_gap: float
    grid_values: np.ndarray


def fiber_map_G(system, i, y_hat, M=256, tol=1e-13):
    """Sample ``G_i(y; y_hat) = F_i(Phi_i(y, y_hat))`` on ``M`` grid points and interpolate spectrally."""
    y_hat = np.asarray(y_hat, dtype=float)
    y = np.arange(M) / M
    X, _, _ = straighten_batch(system, i, y, np.broadcast_to(y_hat, (M, system.N - 1)), tol)
    g = eval_lift(system, X)[:, i]
    H = frozen_slice(system, i, y_hat)
    degree = H.degree
    periodic = g - degree * y

    def lift(x, n=0):
        x = np.asarray(x, dtype=float)
        val = fourier_interpolate(periodic, x, n)
        if n == 0:
            return degree * x + val
        if n == 1:
            return degree + val
        return val

    G = ExpandingMap1D(lift)
    grid_gap = max(
        float(np.max(np.minimum(np.mod(g - H(y), 1.0), 1.0 - np.mod(g - H(y), 1.0)))),
        float(np.max(np.abs(degree + spectral_derivative(periodic, 1) - H(y, 1)))),
        float(np.max(np.abs(spectral_derivative(periodic, 2) - H(y, 2)))),
    )
    return FiberMap(G, H, grid_gap, g)


def fiber_gap_scaling(system_family, i=0, N_list=(8, 16, 32, 64), sample_count=8, spread=0.05, M=64, seed=0):
    """Sup-estimates of ``d_C2(G_i, H_i)`` over ``y_hat`` with the log-log slope in N.

    Half of the ``y_hat`` samples are uniform and half are clustered around a
    random centre with Gaussian ``spread``.  Uniform samples alone
    underestimate the sup because the leading term averages out.  Returns
    ``(rows, slope)`` with one row per N.
    """
    rows = []
    for N in N_list:
        system = system_family(N)
        rng = np.random.default_rng([seed, N])
        gaps = []
        for _ in range(sample_count):
            gaps.append(fiber_map_G(system, i, rng.random(N - 1), M).c2_gap)
            centre = rng.random()
            gaps.append(fiber_map_G(system, i, np.mod(centre + spread * rng.standard_normal(N - 1), 1.0), M).c2_gap)
        rows.append({"N": N, "max_c2_gap": float(max(gaps)), "samples": len(gaps)})
    slope = _fit(N_list, [r["max_c2_gap"] for r in rows])
    return rows, slope


@dataclass(frozen=True)
class InvarianceCertificate:
    """Measured constants and the inequality checks built from them.

    The constants are finite-difference sup estimates over sampled points,
    inflated by ``inflation``; the checks are numerical evidence, not proof.
    """

    kappa: float
    distortion: float
    K: float
    L: float
    K_hat: float
    L_hat: float
    a_phi: float
    b_phi: float
    Lambda: float
    diameter: float
    a0: float
    b0: float
    alpha0: float
    N_used: int
    inflation: float
    checks: dict = field(default_factory=dict)
    label: str = "numerical evidence"

    @staticmethod
    def evaluate(kappa, D, K, L, a_phi, Lambda, a0, b0):
        inv = 1.0 / kappa
        return {
            "expansion_beats_chart": inv * K < 1,
            "expansion_beats_chart_squared": inv * K * K < 1,
            "cone_parameter_a0": inv * (K * a0 + a_phi + D) < a0,
            "outer_parameter_b0": b0 > K * a0 + a_phi,
            "lipschitz_contraction": ((1 + a0) * inv + D) * Lambda * L < 1,
        }

    def recompute(self):
        return self.evaluate(self.kappa, self.distortion, self.K, self.L, self.a_phi, self.Lambda, self.a0,
                             self.b0)

    @property
    def passed(self):
        return all(self.checks.values())

    @property
    def contraction_rate(self):
        """``[(1 + a0)/kappa + D] * Lambda * L``, the per-step factor on the Lipschitz constant."""
        return ((1 + self.a0) / self.kappa + self.distortion) * self.Lambda * self.L


def _sum_products(S, j, k):
    # sum_m sum_{l != m} S[l, j] S[m, k]
    return float(S[:, j].sum() * S[:, k].sum() - np.sum(S[:, j] * S[:, k]))


def invariance_certificate(system, a0, b0, alpha0, sample_count=16, seed=0, fd_step=1e-4, inflation=1.2,
                           diameter_samples=24, M=256, coords=None, tol=1e-13):
    """Estimate the chart constants and evaluate the invariance inequalities at ``(a0, b0)``.

    ``coords`` lists the straightened coordinates to sample (default: 0 only
    for exchangeable systems, all otherwise).
    """
    if not b0 > a0 > 0:
        raise ValueError("need b0 > a0 > 0")
    datum = estimate_datum(system)
    kappa, D = datum.kappa, datum.distortion
    N = system.N
    if coords is None:
        coords = [0] if system.exchangeable else list(range(N))
    rng = np.random.default_rng(seed)
    Ks, Ls, Khs, Lhs, aphis = [], [], [], [], []
    for i in coords:
        y, yhat = _random_bases(rng, sample_count, N)
        Dfd = np.empty((sample_count, N, N))
        for k in range(N):
            Dfd[:, :, k] = _fd_phi(system, i, y, yhat, k, fd_step, tol)
        S = np.abs(Dfd).max(axis=0)
        dmin = np.abs(Dfd[:, np.arange(N), np.arange(N)]).min(axis=0)
        others = [k for k in range(N) if k != i]
        Ks.append(S[:, i].sum())
        Ls.append(max((_sum_products(S, i, k) / dmin[i] for k in others), default=0.0))
        Khs.append(max((S[:, k].sum() for k in others), default=1.0))
        Lhs.append(max((_sum_products(S, j, k) / dmin[j] for j in others for k in others if k != j),
                       default=0.0))
        h = fd_step
        ld = [np.log(np.abs(np.linalg.det(phi_jacobian(system, i, y + s, yhat)))) for s in (h, -h)]
        aphis.append(float(np.max(np.abs(ld[0] - ld[1]) / (2 * h))))
    K = inflation * max(Ks)
    L = inflation * max(Ls)
    K_hat = inflation * max(Khs)
    L_hat = inflation * max(Lhs)
    a_phi = inflation * max(aphis)
    b_phi = b0 - K * a0
    inner = (b0 + D) / kappa
    if inner < b0:
        samples = [random_cone_density(rng, M, inner, fill=(0.5, 0.999)) for _ in range(diameter_samples)]
        diam = empirical_diameter(samples, b0)
    else:
        diam = float("inf")
    Lam = birkhoff_factor(diam)
    checks = InvarianceCertificate.evaluate(kappa, D, K, L, a_phi, Lam, a0, b0)
    return InvarianceCertificate(kappa, D, K, L, K_hat, L_hat, a_phi, b_phi, Lam, diam, a0, b0, alpha0, N,
                                 inflation, checks)
