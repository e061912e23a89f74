"""Particle ensembles of the coupled map and the propagation-of-chaos experiment.

Randomness
----------
All uniforms come from numpy's ``Philox`` counter-based generator (4x64
rounds variant) keyed by ``(seed, stream)``.  Particle ``p`` owns the
counter block starting at ``p * S / 4`` with ``S = 4 * ceil(N / 4)``, and its
N coordinates are the first N doubles of that block.  Any chunking of the
particles therefore reproduces the same ensemble bit for bit.

Marginal estimation
-------------------
Marginals are represented by their Fourier coefficients
``c_k = E exp(-2 pi i k X)`` for ``1 <= k <= M_modes``.  Distances between a
marginal estimate and a reference density are computed between the two
``M_modes``-truncated reconstructions, so the truncation tail common to both
does not enter.

Control-variate estimator
-------------------------
For exchangeable systems with identical initial marginals every particle
also carries a mean-field copy started from the same initial angles and
evolved by the time-dependent mean-field maps.  Its coordinates are exactly
i.i.d. with the operator marginals, so row averages of its Fourier modes,
and products of the first-mode averages with all others, have expectations
computable by quadrature.  Regressing the coupled-map row averages on these
centred features and subtracting the fitted part leaves an unbiased
estimate of the coupled marginal's coefficients with far smaller variance.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ._kernels import HAVE_NUMBA, pooled_features_compiled
from .cone import hilbert_theta
from .density import GridDensity, resample_periodic
from .sto import ProductMeasure, mean_field_map, sto_iterate
from .system import CoupledMapSystem, ExpandingSiteMap, TrigCoupling, eval_lift, eval_map

__all__ = [
    "philox_uniforms",
    "MarginalSampler",
    "ParticleEnsemble",
    "EmpiricalMarginal",
    "sample_product",
    "step_ensemble",
    "empirical_marginal",
    "fourier_coefficients",
    "tv_from_coefficients",
    "pooled_features",
    "ChaosResult",
    "chaos_experiment",
    "joint_vs_product",
    "CHAOS_COLUMNS",
]

CHAOS_COLUMNS = ["N", "t", "coord", "metric", "distance", "err_lo", "err_hi", "P", "seed"]
SAMPLER_GRID = 1 << 16
STREAM_INITIAL = 0
STREAM_BOOTSTRAP = 1


def _key(seed, stream):
    return [int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream) & 0xFFFFFFFFFFFFFFFF]


def philox_uniforms(seed, stream, row_start, n_rows, n_cols):
    """Uniforms in [0, 1) for rows ``row_start .. row_start + n_rows`` of an ``n_cols``-wide table."""
    stride = 4 * ((n_cols + 3) // 4)
    bitgen = np.random.Philox(key=_key(seed, stream))
    if row_start:
        bitgen.advance(row_start * stride // 4)
    block = np.random.Generator(bitgen).random((n_rows, stride))
    return np.ascontiguousarray(block[:, :n_cols])


def _bootstrap_generator(seed, stream):
    return np.random.Generator(np.random.Philox(key=_key(seed, stream)))


class MarginalSampler:
    """Inverse-CDF sampler for a grid density.

    The density is resampled (trigonometric interpolation) onto a grid of
    ``SAMPLER_GRID`` points, integrated by the cumulative trapezoid rule and
    inverted by linear interpolation.
    """

    def __init__(self, psi: GridDensity, grid=SAMPLER_GRID):
        if abs(psi.integral - 1.0) > 1e-10:
            raise ValueError("sampler needs a probability density")
        vals = resample_periodic(psi.values, max(grid, psi.M))
        if np.any(vals < -1e-12 * vals.max()):
            raise ValueError("interpolated density is negative somewhere; refine the grid")
        vals = np.maximum(vals, 0.0)
        G = vals.size
        cells = 0.5 * (vals + np.roll(vals, -1)) / G
        cdf = np.concatenate([[0.0], np.cumsum(cells)])
        self.cdf = cdf / cdf[-1]
        self.nodes = np.arange(G + 1) / G

    def __call__(self, u):
        x = np.interp(u, self.cdf, self.nodes)
        return np.where(x >= 1.0, 0.0, x)


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """``P x N`` angles in [0, 1) at time ``generation``."""

    particles: np.ndarray
    seed: int
    generation: int = 0

    def __post_init__(self):
        arr = np.asarray(self.particles, dtype=float)
        if arr.ndim != 2:
            raise ValueError("particles must be a P x N array")
        object.__setattr__(self, "particles", arr)

    @property
    def P(self):
        return self.particles.shape[0]

    @property
    def N(self):
        return self.particles.shape[1]


def _samplers(mu: ProductMeasure):
    if mu.identical:
        return MarginalSampler(mu.marginals[0])
    return [MarginalSampler(m) for m in mu.marginals]


def _draw(samplers, u):
    if isinstance(samplers, MarginalSampler):
        return samplers(u)
    out = np.empty_like(u)
    for j, smp in enumerate(samplers):
        out[:, j] = smp(u[:, j])
    return out


def sample_product(mu: ProductMeasure, P, seed, stream=STREAM_INITIAL, row_start=0):
    """Draw ``P`` particles from the product measure ``mu``."""
    if P < 1:
        raise ValueError("P must be positive")
    u = philox_uniforms(seed, stream, row_start, P, mu.N)
    return ParticleEnsemble(_draw(_samplers(mu), u), seed=seed, generation=0)


def step_ensemble(system: CoupledMapSystem, ens: ParticleEnsemble, t_steps=1):
    """Apply the coupled map ``t_steps`` times to every particle."""
    if system.N != ens.N:
        raise ValueError(f"ensemble has N={ens.N}, system has N={system.N}")
    x = ens.particles
    for _ in range(t_steps):
        x = eval_map(system, x)
    return ParticleEnsemble(x, seed=ens.seed, generation=ens.generation + t_steps)


def fourier_coefficients(samples, K):
    """``c_k = mean exp(-2 pi i k x)`` for ``k = 1..K`` along the last axis."""
    samples = np.asarray(samples, dtype=float)
    e = np.exp(-2j * np.pi * samples)
    out = np.empty(samples.shape[:-1] + (K,), dtype=complex)
    w = e.copy()
    for k in range(K):
        out[..., k] = w.mean(axis=-1)
        if k < K - 1:
            w *= e
    return out


def density_coefficients(psi: GridDensity, K):
    """Fourier coefficients ``int psi(x) exp(-2 pi i k x) dx`` for ``k = 1..K``."""
    c = np.fft.rfft(psi.values) / psi.M
    if K >= psi.M // 2:
        raise ValueError("too many modes for the grid")
    return c[1:K + 1].copy()


def _reconstruct(coef, G):
    x = np.arange(G) / G
    k = np.arange(1, coef.shape[-1] + 1)
    return 2.0 * np.real(np.exp(2j * np.pi * np.outer(x, k)) @ coef.T).T


def tv_from_coefficients(delta, G=None):
    """Total variation of the trigonometric polynomial with coefficients ``delta`` (k >= 1)."""
    delta = np.atleast_2d(delta)
    G = G or max(1024, 64 * delta.shape[-1])
    g = _reconstruct(delta, G)
    out = 0.5 * np.mean(np.abs(g), axis=-1)
    return out if out.size > 1 else float(out[0])


@dataclass(frozen=True, eq=False)
class EmpiricalMarginal:
    """Truncated Fourier description of one coordinate's empirical law."""

    coefficients: np.ndarray
    reconstructed: GridDensity
    floor: float = 1e-8

    @property
    def M_modes(self):
        return self.coefficients.size - 1


def _repair(values, floor):
    v = np.maximum(values, floor)
    return GridDensity(v / v.mean())


def empirical_marginal(ens: ParticleEnsemble, i, M_modes=16, M=256, floor=1e-8):
    """Empirical Fourier coefficients of coordinate ``i`` (0-based) and a positive reconstruction.

    ``coefficients[k]`` holds ``c_k`` for ``k = 0..M_modes`` with ``c_0 = 1``.
    The reconstruction is clipped at ``floor`` and renormalized.
    """
    if not 0 <= i < ens.N:
        raise IndexError(f"coordinate {i} out of range for N={ens.N}")
    c = np.concatenate([[1.0 + 0j], fourier_coefficients(ens.particles[:, i], M_modes)])
    vals = 1.0 + _reconstruct(c[1:][None, :], M)[0]
    return EmpiricalMarginal(c, _repair(vals, floor), floor)


def _cv_supported(system, mu0):
    site = system.site_maps[0]
    return (system.exchangeable and mu0.identical and isinstance(site, ExpandingSiteMap)
            and isinstance(system.coupling, TrigCoupling))


def _mf_field_moments(system, sto_marginals, self_term):
    """Per step and coupling term, the cosine and sine moments that define the mean-field lift."""
    N = system.N
    h = system.coupling
    T = len(h.terms)
    t = len(sto_marginals)
    mc = np.zeros((t, T))
    ms = np.zeros((t, T))
    for s, rho in enumerate(sto_marginals):
        grid = rho.grid
        scale = (N - 1) / N if self_term == "frozen" else 1.0
        w = scale * rho.values
        for a, (_, _, q, _) in enumerate(h.terms):
            mc[s, a] = np.mean(w * np.cos(2 * np.pi * q * grid))
            ms[s, a] = np.mean(w * np.sin(2 * np.pi * q * grid))
    return mc, ms


def pooled_features(system, sto_measures, x0, K, self_term="frozen", backend="auto"):
    """Row-averaged Fourier modes of the coupled map and of its mean-field copy.

    Returns ``(Y, W)`` with ``Y[r, k-1]`` the average over coordinates of
    ``exp(-2 pi i k x_j(t))`` for row ``r`` and ``W[r, s, k-1]`` the same for the
    mean-field copy at time ``s = 0..t``.  ``sto_measures`` lists the operator
    iterates ``mu_0 .. mu_{t-1}``.  ``backend`` is ``"compiled"``, ``"numpy"``
    or ``"auto"``.
    """
    n, N = x0.shape
    t = len(sto_measures)
    if backend == "auto":
        backend = "compiled" if HAVE_NUMBA and _cv_supported(system, sto_measures[0]) else "numpy"
    if backend == "compiled":
        if not HAVE_NUMBA:
            raise RuntimeError("compiled backend requested but numba is not installed")
        site = system.site_maps[0]
        terms = np.array(system.coupling.terms, dtype=float).reshape(-1, 4)
        modes = np.array(site.modes, dtype=float).reshape(-1, 3)
        mc, ms = _mf_field_moments(system, [m.marginals[0] for m in sto_measures], self_term)
        diag_w = 1.0 / N if self_term == "frozen" else 0.0
        Y = np.zeros((n, K), dtype=complex)
        W = np.zeros((n, t + 1, K), dtype=complex)
        pooled_features_compiled(np.ascontiguousarray(x0), float(site.degree), site.shift, modes, terms,
                                 mc, ms, diag_w, K, Y, W)
        return Y, W
    maps = [mean_field_map(system, m, 0, self_term).map for m in sto_measures]
    x = x0.copy()
    y = x0.copy()
    W = np.empty((n, t + 1, K), dtype=complex)
    for s in range(t):
        W[:, s] = fourier_coefficients(y, K)
        x = np.mod(eval_lift(system, x), 1.0)
        y = np.mod(maps[s](y), 1.0)
    W[:, t] = fourier_coefficients(y, K)
    return fourier_coefficients(x, K), W


def _trajectory_moments(maps, rho0: GridDensity, K, U=1 << 15):
    """Exact means and covariances of single-coordinate mean-field features.

    Features are real and imaginary parts of ``exp(-2 pi i k y_s)`` for the
    trajectory ``y_s`` of one coordinate, ``s = 0..t`` and ``k = 1..K``.
    Integrals over the initial angle use the trapezoid rule on ``U`` nodes.
    """
    u = np.arange(U) / U
    w = resample_periodic(rho0.values, U)
    w = w / w.sum()
    ys = [u]
    for m in maps:
        ys.append(np.mod(m(ys[-1]), 1.0))
    k = np.arange(1, K + 1)
    Z = np.concatenate([np.exp(-2j * np.pi * np.outer(k, y)) for y in ys], axis=0)
    F = np.concatenate([Z.real, Z.imag], axis=0)
    mean = F @ w
    Fc = F - mean[:, None]
    cov = (Fc * w) @ Fc.T
    return mean, cov


def _real_features(W):
    n = W.shape[0]
    Z = W.reshape(n, -1)
    return np.concatenate([Z.real, Z.imag], axis=1)


class _CVDesign:
    """Linear features ``Wc`` and products of the first-mode features with all of ``Wc``."""

    def __init__(self, K, t, N, mean, cov):
        self.D = 2 * K * (t + 1)
        first = [s * K for s in range(t)]
        self.lead = np.array(first + [K * (t + 1) + s * K for s in range(t)])
        self.mean = mean
        self.quad_mean = (cov[self.lead, :] / N).reshape(-1)

    @property
    def width(self):
        return self.D + self.lead.size * self.D

    def build(self, Wr):
        Wc = Wr - self.mean
        Q = (Wc[:, self.lead, None] * Wc[:, None, :]).reshape(Wc.shape[0], -1) - self.quad_mean
        return np.concatenate([Wc, Q], axis=1)


def _solve_cv(Yr, Wr, design, chunk=8192):
    P = Yr.shape[0]
    p = design.width
    Sxx = np.zeros((p, p))
    Sxy = np.zeros((p, Yr.shape[1]))
    sx = np.zeros(p)
    for s in range(0, P, chunk):
        X = design.build(Wr[s:s + chunk])
        Sxx += X.T @ X
        Sxy += X.T @ Yr[s:s + chunk]
        sx += X.sum(axis=0)
    ybar = Yr.mean(axis=0)
    Cxx = Sxx - np.outer(sx, sx) / P
    Cxy = Sxy - np.outer(sx, ybar)
    d = np.sqrt(np.maximum(np.diag(Cxx), 0.0))
    keep = d > 1e-14 * max(1.0, d.max(initial=0.0))
    beta = np.zeros((p, Yr.shape[1]))
    if keep.any():
        A = Cxx[np.ix_(keep, keep)] / np.outer(d[keep], d[keep])
        sol, *_ = linalg.lstsq(A, Cxy[keep] / d[keep, None], cond=1e-12)
        beta[keep] = sol / d[keep, None]
    R = np.empty_like(Yr)
    for s in range(0, P, chunk):
        R[s:s + chunk] = Yr[s:s + chunk] - design.build(Wr[s:s + chunk]) @ beta
    return R


def _to_complex(v, K):
    return v[..., :K] + 1j * v[..., K:]


@dataclass
class ChaosResult:
    """Rows of the chaos table plus the fitted log-log slope."""

    rows: list
    slope: float
    slope_stderr: float
    strictly_decreasing: bool
    per_N: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CHAOS_COLUMNS)
        for r in self.rows:
            writer.writerow([_fmt(r[c]) for c in CHAOS_COLUMNS])
        return buf.getvalue()

    def summary(self, config=None):
        out = {
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "strictly_decreasing": self.strictly_decreasing,
            "per_N": self.per_N,
            "notes": self.notes,
        }
        if config is not None:
            out["config_hash"] = config_hash(config)
        return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _fit_slope(Ns, d, sd):
    Ns, d, sd = map(np.asarray, (Ns, d, sd))
    if Ns.size < 2:
        return float("nan"), float("nan")
    x = np.log(Ns)
    y = np.log(d)
    sig = np.maximum(sd / d, 1e-12)
    A = np.column_stack([np.ones_like(x), x]) / sig[:, None]
    coef, *_ = np.linalg.lstsq(A, y / sig, rcond=None)
    cov = np.linalg.inv(A.T @ A)
    return float(coef[1]), float(np.sqrt(cov[1, 1]))


def _bootstrap_means(R, B, gen, batch=20):
    P = R.shape[0]
    out = np.empty((B, R.shape[1]))
    for b0 in range(0, B, batch):
        nb = min(batch, B - b0)
        counts = gen.multinomial(P, np.full(P, 1.0 / P), size=nb)
        out[b0:b0 + nb] = counts @ R / P
    return out


def _distance_stats(delta_hat, delta_boot, ref_coef, metric, b):
    """Point distance, bootstrap standard error and noise floor for one coordinate set."""
    centred = delta_boot - delta_hat
    if metric == "TV":
        d = tv_from_coefficients(delta_hat)
        boot = tv_from_coefficients(delta_boot)
        floor = float(np.median(tv_from_coefficients(centred)))
    else:
        G = 256
        base = 1.0 + _reconstruct(ref_coef[None, :], G)[0]
        ref = GridDensity(base)

        def theta(delta):
            return hilbert_theta(GridDensity(base + _reconstruct(delta[None, :], G)[0]), ref, b)

        d = theta(delta_hat)
        boot = np.array([theta(x) for x in delta_boot])
        floor = float(np.median([theta(x) for x in centred]))
    return float(d), float(np.std(boot, ddof=1)), floor


def chaos_experiment(system_family, mu0_rule, t, N_list, P, seed, metric="TV", M_modes=16,
                     estimator="auto", tracked=(0,), bootstrap=200, chunk_elements=1 << 21,
                     b=None, self_term="frozen", backend="auto"):
    """Distance between coupled-map marginals and operator marginals as N grows.

    Parameters
    ----------
    system_family, mu0_rule : callable
        ``N -> CoupledMapSystem`` and ``N -> ProductMeasure``.
    t : int
        Number of time steps.
    N_list : sequence of int
        Ascending system sizes.
    P : int
        Particles per size.
    metric : {"TV", "theta"}
        Distance between truncated reconstructions; ``"theta"`` needs ``b``.
    estimator : {"auto", "cv", "pooled", "tracked"}
        ``"cv"`` pools all coordinates and applies the mean-field control
        variates (exchangeable systems only); ``"pooled"`` pools coordinates
        without control variates; ``"tracked"`` uses the listed coordinates
        separately.  ``"auto"`` picks ``"cv"`` when available.

    Returns
    -------
    ChaosResult
    """
    N_list = list(N_list)
    if N_list != sorted(N_list):
        raise ValueError("N_list must be ascending")
    if metric not in ("TV", "theta"):
        raise ValueError("metric must be 'TV' or 'theta'")
    if metric == "theta" and b is None:
        raise ValueError("theta metric needs the cone parameter b")
    rows, per_N, notes = [], [], []
    K = M_modes
    for idx, N in enumerate(N_list):
        system = system_family(N)
        mu0 = mu0_rule(N)
        iterates = sto_iterate(system, mu0, t, self_term)
        est = estimator
        uncoupled = _is_uncoupled(system)
        if uncoupled:
            notes.append("uncoupled: exact equality expected")
        if est == "auto":
            if uncoupled and system.exchangeable and mu0.identical:
                est = "pooled"
            else:
                est = "cv" if _cv_supported(system, mu0) else "tracked"
        if est in ("cv", "pooled") and not (system.exchangeable and mu0.identical):
            raise ValueError(f"estimator {est!r} needs an exchangeable system with identical marginals")
        chunk = max(1, chunk_elements // N)
        samplers = _samplers(mu0)
        if est in ("cv", "pooled"):
            Ys, Ws = [], []
            for r0 in range(0, P, chunk):
                n = min(chunk, P - r0)
                x0 = _draw(samplers, philox_uniforms(seed, (STREAM_INITIAL << 32) | N, r0, n, N))
                Y, W = pooled_features(system, iterates[:-1], x0, K, self_term, backend)
                Ys.append(Y)
                Ws.append(W)
            Yr = _real_features(np.concatenate(Ys)[:, None, :])
            Wr = _real_features(np.concatenate(Ws))
            if est == "cv":
                maps = [mean_field_map(system, m, 0, self_term).map for m in iterates[:-1]]
                mean, cov = _trajectory_moments(maps, mu0.marginals[0], K)
                R = _solve_cv(Yr, Wr, _CVDesign(K, t, N, mean, cov))
            else:
                R = Yr
            coord_sets = [("pooled", R, iterates[-1].marginals[0])]
        else:
            xs = []
            for r0 in range(0, P, chunk):
                n = min(chunk, P - r0)
                x = _draw(samplers, philox_uniforms(seed, (STREAM_INITIAL << 32) | N, r0, n, N))
                for _ in range(t):
                    x = eval_map(system, x)
                xs.append(x[:, list(tracked)])
            xs = np.concatenate(xs)
            coord_sets = []
            for c, i in enumerate(tracked):
                Z = np.exp(-2j * np.pi * np.outer(xs[:, c], np.arange(1, K + 1)))
                coord_sets.append((int(i), np.concatenate([Z.real, Z.imag], axis=1), iterates[-1].marginals[i]))
        gen = _bootstrap_generator(seed, (STREAM_BOOTSTRAP << 32) | N)
        for label, R, ref in coord_sets:
            ref_coef = density_coefficients(ref, K)
            mean_c = _to_complex(R.mean(axis=0), K)
            boot_c = _to_complex(_bootstrap_means(R, bootstrap, gen), K)
            delta_hat = mean_c - ref_coef
            delta_boot = boot_c - ref_coef
            d, sd, floor = _distance_stats(delta_hat, delta_boot, ref_coef, metric, b)
            rows.append({"N": N, "t": t, "coord": label, "metric": metric, "distance": d,
                         "err_lo": d - sd, "err_hi": d + sd, "P": P, "seed": seed})
            per_N.append({"N": N, "coord": label, "estimator": est, "distance": d, "stderr": sd,
                          "noise_floor": floor, "resolved": bool(d - floor > 2 * sd)})
    slope, slope_se, decreasing, resolved = _summarize(per_N)
    if not resolved:
        notes.append("slope fitted on unresolved (noise-dominated) distances")
    if est == "pooled" or est == "tracked":
        notes.append("no control variates: distances include Monte Carlo noise of order P^-1/2")
    return ChaosResult(rows, slope, slope_se, decreasing, per_N, sorted(set(notes)))


def _is_uncoupled(system):
    terms = getattr(system.coupling, "terms", None)
    return terms is not None and all(t[0] == 0.0 for t in terms)


def _summarize(per_N):
    """Worst slope over coordinates, its stderr, the decrease flag and whether resolved points were used.

    Only points resolved above the noise floor enter the fit; when fewer
    than two are resolved every positive distance is used instead.
    """
    labels = sorted({str(r["coord"]) for r in per_N})
    slopes, ses, decreasing, resolved = [], [], True, True
    for lab in labels:
        rs = [r for r in per_N if str(r["coord"]) == lab]
        for r0, r1 in zip(rs[:-1], rs[1:]):
            if not r0["distance"] - r1["distance"] > 2 * np.hypot(r0["stderr"], r1["stderr"]):
                decreasing = False
        use = [r for r in rs if r["resolved"] and r["distance"] > 0]
        if len(use) < 2:
            resolved = False
            use = [r for r in rs if r["distance"] > 0]
        if len(use) >= 2:
            s, se = _fit_slope([r["N"] for r in use], [r["distance"] for r in use], [r["stderr"] for r in use])
            slopes.append(s)
            ses.append(se)
    if not slopes:
        return float("nan"), float("nan"), decreasing, resolved
    return float(np.max(slopes)), float(ses[int(np.argmax(slopes))]), decreasing, resolved


def joint_vs_product(ens: ParticleEnsemble, reference: ProductMeasure, k=2, bins=16, bootstrap=200, seed=0):
    """TV between the histogram of the first ``k`` coordinates and the binned product of reference marginals.

    Returns ``(tv, stderr, noise_floor)``.  The noise floor is the expected TV
    of a multinomial histogram drawn from the reference itself,
    ``(1/2) sum_j sqrt(2 p_j / (pi P))`` to leading order.
    """
    if k > 3:
        raise ValueError("k must be at most 3")
    if bins > 32:
        raise ValueError("at most 32 bins per axis")
    if k > ens.N:
        raise ValueError("k exceeds the number of coordinates")
    X = ens.particles[:, :k]
    cells = []
    for j in range(k):
        rho = reference.marginals[j]
        fine = rho.resample(max(rho.M, 64 * bins)).values if rho.M < 64 * bins else rho.values
        cells.append(fine.reshape(bins, -1).mean(axis=1) / bins)
    prod = cells[0]
    for c in cells[1:]:
        prod = np.multiply.outer(prod, c)
    prod = prod / prod.sum()
    idx = np.minimum((X * bins).astype(int), bins - 1)
    flat = np.ravel_multi_index(idx.T, (bins,) * k)
    P = X.shape[0]
    counts = np.bincount(flat, minlength=bins ** k)
    pflat = prod.reshape(-1)
    tv = 0.5 * float(np.abs(counts / P - pflat).sum())
    gen = _bootstrap_generator(seed, STREAM_BOOTSTRAP)
    boots = []
    for _ in range(bootstrap):
        c = np.bincount(flat[gen.integers(0, P, size=P)], minlength=bins ** k)
        boots.append(0.5 * np.abs(c / P - pflat).sum())
    floor = 0.5 * float(np.sum(np.sqrt(2.0 * pflat / (np.pi * P))))
    return tv, float(np.std(boots, ddof=1)), floor
