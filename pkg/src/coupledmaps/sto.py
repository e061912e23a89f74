"""Mean-field maps and the self-consistent transfer operator on product states.

For a product measure ``mu`` the mean-field map replaces the coupling felt by
coordinate ``i`` by its average against the other marginals,

    F_mu,i(x) = f_i(x) + (1/N) sum_{j != i} w_ij int h(x, y) drho_j(y) + (1/N) w_ii h(x, x),

and the operator maps ``mu`` to the product of the pushforwards
``(F_mu,i)_* mu_i``.  The self term ``j = i`` is evaluated on the diagonal by
default since the coupled map itself sees ``h(x_i, x_i)``; pass
``self_term="integrated"`` to average it against ``mu_i`` like the others.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cone import hilbert_theta, log_lipschitz
from .density import GridDensity
from .system import CoupledMapSystem, _diag_derivative
from .transfer import ExpandingMap1D, pushforward

__all__ = [
    "ProductMeasure",
    "MeanFieldMap",
    "STODivergenceError",
    "mean_field_map",
    "sto_step",
    "sto_iterate",
    "sto_fixed_point",
    "marginal_distance",
    "tv_distance",
]

SELF_TERMS = ("frozen", "integrated")


class STODivergenceError(RuntimeError):
    """Successive iterates of the operator move apart persistently."""


@dataclass(frozen=True, eq=False)
class ProductMeasure:
    """Product of N probability densities on a common grid."""

    marginals: tuple

    def __post_init__(self):
        margs = tuple(self.marginals)
        if not margs:
            raise ValueError("a product measure needs at least one marginal")
        M = margs[0].M
        for k, m in enumerate(margs):
            if m.M != M:
                raise ValueError(f"marginal {k} has resolution {m.M}, expected {M}")
            if abs(m.integral - 1.0) > 1e-10:
                raise ValueError(f"marginal {k} is not a probability density (integral {m.integral!r})")
        object.__setattr__(self, "marginals", margs)

    @property
    def N(self):
        return len(self.marginals)

    @property
    def M(self):
        return self.marginals[0].M

    @property
    def identical(self):
        """True when all marginals are the same object (cheap symmetry flag)."""
        first = self.marginals[0]
        return all(m is first for m in self.marginals)

    @classmethod
    def uniform(cls, N, M):
        u = GridDensity.uniform(M)
        return cls((u,) * N)

    @classmethod
    def identical_product(cls, N, psi):
        return cls((psi.normalized(),) * N)

    def save(self, directory):
        """One CSV per marginal plus ``manifest.json``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        files = []
        for k, m in enumerate(self.marginals):
            name = f"marginal_{k:05d}.csv"
            m.to_csv(directory / name)
            files.append(name)
        manifest = {"N": self.N, "M": self.M, "files": files}
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        return cls(tuple(GridDensity.from_csv(directory / f) for f in manifest["files"]))


@dataclass(frozen=True)
class MeanFieldMap:
    """Mean-field map of coordinate ``index`` as a 1D expanding map."""

    index: int
    map: ExpandingMap1D


def _field_weights(system, mu, i, self_term):
    """Density ``sum_j c_j rho_j / N`` that the coupling is averaged against, and the diagonal weight."""
    N = system.N
    w = np.ones(N) if system.weights is None else system.weights[i]
    wii = float(w[i])
    if mu.identical:
        rho = mu.marginals[0].values
        total = (w.sum() - (wii if self_term == "frozen" else 0.0)) * rho
    else:
        stack = np.stack([m.values for m in mu.marginals])
        c = np.array(w, dtype=float)
        if self_term == "frozen":
            c = c.copy()
            c[i] = 0.0
        total = c @ stack
    return total / N, (wii / N if self_term == "frozen" else 0.0)


def mean_field_map(system: CoupledMapSystem, mu: ProductMeasure, i, self_term="frozen"):
    """Mean-field map ``F_mu,i`` with derivatives taken under the integral.

    The coupling average uses the periodic trapezoid rule at the marginals'
    resolution.
    """
    if self_term not in SELF_TERMS:
        raise ValueError(f"self_term must be one of {SELF_TERMS}")
    if mu.N != system.N:
        raise ValueError(f"measure has {mu.N} marginals, system has N={system.N}")
    site = system.site_maps[i]
    h = system.coupling
    field, diag_w = _field_weights(system, mu, i, self_term)
    has_field = bool(np.any(field != 0))

    def lift(x, n=0):
        x = np.asarray(x, dtype=float)
        out = site(x, n)
        if has_field:
            out = out + h.mean_against(x, field, n)
        if diag_w:
            out = out + diag_w * _diag_derivative(h, x, n)
        return out

    return MeanFieldMap(index=i, map=ExpandingMap1D(lift))


def sto_step(system: CoupledMapSystem, mu: ProductMeasure, self_term="frozen"):
    """One application of the self-consistent transfer operator."""
    if mu.N != system.N:
        raise ValueError(f"measure has {mu.N} marginals, system has N={system.N}")
    if system.exchangeable and mu.identical:
        mf = mean_field_map(system, mu, 0, self_term)
        out = pushforward(mf.map, mu.marginals[0]).normalized()
        return ProductMeasure((out,) * system.N)
    new = []
    for i in range(system.N):
        mf = mean_field_map(system, mu, i, self_term)
        new.append(pushforward(mf.map, mu.marginals[i]).normalized())
    return ProductMeasure(tuple(new))


def sto_iterate(system, mu, t, self_term="frozen"):
    """List ``[mu, F mu, ..., F^t mu]``."""
    out = [mu]
    for _ in range(t):
        out.append(sto_step(system, out[-1], self_term))
    return out


def _max_slope(mu):
    return max(log_lipschitz(m) for m in mu.marginals)


def sto_fixed_point(system, mu0, tol=1e-9, max_iter=200, b0=None, self_term="frozen"):
    """Iterate the operator until successive marginals are within ``tol`` in ``theta_b0``.

    Returns ``(fixed_point, lambda_estimate, distances)``.  ``lambda_estimate``
    is the geometric mean of the last five ratios between successive
    positive distances; distances below the ``theta`` clamp are skipped, and
    the estimate is 0 when the iteration lands on the fixed point before any
    ratio is available.  When ``b0`` is not
    given it is set once, after the first step, to ``1 + 3 * max log-slope``
    of the first two iterates.
    """
    mu = mu0
    distances = []
    b = b0
    for it in range(max_iter):
        nxt = sto_step(system, mu, self_term)
        if b is None:
            b = 1.0 + 3.0 * max(_max_slope(mu), _max_slope(nxt))
        d = max(hilbert_theta(p, q, b) for p, q in _pairs(mu, nxt))
        distances.append(d)
        mu = nxt
        if d < tol:
            return mu, _lambda(distances), distances
        ratios = _ratios(distances)
        if len(ratios) >= 5 and it >= 10 and all(r > 1.0 for r in ratios[-5:]):
            raise STODivergenceError(f"distances increasing for 5 iterations: {distances[-6:]}")
    raise RuntimeError(f"sto_fixed_point did not converge in {max_iter} iterations (last {distances[-1]:.3g})")


def _pairs(mu, nu):
    if mu.identical and nu.identical:
        return [(mu.marginals[0], nu.marginals[0])]
    return list(zip(mu.marginals, nu.marginals))


def _ratios(distances):
    return [b / a for a, b in zip(distances[:-1], distances[1:]) if a > 0]


def _lambda(distances):
    ratios = _ratios([d for d in distances if d > 0])[-5:]
    if not ratios:
        return 0.0 if distances[-1] == 0.0 else float("nan")
    return float(np.exp(np.mean(np.log(ratios))))


def tv_distance(p: GridDensity, q: GridDensity):
    """Total variation ``(1/2) int |p - q|`` by the periodic trapezoid rule."""
    if p.M != q.M:
        raise ValueError("resolution mismatch")
    return 0.5 * float(np.mean(np.abs(p.values - q.values)))


def marginal_distance(mu: ProductMeasure, nu: ProductMeasure, metric="TV", b=None):
    """Per-coordinate distances and their maximum, in TV or ``theta_b``."""
    if mu.N != nu.N or mu.M != nu.M:
        raise ValueError("measures differ in N or resolution")
    if metric == "TV":
        fn = tv_distance
    elif metric == "theta":
        if b is None:
            raise ValueError("theta metric needs the cone parameter b")
        fn = lambda p, q: hilbert_theta(p, q, b)  # noqa: E731
    else:
        raise ValueError(f"unknown metric {metric!r}")
    if mu.identical and nu.identical:
        per = np.full(mu.N, fn(mu.marginals[0], nu.marginals[0]))
    else:
        per = np.array([fn(p, q) for p, q in zip(mu.marginals, nu.marginals)])
    return per, float(per.max())
