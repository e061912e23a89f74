"""Positive densities on the circle sampled on a uniform periodic grid."""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = ["GridDensity", "spectral_derivative", "fourier_interpolate", "resample_periodic", "is_power_of_two"]


def is_power_of_two(M):
    return M >= 1 and (M & (M - 1)) == 0


def spectral_derivative(values, order=1, axis=-1):
    """Derivative of a periodic sample sequence on [0, 1) via the real FFT.

    The Nyquist coefficient is dropped for odd orders so that real input
    produces real, antisymmetric-consistent output.
    """
    values = np.asarray(values, dtype=float)
    M = values.shape[axis]
    if order == 0:
        return values.copy()
    coef = np.fft.rfft(values, axis=axis)
    k = np.arange(coef.shape[axis])
    mult = (2j * np.pi * k) ** order
    if order % 2 == 1 and M % 2 == 0:
        mult[-1] = 0.0
    shape = [1] * values.ndim
    shape[axis] = -1
    return np.fft.irfft(coef * mult.reshape(shape), n=M, axis=axis)


def fourier_interpolate(values, x, order=0):
    """Trigonometric interpolant of periodic samples (or its derivative) at points ``x``."""
    values = np.asarray(values, dtype=float)
    M = values.size
    coef = np.fft.rfft(values) / M
    k = np.arange(coef.size)
    weight = np.full(coef.size, 2.0)
    weight[0] = 1.0
    if M % 2 == 0:
        weight[-1] = 1.0
        if order % 2 == 1:
            weight[-1] = 0.0
    c = weight * coef * (2j * np.pi * k) ** order
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    out = np.empty(flat.size)
    chunk = max(1, (1 << 21) // k.size)
    for s in range(0, flat.size, chunk):
        phase = np.exp(2j * np.pi * np.outer(flat[s:s + chunk], k))
        out[s:s + chunk] = (phase @ c).real
    return out.reshape(x.shape)


def resample_periodic(values, M):
    """Trigonometric interpolant of periodic samples evaluated on a new uniform grid."""
    values = np.asarray(values, dtype=float)
    M0 = values.size
    if M == M0:
        return values.copy()
    coef = np.fft.rfft(values)
    if M > M0:
        out = np.zeros(M // 2 + 1, dtype=complex)
        out[:coef.size] = coef
        if M0 % 2 == 0:
            out[M0 // 2] *= 0.5
    else:
        out = coef[:M // 2 + 1].copy()
        if M % 2 == 0:
            out[-1] = out[-1].real
    return np.fft.irfft(out, n=M) * (M / M0)


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Density sampled at ``k / M`` for ``k = 0..M-1`` with ``M`` a power of two.

    Derivatives come from spectral differentiation of the samples.  The
    integral is the periodic trapezoid rule, i.e. the sample mean.  Samples
    must be strictly positive unless ``allow_zero`` is set, which admits
    nonnegative inputs such as ``1 + cos(2 pi x)`` for pushforward checks.
    """

    values: np.ndarray
    allow_zero: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if not is_power_of_two(v.size) or v.size < 4:
            raise ValueError(f"grid size must be a power of two >= 4, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite")
        if np.any(v < 0) or (not self.allow_zero and np.any(v == 0)):
            raise ValueError("density must be strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def M(self):
        return self.values.size

    @property
    def grid(self):
        return np.arange(self.M) / self.M

    @cached_property
    def d1(self):
        return spectral_derivative(self.values, 1)

    @cached_property
    def d2(self):
        return spectral_derivative(self.values, 2)

    @property
    def integral(self):
        return float(self.values.mean())

    @property
    def is_probability(self):
        return abs(self.integral - 1.0) < 1e-12

    def normalized(self):
        return GridDensity(self.values / self.integral, self.allow_zero)

    def scaled(self, c):
        return GridDensity(self.values * c)

    def evaluate(self, x, order=0):
        """Fourier interpolant (or its ``order``-th derivative) at arbitrary angles."""
        return fourier_interpolate(self.values, x, order)

    def shifted(self, d):
        """Samples of the interpolant at ``k/M + d`` (a phase shift in Fourier space)."""
        coef = np.fft.rfft(self.values)
        k = np.arange(coef.size)
        return np.fft.irfft(coef * np.exp(2j * np.pi * k * d), n=self.M)

    def resample(self, M):
        """Band-limited resampling onto a grid of size ``M`` (FFT zero padding or truncation)."""
        return GridDensity(resample_periodic(self.values, M))

    @classmethod
    def from_function(cls, func, M, normalize=True, allow_zero=False):
        d = cls(func(np.arange(M) / M), allow_zero=allow_zero)
        return d.normalized() if normalize else d

    @classmethod
    def uniform(cls, M):
        return cls(np.ones(M))

    def to_csv(self, path):
        """Write ``grid_point,value`` rows plus a JSON header next to the CSV."""
        path = Path(path)
        rows = "\n".join(f"{x!r},{v!r}" for x, v in zip(self.grid.tolist(), self.values.tolist()))
        path.write_text("grid_point,value\n" + rows + "\n")
        header = {"M": self.M, "normalization": self.integral}
        path.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        header_path = path.with_suffix(".json")
        if header_path.exists():
            header = json.loads(header_path.read_text())
            if header["M"] != data.shape[0]:
                raise ValueError("CSV row count disagrees with header M")
        return cls(data[:, 1])

    def __repr__(self):
        return f"GridDensity(M={self.M}, integral={self.integral:.6g})"
