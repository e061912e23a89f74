import numpy as np
import pytest

from coupledmaps.cone import (
    ConeBoundaryError,
    birkhoff_factor,
    cone_invariant_suite,
    cone_membership,
    hilbert_beta,
    hilbert_beta_alt,
    hilbert_theta,
    random_cone_density,
)
from coupledmaps.density import GridDensity, fourier_interpolate, spectral_derivative

M = 1024
SIN = lambda x: 1 + 0.1 * np.sin(2 * np.pi * x)  # noqa: E731
BETA_12 = 1 + 0.1 * np.sqrt(1 + np.pi ** 2)
BETA_21 = 2 / (2 - 0.2 * np.sqrt(1 + np.pi ** 2))


def test_spectral_derivative_exact_on_trig():
    x = np.arange(64) / 64
    f = np.sin(2 * np.pi * 3 * x)
    assert np.allclose(spectral_derivative(f, 1), 6 * np.pi * np.cos(6 * np.pi * x), atol=1e-10)
    assert np.allclose(spectral_derivative(f, 2), -(6 * np.pi) ** 2 * f, atol=1e-9)


def test_fourier_interpolation_off_grid(rng):
    x = np.arange(32) / 32
    y = rng.random(10)
    assert np.allclose(fourier_interpolate(np.cos(2 * np.pi * x), y), np.cos(2 * np.pi * y), atol=1e-13)


def test_density_roundtrip_csv(tmp_path):
    psi = GridDensity.from_function(SIN, 64)
    psi.to_csv(tmp_path / "psi.csv")
    assert np.array_equal(GridDensity.from_csv(tmp_path / "psi.csv").values, psi.values)


def test_density_rejects_bad_grid():
    with pytest.raises(ValueError):
        GridDensity(np.ones(100))
    with pytest.raises(ValueError):
        GridDensity(np.zeros(64))


def test_membership_examples():
    assert cone_membership(GridDensity.uniform(M), 0.1) == (True, 0.1)
    inside, margin = cone_membership(GridDensity.from_function(SIN, M), 2.0)
    assert inside and np.isclose(2.0 - margin, 0.2 * np.pi / np.sqrt(0.99), rtol=1e-4)
    assert not cone_membership(GridDensity.from_function(SIN, M), 0.5)[0]


def test_beta_closed_forms():
    one, s = GridDensity.uniform(M), GridDensity.from_function(SIN, M)
    assert hilbert_beta(one, one, 2.0) == 1.0
    assert np.isclose(hilbert_beta(one, s, 2.0), BETA_12, rtol=1e-6)
    assert np.isclose(hilbert_beta(s, one, 2.0), BETA_21, rtol=1e-6)


def test_beta_alt_closed_forms():
    one, s = GridDensity.uniform(M), GridDensity.from_function(SIN, M)
    assert hilbert_beta_alt(s, s, 2.0) == pytest.approx(1.0)
    assert np.isclose(hilbert_beta_alt(one, s, 2.0), BETA_12, rtol=1e-3)
    assert np.isclose(hilbert_beta_alt(s, one, 2.0), BETA_21, rtol=1e-3)


def test_beta_alt_grid_pairs_bound_ratio(rng):
    p, q = random_cone_density(rng, 64, 2.0), random_cone_density(rng, 64, 2.0)
    assert hilbert_beta_alt(p, q, 2.0, refine=()) >= np.max(q.values / p.values)


def test_theta_closed_form_and_projectivity():
    one, s = GridDensity.uniform(M), GridDensity.from_function(SIN, M)
    assert np.isclose(hilbert_theta(one, s, 2.0), np.log(BETA_12) + np.log(BETA_21), rtol=1e-5)
    assert hilbert_theta(s, s.scaled(3.0), 2.0) == 0.0


def test_theta_triangle(rng):
    for _ in range(50):
        p, q, r = (random_cone_density(rng, 256, 2.0) for _ in range(3))
        assert hilbert_theta(p, r, 2.0) <= hilbert_theta(p, q, 2.0) + hilbert_theta(q, r, 2.0) + 1e-9


def test_boundary_refused():
    s = GridDensity.from_function(SIN, M)
    with pytest.raises(ConeBoundaryError):
        hilbert_beta(s, GridDensity.uniform(M), 0.5)


def test_birkhoff_factor():
    assert birkhoff_factor(0.0) == 0.0
    assert np.isclose(birkhoff_factor(np.log(2)), 0.5)
    assert birkhoff_factor(np.inf) == 1.0


def test_invariant_suite_small():
    rows = cone_invariant_suite(pairs=12, M=256, seed=3)
    assert all(r["passed"] for r in rows), [r for r in rows if not r["passed"]]
