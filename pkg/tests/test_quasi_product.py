import numpy as np
import pytest

from coupledmaps.cone import ConeBoundaryError, hilbert_theta
from coupledmaps.density import GridDensity
from coupledmaps.ensemble import sample_product, step_ensemble
from coupledmaps.quasi_product import (
    JointDensity,
    ab_quantities,
    bk_lower_bound,
    brute_force_pushforward,
    concentration_experiment,
    conditional_density,
    good_set_experiment,
    lipschitz_report,
    martingale_difference_bound,
    martingale_identity_gap,
    martingale_levels,
    oscillation,
    perturbed_density,
)
from coupledmaps.sto import ProductMeasure
from coupledmaps.system import diffusive_system, uncoupled_system
from coupledmaps.transfer import ExpandingMap1D, pushforward

TWO_PI = 2 * np.pi


def _bump(M, k, phase=0.0):
    return GridDensity.from_function(lambda x: np.exp(k * np.cos(TWO_PI * (x - phase))), M)


def _cos_joint(delta, M):
    return JointDensity.from_function(lambda x, y: 1 + delta * np.cos(TWO_PI * (x + y)), 2, M)


def test_joint_density_validation():
    with pytest.raises(ValueError):
        JointDensity(np.ones((8, 6)))
    with pytest.raises(ValueError):
        JointDensity(2 * np.ones((8, 8)))
    with pytest.raises(ValueError):
        JointDensity(np.zeros((8, 8)))


def test_conditional_of_product_and_uniform():
    r1, r2 = _bump(32, 0.7), _bump(32, 0.3, 0.2)
    rho = JointDensity.product([r1, r2])
    for y in (0.0, 0.25, 0.5):
        psi, exact = conditional_density(rho, 0, [y])
        assert exact and np.allclose(psi.values, r1.normalized().values, atol=1e-12)
    psi, _ = conditional_density(JointDensity.uniform(2, 16), 1, [0.5])
    assert np.allclose(psi.values, 1.0)


def test_conditional_cosine_example():
    M = 64
    psi, exact = conditional_density(_cos_joint(0.2, M), 0, [0.25])
    x = np.arange(M) / M
    dense = np.linspace(0, 1, 200_001)
    norm = np.trapezoid(1 + 0.2 * np.cos(TWO_PI * dense + np.pi / 2), dense)
    assert exact and abs(psi.integral - 1) < 1e-10
    assert np.max(np.abs(psi.values - (1 + 0.2 * np.cos(TWO_PI * x + np.pi / 2)) / norm)) < 1e-10


def test_conditional_snapping_flag():
    rho = _cos_joint(0.2, 16)
    _, exact = conditional_density(rho, 0, [0.3])
    assert not exact
    psi, exact = conditional_density(rho, 0, [0.3], interpolate=True)
    x = np.arange(16) / 16
    ref = 1 + 0.2 * np.cos(TWO_PI * (x + 0.3))
    assert not exact and np.allclose(psi.values, ref / ref.mean(), atol=1e-4)


def test_ab_product_and_uniform():
    rho = JointDensity.product([_bump(32, 0.5), _bump(32, 0.4, 0.3), _bump(32, 0.2)])
    A, B, gap = ab_quantities(rho, 0, 2, 4.0)
    assert abs(gap) < 1e-10
    A, B, gap = ab_quantities(JointDensity.uniform(2, 16), 0, 1, 2.0)
    assert np.allclose(A, 0) and np.allclose(B, 0)


def test_ab_matches_dense_brute_force():
    M, d, b = 64, 0.1, 4.0
    _, _, gap = ab_quantities(_cos_joint(d, M), 0, 1, b)
    x, y = np.meshgrid(np.arange(M) / M, np.arange(M) / M, indexing="ij")
    s = TWO_PI * (x + y)
    eta, di = 1 + d * np.cos(s), -TWO_PI * d * np.sin(s)
    dk, dki = di, -TWO_PI ** 2 * d * np.cos(s)
    r = [dk / eta, (b * dk - dki) / (b * eta - di), (b * dk + dki) / (b * eta + di)]
    A = np.max(np.maximum.reduce(r), axis=0)
    B = np.min(np.minimum.reduce(r), axis=0)
    assert gap > 0 and abs(gap - np.max(A - B)) < 1e-8


def test_ab_rejects_cone_boundary():
    with pytest.raises(ConeBoundaryError):
        ab_quantities(_cos_joint(0.5, 32), 0, 1, 2.0)
    with pytest.raises(ValueError):
        ab_quantities(_cos_joint(0.1, 32), 0, 0, 4.0)


def test_ab_differential_consistency():
    d, b, M, y, h = 0.1, 4.0, 64, 0.125, 1e-4
    A, B, _ = ab_quantities(_cos_joint(d, M), 0, 1, b)
    f = lambda yy: GridDensity.from_function(lambda x: 1 + d * np.cos(TWO_PI * (x + yy)), M)
    rate = hilbert_theta(f(y), f(y + h), b) / h
    ref = A[int(y * M)] - B[int(y * M)]
    assert abs(rate / ref - 1) < 0.05


def test_lipschitz_report_product_and_uniform():
    rho = JointDensity.product([_bump(32, 0.1), _bump(32, 0.05, 0.4)])
    rep = lipschitz_report(rho, 2.0, 4.0, L=0.0, alpha=10.0)
    assert np.all(rep.L_matrix >= 0) and rep.max_L == 0.0
    assert rep.membership == {"V_a": True, "M_abL": True, "C2_alpha": True}
    assert rep.recompute() == rep.membership
    rep = lipschitz_report(JointDensity.uniform(3, 8), 1.0, 2.0)
    assert rep.a_fit == 0 and rep.alpha_fit == 0 and rep.max_L == 0
    with pytest.raises(ValueError):
        lipschitz_report(JointDensity.uniform(2, 8), 2.0, 1.0)


def test_brute_force_uncoupled_is_tensor_product():
    M = 32
    r1, r2 = _bump(M, 0.6), _bump(M, 0.3, 0.1)
    out, mass = brute_force_pushforward(uncoupled_system(2), JointDensity.product([r1, r2]))
    doubling = ExpandingMap1D(uncoupled_system(1).site_maps[0])
    ref = np.multiply.outer(pushforward(doubling, r1.normalized()).values, pushforward(doubling, r2.normalized()).values)
    assert abs(mass - 1) < 1e-10 and np.max(np.abs(out.values - ref)) < 1e-8


def test_brute_force_mass_conserved():
    rho = perturbed_density(3, 16, 0.05)
    _, mass = brute_force_pushforward(diffusive_system(3, 0.05), rho)
    assert abs(mass - 1) < 1e-6


def test_brute_force_size_limits():
    with pytest.raises(ValueError):
        brute_force_pushforward(diffusive_system(2, 0.05), JointDensity.uniform(2, 128))


def test_brute_force_marginal_matches_monte_carlo():
    M, P = 64, 1_000_000
    r = _bump(M, 0.5)
    system = diffusive_system(2, 0.05)
    out, _ = brute_force_pushforward(system, JointDensity.product([r, r]))
    marg = out.marginal([0])
    grid = np.arange(M) / M
    ens = step_ensemble(system, sample_product(ProductMeasure((r.normalized(),) * 2), P, 7))
    x = ens.particles[:, 0]
    for k in (1, 2, 3):
        exact = np.mean(marg * np.exp(-2j * np.pi * k * grid))
        z = np.exp(-2j * np.pi * k * x)
        se = max(z.real.std(), z.imag.std()) / np.sqrt(P)
        assert abs(z.mean() - exact) < 3 * np.sqrt(2) * se + 1e-6


def test_martingale_levels_examples():
    M, N = 16, 4
    rho = JointDensity.uniform(N, M)
    g = lambda *xs: sum(xs) / N
    g0 = martingale_levels(rho, g, 0)
    assert np.ndim(g0) == 0 and np.isclose(g0, (M - 1) / (2 * M))
    gN = martingale_levels(rho, g, N)
    axes = np.meshgrid(*([rho.grid] * N), indexing="ij")
    assert np.allclose(gN, g(*axes))
    g2 = martingale_levels(rho, g, 2)
    x1, x2 = np.meshgrid(rho.grid, rho.grid, indexing="ij")
    # grid mean of x is (M-1)/(2M), the continuum value is 1/2
    assert np.allclose(g2, (x1 + x2) / 4 + (M - 1) / (4 * M))
    assert np.max(np.abs(g2 - ((x1 + x2) / 4 + 0.25))) <= 1 / (4 * M) + 1e-15
    with pytest.raises(ValueError):
        martingale_levels(rho, g, N + 1)


def test_martingale_identity():
    rho = perturbed_density(3, 8, 0.1)
    g = lambda x, y, z: np.sin(TWO_PI * x) * y + z ** 2
    assert martingale_identity_gap(rho, g) < 1e-12


def test_martingale_difference_examples():
    M, N = 16, 4
    rho = JointDensity.product([_bump(M, 0.3)] * N)
    scale = M / (M - 1)
    out = martingale_difference_bound(rho, lambda *xs: scale * sum(xs) / N)
    assert out["max_difference"] <= 1 / N + 1e-12 and out["margin"] > 0
    out = martingale_difference_bound(rho, lambda *xs: 0 * xs[0] + 0.3)
    assert out["max_difference"] < 1e-15
    with pytest.raises(ValueError):
        martingale_difference_bound(rho, lambda *xs: sum(xs))


def test_oscillation_examples():
    M, N = 16, 3
    rho = JointDensity.uniform(N, M)
    assert np.isclose(oscillation(lambda *xs: sum(xs) / N, 1, rho), (M - 1) / (M * N))
    assert oscillation(lambda *xs: 0 * xs[0] + 2.0, 0, rho) == 0.0
    rho2 = JointDensity.uniform(2, M)
    # x2 * (M-1)/M along x1, and the grid sup of x2 is (M-1)/M as well
    assert np.isclose(oscillation(lambda x, y: x * y, 0, rho2), ((M - 1) / M) ** 2)


def test_bk_lower_bound_examples():
    assert bk_lower_bound(JointDensity.product([_bump(8, 0.3)] * 3), 1, test_family_size=16, pairs=16) < 1e-14
    assert bk_lower_bound(JointDensity.uniform(3, 8), 2, test_family_size=16, pairs=16) < 1e-14
    lo = bk_lower_bound(perturbed_density(3, 8, 0.05), 1, test_family_size=16, pairs=32)
    hi = bk_lower_bound(perturbed_density(3, 8, 0.1), 1, test_family_size=16, pairs=32)
    assert lo > 0 and 1.6 < hi / lo < 2.4


def _mean_obs(N):
    return lambda X: (X - 0.5).mean(axis=1)


def test_concentration_trivial_cases():
    N = 100
    mu = ProductMeasure((GridDensity.uniform(64),) * N)
    rows = concentration_experiment(mu, _mean_obs(N), N, [0.0, 1.1], 20_000, seed=3)
    assert rows[0]["tail"] == 1.0 and np.isclose(rows[0]["bound"], 2.0) and rows[0]["below"]
    assert rows[1]["tail"] == 0.0


def test_concentration_clt_reference():
    N, P = 100, 400_000
    mu = ProductMeasure((GridDensity.uniform(64),) * N)
    row = concentration_experiment(mu, _mean_obs(N), N, [0.1], P, seed=5)[0]
    # CLT value for a continuous uniform is 5.4e-4
    assert row["wilson_lo"] < 1e-3 and row["tail"] > 1e-4
    assert row["below"] and np.isclose(row["bound"], 2 * np.exp(-1 / 1.1))


def test_concentration_rejects_large_oscillation():
    mu = ProductMeasure((GridDensity.uniform(16),) * 4)
    with pytest.raises(ValueError):
        concentration_experiment(mu, lambda X: X.sum(axis=1), 4, [0.1], 100, seed=0)


def test_good_set_uncoupled_and_large_eps():
    mu = ProductMeasure((_bump(64, 0.4).normalized(),) * 8)
    rows = good_set_experiment(uncoupled_system(8), mu, [1e-6, 0.1], 40, seed=1, M=64)
    assert all(r["bad_fraction"] == 0.0 and r["max_gap"] < 1e-12 for r in rows)
    E = 0.05 * TWO_PI
    rows = good_set_experiment(diffusive_system(8, 0.05), mu, [2 * E * (1 + TWO_PI + TWO_PI ** 2)], 200, seed=1)
    assert rows[0]["bad_fraction"] == 0.0 and rows[0]["max_gap"] > 0


def test_save_load_round_trip(tmp_path):
    rho = perturbed_density(3, 8, 0.1)
    rho.save(tmp_path / "rho.bin")
    back = JointDensity.load(tmp_path / "rho.bin")
    assert np.array_equal(back.values, rho.values)
    assert (tmp_path / "rho.bin.json").exists()
