import numpy as np
import pytest

from coupledmaps.foliation import (
    decomposition_gap,
    fiber_gap_scaling,
    fiber_map_G,
    invariance_certificate,
    jacobian_inverse_bounds,
    leaf_closure_gap,
    phi_derivative_table,
    phi_inverse,
    phi_jacobian,
    straighten,
    straighten_batch,
    trace_leaf,
)
from coupledmaps.system import ExpandingSiteMap, diffusive_system, eval_lift, jacobian, uncoupled_system

TRIPLING = ExpandingSiteMap(3)


def _tripling(N, eps=0.1):
    return diffusive_system(N, eps, TRIPLING)


def _circle_gap(a, b):
    d = np.mod(a - b, 1.0)
    return np.minimum(d, 1.0 - d)


def test_uncoupled_straightening_is_identity(rng):
    p = straighten(uncoupled_system(4), 1, 0.3, rng.random(3))
    assert p.residual == 0.0
    assert np.allclose(p.image_lift[[0, 2, 3]], p.base[1])
    assert p.image_lift[1] == 0.3


def test_base_point_is_fixed(rng):
    yhat = rng.random(7)
    p = straighten(_tripling(8), 0, 0.0, yhat)
    assert np.allclose(p.image_lift[1:], yhat, atol=1e-14) and p.residual < 1e-13


def test_constraint_reproduced(rng):
    system = _tripling(8)
    y, yhat = rng.random(50), rng.random((50, 7))
    X, res, _ = straighten_batch(system, 0, y, yhat)
    base = np.column_stack([np.zeros(50), yhat])
    assert np.max(np.abs(eval_lift(system, X)[:, 1:] - eval_lift(system, base)[:, 1:])) < 1e-12
    assert res.max() < 1e-12


def test_newton_matches_unprojected_trace(rng):
    system = _tripling(3)
    y, yhat = rng.random(10), rng.random((10, 2))
    X, _, _ = straighten_batch(system, 0, y, yhat)
    Xt, _ = trace_leaf(system, 0, y, yhat, project=False)
    assert np.max(np.abs(X - Xt)) < 1e-8


def test_trace_method_agrees(rng):
    system = _tripling(8)
    y, yhat = rng.random(5), rng.random((5, 7))
    a, _, _ = straighten_batch(system, 2, y, yhat)
    b, _, used = straighten_batch(system, 2, y, yhat, method="trace")
    assert np.all(used == "trace") and np.max(np.abs(a - b)) < 1e-12


def test_tolerance_floor():
    with pytest.raises(ValueError):
        straighten_batch(_tripling(4), 0, [0.1], [[0.1, 0.2, 0.3]], tol=1e-15)


def test_phi_jacobian_matches_differences(rng):
    system = _tripling(6)
    y, yhat = rng.random(4), rng.random((4, 5))
    D = phi_jacobian(system, 0, y, yhat)
    h = 1e-6
    for k in range(6):
        e = np.zeros(6)
        e[k] = h
        base = np.column_stack([y, yhat])
        Xp, _, _ = straighten_batch(system, 0, (base + e)[:, 0], (base + e)[:, 1:])
        Xm, _, _ = straighten_batch(system, 0, (base - e)[:, 0], (base - e)[:, 1:])
        assert np.max(np.abs((Xp - Xm) / (2 * h) - D[:, :, k])) < 1e-6


def test_leaf_closure(rng):
    for N in (8, 16):
        assert leaf_closure_gap(_tripling(N), 0, rng.random((3, N - 1))) < 1e-6


def test_decomposition_consistency(rng):
    system = _tripling(8)
    assert decomposition_gap(system, 0, rng.random((20, 8))) < 1e-8


def test_phi_inverse_round_trip(rng):
    system = _tripling(5)
    y, yhat = rng.random(6), rng.random((6, 4))
    X, _, _ = straighten_batch(system, 0, y, yhat)
    Y = phi_inverse(system, 0, X)
    assert np.allclose(Y[:, 0], y) and np.max(_circle_gap(Y[:, 1:], yhat)) < 1e-10


def test_jacobian_inverse_uncoupled():
    rep = jacobian_inverse_bounds(uncoupled_system(4), sample_count=50)
    # the strict off-diagonal bound degenerates to 0 < 0 when E = 0
    assert rep.max_offdiag == 0.0 and rep.offdiag_bound == 0.0 and not rep.all_hold
    assert np.isclose(rep.max_diag, 0.5) and rep.diag_upper_margin >= 0 and rep.diag_lower_margin >= 0


def test_two_site_inverse_adjugate(rng):
    system = diffusive_system(2, 0.05)
    x = rng.random(2)
    J = jacobian(system, x)
    adj = np.array([[J[1, 1], -J[0, 1]], [-J[1, 0], J[0, 0]]]) / (J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])
    assert np.allclose(np.linalg.inv(J), adj, atol=1e-12, rtol=0)


def test_jacobian_inverse_offdiag_scaling():
    Ns = (4, 16, 64, 256)
    vals = []
    for N in Ns:
        rep = jacobian_inverse_bounds(diffusive_system(N, 0.05), sample_count=100, seed=N)
        assert rep.all_hold
        vals.append(rep.max_offdiag)
    slope = np.polyfit(np.log(Ns), np.log(vals), 1)[0]
    assert abs(slope + 1) < 0.1


def test_derivative_table_cases():
    rows, detail = phi_derivative_table(_tripling, N_list=(8, 16, 32, 64), sample_count=8)
    by = {}
    for r in rows:
        by.setdefault(r["case_label"], []).append(r)
    assert all(r["max_abs_estimate"] < 1e-9 for r in by["m=i,k!=i"])
    assert all(abs(r["max_abs_estimate"] - 1) < 1e-9 for r in by["m=k=i"])
    assert -1.3 <= by["k=i,m!=k"][0]["fitted_slope"] <= -0.7
    assert -2.4 <= by["k!=i,m!=k"][0]["fitted_slope"] <= -1.6
    for N, d in detail.items():
        assert np.max(np.abs(d["fd"] - d["exact"])) < 1e-7


def test_fiber_map_uncoupled_and_coupled(rng):
    fm = fiber_map_G(uncoupled_system(4, TRIPLING), 0, rng.random(3), M=64)
    assert fm.c2_gap < 1e-10
    assert 0 < fiber_map_G(_tripling(8), 0, rng.random(7), M=64).c2_gap < np.inf


def test_fiber_gap_slope():
    _, slope = fiber_gap_scaling(_tripling, N_list=(8, 16, 32, 64), sample_count=4)
    assert -1.3 <= slope <= -0.7


def test_certificate_uncoupled_doubling():
    cert = invariance_certificate(uncoupled_system(3), 1.0, 4.0, 1.0, sample_count=8)
    # identity chart: raw K = K_hat = L = 1, inflated by 20%
    assert np.isclose(cert.K, 1.2) and np.isclose(cert.K_hat, 1.2) and np.isclose(cert.L, 1.2)
    assert cert.a_phi < 1e-6 and cert.distortion == 0.0
    assert cert.checks["cone_parameter_a0"] and cert.checks["outer_parameter_b0"]
    assert np.isclose(cert.contraction_rate, 1.2 * cert.Lambda)
    assert cert.checks["lipschitz_contraction"] == (cert.contraction_rate < 1)
    assert cert.recompute() == cert.checks
    assert cert.label == "numerical evidence"


def test_certificate_uncoupled_tripling_passes():
    cert = invariance_certificate(uncoupled_system(3, TRIPLING), 1.0, 4.0, 1.0, sample_count=8)
    assert cert.passed and cert.contraction_rate < 1


def test_certificate_fails_for_small_a0():
    cert = invariance_certificate(diffusive_system(3, 0.005, TRIPLING), 0.01, 2.0, 1.0, sample_count=8)
    assert not cert.checks["cone_parameter_a0"]
