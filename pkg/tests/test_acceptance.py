"""Acceptance criteria, one test each.  Every test prints a single pass/fail line."""
import json
import time

import numpy as np

from coupledmaps.cli import parse_config, run
from coupledmaps.cone import (birkhoff_factor, cone_invariant_suite, cone_membership, empirical_diameter,
                              hilbert_theta, random_cone_density)
from coupledmaps.density import GridDensity
from coupledmaps.ensemble import chaos_experiment
from coupledmaps.foliation import (fiber_gap_scaling, frozen_slice, invariance_certificate, jacobian_inverse_bounds,
                                   phi_derivative_table, straighten_batch, trace_leaf)
from coupledmaps.quasi_product import (JointDensity, brute_force_pushforward, concentration_experiment,
                                       lipschitz_envelope, lipschitz_report, martingale_difference_bound,
                                       martingale_identity_gap, perturbed_density)
from coupledmaps.sto import ProductMeasure, sto_step, tv_distance
from coupledmaps.system import ExpandingSiteMap, diffusive_system, estimate_datum, uncoupled_system
from coupledmaps.transfer import (ExpandingMap1D, cell_averages, invariant_density, pushforward,
                                  ulam_invariant_density)

TWO_PI = 2 * np.pi
DOUBLING_SITE = ExpandingSiteMap(2)
TRIPLING_SITE = ExpandingSiteMap(3)
PERTURBED_SITE = ExpandingSiteMap(2, [(0.05, 1, 0.0)])


def _von_mises(M, c, phase=0.0):
    return GridDensity.from_function(lambda x: np.exp(c * np.cos(TWO_PI * (x - phase))), M).normalized()


def test_criterion_01_hilbert_metric(acceptance):
    t0 = time.perf_counter()
    rows = cone_invariant_suite(pairs=100, a=2.0, M=1024, seed=0, tol=1e-9, beta_rtol=1e-3)
    elapsed = time.perf_counter() - t0
    failed = [r["check"] for r in rows if not r["passed"]]
    worst = {r["check"]: r["worst"] for r in rows}
    ok = not failed and elapsed < 60
    acceptance(1, "Hilbert metric", ok,
               f"beta rel gap {worst['beta_vs_pair_sup_rel']:.2e} (tol 1e-3), symmetry {worst['theta_symmetry']:.1e}, "
               f"triangle {worst['theta_triangle']:.1e}, projectivity {worst['theta_projectivity']:.1e} (tol 1e-9), "
               f"failed {failed}, {elapsed:.1f} s (limit 60)")
    assert ok


def test_criterion_02_transfer_exactness(acceptance):
    t0 = time.perf_counter()
    x = np.arange(1024) / 1024
    doubling = ExpandingMap1D(DOUBLING_SITE)
    out = pushforward(doubling, GridDensity(1 + np.cos(TWO_PI * x), allow_zero=True))
    err = float(np.max(np.abs(out.values - 1.0)))
    perturbed = ExpandingMap1D(PERTURBED_SITE)
    rho = invariant_density(perturbed, M=1024)
    K = 8192
    l1 = float(np.mean(np.abs(cell_averages(rho, K) - ulam_invariant_density(perturbed, K))))
    elapsed = time.perf_counter() - t0
    ok = err < 1e-10 and l1 < 5e-3 and elapsed < 120
    acceptance(2, "transfer operator", ok,
               f"doubling max error {err:.1e} (tol 1e-10), Ulam K=8192 L1 {l1:.2e} (tol 5e-3), "
               f"{elapsed:.1f} s (limit 120)")
    assert ok


def test_criterion_03_cone_contraction(acceptance):
    rng = np.random.default_rng(3)
    site_map = ExpandingMap1D(PERTURBED_SITE)
    datum = estimate_datum(uncoupled_system(1, PERTURBED_SITE))
    kappa, D = datum.kappa, datum.distortion
    a = 8.0
    target = (a + D) / kappa
    psis = [random_cone_density(rng, 1024, a, fill=(0.3, 0.99)) for _ in range(100)]
    pushed = [pushforward(site_map, p).normalized() for p in psis]
    margin = min(cone_membership(q, target)[1] for q in pushed)
    lam = birkhoff_factor(empirical_diameter(pushed, a))
    ratios = []
    for k in range(100):
        p, q = psis[k], psis[(k + 1) % 100]
        ratios.append(hilbert_theta(pushed[k], pushed[(k + 1) % 100], a) / hilbert_theta(p, q, a))
    worst = max(ratios)
    ok = margin >= 0 and worst <= 1.05 * lam
    acceptance(3, "cone contraction", ok,
               f"kappa {kappa:.4f}, D {D:.3f}, a {a:g} -> {target:.3f}, min margin {margin:.3e} (>= 0), "
               f"max theta ratio {worst:.4f} vs Birkhoff {lam:.4f} x 1.05")
    assert ok


def test_criterion_04_uncoupled_equivalence(acceptance):
    rng = np.random.default_rng(4)
    worst = {}
    for N in (4, 64):
        M = 16 if N == 4 else 256
        margs = tuple(_von_mises(M, rng.uniform(0.1, 1.0), rng.random()) for _ in range(N))
        mu = ProductMeasure(margs)
        system = uncoupled_system(N, PERTURBED_SITE)
        sto = sto_step(system, mu)
        xhat = rng.random(N - 1)
        # route 1: slice of the coupled map through a random frozen point
        gaps = [tv_distance(pushforward(frozen_slice(system, i, xhat), margs[i]).normalized(), sto.marginals[i])
                for i in range(N)]
        if N == 4:
            # route 2: marginals of the full joint pushforward
            joint, _ = brute_force_pushforward(system, JointDensity.product(margs))
            gaps += [tv_distance(GridDensity(joint.marginal([i])), sto.marginals[i]) for i in range(N)]
        worst[N] = max(gaps)
    ok = all(v < 1e-8 for v in worst.values())
    acceptance(4, "uncoupled equivalence", ok,
               f"max TV gap N=4 {worst[4]:.1e}, N=64 {worst[64]:.1e} (tol 1e-8)")
    assert ok


def test_criterion_05_propagation_of_chaos(acceptance):
    t0 = time.perf_counter()
    rho0 = _von_mises(1024, 8.0)
    res = chaos_experiment(lambda N: diffusive_system(N, 0.1, DOUBLING_SITE),
                           lambda N: ProductMeasure.identical_product(N, rho0),
                           3, [16, 64, 256, 1024, 4096], 200_000, seed=7)
    elapsed = time.perf_counter() - t0
    dists = ", ".join(f"{r['N']}:{r['distance']:.2e}+-{r['stderr']:.0e}" for r in res.per_N)
    ok = res.strictly_decreasing and res.slope <= -0.25 and elapsed < 1800
    acceptance(5, "propagation of chaos", ok,
               f"TV {dists}; strictly decreasing beyond 2 SE {res.strictly_decreasing}, "
               f"slope {res.slope:.3f}+-{res.slope_stderr:.3f} (<= -0.25), {elapsed / 60:.1f} min (limit 30)")
    assert ok


def test_criterion_06_concentration(acceptance):
    t0 = time.perf_counter()
    N = 100
    mu = ProductMeasure.uniform(N, 64)
    rows = concentration_experiment(mu, lambda X: (X - 0.5).mean(axis=1), N, [0.05, 0.1, 0.2], 1_000_000, seed=6)
    elapsed = time.perf_counter() - t0
    ok = all(r["below"] for r in rows) and elapsed < 300
    detail = "; ".join(f"eps {r['eps']:g}: tail {r['tail']:.2e}, Wilson99 hi {r['wilson_hi']:.2e}, "
                       f"bound {r['bound']:.3f}" for r in rows)
    acceptance(6, "concentration", ok, f"{detail}; {elapsed:.0f} s (limit 300)")
    assert ok


def test_criterion_07_martingale(acceptance):
    t0 = time.perf_counter()
    N = 4
    rho = perturbed_density(N, 16, 0.05)
    g = lambda *xs: sum(x - 0.5 for x in xs) / N
    gap = martingale_identity_gap(rho, g)
    out = martingale_difference_bound(rho, g, c=10.0)
    elapsed = time.perf_counter() - t0
    ok = gap < 1e-8 and out["fitted_c"] < 10 and out["margin"] >= 0 and elapsed < 600
    acceptance(7, "martingale structure", ok,
               f"identity gap {gap:.1e} (tol 1e-8), max |g_k+1 - g_k| {out['max_difference']:.4f} vs "
               f"1/N + 10/N^2 = {out['bound']:.4f}, fitted c {out['fitted_c']:.2f} (< 10), {elapsed:.1f} s")
    assert ok


def test_criterion_08_jacobian_inverse(acceptance):
    Ns = (4, 64, 512)
    reps = [jacobian_inverse_bounds(diffusive_system(N, 0.05, DOUBLING_SITE), sample_count=1000, seed=N) for N in Ns]
    slope = float(np.polyfit(np.log(Ns), np.log([r.max_offdiag for r in reps]), 1)[0])
    hold = all(r.all_hold for r in reps)
    ok = hold and abs(slope + 1) <= 0.1
    margins = ", ".join(f"N={r.N}: off {r.offdiag_margin:.1e}, up {r.diag_upper_margin:.1e}, "
                        f"low {r.diag_lower_margin:.1e}" for r in reps)
    acceptance(8, "Jacobian inverse bounds", ok,
               f"all inequalities hold {hold} ({margins}); off-diagonal slope {slope:.3f} (-1 +- 0.1)")
    assert ok


def test_criterion_09_foliation(acceptance):
    t0 = time.perf_counter()
    family = lambda N: diffusive_system(N, 0.1, TRIPLING_SITE)
    rng = np.random.default_rng(9)
    system = family(8)
    _, res, _ = straighten_batch(system, 0, rng.random(1000), rng.random((1000, 7)))
    y, yhat = rng.random(20), rng.random((20, 7))
    Xn, _, _ = straighten_batch(system, 0, y, yhat)
    Xt, _ = trace_leaf(system, 0, y, yhat, project=False)
    agree = float(np.max(np.abs(Xn - Xt)))
    _, gap_slope = fiber_gap_scaling(family, N_list=(8, 16, 32, 64), sample_count=8, seed=0)
    rows, _ = phi_derivative_table(family, N_list=(8, 16, 32, 64), sample_count=16, seed=0)
    slopes = {r["case_label"]: r["fitted_slope"] for r in rows}
    s1, s2 = slopes["k=i,m!=k"], slopes["k!=i,m!=k"]
    elapsed = time.perf_counter() - t0
    ok = (res.max() < 1e-12 and agree < 1e-8 and abs(gap_slope + 1) <= 0.3 and abs(s1 + 1) <= 0.4
          and abs(s2 + 2) <= 0.4 and elapsed < 1200)
    acceptance(9, "foliation geometry", ok,
               f"max residual {res.max():.1e} (tol 1e-12), Newton vs traced {agree:.1e} (tol 1e-8), "
               f"d_C2(G,H) slope {gap_slope:.3f} (-1 +- 0.3), table slopes {s1:.3f} (-1 +- 0.4) and "
               f"{s2:.3f} (-2 +- 0.4), {elapsed:.0f} s (limit 1200)")
    assert ok


def test_criterion_10_lipschitz_invariance(acceptance):
    a0, b0, alpha0, M, N = 0.5, 2.0, 2.0, 32, 3
    system = diffusive_system(N, 0.005, TRIPLING_SITE)
    cert = invariance_certificate(system, a0, b0, alpha0)
    rho = JointDensity.product([_von_mises(M, 0.04)] * N)
    rin = lipschitz_report(rho, a0, b0, alpha=alpha0)
    out, _ = brute_force_pushforward(system, rho)
    rout = lipschitz_report(out, a0, b0, alpha=1.1 * alpha0)
    env = lipschitz_envelope(system, rho, cert, b0)
    bound = 1.3 * env["envelope"] / N
    input_ok = rin.a_fit < a0 and rin.alpha_fit <= alpha0
    ok = (cert.passed and input_ok and rout.a_fit < a0 and rout.alpha_fit <= 1.1 * alpha0
          and rout.max_L <= bound)
    acceptance(10, "Lipschitz-class invariance", ok,
               f"certificate passed {cert.passed} (rate {cert.contraction_rate:.3f}), input a {rin.a_fit:.3f} "
               f"alpha {rin.alpha_fit:.3f}, output a {rout.a_fit:.2e} (< {a0:g}), alpha {rout.alpha_fit:.2e} "
               f"(<= {1.1 * alpha0:g}), max L {rout.max_L:.2e} vs 1.3 C/N {bound:.3e}")
    assert ok


def test_criterion_11_determinism(acceptance, tmp_path):
    raw = {"experiment": "chaos", "seed": 11, "system": {"epsilon": 0.1}, "initial": {"M": 256},
           "chaos": {"t": 2, "N_list": [8, 32], "P": 5000, "bootstrap": 40}}
    first = run(parse_config(raw), tmp_path / "first")
    second = run(parse_config(raw), tmp_path / "second")
    csvs = [n for n in first.files if n.endswith(".csv")]
    same_bytes = all((tmp_path / "first" / n).read_bytes() == (tmp_path / "second" / n).read_bytes() for n in csvs)
    manifests = [json.loads((tmp_path / d / "manifest.json").read_text())["files"] for d in ("first", "second")]
    ok = same_bytes and manifests[0] == manifests[1] == second.files and bool(csvs)
    acceptance(11, "determinism", ok,
               f"{len(csvs)} CSVs byte-identical {same_bytes}, manifest checksums match {manifests[0] == manifests[1]}")
    assert ok
