"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings.  The reference-experiment rows (criterion 6) dominate the
runtime; everything else completes in a few minutes.
"""

import time

import numpy as np
import pytest
from scipy.linalg import eigh

import specelast as se
from specelast.cli import reference_initial_data
from specelast.control import dense_gramian, gramian_symmetry_defect, hum_workspace
from specelast.grid import equivalence_upper_bound
from specelast.observability import random_state, worst_case_ratio

MAT = se.Material(0.5, 4.0)


def report(name, ok, detail, t0):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {name}: {detail} ({time.time() - t0:.1f}s)")
    return ok


def test_accept_lgl_correctness():
    t0 = time.time()
    worst_w, worst_q = 0.0, 0.0
    for n in range(2, 65):
        rule = se.lgl_rule(n)
        ref = 2.0 / (n * (n + 1))
        worst_w = max(worst_w, abs(rule.weights[0] - ref), abs(rule.weights[-1] - ref))
        for p in range(2 * n):
            approx = float(np.dot(rule.weights, rule.nodes ** p))
            if p % 2 == 0:
                exact = 2.0 / (p + 1)
                worst_q = max(worst_q, abs(approx - exact) / exact)
            else:
                worst_q = max(worst_q, abs(approx))
    elapsed = time.time() - t0
    ok = worst_w <= 1e-13 and worst_q <= 1e-12 and elapsed < 5.0
    assert report("LGL correctness (N=2..64)", ok,
                  f"endpoint weight err {worst_w:.2e} (<=1e-13), "
                  f"quadrature err {worst_q:.2e} (<=1e-12)", t0)


def test_accept_norm_equivalence():
    t0 = time.time()
    ok = True
    details = []
    for d in (1, 2):
        for n in (4, 8, 16):
            g = se.tensor_grid(d, n)
            lo, hi = se.norm_equivalence_report(g, samples=100, seed=100 * d + n)
            bound = equivalence_upper_bound(g)
            good = lo >= 1.0 - 1e-10 and hi <= bound + 1e-10
            ok &= good
            details.append(f"d{d}N{n}:[{lo:.6f},{hi:.6f}]<= {bound:.4f}")
    elapsed = time.time() - t0
    ok = ok and elapsed < 30.0
    assert report("Norm equivalence", ok, "; ".join(details), t0)


def test_accept_energy_conservation():
    t0 = time.time()
    g = se.tensor_grid(2, 10)
    op = se.elastic_operator(g, MAT)
    spec = se.TimeGridSpec(3.0, 0.01)
    worst = 0.0
    for seed in range(10):
        st0 = random_state(g, seed=seed)
        traj = se.solve_adjoint(op, st0, spec)
        es = np.array([op.energy_pair(traj.disp[i], traj.vel[i])
                       for i in range(traj.n_times)])
        worst = max(worst, float(np.max(np.abs(es - es[0])) / es[0]))
    elapsed = time.time() - t0
    ok = worst <= 1e-8 and elapsed < 60.0
    assert report("Energy conservation (N=10, T=3, 10 runs)", ok,
                  f"max relative drift {worst:.2e} (<=1e-8)", t0)


def test_accept_gramian_structure():
    t0 = time.time()
    g = se.tensor_grid(2, 6)
    spec = se.TimeGridSpec(3.0, 0.01)
    ws = hum_workspace(g, MAT, spec, weight_g=0.25)

    defect = gramian_symmetry_defect(ws, probes=3, seed=0)
    rng = np.random.default_rng(1)
    pos_ok = True
    for _ in range(20):
        x = rng.standard_normal((2, ws.op.n_interior))
        pos_ok &= ws.dual_pairing(ws.gramian_apply(x), x) > 0.0

    gmat, emat = dense_gramian(ws)
    evals = eigh(0.5 * (gmat + gmat.T), emat, eigvals_only=True)
    wc = worst_case_ratio(g, MAT, spec, iterations=200, weight_g=0.25, seed=0)
    eig_rel = abs(wc.ratio - float(evals[0])) / float(evals[0])

    ok = defect <= 1e-6 and pos_ok and eig_rel <= 1e-6
    assert report("Gramian structure (N=6, T=3)", ok,
                  f"symmetry defect {defect:.2e} (<=1e-6), 20 probes positive: "
                  f"{pos_ok}, min-ratio vs dense eig rel err {eig_rel:.2e} (<=1e-6)",
                  t0)


def test_accept_observability_uniformity():
    t0 = time.time()
    ratios = {}
    for n in (6, 10, 14):
        g = se.tensor_grid(2, n)
        spec = se.TimeGridSpec(13.0, 0.05)
        wc = worst_case_ratio(g, MAT, spec, iterations=200, weight_g=0.25,
                              seed=0)
        ratios[n] = wc.ratio
    vals = list(ratios.values())
    factor = max(vals) / min(vals)
    elapsed = time.time() - t0
    ok = all(v > 0 for v in vals) and factor <= 3.0 and elapsed < 15 * 60
    assert report("Observability uniformity (T=13, N=6/10/14)", ok,
                  f"ratios {[f'{v:.3g}' for v in vals]}, range factor "
                  f"{factor:.2f} (<=3), all positive", t0)


TABLE1_F = {10: 1.6e-1, 20: 2.2e-1, 40: 2.5e-1}
TABLE1_BUDGET_S = {10: 120, 20: 600, 40: 3600}


@pytest.fixture(scope="module")
def table1_results():
    results = {}
    for n in (10, 20, 40):
        t0 = time.time()
        g = se.tensor_grid(2, n)
        u0, u1 = reference_initial_data(g)
        spec = se.TimeGridSpec(3.0, 0.01)
        res = se.solve_control(u0, u1, MAT, spec, g, tol=1e-3, max_iter=900,
                               weight_g=0.25, cg_tol=1e-6)
        results[n] = (res, time.time() - t0)
    return results


def test_accept_table1_reproduction(table1_results):
    t0 = time.time()
    lines, ok = [], True
    g_norms = []
    for n in (10, 20, 40):
        res, elapsed = table1_results[n]
        ref = TABLE1_F[n]
        f_ok = abs(res.f_norm - ref) <= 0.25 * ref
        null_ok = res.final_state_norm_rel <= 1e-3
        time_ok = elapsed < TABLE1_BUDGET_S[n]
        g_norms.append(res.g_norm)
        ok &= f_ok and null_ok and time_ok
        lines.append(
            f"N={n}: |f|={res.f_norm:.4e} (ref {ref:.1e}+-25%: {f_ok}), "
            f"|g|={res.g_norm:.4e}, final_rel={res.final_state_norm_rel:.2e} "
            f"(<=1e-3: {null_ok}), iters={res.cg_iterations}, {elapsed:.0f}s"
        )
    dec_ok = g_norms[0] > g_norms[1] > g_norms[2]
    g40_ok = g_norms[2] < 2e-3
    ok &= dec_ok and g40_ok
    lines.append(f"|g| strictly decreasing: {dec_ok}, |g|(40)={g_norms[2]:.2e} "
                 f"(<2e-3: {g40_ok})")
    assert report("Table 1 reproduction", ok, " | ".join(lines), t0)


def test_accept_figure1_qualitative(table1_results):
    t0 = time.time()
    ok = True
    details = []
    for n in (10, 20, 40):
        res, _ = table1_results[n]
        trace = res.f_trace
        bounded = float(np.max(trace)) <= 1.0
        dt = res.spec.dt_effective
        active = float(dt * np.count_nonzero(trace > 1e-8))
        positive_measure = active > 0.1
        ok &= bounded and positive_measure
        details.append(f"N={n}: max|f(t)|={np.max(trace):.3f} (<=1), "
                       f"active time {active:.2f}s")
    assert report("Figure 1 qualitative", ok, "; ".join(details), t0)


def test_accept_multiplier_diagnostics():
    t0 = time.time()
    g = se.tensor_grid(2, 8)
    op = se.elastic_operator(g, MAT)
    spec = se.TimeGridSpec(1.0, 0.01)
    worst = np.inf
    for seed in range(20):
        st0 = random_state(g, seed=seed)
        traj = se.solve_adjoint(op, st0, spec)
        diag = se.multiplier_diagnostics(traj, MAT, g)
        worst = min(worst, diag.cross_term_slack / diag.energy0)
    ok = worst >= -1e-6
    assert report("Multiplier bound (20 random, N=8)", ok,
                  f"min normalized slack {worst:.3e} (>=-1e-6)", t0)
