"""Command-line experiment runner: quad, energy, observe, control.

All numeric CSV output uses full-precision scientific notation and fixed
column sets, so identical configs and seeds give bit-identical files.
"""

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ExperimentConfig, load_config
from .control import solve_control
from .dynamics import (
    InstabilityError,
    TimeGridSpec,
    elastic_operator,
    solve_adjoint,
)
from .fields import Material, VectorField
from .grid import tensor_grid
from .legendre import lgl_rule
from .observability import (
    multiplier_diagnostics,
    observe_trajectory,
    random_state,
)


def _fmt(x):
    return format(float(x), ".17e")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        wr.writerows(rows)


def reference_initial_data(grid, amplitude=0.2):
    """Product-of-sines initial displacement (equal components), zero velocity."""

    def bump(*coords):
        out = amplitude
        for x in coords:
            out = out * np.sin(np.pi * (x + 1.0) / 2.0)
        return out

    u0 = VectorField.from_callable(grid, [bump] * grid.dim)
    u1 = VectorField.zeros(grid)
    return u0, u1


# --------------------------------------------------------------------------
# quad


QUAD_TOLS = {
    "w_end_err": 1e-13,
    "weight_sum_err": 1e-12,
    "node_sym_err": 1e-13,
    "quad_rel_err": 1e-12,
    "diff_const_err": 1e-11,
    "diff2_consistency_err": 1e-9,
}


def quad_row(n, corrupt=False):
    rule = lgl_rule(n)
    nodes, weights = rule.nodes.copy(), rule.weights.copy()
    if corrupt:
        weights = weights + 1e-6
    w_end_err = max(abs(weights[0] - 2.0 / (n * (n + 1))),
                    abs(weights[-1] - 2.0 / (n * (n + 1))))
    weight_sum_err = abs(weights.sum() - 2.0)
    node_sym_err = float(np.max(np.abs(nodes + nodes[::-1])))
    quad_rel_err = 0.0
    for p in range(2 * n):
        approx = float(np.dot(weights, nodes ** p))
        if p % 2 == 0:
            exact = 2.0 / (p + 1)
            quad_rel_err = max(quad_rel_err, abs(approx - exact) / exact)
        else:
            quad_rel_err = max(quad_rel_err, abs(approx))
    diff_const_err = float(np.max(np.abs(rule.diff1 @ np.ones(n + 1))))
    # extended precision isolates the matrices' defect from product roundoff
    d1 = rule.diff1.astype(np.longdouble)
    d2 = rule.diff2.astype(np.longdouble)
    xl = nodes.astype(np.longdouble)
    diff2_err = 0.0
    for p in range(n + 1):
        v = xl ** p
        diff2_err = max(diff2_err, float(np.max(np.abs(d2 @ v - d1 @ (d1 @ v)))))
    vals = {
        "w_end_err": w_end_err,
        "weight_sum_err": weight_sum_err,
        "node_sym_err": node_sym_err,
        "quad_rel_err": quad_rel_err,
        "diff_const_err": diff_const_err,
        "diff2_consistency_err": diff2_err,
    }
    ok = all(vals[k] <= tol for k, tol in QUAD_TOLS.items())
    return vals, ok


def cmd_quad(cfg: ExperimentConfig, out_dir, workers=1, corrupt=False):
    ns = list(cfg.n_values) if cfg.n_explicit else list(range(2, 65))
    header = ["N"] + list(QUAD_TOLS) + ["pass"]
    rows, all_ok = [], True
    for n in ns:
        vals, ok = quad_row(n, corrupt=corrupt)
        all_ok &= ok
        rows.append([n] + [_fmt(vals[k]) for k in QUAD_TOLS] + [int(ok)])
    _write_csv(os.path.join(out_dir, "quad_report.csv"), header, rows)
    print(f"quad: {len(rows)} rules checked, {'all pass' if all_ok else 'FAILURES'}")
    return 0 if all_ok else 1


# --------------------------------------------------------------------------
# energy


def cmd_energy(cfg: ExperimentConfig, out_dir, workers=1):
    n = cfg.n_values[0]
    grid = tensor_grid(cfg.d, n, cfg.gamma_faces_or_default)
    material = Material(cfg.lam, cfg.mu)
    spec = TimeGridSpec(cfg.T, cfg.dt, cfg.scheme)
    op = elastic_operator(grid, material)
    state = random_state(grid, seed=cfg.seed)
    try:
        traj = solve_adjoint(op, state, spec)
    except InstabilityError as exc:
        print(f"energy: instability detected: {exc}")
        return 1
    es = np.array([op.energy_pair(traj.disp[i], traj.vel[i]) for i in range(traj.n_times)])
    drift = np.abs(es - es[0]) / es[0] if es[0] > 0 else np.zeros_like(es)
    rows = [[_fmt(t), _fmt(e), _fmt(dr),
             _fmt(np.dot(traj.disp[i], op.mvec * traj.disp[i])),
             _fmt(np.dot(traj.vel[i], op.mvec * traj.vel[i]))]
            for i, (t, e, dr) in enumerate(zip(traj.times, es, drift))]
    _write_csv(os.path.join(out_dir, "energy_trace.csv"),
               ["t", "energy", "drift_rel", "disp_l2_sq", "vel_l2_sq"], rows)
    worst = float(drift.max())
    print(f"energy: N={n} scheme={cfg.scheme} max relative drift {worst:.3e}")
    if cfg.scheme == "newmark" and worst > 1e-8:
        return 1
    return 0


# --------------------------------------------------------------------------
# observe


def _observe_job(args):
    cfg, n, seed = args
    grid = tensor_grid(cfg.d, n, cfg.gamma_faces_or_default)
    material = Material(cfg.lam, cfg.mu)
    spec = TimeGridSpec(cfg.T, cfg.dt, cfg.scheme)
    state = random_state(grid, seed=seed)
    report, traj = observe_trajectory(state, material, spec, grid,
                                      return_trajectory=True)
    diag = multiplier_diagnostics(traj, material, grid)
    return n, seed, report, diag


def cmd_observe(cfg: ExperimentConfig, out_dir, workers=1):
    ss = np.random.SeedSequence(cfg.seed)
    seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(cfg.n_seeds)]
    jobs = [(cfg, n, seed) for n in cfg.n_values for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_observe_job, jobs))
    else:
        results = [_observe_job(j) for j in jobs]

    scan_rows, diag_rows = [], []
    for n, seed, rep, diag in results:
        scan_rows.append([n, _fmt(rep.T), seed, _fmt(rep.lhs_norm_sq),
                          _fmt(rep.term_traction), _fmt(rep.term_second), _fmt(rep.ratio)])
        diag_rows.append([n, _fmt(rep.T), seed, _fmt(rep.threshold), _fmt(diag.energy0),
                          _fmt(diag.X), _fmt(diag.Y), _fmt(diag.cross_term),
                          _fmt(diag.cross_term_bound), _fmt(diag.cross_term_slack),
                          _fmt(diag.interior_energy_integral),
                          _fmt(diag.boundary_flux_integral),
                          _fmt(diag.source_coupling_integral), _fmt(diag.chain_slack)])
    _write_csv(os.path.join(out_dir, "observe_scan.csv"),
               ["N", "T", "seed", "lhs", "term_traction", "term_second", "ratio"],
               scan_rows)
    _write_csv(os.path.join(out_dir, "diagnostics.csv"),
               ["N", "T", "seed", "threshold", "energy0", "X", "Y", "cross_term",
                "cross_term_bound", "cross_term_slack", "interior_energy_integral",
                "boundary_flux_integral", "source_coupling_integral", "chain_slack"],
               diag_rows)
    bad = [r for r in diag_rows if float(r[9]) < -1e-6 * float(r[4])]
    print(f"observe: {len(scan_rows)} cases, {len(bad)} multiplier-bound violations")
    return 0 if not bad else 1


# --------------------------------------------------------------------------
# control


def _control_job(args):
    cfg, n = args
    grid = tensor_grid(cfg.d, n, cfg.gamma_faces_or_default)
    material = Material(cfg.lam, cfg.mu)
    spec = TimeGridSpec(cfg.T, cfg.dt, cfg.scheme)
    u0, u1 = reference_initial_data(grid, amplitude=cfg.amplitude)
    res = solve_control(u0, u1, material, spec, grid, tol=cfg.tol,
                        max_iter=cfg.max_iter, weight_g=cfg.weight_g,
                        cg_tol=cfg.cg_tol)
    return n, res


def cmd_control(cfg: ExperimentConfig, out_dir, workers=1):
    jobs = [(cfg, n) for n in cfg.n_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_control_job, jobs))
    else:
        results = [_control_job(j) for j in jobs]

    table_rows = []
    traces = {}
    ok = True
    for n, res in results:
        table_rows.append([n, _fmt(res.f_norm), _fmt(res.g_norm),
                           _fmt(res.final_state_norm_rel), res.cg_iterations])
        traces[n] = res.f_trace
        ok &= res.converged
        print(f"control: N={n} |f|={res.f_norm:.4e} |g|={res.g_norm:.4e} "
              f"final_rel={res.final_state_norm_rel:.3e} cg_iters={res.cg_iterations}")
    _write_csv(os.path.join(out_dir, "table1.csv"),
               ["N", "f_norm", "g_norm", "final_state_norm_rel", "cg_iterations"],
               table_rows)

    times = results[0][1].times
    header = ["t"] + [f"fnorm_N{n}" for n, _ in results]
    rows = [[_fmt(times[i])] + [_fmt(traces[n][i]) for n, _ in results]
            for i in range(times.size)]
    _write_csv(os.path.join(out_dir, "figure1.csv"), header, rows)

    _export_control_trace(os.path.join(out_dir, "control_trace.csv"), results[0][1])
    return 0 if ok else 1


def _export_control_trace(path, res):
    """Per-node control trace for the smallest-N run (bounded file size)."""
    grid = res.grid
    d, n = grid.dim, grid.degree
    pos = {idx: k for k, idx in enumerate(res.gamma_multi_indices)}
    n_gamma = len(res.gamma_multi_indices)
    fvals = res.f_samples.reshape(res.times.size, d, n_gamma)
    header = (["t", "face_id", "node_index"]
              + [f"f_{c + 1}" for c in range(d)] + [f"g_{c + 1}" for c in range(d)])
    rows = []
    for face in range(1, 2 * d + 1):
        axis, side = grid.face_axis_side(face)
        fixed = n if side > 0 else 0
        g = res.g_samples[face - 1].reshape(res.times.size, d, -1)
        face_nodes = []
        for tang in np.ndindex(*((n + 1,) * (d - 1))):
            full = list(tang)
            full.insert(axis, fixed)
            face_nodes.append(tuple(full))
        for i, t in enumerate(res.times):
            for k, idx in enumerate(face_nodes):
                frow = [_fmt(fvals[i, c, pos[idx]]) if idx in pos else _fmt(0.0)
                        for c in range(d)]
                grow = [_fmt(g[i, c, k]) for c in range(d)]
                rows.append([_fmt(t), face, ";".join(str(v) for v in idx)] + frow + grow)
    _write_csv(path, header, rows)


# --------------------------------------------------------------------------
# entry point


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="specelast",
        description="Spectral-collocation observability and boundary-control experiments",
    )
    parser.add_argument("--config", default=None, help="INI config file path")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--workers", type=int, default=1, help="parallel jobs")
    parser.add_argument("--seed", type=int, default=None, help="override base seed")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("quad", help="quadrature/differentiation invariant suite")
    sub.add_parser("energy", help="energy conservation trace")
    sub.add_parser("observe", help="observability ratio scan and diagnostics")
    sub.add_parser("control", help="boundary control synthesis and verification")
    for p in sub.choices.values():
        p.add_argument("--corrupt", action="store_true",
                       help="negative-control hook: perturb weights by 1e-6 (quad only)")
    args = parser.parse_args(argv)

    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        cfg = load_config(args.config, overrides)
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)

    commands = {
        "quad": lambda: cmd_quad(cfg, out_dir, args.workers, corrupt=args.corrupt),
        "energy": lambda: cmd_energy(cfg, out_dir, args.workers),
        "observe": lambda: cmd_observe(cfg, out_dir, args.workers),
        "control": lambda: cmd_control(cfg, out_dir, args.workers),
    }
    return commands[args.command]()


if __name__ == "__main__":
    sys.exit(main())
