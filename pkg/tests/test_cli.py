"""CLI contract: exit codes, CSV schemas, determinism."""

import csv
import filecmp
import os

import pytest

from specelast.cli import main
from specelast.config import ExperimentConfig, load_config


def write_config(path, **kv):
    lines = ["[experiment]"]
    for k, v in kv.items():
        lines.append(f"{k} = {v}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_config_defaults_reproduce_reference_experiment():
    cfg = ExperimentConfig()
    assert (cfg.d, cfg.lam, cfg.mu, cfg.T, cfg.dt) == (2, 0.5, 4.0, 3.0, 0.01)
    assert cfg.n_values == (10, 20, 40)
    cfg.validate()


def test_config_parsing(tmp_path):
    p = write_config(tmp_path / "exp.ini", n="4, 6", dt=0.05,
                     gamma_faces="1,2", seed=7, **{"lambda": 1.25})
    cfg = load_config(p)
    assert cfg.n_values == (4, 6) and cfg.n_explicit
    assert cfg.lam == 1.25 and cfg.seed == 7
    assert cfg.gamma_faces == (1, 2)


def test_config_rejects_unknown_key(tmp_path):
    p = write_config(tmp_path / "exp.ini", nonsense=3)
    with pytest.raises(ValueError):
        load_config(p)


def test_config_rejects_bad_values(tmp_path):
    p = write_config(tmp_path / "exp.ini", d=4)
    with pytest.raises(ValueError):
        load_config(p)


def test_cli_bad_config_exit_code(tmp_path):
    p = write_config(tmp_path / "exp.ini", mu=-1)
    assert main(["--config", p, "--out", str(tmp_path), "quad"]) == 2


def test_quad_default_sweep(tmp_path):
    out = tmp_path / "o"
    assert main(["--out", str(out), "quad"]) == 0
    header, rows = read_csv(out / "quad_report.csv")
    assert header[0] == "N" and header[-1] == "pass"
    assert [int(r[0]) for r in rows] == list(range(2, 65))
    assert all(r[-1] == "1" for r in rows)


def test_quad_explicit_n_and_values(tmp_path):
    p = write_config(tmp_path / "exp.ini", n="3")
    out = tmp_path / "o"
    assert main(["--config", p, "--out", str(out), "quad"]) == 0
    header, rows = read_csv(out / "quad_report.csv")
    assert len(rows) == 1 and rows[0][0] == "3"


def test_quad_corrupt_negative_control(tmp_path):
    p = write_config(tmp_path / "exp.ini", n="4, 8")
    out = tmp_path / "o"
    assert main(["--config", p, "--out", str(out), "quad", "--corrupt"]) == 1


def test_energy_newmark(tmp_path):
    p = write_config(tmp_path / "exp.ini", n="5", t=0.5, dt=0.01)
    out = tmp_path / "o"
    assert main(["--config", p, "--out", str(out), "energy"]) == 0
    header, rows = read_csv(out / "energy_trace.csv")
    assert header == ["t", "energy", "drift_rel", "disp_l2_sq", "vel_l2_sq"]
    assert len(rows) == 51
    assert max(float(r[2]) for r in rows) <= 1e-8


def test_energy_rk4_unstable_exit(tmp_path):
    # the rk4 stability limit at N = 10 is dt ~ 0.044, so dt = 0.1 blows up
    p = write_config(tmp_path / "exp.ini", n="10", t=2.0, dt=0.1, scheme="rk4")
    out = tmp_path / "o"
    assert main(["--config", p, "--out", str(out), "energy"]) == 1


def test_observe_outputs(tmp_path):
    p = write_config(tmp_path / "exp.ini", n="4", t=0.4, dt=0.02, n_seeds=2)
    out = tmp_path / "o"
    assert main(["--config", p, "--out", str(out), "observe"]) == 0
    header, rows = read_csv(out / "observe_scan.csv")
    assert header == ["N", "T", "seed", "lhs", "term_traction", "term_second", "ratio"]
    assert len(rows) == 2
    dheader, drows = read_csv(out / "diagnostics.csv")
    assert dheader[:4] == ["N", "T", "seed", "threshold"]
    assert len(drows) == 2
    for r in drows:
        assert float(r[9]) >= -1e-6 * float(r[4])    # cross-term slack
        assert float(r[13]) >= -1e-8 * float(r[4])   # inequality-chain slack


def test_observe_deterministic(tmp_path):
    p = write_config(tmp_path / "exp.ini", n="4", t=0.3, dt=0.03, n_seeds=2)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["--config", p, "--out", str(out1), "observe"]) == 0
    assert main(["--config", p, "--out", str(out2), "observe"]) == 0
    assert filecmp.cmp(out1 / "observe_scan.csv", out2 / "observe_scan.csv",
                       shallow=False)
    assert filecmp.cmp(out1 / "diagnostics.csv", out2 / "diagnostics.csv",
                       shallow=False)


def test_control_outputs(tmp_path):
    p = write_config(tmp_path / "exp.ini", n="4, 5", t=1.0, dt=0.05,
                     cg_tol=1e-5, max_iter=200)
    out = tmp_path / "o"
    assert main(["--config", p, "--out", str(out), "control"]) == 0
    header, rows = read_csv(out / "table1.csv")
    assert header == ["N", "f_norm", "g_norm", "final_state_norm_rel", "cg_iterations"]
    assert [r[0] for r in rows] == ["4", "5"]
    for r in rows:
        assert float(r[3]) <= 1e-3

    fheader, frows = read_csv(out / "figure1.csv")
    assert fheader == ["t", "fnorm_N4", "fnorm_N5"]
    assert len(frows) == 21          # T/dt + 1 rows

    theader, trows = read_csv(out / "control_trace.csv")
    assert theader == ["t", "face_id", "node_index", "f_1", "f_2", "g_1", "g_2"]
    # smallest-N run: 4 faces x (N+1) nodes x (T/dt + 1) times
    assert len(trows) == 4 * 5 * 21


def test_control_deterministic(tmp_path):
    p = write_config(tmp_path / "exp.ini", n="4", t=0.5, dt=0.05, cg_tol=1e-4)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["--config", p, "--out", str(out1), "control"]) == 0
    assert main(["--config", p, "--out", str(out2), "control"]) == 0
    for name in ("table1.csv", "figure1.csv", "control_trace.csv"):
        assert filecmp.cmp(out1 / name, out2 / name, shallow=False)


def test_control_zero_amplitude_row(tmp_path):
    p = write_config(tmp_path / "exp.ini", n="4", t=0.5, dt=0.05, amplitude=0.0)
    out = tmp_path / "o"
    assert main(["--config", p, "--out", str(out), "control"]) == 0
    _, rows = read_csv(out / "table1.csv")
    assert float(rows[0][1]) == 0.0 and float(rows[0][2]) == 0.0
    assert rows[0][4] == "0"


def test_workers_give_identical_results(tmp_path):
    p = write_config(tmp_path / "exp.ini", n="4, 5", t=0.3, dt=0.03, n_seeds=2)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["--config", p, "--out", str(out1), "observe"]) == 0
    assert main(["--config", p, "--out", str(out2), "--workers", "2", "observe"]) == 0
    assert filecmp.cmp(out1 / "observe_scan.csv", out2 / "observe_scan.csv",
                       shallow=False)


def test_workers_control_identical(tmp_path):
    p = write_config(tmp_path / "exp.ini", n="4, 5", t=0.4, dt=0.05, cg_tol=1e-4)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["--config", p, "--out", str(out1), "control"]) == 0
    assert main(["--config", p, "--out", str(out2), "--workers", "2", "control"]) == 0
    for name in ("table1.csv", "figure1.csv"):
        assert filecmp.cmp(out1 / name, out2 / name, shallow=False)
