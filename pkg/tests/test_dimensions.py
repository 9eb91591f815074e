"""Cross-dimension coverage: the machinery runs for d = 1 and d = 3."""

import numpy as np
import pytest

from specelast.control import gramian_symmetry_defect, hum_workspace, solve_control
from specelast.dynamics import TimeGridSpec, elastic_operator, solve_adjoint
from specelast.fields import Material, VectorField, lame_apply
from specelast.grid import tensor_grid
from specelast.observability import observe_trajectory, random_state

MAT = Material(0.5, 4.0)


def test_d1_energy_conservation():
    g = tensor_grid(1, 12)
    op = elastic_operator(g, MAT)
    st0 = random_state(g, seed=1)
    traj = solve_adjoint(op, st0, TimeGridSpec(2.0, 0.01))
    es = [op.energy_pair(traj.disp[i], traj.vel[i]) for i in range(traj.n_times)]
    assert max(abs(e - es[0]) for e in es) <= 1e-10 * es[0]


def test_d1_lame_is_scaled_second_derivative():
    # in one dimension the operator collapses to (lam + 2 mu) u''
    g = tensor_grid(1, 8)
    u = VectorField.from_callable(g, [lambda x: x ** 3])
    out = lame_apply(MAT, u)
    want = (MAT.lam + 2 * MAT.mu) * 6 * g.rule.nodes
    assert np.allclose(out.values[0], want, atol=1e-10)


def test_d1_control_end_to_end():
    # single control node at x = +1
    g = tensor_grid(1, 8)
    spec = TimeGridSpec(3.0, 0.02)
    u0 = VectorField.from_callable(g, [lambda x: 0.2 * np.sin(np.pi * (x + 1) / 2)])
    u1 = VectorField.zeros(g)
    res = solve_control(u0, u1, MAT, spec, g, cg_tol=1e-8, max_iter=400)
    assert res.final_state_norm_rel <= 1e-3
    assert res.f_norm > 0.0


def test_d1_gramian_symmetric():
    g = tensor_grid(1, 6)
    ws = hum_workspace(g, MAT, TimeGridSpec(1.5, 0.05), weight_g=0.5)
    assert gramian_symmetry_defect(ws, probes=3, seed=2) <= 1e-10


def test_d3_energy_and_observability():
    g = tensor_grid(3, 3)
    assert g.gamma_faces == (1, 2, 3)
    op = elastic_operator(g, MAT)
    st0 = random_state(g, seed=3)
    traj = solve_adjoint(op, st0, TimeGridSpec(0.5, 0.01))
    es = [op.energy_pair(traj.disp[i], traj.vel[i]) for i in range(traj.n_times)]
    assert max(abs(e - es[0]) for e in es) <= 1e-10 * es[0]
    rep = observe_trajectory(st0, MAT, TimeGridSpec(0.3, 0.03), g)
    assert rep.term_traction > 0 and rep.term_second > 0
    assert np.isfinite(rep.ratio)


def test_d3_lame_quadratic_field():
    g = tensor_grid(3, 3)
    u = VectorField.from_callable(g, [
        lambda x, y, z: x ** 2,
        lambda x, y, z: 0.0 * x,
        lambda x, y, z: 0.0 * x,
    ])
    out = lame_apply(MAT, u)
    assert np.allclose(out.values[0], 2 * MAT.lam + 4 * MAT.mu, atol=1e-11)
    assert np.allclose(out.values[1], 0.0, atol=1e-11)
    assert np.allclose(out.values[2], 0.0, atol=1e-11)


def test_d3_gramian_symmetric():
    g = tensor_grid(3, 3)
    ws = hum_workspace(g, MAT, TimeGridSpec(0.4, 0.05), weight_g=1.0)
    assert gramian_symmetry_defect(ws, probes=2, seed=4) <= 1e-10
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, ws.op.n_interior))
    assert ws.dual_pairing(ws.gramian_apply(x), x) > 0.0
