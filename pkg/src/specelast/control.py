"""Boundary control synthesis by conjugate gradient on the observation Gramian.

The Gramian maps adjoint initial data (phi0, phi1) to the time-0 state of a
backward-controlled solve fed with traces observed along the adjoint
trajectory.  The two control channels are built as exact discrete duals of
their insertion operators, which keeps the Gramian symmetric to roundoff:

* Dirichlet channel: inserting nodal data q on the control boundary drives
  the interior through the boundary block L_g of the collocation operator;
  its dual observation is -W^{-1} L_g' M phi, a quadrature-weighted reaction
  trace that approximates the physical traction mu dphi/dnu + (lam+mu) nu div
  phi to O(1/N^2).

* Face-source channel: the lifting profiles satisfy the exact identity
  (G_j(g), psi)_N = -sqrt(w_end) (A_j g, d^2 psi/dnu^2)_{face}, so the dual
  observable is the weighted second normal derivative A_j d^2 phi/dnu^2 and
  the auxiliary controls are extracted as weight_g * sqrt(w_end) times it.

With the trapezoidal (Newmark, beta=1/4, gamma=1/2) integrator the discrete
duality telescopes exactly, giving

  <Lambda x, y> = sum_n dt [ (f_x, f_y)_W + (g_x, g_y)_{faces} ]   (midpoint
  averages), a symmetric positive form; conjugate gradient runs on it in the
  discrete energy inner product via a stiffness Riesz solve.
"""

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    BoundaryForcing,
    ElasticState,
    TimeGridSpec,
    Trajectory,
    _newmark_run,
    elastic_operator,
    solve_adjoint,
    solve_controlled,
)
from .fields import Material, VectorField
from .grid import TensorGrid
from .legendre import interp_matrix, lgl_rule


class GramianAsymmetryError(RuntimeError):
    """Measured Gramian asymmetry exceeded the configured tolerance."""


def _trapezoid(samples, dt):
    return float(np.trapezoid(samples, dx=dt)) if hasattr(np, "trapezoid") \
        else float(np.trapz(samples, dx=dt))


@dataclass(frozen=True)
class LiftingKernels:
    """Per-axis boundary lifting: profiles and the diagonal coupling matrices.

    h1/h2 interpolate (1+s)/2 and (1-s)/2 at interior nodes with zero endpoint
    values; h1_tilde/h2_tilde are the lifted source profiles sampled at all
    nodes; axis_matrices[j] holds the diagonal of A_{j+1}, i.e.
    a_kk = mu + (mu + lam) delta_{kj}.
    """

    grid: TensorGrid
    material: Material
    h1: np.ndarray
    h2: np.ndarray
    h1_tilde: np.ndarray
    h2_tilde: np.ndarray
    axis_matrices: np.ndarray

    def profile(self, side):
        return self.h1_tilde if side > 0 else self.h2_tilde

    def interior_source(self, face, g_values):
        """Realize G_j(P_i) = A_j h~(x_axis) g(projected point) at interior nodes.

        g_values holds full-face nodal data, shape (d,) + (N+1,)**(d-1); only
        its interior tangential samples reach interior nodes.
        """
        grid = self.grid
        d, n = grid.dim, grid.degree
        axis, side = grid.face_axis_side(face)
        prof = self.profile(side)[1:n]
        gi = g_values[(slice(None),) + (slice(1, n),) * (d - 1)]
        out = gi[:, None, ...] * prof[(None, slice(None)) + (None,) * (d - 1)]
        out = np.moveaxis(out, 1, 1 + axis)
        return self.axis_matrices[axis][(slice(None),) + (None,) * d] * out


def build_lifting(grid: TensorGrid, material: Material) -> LiftingKernels:
    rule = grid.rule
    n = grid.degree
    s = rule.nodes
    h1 = (1.0 + s) / 2.0
    h2 = (1.0 - s) / 2.0
    h1[0] = h1[-1] = 0.0
    h2[0] = h2[-1] = 0.0
    w0, wn = rule.weights[0], rule.weights[-1]
    psin_s = rule.diff1[:, -1]
    psi0_s = rule.diff1[:, 0]
    h1t = (rule.diff2 @ h1 + psin_s / wn) / np.sqrt(wn)
    h2t = (rule.diff2 @ h2 - psi0_s / w0) / np.sqrt(w0)
    lam, mu = material.lam, material.mu
    amat = np.full((grid.dim, grid.dim), mu)
    np.fill_diagonal(amat, mu + (mu + lam))
    return LiftingKernels(grid, material, h1, h2, h1t, h2t, amat)


# --------------------------------------------------------------------------
# workspace


class HumWorkspace:
    """Precomputed machinery for Gramian applications on one problem setup."""

    def __init__(self, grid: TensorGrid, material: Material, spec: TimeGridSpec,
                 weight_g=1.0):
        if weight_g < 0:
            raise ValueError("weight_g must be >= 0")
        if spec.scheme != "newmark":
            raise ValueError("the Gramian duality requires the newmark scheme")
        self.grid = grid
        self.material = material
        self.spec = spec
        self.weight_g = float(weight_g)
        self.op = elastic_operator(grid, material)
        self.lifting = build_lifting(grid, material)
        self.sqrt_w_end = float(np.sqrt(grid.rule.weights[-1]))
        d, n = grid.dim, grid.degree

        # per-face second-derivative rows restricted to interior normal nodes
        self._d2_rows = {}
        for face in range(1, 2 * d + 1):
            axis, side = grid.face_axis_side(face)
            row = grid.rule.diff2[-1 if side > 0 else 0, 1:n]
            self._d2_rows[face] = (axis, side, row)

    # -- data pairs (phi0, phi1) as arrays of shape (2, n_interior) ---------

    def pair_from_fields(self, a: VectorField, b: VectorField):
        return np.stack([self.op.vec_from_field(a), self.op.vec_from_field(b)])

    def state_from_pair(self, pair, time=0.0):
        return ElasticState(self.op.field_from_vec(pair[0]),
                            self.op.field_from_vec(pair[1]), time=time)

    def dual_pairing(self, x, y):
        """Plain quadrature-weighted pairing of two data pairs."""
        m = self.op.mvec
        return float(np.dot(x[0], m * y[0]) + np.dot(x[1], m * y[1]))

    def energy_inner(self, x, y):
        """Discrete energy inner product: stiffness on slot 0, mass on slot 1."""
        return float(np.dot(x[0], self.op.K @ y[0]) + np.dot(x[1], self.op.mvec * y[1]))

    def riesz(self, x):
        """Energy Riesz representative of the plain pairing functional of x."""
        return np.stack([self.op.stiffness_solve(self.op.mvec * x[0]), x[1]])

    # -- observation and insertion ------------------------------------------

    def observe(self, disp_samples):
        """Extract (f, g) control samples from adjoint displacement snapshots.

        disp_samples: (n_t, n_interior).  Returns the Dirichlet samples
        (n_t, n_gamma_dofs) and one full-face array (n_t, d, (N+1)^(d-1))
        per face; g vanishes at face edge nodes since the adjoint does.
        """
        op = self.op
        grid = self.grid
        d, n = grid.dim, grid.degree
        n_t = disp_samples.shape[0]
        f = -((disp_samples * op.mvec) @ op.gamma_coupling) / op.gamma_weights

        interior = disp_samples.reshape(n_t, d, *((n - 1,) * d))
        gs = []
        scale = self.weight_g * self.sqrt_w_end
        for face in range(1, 2 * d + 1):
            axis, side, row = self._d2_rows[face]
            dnn = np.tensordot(interior, row, axes=(2 + axis, 0))
            amat = self.lifting.axis_matrices[axis]
            g = np.zeros((n_t, d) + (n + 1,) * (d - 1))
            gi = scale * amat[(None, slice(None)) + (None,) * (d - 1)] * dnn
            g[(slice(None), slice(None)) + (slice(1, n),) * (d - 1)] = gi
            gs.append(g)
        return f, gs

    def forcing_from_controls(self, f_samples, g_samples):
        """Assemble the integrator forcing from control samples."""
        grid = self.grid
        d, n = grid.dim, grid.degree
        n_t = f_samples.shape[0]
        src = np.zeros((n_t, d) + (n - 1,) * d)
        for face, g in zip(range(1, 2 * d + 1), g_samples):
            axis, side = grid.face_axis_side(face)
            prof = self.lifting.profile(side)[1:n]
            gi = g[(slice(None), slice(None)) + (slice(1, n),) * (d - 1)]
            out = gi[:, :, None, ...] * prof[(None, None, slice(None)) + (None,) * (d - 1)]
            out = np.moveaxis(out, 2, 2 + axis)
            amat = self.lifting.axis_matrices[axis]
            src += amat[(None, slice(None)) + (None,) * d] * out
        return BoundaryForcing(self.spec.times, f_samples, src.reshape(n_t, -1))

    # -- the Gramian ---------------------------------------------------------

    def adjoint_trajectory(self, x) -> Trajectory:
        return solve_adjoint(self.op, self.state_from_pair(x), self.spec)

    def _adjoint_disp_samples(self, x):
        us, _ = _newmark_run(self.op, x[0], x[1], None, self.spec.dt_effective,
                             self.spec.n_steps, store=True, store_vel=False)
        return us

    def controls_from_adjoint(self, x):
        disp = self._adjoint_disp_samples(x)
        f, gs = self.observe(disp)
        return f, gs, self.forcing_from_controls(f, gs)

    def gramian_apply(self, x, return_controls=False):
        """Lambda x = (velocity, -displacement) of the backward solve at t = 0."""
        f, gs, forcing = self.controls_from_adjoint(x)
        # backward-from-rest leg in reversed time; only the final state is kept
        rs = forcing.interior_source + (forcing.dirichlet @ self.op.gamma_coupling.T)
        zero = np.zeros(self.op.n_interior)
        u_end, v_end = _newmark_run(self.op, zero, zero, rs[::-1],
                                    self.spec.dt_effective, self.spec.n_steps,
                                    store=False)
        out = np.stack([-v_end, -u_end])
        if return_controls:
            return out, (f, gs, forcing)
        return out

    def quadratic_form(self, f_x, gs_x, f_y, gs_y):
        """The duality value <Lambda x, y> recomputed from the control samples:
        sum_n dt [(f_x, f_y)_W + (1/weight_g) (g_x, g_y)_faces] with midpoint
        averages in time; used as an exactness self-check of the pipeline."""
        dt = self.spec.dt_effective
        fa = 0.5 * (f_x[1:] + f_x[:-1])
        fb = 0.5 * (f_y[1:] + f_y[:-1])
        total = dt * float(np.einsum("tk,tk,k->", fa, fb, self.op.gamma_weights))
        if self.weight_g > 0:
            w1 = self.grid.rule.weights
            wtan = np.ones(())
            for _ in range(self.grid.dim - 1):
                wtan = np.multiply.outer(wtan, w1)
            for gx, gy in zip(gs_x, gs_y):
                ga = 0.5 * (gx[1:] + gx[:-1])
                gb = 0.5 * (gy[1:] + gy[:-1])
                prod = (ga * gb).sum(axis=1)
                total += dt / self.weight_g * float(np.sum(prod * wtan))
        return total


def hum_workspace(grid, material, spec, weight_g=1.0) -> HumWorkspace:
    return HumWorkspace(grid, material, spec, weight_g)


def gramian_apply(adjoint_data: ElasticState, material: Material, spec: TimeGridSpec,
                  grid: TensorGrid, weight_g=1.0) -> ElasticState:
    """One Gramian application at the spec-level state interface."""
    ws = hum_workspace(grid, material, spec, weight_g)
    x = ws.pair_from_fields(adjoint_data.displacement, adjoint_data.velocity)
    y = ws.gramian_apply(x)
    return ws.state_from_pair(y)


def gramian_symmetry_defect(ws: HumWorkspace, probes=3, seed=0):
    """max over random pairs of |<Lx,y> - <x,Ly>| / max(|<Lx,y>|, |<x,Ly>|)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probes):
        x = rng.standard_normal((2, ws.op.n_interior))
        y = rng.standard_normal((2, ws.op.n_interior))
        s1 = ws.dual_pairing(ws.gramian_apply(x), y)
        s2 = ws.dual_pairing(ws.gramian_apply(y), x)
        worst = max(worst, abs(s1 - s2) / max(abs(s1), abs(s2), 1e-300))
    return worst


def dense_gramian(ws: HumWorkspace):
    """Assemble the pairing matrix G[i,j] = <Lambda e_j, e_i> and the energy
    Gram matrix E; small problems only (the oracle route)."""
    n = ws.op.n_interior
    m = ws.op.mvec
    g = np.empty((2 * n, 2 * n))
    e = np.zeros((2 * n, 2 * n))
    e[:n, :n] = ws.op.K
    e[n:, n:] = np.diag(m)
    basis = np.zeros((2, n))
    for j in range(2 * n):
        basis[:] = 0.0
        basis[j // n, j % n] = 1.0
        y = ws.gramian_apply(basis)
        g[:n, j] = m * y[0]
        g[n:, j] = m * y[1]
    return g, e


# --------------------------------------------------------------------------
# conjugate gradient driver


@dataclass
class ControlResult:
    """Synthesized controls plus verification report."""

    grid: TensorGrid
    material: Material
    spec: TimeGridSpec
    weight_g: float
    times: np.ndarray
    f_samples: np.ndarray
    g_samples: list
    gamma_multi_indices: list
    forcing: BoundaryForcing
    adjoint_data: np.ndarray
    f_norm: float = np.nan
    g_norm: float = np.nan
    f_trace: np.ndarray = None
    final_state_norm_rel: float = np.nan
    cg_iterations: int = 0
    cg_residual: float = np.nan
    residual_history: np.ndarray = field(default=None)
    converged: bool = True


def _face_l2_sq_series(grid, values):
    """Exact face L2 norm squared per time sample for (n_t, d, ...) face data."""
    d, n = grid.dim, grid.degree
    if d == 1:
        return np.sum(values ** 2, axis=1).reshape(-1)
    p = interp_matrix(n, n + 1)
    frule = lgl_rule(n + 1)
    v = values
    for axis in range(d - 1):
        v = np.moveaxis(np.tensordot(v, p, axes=(2 + axis, 1)), -1, 2 + axis)
    w = frule.weights
    wnd = w.copy()
    for _ in range(d - 2):
        wnd = np.multiply.outer(wnd, w)
    weighted = (v * v) * wnd
    return weighted.reshape(weighted.shape[0], -1).sum(axis=1)


def control_norms(result: ControlResult, grid: TensorGrid, spec: TimeGridSpec):
    """Space-time L2 norms of the controls; also refreshes the |f(t)| trace."""
    dt = spec.dt_effective
    f_sq = np.zeros(result.times.size)
    for face in grid.gamma_faces:
        vals = _face_values_from_gamma_result(result, grid, face)
        f_sq += _face_l2_sq_series(grid, vals)
    g_sq = np.zeros(result.times.size)
    for g in result.g_samples:
        g_sq += _face_l2_sq_series(grid, g)
    f_norm = float(np.sqrt(_trapezoid(f_sq, dt)))
    g_norm = float(np.sqrt(_trapezoid(g_sq, dt)))
    result.f_trace = np.sqrt(f_sq)
    result.f_norm, result.g_norm = f_norm, g_norm
    return f_norm, g_norm


def _face_values_from_gamma_result(result, grid, face):
    d, n = grid.dim, grid.degree
    n_t = result.f_samples.shape[0]
    flat_pos = {}
    for k, idx in enumerate(result.gamma_multi_indices):
        flat_pos[idx] = k
    axis, side = grid.face_axis_side(face)
    fixed = n if side > 0 else 0
    sel = []
    for idx in np.ndindex(*((n + 1,) * (d - 1))):
        full = list(idx)
        full.insert(axis, fixed)
        sel.append(flat_pos[tuple(full)])
    per = result.f_samples.reshape(n_t, d, -1)[:, :, np.array(sel)]
    return per.reshape((n_t, d) + (n + 1,) * (d - 1))


def solve_control(u0: VectorField, u1: VectorField, material: Material,
                  spec: TimeGridSpec, grid: TensorGrid, tol=1e-3, max_iter=200,
                  weight_g=1.0, cg_tol=1e-6, symmetry_check=0.0) -> ControlResult:
    """Null-controllability solve: find boundary controls driving (u0, u1) to rest.

    The Gramian equation Lambda e = b, with b encoding (u1, -u0) in the
    duality pairing, is solved by the conjugate-residual variant of conjugate
    gradient in the discrete energy inner product (the minimal-residual member
    of the conjugate-direction family, so the residual history is monotone).
    After convergence the controlled system is re-integrated forward and the
    relative final-state norm is reported.
    """
    ws = hum_workspace(grid, material, spec, weight_g)
    if symmetry_check:
        defect = gramian_symmetry_defect(ws, probes=2, seed=1)
        if defect > symmetry_check:
            raise GramianAsymmetryError(
                f"Gramian asymmetry {defect:.3e} exceeds tolerance {symmetry_check:.1e}"
            )
    b = np.stack([ws.op.vec_from_field(u1), -ws.op.vec_from_field(u0)])
    data_norm_sq = np.dot(b[1], ws.op.mvec * b[1]) + np.dot(b[0], ws.op.mvec * b[0])

    # conjugate residual iteration on the energy-Riesz'd system: minimizes the
    # energy norm of the residual over the Krylov space, so the residual
    # history is non-increasing by construction
    def apply_a(x):
        return ws.riesz(ws.gramian_apply(x))

    e = np.zeros_like(b)
    history = []
    iterations = 0
    converged = True
    if data_norm_sq > 0:
        bt = ws.riesz(b)
        norm_b = np.sqrt(ws.energy_inner(bt, bt))
        r = bt.copy()
        p = r.copy()
        ar = apply_a(r)
        ap = ar.copy()
        gamma = ws.energy_inner(r, ar)
        rel = 1.0
        history.append(rel)
        while rel > cg_tol and iterations < max_iter:
            denom = ws.energy_inner(ap, ap)
            if denom <= 0 or gamma <= 0:
                break
            alpha = gamma / denom
            e += alpha * p
            r -= alpha * ap
            ar = apply_a(r)
            gamma_new = ws.energy_inner(r, ar)
            beta = gamma_new / gamma
            p = r + beta * p
            ap = ar + beta * ap
            gamma = gamma_new
            iterations += 1
            rel = float(np.sqrt(max(ws.energy_inner(r, r), 0.0)) / norm_b)
            history.append(rel)
        converged = rel <= cg_tol

    f, gs, forcing = ws.controls_from_adjoint(e)
    result = ControlResult(
        grid=grid, material=material, spec=spec, weight_g=weight_g,
        times=spec.times, f_samples=f, g_samples=gs,
        gamma_multi_indices=ws.op.gamma_multi_indices,
        forcing=forcing, adjoint_data=e,
        cg_iterations=iterations,
        cg_residual=history[-1] if history else 0.0,
        residual_history=np.array(history),
        converged=converged,
    )
    control_norms(result, grid, spec)

    # forward verification of null control
    start = ElasticState(
        ws.op.field_from_vec(-b[1], boundary=f[0]),
        ws.op.field_from_vec(b[0]),
        time=0.0,
    )
    fwd = solve_controlled(ws.op, start, forcing, spec, reverse=False)
    m = ws.op.mvec
    end_sq = np.dot(fwd.disp[-1], m * fwd.disp[-1]) + np.dot(fwd.vel[-1], m * fwd.vel[-1])
    result.final_state_norm_rel = float(np.sqrt(end_sq / data_norm_sq)) if data_norm_sq > 0 else 0.0
    result.converged = bool(converged and (data_norm_sq == 0 or result.final_state_norm_rel <= tol))
    return result
