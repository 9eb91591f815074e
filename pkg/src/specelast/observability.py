"""Boundary observability reports and multiplier diagnostics.

For a trajectory of the homogeneous system, the report accumulates the two
boundary terms of the discrete observability inequality: the squared traction
integral over the observation boundary Gamma and the squared second-normal
term over the whole boundary, both against twice the (conserved) initial
energy.  The multiplier diagnostics evaluate the quantities appearing in the
inequality's proof-by-multipliers: the cross terms X and Y built from
m(x) = x - x0 with x0 = (-1, ..., -1), the interior energy integral, the
boundary flux, and the coupling against the boundary-node residual field.
"""

from dataclasses import dataclass

import numpy as np

from .control import hum_workspace
from .dynamics import (
    ElasticState,
    TimeGridSpec,
    Trajectory,
    elastic_operator,
    solve_adjoint,
)
from .fields import (
    Material,
    VectorField,
    axis_derivative,
    divergence,
    face_l2_norm_sq,
    lame_apply,
    second_normal_term,
    traction,
)
from .grid import TensorGrid
from .legendre import interp_matrix, lgl_rule


def uniform_time_threshold(dim, degree, mu):
    """Minimal time 4 sqrt(d) (2 + 1/N)^d / sqrt(mu) for the uniform estimate."""
    return 4.0 * np.sqrt(dim) * (2.0 + 1.0 / degree) ** dim / np.sqrt(mu)


def random_state(grid, seed=0, velocity=True):
    """Standard-normal interior nodal data with zero boundary values."""
    rng = np.random.default_rng(seed)
    d = grid.dim
    disp = np.zeros((d,) + grid.shape)
    vel = np.zeros_like(disp)
    sl = (slice(None),) + grid.interior_slices
    disp[sl] = rng.standard_normal(disp[sl].shape)
    if velocity:
        vel[sl] = rng.standard_normal(vel[sl].shape)
    return ElasticState(VectorField(grid, disp), VectorField(grid, vel))


@dataclass(frozen=True)
class ObservabilityReport:
    lhs_norm_sq: float
    term_traction: float
    term_second: float
    ratio: float
    T: float
    N: int
    threshold: float


def observe_trajectory(initial: ElasticState, material: Material,
                       spec: TimeGridSpec, grid: TensorGrid = None,
                       return_trajectory=False):
    """Integrate the homogeneous system and report the observability terms.

    The left side is twice the initial discrete energy; boundary integrals use
    exact face quadrature in space and the trapezoid rule in time.  With
    return_trajectory=True the stored trajectory rides along for diagnostics.
    """
    grid = grid or initial.grid
    op = elastic_operator(grid, material)
    traj = solve_adjoint(op, initial, spec)
    dt = spec.dt_effective
    e0 = op.energy_pair(traj.disp[0], traj.vel[0])

    trac = np.empty(traj.n_times)
    second = np.empty(traj.n_times)
    for i in range(traj.n_times):
        u = op.field_from_vec(traj.disp[i])
        trac[i] = sum(face_l2_norm_sq(traction(material, u, j)) for j in grid.gamma_faces)
        second[i] = sum(face_l2_norm_sq(second_normal_term(material, u, j))
                        for j in range(1, 2 * grid.dim + 1))
    term_traction = _trapezoid(trac, dt)
    term_second = _trapezoid(second, dt)
    lhs = 2.0 * e0
    ratio = (term_traction + term_second) / lhs if lhs > 0 else float("nan")
    report = ObservabilityReport(
        lhs_norm_sq=lhs, term_traction=term_traction, term_second=term_second,
        ratio=ratio, T=spec.T, N=grid.degree,
        threshold=uniform_time_threshold(grid.dim, grid.degree, material.mu),
    )
    if return_trajectory:
        return report, traj
    return report


def _trapezoid(samples, dt):
    return float(np.trapezoid(samples, dx=dt)) if hasattr(np, "trapezoid") \
        else float(np.trapz(samples, dx=dt))


# --------------------------------------------------------------------------
# multiplier diagnostics


@dataclass(frozen=True)
class MultiplierDiagnostics:
    """Quantities from the multiplier identity m(x) = x - x0, x0 = (-1,...,-1).

    X and Y are the endpoint cross terms int phi_t . m_j d_j phi and
    int phi_t . phi evaluated at T minus at 0; cross_term = |X + (d-1)/2 Y|
    must stay below cross_term_bound = 4 sqrt(d)/sqrt(mu) E(0).  chain_slack
    is the margin of the full inequality
    interior_energy <= cross_term + sqrt(d) * boundary_flux + source_coupling.
    """

    X: float
    Y: float
    interior_energy_integral: float
    boundary_flux_integral: float
    source_coupling_integral: float
    chain_slack: float
    cross_term: float
    cross_term_bound: float
    cross_term_slack: float
    energy0: float


class _FineQuad:
    """Fine-grid (degree N+1) interpolation and exact volume/face quadrature."""

    def __init__(self, grid):
        self.grid = grid
        self.fine = grid.degree + 1
        self.p = interp_matrix(grid.degree, self.fine)
        frule = lgl_rule(self.fine)
        self.fnodes = frule.nodes
        w = frule.weights
        wnd = w.copy()
        for _ in range(grid.dim - 1):
            wnd = np.multiply.outer(wnd, w)
        self.wnd = wnd
        self.wface = None
        if grid.dim >= 2:
            wf = w.copy()
            for _ in range(grid.dim - 2):
                wf = np.multiply.outer(wf, w)
            self.wface = wf

    def lift(self, values):
        out = values
        for axis in range(self.grid.dim):
            out = np.moveaxis(np.tensordot(self.p, np.moveaxis(out, axis, 0),
                                           axes=(1, 0)), 0, axis)
        return out

    def integrate(self, fine_values):
        return float(np.sum(fine_values * self.wnd))


def multiplier_diagnostics(trajectory: Trajectory, material: Material,
                           grid: TensorGrid = None) -> MultiplierDiagnostics:
    """Evaluate the multiplier-method quantities along a stored trajectory."""
    op = trajectory.op
    grid = grid or op.grid
    d = grid.dim
    lam, mu = material.lam, material.mu
    fq = _FineQuad(grid)
    dt = float(trajectory.times[1] - trajectory.times[0])
    n_t = trajectory.n_times

    mcoord = []
    for j in range(d):
        shape = [1] * d
        shape[j] = fq.fnodes.size
        mcoord.append((fq.fnodes + 1.0).reshape(shape))

    def endpoint_terms(i):
        """(V, W) with V = int phi_t . m_j d_j phi and W = int phi_t . phi."""
        u = op.field_from_vec(trajectory.disp[i]).values
        v = op.field_from_vec(trajectory.vel[i]).values
        vv, ww = 0.0, 0.0
        for c in range(d):
            fv = fq.lift(v[c])
            fu = fq.lift(u[c])
            ww += fq.integrate(fv * fu)
            for j in range(d):
                fdj = fq.lift(axis_derivative(grid, u[c], j))
                vv += fq.integrate(fv * mcoord[j] * fdj)
        return vv, ww

    v_t0, w_t0 = endpoint_terms(0)
    v_tT, w_tT = endpoint_terms(n_t - 1)
    x_val = v_tT - v_t0
    y_val = w_tT - w_t0

    interior = np.empty(n_t)
    boundary = np.empty(n_t)
    coupling = np.empty(n_t)
    for i in range(n_t):
        u = op.field_from_vec(trajectory.disp[i])
        v = op.field_from_vec(trajectory.vel[i])
        uv = u.values
        div = divergence(grid, uv)
        acc = 0.0
        for c in range(d):
            fv = fq.lift(v.values[c])
            acc += fq.integrate(fv * fv)
            for j in range(d):
                fdj = fq.lift(axis_derivative(grid, uv[c], j))
                acc += mu * fq.integrate(fdj * fdj)
        fdiv = fq.lift(div)
        acc += (lam + mu) * fq.integrate(fdiv * fdiv)
        interior[i] = 0.5 * acc

        # the multiplier m(x) = x - x0 with x0 = (-1,...,-1) pairs with the
        # d faces {x_j = +1} regardless of the configured observation set
        flux = 0.0
        for face in range(1, d + 1):
            axis, side = grid.face_axis_side(face)
            end = -1 if side > 0 else 0
            for c in range(d):
                dn = axis_derivative(grid, uv[c], axis)
                flux += mu * _face_sq(fq, grid, dn, axis, end)
            flux += (lam + mu) * _face_sq(fq, grid, div, axis, end)
        boundary[i] = flux

        # boundary-node residual field: interpolant of -Lame(u) at boundary nodes
        res = -lame_apply(material, u).values
        sl = (slice(None),) + grid.interior_slices
        res[sl] = 0.0
        cpl = 0.0
        for c in range(d):
            fr = fq.lift(res[c])
            for j in range(d):
                fdj = fq.lift(axis_derivative(grid, uv[c], j))
                cpl += fq.integrate(fr * mcoord[j] * fdj)
        coupling[i] = cpl

    interior_int = _trapezoid(interior, dt)
    boundary_int = _trapezoid(boundary, dt)
    coupling_int = abs(_trapezoid(coupling, dt))

    e0 = op.energy_pair(trajectory.disp[0], trajectory.vel[0])
    cross_term = abs(x_val + 0.5 * (d - 1) * y_val)
    cross_term_bound = 4.0 * np.sqrt(d) / np.sqrt(mu) * e0
    chain_rhs = cross_term + np.sqrt(d) * boundary_int + coupling_int
    return MultiplierDiagnostics(
        X=x_val, Y=y_val,
        interior_energy_integral=interior_int,
        boundary_flux_integral=boundary_int,
        source_coupling_integral=coupling_int,
        chain_slack=chain_rhs - interior_int,
        cross_term=cross_term,
        cross_term_bound=cross_term_bound,
        cross_term_slack=cross_term_bound - cross_term,
        energy0=e0,
    )


def _face_sq(fq, grid, scalar_values, axis, end):
    """Exact integral of the squared face restriction of a scalar grid field."""
    if grid.dim == 1:
        return float(scalar_values[end] ** 2)
    face = np.take(scalar_values, end, axis=axis)
    v = face
    for a in range(grid.dim - 1):
        v = np.moveaxis(np.tensordot(fq.p, np.moveaxis(v, a, 0), axes=(1, 0)), 0, a)
    return float(np.sum(v * v * fq.wface))


# --------------------------------------------------------------------------
# worst-case observability ratio via the Gramian


@dataclass
class WorstCaseResult:
    ratio: float
    argmin_data: ElasticState
    history: np.ndarray


def worst_case_ratio(grid: TensorGrid, material: Material, spec: TimeGridSpec,
                     iterations=200, weight_g=1.0, seed=0,
                     stagnation=1e-12) -> WorstCaseResult:
    """Smallest Rayleigh quotient of the observation Gramian in the energy
    inner product, estimated by Lanczos iteration with full
    reorthogonalization.

    The smallest Ritz value over nested Krylov spaces is monotone
    non-increasing in the iteration budget; each iteration costs one Gramian
    application (one forward and one backward integration).
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    ws = hum_workspace(grid, material, spec, weight_g)
    n = ws.op.n_interior
    rng = np.random.default_rng(seed)

    def apply_a(x):
        return ws.riesz(ws.gramian_apply(x))

    q = rng.standard_normal((2, n))
    q /= np.sqrt(ws.energy_inner(q, q))
    basis = [q]
    alphas, betas = [], []
    history = []
    best = np.inf
    best_coeff = None
    stall = 0
    for j in range(min(iterations, 2 * n)):
        w = apply_a(basis[j])
        if j > 0:
            w -= betas[j - 1] * basis[j - 1]
        alpha = ws.energy_inner(w, basis[j])
        w -= alpha * basis[j]
        # full reorthogonalization keeps the Ritz values trustworthy
        for u in basis:
            w -= ws.energy_inner(u, w) * u
        alphas.append(alpha)

        tri = np.diag(alphas)
        for k, b in enumerate(betas):
            tri[k, k + 1] = tri[k + 1, k] = b
        evals, evecs = np.linalg.eigh(tri)
        cur = float(evals[0])
        improvement = best - cur
        if cur < best:
            best = cur
            best_coeff = evecs[:, 0].copy()
        history.append(best)
        if j > 5 and improvement < stagnation * max(abs(best), 1e-300):
            stall += 1
        else:
            stall = 0
        beta = np.sqrt(max(ws.energy_inner(w, w), 0.0))
        if stall >= 5 or beta < 1e-14:
            break
        betas.append(beta)
        basis.append(w / beta)

    vec = sum(best_coeff[k] * basis[k] for k in range(len(best_coeff)))
    vec /= np.sqrt(max(ws.energy_inner(vec, vec), 1e-300))
    return WorstCaseResult(ratio=best, argmin_data=ws.state_from_pair(vec),
                           history=np.array(history))
