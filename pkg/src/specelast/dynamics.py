"""Time integration of the collocation elasticity system and discrete energy.

The homogeneous (adjoint) system evolves the interior nodal values of a
vector polynomial field with zero Dirichlet boundary:  u'' = L u, where L is
the interior restriction of the collocation Lame operator.  Multiplying by
the tensor quadrature weights yields the equivalent form M u'' = -K u with M
diagonal positive and K symmetric positive definite, so the default implicit
Newmark scheme (beta = 1/4, gamma = 1/2, the trapezoidal rule) conserves the
discrete energy exactly up to linear-solver roundoff.

The controlled system adds time-dependent Dirichlet data on the control
boundary and an interior source realized by the boundary lifting:
M u'' = -K u + M (L_g f(t) + G(t)).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .fields import (
    Material,
    VectorField,
    axis_derivative,
    divergence,
    lame_apply,
)
from .grid import TensorGrid


class InstabilityError(RuntimeError):
    """Explicit time integration blew up (energy growth beyond 10x initial)."""


class ForcingMismatchError(ValueError):
    """Boundary forcing is not sampled on the integrator's time grid."""


@dataclass(frozen=True)
class TimeGridSpec:
    """Final time, step and scheme.  dt is adjusted downward so T/dt is integer."""

    T: float
    dt: float
    scheme: str = "newmark"

    def __post_init__(self):
        if self.T <= 0 or self.dt <= 0:
            raise ValueError("T and dt must be positive")
        if self.scheme not in ("newmark", "rk4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def n_steps(self):
        return int(np.ceil(self.T / self.dt - 1e-12))

    @property
    def dt_effective(self):
        return self.T / self.n_steps

    @property
    def times(self):
        return np.linspace(0.0, self.T, self.n_steps + 1)


@dataclass(frozen=True)
class ElasticState:
    displacement: VectorField
    velocity: VectorField
    time: float = 0.0

    def __post_init__(self):
        if self.displacement.grid is not self.velocity.grid:
            if (self.displacement.grid.dim != self.velocity.grid.dim
                    or self.displacement.grid.degree != self.velocity.grid.degree):
                raise ValueError("displacement and velocity live on different grids")

    @property
    def grid(self):
        return self.displacement.grid


@dataclass(frozen=True)
class BoundaryForcing:
    """Sampled Dirichlet data on the control boundary plus lifted interior sources.

    dirichlet has shape (n_times, n_gamma_dofs) in the operator's control-dof
    order; interior_source has shape (n_times, n_interior_dofs) and holds the
    summed lifted face controls G(t, P_i) at interior nodes.
    """

    times: np.ndarray
    dirichlet: np.ndarray
    interior_source: np.ndarray

    def __post_init__(self):
        n = self.times.size
        if self.dirichlet.shape[0] != n or self.interior_source.shape[0] != n:
            raise ForcingMismatchError("forcing sample counts disagree with the time grid")
        dts = np.diff(self.times)
        if n > 1 and not np.allclose(dts, dts[0], rtol=1e-10, atol=1e-14):
            raise ForcingMismatchError("forcing must be sampled on a uniform time grid")


# --------------------------------------------------------------------------
# operator assembly


def _kron_chain(mats):
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


class ElasticOperator:
    """Assembled interior collocation machinery for one (grid, material) pair.

    Interior dofs are component-major: vec = [u_1 interior..., u_d interior...]
    with C-order raveling of the interior block.  Control dofs run over the
    Gamma nodes in flattened full-grid order, also component-major.
    """

    def __init__(self, grid: TensorGrid, material: Material):
        self.grid = grid
        self.material = material
        d, n = grid.dim, grid.degree
        rule = grid.rule
        lam, mu = material.lam, material.mu
        eye = np.eye(n + 1)

        def chain(slot_ops):
            mats = [eye] * d
            for axis, op in slot_ops:
                mats[axis] = op if mats[axis] is eye else mats[axis] @ op
            return _kron_chain(mats)

        lap = sum(chain([(l, rule.diff2)]) for l in range(d))
        blocks = []
        for c in range(d):
            row = []
            for j in range(d):
                if c == j:
                    b = mu * lap + (lam + mu) * chain([(c, rule.diff2)])
                else:
                    b = (lam + mu) * chain([(c, rule.diff1), (j, rule.diff1)])
                row.append(b)
            blocks.append(row)
        full = np.block(blocks)

        npts = grid.n_nodes
        fmask = grid.interior_mask.ravel()
        int_idx = np.flatnonzero(fmask)
        self._int_idx = int_idx
        ii = np.concatenate([int_idx + c * npts for c in range(d)])

        # Gamma nodes: boundary nodes on at least one configured control face
        gmask = np.zeros(grid.shape, dtype=bool)
        for j in grid.gamma_faces:
            axis, side = grid.face_axis_side(j)
            sl = [slice(None)] * d
            sl[axis] = n if side > 0 else 0
            gmask[tuple(sl)] = True
        gsel = np.flatnonzero(gmask.ravel())
        self.gamma_flat_nodes = gsel
        gg = np.concatenate([gsel + c * npts for c in range(d)])

        self.L = full[np.ix_(ii, ii)]
        self.gamma_coupling = full[np.ix_(ii, gg)]

        wint = grid.weights_nd.ravel()[int_idx]
        self.mvec = np.tile(wint, d)
        K = -(self.mvec[:, None] * self.L)
        defect = np.max(np.abs(K - K.T)) / max(np.max(np.abs(K)), 1e-300)
        if defect > 1e-10:
            raise RuntimeError(f"stiffness asymmetry {defect:.2e} exceeds roundoff budget")
        self.K = 0.5 * (K + K.T)

        # surface weight per Gamma node: (d-1)-dim tensor weight summed over
        # the incident control faces (nodes shared by two faces count twice)
        w1 = rule.weights
        gw = np.zeros(gsel.size)
        multi = np.array(np.unravel_index(gsel, grid.shape)).T
        for j in grid.gamma_faces:
            axis, side = grid.face_axis_side(j)
            fixed = n if side > 0 else 0
            on_face = multi[:, axis] == fixed
            tang = [a for a in range(d) if a != axis]
            fw = np.ones(gsel.size)
            for a in tang:
                fw *= w1[multi[:, a]]
            gw[on_face] += fw[on_face] if tang else 1.0
        self.gamma_weights = np.tile(gw, d)
        self.gamma_multi_indices = [tuple(int(v) for v in row) for row in multi]

        self.n_interior = ii.size
        self.n_gamma = gg.size
        self._newmark_cache = {}
        self._stiffness_factor = None
        self._omega_max = None

    # -- conversions -------------------------------------------------------

    def vec_from_field(self, vf: VectorField):
        sl = self.grid.interior_slices
        return np.concatenate([vf.values[c][sl].ravel() for c in range(self.grid.dim)])

    def field_from_vec(self, vec, boundary=None):
        """Zero-extend interior dofs; optional boundary values on Gamma dofs."""
        d = self.grid.dim
        npts = self.grid.n_nodes
        out = np.zeros((d, npts))
        per = vec.reshape(d, -1)
        for c in range(d):
            out[c, self._int_idx] = per[c]
        if boundary is not None:
            bper = boundary.reshape(d, -1)
            for c in range(d):
                out[c, self.gamma_flat_nodes] = bper[c]
        return VectorField(self.grid, out.reshape((d,) + self.grid.shape))

    def interior_values(self, vec):
        return vec.reshape(self.grid.dim, *((self.grid.degree - 1,) * self.grid.dim))

    # -- linear algebra ----------------------------------------------------

    def newmark_factor(self, dt):
        key = round(dt, 15)
        if key not in self._newmark_cache:
            self._newmark_cache[key] = cho_factor(
                np.diag(self.mvec) + 0.25 * dt * dt * self.K, lower=False
            )
        return self._newmark_cache[key]

    def spectral_basis(self):
        """Modal decomposition of M^{-1/2} K M^{-1/2}; cached.

        Returns (omega_sq, modes) with modes orthonormal, so that
        u = M^{-1/2} modes @ u_hat diagonalizes the dynamics.
        """
        if getattr(self, "_spectral", None) is None:
            from scipy.linalg import eigh

            sqrtm = np.sqrt(self.mvec)
            s = self.K / sqrtm[:, None] / sqrtm[None, :]
            omega_sq, modes = eigh(0.5 * (s + s.T))
            self._spectral = (np.maximum(omega_sq, 0.0), modes)
        return self._spectral

    def stiffness_solve(self, rhs):
        if self._stiffness_factor is None:
            self._stiffness_factor = cho_factor(self.K, lower=False)
        return cho_solve(self._stiffness_factor, rhs)

    def energy_pair(self, u, v):
        """E = (v' M v + u' K u) / 2 for interior dof vectors."""
        return 0.5 * (np.dot(v, self.mvec * v) + np.dot(u, self.K @ u))

    def max_frequency(self, iterations=60, seed=0):
        """sqrt of the largest eigenvalue of M^{-1} K by power iteration."""
        if self._omega_max is None:
            rng = np.random.default_rng(seed)
            z = rng.standard_normal(self.n_interior)
            lam = 0.0
            for _ in range(iterations):
                z = (self.K @ z) / self.mvec
                nz = np.linalg.norm(z)
                z /= nz
                lam = np.dot(z, (self.K @ z) / self.mvec)
            self._omega_max = float(np.sqrt(lam))
        return self._omega_max

    def rk4_stable_dt(self):
        return 2.0 * np.sqrt(2.0) / self.max_frequency()


_OPERATOR_CACHE = {}


def elastic_operator(grid: TensorGrid, material: Material):
    """Build or reuse the assembled operator; grids with equal parameters share it."""
    key = (grid.dim, grid.degree, grid.gamma_faces, material.lam, material.mu)
    op = _OPERATOR_CACHE.get(key)
    if op is None:
        op = ElasticOperator(grid, material)
        _OPERATOR_CACHE[key] = op
    return op


# --------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """Dense storage of one integration: interior dofs at every step."""

    op: ElasticOperator
    times: np.ndarray
    disp: np.ndarray
    vel: np.ndarray
    forcing: BoundaryForcing = None
    energies: np.ndarray = field(default=None)

    @property
    def n_times(self):
        return self.times.size

    def boundary_values(self, i):
        if self.forcing is None:
            return None
        return self.forcing.dirichlet[i]

    def _boundary_velocity(self, i):
        """Second-order finite difference of the Dirichlet samples in time."""
        f = self.forcing.dirichlet
        dt = self.times[1] - self.times[0]
        n = self.n_times
        if n < 3:
            return np.zeros_like(f[i])
        if i == 0:
            return (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dt)
        if i == n - 1:
            return (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * dt)
        return (f[i + 1] - f[i - 1]) / (2 * dt)

    def state(self, i) -> ElasticState:
        bd = self.boundary_values(i)
        u = self.op.field_from_vec(self.disp[i], boundary=bd)
        bv = self._boundary_velocity(i) if self.forcing is not None else None
        v = self.op.field_from_vec(self.vel[i], boundary=bv)
        return ElasticState(u, v, time=float(self.times[i]))

    def export_csv(self, path, material):
        import csv

        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "energy", "drift_rel", "disp_l2_sq", "vel_l2_sq"])
            e0 = None
            for i in range(self.n_times):
                u, v = self.disp[i], self.vel[i]
                e = self.op.energy_pair(u, v) if self.forcing is None else \
                    discrete_energy(self.state(i), material)
                if e0 is None:
                    e0 = e
                drift = abs(e - e0) / e0 if e0 > 0 else 0.0
                wr.writerow([f"{self.times[i]:.17e}", f"{e:.17e}", f"{drift:.17e}",
                             f"{np.dot(u, self.op.mvec * u):.17e}",
                             f"{np.dot(v, self.op.mvec * v):.17e}"])


# --------------------------------------------------------------------------
# integrators


# interior sizes at or above this use the diagonalized Newmark propagator,
# which replaces per-step dense solves with a few BLAS-3 transforms
SPECTRAL_MIN_DOFS = 600


def _newmark_run(op, u0, v0, rsamples, dt, n_steps, store=True, store_vel=True):
    """Trapezoidal-rule run: M u'' = -K u + M r(t) with endpoint sampling of r."""
    if op.n_interior >= SPECTRAL_MIN_DOFS:
        return _newmark_run_spectral(op, u0, v0, rsamples, dt, n_steps,
                                     store=store, store_vel=store_vel)
    factor = op.newmark_factor(dt)
    u, v = u0.copy(), v0.copy()
    r0 = rsamples[0] if rsamples is not None else None
    a = op.L @ u + (r0 if r0 is not None else 0.0)
    if store:
        us = np.empty((n_steps + 1, u.size))
        vs = np.empty_like(us) if store_vel else None
        us[0] = u
        if store_vel:
            vs[0] = v
    qdt2 = 0.25 * dt * dt
    for nstep in range(n_steps):
        ustar = u + dt * v + qdt2 * a
        rhs = -(op.K @ ustar)
        if rsamples is not None:
            rhs = rhs + op.mvec * rsamples[nstep + 1]
        anew = cho_solve(factor, rhs)
        u = ustar + qdt2 * anew
        v = v + 0.5 * dt * (a + anew)
        a = anew
        if store:
            us[nstep + 1] = u
            if store_vel:
                vs[nstep + 1] = v
    if store:
        return us, vs
    return u, v


def _newmark_run_spectral(op, u0, v0, rsamples, dt, n_steps, store=True,
                          store_vel=True):
    """Same trapezoidal recurrence, advanced mode by mode in the basis that
    diagonalizes the dynamics; algebraically identical to the dense path."""
    omega_sq, modes = op.spectral_basis()
    sqrtm = np.sqrt(op.mvec)
    uh = modes.T @ (sqrtm * u0)
    vh = modes.T @ (sqrtm * v0)
    rh = (rsamples * sqrtm[None, :]) @ modes if rsamples is not None else None
    a = -omega_sq * uh + (rh[0] if rh is not None else 0.0)
    if store:
        us_h = np.empty((n_steps + 1, uh.size))
        vs_h = np.empty_like(us_h) if store_vel else None
        us_h[0] = uh
        if store_vel:
            vs_h[0] = vh
    qdt2 = 0.25 * dt * dt
    denom = 1.0 + qdt2 * omega_sq
    for nstep in range(n_steps):
        ustar = uh + dt * vh + qdt2 * a
        rhs = -omega_sq * ustar
        if rh is not None:
            rhs = rhs + rh[nstep + 1]
        anew = rhs / denom
        uh = ustar + qdt2 * anew
        vh = vh + 0.5 * dt * (a + anew)
        a = anew
        if store:
            us_h[nstep + 1] = uh
            if store_vel:
                vs_h[nstep + 1] = vh
    if store:
        us = (us_h @ modes.T) / sqrtm[None, :]
        vs = (vs_h @ modes.T) / sqrtm[None, :] if store_vel else None
        return us, vs
    return (modes @ uh) / sqrtm, (modes @ vh) / sqrtm


def _rk4_run(op, u0, v0, rsamples, dt, n_steps, store=True):
    """Classical RK4 on the first-order system; forcing interpolated linearly."""
    limit = op.rk4_stable_dt()
    u, v = u0.copy(), v0.copy()
    e0 = op.energy_pair(u, v)
    if store:
        us = np.empty((n_steps + 1, u.size))
        vs = np.empty_like(us)
        us[0], vs[0] = u, v

    def rhs_at(t_idx_frac):
        if rsamples is None:
            return None
        lo = int(np.floor(t_idx_frac))
        hi = min(lo + 1, n_steps)
        th = t_idx_frac - lo
        return (1 - th) * rsamples[lo] + th * rsamples[hi]

    def accel(uu, ridx):
        r = rhs_at(ridx)
        a = op.L @ uu
        return a + r if r is not None else a

    for nstep in range(n_steps):
        k1u, k1v = v, accel(u, nstep)
        k2u, k2v = v + 0.5 * dt * k1v, accel(u + 0.5 * dt * k1u, nstep + 0.5)
        k3u, k3v = v + 0.5 * dt * k2v, accel(u + 0.5 * dt * k2u, nstep + 0.5)
        k4u, k4v = v + dt * k3v, accel(u + dt * k3u, nstep + 1.0)
        u = u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if store:
            us[nstep + 1], vs[nstep + 1] = u, v
        if e0 > 0 and (nstep % 10 == 9 or nstep == n_steps - 1):
            if op.energy_pair(u, v) > 10.0 * e0:
                raise InstabilityError(
                    f"rk4 energy grew past 10x initial at step {nstep + 1} "
                    f"(dt={dt:.3g}, stability limit {limit:.3g})"
                )
    if store:
        return us, vs
    return u, v


def solve_adjoint(op: ElasticOperator, state: ElasticState, spec: TimeGridSpec,
                  store=True) -> Trajectory:
    """Integrate the homogeneous zero-Dirichlet system over [time, time + T]."""
    u0 = op.vec_from_field(state.displacement)
    v0 = op.vec_from_field(state.velocity)
    dt, n = spec.dt_effective, spec.n_steps
    runner = _newmark_run if spec.scheme == "newmark" else _rk4_run
    out = runner(op, u0, v0, None, dt, n, store=store)
    if store:
        us, vs = out
        return Trajectory(op, state.time + spec.times, us, vs)
    u, v = out
    return Trajectory(op, np.array([state.time + spec.T]), u[None, :], v[None, :])


def solve_controlled(op: ElasticOperator, state: ElasticState, forcing: BoundaryForcing,
                     spec: TimeGridSpec, reverse=False) -> Trajectory:
    """Integrate the boundary-controlled system forward, or backward from t = T.

    With reverse=True the given state is the condition at t = T and the
    returned trajectory still runs over increasing time, so index 0 holds the
    reconstructed state at t = 0.
    """
    dt, n = spec.dt_effective, spec.n_steps
    if forcing.times.size != n + 1:
        raise ForcingMismatchError(
            f"forcing has {forcing.times.size} samples, integrator needs {n + 1}"
        )
    rs = forcing.interior_source + (forcing.dirichlet @ op.gamma_coupling.T)
    u0 = op.vec_from_field(state.displacement)
    v0 = op.vec_from_field(state.velocity)
    runner = _newmark_run if spec.scheme == "newmark" else _rk4_run
    if not reverse:
        us, vs = runner(op, u0, v0, rs, dt, n, store=True)
        return Trajectory(op, spec.times, us, vs, forcing=forcing)
    # integrate in tau = T - t with flipped velocity and reversed samples
    us, vs = runner(op, u0, -v0, rs[::-1], dt, n, store=True)
    return Trajectory(op, spec.times, us[::-1], -vs[::-1], forcing=forcing)


# --------------------------------------------------------------------------
# spec-level single-step operations and diagnostics


def step_adjoint(state: ElasticState, material: Material, spec: TimeGridSpec) -> ElasticState:
    """Advance the homogeneous system by one step; boundary stays exactly zero."""
    op = elastic_operator(state.grid, material)
    one = TimeGridSpec(spec.dt_effective, spec.dt_effective, spec.scheme)
    traj = solve_adjoint(op, state, one)
    out = traj.state(1)
    return ElasticState(out.displacement, out.velocity, time=state.time + spec.dt_effective)


def step_controlled(state: ElasticState, material: Material, forcing: BoundaryForcing,
                    spec: TimeGridSpec, reverse=False) -> ElasticState:
    """Advance the controlled system by one step from the state's current time."""
    op = elastic_operator(state.grid, material)
    dt = spec.dt_effective
    times = forcing.times
    i = int(round((state.time - times[0]) / dt))
    j = i - 1 if reverse else i + 1
    if not (0 <= i < times.size and 0 <= j < times.size):
        raise ForcingMismatchError("state time is outside the forcing sample range")
    lo, hi = (j, i) if reverse else (i, j)
    sub = BoundaryForcing(times[lo:hi + 1], forcing.dirichlet[lo:hi + 1],
                          forcing.interior_source[lo:hi + 1])
    one = TimeGridSpec(dt, dt, spec.scheme)
    traj = solve_controlled(op, state, sub, one, reverse=reverse)
    out = traj.state(0 if reverse else 1)
    t_new = state.time - dt if reverse else state.time + dt
    return ElasticState(out.displacement, out.velocity, time=t_new)


def discrete_energy(state: ElasticState, material: Material):
    """E = (||u_t||_N^2 + mu ||grad u||_N^2 + (lam+mu) ||div u||_N^2) / 2.

    All norms are full-grid discrete quadrature norms; valid for controlled
    states with nonzero boundary values as well.
    """
    grid = state.grid
    w = grid.weights_nd
    uv, vv = state.displacement.values, state.velocity.values
    e = float(np.sum(vv * vv * w))
    for c in range(grid.dim):
        for j in range(grid.dim):
            dj = axis_derivative(grid, uv[c], j)
            e += material.mu * float(np.sum(dj * dj * w))
    dv = divergence(grid, uv)
    e += (material.lam + material.mu) * float(np.sum(dv * dv * w))
    return 0.5 * e


def interior_residual(state: ElasticState, accel: VectorField, material: Material):
    """max over interior nodes of |accel - Lame(u)|, the integrator self-check."""
    res = accel.values - lame_apply(material, state.displacement).values
    sl = (slice(None),) + state.grid.interior_slices
    return float(np.max(np.abs(res[sl])))
