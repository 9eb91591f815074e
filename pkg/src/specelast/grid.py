"""Tensor-product LGL grid on (-1,1)^d with index bookkeeping and discrete inner product.

Grid values are stored as ndarrays of shape (N+1,) * d; axis j carries the
x_{j+1} coordinate and C-order flattening gives the lexicographic multi-index
order.  Faces are numbered 1..2d: face j <= d is {x_j = +1}, face j > d is
{x_{j-d} = -1}.  The observation boundary Gamma defaults to the d faces
{x_j = +1}.
"""

from dataclasses import dataclass, field

import numpy as np

from .legendre import LglRule, interp_matrix, lgl_rule


class GridMismatchError(ValueError):
    """Operands live on different grids."""


@dataclass(frozen=True)
class TensorGrid:
    dim: int
    degree: int
    rule: LglRule
    gamma_faces: tuple
    weights_nd: np.ndarray = field(repr=False)
    interior_mask: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return (self.degree + 1,) * self.dim

    @property
    def n_nodes(self):
        return (self.degree + 1) ** self.dim

    @property
    def n_interior(self):
        return (self.degree - 1) ** self.dim

    @property
    def interior_slices(self):
        return (slice(1, self.degree),) * self.dim

    def face_axis_side(self, face):
        """Map face id 1..2d to (axis, side) with side = +1 or -1."""
        if not 1 <= face <= 2 * self.dim:
            raise ValueError(f"face id {face} outside 1..{2 * self.dim}")
        if face <= self.dim:
            return face - 1, +1
        return face - self.dim - 1, -1

    def face_multi_indices(self, face):
        """All (N+1)^(d-1) multi-indices lying on the given face."""
        axis, side = self.face_axis_side(face)
        fixed = self.degree if side > 0 else 0
        ranges = [range(self.degree + 1)] * self.dim
        ranges[axis] = [fixed]
        grids = np.meshgrid(*ranges, indexing="ij")
        return [tuple(int(g[i]) for g in grids) for i in np.ndindex(*grids[0].shape)]

    def interior_multi_indices(self):
        return [idx for idx in np.ndindex(*self.shape) if self.interior_mask[idx]]

    def boundary_multi_indices(self):
        return [idx for idx in np.ndindex(*self.shape) if not self.interior_mask[idx]]

    def node_coords(self, idx):
        return np.array([self.rule.nodes[k] for k in idx])


def tensor_grid(dim, degree, gamma_faces=None):
    """Build a d-dimensional tensor LGL grid (d = 1, 2, 3 supported)."""
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    rule = lgl_rule(degree)
    if gamma_faces is None:
        gamma_faces = tuple(range(1, dim + 1))
    gamma_faces = tuple(sorted(set(int(j) for j in gamma_faces)))
    for j in gamma_faces:
        if not 1 <= j <= 2 * dim:
            raise ValueError(f"gamma face id {j} outside 1..{2 * dim}")

    w = rule.weights
    weights_nd = w.copy()
    for _ in range(dim - 1):
        weights_nd = np.multiply.outer(weights_nd, w)

    interior = np.zeros((degree + 1,) * dim, dtype=bool)
    interior[(slice(1, degree),) * dim] = True

    weights_nd.setflags(write=False)
    interior.setflags(write=False)
    return TensorGrid(
        dim=dim,
        degree=degree,
        rule=rule,
        gamma_faces=gamma_faces,
        weights_nd=weights_nd,
        interior_mask=interior,
    )


@dataclass(frozen=True)
class ScalarGridFn:
    """Nodal values of one polynomial in P_N(Omega)."""

    grid: TensorGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )


def grid_fn_from_callable(grid, f):
    """Sample f(x_1, ..., x_d) at the grid nodes."""
    coords = np.meshgrid(*([grid.rule.nodes] * grid.dim), indexing="ij")
    return ScalarGridFn(grid, np.asarray(f(*coords), dtype=float))


def discrete_inner_product(w, z):
    """(w, z)_N = sum_i w(P_i) z(P_i) omega_i over all grid nodes."""
    if w.grid is not z.grid and (
        w.grid.dim != z.grid.dim or w.grid.degree != z.grid.degree
    ):
        raise GridMismatchError("grid functions live on different grids")
    return float(np.sum(w.values * z.values * w.grid.weights_nd))


def discrete_norm_sq(w):
    return discrete_inner_product(w, w)


def _interp_to_fine(grid, values, fine_degree):
    """Interpolate nodal values to the finer LGL grid, axis by axis."""
    p = interp_matrix(grid.degree, fine_degree)
    out = values
    for axis in range(grid.dim):
        out = np.moveaxis(np.tensordot(p, np.moveaxis(out, axis, 0), axes=(1, 0)), 0, axis)
    return out


def exact_inner_product(grid, a_values, b_values, fine_degree=None):
    """True L2(Omega) inner product of two degree-N interpolants.

    Re-quadrature on an LGL rule of degree >= N + 1, exact for the
    degree-2N integrand.
    """
    fine = fine_degree or grid.degree + 1
    frule = lgl_rule(fine)
    fw = frule.weights
    wnd = fw.copy()
    for _ in range(grid.dim - 1):
        wnd = np.multiply.outer(wnd, fw)
    fa = _interp_to_fine(grid, a_values, fine)
    fb = _interp_to_fine(grid, b_values, fine)
    return float(np.sum(fa * fb * wnd))


def l2_norm_exact(w):
    """|p|_{L2(Omega)} of the degree-N interpolant of w."""
    return float(np.sqrt(max(exact_inner_product(w.grid, w.values, w.values), 0.0)))


def norm_equivalence_report(grid, samples, seed=0):
    """Extremal ratios ||p||_N^2 / |p|_{L2}^2 over random nodal polynomials.

    Both extremes must lie in [1, (2 + 1/N)^d].
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    lo, hi = np.inf, -np.inf
    for _ in range(samples):
        p = ScalarGridFn(grid, rng.standard_normal(grid.shape))
        ratio = discrete_norm_sq(p) / exact_inner_product(grid, p.values, p.values)
        lo = min(lo, ratio)
        hi = max(hi, ratio)
    return lo, hi


def equivalence_upper_bound(grid):
    """(2 + 1/N)^d, the discrete/continuous norm equivalence constant."""
    return (2.0 + 1.0 / grid.degree) ** grid.dim
