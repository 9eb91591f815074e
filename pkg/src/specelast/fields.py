"""Vector-valued grid fields and the spatial operators of linear elastodynamics.

All derivatives are tensor contractions of 1-d differentiation matrices along
one axis at a time; pure second derivatives use the dedicated second-derivative
matrix, mixed ones use two first-derivative contractions.
"""

from dataclasses import dataclass

import numpy as np

from .grid import TensorGrid, GridMismatchError
from .legendre import interp_matrix, lgl_rule


@dataclass(frozen=True)
class Material:
    """Isotropic material: lam is the first Lame parameter, mu the shear modulus."""

    lam: float
    mu: float

    def __post_init__(self):
        if self.lam <= 0 or self.mu <= 0:
            raise ValueError(f"Lame parameters must be positive, got lam={self.lam}, mu={self.mu}")


@dataclass(frozen=True)
class VectorField:
    """d displacement components sampled on one grid, shape (d,) + grid.shape."""

    grid: TensorGrid
    values: np.ndarray

    def __post_init__(self):
        want = (self.grid.dim,) + self.grid.shape
        if self.values.shape != want:
            raise GridMismatchError(f"values shape {self.values.shape} != {want}")

    @staticmethod
    def zeros(grid):
        return VectorField(grid, np.zeros((grid.dim,) + grid.shape))

    @staticmethod
    def from_callable(grid, components):
        coords = np.meshgrid(*([grid.rule.nodes] * grid.dim), indexing="ij")
        vals = np.stack([np.broadcast_to(np.asarray(f(*coords), dtype=float), grid.shape)
                         for f in components])
        return VectorField(grid, vals.astype(float))


@dataclass(frozen=True)
class FaceTrace:
    """d-component nodal values on one face, shape (d,) + (N+1,)*(d-1)."""

    grid: TensorGrid
    face: int
    values: np.ndarray

    def __post_init__(self):
        want = (self.grid.dim,) + (self.grid.degree + 1,) * (self.grid.dim - 1)
        if self.values.shape != want:
            raise GridMismatchError(f"trace shape {self.values.shape} != {want}")


def axis_derivative(grid, values, axis, order=1):
    """Contract diff1 (order=1) or diff2 (order=2) along one grid axis."""
    d = grid.rule.diff1 if order == 1 else grid.rule.diff2
    return np.moveaxis(np.tensordot(d, np.moveaxis(values, axis, 0), axes=(1, 0)), 0, axis)


def divergence(grid, values):
    """div u = sum_j d_j u_j for component-stacked values (d,) + shape."""
    return sum(axis_derivative(grid, values[j], j) for j in range(grid.dim))


def gradient(grid, scalar_values):
    """All first derivatives of one scalar field, stacked on a new axis."""
    return np.stack([axis_derivative(grid, scalar_values, j) for j in range(grid.dim)])


def lame_apply(m, u):
    """mu * Laplacian(u) + (lam + mu) * grad(div u) at every grid node."""
    grid = u.grid
    d = grid.dim
    out = np.zeros_like(u.values)
    for c in range(d):
        lap = sum(axis_derivative(grid, u.values[c], j, order=2) for j in range(d))
        # grad(div u)_c = d_c^2 u_c + sum_{j != c} d_c d_j u_j
        gd = axis_derivative(grid, u.values[c], c, order=2)
        for j in range(d):
            if j != c:
                gd = gd + axis_derivative(grid, axis_derivative(grid, u.values[j], j), c)
        out[c] = m.mu * lap + (m.lam + m.mu) * gd
    return VectorField(grid, out)


def _face_slice(values, axis, side):
    """Restrict an array with a leading component axis to one face."""
    index = [slice(None)] * values.ndim
    index[1 + axis] = -1 if side > 0 else 0
    return values[tuple(index)]


def traction(m, u, face):
    """mu du/dnu + (lam + mu) nu (div u) on face nodes; nu is the outward normal."""
    grid = u.grid
    axis, side = grid.face_axis_side(face)
    dn = np.stack([axis_derivative(grid, u.values[c], axis) for c in range(grid.dim)])
    vals = m.mu * side * _face_slice(dn, axis, side)
    div_face = _face_slice(divergence(grid, u.values)[None], axis, side)[0]
    vals[axis] += (m.lam + m.mu) * side * div_face
    return FaceTrace(grid, face, vals)


def second_normal_term(m, u, face):
    """mu d^2u/dnu^2 + (lam + mu) nu d(div u)/dnu on face nodes.

    The second normal derivative is sign-independent; the normal component
    picks up nu_j * (d_j div u) * sign = d_j div u regardless of the side.
    """
    grid = u.grid
    axis, side = grid.face_axis_side(face)
    d2 = np.stack([axis_derivative(grid, u.values[c], axis, order=2) for c in range(grid.dim)])
    vals = m.mu * _face_slice(d2, axis, side)
    ddiv = axis_derivative(grid, divergence(grid, u.values), axis)
    vals[axis] += (m.lam + m.mu) * _face_slice(ddiv[None], axis, side)[0]
    return FaceTrace(grid, face, vals)


def face_l2_norm_sq(t):
    """Exact integral of |trace|^2 over the face of the degree-N trace polynomial.

    Uses a degree-(N+1) LGL surface rule; for d = 1 a face is a point and the
    integral degenerates to the squared point value.
    """
    grid = t.grid
    if grid.dim == 1:
        return float(np.sum(t.values ** 2))
    fine = grid.degree + 1
    p = interp_matrix(grid.degree, fine)
    frule = lgl_rule(fine)
    wnd = frule.weights
    for _ in range(grid.dim - 2):
        wnd = np.multiply.outer(wnd, frule.weights)
    total = 0.0
    for c in range(grid.dim):
        v = t.values[c]
        for axis in range(grid.dim - 1):
            v = np.moveaxis(np.tensordot(p, np.moveaxis(v, axis, 0), axes=(1, 0)), 0, axis)
        total += float(np.sum(v * v * wnd))
    return total
