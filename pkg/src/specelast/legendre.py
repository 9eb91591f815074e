"""One-dimensional Legendre polynomials, LGL quadrature and nodal differentiation.

The Legendre-Gauss-Lobatto (LGL) rule of degree N uses the N+1 roots of
(1 - x^2) L_N'(x) as nodes.  The associated quadrature is exact on
polynomials of degree <= 2N - 1, and the endpoint weights are
2 / (N (N + 1)).  Nodal differentiation matrices act on values sampled at
the nodes and are exact on polynomials of degree <= N.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class RootConvergenceError(RuntimeError):
    """Newton iteration for the LGL nodes failed to converge."""


@dataclass(frozen=True)
class LglRule:
    """Nodes, weights and differentiation matrices of one LGL rule.

    nodes are strictly increasing with nodes[0] = -1 and nodes[N] = +1.
    diff1/diff2 are the first/second derivative collocation matrices of
    the Lagrange cardinal basis at the nodes.
    """

    degree: int
    nodes: np.ndarray
    weights: np.ndarray
    diff1: np.ndarray
    diff2: np.ndarray


def legendre_eval(n, x):
    """Evaluate (L_n(x), L_n'(x)) by the three-term recurrence.

    Works for scalar or array x in [-1, 1].  The derivative recurrence
    L_k' = L_{k-2}' + (2k - 1) L_{k-1} stays exact at the endpoints.
    """
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.ones_like(x), np.zeros_like(x)
    lm, lc = np.ones_like(x), x.copy()
    dm, dc = np.zeros_like(x), np.ones_like(x)
    for k in range(2, n + 1):
        lp = ((2 * k - 1) * x * lc - (k - 1) * lm) / k
        dp = dm + (2 * k - 1) * lc
        lm, lc = lc, lp
        dm, dc = dc, dp
    return lc, dc


def _lgl_nodes(n, tol=1e-14, max_iter=100):
    """Roots of (1 - x^2) L_n'(x), ascending.

    Newton on L_n' for the interior roots, seeded with Chebyshev-Gauss-
    Lobatto points.  L_n'' is obtained from the Legendre ODE.
    """
    x = -np.cos(np.pi * np.arange(n + 1) / n)
    if n > 1:
        xi = x[1:n]
        for _ in range(max_iter):
            ln, dln = legendre_eval(n, xi)
            d2ln = (2 * xi * dln - n * (n + 1) * ln) / (1 - xi * xi)
            step = dln / d2ln
            xi -= step
            if np.max(np.abs(step)) < tol:
                break
        else:
            raise RootConvergenceError(
                f"LGL nodes of degree {n} did not converge in {max_iter} Newton steps"
            )
        x[1:n] = xi
    x[0], x[-1] = -1.0, 1.0
    # enforce exact node symmetry; the rule is invariant under x -> -x
    return 0.5 * (x - x[::-1])


def _diff_matrix(nodes):
    """First-derivative collocation matrix from the analytic Lagrange formula."""
    n = nodes.size
    dx = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(dx, 1.0)
    # c[j] = prod_{m != j} (x_j - x_m)
    c = np.prod(dx, axis=1)
    d = (c[:, None] / c[None, :]) / dx
    np.fill_diagonal(d, 0.0)
    # negative-sum trick: each row must annihilate constants
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def _diff2_matrix(nodes, d1):
    """Second-derivative collocation matrix via the derivative recursion.

    d2[i, j] = 2 (d1[i, j] d1[i, i] - d1[i, j] / (x_i - x_j)) off the
    diagonal, with the diagonal fixed by annihilating constants.
    """
    dx = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(dx, 1.0)
    d2 = 2.0 * d1 * (np.diag(d1)[:, None] - 1.0 / dx)
    np.fill_diagonal(d2, 0.0)
    np.fill_diagonal(d2, -d2.sum(axis=1))
    return d2


@lru_cache(maxsize=None)
def lgl_rule(n):
    """Build the LGL rule of degree n >= 2 (cached, immutable)."""
    if n < 2:
        raise ValueError(f"LGL rule needs degree >= 2, got {n}")
    nodes = _lgl_nodes(n)
    ln, _ = legendre_eval(n, nodes)
    weights = 2.0 / (n * (n + 1) * ln * ln)
    d1 = _diff_matrix(nodes)
    d2 = _diff2_matrix(nodes, d1)
    for arr in (nodes, weights, d1, d2):
        arr.setflags(write=False)
    return LglRule(degree=n, nodes=nodes, weights=weights, diff1=d1, diff2=d2)


def lagrange_basis_all(rule, x):
    """Evaluate all cardinal polynomials Psi_0..Psi_N at x.

    x may be scalar (returns shape (N+1,)) or 1-d array (returns
    shape (len(x), N+1)).  At a node the result is the corresponding
    unit vector.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    nodes = rule.nodes
    dx = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(dx, 1.0)
    bary = 1.0 / np.prod(dx, axis=1)

    diff = xs[:, None] - nodes[None, :]
    out = np.empty((xs.size, nodes.size))
    hit = np.isclose(diff, 0.0, rtol=0.0, atol=1e-15)
    regular = ~hit.any(axis=1)
    if regular.any():
        terms = bary[None, :] / diff[regular]
        out[regular] = terms / terms.sum(axis=1, keepdims=True)
    for i in np.nonzero(~regular)[0]:
        out[i] = 0.0
        out[i, np.argmax(hit[i])] = 1.0
    return out[0] if np.isscalar(x) or np.ndim(x) == 0 else out


def lagrange_edge_derivatives(rule):
    """Nodal derivative samples of the two edge cardinal polynomials.

    Returns (Psi_N'(nodes), Psi_0'(nodes)); these are the last and first
    columns of diff1.
    """
    return rule.diff1[:, -1].copy(), rule.diff1[:, 0].copy()


@lru_cache(maxsize=None)
def interp_matrix(n_from, n_to):
    """Interpolation matrix from the degree-n_from LGL nodes to the
    degree-n_to LGL nodes: row i holds the cardinal values at target node i."""
    src = lgl_rule(n_from)
    dst = lgl_rule(n_to)
    mat = lagrange_basis_all(src, dst.nodes)
    mat.setflags(write=False)
    return mat
