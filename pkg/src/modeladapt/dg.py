"""Broken polynomial spaces on interval and Cartesian meshes.

Fields are stored nodally: on every cell the coefficients are the values at
the Gauss points of the cell's degree, mapped from [-1, 1].  In that basis
the mass matrix is diagonal, ``(h / 2) * w_k`` per node in 1D and the
tensor product of that in 2D.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import Mesh1D, Mesh2D


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def degree(self):
        """Polynomial degree integrated exactly."""
        return 2 * self.nodes.size - 1

    def integrate(self, f, a=-1.0, b=1.0):
        x = 0.5 * (a + b) + 0.5 * (b - a) * self.nodes
        return 0.5 * (b - a) * np.dot(self.weights, f(x))


@lru_cache(maxsize=None)
def _leggauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_rule(q):
    """(q+1)-point Gauss-Legendre rule on [-1, 1], exact to degree 2q+1."""
    if q < 0:
        raise ValueError("degree must be non-negative")
    x, w = _leggauss(q + 1)
    return QuadratureRule(x, w)


def points_for_degree(p):
    """Smallest Gauss rule size that integrates degree ``p`` exactly."""
    return max(1, (int(p) + 2) // 2)


def lagrange_matrix(nodes, x):
    """``L[i, j] = l_j(x_i)`` for the Lagrange basis on ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = nodes.size
    L = np.ones((x.size, n))
    for j in range(n):
        for m in range(n):
            if m != j:
                L[:, j] *= (x - nodes[m]) / (nodes[j] - nodes[m])
    return L


def lagrange_derivative_matrix(nodes, x):
    """``D[i, j] = l_j'(x_i)`` on the reference interval."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = nodes.size
    D = np.zeros((x.size, n))
    for j in range(n):
        for k in range(n):
            if k == j:
                continue
            term = np.full(x.size, 1.0 / (nodes[j] - nodes[k]))
            for m in range(n):
                if m != j and m != k:
                    term *= (x - nodes[m]) / (nodes[j] - nodes[m])
            D[:, j] += term
    return D


def lagrange_integral_matrix(nodes, x):
    """``I[i, j] = int_{-1}^{x_i} l_j(s) ds``."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t, w = _leggauss(points_for_degree(nodes.size - 1))
    out = np.empty((x.size, nodes.size))
    for i, xi in enumerate(x):
        s = -1.0 + 0.5 * (xi + 1.0) * (t + 1.0)
        out[i] = 0.5 * (xi + 1.0) * (w @ lagrange_matrix(nodes, s))
    return out


class Reference:
    """Precomputed 1D reference data for the degree-``p`` Gauss-nodal basis."""

    def __init__(self, degree):
        self.degree = int(degree)
        self.nodes, self.weights = _leggauss(self.degree + 1)
        ends = np.array([-1.0, 1.0])
        self.end_values = lagrange_matrix(self.nodes, ends)            # (2, p+1)
        self.end_derivs = lagrange_derivative_matrix(self.nodes, ends)  # (2, p+1)
        self.diff = lagrange_derivative_matrix(self.nodes, self.nodes)  # D[k, j] = l_j'(xi_k)
        # S[i, j] = int l_i' l_j' on [-1, 1]
        self.stiffness = self.diff.T @ (self.weights[:, None] * self.diff)

    def values_at(self, x):
        return lagrange_matrix(self.nodes, x)

    def derivs_at(self, x):
        return lagrange_derivative_matrix(self.nodes, x)


@lru_cache(maxsize=None)
def reference(degree):
    return Reference(degree)


def _as_pair(degree):
    if np.ndim(degree) == 0:
        return int(degree), int(degree)
    p, q = degree
    return int(p), int(q)


@dataclass(eq=False)
class DGField1D:
    """Scalar piecewise polynomial of degree ``degree`` on a :class:`Mesh1D`."""

    mesh: Mesh1D
    degree: int
    values: np.ndarray

    def __post_init__(self):
        self.degree = int(self.degree)
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.mesh.n_cells, self.degree + 1)
        if self.values.shape != expected:
            raise ValueError(f"values must have shape {expected}, got {self.values.shape}")

    @classmethod
    def zeros(cls, mesh, degree):
        return cls(mesh, degree, np.zeros((mesh.n_cells, int(degree) + 1)))

    @property
    def ref(self):
        return reference(self.degree)

    def copy(self):
        return DGField1D(self.mesh, self.degree, self.values.copy())

    def nodes_physical(self):
        return self.mesh.to_physical(self.ref.nodes)

    def evaluate(self, xi):
        """Values at reference points ``xi`` in every cell, shape (n_cells, len(xi))."""
        return self.values @ self.ref.values_at(xi).T

    def derivative(self, xi):
        """Physical x-derivative at reference points in every cell."""
        return (self.values @ self.ref.derivs_at(xi).T) * (2.0 / self.mesh.widths[:, None])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        cells = self.mesh.locate(x.ravel())
        xi = 2.0 * (x.ravel() - self.mesh.centers[cells]) / self.mesh.widths[cells]
        L = self.ref.values_at(xi)
        return np.einsum("ij,ij->i", L, self.values[cells]).reshape(x.shape)

    def cell_traces(self):
        """(value at left end, value at right end) of every cell."""
        ends = self.values @ self.ref.end_values.T
        return ends[:, 0], ends[:, 1]

    def cell_integrals(self):
        return 0.5 * self.mesh.widths * (self.values @ self.ref.weights)

    def integrate(self):
        return float(self.cell_integrals().sum())

    def inner(self, other):
        """L2 inner product with a field on the same mesh (exact for equal degrees)."""
        n = points_for_degree(self.degree + other.degree)
        x, w = _leggauss(n)
        return float(np.sum(0.5 * self.mesh.widths[:, None] * w * self.evaluate(x) * other.evaluate(x)))

    def l2_norm(self):
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def _combine(self, other, op):
        if isinstance(other, DGField1D):
            if other.degree != self.degree or other.mesh is not self.mesh:
                raise ValueError("fields live in different spaces")
            return DGField1D(self.mesh, self.degree, op(self.values, other.values))
        return DGField1D(self.mesh, self.degree, op(self.values, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        return DGField1D(self.mesh, self.degree, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return DGField1D(self.mesh, self.degree, -self.values)


@dataclass(eq=False)
class DGField2D:
    """Scalar field in V_{p,q}: tensor Gauss-nodal values, shape (nx, ny, p+1, q+1)."""

    mesh: Mesh2D
    degree: tuple
    values: np.ndarray

    def __post_init__(self):
        self.degree = _as_pair(self.degree)
        self.values = np.asarray(self.values, dtype=float)
        p, q = self.degree
        expected = (self.mesh.nx, self.mesh.ny, p + 1, q + 1)
        if self.values.shape != expected:
            raise ValueError(f"values must have shape {expected}, got {self.values.shape}")

    @classmethod
    def zeros(cls, mesh, degree):
        p, q = _as_pair(degree)
        return cls(mesh, (p, q), np.zeros((mesh.nx, mesh.ny, p + 1, q + 1)))

    @property
    def refs(self):
        return reference(self.degree[0]), reference(self.degree[1])

    def copy(self):
        return DGField2D(self.mesh, self.degree, self.values.copy())

    def evaluate(self, xi, eta):
        """Values on the tensor grid xi x eta of every cell: (nx, ny, len(xi), len(eta))."""
        rx, ry = self.refs
        return np.einsum("ijab,ka,lb->ijkl", self.values, rx.values_at(xi), ry.values_at(eta),
                         optimize=True)

    def gradient(self, xi, eta):
        """Physical (d/dx, d/dy) on the tensor grid of every cell."""
        rx, ry = self.refs
        hx, hy = self.mesh.widths
        dx = np.einsum("ijab,ka,lb->ijkl", self.values, rx.derivs_at(xi), ry.values_at(eta),
                       optimize=True) * (2.0 / hx)[:, None, None, None]
        dy = np.einsum("ijab,ka,lb->ijkl", self.values, rx.values_at(xi), ry.derivs_at(eta),
                       optimize=True) * (2.0 / hy)[None, :, None, None]
        return dx, dy

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        xs, ys = x.ravel(), y.ravel()
        mx, my = self.mesh.x_nodes, self.mesh.y_nodes
        i = np.clip(np.searchsorted(mx, xs, side="right") - 1, 0, self.mesh.nx - 1)
        j = np.clip(np.searchsorted(my, ys, side="right") - 1, 0, self.mesh.ny - 1)
        xi = 2.0 * (xs - mx[i]) / (mx[i + 1] - mx[i]) - 1.0
        eta = 2.0 * (ys - my[j]) / (my[j + 1] - my[j]) - 1.0
        rx, ry = self.refs
        Lx, Ly = rx.values_at(xi), ry.values_at(eta)
        out = np.einsum("na,nb,nab->n", Lx, Ly, self.values[i, j])
        return out.reshape(x.shape)

    def cell_integrals(self):
        rx, ry = self.refs
        return np.einsum("ijab,a,b->ij", self.values, rx.weights, ry.weights) * self.mesh.areas / 4.0

    def integrate(self):
        return float(self.cell_integrals().sum())

    def inner(self, other):
        nx_ = points_for_degree(self.degree[0] + other.degree[0])
        ny_ = points_for_degree(self.degree[1] + other.degree[1])
        xa, wa = _leggauss(nx_)
        xb, wb = _leggauss(ny_)
        prod = self.evaluate(xa, xb) * other.evaluate(xa, xb)
        return float(np.sum(np.einsum("ijkl,k,l->ij", prod, wa, wb) * self.mesh.areas / 4.0))

    def l2_norm(self):
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def _combine(self, other, op):
        if isinstance(other, DGField2D):
            if other.degree != self.degree or other.mesh is not self.mesh:
                raise ValueError("fields live in different spaces")
            return DGField2D(self.mesh, self.degree, op(self.values, other.values))
        return DGField2D(self.mesh, self.degree, op(self.values, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        return DGField2D(self.mesh, self.degree, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return DGField2D(self.mesh, self.degree, -self.values)


def mass_diagonal(field_or_mesh, degree=None):
    """Diagonal of the nodal mass matrix, shaped like the field's values."""
    if isinstance(field_or_mesh, (DGField1D, DGField2D)):
        mesh, degree = field_or_mesh.mesh, field_or_mesh.degree
    else:
        mesh = field_or_mesh
    if isinstance(mesh, Mesh1D):
        ref = reference(degree)
        return 0.5 * mesh.widths[:, None] * ref.weights[None, :]
    p, q = _as_pair(degree)
    wx, wy = reference(p).weights, reference(q).weights
    return (mesh.areas / 4.0)[:, :, None, None] * np.multiply.outer(wx, wy)[None, None]


def l2_project(f, mesh, q, n_points=None):
    """L2 projection of the callable ``f`` onto V_q (1D) or V_{q,q} (2D).

    ``f`` takes physical coordinates (``f(x)`` or ``f(x, y)``) as arrays.
    The default quadrature has 2q+3 points per direction.
    """
    n = n_points or 2 * q + 3
    z, w = _leggauss(n)
    if isinstance(mesh, Mesh1D):
        ref = reference(q)
        L = ref.values_at(z)                      # (n, q+1)
        vals = np.asarray(f(mesh.to_physical(z)), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("non-finite value while projecting")
        moments = (vals * w) @ L                  # reference moments
        return DGField1D(mesh, q, moments / ref.weights)
    p, qq = _as_pair(q)
    rx, ry = reference(p), reference(qq)
    hx, hy = mesh.widths
    xc = 0.5 * (mesh.x_nodes[:-1] + mesh.x_nodes[1:])
    yc = 0.5 * (mesh.y_nodes[:-1] + mesh.y_nodes[1:])
    X = xc[:, None] + 0.5 * hx[:, None] * z[None, :]      # (nx, n)
    Y = yc[:, None] + 0.5 * hy[:, None] * z[None, :]      # (ny, n)
    vals = np.asarray(f(X[:, None, :, None], Y[None, :, None, :]), dtype=float)
    vals = np.broadcast_to(vals, (mesh.nx, mesh.ny, n, n))
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("non-finite value while projecting")
    moments = np.einsum("ijkl,k,l,ka,lb->ijab", vals, w, w, rx.values_at(z), ry.values_at(z),
                        optimize=True)
    return DGField2D(mesh, (p, qq), moments / np.multiply.outer(rx.weights, ry.weights))


def interpolate(f, mesh, q):
    """Nodal interpolation at the Gauss points (exact on the polynomial space)."""
    if isinstance(mesh, Mesh1D):
        return DGField1D(mesh, q, f(mesh.to_physical(reference(q).nodes)))
    p, qq = _as_pair(q)
    rx, ry = reference(p), reference(qq)
    hx, hy = mesh.widths
    xc = 0.5 * (mesh.x_nodes[:-1] + mesh.x_nodes[1:])
    yc = 0.5 * (mesh.y_nodes[:-1] + mesh.y_nodes[1:])
    X = xc[:, None] + 0.5 * hx[:, None] * rx.nodes[None, :]
    Y = yc[:, None] + 0.5 * hy[:, None] * ry.nodes[None, :]
    vals = np.broadcast_to(f(X[:, None, :, None], Y[None, :, None, :]),
                           (mesh.nx, mesh.ny, p + 1, qq + 1))
    return DGField2D(mesh, (p, qq), np.array(vals, dtype=float))


@dataclass
class TraceData:
    """One-sided limits on every edge; jump is minus-side minus plus-side."""

    minus: np.ndarray
    plus: np.ndarray

    @property
    def jump(self):
        return self.minus - self.plus

    @property
    def average(self):
        return 0.5 * (self.minus + self.plus)


def edge_traces(field, ghost=0.0):
    """Edge limits of a field.

    1D: arrays over edges.  2D: a pair ``(vertical, horizontal)`` of
    :class:`TraceData` with values at the Gauss nodes along each edge,
    shaped (nx, ny, q+1) and indexed like the cell right of / above the edge
    (periodic meshes only).  ``ghost`` fills missing neighbours in 1D
    boundary mode.
    """
    if isinstance(field, DGField1D):
        left_end, right_end = field.cell_traces()
        mesh = field.mesh
        l, r = mesh.edge_left, mesh.edge_right
        minus = np.where(l >= 0, right_end[np.maximum(l, 0)], ghost)
        plus = np.where(r >= 0, left_end[np.maximum(r, 0)], ghost)
        return TraceData(minus, plus)
    if not field.mesh.periodic:
        raise NotImplementedError("2D traces are implemented for periodic meshes")
    rx, ry = field.refs
    # value at x = -1 / +1 for every y-node, and at y = -1 / +1 for every x-node
    west = np.einsum("ijab,a->ijb", field.values, rx.end_values[0])
    east = np.einsum("ijab,a->ijb", field.values, rx.end_values[1])
    south = np.einsum("ijab,b->ija", field.values, ry.end_values[0])
    north = np.einsum("ijab,b->ija", field.values, ry.end_values[1])
    vertical = TraceData(np.roll(east, 1, axis=0), west)
    horizontal = TraceData(np.roll(north, 1, axis=1), south)
    return vertical, horizontal


def discrete_gradient(y, side, direction=0, ghost=0.0):
    """Lifted derivative d^-/d^+ of a broken field into its own space.

    Solves  int d^{+-} y . phi = - int y d(phi) + int_E y^{+-} [[phi]]  for all
    phi in the field's space; ``side`` picks which edge limit enters.
    """
    if side not in ("minus", "plus"):
        raise ValueError("side must be 'minus' or 'plus'")
    if isinstance(y, DGField1D):
        ref = y.ref
        vol = -(y.values * ref.weights) @ ref.diff               # -sum_k w_k y_k l_i'(xi_k)
        tr = edge_traces(y, ghost)
        edge_val = tr.minus if side == "minus" else tr.plus
        mesh = y.mesh
        cells = np.arange(mesh.n_cells)
        le, re = mesh.cell_edges(cells)
        rhs = vol + np.outer(edge_val[re], ref.end_values[1]) - np.outer(edge_val[le], ref.end_values[0])
        return DGField1D(mesh, y.degree, rhs / ref.weights * (2.0 / mesh.widths)[:, None])
    if direction not in (0, 1):
        raise ValueError("direction must be 0 or 1")
    rx, ry = y.refs
    hx, hy = y.mesh.widths
    vertical, horizontal = edge_traces(y)
    tr = vertical if direction == 0 else horizontal
    edge_val = tr.minus if side == "minus" else tr.plus
    if direction == 0:
        vol = -np.einsum("ijkb,k,ka->ijab", y.values, rx.weights, rx.diff)
        nxt = np.roll(edge_val, -1, axis=0)
        surf = (np.einsum("ijb,a->ijab", nxt, rx.end_values[1])
                - np.einsum("ijb,a->ijab", edge_val, rx.end_values[0]))
        # moments carry a factor hy/2 * w_b; divide by the mass (hx hy / 4) w_a w_b
        out = (vol + surf) / rx.weights[None, None, :, None] * (2.0 / hx)[:, None, None, None]
    else:
        vol = -np.einsum("ijal,l,lb->ijab", y.values, ry.weights, ry.diff)
        nxt = np.roll(edge_val, -1, axis=1)
        surf = (np.einsum("ija,b->ijab", nxt, ry.end_values[1])
                - np.einsum("ija,b->ijab", edge_val, ry.end_values[0]))
        out = (vol + surf) / ry.weights[None, None, None, :] * (2.0 / hy)[None, :, None, None]
    return DGField2D(y.mesh, y.degree, out)
