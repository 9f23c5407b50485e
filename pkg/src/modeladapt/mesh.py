"""Uniform interval meshes and Cartesian tensor meshes.

Both mesh types are immutable once built.  Edges carry the indices of
their left and right cells; ``-1`` marks a missing neighbour on a physical
boundary (non-periodic mode).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidMeshError


def _freeze(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh1D:
    nodes: np.ndarray
    periodic: bool = True
    widths: np.ndarray = field(init=False)
    edge_left: np.ndarray = field(init=False)
    edge_right: np.ndarray = field(init=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise InvalidMeshError("a 1D mesh needs at least two cells")
        widths = np.diff(nodes)
        if not np.all(widths > 0):
            raise InvalidMeshError("mesh nodes must be strictly increasing")
        n = widths.size
        cells = np.arange(n)
        if self.periodic:
            # edge e sits at nodes[e]; nodes[n] is identified with nodes[0]
            left = np.roll(cells, 1)
            right = cells.copy()
        else:
            left = np.concatenate([[-1], cells])
            right = np.concatenate([cells, [-1]])
        object.__setattr__(self, "nodes", _freeze(nodes))
        object.__setattr__(self, "widths", _freeze(widths))
        object.__setattr__(self, "edge_left", _freeze(left))
        object.__setattr__(self, "edge_right", _freeze(right))

    @property
    def n_cells(self):
        return self.widths.size

    @property
    def n_edges(self):
        return self.edge_left.size

    @property
    def domain(self):
        return float(self.nodes[0]), float(self.nodes[-1])

    @property
    def length(self):
        return float(self.nodes[-1] - self.nodes[0])

    @property
    def h(self):
        """Uniform cell width."""
        return float(self.widths[0])

    @property
    def centers(self):
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def cell_edges(self, cell):
        """Indices of the (left, right) edges of ``cell``."""
        if self.periodic:
            return cell, (cell + 1) % self.n_cells
        return cell, cell + 1

    def neighbor(self, cell, side):
        """Cell across the ``side`` ('left' or 'right') edge, or -1."""
        left_edge, right_edge = self.cell_edges(cell)
        if side == "left":
            return int(self.edge_left[left_edge])
        if side == "right":
            return int(self.edge_right[right_edge])
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")

    def locate(self, x):
        """Cell index containing each physical point (right-closed at the end)."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.nodes, x, side="right") - 1
        return np.clip(idx, 0, self.n_cells - 1)

    def to_physical(self, xi):
        """Map reference points in [-1, 1] to every cell: shape (n_cells, len(xi))."""
        xi = np.asarray(xi, dtype=float)
        return self.centers[:, None] + 0.5 * self.widths[:, None] * xi[None, :]


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Cartesian mesh; cell (i, j) spans [x_i, x_{i+1}] x [y_j, y_{j+1}].

    Cells are ordered lexicographically with ``i`` (the x index) major, so
    the flat cell index is ``i * ny + j``.  Vertical edges (normal e_1) are
    indexed by the (i, j) of the cell to their right; horizontal edges by the
    cell above them.
    """

    x_nodes: np.ndarray
    y_nodes: np.ndarray
    periodic: bool = True

    def __post_init__(self):
        xs = np.asarray(self.x_nodes, dtype=float)
        ys = np.asarray(self.y_nodes, dtype=float)
        for name, a in (("x", xs), ("y", ys)):
            if a.ndim != 1 or a.size < 3:
                raise InvalidMeshError(f"{name} direction needs at least two cells")
            if not np.all(np.diff(a) > 0):
                raise InvalidMeshError(f"{name} nodes must be strictly increasing")
        object.__setattr__(self, "x_nodes", _freeze(xs))
        object.__setattr__(self, "y_nodes", _freeze(ys))

    @property
    def nx(self):
        return self.x_nodes.size - 1

    @property
    def ny(self):
        return self.y_nodes.size - 1

    @property
    def shape(self):
        return self.nx, self.ny

    @property
    def n_cells(self):
        return self.nx * self.ny

    @property
    def hx(self):
        return float(self.x_nodes[1] - self.x_nodes[0])

    @property
    def hy(self):
        return float(self.y_nodes[1] - self.y_nodes[0])

    @property
    def widths(self):
        return np.diff(self.x_nodes), np.diff(self.y_nodes)

    @property
    def areas(self):
        wx, wy = self.widths
        return np.outer(wx, wy)

    @property
    def domain(self):
        return ((float(self.x_nodes[0]), float(self.x_nodes[-1])),
                (float(self.y_nodes[0]), float(self.y_nodes[-1])))

    @property
    def area(self):
        (x0, x1), (y0, y1) = self.domain
        return (x1 - x0) * (y1 - y0)

    @property
    def n_vertical_edges(self):
        return (self.nx if self.periodic else self.nx + 1) * self.ny

    @property
    def n_horizontal_edges(self):
        return self.nx * (self.ny if self.periodic else self.ny + 1)

    def cell_index(self, i, j):
        return i * self.ny + j

    def vertical_edges(self):
        """(left_cell, right_cell) flat indices for every vertical edge."""
        nx, ny = self.shape
        stop = nx if self.periodic else nx + 1
        i, j = np.meshgrid(np.arange(stop), np.arange(ny), indexing="ij")
        i, j = i.ravel(), j.ravel()
        if self.periodic:
            left = self.cell_index((i - 1) % nx, j)
            right = self.cell_index(i, j)
        else:
            left = np.where(i > 0, self.cell_index(i - 1, j), -1)
            right = np.where(i < nx, self.cell_index(np.minimum(i, nx - 1), j), -1)
        return left, right

    def horizontal_edges(self):
        """(lower_cell, upper_cell) flat indices for every horizontal edge."""
        nx, ny = self.shape
        stop = ny if self.periodic else ny + 1
        i, j = np.meshgrid(np.arange(nx), np.arange(stop), indexing="ij")
        i, j = i.ravel(), j.ravel()
        if self.periodic:
            lower = self.cell_index(i, (j - 1) % ny)
            upper = self.cell_index(i, j)
        else:
            lower = np.where(j > 0, self.cell_index(i, j - 1), -1)
            upper = np.where(j < ny, self.cell_index(i, np.minimum(j, ny - 1)), -1)
        return lower, upper

    def neighbor(self, cell, side):
        """Cell across side 'left', 'right', 'down' or 'up' (periodic wrap), or -1."""
        i, j = divmod(int(cell), self.ny)
        di, dj = {"left": (-1, 0), "right": (1, 0), "down": (0, -1), "up": (0, 1)}[side]
        i2, j2 = i + di, j + dj
        if self.periodic:
            i2, j2 = i2 % self.nx, j2 % self.ny
        elif not (0 <= i2 < self.nx and 0 <= j2 < self.ny):
            return -1
        return self.cell_index(i2, j2)

    def centers(self):
        xc = 0.5 * (self.x_nodes[:-1] + self.x_nodes[1:])
        yc = 0.5 * (self.y_nodes[:-1] + self.y_nodes[1:])
        return np.meshgrid(xc, yc, indexing="ij")


def _check_interval(domain):
    a, b = (float(v) for v in domain)
    if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
        raise InvalidMeshError(f"degenerate interval {domain!r}")
    return a, b


def build_mesh_1d(domain, n_cells, periodic=True):
    """Uniform partition of ``domain`` into ``n_cells`` intervals."""
    if int(n_cells) != n_cells or n_cells < 2:
        raise InvalidMeshError(f"n_cells must be an integer >= 2, got {n_cells!r}")
    a, b = _check_interval(domain)
    return Mesh1D(np.linspace(a, b, int(n_cells) + 1), periodic=periodic)


def build_mesh_2d(domain, nx, ny, periodic=True):
    """Uniform Cartesian mesh of a rectangle ``((x0, x1), (y0, y1))``.

    A single pair ``(a, b)`` is accepted as shorthand for the square
    ``[a, b]^2``.
    """
    domain = tuple(domain)
    if len(domain) == 2 and np.ndim(domain[0]) == 0:
        domain = (domain, domain)
    if len(domain) != 2:
        raise InvalidMeshError(f"expected a rectangle, got {domain!r}")
    for n in (nx, ny):
        if int(n) != n or n < 2:
            raise InvalidMeshError(f"cell counts must be integers >= 2, got {n!r}")
    (x0, x1), (y0, y1) = _check_interval(domain[0]), _check_interval(domain[1])
    return Mesh2D(np.linspace(x0, x1, int(nx) + 1), np.linspace(y0, y1, int(ny) + 1),
                  periodic=periodic)
