"""Flux and solution reconstructions and the hyperbolic/parabolic residual split.

1D: the flux reconstruction has degree q+1, starts from the numerical flux on
the left edge and satisfies d_x fhat = -H exactly, so d_t v_h + d_x fhat = 0
holds pointwise for the explicit part of the scheme.  The solution
reconstruction has degree q+1, matches the moments of v_h up to degree q-1
and takes the intermediate states w(v-, v+) at the edges.

2D (Cartesian, periodic): fhat_1 lives in V_{q+1,q} and fhat_2 in V_{q,q+1};
vhat lives in V_{q+2,q+2} and interpolates v_h at interior Gauss nodes, w_1
and w_2 at edge nodes and the mean of the four adjacent cell limits at
vertices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg

from .dg import (DGField1D, DGField2D, _leggauss, edge_traces, lagrange_integral_matrix,
                 lagrange_matrix, reference)
from .errors import InvalidParameterError
from .solver import HyperbolicData, _normalize_numflux, hyperbolic_data


@dataclass
class FluxReconstruction:
    """Directional flux reconstructions; ``fields[a]`` is fhat_{a+1}."""

    fields: tuple

    def __getitem__(self, a):
        return self.fields[a]

    def __len__(self):
        return len(self.fields)


def _legendre_vander(q, x):
    return npleg.legvander(np.asarray(x, dtype=float), q)


# 1D

def edge_states_1d(v_h, numflux, ghost=0.0):
    """Numerical flux and intermediate state on every edge of a 1D mesh."""
    (nf,) = _normalize_numflux(numflux, 1)
    tr = edge_traces(v_h, ghost)
    return nf(tr.minus, tr.plus)


def reconstruct_flux_1d(v_h, numflux_values, rhs):
    """fhat of degree q+1 with fhat(x_left+) = F and d_x fhat = -rhs.

    ``numflux_values`` holds F per edge and ``rhs`` is the hyperbolic
    right-hand side H(v_h) (as a field or nodal array).
    """
    mesh = v_h.mesh
    q = v_h.degree
    H = getattr(rhs, "values", rhs)
    F = np.asarray(numflux_values, dtype=float)
    target = reference(q + 1).nodes
    Int = lagrange_integral_matrix(reference(q).nodes, target)    # (q+2, q+1)
    le, _ = mesh.cell_edges(np.arange(mesh.n_cells))
    vals = F[le][:, None] - 0.5 * mesh.widths[:, None] * (H @ Int.T)
    return FluxReconstruction((DGField1D(mesh, q + 1, vals),))


def reconstruct_solution_1d(v_h, w_values):
    """vhat of degree q+1 from the moments of v_h and edge values ``w_values``."""
    q = v_h.degree
    if q < 1:
        raise InvalidParameterError("the solution reconstruction needs q >= 1")
    mesh = v_h.mesh
    w = np.asarray(w_values, dtype=float)
    ref = v_h.ref
    # Legendre coefficients of v_h on each cell
    Vq = _legendre_vander(q, ref.nodes)                       # (q+1, q+1)
    moments = (v_h.values * ref.weights) @ Vq                 # int v P_j on [-1, 1]
    c = moments * (2 * np.arange(q + 1) + 1) / 2.0
    le, re = mesh.cell_edges(np.arange(mesh.n_cells))
    wl, wr = w[le], w[re]
    low = c[:, :q]
    A = wr - low.sum(axis=1)
    B = wl - low @ ((-1.0) ** np.arange(q))
    sB = (-1.0) ** q * B
    cq = 0.5 * (A + sB)
    cq1 = 0.5 * (A - sB)
    coeffs = np.concatenate([low, cq[:, None], cq1[:, None]], axis=1)
    nodes = reference(q + 1).nodes
    return DGField1D(mesh, q + 1, coeffs @ _legendre_vander(q + 1, nodes).T)


# 2D

def reconstruct_flux_2d(v_h, data: HyperbolicData):
    """fhat_1 in V_{q+1,q} and fhat_2 in V_{q,q+1} from the scheme's edge data."""
    q = v_h.degree[0]
    mesh = v_h.mesh
    hx, hy = mesh.widths
    Hx, Hy = data.parts
    pFv, pFh = data.edge_flux
    Int = lagrange_integral_matrix(reference(q).nodes, reference(q + 1).nodes)
    f1 = pFv[:, :, None, :] - 0.5 * hx[:, None, None, None] * np.einsum("ijab,ka->ijkb", Hx.values, Int)
    f2 = pFh[:, :, :, None] - 0.5 * hy[None, :, None, None] * np.einsum("ijab,kb->ijak", Hy.values, Int)
    return FluxReconstruction((DGField2D(mesh, (q + 1, q), f1), DGField2D(mesh, (q, q + 1), f2)))


def mean_average(c0, c1, c2, c3):
    return 0.25 * (c0 + c1 + c2 + c3)


def reconstruct_solution_2d(v_h, numflux, corner_average=mean_average):
    """vhat in V_{q+2,q+2}: the tensor interpolant on {-1, Gauss nodes, 1}^2."""
    q = v_h.degree[0]
    if v_h.degree[1] != q:
        raise InvalidParameterError("the 2D reconstruction needs degree (q, q)")
    if q < 1:
        raise InvalidParameterError("the solution reconstruction needs q >= 1")
    nfx, nfy = _normalize_numflux(numflux, 2)
    mesh = v_h.mesh
    ref = reference(q)
    vertical, horizontal = edge_traces(v_h)
    w1 = nfx.intermediate(vertical.minus, vertical.plus, 0)     # (nx, ny, q+1), edge left of cell
    w2 = nfy.intermediate(horizontal.minus, horizontal.plus, 1)  # edge below cell

    ends = ref.end_values
    vals = v_h.values
    sw = np.einsum("ijab,a,b->ij", vals, ends[0], ends[0])
    se = np.einsum("ijab,a,b->ij", vals, ends[1], ends[0])
    nw = np.einsum("ijab,a,b->ij", vals, ends[0], ends[1])
    ne = np.einsum("ijab,a,b->ij", vals, ends[1], ends[1])
    # vertex (i, j) at (x_i, y_j): SW corner of (i, j), SE of (i-1, j), NW of (i, j-1), NE of (i-1, j-1)
    vertex = corner_average(sw, np.roll(se, 1, axis=0), np.roll(nw, 1, axis=1),
                            np.roll(np.roll(ne, 1, axis=0), 1, axis=1))

    nx, ny = mesh.shape
    P = q + 3
    G = np.empty((nx, ny, P, P))
    G[:, :, 1:-1, 1:-1] = vals
    G[:, :, 0, 1:-1] = w1
    G[:, :, -1, 1:-1] = np.roll(w1, -1, axis=0)
    G[:, :, 1:-1, 0] = w2
    G[:, :, 1:-1, -1] = np.roll(w2, -1, axis=1)
    G[:, :, 0, 0] = vertex
    G[:, :, -1, 0] = np.roll(vertex, -1, axis=0)
    G[:, :, 0, -1] = np.roll(vertex, -1, axis=1)
    G[:, :, -1, -1] = np.roll(np.roll(vertex, -1, axis=0), -1, axis=1)

    ext = np.concatenate([[-1.0], ref.nodes, [1.0]])
    T = lagrange_matrix(ext, reference(q + 2).nodes)            # (q+3, q+3)
    out = np.einsum("ijab,ka,lb->ijkl", G, T, T, optimize=True)
    return DGField2D(mesh, (q + 2, q + 2), out)


# generic entry points

def reconstruct(v_h, flux, numflux, data=None, ghost=0.0):
    """(vhat, fhat, hyperbolic data) for a field at one time level."""
    data = data or hyperbolic_data(v_h, flux, numflux, ghost)
    if isinstance(v_h, DGField1D):
        (nf,) = _normalize_numflux(numflux, 1)
        tr = edge_traces(v_h, ghost)
        w = nf.intermediate(tr.minus, tr.plus)
        return reconstruct_solution_1d(v_h, w), reconstruct_flux_1d(v_h, data.edge_flux[0], data.rhs), data
    return reconstruct_solution_2d(v_h, numflux), reconstruct_flux_2d(v_h, data), data


# residual split over one time step

TIME_POINTS, TIME_WEIGHTS = np.polynomial.legendre.leggauss(3)
TIME_POINTS = 0.5 * (TIME_POINTS + 1.0)      # on [0, 1]
TIME_WEIGHTS = 0.5 * TIME_WEIGHTS


@dataclass
class ResidualSplit:
    """Residuals of one step t^n -> t^{n+1} with vhat linear in time.

    R_H(theta) = (vhat1 - vhat0)/tau - (v1 - v0)/tau + div f(vhat(theta)) + H(v0)
    <R_P(theta), chi> = -int (M^{-1} A v1) chi + int eps_hat grad vhat(theta) . grad chi

    ``diffusion`` holds M^{-1} A v1 (the IP term of the implicit solve) as a
    field, or ``None`` when eps_hat vanishes.
    """

    tau: float
    v0: object
    v1: object
    vhat0: object
    vhat1: object
    rhs0: object
    eps_hat: np.ndarray
    flux: object
    diffusion: object = None

    @property
    def is_1d(self):
        return isinstance(self.v0, DGField1D)

    @property
    def parabolic_active(self):
        return self.diffusion is not None and bool(np.any(self.eps_hat))

    def rh_values(self, theta, z):
        """R_H at relative time ``theta`` on the tensor/1D reference points ``z``."""
        tau = self.tau
        if self.is_1d:
            vh0, vh1 = self.vhat0.evaluate(z), self.vhat1.evaluate(z)
            vt = (1 - theta) * vh0 + theta * vh1
            gt = (1 - theta) * self.vhat0.derivative(z) + theta * self.vhat1.derivative(z)
            dv = (self.v1.evaluate(z) - self.v0.evaluate(z))
            return ((vh1 - vh0) - dv) / tau + self.flux.jacobian(vt) * gt + self.rhs0.evaluate(z)
        vh0, vh1 = self.vhat0.evaluate(z, z), self.vhat1.evaluate(z, z)
        vt = (1 - theta) * vh0 + theta * vh1
        g0, g1 = self.vhat0.gradient(z, z), self.vhat1.gradient(z, z)
        gx = (1 - theta) * g0[0] + theta * g1[0]
        gy = (1 - theta) * g0[1] + theta * g1[1]
        dv = self.v1.evaluate(z, z) - self.v0.evaluate(z, z)
        return (((vh1 - vh0) - dv) / tau + self.flux.jacobian(vt, 0) * gx
                + self.flux.jacobian(vt, 1) * gy + self.rhs0.evaluate(z, z))

    def rh_squared(self, n_points=None):
        """Per-cell space-time integral of R_H^2 over the step."""
        q = self.v0.degree if self.is_1d else self.v0.degree[0]
        z, w = _leggauss(n_points or 2 * q + 4)
        acc = 0.0
        for th, wt in zip(TIME_POINTS, TIME_WEIGHTS):
            r2 = self.rh_values(th, z) ** 2
            if self.is_1d:
                cell = 0.5 * self.v0.mesh.widths * (r2 @ w)
            else:
                cell = np.einsum("ijkl,k,l->ij", r2, w, w) * self.v0.mesh.areas / 4.0
            acc = acc + wt * cell
        return self.tau * acc

    def rp_data(self, theta, z):
        """Point data (a, b) with <R_P, chi> = sum_K int_K a chi + b . grad chi.

        Values are on the reference points ``z`` of every cell; in 2D ``b``
        is a pair (b_x, b_y).
        """
        if self.is_1d:
            if self.diffusion is None:
                a = np.zeros((self.v0.mesh.n_cells, np.size(z)))
            else:
                a = -self.diffusion.evaluate(z)
            g = (1 - theta) * self.vhat0.derivative(z) + theta * self.vhat1.derivative(z)
            return a, self.eps_hat[:, None] * g
        if self.diffusion is None:
            a = np.zeros(self.v0.mesh.shape + (np.size(z), np.size(z)))
        else:
            a = -self.diffusion.evaluate(z, z)
        g0, g1 = self.vhat0.gradient(z, z), self.vhat1.gradient(z, z)
        e = self.eps_hat[:, :, None, None]
        return a, (e * ((1 - theta) * g0[0] + theta * g1[0]), e * ((1 - theta) * g0[1] + theta * g1[1]))


def split_residual(v0, v1, vhat0, vhat1, rhs0, eps_hat, flux, tau, diffusion=None):
    """Build the :class:`ResidualSplit` of one step."""
    return ResidualSplit(tau, v0, v1, vhat0, vhat1, rhs0,
                         np.asarray(getattr(eps_hat, "values", eps_hat), dtype=float),
                         flux, diffusion)
