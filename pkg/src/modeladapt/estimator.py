"""A posteriori error estimator for the scalar model-adaptive scheme.

The bound at time t is

    (||u0 - vhat(0)||^2 + E_M + E_D) * exp((max|grad vhat| C_f + 1) t)

with E_M = int_0^t int (eps - eps_hat) |grad vhat|^2 and
E_D = ||R_H||^2 + ||R_P||^2_{L2(H^-1)} / eps.

The H^-1 norm is the dual of H^1 with the full norm (grad, grad) + (., .).
It is evaluated with a Riesz solve in continuous piecewise polynomials of
degree q+2 on the same mesh.  Cell contributions to that norm are the local
energies int_K |grad psi|^2 + psi^2 of the Riesz representative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dg import DGField1D, DGField2D, _leggauss, lagrange_derivative_matrix, lagrange_matrix, reference
from .errors import InvalidConfigurationError, SingularOperatorError
from .mesh import Mesh1D, Mesh2D
from .reconstruction import TIME_POINTS, TIME_WEIGHTS, ResidualSplit


def lobatto_nodes(r):
    """Gauss-Lobatto points of a degree-r continuous element."""
    if r < 1:
        raise ValueError("continuous elements need degree >= 1")
    inner = np.polynomial.legendre.Legendre.basis(r).deriv().roots()
    return np.concatenate([[-1.0], np.sort(inner.real), [1.0]])


class _LocalElement:
    def __init__(self, r, n_points):
        self.r = r
        self.nodes = lobatto_nodes(r)
        self.z, self.w = _leggauss(n_points)
        self.B = lagrange_matrix(self.nodes, self.z)          # (n, r+1)
        self.dB = lagrange_derivative_matrix(self.nodes, self.z)
        zz, ww = _leggauss(r + 1)
        Bq, dBq = lagrange_matrix(self.nodes, zz), lagrange_derivative_matrix(self.nodes, zz)
        self.mass = Bq.T @ (ww[:, None] * Bq)                  # on [-1, 1]
        self.stiff = dBq.T @ (ww[:, None] * dBq)


def _line_numbering(n_cells, r, periodic):
    g = np.arange(n_cells)[:, None] * r + np.arange(r + 1)[None, :]
    if periodic:
        return g % (n_cells * r), n_cells * r
    return g, n_cells * r + 1


def _line_matrices(widths, r, periodic, elem):
    g, n = _line_numbering(widths.size, r, periodic)
    rows = np.repeat(g[:, :, None], r + 1, axis=2).ravel()
    cols = np.repeat(g[:, None, :], r + 1, axis=1).ravel()
    K = ((2.0 / widths)[:, None, None] * elem.stiff).ravel()
    M = ((0.5 * widths)[:, None, None] * elem.mass).ravel()
    Km = sp.coo_matrix((K, (rows, cols)), shape=(n, n)).tocsr()
    Mm = sp.coo_matrix((M, (rows, cols)), shape=(n, n)).tocsr()
    return Km, Mm, g, n


class DualNormEvaluator:
    """Riesz solver for functionals <R, chi> = sum_K int_K a chi + b . grad chi.

    ``a`` and ``b`` are given at the reference points :attr:`points` of every
    cell (tensor grid in 2D).  In non-periodic 1D meshes the dual space is
    H^1_0.
    """

    def __init__(self, mesh, degree=3, n_points=None):
        self.mesh = mesh
        self.degree = int(degree)
        r = self.degree
        self.elem = _LocalElement(r, n_points or r + 3)
        if isinstance(mesh, Mesh1D):
            self.dim = 1
            K, M, g, n = _line_matrices(mesh.widths, r, mesh.periodic, self.elem)
            self._g = g
            self._n = n
            self._free = np.arange(n) if mesh.periodic else np.arange(1, n - 1)
            S = (K + M)[self._free][:, self._free].tocsc()
            try:
                self._lu = spla.splu(S)
            except RuntimeError as exc:
                raise SingularOperatorError(f"dual system is singular: {exc}") from exc
        elif isinstance(mesh, Mesh2D):
            if not mesh.periodic:
                raise InvalidConfigurationError("2D dual norms are implemented for periodic meshes")
            self.dim = 2
            hx, hy = mesh.widths
            Kx, Mx, gx, nx_ = _line_matrices(hx, r, True, self.elem)
            Ky, My, gy, ny_ = _line_matrices(hy, r, True, self.elem)
            lx, Ux = sla.eigh(Kx.toarray(), Mx.toarray())
            ly, Uy = sla.eigh(Ky.toarray(), My.toarray())
            self._gx, self._gy = gx, gy
            self._Ux, self._Uy = Ux, Uy
            self._D = lx[:, None] + ly[None, :] + 1.0
            self._n = (nx_, ny_)
        else:
            raise TypeError("unsupported mesh")

    @property
    def points(self):
        """Reference quadrature points used for functional data."""
        return self.elem.z

    def physical_points(self):
        if self.dim == 1:
            return self.mesh.to_physical(self.elem.z)
        xc = 0.5 * (self.mesh.x_nodes[:-1] + self.mesh.x_nodes[1:])
        yc = 0.5 * (self.mesh.y_nodes[:-1] + self.mesh.y_nodes[1:])
        hx, hy = self.mesh.widths
        X = xc[:, None] + 0.5 * hx[:, None] * self.elem.z
        Y = yc[:, None] + 0.5 * hy[:, None] * self.elem.z
        return X[:, None, :, None], Y[None, :, None, :]

    def load(self, a=None, b=None):
        """Global load vector (1D) or matrix (2D) of the functional."""
        e = self.elem
        if self.dim == 1:
            h = self.mesh.widths
            loc = np.zeros((self.mesh.n_cells, e.r + 1))
            if a is not None:
                loc += 0.5 * h[:, None] * ((np.asarray(a) * e.w) @ e.B)
            if b is not None:
                loc += (np.asarray(b) * e.w) @ e.dB
            return np.bincount(self._g.ravel(), loc.ravel(), minlength=self._n)
        hx, hy = self.mesh.widths
        W = np.outer(e.w, e.w)
        loc = np.zeros(self.mesh.shape + (e.r + 1, e.r + 1))
        if a is not None:
            loc += np.einsum("ijkl,kl,ka,lb->ijab", np.asarray(a), W, e.B, e.B, optimize=True) \
                * (self.mesh.areas / 4.0)[:, :, None, None]
        if b is not None:
            bx, by = b
            if bx is not None:
                loc += np.einsum("ijkl,kl,ka,lb->ijab", np.asarray(bx), W, e.dB, e.B, optimize=True) \
                    * (0.5 * hy)[None, :, None, None]
            if by is not None:
                loc += np.einsum("ijkl,kl,ka,lb->ijab", np.asarray(by), W, e.B, e.dB, optimize=True) \
                    * (0.5 * hx)[:, None, None, None]
        G = self._gx[:, None, :, None] * self._n[1] + self._gy[None, :, None, :]
        out = np.bincount(G.ravel(), loc.ravel(), minlength=self._n[0] * self._n[1])
        return out.reshape(self._n)

    def riesz(self, a=None, b=None):
        """Coefficients of the Riesz representative psi of the functional."""
        rhs = self.load(a, b)
        if self.dim == 1:
            psi = np.zeros(self._n)
            psi[self._free] = self._lu.solve(rhs[self._free])
            return psi
        Ux, Uy = self._Ux, self._Uy
        return Ux @ ((Ux.T @ rhs @ Uy) / self._D) @ Uy.T

    def _local(self, psi):
        if self.dim == 1:
            return psi[self._g]
        return psi[self._gx[:, None, :, None], self._gy[None, :, None, :]]

    def cell_inner(self, psi, phi):
        """Per-cell H^1 inner products int_K grad psi . grad phi + psi phi."""
        e = self.elem
        p, f = self._local(psi), self._local(phi)
        if self.dim == 1:
            h = self.mesh.widths
            A = (2.0 / h)[:, None, None] * e.stiff + (0.5 * h)[:, None, None] * e.mass
            return np.einsum("ka,kab,kb->k", p, A, f)
        hx, hy = self.mesh.widths
        rx = (hy[None, :] / hx[:, None])
        ry = (hx[:, None] / hy[None, :])
        ar = self.mesh.areas / 4.0
        t_ss = np.einsum("ijab,ac,bd,ijcd->ij", p, e.stiff, e.mass, f, optimize=True)
        t_ms = np.einsum("ijab,ac,bd,ijcd->ij", p, e.mass, e.stiff, f, optimize=True)
        t_mm = np.einsum("ijab,ac,bd,ijcd->ij", p, e.mass, e.mass, f, optimize=True)
        return rx * t_ss + ry * t_ms + ar * t_mm

    def norm_squared(self, a=None, b=None):
        psi = self.riesz(a, b)
        return float(np.sum(self.cell_inner(psi, psi)))

    def norm(self, a=None, b=None):
        return math.sqrt(max(self.norm_squared(a, b), 0.0))


def h_minus1_norm(functional, mesh, degree=3):
    """H^-1 norm of a functional on ``mesh``.

    ``functional`` is either a callable g (meaning chi -> int g chi, with g
    taking physical coordinates) or a pair ``(a, b)`` of point data on the
    evaluator's reference points.
    """
    ev = DualNormEvaluator(mesh, degree)
    if callable(functional):
        pts = ev.physical_points()
        a = functional(*pts) if isinstance(pts, tuple) else functional(pts)
        if ev.dim == 2:
            a = np.broadcast_to(a, mesh.shape + (ev.points.size,) * 2)
        return ev.norm(a)
    a, b = functional
    return ev.norm(a, b)


# estimator terms

def grad_points(degree):
    return np.concatenate([[-1.0], reference(degree).nodes, [1.0]])


def gradient_max(vhat):
    """max |grad vhat| over Gauss and edge nodes."""
    if isinstance(vhat, DGField1D):
        return float(np.max(np.abs(vhat.derivative(grad_points(vhat.degree)))))
    z = grad_points(vhat.degree[0])
    gx, gy = vhat.gradient(z, z)
    return float(np.sqrt(np.max(gx * gx + gy * gy)))


def _cell_gradient_sq(vhat, n_points):
    z, w = _leggauss(n_points)
    if isinstance(vhat, DGField1D):
        return 0.5 * vhat.mesh.widths * ((vhat.derivative(z) ** 2) @ w)
    gx, gy = vhat.gradient(z, z)
    return np.einsum("ijkl,k,l->ij", gx * gx + gy * gy, w, w) * vhat.mesh.areas / 4.0


def modeling_term(vhat, eps, eps_hat):
    """Per-cell int_K (eps - eps_hat) |grad vhat|^2."""
    deg = vhat.degree if isinstance(vhat, DGField1D) else vhat.degree[0]
    e = np.asarray(getattr(eps_hat, "values", eps_hat), dtype=float)
    return (eps - e) * _cell_gradient_sq(vhat, deg + 1)


def modeling_term_step(vhat0, vhat1, eps, eps_hat, tau):
    """Per-cell space-time modelling term over a step with vhat linear in time."""
    deg = vhat0.degree if isinstance(vhat0, DGField1D) else vhat0.degree[0]
    e = np.asarray(getattr(eps_hat, "values", eps_hat), dtype=float)
    weight = eps - e
    if not np.any(weight):
        return np.zeros_like(weight)
    acc = 0.0
    for th, wt in zip(TIME_POINTS, TIME_WEIGHTS):
        vt = vhat0 * (1 - th) + vhat1 * th
        acc = acc + wt * _cell_gradient_sq(vt, deg + 1)
    return tau * weight * acc


def parabolic_term_step(split: ResidualSplit, evaluator: DualNormEvaluator):
    """Per-cell attribution of int_step ||R_P||^2_{H^-1}; zero if R_P vanishes."""
    shape = split.eps_hat.shape
    if not split.parabolic_active:
        return np.zeros(shape)
    z = evaluator.points
    psi = [evaluator.riesz(*split.rp_data(th, z)) for th in (0.0, 1.0)]
    c00 = evaluator.cell_inner(psi[0], psi[0])
    c01 = evaluator.cell_inner(psi[0], psi[1])
    c11 = evaluator.cell_inner(psi[1], psi[1])
    return split.tau / 3.0 * (c00 + c01 + c11)


def discretization_term(rh_cells, rp_cells, eps):
    """Per-cell ||R_H||^2 + ||R_P||^2 / eps, and the global value."""
    rh = np.asarray(rh_cells, dtype=float)
    rp = np.asarray(rp_cells, dtype=float)
    if eps <= 0:
        if np.any(rp != 0):
            raise InvalidConfigurationError("a nonzero parabolic residual needs eps > 0")
        cells = rh
    else:
        cells = rh + rp / eps
    return cells, float(cells.sum())


def initial_term(u0, vhat, n_points=None):
    """||u0 - vhat||^2 by dense quadrature."""
    deg = vhat.degree if isinstance(vhat, DGField1D) else vhat.degree[0]
    z, w = _leggauss(n_points or deg + 6)
    mesh = vhat.mesh
    if isinstance(vhat, DGField1D):
        d = u0(mesh.to_physical(z)) - vhat.evaluate(z)
        return float(np.sum(0.5 * mesh.widths[:, None] * w * d * d))
    xc = 0.5 * (mesh.x_nodes[:-1] + mesh.x_nodes[1:])
    yc = 0.5 * (mesh.y_nodes[:-1] + mesh.y_nodes[1:])
    hx, hy = mesh.widths
    X = (xc[:, None] + 0.5 * hx[:, None] * z)[:, None, :, None]
    Y = (yc[:, None] + 0.5 * hy[:, None] * z)[None, :, None, :]
    d = u0(X, Y) - vhat.evaluate(z, z)
    return float(np.sum(np.einsum("ijkl,k,l->ij", d * d, w, w) * mesh.areas / 4.0))


def l2_distance(a, b, n_points=None):
    """||a - b||_{L2} for fields of any degrees.

    In 1D the meshes may differ; the integral then runs over the finer one,
    which is exact when it refines the coarser.
    """
    if isinstance(a, DGField1D) and a.mesh is not b.mesh and not (
            a.mesh.n_cells == b.mesh.n_cells and np.array_equal(a.mesh.nodes, b.mesh.nodes)):
        fine, coarse = (a, b) if a.mesh.n_cells >= b.mesh.n_cells else (b, a)
        deg = max(a.degree, b.degree)
        z, w = _leggauss(n_points or deg + 2)
        x = fine.mesh.to_physical(z)
        d = fine.evaluate(z) - coarse(x)
        return float(np.sqrt(np.sum(0.5 * fine.mesh.widths[:, None] * w * d * d)))
    if isinstance(a, DGField1D):
        deg = max(a.degree, b.degree)
        z, w = _leggauss(n_points or deg + 2)
        d = a.evaluate(z) - b.evaluate(z)
        return float(np.sqrt(np.sum(0.5 * a.mesh.widths[:, None] * w * d * d)))
    deg = max(a.degree[0], a.degree[1], b.degree[0], b.degree[1])
    z, w = _leggauss(n_points or deg + 2)
    d = a.evaluate(z, z) - b.evaluate(z, z)
    return float(np.sqrt(np.sum(np.einsum("ijkl,k,l->ij", d * d, w, w) * a.mesh.areas / 4.0)))


def linf_distance(a, b, n_sample=6):
    """Max |a - b| on a per-cell sample grid including the cell ends."""
    s = np.linspace(-1.0, 1.0, n_sample)
    if isinstance(a, DGField1D):
        return float(np.max(np.abs(a.evaluate(s) - b.evaluate(s))))
    return float(np.max(np.abs(a.evaluate(s, s) - b.evaluate(s, s))))


@dataclass
class EstimatorBreakdown:
    """Running record of the estimator in time.

    Lists hold one entry per completed step.  ``cell_em`` and ``cell_ed``
    keep the per-cell increments of the latest step.
    """

    init_term: float
    c_f: float
    grad_max: float = 0.0
    times: list = field(default_factory=list)
    em_inc: list = field(default_factory=list)
    ed_inc: list = field(default_factory=list)
    cum_em: float = 0.0
    cum_ed: float = 0.0
    cell_em: np.ndarray = None
    cell_ed: np.ndarray = None
    bounds: list = field(default_factory=list)

    def record(self, t, em_cells, ed_cells, grad):
        em_cells = np.asarray(em_cells, dtype=float)
        ed_cells = np.asarray(ed_cells, dtype=float)
        em, ed = float(em_cells.sum()), float(ed_cells.sum())
        self.times.append(float(t))
        self.em_inc.append(em)
        self.ed_inc.append(ed)
        self.cum_em += em
        self.cum_ed += ed
        self.grad_max = max(self.grad_max, float(grad))
        self.cell_em, self.cell_ed = em_cells, ed_cells
        self.bounds.append(self.total_bound(t))

    def gronwall_factor(self, t):
        # past a shock the exponent is huge; report inf rather than fail
        try:
            return math.exp((self.grad_max * self.c_f + 1.0) * t)
        except OverflowError:
            return math.inf

    def total_bound(self, t=None):
        if t is None:
            t = self.times[-1] if self.times else 0.0
        return (self.init_term + self.cum_em + self.cum_ed) * self.gronwall_factor(t)


def total_bound(breakdown: EstimatorBreakdown, t):
    return breakdown.total_bound(t)


class StepEstimator:
    """Evaluates per-cell E_M and E_D increments for consecutive steps."""

    def __init__(self, mesh, degree, flux, eps, tau):
        self.mesh = mesh
        self.degree = degree
        self.flux = flux
        self.eps = float(eps)
        self.tau = float(tau)
        self._dual = None

    @property
    def dual(self):
        if self._dual is None:
            self._dual = DualNormEvaluator(self.mesh, self.degree + 2)
        return self._dual

    def increments(self, split: ResidualSplit):
        """(em_cells, ed_cells, rh_cells, rp_cells) for one step."""
        em = modeling_term_step(split.vhat0, split.vhat1, self.eps, split.eps_hat, self.tau)
        rh = split.rh_squared()
        rp = parabolic_term_step(split, self.dual) if split.parabolic_active else np.zeros_like(rh)
        ed, _ = discretization_term(rh, rp, self.eps)
        return em, ed, rh, rp
