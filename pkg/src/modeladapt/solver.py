"""Semi-discrete dG operator and first-order IMEX time stepping.

One step solves

    (M + tau A(eps_hat)) v^{n+1} = M (v^n + tau H(v^n))

where H is the explicit hyperbolic right-hand side and A the interior
penalty operator.  The factorisation is cached and only recomputed when the
model field changes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dg import DGField1D, DGField2D, _leggauss, edge_traces, l2_project, mass_diagonal, reference
from .errors import InvalidParameterError, SingularOperatorError
from .flux import FluxModel, RichtmyerFlux
from .ip import assemble_ip
from .mesh import Mesh1D, Mesh2D


def flux_points(q):
    """Quadrature size for flux integrals: exact to degree 3q+1."""
    return math.ceil((3 * q + 2) / 2)


@dataclass
class SolverConfig:
    mesh: object
    flux: FluxModel
    initial: Callable
    tau: float
    final_time: float
    degree: int = 1
    eps: float = 0.0
    sigma: float = 10.0

    def __post_init__(self):
        if not self.tau > 0 or not self.final_time > 0:
            raise InvalidParameterError("tau and final_time must be positive")
        if not self.sigma > 0:
            raise InvalidParameterError("sigma must be positive")
        if self.eps < 0:
            raise InvalidParameterError("eps must be non-negative")
        if self.degree < 0:
            raise InvalidParameterError("degree must be non-negative")

    @property
    def n_steps(self):
        return max(1, int(round(self.final_time / self.tau)))

    @property
    def periodic(self):
        return self.mesh.periodic

    def numerical_flux(self):
        """Richtmyer flux per direction, with tau over the local width."""
        if isinstance(self.mesh, Mesh1D):
            return (RichtmyerFlux(self.flux, self.tau / self.mesh.h),)
        hx, hy = self.mesh.widths
        return (RichtmyerFlux(self.flux, self.tau / float(hx[0])),
                RichtmyerFlux(self.flux, self.tau / float(hy[0])))

    def initial_field(self):
        return l2_project(self.initial, self.mesh, self.degree)


@dataclass
class HyperbolicData:
    """Explicit right-hand side and the edge data it was built from.

    ``parts`` holds the contribution of each direction to ``rhs`` (they sum
    to it).  ``edge_flux`` holds the numerical flux per edge in 1D, and the
    edge projection P_q[F] at the transverse Gauss nodes in 2D.
    """

    rhs: object
    parts: tuple
    edge_flux: tuple


def _normalize_numflux(numflux, dim):
    if isinstance(numflux, RichtmyerFlux):
        return (numflux,) * dim
    numflux = tuple(numflux)
    if len(numflux) == 1:
        return numflux * dim
    return numflux


def hyperbolic_data(v, flux, numflux, ghost=0.0):
    """Assemble the dG hyperbolic residual of ``v``.

    Solves  int d_t v phi = int f(v) . grad phi - int_E F(v-, v+) [[phi]]
    for every basis function and divides by the diagonal mass matrix.
    """
    if isinstance(v, DGField1D):
        (nf,) = _normalize_numflux(numflux, 1)
        ref = v.ref
        z, wq = _leggauss(flux_points(v.degree))
        vq = v.evaluate(z)
        flux.check_states(vq)
        vol = (flux.evaluate(vq) * wq) @ ref.derivs_at(z)        # (N, P)
        tr = edge_traces(v, ghost)
        F, _ = nf(tr.minus, tr.plus)
        mesh = v.mesh
        le, re = mesh.cell_edges(np.arange(mesh.n_cells))
        b = vol - np.outer(F[re], ref.end_values[1]) + np.outer(F[le], ref.end_values[0])
        rhs = DGField1D(mesh, v.degree, b / mass_diagonal(v))
        return HyperbolicData(rhs, (rhs,), (F,))

    if not isinstance(v, DGField2D):
        raise TypeError("unsupported field type")
    if v.degree[0] != v.degree[1]:
        raise InvalidParameterError("the 2D scheme uses equal degrees (q, q)")
    if not v.mesh.periodic:
        raise InvalidParameterError("the 2D scheme is implemented for periodic meshes")
    nfx, nfy = _normalize_numflux(numflux, 2)
    q = v.degree[0]
    ref = reference(q)
    mesh = v.mesh
    hx, hy = mesh.widths
    z, wq = _leggauss(flux_points(q))
    L, D = ref.values_at(z), ref.derivs_at(z)
    vq = v.evaluate(z, z)                                        # (nx, ny, n, n)
    flux.check_states(vq)
    f1, f2 = flux.evaluate(vq, 0), flux.evaluate(vq, 1)
    W = np.outer(wq, wq)
    # int f1 d_x phi_ab = hy/2 sum_kl w_k w_l f1_kl l_a'(z_k) l_b(z_l)
    vol_x = np.einsum("ijkl,kl,ka,lb->ijab", f1, W, D, L, optimize=True) * (0.5 * hy)[None, :, None, None]
    vol_y = np.einsum("ijkl,kl,ka,lb->ijab", f2, W, L, D, optimize=True) * (0.5 * hx)[:, None, None, None]

    # edge traces at the over-integration points along each edge
    west = np.einsum("ijab,a,lb->ijl", v.values, ref.end_values[0], L, optimize=True)
    east = np.einsum("ijab,a,lb->ijl", v.values, ref.end_values[1], L, optimize=True)
    south = np.einsum("ijab,b,ka->ijk", v.values, ref.end_values[0], L, optimize=True)
    north = np.einsum("ijab,b,ka->ijk", v.values, ref.end_values[1], L, optimize=True)
    Fv, _ = nfx(np.roll(east, 1, axis=0), west, 0)              # vertical edge left of cell (i, j)
    Fh, _ = nfy(np.roll(north, 1, axis=1), south, 1)            # horizontal edge below cell (i, j)
    # P_q projection onto the edge Gauss nodes
    pFv = (Fv * wq) @ L / ref.weights
    pFh = (Fh * wq) @ L / ref.weights

    mass = mass_diagonal(v)
    wb = ref.weights
    surf_x = (np.einsum("ijb,a->ijab", np.roll(pFv, -1, axis=0), ref.end_values[1])
              - np.einsum("ijb,a->ijab", pFv, ref.end_values[0])) * (0.5 * hy)[None, :, None, None] * wb
    surf_y = (np.einsum("ija,b->ijab", np.roll(pFh, -1, axis=1), ref.end_values[1])
              - np.einsum("ija,b->ijab", pFh, ref.end_values[0])) * (0.5 * hx)[:, None, None, None] * wb[:, None]
    Hx = DGField2D(mesh, (q, q), (vol_x - surf_x) / mass)
    Hy = DGField2D(mesh, (q, q), (vol_y - surf_y) / mass)
    return HyperbolicData(Hx + Hy, (Hx, Hy), (pFv, pFh))


def hyperbolic_rhs(v, flux, numflux, ghost=0.0):
    """Mass-normalised hyperbolic right-hand side H(v) as a field."""
    return hyperbolic_data(v, flux, numflux, ghost).rhs


class IMEXStepper:
    """First-order IMEX integrator with a cached implicit operator."""

    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        self.numflux = cfg.numerical_flux()
        self.mass = mass_diagonal(cfg.mesh, cfg.degree if isinstance(cfg.mesh, Mesh1D)
                                  else (cfg.degree, cfg.degree)).ravel()
        self._key = None
        self._lu = None
        self._A = None

    def operator(self, eps_hat):
        """IP matrix for ``eps_hat`` (cached together with its factorisation)."""
        vals = np.asarray(getattr(eps_hat, "values", eps_hat), dtype=float)
        key = vals.tobytes()
        if key != self._key:
            self._key = key
            if not np.any(vals):
                self._A, self._lu = None, None
            else:
                deg = self.cfg.degree if isinstance(self.cfg.mesh, Mesh1D) else (self.cfg.degree,) * 2
                self._A = assemble_ip(self.cfg.mesh, deg, vals, self.cfg.sigma)
                system = (sp.diags(self.mass) + self.cfg.tau * self._A).tocsc()
                try:
                    self._lu = spla.splu(system)
                except RuntimeError as exc:
                    raise SingularOperatorError(f"implicit system is singular: {exc}") from exc
        return self._A

    def step(self, v, eps_hat, data=None):
        """Advance one step; returns (v^{n+1}, hyperbolic data of v^n)."""
        data = data or hyperbolic_data(v, self.cfg.flux, self.numflux)
        explicit = v.values + self.cfg.tau * data.rhs.values
        A = self.operator(eps_hat)
        if A is None:
            new = explicit
        else:
            rhs = self.mass * explicit.ravel()
            new = self._lu.solve(rhs).reshape(v.values.shape)
            if not np.all(np.isfinite(new)):
                raise SingularOperatorError("implicit solve produced non-finite values")
        return type(v)(v.mesh, v.degree, new), data


def imex_step(v_h, eps_hat, cfg: SolverConfig):
    """One IMEX step of the scheme with model field ``eps_hat``."""
    return IMEXStepper(cfg).step(v_h, eps_hat)[0]


@dataclass
class TimestepRecord:
    t: float
    v_h: object
    eps_hat: np.ndarray
    increments: Optional[dict] = None


@dataclass
class Trajectory:
    records: list = field(default_factory=list)

    @property
    def times(self):
        return np.array([r.t for r in self.records])

    def at(self, t):
        """Record nearest to time ``t``."""
        return self.records[int(np.argmin(np.abs(self.times - t)))]

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def _cell_shape(mesh):
    return (mesh.n_cells,) if isinstance(mesh, Mesh1D) else mesh.shape


def snapshot_steps(times, tau):
    return {int(round(t / tau)) for t in times}


def run_fixed_model(cfg: SolverConfig, eps_hat, record="all", snapshot_times=(), n_steps=None):
    """Integrate with a fixed model field; ``record`` is 'all', 'snapshots' or 'final'."""
    stepper = IMEXStepper(cfg)
    eps_hat = np.broadcast_to(np.asarray(eps_hat, dtype=float), _cell_shape(cfg.mesh)).copy()
    v = cfg.initial_field()
    n = cfg.n_steps if n_steps is None else int(n_steps)
    wanted = snapshot_steps(snapshot_times, cfg.tau)
    traj = Trajectory()
    if record == "all" or 0 in wanted:
        traj.records.append(TimestepRecord(0.0, v, eps_hat))
    for k in range(1, n + 1):
        v, _ = stepper.step(v, eps_hat)
        if record == "all" or k in wanted or (record == "final" and k == n):
            traj.records.append(TimestepRecord(k * cfg.tau, v, eps_hat))
    return traj


def run_reference(cfg: SolverConfig, record="all", snapshot_times=(), n_steps=None):
    """Full-model baseline: eps_hat = eps everywhere for every step."""
    return run_fixed_model(cfg, cfg.eps, record, snapshot_times, n_steps)
