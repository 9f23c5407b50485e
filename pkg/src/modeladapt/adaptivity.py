"""Model adaptation: switch eps_hat between 0 and eps per cell and step."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .dg import DGField1D
from .errors import InvalidParameterError
from .estimator import (EstimatorBreakdown, StepEstimator, gradient_max, initial_term,
                        modeling_term_step)
from .mesh import Mesh1D
from .reconstruction import reconstruct, split_residual
from .solver import IMEXStepper, SolverConfig


@dataclass
class ModelField:
    """Piecewise constant eps_hat with values in {0, eps} and a change log."""

    eps: float
    values: np.ndarray
    log: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        bad = (self.values != 0.0) & (self.values != self.eps)
        if np.any(bad):
            raise InvalidParameterError("eps_hat must take only the values 0 and eps")

    @classmethod
    def zeros(cls, mesh, eps):
        shape = (mesh.n_cells,) if isinstance(mesh, Mesh1D) else mesh.shape
        return cls(float(eps), np.zeros(shape))

    @property
    def active(self):
        """Boolean mask of cells running the complex model."""
        return self.values > 0

    def measure(self, mesh):
        areas = mesh.widths if isinstance(mesh, Mesh1D) else mesh.areas
        return float(np.sum(areas[self.active]))

    def copy(self):
        return ModelField(self.eps, self.values.copy(), self.log)


@dataclass(frozen=True)
class AdaptConfig:
    tol: float
    tol_c: float
    eps: float
    theta: float = 0.5
    # indicator used by the coarsening loop, see run_adaptive
    coarsening: str = "potential"

    def __post_init__(self):
        if not (self.tol > 0 and self.tol_c > 0):
            raise InvalidParameterError("tol and tol_c must be positive")
        if not 0 < self.theta <= 1:
            raise InvalidParameterError("theta must lie in (0, 1]")
        if self.eps < 0:
            raise InvalidParameterError("eps must be non-negative")
        if self.coarsening not in ("potential", "actual"):
            raise InvalidParameterError("coarsening must be 'potential' or 'actual'")


def dorfler_mark(indicator, theta):
    """Smallest set of cells whose indicators sum to at least theta * total.

    Cells are taken in decreasing order of the indicator; ties go to the
    lower flat index.  Returns a boolean mask of the indicator's shape.
    """
    ind = np.asarray(indicator, dtype=float)
    flat = ind.ravel()
    total = flat.sum()
    mask = np.zeros(flat.size, dtype=bool)
    if total <= 0:
        return mask.reshape(ind.shape)
    order = np.lexsort((np.arange(flat.size), -flat))
    csum = np.cumsum(flat[order])
    count = int(np.searchsorted(csum, theta * total * (1 - 1e-14), side="left")) + 1
    mask[order[:min(count, flat.size)]] = True
    return mask.reshape(ind.shape)


def adapt_model(e_m, e_d, eps_hat: ModelField, cfg: AdaptConfig, cell_sizes, step=None, e_m_coarsen=None):
    """One pass of the adaptation loop.

    Marks by Doerfler on e_m + e_d when the global sum exceeds tol, then
    resets eps_hat to 0 wherever e_m < |K| tol_c tol / eps (``e_m_coarsen``
    replaces e_m in that test when given).  Returns a new :class:`ModelField`.
    """
    e_m = np.asarray(e_m, dtype=float)
    e_d = np.asarray(e_d, dtype=float)
    out = eps_hat.copy()
    if cfg.eps == 0:
        out.values[:] = 0.0
        return out
    ind = e_m + e_d
    refined = np.zeros(ind.shape, dtype=bool)
    if ind.sum() > cfg.tol:
        refined = dorfler_mark(ind, cfg.theta)
        out.values[refined] = cfg.eps
    threshold = np.asarray(cell_sizes) * cfg.tol_c * cfg.tol / cfg.eps
    coarse = (e_m if e_m_coarsen is None else np.asarray(e_m_coarsen)) < threshold
    out.values[coarse] = 0.0
    changed = np.flatnonzero((out.values != eps_hat.values).ravel())
    if changed.size:
        out.log = eps_hat.log + [(step, changed)]
    return out


@dataclass
class StepInfo:
    """State after step ``n`` (time ``t``)."""

    n: int
    t: float
    v_h: object
    vhat: object
    eps_used: np.ndarray
    eps_hat: ModelField
    em_cells: np.ndarray
    ed_cells: np.ndarray
    breakdown: EstimatorBreakdown
    rh_cells: Optional[np.ndarray] = None
    rp_cells: Optional[np.ndarray] = None


class ModelAdaptiveSolver:
    """Time loop of the model-adaptive scheme with the estimator in the loop.

    With ``adaptive=False`` eps_hat stays at its initial value (``fixed_eps``
    everywhere) and only the estimator runs.

    ``AdaptConfig.coarsening`` selects the indicator of the coarsening loop.
    ``'actual'`` uses the step's E_M increment; since E_M vanishes on cells
    running the complex model, those cells are reset after every step.
    ``'potential'`` uses the increment the cell would produce with eps_hat = 0,
    tau eps int |grad vhat|^2, which equals E_M on simple-model cells.
    """

    def __init__(self, cfg: SolverConfig, acfg: Optional[AdaptConfig] = None, adaptive=True, fixed_eps=0.0):
        self.cfg = cfg
        self.acfg = acfg or AdaptConfig(tol=1e-2, tol_c=1e-3, eps=cfg.eps)
        self.adaptive = adaptive
        self.fixed_eps = fixed_eps
        self.stepper = IMEXStepper(cfg)
        self.estimator = StepEstimator(cfg.mesh, cfg.degree, cfg.flux, cfg.eps, cfg.tau)
        mesh = cfg.mesh
        self.cell_sizes = mesh.widths if isinstance(mesh, Mesh1D) else mesh.areas

    def initial(self):
        cfg = self.cfg
        v = cfg.initial_field()
        vhat, _, data = reconstruct(v, cfg.flux, self.stepper.numflux)
        breakdown = EstimatorBreakdown(initial_term(cfg.initial, vhat), cfg.flux.second_derivative_bound())
        breakdown.grad_max = gradient_max(vhat)
        eps_hat = ModelField.zeros(cfg.mesh, cfg.eps)
        if not self.adaptive and self.fixed_eps:
            eps_hat.values[:] = self.fixed_eps
        return v, vhat, data, eps_hat, breakdown

    def iterate(self, n_steps=None) -> Iterator[StepInfo]:
        cfg = self.cfg
        v, vhat, data, eps_hat, breakdown = self.initial()
        n_total = cfg.n_steps if n_steps is None else int(n_steps)
        yield StepInfo(0, 0.0, v, vhat, eps_hat.values.copy(), eps_hat,
                       np.zeros_like(eps_hat.values), np.zeros_like(eps_hat.values), breakdown)
        for n in range(1, n_total + 1):
            eps_used = eps_hat.values.copy()
            v_new, _ = self.stepper.step(v, eps_used, data)
            A = self.stepper.operator(eps_used)
            diffusion = None
            if A is not None:
                lv = (A @ v_new.values.ravel()) / self.stepper.mass
                diffusion = type(v_new)(v_new.mesh, v_new.degree, lv.reshape(v_new.values.shape))
            vhat_new, _, data_new = reconstruct(v_new, cfg.flux, self.stepper.numflux)
            split = split_residual(v, v_new, vhat, vhat_new, data.rhs, eps_used, cfg.flux, cfg.tau, diffusion)
            em, ed, rh, rp = self.estimator.increments(split)
            t = n * cfg.tau
            breakdown.record(t, em, ed, gradient_max(vhat_new))
            if self.adaptive:
                if self.acfg.coarsening == "potential":
                    em_c = modeling_term_step(vhat, vhat_new, cfg.eps, 0.0 * eps_used, cfg.tau)
                else:
                    em_c = em
                # marking uses the actual increments; coarsening the chosen E_M
                eps_hat = adapt_model(em, ed, eps_hat, self.acfg, self.cell_sizes, n, em_c)
            v, vhat, data = v_new, vhat_new, data_new
            yield StepInfo(n, t, v, vhat, eps_used, eps_hat, em, ed, breakdown, rh, rp)

    def run(self, n_steps=None, snapshot_times=()):
        """Run to the end; returns (last StepInfo, {snapshot step: StepInfo})."""
        wanted = {int(round(t / self.cfg.tau)) for t in snapshot_times}
        snaps = {}
        info = None
        for info in self.iterate(n_steps):
            if info.n in wanted:
                snaps[info.n] = info
        return info, snaps


def run_adaptive(cfg: SolverConfig, acfg: AdaptConfig, n_steps=None, snapshot_times=()):
    """Model-adaptive run; returns (final StepInfo, snapshots by step index)."""
    return ModelAdaptiveSolver(cfg, acfg).run(n_steps, snapshot_times)
