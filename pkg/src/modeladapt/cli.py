"""Command line driver: presets, config files, CSV and field dumps.

    modeladapt run test1 --steps 100 --out results/
    modeladapt run my.cfg --reference off

A config file is a flat ``key = value`` list; see :data:`CONFIG_KEYS`.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .adaptivity import AdaptConfig, ModelAdaptiveSolver
from .dg import DGField1D, DGField2D
from .errors import ModelAdaptError, InvalidConfigurationError
from .estimator import l2_distance, linf_distance
from .flux import burgers_1d, burgers_2d, linear_advection
from .mesh import Mesh1D, build_mesh_1d, build_mesh_2d
from .solver import IMEXStepper, SolverConfig

OUT_ENV = "MODELADAPT_OUT"

CSV_COLUMNS = ("t", "E_M_inc", "E_D_inc", "cum_E_M", "cum_E_D", "total_bound", "err_L2", "measure_eps")

INITIAL_CONDITIONS = {
    1: {
        "sin": lambda x: np.sin(x),
        "cos": lambda x: np.cos(x),
        "gauss": lambda x: np.exp(-10.0 * x ** 2),
    },
    2: {
        "gauss": lambda x, y: np.exp(-10.0 * (x ** 2 + y ** 2)),
        "sin": lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y),
    },
}


@dataclass
class RunConfig:
    name: str = "custom"
    dim: int = 1
    domain: tuple = (-math.pi, math.pi)
    cells: tuple = (1000,)
    degree: int = 1
    tau: float = 1e-4
    final_time: float = 2.5
    eps: float = 0.005
    sigma: float = 10.0
    tol: float = 1e-2
    tol_c: float = 1e-3
    theta: float = 0.5
    boundary: str = "dirichlet"
    flux: str = "burgers"
    initial: str = "sin"
    coarsening: str = "potential"
    snapshots: tuple = ()
    out: str = ""

    def validate(self):
        if self.dim not in (1, 2):
            raise InvalidConfigurationError("dim must be 1 or 2")
        for key in ("tau", "final_time", "sigma", "tol", "tol_c", "theta"):
            if not getattr(self, key) > 0:
                raise InvalidConfigurationError(f"{key} must be positive")
        if self.eps < 0:
            raise InvalidConfigurationError("eps must be non-negative")
        if self.theta > 1:
            raise InvalidConfigurationError("theta must lie in (0, 1]")
        if self.boundary not in ("dirichlet", "periodic"):
            raise InvalidConfigurationError("boundary must be 'dirichlet' or 'periodic'")
        if self.dim == 2 and self.boundary != "periodic":
            raise InvalidConfigurationError("2D runs need periodic boundaries")
        if self.flux not in ("burgers", "linear"):
            raise InvalidConfigurationError("flux must be 'burgers' or 'linear'")
        if self.initial not in INITIAL_CONDITIONS[self.dim]:
            raise InvalidConfigurationError(f"unknown initial condition {self.initial!r} for dim {self.dim}")
        if len(self.cells) not in (1, self.dim) or min(self.cells) < 2:
            raise InvalidConfigurationError("cells must hold one count >= 2 (or one per direction)")
        if any(t < 0 or t > self.final_time + 1e-12 for t in self.snapshots):
            raise InvalidConfigurationError("snapshot times must lie in [0, final_time]")
        return self

    def mesh(self):
        periodic = self.boundary == "periodic"
        if self.dim == 1:
            return build_mesh_1d(self.domain, self.cells[0], periodic)
        nx = self.cells[0]
        ny = self.cells[-1]
        return build_mesh_2d(self.domain, nx, ny, periodic)

    def flux_model(self):
        if self.flux == "linear":
            return linear_advection(1.0 if self.dim == 1 else (1.0, 1.0))
        return burgers_1d() if self.dim == 1 else burgers_2d()

    def solver_config(self):
        return SolverConfig(self.mesh(), self.flux_model(), INITIAL_CONDITIONS[self.dim][self.initial],
                            tau=self.tau, final_time=self.final_time, degree=self.degree,
                            eps=self.eps, sigma=self.sigma)

    def adapt_config(self):
        return AdaptConfig(self.tol, self.tol_c, self.eps, self.theta, self.coarsening)


def preset_test1():
    """Viscous/inviscid Burgers on [-pi, pi] with u0 = sin x and zero boundary data."""
    return RunConfig(name="test1", dim=1, domain=(-math.pi, math.pi), cells=(1000,), degree=1,
                     tau=1e-4, final_time=2.5, eps=0.005, sigma=10.0, tol=1e-2, tol_c=1e-3,
                     boundary="dirichlet", initial="sin",
                     snapshots=(0.0, 0.5375, 1.1625, 1.3, 1.55, 2.5))


def preset_test2():
    """2D Burgers bump exp(-10|x|^2) on the periodic square [-1, 1]^2.

    71 cells per direction give h = 2/71, the closest match to sqrt(2)/50.
    """
    return RunConfig(name="test2", dim=2, domain=(-1.0, 1.0), cells=(71, 71), degree=1,
                     tau=math.sqrt(2) / 400, final_time=1.5, eps=0.01, sigma=10.0,
                     tol=1e-2, tol_c=1e-3, boundary="periodic", initial="gauss",
                     snapshots=(0.0025, 0.25, 0.5, 1.0, 1.25, 1.5))


PRESETS = {"test1": preset_test1, "test2": preset_test2}

CONFIG_KEYS = {
    "name": str, "dim": int, "domain": "floats", "cells": "ints", "degree": int,
    "tau": float, "final_time": float, "eps": float, "sigma": float, "tol": float,
    "tol_c": float, "theta": float, "boundary": str, "flux": str, "initial": str,
    "coarsening": str, "snapshots": "floats", "out": str, "preset": str,
}


def _parse_value(kind, raw):
    raw = raw.strip()
    if kind == "floats":
        return tuple(_float(t) for t in raw.replace(",", " ").split())
    if kind == "ints":
        return tuple(int(t) for t in raw.replace(",", " ").split())
    if kind is float:
        return _float(raw)
    return kind(raw)


def _float(token):
    # allow pi and sqrt(2)-style expressions without eval
    t = token.strip().lower()
    sign = -1.0 if t.startswith("-") else 1.0
    t = t.lstrip("+-")
    if t == "pi":
        return sign * math.pi
    if t.startswith("sqrt(") and t.endswith(")") and "/" not in t:
        return sign * math.sqrt(float(t[5:-1]))
    if t.startswith("sqrt(") and ")/" in t:
        inner, den = t[5:].split(")/")
        return sign * math.sqrt(float(inner)) / float(den)
    return sign * float(t)


def load_config(path):
    """Read a flat key = value file into a :class:`RunConfig`.

    A ``preset`` key starts from that preset and overrides the given keys.
    """
    text = Path(path).read_text()
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise InvalidConfigurationError(f"cannot parse {path}: {exc}") from exc
    items = dict(parser["run"])
    unknown = set(items) - set(CONFIG_KEYS)
    if unknown:
        raise InvalidConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    base = RunConfig()
    if "preset" in items:
        preset = items.pop("preset").strip()
        if preset not in PRESETS:
            raise InvalidConfigurationError(f"unknown preset {preset!r}")
        base = PRESETS[preset]()
    try:
        values = {k: _parse_value(CONFIG_KEYS[k], v) for k, v in items.items()}
    except ValueError as exc:
        raise InvalidConfigurationError(f"bad value in {path}: {exc}") from exc
    return replace(base, **values).validate()


def resolve_config(name_or_path):
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]().validate()
    if not Path(name_or_path).is_file():
        raise InvalidConfigurationError(f"{name_or_path!r} is neither a preset ({', '.join(PRESETS)}) nor a file")
    return load_config(name_or_path)


def _fmt(x):
    if x is None:
        return ""
    return repr(float(x))


def _time_label(t):
    return f"{t:.4f}"


def dump_fields(path, v_h, vhat, eps_hat):
    """Write one row per Gauss node of ``v_h``: coordinates, v_h, vhat, eps_hat."""
    if isinstance(v_h, DGField1D):
        x = v_h.nodes_physical()
        cols = [x.ravel(), v_h.values.ravel(), vhat(x).ravel(),
                np.repeat(np.asarray(eps_hat, float), v_h.degree + 1)]
        header = "x v_h vhat eps_hat"
    else:
        mesh = v_h.mesh
        (p, q) = v_h.degree
        rx, ry = v_h.refs
        hx, hy = mesh.widths
        xc = 0.5 * (mesh.x_nodes[:-1] + mesh.x_nodes[1:])
        yc = 0.5 * (mesh.y_nodes[:-1] + mesh.y_nodes[1:])
        X = (xc[:, None] + 0.5 * hx[:, None] * rx.nodes)[:, None, :, None]
        Y = (yc[:, None] + 0.5 * hy[:, None] * ry.nodes)[None, :, None, :]
        X, Y = np.broadcast_arrays(X, Y)
        vals = v_h.values
        vh = vhat(X, Y)
        eh = np.broadcast_to(np.asarray(eps_hat, float)[:, :, None, None], vals.shape)
        cols = [X.ravel(), Y.ravel(), vals.ravel(), vh.ravel(), eh.ravel()]
        header = "x y v_h vhat eps_hat"
    np.savetxt(path, np.column_stack(cols), fmt="%.17g", header=header, comments="# ")


def read_field_dump(path, mesh, degree):
    """Rebuild the dG field ``v_h`` from a dump written by :func:`dump_fields`."""
    data = np.loadtxt(path, ndmin=2)
    if isinstance(mesh, Mesh1D):
        return DGField1D(mesh, degree, data[:, 1].reshape(mesh.n_cells, degree + 1))
    p, q = (degree, degree) if np.ndim(degree) == 0 else degree
    return DGField2D(mesh, (p, q), data[:, 2].reshape(mesh.nx, mesh.ny, p + 1, q + 1))


def run(config: RunConfig, reference=True, steps=None, out=None, theta=None, log=None):
    """Run the adaptive scheme (and the full-model reference in lockstep).

    Writes ``estimators.csv``, ``fields_t<time>.dat`` per snapshot and
    ``summary.json`` into the output directory; returns the summary dict.
    """
    if theta is not None:
        config = replace(config, theta=float(theta))
    config.validate()
    out_dir = Path(out or os.environ.get(OUT_ENV) or config.out or f"modeladapt_{config.name}")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise InvalidConfigurationError(f"output directory {out_dir} is not writable: {exc}") from exc

    cfg = config.solver_config()
    mesh = cfg.mesh
    solver = ModelAdaptiveSolver(cfg, config.adapt_config())
    n_total = cfg.n_steps if steps is None else int(steps)
    snap_steps = {int(round(t / cfg.tau)): t for t in config.snapshots}
    ref_stepper = IMEXStepper(cfg) if reference else None
    full = np.full((mesh.n_cells,) if isinstance(mesh, Mesh1D) else mesh.shape, cfg.eps)
    v_ref = cfg.initial_field() if reference else None

    peak_measure = 0.0
    err_l2 = err_linf = None
    snap_errors = {}
    info = None
    with open(out_dir / "estimators.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for info in solver.iterate(n_total):
            if reference and info.n > 0:
                v_ref, _ = ref_stepper.step(v_ref, full)
            if reference:
                err_l2 = l2_distance(info.v_h, v_ref)
            measure = info.eps_hat.measure(mesh)
            peak_measure = max(peak_measure, measure)
            if info.n > 0:
                b = info.breakdown
                writer.writerow([_fmt(info.t), _fmt(b.em_inc[-1]), _fmt(b.ed_inc[-1]), _fmt(b.cum_em),
                                 _fmt(b.cum_ed), _fmt(b.bounds[-1]), _fmt(err_l2), _fmt(measure)])
            if info.n in snap_steps:
                dump_fields(out_dir / f"fields_t{_time_label(info.t)}.dat", info.v_h, info.vhat,
                            info.eps_hat.values)
                if reference:
                    snap_errors[_time_label(info.t)] = {"err_L2": err_l2,
                                                        "err_Linf": linf_distance(info.v_h, v_ref)}
            if log is not None and info.n and info.n % max(1, n_total // 10) == 0:
                log(f"step {info.n}/{n_total} t={info.t:.4f} measure={measure:.4g}")

    b = info.breakdown
    if reference:
        err_linf = linf_distance(info.v_h, v_ref)
    summary = {
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(config).items()},
        "steps": n_total,
        "final_time": info.t,
        "final_bound": b.total_bound(info.t) if b.times else b.init_term,
        "cum_E_M": b.cum_em,
        "cum_E_D": b.cum_ed,
        "init_term": b.init_term,
        "final_error_L2": err_l2 if reference else None,
        "final_error_Linf": err_linf,
        "peak_measure_eps": peak_measure,
        "final_measure_eps": info.eps_hat.measure(mesh),
        "snapshots": snap_errors,
    }
    # json has no inf; write it as a string
    clean = json.loads(json.dumps(summary, default=float).replace("Infinity", '"inf"'))
    (out_dir / "summary.json").write_text(json.dumps(clean, indent=2, sort_keys=True) + "\n")
    return clean


def build_parser():
    parser = argparse.ArgumentParser(prog="modeladapt", description="Model-adaptive dG runs with a posteriori estimators.")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a preset or a config file")
    r.add_argument("config", help="preset name (test1, test2) or path to a key = value file")
    r.add_argument("--reference", choices=("on", "off"), default="on",
                   help="also run the full model for error columns (default on)")
    r.add_argument("--steps", type=int, default=None, help="number of time steps (default: up to final_time)")
    r.add_argument("--out", default=None, help=f"output directory (overrides ${OUT_ENV})")
    r.add_argument("--theta", type=float, default=None, help="Doerfler marking fraction")
    r.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    try:
        if args.steps is not None and args.steps < 1:
            raise InvalidConfigurationError("--steps must be at least 1")
        config = resolve_config(args.config)
        summary = run(config, reference=args.reference == "on", steps=args.steps, out=args.out,
                      theta=args.theta, log=log)
    except (ModelAdaptError, OSError) as exc:
        print(f"modeladapt: error: {exc}", file=sys.stderr)
        return 2
    if log:
        log(f"final bound {summary['final_bound']}, peak measure {summary['peak_measure_eps']:.4g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
