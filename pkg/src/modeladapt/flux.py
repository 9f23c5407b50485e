"""Scalar flux models and the Richtmyer numerical flux."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidParameterError, StateSpaceError


@dataclass(frozen=True)
class StateSet:
    """Compact interval O = [lower, upper] of admissible scalar states."""

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise InvalidParameterError("state set must have lower < upper")

    def contains(self, u):
        u = np.asarray(u)
        return bool(np.all((u >= self.lower) & (u <= self.upper)))

    def check(self, u, what="state"):
        u = np.asarray(u)
        if not np.all(np.isfinite(u)):
            raise StateSpaceError(f"non-finite {what}", u)
        if not self.contains(u):
            bad = u[(u < self.lower) | (u > self.upper)]
            raise StateSpaceError(
                f"{what} left the state set [{self.lower}, {self.upper}]: "
                f"extreme value {bad.flat[np.argmax(np.abs(bad))]:.6g}", bad)

    def sample(self, n, rng=None):
        rng = np.random.default_rng(rng)
        return rng.uniform(self.lower, self.upper, size=n)


@dataclass(frozen=True)
class FluxModel:
    """Scalar flux f = (f_1, ..., f_d) with derivatives.

    Each entry of ``f``, ``df`` and ``d2f`` is a vectorised callable for one
    space direction.  ``c_f`` is an optional closed-form bound of |f''| on
    the state set; otherwise it is estimated by sampling.
    """

    name: str
    f: Sequence[Callable]
    df: Sequence[Callable]
    d2f: Sequence[Callable]
    state_set: Optional[StateSet] = None
    c_f: Optional[float] = None
    n_components: int = 1

    @property
    def dim(self):
        return len(self.f)

    def evaluate(self, u, direction=0):
        return self.f[direction](np.asarray(u, dtype=float))

    def jacobian(self, u, direction=0):
        return self.df[direction](np.asarray(u, dtype=float))

    def hessian(self, u, direction=0):
        return self.d2f[direction](np.asarray(u, dtype=float))

    def check_states(self, u, what="state"):
        if self.state_set is not None:
            self.state_set.check(u, what)
        elif not np.all(np.isfinite(u)):
            raise StateSpaceError(f"non-finite {what}", np.asarray(u))

    def second_derivative_bound(self, state_set=None, n_samples=2001):
        """C_f: sup over O of |f''| (max over directions)."""
        if self.c_f is not None and state_set is None:
            return float(self.c_f)
        O = state_set or self.state_set
        if O is None:
            raise InvalidParameterError("a state set is needed to bound f''")
        u = np.linspace(O.lower, O.upper, n_samples)
        return float(max(np.max(np.abs(np.broadcast_to(d(u), u.shape))) for d in self.d2f))

    def max_speed(self, state_set=None, n_samples=2001):
        O = state_set or self.state_set
        if O is None:
            raise InvalidParameterError("a state set is needed to bound f'")
        u = np.linspace(O.lower, O.upper, n_samples)
        return float(max(np.max(np.abs(np.broadcast_to(d(u), u.shape))) for d in self.df))


def _half_square(u):
    return 0.5 * u * u


def _identity(u):
    return u


def _one(u):
    return np.ones_like(u)


def _zero(u):
    return np.zeros_like(u)


def burgers_1d(state_set=StateSet(-10.0, 10.0)):
    """f(u) = u^2 / 2."""
    return FluxModel("burgers", (_half_square,), (_identity,), (_one,), state_set, c_f=1.0)


def burgers_2d(state_set=StateSet(-10.0, 10.0)):
    """f_1 = f_2 = u^2 / 2, so div f(u) = (u 1) . grad u."""
    return FluxModel("burgers2d", (_half_square,) * 2, (_identity,) * 2, (_one,) * 2,
                     state_set, c_f=1.0)


def linear_advection(velocity=1.0, state_set=None):
    """f(u) = a u in 1D, or f_alpha(u) = a_alpha u for a sequence of velocities."""
    vel = np.atleast_1d(np.asarray(velocity, dtype=float))
    fs = tuple((lambda u, a=a: a * u) for a in vel)
    dfs = tuple((lambda u, a=a: a * np.ones_like(u)) for a in vel)
    return FluxModel("linear", fs, dfs, (_zero,) * vel.size, state_set, c_f=0.0)


def zero_flux(dim=1):
    return FluxModel("zero", (_zero,) * dim, (_zero,) * dim, (_zero,) * dim, None, c_f=0.0)


def richtmyer_flux(flux, u_minus, u_plus, tau_over_h, direction=0):
    """Richtmyer flux F = f(w), w = (u- + u+)/2 - (tau/h)(f(u+) - f(u-)).

    Returns ``(F, w)``.  Raises :class:`StateSpaceError` when ``w`` leaves
    the model's state set.
    """
    u_minus = np.asarray(u_minus, dtype=float)
    u_plus = np.asarray(u_plus, dtype=float)
    f = flux.f[direction]
    w = 0.5 * (u_minus + u_plus) - tau_over_h * (f(u_plus) - f(u_minus))
    flux.check_states(w, "intermediate Richtmyer state")
    return f(w), w


@dataclass(frozen=True)
class RichtmyerFlux:
    """Richtmyer flux bound to a flux model and a step/width ratio."""

    flux: FluxModel
    tau_over_h: float

    def __post_init__(self):
        if not self.tau_over_h > 0:
            raise InvalidParameterError("tau/h must be positive")

    def __call__(self, u_minus, u_plus, direction=0):
        return richtmyer_flux(self.flux, u_minus, u_plus, self.tau_over_h, direction)

    def intermediate(self, u_minus, u_plus, direction=0):
        return self(u_minus, u_plus, direction)[1]

    def lipschitz_constant(self, state_set=None):
        """L with |w(u,v) - u| + |w(u,v) - v| <= L |u - v| on O."""
        return 1.0 + 2.0 * self.tau_over_h * self.flux.max_speed(state_set)
