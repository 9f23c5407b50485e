"""Relative-entropy toolkit for systems of viscous conservation laws.

Pointwise conventions: states ``u`` have shape (..., n) and gradients have
shape (..., n, d), so ``grad[..., i, a]`` is d u_i / d x_a.  Two fluid
models are provided, in conserved variables:

* isothermal Navier-Stokes (INS): u = (rho, m), m = rho v,
  eta = W(rho) + |m|^2 / (2 rho), g_a = (0, d_a v);
* Navier-Stokes-Fourier (NSF) for an ideal gas: u = (rho, m, e),
  eta = -rho log(p / rho^gamma), g_a = (0, d_a v, v . d_a v + (kappa/mu) d_a T).

Every derivative is closed form.  The Hessians are built from differentials
of the primitive quantities (v, p, T, ...), written as covectors on the
conserved variables.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidConfigurationError, InvalidParameterError, StateSpaceError


# pressure laws for INS

@dataclass(frozen=True)
class PressureLaw:
    """Barotropic pressure p(rho) with Helmholtz energy W (p = rho W' - W)."""

    name: str
    p: Callable
    dp: Callable
    W: Callable
    dW: Callable
    d2W: Callable
    d3W: Callable


def isothermal_pressure(c=1.0):
    """p = c^2 rho, W = c^2 rho log rho."""
    c2 = float(c) ** 2
    return PressureLaw(
        "isothermal",
        p=lambda r: c2 * r, dp=lambda r: c2 * np.ones_like(r),
        W=lambda r: c2 * r * np.log(r), dW=lambda r: c2 * (np.log(r) + 1.0),
        d2W=lambda r: c2 / r, d3W=lambda r: -c2 / r ** 2)


def polytropic_pressure(kappa=1.0, gamma=1.4):
    """p = kappa rho^gamma, W = kappa rho^gamma / (gamma - 1)."""
    if gamma <= 1:
        raise InvalidParameterError("gamma must exceed 1")
    k, g = float(kappa), float(gamma)
    return PressureLaw(
        "polytropic",
        p=lambda r: k * r ** g, dp=lambda r: k * g * r ** (g - 1),
        W=lambda r: k * r ** g / (g - 1), dW=lambda r: k * g * r ** (g - 1) / (g - 1),
        d2W=lambda r: k * g * r ** (g - 2), d3W=lambda r: k * g * (g - 2) * r ** (g - 3))


@dataclass
class SystemModel:
    """Entropy pair, fluxes, diffusive fluxes and dissipation of a system.

    ``k`` is the user-supplied constant of the compatibility hypothesis.
    """

    name: str
    n: int
    dim: int
    eta: Callable
    d_eta: Callable
    d2_eta: Callable
    flux: Callable            # (u, a) -> (..., n)
    flux_jacobian: Callable   # (u, a) -> (..., n, n)
    entropy_flux: Callable    # (u, a) -> (...)
    g: Callable               # (u, grad, a) -> (..., n)
    dissipation: Callable     # (w, gw, wt, gwt) -> (...)
    check_states: Callable
    sample_states: Callable   # (rng, size) -> (size, n)
    primitive_to_conserved: Callable = None
    k: float = 1.0
    params: dict = field(default_factory=dict)

    def entropy_dissipation(self, u, grad):
        """sum_a g_a(u, grad u) . d_a D eta(u) (without the viscosity factor)."""
        H = self.d2_eta(u)
        total = 0.0
        for a in range(self.dim):
            d_a_deta = np.einsum("...ij,...j->...i", H, grad[..., a])
            total = total + np.einsum("...i,...i->...", self.g(u, grad, a), d_a_deta)
        return total


def _velocity(u, d):
    return u[..., 1:1 + d] / u[..., :1]


def _velocity_grad(u, grad, d):
    """d_a v_i = (d_a m_i - v_i d_a rho) / rho, shape (..., d, d) as [i, a]."""
    rho = u[..., 0][..., None, None]
    v = _velocity(u, d)
    return (grad[..., 1:1 + d, :] - v[..., :, None] * grad[..., 0:1, :]) / rho


def ins_model(mu=1.0, pressure_law=None, dim=1, density_range=(0.5, 2.0), velocity_range=(-1.0, 1.0), k=1.0):
    """Isothermal Navier-Stokes with D = |grad v - grad v~|^2."""
    law = pressure_law or isothermal_pressure(1.0)
    if density_range[0] <= 0:
        raise InvalidParameterError("the state set must enforce positive density")
    d = int(dim)
    n = d + 1

    def check(u):
        u = np.asarray(u, dtype=float)
        if not np.all(np.isfinite(u)) or np.any(u[..., 0] <= 0):
            raise StateSpaceError("density must be positive", u[..., 0])

    def eta(u):
        check(u)
        rho, m = u[..., 0], u[..., 1:]
        return law.W(rho) + 0.5 * np.sum(m * m, axis=-1) / rho

    def d_eta(u):
        check(u)
        rho = u[..., 0]
        v = _velocity(u, d)
        out = np.empty_like(u, dtype=float)
        out[..., 0] = law.dW(rho) - 0.5 * np.sum(v * v, axis=-1)
        out[..., 1:] = v
        return out

    def d2_eta(u):
        check(u)
        rho = u[..., 0]
        v = _velocity(u, d)
        H = np.zeros(u.shape + (n,))
        H[..., 0, 0] = law.d2W(rho) + np.sum(v * v, axis=-1) / rho
        H[..., 0, 1:] = -v / rho[..., None]
        H[..., 1:, 0] = -v / rho[..., None]
        H[..., 1:, 1:] = np.eye(d) / rho[..., None, None]
        return H

    def flux(u, a):
        rho = u[..., 0]
        v = _velocity(u, d)
        out = np.empty_like(u, dtype=float)
        out[..., 0] = u[..., 1 + a]
        out[..., 1:] = u[..., 1:] * v[..., a:a + 1]
        out[..., 1 + a] += law.p(rho)
        return out

    def flux_jacobian(u, a):
        rho = u[..., 0]
        v = _velocity(u, d)
        J = np.zeros(u.shape + (n,))
        J[..., 0, 1 + a] = 1.0
        # d(m_i v_a) = v_a dm_i + v_i dm_a - v_i v_a drho
        J[..., 1:, 0] = -v * v[..., a:a + 1]
        J[..., 1:, 1:] += v[..., a, None, None] * np.eye(d)
        J[..., 1:, 1 + a] += v
        J[..., 1 + a, 0] += law.dp(rho)
        return J

    def entropy_flux(u, a):
        rho = u[..., 0]
        v = _velocity(u, d)
        return (eta(u) + law.p(rho)) * v[..., a]

    def g(u, grad, a):
        out = np.zeros(u.shape)
        out[..., 1:] = _velocity_grad(u, grad, d)[..., :, a]
        return out

    def dissipation(w, gw, wt, gwt):
        diff = _velocity_grad(w, gw, d) - _velocity_grad(wt, gwt, d)
        return np.sum(diff * diff, axis=(-2, -1))

    def sample(rng, size):
        rng = np.random.default_rng(rng)
        rho = rng.uniform(*density_range, size)
        v = rng.uniform(*velocity_range, (size, d))
        return np.concatenate([rho[:, None], rho[:, None] * v], axis=1)

    def prim(rho, v):
        rho = np.asarray(rho, dtype=float)
        v = np.asarray(v, dtype=float).reshape(rho.shape + (d,))
        return np.concatenate([rho[..., None], rho[..., None] * v], axis=-1)

    return SystemModel("ins", n, d, eta, d_eta, d2_eta, flux, flux_jacobian, entropy_flux, g,
                       dissipation, check, sample, prim, k,
                       {"mu": mu, "pressure_law": law, "density_range": density_range,
                        "velocity_range": velocity_range})


def nsf_model(mu=1.0, kappa_over_mu=1.0, R=287.0, gamma=1.4, dim=1,
              density_range=(0.5, 2.0), velocity_range=(-1.0, 1.0), temperature_range=(0.5, 2.0), k=1.0):
    """Navier-Stokes-Fourier for an ideal gas, p = rho R T = (gamma-1) rho eps."""
    if gamma <= 1 or R <= 0:
        raise InvalidParameterError("need gamma > 1 and R > 0")
    if density_range[0] <= 0 or temperature_range[0] <= 0:
        raise InvalidParameterError("the state set must enforce positive density and temperature")
    d = int(dim)
    n = d + 2
    gm1 = gamma - 1.0

    def pressure(u):
        rho, m, e = u[..., 0], u[..., 1:1 + d], u[..., -1]
        return gm1 * (e - 0.5 * np.sum(m * m, axis=-1) / rho)

    def check(u):
        u = np.asarray(u, dtype=float)
        if not np.all(np.isfinite(u)) or np.any(u[..., 0] <= 0):
            raise StateSpaceError("density must be positive", u[..., 0])
        if np.any(pressure(u) <= 0):
            raise StateSpaceError("temperature must be positive", pressure(u))

    def temperature(u):
        return pressure(u) / (u[..., 0] * R)

    def covectors(u):
        """Differentials (as covectors on conserved variables) of p, beta and v."""
        rho = u[..., 0]
        v = _velocity(u, d)
        p = pressure(u)
        dp = np.empty(u.shape)
        dp[..., 0] = 0.5 * gm1 * np.sum(v * v, axis=-1)
        dp[..., 1:1 + d] = -gm1 * v
        dp[..., -1] = gm1
        beta = gm1 * rho / p
        e0 = np.zeros(u.shape)
        e0[..., 0] = 1.0
        dbeta = beta[..., None] * (e0 / rho[..., None] - dp / p[..., None])
        dv = np.zeros(u.shape[:-1] + (d, n))
        dv[..., :, 1:1 + d] = np.eye(d) / rho[..., None, None]
        dv[..., :, 0] = -v / rho[..., None]
        return rho, v, p, dp, beta, dbeta, dv

    def eta(u):
        check(u)
        rho = u[..., 0]
        return -rho * np.log(pressure(u) / rho ** gamma)

    def d_eta(u):
        check(u)
        rho, v, p, _, beta, _, _ = covectors(u)
        s = np.log(p / rho ** gamma)
        out = np.empty(u.shape)
        out[..., 0] = -s + gamma - 0.5 * beta * np.sum(v * v, axis=-1)
        out[..., 1:1 + d] = beta[..., None] * v
        out[..., -1] = -beta
        return out

    def d2_eta(u):
        check(u)
        rho, v, p, dp, beta, dbeta, dv = covectors(u)
        ds = dp / p[..., None]
        ds[..., 0] -= gamma / rho
        H = np.empty(u.shape + (n,))
        vdv = np.einsum("...i,...ij->...j", v, dv)
        H[..., 0, :] = -ds - 0.5 * np.sum(v * v, axis=-1)[..., None] * dbeta - beta[..., None] * vdv
        H[..., 1:1 + d, :] = v[..., :, None] * dbeta[..., None, :] + beta[..., None, None] * dv
        H[..., -1, :] = -dbeta
        return H

    def flux(u, a):
        rho = u[..., 0]
        v = _velocity(u, d)
        p = pressure(u)
        out = np.empty(u.shape)
        out[..., 0] = u[..., 1 + a]
        out[..., 1:1 + d] = u[..., 1:1 + d] * v[..., a:a + 1]
        out[..., 1 + a] += p
        out[..., -1] = (u[..., -1] + p) * v[..., a]
        return out

    def flux_jacobian(u, a):
        rho, v, p, dp, beta, dbeta, dv = covectors(u)
        m = u[..., 1:1 + d]
        e = u[..., -1]
        J = np.zeros(u.shape + (n,))
        J[..., 0, 1 + a] = 1.0
        # d(m_i v_a) = v_a dm_i + m_i dv_a
        J[..., 1:1 + d, 1:1 + d] += v[..., a, None, None] * np.eye(d)
        J[..., 1:1 + d, :] += m[..., :, None] * dv[..., a, None, :]
        J[..., 1 + a, :] += dp
        de = np.zeros(u.shape)
        de[..., -1] = 1.0
        J[..., -1, :] = v[..., a, None] * (de + dp) + (e + p)[..., None] * dv[..., a, :]
        return J

    def entropy_flux(u, a):
        return eta(u) * _velocity(u, d)[..., a]

    def temperature_grad(u, grad):
        rho, v, p, dp, beta, dbeta, dv = covectors(u)
        T = p / (rho * R)
        dT = (dp - (R * T)[..., None] * np.eye(n)[0]) / (rho * R)[..., None]
        return np.einsum("...j,...ja->...a", dT, grad)

    def g(u, grad, a):
        out = np.zeros(u.shape)
        gv = _velocity_grad(u, grad, d)
        v = _velocity(u, d)
        out[..., 1:1 + d] = gv[..., :, a]
        out[..., -1] = np.sum(v * gv[..., :, a], axis=-1) + kappa_over_mu * temperature_grad(u, grad)[..., a]
        return out

    def dissipation(w, gw, wt, gwt):
        Tt = temperature(wt)
        dvv = _velocity_grad(w, gw, d) - _velocity_grad(wt, gwt, d)
        dT = temperature_grad(w, gw) - temperature_grad(wt, gwt)
        return np.sum(dvv * dvv, axis=(-2, -1)) / Tt + kappa_over_mu * np.sum(dT * dT, axis=-1) / Tt ** 2

    def prim(rho, v, T):
        rho = np.asarray(rho, dtype=float)
        T = np.asarray(T, dtype=float)
        v = np.asarray(v, dtype=float).reshape(rho.shape + (d,))
        p = rho * R * T
        e = p / gm1 + 0.5 * rho * np.sum(v * v, axis=-1)
        return np.concatenate([rho[..., None], rho[..., None] * v, e[..., None]], axis=-1)

    def sample(rng, size):
        rng = np.random.default_rng(rng)
        rho = rng.uniform(*density_range, size)
        v = rng.uniform(*velocity_range, (size, d))
        T = rng.uniform(*temperature_range, size)
        return prim(rho, v, T)

    model = SystemModel("nsf", n, d, eta, d_eta, d2_eta, flux, flux_jacobian, entropy_flux, g,
                        dissipation, check, sample, prim, k,
                        {"mu": mu, "kappa_over_mu": kappa_over_mu, "R": R, "gamma": gamma,
                         "density_range": density_range, "velocity_range": velocity_range,
                         "temperature_range": temperature_range})
    model.pressure = pressure
    model.temperature = temperature
    model.temperature_grad = temperature_grad
    return model


def scalar_model(eta=None, d_eta=None, d2_eta=None, flux=None, dflux=None, dim=1):
    """Scalar conservation law; the default entropy is eta(u) = u^2 / 2."""
    eta = eta or (lambda u: 0.5 * u[..., 0] ** 2)
    d_eta = d_eta or (lambda u: u.copy())
    d2_eta = d2_eta or (lambda u: np.ones(u.shape + (1,)))
    fl = flux or (lambda u, a: 0.5 * u * u)
    dfl = dflux or (lambda u, a: u[..., None])

    def entropy_flux(u, a):
        # q' = eta' f' for the default pair: q = u^3 / 3
        return u[..., 0] ** 3 / 3.0

    def g(u, grad, a):
        return grad[..., a]

    def dissipation(w, gw, wt, gwt):
        return np.sum((gw - gwt) ** 2, axis=(-2, -1))

    def check(u):
        if not np.all(np.isfinite(u)):
            raise StateSpaceError("non-finite state", np.asarray(u))

    def sample(rng, size):
        return np.random.default_rng(rng).uniform(-2, 2, (size, 1))

    return SystemModel("scalar", 1, dim, eta, d_eta, d2_eta, fl, dfl, entropy_flux, g,
                       dissipation, check, sample, None, 1.0)


# relative entropy

def relative_entropy_density(model, u, v):
    """eta(u|v) = eta(u) - eta(v) - D eta(v) (u - v), pointwise."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return model.eta(u) - model.eta(v) - np.einsum("...i,...i->...", model.d_eta(v), u - v)


def relative_entropy(model, u, v, weights=None):
    """Quadrature of the relative entropy density (plain sum without weights)."""
    dens = relative_entropy_density(model, u, v)
    if weights is None:
        return float(np.sum(dens))
    return float(np.sum(np.asarray(weights) * dens))


def relative_entropy_flux_density(model, u, v, direction=0):
    """q(u|v) = q(u) - q(v) - D eta(v) (f(u) - f(v)), pointwise."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    df = model.flux(u, direction) - model.flux(v, direction)
    return (model.entropy_flux(u, direction) - model.entropy_flux(v, direction)
            - np.einsum("...i,...i->...", model.d_eta(v), df))


def relative_entropy_flux(model, u, v, direction=0, weights=None):
    dens = relative_entropy_flux_density(model, u, v, direction)
    return float(np.sum(dens if weights is None else np.asarray(weights) * dens))


def segment_points(u, v, n=17):
    """Points on the segments [v, u] for every pair; shape (pairs * n, n_comp)."""
    s = np.linspace(0.0, 1.0, n)
    u = np.atleast_2d(u)
    v = np.atleast_2d(v)
    return (v[:, None, :] + s[None, :, None] * (u - v)[:, None, :]).reshape(-1, u.shape[-1])


def entropy_bounds(model, states, fd_step=1e-5):
    """(C_low, C_high, C_third) over the given states.

    C_low and C_high are the extreme eigenvalues of the entropy Hessian;
    C_third is the largest Frobenius norm of the third derivative, by central
    differences of the closed-form Hessian.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    lam = np.linalg.eigvalsh(model.d2_eta(states))
    n = states.shape[-1]
    third = np.zeros(states.shape[0])
    for j in range(n):
        h = fd_step * np.maximum(1.0, np.abs(states[:, j]))
        up, dn = states.copy(), states.copy()
        up[:, j] += h
        dn[:, j] -= h
        dH = (model.d2_eta(up) - model.d2_eta(dn)) / (2 * h)[:, None, None]
        third += np.sum(dH * dH, axis=(-2, -1))
    return float(lam.min()), float(lam.max()), float(np.sqrt(third.max()))


# compatibility hypothesis and indicators

def _grad_deta(model, u, grad):
    """d_a D eta(u) = D^2 eta(u) d_a u, shape (..., n, d)."""
    return np.einsum("...ij,...ja->...ia", model.d2_eta(u), grad)


def _sup_w1inf(u, grad):
    return max(float(np.max(np.abs(u))), float(np.max(np.abs(grad))))


@dataclass
class HypothesisReport:
    k_ca1: float
    k_ca2: float          # smallest grid value >= k_ca1 for which (ca2) also holds
    ca1_min_residual: float
    identity_residual: Optional[float]
    n_points: int
    details: dict = field(default_factory=dict)


def check_hypothesis_inequalities(model, samples, k_grid=None):
    """Evaluate both compatibility inequalities on sample pairs.

    ``samples`` is an iterable of ``(w, grad_w, wt, grad_wt)`` point arrays,
    each pair representing two fields on a small mesh.  For every sample the
    W^{1,inf} norms are the maxima over that sample.  Reports the smallest k
    with which each inequality holds on all points, the minimum of
    L - D/k + k S eta(w|wt) at that k for the first inequality and, for INS,
    max |L - D| where the left side should equal D exactly.
    """
    ks1, Ls, Ds, Ss, Es, L2s, Gs = [], [], [], [], [], [], []
    for w, gw, wt, gwt in samples:
        w, gw, wt, gwt = (np.asarray(a, dtype=float) for a in (w, gw, wt, gwt))
        ddeta = _grad_deta(model, w, gw) - _grad_deta(model, wt, gwt)
        L = 0.0
        lhs2 = 0.0
        gt_diss = 0.0
        dgt = _grad_deta(model, wt, gwt)
        for a in range(model.dim):
            ga, gta = model.g(w, gw, a), model.g(wt, gwt, a)
            L = L + np.einsum("...i,...i->...", ga - gta, ddeta[..., a])
            lhs2 = lhs2 + np.einsum("...i,...i->...", ddeta[..., a], gta)
            gt_diss = gt_diss + np.einsum("...i,...i->...", gta, dgt[..., a])
        D = model.dissipation(w, gw, wt, gwt)
        S = _sup_w1inf(w, gw) ** 2 + _sup_w1inf(wt, gwt) ** 2
        E = relative_entropy_density(model, w, wt)
        Ls.append(np.ravel(L))
        Ds.append(np.ravel(D))
        Ss.append(np.full(np.size(L), S))
        Es.append(np.ravel(E))
        L2s.append(np.abs(np.ravel(lhs2)))
        Gs.append(np.ravel(gt_diss))
    L, D, S, E, L2, G = (np.concatenate(x) for x in (Ls, Ds, Ss, Es, L2s, Gs))

    # smallest k with L >= D/k - k S E, i.e. S E k^2 + L k - D >= 0
    SE = S * E
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.where(SE > 0, (-L + np.sqrt(L * L + 4 * SE * D)) / (2 * SE),
                        np.where(L > 0, D / L, np.where(D > 0, np.inf, 0.0)))
    k1 = float(np.max(root)) if root.size else 0.0
    k1 = max(k1, 1e-300)
    res1 = float(np.min(L - D / k1 + k1 * SE)) if np.isfinite(k1) else -np.inf

    # (ca2) always holds for tiny k through the D / 2k term, so the scan
    # starts at the (ca1) constant and the report gives a joint constant
    grid = np.logspace(-3, 6, 901) if k_grid is None else np.asarray(k_grid)
    k2 = np.inf
    for kk in grid[grid >= min(k1, grid[-1])]:
        rhs = kk * kk * (S + 1.0) * E + D / (2 * kk) + kk * kk * G
        if np.all(L2 <= rhs * (1 + 1e-12) + 1e-14):
            k2 = float(kk)
            break

    identity = float(np.max(np.abs(L - D))) if model.name == "ins" else None
    return HypothesisReport(k1, k2, res1, identity, int(L.size),
                            {"lhs_ca1": L, "dissipation": D, "rel_entropy": E})


def indicator_terms_system(model, vhat, grad_vhat, eps, eps_hat, rh_norm, rp_norm, k=None, weights=None):
    """(E_M, E_D) of the systems indicator from point data of vhat.

    ``weights`` are space-time quadrature weights for the points in
    ``vhat``; ``rh_norm`` and ``rp_norm`` are the L2 and L2(H^-1) norms of
    the residual parts.
    """
    k = model.k if k is None else k
    vhat = np.asarray(vhat, dtype=float)
    grad_vhat = np.asarray(grad_vhat, dtype=float)
    e_hat = np.broadcast_to(np.asarray(getattr(eps_hat, "values", eps_hat), dtype=float), vhat.shape[:-1])
    w = np.ones(vhat.shape[:-1]) if weights is None else np.broadcast_to(weights, vhat.shape[:-1])
    if eps <= 0 and rp_norm != 0:
        raise InvalidConfigurationError("a nonzero parabolic residual needs eps > 0")
    gsq = 0.0
    for a in range(model.dim):
        ga = model.g(vhat, grad_vhat, a)
        gsq = gsq + np.sum(ga * ga, axis=-1)
    em = float(np.sum(w * e_hat ** 2 * gsq)
                + np.sum(w * (eps - e_hat) * k * k * model.entropy_dissipation(vhat, grad_vhat)))
    ed = (k * k / eps * rp_norm ** 2 if eps > 0 else 0.0) + rh_norm ** 2
    return em, float(ed)


def smooth_field_samples(model, rng=None, n_pairs=5, n_points=64, amplitude=0.2):
    """Random smooth pairs (w, grad w, wt, grad wt) on a 1D periodic grid.

    Primitive variables are perturbed by a few Fourier modes around the
    centre of the model's state box; gradients are exact via the chain rule
    (central differences of the conserved map in primitive variables).
    """
    if model.dim != 1:
        raise InvalidParameterError("sampling helper is implemented for 1D models")
    rng = np.random.default_rng(rng)
    x = np.linspace(0, 2 * np.pi, n_points, endpoint=False)
    p = model.params
    ranges = [p["density_range"], p["velocity_range"]]
    if model.name == "nsf":
        ranges.append(p["temperature_range"])

    def field():
        vals, ders = [], []
        for lo, hi in ranges:
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            f = np.full_like(x, mid)
            df = np.zeros_like(x)
            for mode in (1, 2, 3):
                a, ph = rng.uniform(-1, 1) * amplitude * half / mode, rng.uniform(0, 2 * np.pi)
                f += a * np.sin(mode * x + ph)
                df += a * mode * np.cos(mode * x + ph)
            vals.append(f)
            ders.append(df)
        prim = np.stack(vals, axis=-1)
        dprim = np.stack(ders, axis=-1)
        h = 1e-6
        u = model.primitive_to_conserved(*[prim[:, i] for i in range(prim.shape[1])])
        grad = np.zeros(u.shape + (1,))
        for i in range(prim.shape[1]):
            up, dn = prim.copy(), prim.copy()
            up[:, i] += h
            dn[:, i] -= h
            du = (model.primitive_to_conserved(*[up[:, j] for j in range(prim.shape[1])])
                  - model.primitive_to_conserved(*[dn[:, j] for j in range(prim.shape[1])])) / (2 * h)
            grad[..., 0] += du * dprim[:, i:i + 1]
        return u, grad

    out = []
    for _ in range(n_pairs):
        w, gw = field()
        wt, gwt = field()
        out.append((w, gw, wt, gwt))
    return out
