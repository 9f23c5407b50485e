"""Symmetric interior penalty discretisation of -div(eps_hat grad u).

The bilinear form is

    a(w, phi) = sum_K eps_K int_K w' phi'
              - sum_E ([[w]] {eps d phi} + [[phi]] {eps d w})
              + sum_E sigma eps_E / h_E [[w]] [[phi]]

with the weighted average {eps d w} = (eps_L w'_L + eps_R w'_R) / 2 and the
edge weight eps_E = max(eps_L, eps_R).  Edges where both neighbours run the
simple model drop out.  On Cartesian meshes the form factorises into 1D
operators along grid lines, one per transverse Gauss node.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .dg import DGField1D, DGField2D, reference
from .errors import InvalidParameterError
from .mesh import Mesh1D, Mesh2D


def _eps_values(eps_hat, shape):
    vals = getattr(eps_hat, "values", eps_hat)
    vals = np.broadcast_to(np.asarray(vals, dtype=float), shape)
    if np.any(vals < 0):
        raise InvalidParameterError("eps_hat must be non-negative")
    return vals


def _line_blocks(p, sigma):
    """Reference blocks of a single interior edge, on the (L, R) local dofs."""
    ref = reference(p)
    P = p + 1
    J = np.concatenate([ref.end_values[1], -ref.end_values[0]])
    gL = np.concatenate([ref.end_derivs[1], np.zeros(P)])
    gR = np.concatenate([np.zeros(P), ref.end_derivs[0]])
    CL = -0.5 * (np.outer(J, gL) + np.outer(gL, J))
    CR = -0.5 * (np.outer(J, gR) + np.outer(gR, J))
    pen = sigma * np.outer(J, J)
    return ref, CL, CR, pen


def assemble_line(widths, eps, p, sigma, periodic=True, weights=None):
    """COO data of the 1D IP operator on many parallel lines at once.

    ``eps`` has shape (N, M): one column of cell values per line.  ``weights``
    (length M) multiplies each line's operator.  Returns ``rows, cols`` in the
    per-line numbering ``cell * (p+1) + a`` and ``vals`` of shape (nnz, M).
    """
    if not sigma > 0:
        raise InvalidParameterError("penalty sigma must be positive")
    widths = np.asarray(widths, dtype=float)
    eps = np.asarray(eps, dtype=float)
    N, M = eps.shape
    P = p + 1
    wts = np.ones(M) if weights is None else np.asarray(weights, dtype=float)
    ref, CL, CR, pen = _line_blocks(p, sigma)
    rows, cols, vals = [], [], []

    # cell terms
    loc_r, loc_c = np.meshgrid(np.arange(P), np.arange(P), indexing="ij")
    cells = np.arange(N)
    rows.append((cells[:, None, None] * P + loc_r).ravel())
    cols.append((cells[:, None, None] * P + loc_c).ravel())
    v = (2.0 / widths)[:, None, None, None] * ref.stiffness[None, :, :, None] * eps[:, None, None, :] * wts
    vals.append(v.reshape(-1, M))

    # interior edges
    if periodic:
        left, right = np.roll(cells, 1), cells
    else:
        left, right = cells[:-1], cells[1:]
    hL, hR = widths[left], widths[right]
    hE = 0.5 * (hL + hR)
    eL, eR = eps[left], eps[right]
    eE = np.maximum(eL, eR)
    dofs = np.concatenate([left[:, None] * P + np.arange(P), right[:, None] * P + np.arange(P)], axis=1)
    rows.append(np.repeat(dofs[:, :, None], 2 * P, axis=2).ravel())
    cols.append(np.repeat(dofs[:, None, :], 2 * P, axis=1).ravel())
    blk = ((eL * (2.0 / hL)[:, None])[:, None, None, :] * CL[None, :, :, None]
           + (eR * (2.0 / hR)[:, None])[:, None, None, :] * CR[None, :, :, None]
           + (eE / hE[:, None])[:, None, None, :] * pen[None, :, :, None]) * wts
    vals.append(blk.reshape(-1, M))

    if not periodic:
        # homogeneous Dirichlet data through a zero ghost state
        for cell, side in ((0, 0), (N - 1, 1)):
            sign = 1.0 if side == 1 else -1.0
            J = sign * ref.end_values[side]
            g = (2.0 / widths[cell]) * ref.end_derivs[side]
            B = -(np.outer(J, g) + np.outer(g, J)) + sigma / widths[cell] * np.outer(J, J)
            d = cell * P + np.arange(P)
            rows.append(np.repeat(d, P))
            cols.append(np.tile(d, P))
            vals.append((B.ravel()[:, None] * eps[cell][None, :]) * wts)

    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals, axis=0)


def assemble_ip(mesh, degree, eps_hat, sigma):
    """Sparse IP matrix A with A[i, j] = a(phi_j, phi_i) in the Gauss-nodal basis."""
    if isinstance(mesh, Mesh1D):
        eps = _eps_values(eps_hat, (mesh.n_cells,))
        r, c, v = assemble_line(mesh.widths, eps[:, None], degree, sigma, mesh.periodic)
        n = mesh.n_cells * (degree + 1)
        A = sp.coo_matrix((v[:, 0], (r, c)), shape=(n, n)).tocsr()
        A.sum_duplicates()
        return A
    if not isinstance(mesh, Mesh2D):
        raise TypeError("unsupported mesh")
    p = int(np.atleast_1d(degree)[0])
    if np.ndim(degree) and len(set(np.atleast_1d(degree))) != 1:
        raise InvalidParameterError("the IP operator needs equal degrees in x and y")
    if not mesh.periodic:
        raise InvalidParameterError("2D IP assembly is implemented for periodic meshes")
    P = p + 1
    nx, ny = mesh.shape
    eps = _eps_values(eps_hat, (nx, ny))
    hx, hy = mesh.widths
    w = reference(p).weights
    n = nx * ny * P * P
    blocks = []

    # x-lines: one per (j, b), weight hy_j / 2 * w_b
    line_eps = np.repeat(eps, P, axis=1)                       # (nx, ny*P), column j*P + b
    lw = (0.5 * hy[:, None] * w[None, :]).ravel()
    r, c, v = assemble_line(hx, line_eps, p, sigma, True, lw)
    ci, ca = np.divmod(r, P)
    di, da = np.divmod(c, P)
    jb = np.arange(ny * P)
    j, b = np.divmod(jb, P)
    R = ((ci[:, None] * ny + j) * P + ca[:, None]) * P + b
    C = ((di[:, None] * ny + j) * P + da[:, None]) * P + b
    blocks.append((R.ravel(), C.ravel(), v.ravel()))

    # y-lines: one per (i, a), weight hx_i / 2 * w_a
    line_eps = np.repeat(eps.T, P, axis=1)                     # (ny, nx*P), column i*P + a
    lw = (0.5 * hx[:, None] * w[None, :]).ravel()
    r, c, v = assemble_line(hy, line_eps, p, sigma, True, lw)
    cj, cb = np.divmod(r, P)
    dj, db = np.divmod(c, P)
    ia = np.arange(nx * P)
    i, a = np.divmod(ia, P)
    R = ((i * ny + cj[:, None]) * P + a) * P + cb[:, None]
    C = ((i * ny + dj[:, None]) * P + a) * P + db[:, None]
    blocks.append((R.ravel(), C.ravel(), v.ravel()))

    rows = np.concatenate([b_[0] for b_ in blocks])
    cols = np.concatenate([b_[1] for b_ in blocks])
    vals = np.concatenate([b_[2] for b_ in blocks])
    keep = vals != 0.0
    A = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def ip_form(w, phi, epsilon_hat, sigma):
    """Value of the IP bilinear form a(w, phi) weighted by ``epsilon_hat``."""
    if not sigma > 0:
        raise InvalidParameterError("penalty sigma must be positive")
    if type(w) is not type(phi) or w.degree != phi.degree or w.mesh is not phi.mesh:
        raise ValueError("w and phi must live in the same space")
    A = assemble_ip(w.mesh, w.degree, epsilon_hat, sigma)
    return float(phi.values.ravel() @ (A @ w.values.ravel()))
