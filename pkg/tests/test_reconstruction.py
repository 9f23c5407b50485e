import numpy as np
import pytest

from modeladapt.dg import DGField1D, DGField2D, l2_project, reference
from modeladapt.errors import InvalidParameterError
from modeladapt.flux import RichtmyerFlux, burgers_1d, burgers_2d, linear_advection
from modeladapt.mesh import build_mesh_1d, build_mesh_2d
from modeladapt.reconstruction import (edge_states_1d, reconstruct, reconstruct_flux_1d,
                                       reconstruct_solution_1d, reconstruct_solution_2d, split_residual)
from modeladapt.solver import hyperbolic_data

from conftest import random_field_1d, random_field_2d

NF1 = RichtmyerFlux(burgers_1d(), 0.1)
NF2 = RichtmyerFlux(burgers_2d(), 0.1)


def test_constant_field_1d():
    mesh = build_mesh_1d((0.0, 1.0), 5)
    v = DGField1D(mesh, 1, np.full((5, 2), 0.6))
    vhat, fhat, _ = reconstruct(v, burgers_1d(), NF1)
    x = np.linspace(0.0, 1.0, 17)
    np.testing.assert_allclose(vhat(x), 0.6, atol=1e-14)
    np.testing.assert_allclose(fhat[0](x), 0.18, atol=1e-14)


def test_continuous_field_interpolates_edge_values():
    mesh = build_mesh_1d((0.0, 1.0), 4)
    # globally continuous piecewise linear: hat on the nodes
    nodes_val = np.array([0.0, 0.5, -0.3, 0.2, 0.0])
    xi = reference(1).nodes
    vals = np.array([0.5 * (nodes_val[k] * (1 - xi) + nodes_val[k + 1] * (1 + xi)) for k in range(4)])
    v = DGField1D(mesh, 1, vals)
    w = edge_states_1d(v, NF1)[1]
    vhat = reconstruct_solution_1d(v, w)
    left, right = vhat.cell_traces()
    np.testing.assert_allclose(left, nodes_val[:-1], atol=1e-14)
    np.testing.assert_allclose(right, nodes_val[1:], atol=1e-14)


def test_single_cell_moment_system(rng):
    # dense oracle: vhat in P2 on each cell with given end values and mean of v_h
    v = random_field_1d(rng, n=6, q=1)
    w = edge_states_1d(v, NF1)[1]
    vhat = reconstruct_solution_1d(v, w)
    mesh = v.mesh
    for k in range(6):
        # unknown quadratic a + b s + c s^2 on [-1, 1]
        lhs = np.array([[1, -1, 1], [1, 1, 1], [2, 0, 2 / 3]])
        rhs = np.array([w[k], w[(k + 1) % 6], v.cell_integrals()[k] * 2 / mesh.widths[k]])
        a, b, c = np.linalg.solve(lhs, rhs)
        s = np.linspace(-1, 1, 5)
        np.testing.assert_allclose(vhat.evaluate(s)[k], a + b * s + c * s * s, atol=1e-12)


def test_flux_reconstruction_constant_and_identity(rng):
    v = random_field_1d(rng, n=8, q=2, amplitude=0.4)
    data = hyperbolic_data(v, burgers_1d(), NF1)
    fhat = reconstruct_flux_1d(v, data.edge_flux[0], data.rhs)
    f = fhat[0]
    z = reference(2).nodes
    np.testing.assert_allclose(f.derivative(z) + data.rhs.evaluate(z), 0.0, atol=1e-11)
    left, right = f.cell_traces()
    np.testing.assert_allclose(left, data.edge_flux[0][:8], atol=1e-13)
    np.testing.assert_allclose(right, np.roll(data.edge_flux[0], -1), atol=1e-13)


def test_q0_solution_reconstruction_rejected():
    mesh = build_mesh_1d((0.0, 1.0), 4)
    with pytest.raises(InvalidParameterError):
        reconstruct_solution_1d(DGField1D.zeros(mesh, 0), np.zeros(4))


def test_2d_constant_state():
    mesh = build_mesh_2d((-1.0, 1.0), 4, 3)
    v = DGField2D(mesh, (1, 1), np.full((4, 3, 2, 2), 0.8))
    vhat, fhat, _ = reconstruct(v, burgers_2d(), NF2)
    np.testing.assert_allclose(vhat.values, 0.8, atol=1e-14)
    np.testing.assert_allclose(fhat[0].values, 0.32, atol=1e-14)
    np.testing.assert_allclose(fhat[1].values, 0.32, atol=1e-14)


def test_2d_y_only_field_reduces_to_rows(rng):
    # v_h varies only in y, so fhat_1 is f_1(v_h) row by row
    mesh = build_mesh_2d((-1.0, 1.0), 4, 5)
    col = 0.3 * rng.standard_normal((5, 2))
    v = DGField2D(mesh, (1, 1), np.broadcast_to(col[None, :, None, :], (4, 5, 2, 2)).copy())
    _, fhat, _ = reconstruct(v, burgers_2d(), NF2)
    z = reference(1).nodes
    expected = 0.5 * v.evaluate(z, z) ** 2
    np.testing.assert_allclose(fhat[0].evaluate(z, z), expected, atol=1e-13)


def test_2d_shared_edges_two_cells(rng):
    v = random_field_2d(rng, nx=2, ny=3, q=1)
    vhat = reconstruct_solution_2d(v, NF2)
    s = np.linspace(-1, 1, 20)
    one = np.array([1.0])
    right_of_0 = vhat.evaluate(one, s)[0, :, 0, :]
    left_of_1 = vhat.evaluate(-one, s)[1, :, 0, :]
    np.testing.assert_allclose(right_of_0, left_of_1, atol=1e-12)


def test_2d_needs_equal_degrees():
    mesh = build_mesh_2d((-1.0, 1.0), 3, 3)
    with pytest.raises(InvalidParameterError):
        reconstruct_solution_2d(DGField2D.zeros(mesh, (1, 2)), NF2)


def test_residuals_vanish_for_constant_state():
    mesh = build_mesh_1d((0.0, 1.0), 6)
    v = DGField1D(mesh, 1, np.full((6, 2), 0.4))
    vhat, _, data = reconstruct(v, burgers_1d(), NF1)
    split = split_residual(v, v, vhat, vhat, data.rhs, np.zeros(6), burgers_1d(), 0.1)
    assert np.abs(split.rh_squared()).max() < 1e-28
    assert not split.parabolic_active
    a, b = split.rp_data(0.5, reference(3).nodes)
    assert np.all(a == 0) and np.all(b == 0)


def test_residual_of_exact_linear_transport_is_small():
    f = linear_advection()
    norms = []
    for n in (32, 64):
        mesh = build_mesh_1d((0.0, 2 * np.pi), n)
        tau = 0.1 * mesh.h
        nf = RichtmyerFlux(f, tau / mesh.h)
        v0 = l2_project(np.sin, mesh, 1)
        d0 = hyperbolic_data(v0, f, nf)
        v1 = DGField1D(mesh, 1, v0.values + tau * d0.rhs.values)
        vh0, _, _ = reconstruct(v0, f, nf, d0)
        vh1, _, _ = reconstruct(v1, f, nf)
        split = split_residual(v0, v1, vh0, vh1, d0.rhs, np.zeros(n), f, tau)
        norms.append(np.sqrt(split.rh_squared().sum() / tau))
    assert norms[1] < norms[0]
