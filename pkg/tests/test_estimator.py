import math

import numpy as np
import pytest

from modeladapt.dg import DGField1D, DGField2D, l2_project, mass_diagonal
from modeladapt.errors import InvalidConfigurationError
from modeladapt.estimator import (DualNormEvaluator, EstimatorBreakdown, StepEstimator, discretization_term,
                                  gradient_max, h_minus1_norm, initial_term, l2_distance, linf_distance,
                                  lobatto_nodes, modeling_term, modeling_term_step, total_bound)
from modeladapt.flux import RichtmyerFlux, burgers_1d
from modeladapt.ip import assemble_ip
from modeladapt.mesh import build_mesh_1d, build_mesh_2d
from modeladapt.reconstruction import reconstruct, split_residual

PI_MESH = build_mesh_1d((-np.pi, np.pi), 1000)


def test_lobatto_nodes():
    x = lobatto_nodes(3)
    np.testing.assert_allclose(x, [-1, -1 / np.sqrt(5), 1 / np.sqrt(5), 1], atol=1e-14)


def test_zero_functional():
    assert h_minus1_norm(lambda x: 0 * x, PI_MESH) == 0.0


def test_sine_dual_norm():
    val = h_minus1_norm(np.sin, PI_MESH)
    assert val == pytest.approx(math.sqrt(math.pi / 2), rel=1e-6)


def test_sine_dual_norm_dirichlet():
    mesh = build_mesh_1d((-np.pi, np.pi), 200, periodic=False)
    assert h_minus1_norm(np.sin, mesh) ** 2 == pytest.approx(math.pi / 2, rel=1e-6)


def test_gradient_functional():
    # chi -> int cos(x) chi' = int sin(x) chi, same norm
    ev = DualNormEvaluator(PI_MESH)
    x = ev.physical_points()
    assert ev.norm(None, np.cos(x)) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-6)


def test_2d_dual_norm_product_mode():
    mesh = build_mesh_2d((-np.pi, np.pi), 24, 24)
    val = h_minus1_norm(lambda x, y: np.sin(x) * np.sin(y), mesh) ** 2
    assert val == pytest.approx(math.pi ** 2 / 3, rel=1e-5)


def test_modeling_term_sine():
    mesh = build_mesh_1d((-np.pi, np.pi), 1000)
    v = l2_project(np.sin, mesh, 2)
    em = modeling_term(v, 0.005, np.zeros(1000))
    assert em.sum() == pytest.approx(0.005 * math.pi, rel=1e-5)
    assert np.all(modeling_term(v, 0.005, np.full(1000, 0.005)) == 0)
    const = DGField1D(mesh, 2, np.ones((1000, 3)))
    assert np.abs(modeling_term(const, 0.005, np.zeros(1000))).max() < 1e-28


def test_modeling_term_step_constant_in_time():
    mesh = build_mesh_1d((-np.pi, np.pi), 100)
    v = l2_project(np.sin, mesh, 2)
    step = modeling_term_step(v, v, 0.01, np.zeros(100), 0.1)
    np.testing.assert_allclose(step, 0.1 * modeling_term(v, 0.01, np.zeros(100)), rtol=1e-12)


def test_discretization_term():
    cells, total = discretization_term(np.zeros(4), np.zeros(4), 0.01)
    assert total == 0.0
    widths = np.full(4, 0.5)
    cells, total = discretization_term(9.0 * widths, np.zeros(4), 0.01)
    assert total == pytest.approx(9.0 * 2.0)
    cells, total = discretization_term(np.zeros(4), np.full(4, 1e-4), 0.01)
    assert total == pytest.approx(4e-2)
    with pytest.raises(InvalidConfigurationError):
        discretization_term(np.zeros(4), np.ones(4), 0.0)


def test_breakdown_bound_formula():
    b = EstimatorBreakdown(init_term=0.2, c_f=1.0, grad_max=3.0)
    assert total_bound(b, 0.0) == pytest.approx(0.2)
    b.record(0.5, np.zeros(3), np.zeros(3), 2.0)
    assert b.total_bound(0.5) == pytest.approx(0.2 * math.exp(0.5 * (3.0 + 1.0)))
    b.record(1.0, np.full(3, 0.1), np.full(3, 0.2), 5.0)
    assert b.cum_em == pytest.approx(0.3) and b.cum_ed == pytest.approx(0.6)
    assert b.bounds[-1] == pytest.approx(1.1 * math.exp(6.0))
    b.record(1e4, np.zeros(3), np.zeros(3), 1e3)
    assert b.bounds[-1] == math.inf


def test_initial_term_and_distances():
    mesh = build_mesh_1d((-np.pi, np.pi), 64)
    v = l2_project(np.sin, mesh, 2)
    assert initial_term(np.sin, v) < 1e-8
    w = DGField1D(mesh, 2, v.values + 0.1)
    assert l2_distance(v, w) == pytest.approx(0.1 * math.sqrt(2 * math.pi))
    assert linf_distance(v, w) == pytest.approx(0.1)
    fine = l2_project(np.sin, build_mesh_1d((-np.pi, np.pi), 256), 1)
    assert l2_distance(v, fine) == pytest.approx(l2_distance(fine, v))
    assert l2_distance(v, fine) < 1e-3


def test_gradient_max():
    mesh = build_mesh_2d((-1.0, 1.0), 4, 4)
    v = DGField2D(mesh, (2, 2), np.zeros((4, 4, 3, 3)))
    assert gradient_max(v) == 0.0
    m1 = build_mesh_1d((0.0, 1.0), 5)
    lin = l2_project(lambda x: 3.0 * x, m1, 1)
    assert gradient_max(lin) == pytest.approx(3.0)


def test_step_estimator_parabolic_part():
    mesh = build_mesh_1d((-np.pi, np.pi), 40)
    f = burgers_1d()
    nf = RichtmyerFlux(f, 0.01)
    v0 = l2_project(lambda x: 0.5 * np.sin(x), mesh, 1)
    vh0, _, d0 = reconstruct(v0, f, nf)
    eps_hat = np.full(40, 0.01)
    A = assemble_ip(mesh, 1, eps_hat, 10.0)
    diff = DGField1D(mesh, 1, (A @ v0.values.ravel()).reshape(40, 2) / mass_diagonal(v0))
    split = split_residual(v0, v0, vh0, vh0, d0.rhs, eps_hat, f, 0.01, diff)
    est = StepEstimator(mesh, 1, f, 0.01, 0.01)
    em, ed, rh, rp = est.increments(split)
    assert np.all(em == 0)
    assert np.all(rp >= 0) and rp.sum() > 0
    np.testing.assert_allclose(ed, rh + rp / 0.01)
