import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modeladapt.adaptivity import AdaptConfig, ModelAdaptiveSolver, ModelField, adapt_model, dorfler_mark, run_adaptive
from modeladapt.errors import InvalidParameterError
from modeladapt.flux import burgers_1d
from modeladapt.mesh import build_mesh_1d
from modeladapt.solver import SolverConfig, run_fixed_model

CFG = AdaptConfig(tol=1e-2, tol_c=1e-3, eps=0.01)


def brute_force_dorfler(ind, theta):
    """Smallest covering set; among those the largest sum, then lowest indices."""
    n = ind.size
    total = ind.sum()
    for size in range(1, n + 1):
        best = None
        for combo in itertools.combinations(range(n), size):
            s = ind[list(combo)].sum()
            if s >= theta * total * (1 - 1e-14) and (best is None or s > best[0] + 1e-15):
                best = (s, combo)
        if best is not None:
            return best


@given(vals=st.lists(st.floats(0, 1), min_size=1, max_size=9), theta=st.floats(0.05, 1.0))
@settings(max_examples=80, deadline=None)
def test_dorfler_minimal_cover(vals, theta):
    ind = np.array(vals)
    mask = dorfler_mark(ind, theta)
    if ind.sum() <= 0:
        assert not mask.any()
        return
    s, combo = brute_force_dorfler(ind, theta)
    assert mask.sum() == len(combo)
    assert ind[mask].sum() >= theta * ind.sum() * (1 - 1e-12)


def test_dorfler_single_dominant_cell():
    ind = np.full(20, 0.01 / 19)
    ind[7] = 0.99
    mask = dorfler_mark(ind, 0.5)
    assert list(np.flatnonzero(mask)) == [7]


def test_dorfler_ties_lower_index():
    mask = dorfler_mark(np.array([1.0, 1.0, 1.0, 1.0]), 0.5)
    assert list(np.flatnonzero(mask)) == [0, 1]


def test_zero_increments_coarsen_everything():
    field = ModelField(0.01, np.full(5, 0.01))
    out = adapt_model(np.zeros(5), np.zeros(5), field, CFG, np.full(5, 0.1))
    assert not out.active.any()


def test_below_tol_large_em_keeps_state():
    field = ModelField(0.01, np.array([0.0, 0.01, 0.0]))
    em = np.array([0.0, 1e-3, 0.0])
    out = adapt_model(em, np.zeros(3), field, CFG, np.full(3, 0.1))
    np.testing.assert_array_equal(out.values, [0.0, 0.01, 0.0])


def test_refine_marked_cell_above_tol():
    field = ModelField.zeros(build_mesh_1d((0.0, 1.0), 4), 0.01)
    em = np.array([0.0, 0.02, 1e-4, 0.0])
    out = adapt_model(em, np.zeros(4), field, CFG, np.full(4, 0.25), step=3)
    np.testing.assert_array_equal(out.values, [0.0, 0.01, 0.0, 0.0])
    assert out.log[-1][0] == 3 and list(out.log[-1][1]) == [1]


def test_active_cell_with_zero_em_is_reset():
    field = ModelField(0.01, np.array([0.01, 0.0]))
    out = adapt_model(np.array([0.0, 0.0]), np.array([0.0, 0.0]), field, CFG, np.ones(2))
    assert not out.active.any()
    # the potential indicator keeps it
    kept = adapt_model(np.zeros(2), np.zeros(2), field, CFG, np.ones(2), e_m_coarsen=np.array([1.0, 0.0]))
    assert kept.active[0]


def test_model_field_validation():
    with pytest.raises(InvalidParameterError):
        ModelField(0.01, np.array([0.0, 0.005]))
    mesh = build_mesh_1d((0.0, 2.0), 4)
    f = ModelField(0.01, np.array([0.0, 0.01, 0.01, 0.0]))
    assert f.measure(mesh) == pytest.approx(1.0)


@pytest.mark.parametrize("kw", [{"tol": 0.0}, {"tol_c": -1.0}, {"theta": 0.0}, {"theta": 1.5},
                                {"eps": -1.0}, {"coarsening": "other"}])
def test_adapt_config_validation(kw):
    args = dict(tol=1e-2, tol_c=1e-3, eps=0.01)
    args.update(kw)
    with pytest.raises(InvalidParameterError):
        AdaptConfig(**args)


def _small_cfg(eps):
    mesh = build_mesh_1d((-np.pi, np.pi), 64, periodic=False)
    return SolverConfig(mesh, burgers_1d(), np.sin, tau=5e-3, final_time=1.5, eps=eps)


def test_zero_eps_is_simple_model_run():
    cfg = _small_cfg(0.0)
    last, _ = run_adaptive(cfg, AdaptConfig(1e-2, 1e-3, 0.0), n_steps=60)
    ref = run_fixed_model(cfg, 0.0, record="final", n_steps=60)
    np.testing.assert_array_equal(last.v_h.values, ref.records[-1].v_h.values)
    assert not last.eps_hat.active.any()


def test_infinite_tol_never_refines():
    cfg = _small_cfg(0.01)
    solver = ModelAdaptiveSolver(cfg, AdaptConfig(math.inf, 1e-3, 0.01))
    assert all(not info.eps_hat.active.any() for info in solver.iterate(300))


def test_adaptive_run_refines_at_the_shock():
    cfg = _small_cfg(0.01)
    solver = ModelAdaptiveSolver(cfg, AdaptConfig(1e-3, 1e-3, 0.01))
    first = None
    for info in solver.iterate(300):
        if info.n == 0:
            assert not info.eps_hat.active.any()
        if info.eps_hat.active.any() and first is None:
            first = info
    assert first is not None
    xs = cfg.mesh.centers[first.eps_hat.active]
    # u0 = sin x steepens where characteristics converge, at the boundary
    assert np.all(np.abs(xs) > 2.5)
    b = info.breakdown
    assert len(b.times) == 300 and b.cum_em == pytest.approx(sum(b.em_inc))


def test_snapshots_returned():
    cfg = _small_cfg(0.01)
    last, snaps = ModelAdaptiveSolver(cfg, CFG).run(n_steps=10, snapshot_times=(0.0, 0.025))
    assert sorted(snaps) == [0, 5] and last.n == 10
