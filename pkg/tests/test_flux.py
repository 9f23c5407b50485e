import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modeladapt.errors import InvalidParameterError, StateSpaceError
from modeladapt.flux import (RichtmyerFlux, StateSet, burgers_1d, burgers_2d, linear_advection,
                             richtmyer_flux, zero_flux)


def test_richtmyer_consistent_state():
    F, w = richtmyer_flux(burgers_1d(), 2.0, 2.0, 0.3)
    assert w == 2.0 and F == 2.0


def test_richtmyer_hand_value():
    F, w = richtmyer_flux(burgers_1d(), 0.0, 2.0, 0.5)
    assert w == 0.0 and F == 0.0


def test_richtmyer_linear_equal_states():
    for r in (0.01, 0.5, 3.0):
        F, _ = richtmyer_flux(linear_advection(), 1.0, 1.0, r)
        assert F == 1.0


def test_intermediate_state_outside_set_raises():
    with pytest.raises(StateSpaceError) as err:
        richtmyer_flux(burgers_1d(), np.array([0.0, 0.0]), np.array([0.0, 9.0]), 0.5)
    assert err.value.values.size >= 1


@given(a=st.floats(-2, 2), b=st.floats(-2, 2), r=st.floats(0.001, 0.2))
@settings(max_examples=100, deadline=None)
def test_richtmyer_lipschitz(a, b, r):
    nf = RichtmyerFlux(burgers_1d(StateSet(-2.0, 2.0)), r)
    w = nf.intermediate(a, b)
    L = nf.lipschitz_constant()
    assert abs(w - a) + abs(w - b) <= L * abs(a - b) + 1e-12


def test_burgers_bound_and_directions():
    f = burgers_1d()
    assert f.second_derivative_bound(StateSet(-2.0, 2.0)) == pytest.approx(1.0)
    assert f.second_derivative_bound() == 1.0
    g = burgers_2d()
    assert g.dim == 2
    u = np.array([0.5, -1.0])
    np.testing.assert_allclose(g.evaluate(u, 0), g.evaluate(u, 1))
    np.testing.assert_allclose(g.jacobian(u, 1), u)


def test_linear_advection_and_zero_flux():
    f = linear_advection((2.0, -1.0))
    assert f.dim == 2 and f.second_derivative_bound() == 0.0
    np.testing.assert_allclose(f.evaluate(np.array([1.0, 3.0]), 1), [-1.0, -3.0])
    z = zero_flux(2)
    assert np.all(z.evaluate(np.ones(3), 1) == 0.0)


def test_state_set_validation():
    with pytest.raises(InvalidParameterError):
        StateSet(1.0, 1.0)
    O = StateSet(-1.0, 1.0)
    assert O.contains([0.0, 1.0]) and not O.contains([1.5])
    s = O.sample(50, rng=3)
    assert O.contains(s)
    with pytest.raises(StateSpaceError):
        O.check([np.nan])


def test_richtmyer_flux_needs_positive_ratio():
    with pytest.raises(InvalidParameterError):
        RichtmyerFlux(burgers_1d(), 0.0)
