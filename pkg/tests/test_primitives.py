import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kioplan.primitives import (KinodynamicState, Primitive, PrimitiveSet, boundary_to_coeffs, evaluate,
                                evaluate_many, jerk_cost, jerk_integral, jerk_penalty_matrix, max_speed,
                                primitive_from_boundary, sample_waypoints, solve_obvp, waypoint_basis, waypoint_times)
from oracles import jerk_sq_quadrature, obvp_coeffs, poly_derivative

finite = st.floats(-5.0, 5.0, allow_nan=False)
boundaries = arrays(float, (3, 6), elements=finite)
durations = st.floats(0.3, 3.0)

REST = KinodynamicState()
UNIT = KinodynamicState(position=[1.0, 0.0, 0.0])


def test_rest_to_rest_unit_coefficients():
    prim = solve_obvp(REST, UNIT, 1.0)
    # [DERIVED] 6x6 linear solve oracle
    np.testing.assert_allclose(prim.coefficients[0], obvp_coeffs(prim.boundary, 1.0)[0], atol=1e-12)
    np.testing.assert_allclose(prim.coefficients[0], [0, 0, 0, 10, -15, 6], atol=1e-12)
    np.testing.assert_array_equal(prim.coefficients[1:], 0.0)


def test_rest_to_rest_unit_cost_is_720():
    prim = solve_obvp(REST, UNIT, 1.0)
    # [DERIVED] Simpson quadrature of the squared jerk
    assert jerk_sq_quadrature(prim.coefficients, 0.0, 1.0) == pytest.approx(720.0, abs=1e-9)
    assert jerk_cost(prim) == pytest.approx(720.0, abs=1e-9)
    assert jerk_integral(prim, 1.0) == pytest.approx(720.0, abs=1e-9)


def test_rest_to_rest_unit_peak_speed():
    # [DERIVED] v(t) = 30t^2 - 60t^3 + 30t^4 peaks at t = 1/2 with 15/8
    assert max_speed(solve_obvp(REST, UNIT, 1.0)) == pytest.approx(1.875, abs=1e-12)


def test_zero_motion_primitive_is_zero():
    prim = solve_obvp(REST, REST, 1.5)
    np.testing.assert_array_equal(prim.coefficients, 0.0)
    assert jerk_cost(prim) == 0.0


def test_invalid_duration_rejected():
    with pytest.raises(ValueError):
        solve_obvp(REST, UNIT, 0.0)
    with pytest.raises(ValueError):
        solve_obvp(REST, UNIT, -1.0)
    with pytest.raises(ValueError):
        jerk_penalty_matrix(0.0)


def test_evaluate_outside_duration_rejected():
    prim = solve_obvp(REST, UNIT, 1.0)
    with pytest.raises(ValueError):
        evaluate(prim, 1.5)
    with pytest.raises(ValueError):
        evaluate(prim, -0.1)


def test_waypoints_need_two():
    with pytest.raises(ValueError):
        waypoint_times(1.0, 1)


def test_non_finite_state_rejected():
    with pytest.raises(ValueError):
        KinodynamicState(position=[np.nan, 0, 0])


@given(boundaries, durations)
def test_boundary_states_reproduced(d, T):
    prim = primitive_from_boundary(d, T)
    np.testing.assert_allclose(prim.boundary, d, atol=1e-9)


@given(boundaries, durations)
def test_coefficients_match_linear_solve(d, T):
    np.testing.assert_allclose(primitive_from_boundary(d, T).coefficients, obvp_coeffs(d, T), rtol=1e-9, atol=1e-9)


@given(boundaries, durations)
def test_jerk_quadratic_form_matches_quadrature(d, T):
    prim = primitive_from_boundary(d, T)
    ref = jerk_sq_quadrature(prim.coefficients, 0.0, T)
    assert jerk_cost(prim) == pytest.approx(ref, rel=1e-6, abs=1e-9)


@given(boundaries, durations, st.floats(0.05, 1.0))
def test_partial_jerk_integral_matches_quadrature(d, T, frac):
    prim = primitive_from_boundary(d, T)
    t_end = frac * T
    assert jerk_integral(prim, t_end) == pytest.approx(jerk_sq_quadrature(prim.coefficients, 0.0, t_end),
                                                       rel=1e-6, abs=1e-9)


@given(durations)
def test_penalty_matrix_symmetric_psd(T):
    R = jerk_penalty_matrix(T)
    np.testing.assert_allclose(R, R.T, atol=0)
    assert np.linalg.eigvalsh(R).min() > -1e-8 * np.abs(R).max()


@given(st.floats(0.2, 5.0))
def test_rest_to_rest_cost_scales_as_inverse_fifth_power(T):
    assert jerk_cost(solve_obvp(REST, UNIT, T)) * T ** 5 == pytest.approx(720.0, rel=1e-6)


@given(boundaries, durations)
def test_derivatives_consistent_with_polynomial(d, T):
    prim = primitive_from_boundary(d, T)
    ts = np.linspace(0.0, T, 7)
    for order in range(4):
        np.testing.assert_allclose(evaluate_many(prim, ts, order), poly_derivative(prim.coefficients, ts, order),
                                   rtol=1e-9, atol=1e-9)


@given(boundaries, durations, st.integers(2, 40))
def test_waypoint_basis_matches_sampling(d, T, M):
    prim = primitive_from_boundary(d, T)
    np.testing.assert_allclose(waypoint_basis(T, M) @ d.T, sample_waypoints(prim, M), atol=1e-9)


@given(boundaries, durations)
def test_mapping_matrix_inverts_constraints(d, T):
    B = boundary_to_coeffs(T)
    from oracles import quintic_constraint_matrix

    np.testing.assert_allclose(quintic_constraint_matrix(T) @ B, np.eye(6), atol=1e-9)


def test_primitive_dict_round_trip():
    prim = solve_obvp(REST, KinodynamicState([1.0, 2.0, 0.5], [0.1, 0, 0]), 1.5)
    back = Primitive.from_dict(prim.to_dict())
    np.testing.assert_array_equal(back.coefficients, prim.coefficients)
    assert back.duration == prim.duration


def test_primitive_set_subset_and_boundary():
    x0 = KinodynamicState([1.0, 1.0, 1.0], [0.5, 0, 0])
    T = np.arange(27.0).reshape(3, 9)
    cs = PrimitiveSet(x0, T, [0.1, 0.2, 0.3])
    sub = cs.subset([2, 0])
    np.testing.assert_array_equal(sub.terminals, T[[2, 0]])
    np.testing.assert_array_equal(sub.confidences, [0.3, 0.1])
    b = cs.boundary(1)
    np.testing.assert_array_equal(b[:, 3], T[1, 0:3])
    np.testing.assert_array_equal(b[:, 0], x0.position)
    with pytest.raises(ValueError):
        PrimitiveSet(x0, T, [0.1, 0.2])
