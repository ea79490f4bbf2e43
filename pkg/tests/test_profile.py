import numpy as np
import pytest
from hypothesis import given, strategies as st

from conformal_lab.errors import DomainError
from conformal_lab.profile import custom_profile, dominates_identity, power_profile, validate_profile


def test_power_profile_values():
    a1, a2, a15 = power_profile(1), power_profile(2), power_profile(1.5)
    assert a1.eval(2.0) == 2 and a1.deriv(2.0) == 1
    assert a2.eval(3.0) == 9 and a2.deriv(3.0) == 6
    assert 2 * a2.eval(3.0) == 3 * a2.deriv(3.0) == 18
    assert a15.eval(4.0) == pytest.approx(8.0, rel=1e-15)


def test_power_profile_rejects_small_p():
    with pytest.raises(DomainError):
        power_profile(0.9)


@pytest.mark.parametrize("p", [1, 1.25, 2, 3, 4.5])
def test_power_profiles_validate(p):
    rep = validate_profile(power_profile(p), 100)
    assert rep.passed, rep.as_dict()
    assert not rep.flags


def test_t_log_t_fails_the_exponent_condition():
    rep = validate_profile(custom_profile(lambda t: t * np.log(np.e * t), lambda t: np.log(np.e * t) + 1, 1.5))
    row = rep.row("p A(t) <= t A'(t)")
    assert not row.passed
    assert row.worst_t > 1
    assert rep.row("convex").passed and rep.row("nondecreasing").passed


def test_square_root_fails_convexity():
    rep = validate_profile(custom_profile(np.sqrt, lambda t: 0.5 / np.sqrt(t), 1.0))
    assert not rep.row("convex").passed
    assert not rep.passed


def test_wrong_derivative_is_caught():
    rep = validate_profile(custom_profile(lambda t: t**2, lambda t: 2.1 * t, 2.0))
    assert not rep.row("A' matches finite differences").passed


def test_fast_growth_is_flagged_not_failed():
    rep = validate_profile(custom_profile(lambda t: t**4, lambda t: 4 * t**3, 2.0))
    assert rep.passed and rep.flags


def test_small_t_max_rejected():
    with pytest.raises(DomainError):
        validate_profile(power_profile(2), 1.5)


@given(st.floats(1, 6), st.floats(1, 1e4))
def test_power_exponent_identity(p, t):
    a = power_profile(p)
    assert t * a.deriv(t) / a.eval(t) == pytest.approx(p, rel=1e-13)


@given(st.floats(1, 6))
def test_power_profiles_dominate_identity(p):
    assert dominates_identity(power_profile(p))
