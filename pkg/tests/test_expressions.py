import cmath

import numpy as np
import pytest

from app.core.errors import ExpressionSyntaxError, PoleProximity, UnknownIdentifierError
from app.geometry.parser import parse_expression


@pytest.mark.parametrize(
    "src, z, expected",
    [
        ("z^2", 1 + 1j, 2j),
        ("1/z", 2, 0.5),
        ("exp(z)", 0, 1),
        ("z^2 + 1", 1j, 0),
        ("-z^2", 2, -4),
        ("2*i*z - 3", 1, -3 + 2j),
        ("(z - 1)^(-2)", 3, 0.25),
        ("1.5e-1*z", 2, 0.3),
    ],
)
def test_evaluate(src, z, expected):
    assert parse_expression(src).evaluate(z) == pytest.approx(expected)


@pytest.mark.parametrize(
    "src, z, expected",
    [
        ("z^2", 3, 6),
        ("1/z", 2, -0.25),
        ("exp(z)*z", 1, 2 * cmath.e),
        ("(z^2 + 1)/(z - 2)", 0, -0.25),
        ("exp(2*z)", 0, 2),
    ],
)
def test_derivative(src, z, expected):
    assert parse_expression(src).derivative().evaluate(z) == pytest.approx(expected)


def test_vectorized_evaluation():
    e = parse_expression("z^3 - 2*z")
    z = np.array([[0, 1], [1j, -2]])
    np.testing.assert_allclose(e.evaluate(z), z**3 - 2 * z)


def test_pole_proximity():
    e = parse_expression("1/(z - 1)")
    with pytest.raises(PoleProximity):
        e.evaluate(1.0)
    values = e.evaluate(np.array([0.0, 1.0]), strict=False)
    assert values[0] == pytest.approx(-1)
    assert np.isnan(values[1])


def test_rational_forms():
    num, den = parse_expression("1/(z-1)").as_rational()
    assert num(5) / den(5) == pytest.approx(0.25)
    assert parse_expression("exp(z)").as_rational() is None
    assert parse_expression("(z^2 - 1)/(z - 1)").as_polynomial().coeffs == pytest.approx((1, 1))
    assert parse_expression("1/z").as_polynomial() is None
    assert parse_expression("exp(0)*z").as_polynomial().coeffs == pytest.approx((0, 1))


def test_constants():
    assert parse_expression("2*i + 1").is_constant()
    assert not parse_expression("exp(z)").is_constant()


def test_printed_form_parses_back():
    for src in ("z^2 + 1", "1/(z-1)", "exp(2*z) - (0.5 + 2*i)*z^3", "-z^(-2)"):
        e = parse_expression(src)
        again = parse_expression(str(e))
        z = np.array([0.3 + 0.2j, -0.7 + 1.1j])
        np.testing.assert_allclose(again.evaluate(z), e.evaluate(z))


@pytest.mark.parametrize(
    "src, position",
    [
        ("z +", 3),
        ("", 0),
        ("(z + 1", 6),
        ("z $ 2", 2),
        ("z^z", 2),
        ("z^(1/2)", 2),
        ("z z", 2),
    ],
)
def test_syntax_errors(src, position):
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression(src)
    assert info.value.position == position


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse_expression("z + sin(z)")
    assert info.value.name == "sin"
    assert info.value.position == 4
    assert info.value.code == "unknown_identifier"
