import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gasketvar import expr as ex

NAMES = ("t", "x1", "x2")


def ev(text, **env):
    return ex.evaluate(ex.parse(text, NAMES), env)


def test_precedence_and_unary():
    assert ev("1 + 2 * 3") == 7
    assert ev("-2^2") == -4
    assert ev("(1 + 2) * 3 - 4 / 2") == 7
    assert ev("2 * -t", t=3.0) == -6
    assert ev("+t - -t", t=1.5) == 3.0
    assert ev("1e-3 * 2") == pytest.approx(2e-3)
    assert ev(".5 + 1.") == 1.5


def test_functions_vectorize():
    t = np.linspace(-1, 1, 5)
    np.testing.assert_allclose(ev("sin(t) + cos(t) * exp(abs(t))", t=t), np.sin(t) + np.cos(t) * np.exp(np.abs(t)))


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("t ^ 1.5", "non-negative integer"),
        ("t ^ -1", "non-negative integer"),
        ("t ^ x1", "non-negative integer"),
        ("t^2^2", "chained"),
        ("y + 1", "unknown identifier 'y'"),
        ("(t + 1", "expected ')'"),
        ("t + ", "unexpected end of input"),
        ("t $ 2", "unexpected character"),
        ("sin t", "expected '('"),
        ("t t", "unexpected token"),
    ],
)
def test_errors_carry_position(text, fragment):
    with pytest.raises(ex.ExprError) as info:
        ex.parse(text, NAMES)
    assert fragment in str(info.value)
    assert "at position" in str(info.value)
    assert 0 <= info.value.pos <= len(text)


def test_error_position_value():
    with pytest.raises(ex.ExprError) as info:
        ex.parse("t + y", NAMES)
    assert info.value.pos == 4


def test_coordinate_names():
    assert ex.coordinate_names(2) == ("x1",)
    assert ex.coordinate_names(4) == ("x1", "x2", "x3")


def test_non_string_rejected():
    with pytest.raises(ex.ExprError):
        ex.parse(3, NAMES)


# random polynomial-ish expressions for derivative / antiderivative checks
atoms = st.one_of(
    st.sampled_from(["t", "x1", "x2"]),
    st.integers(-3, 3).map(str),
    st.sampled_from(["0.5", "1.25"]),
)


def _combine(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda a: f"({a[0]} {a[1]} {a[2]})"),
        st.tuples(children, st.integers(0, 3)).map(lambda a: f"({a[0]})^{a[1]}"),
        children.map(lambda c: f"-({c})"),
    )


poly_texts = st.recursive(atoms, _combine, max_leaves=8)
smooth_texts = st.recursive(
    atoms,
    lambda c: st.one_of(_combine(c), c.map(lambda a: f"sin({a})"), c.map(lambda a: f"exp(({a})/4)")),
    max_leaves=6,
)


@given(smooth_texts, st.floats(-1.5, 1.5), st.floats(0, 1), st.floats(0, 1))
def test_derivative_matches_central_difference(text, t, x1, x2):
    node = ex.parse(text, NAMES)
    d = ex.derivative(node, "t")
    h = 1e-6
    env = {"x1": x1, "x2": x2}
    fd = (ex.evaluate(node, {**env, "t": t + h}) - ex.evaluate(node, {**env, "t": t - h})) / (2 * h)
    exact = ex.evaluate(d, {**env, "t": t})
    assert abs(fd - exact) <= 1e-5 * (1 + abs(exact))


@given(poly_texts, st.floats(-2, 2), st.floats(0, 1))
def test_polynomial_antiderivative(text, t, x1):
    node = ex.parse(text, NAMES)
    coeffs = ex.polynomial_in(node, "t")
    assert coeffs is not None
    env = {"x1": x1, "x2": 0.3}
    # coefficients reproduce the expression and never contain t
    total = sum(ex.evaluate(c, env) * t**k for k, c in coeffs.items())
    direct = ex.evaluate(node, {**env, "t": t})
    assert total == pytest.approx(direct, rel=1e-9, abs=1e-9)
    assert not any(ex.depends_on(c, "t") for c in coeffs.values())
    P = ex.antiderivative_of_polynomial(coeffs, "t")
    assert ex.evaluate(P, {**env, "t": 0.0}) == 0.0
    dP = ex.evaluate(ex.derivative(P, "t"), {**env, "t": t})
    assert dP == pytest.approx(direct, rel=1e-9, abs=1e-9)


def test_non_polynomial_detected():
    for text in ("sin(t)", "1 / t", "abs(t)", "exp(t) * x1"):
        assert ex.polynomial_in(ex.parse(text, NAMES), "t") is None
    assert ex.polynomial_in(ex.parse("sin(x1) * t^2 / 3", NAMES), "t") is not None


def test_abs_derivative_is_sign():
    d = ex.derivative(ex.parse("abs(t)", NAMES), "t")
    assert ex.evaluate(d, {"t": -2.0}) == -1.0
    assert "sign" in ex.to_text(d)


@given(smooth_texts)
def test_to_text_round_trip(text):
    node = ex.parse(text, NAMES)
    again = ex.parse(ex.to_text(node), NAMES)
    env = {"t": 0.7, "x1": 0.2, "x2": 0.9}
    a, b = ex.evaluate(node, env), ex.evaluate(again, env)
    assert (math.isnan(a) and math.isnan(b)) or a == pytest.approx(b, rel=1e-12, abs=1e-12)
