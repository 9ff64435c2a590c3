import math

import numpy as np
import pytest

from speedlab import build_field, mean_and_symmetry, parse_expression, reflect_x, refine_field
from speedlab.errors import EvalError, ParseError

from conftest import field


def test_constant_expression_all_ones():
    f = build_field("1", 1.0, 1.0, 4, 4)
    assert np.all(f.values == 1.0)


def test_time_sine_sample_value():
    f = build_field("1 + 0.5*sin(2*pi*t)", 1.0, 1.0, 64, 2)
    j = 16  # t = 0.25
    assert f.values[j, 0] == pytest.approx(1.5, abs=1e-15)


def test_cosine_mean_is_zero_to_machine_precision():
    f = build_field("cos(2*pi*x)", 1.0, 1.0, 2, 64)
    mean, _ = mean_and_symmetry(f)
    assert abs(mean) < 1e-14


@pytest.mark.parametrize("expr,expected", [
    ("2 + 3*2^2", 14.0),
    ("2^3^2", 512.0),           # right-associative power
    ("-2^2", 4.0),              # unary minus binds before the power chain
    ("2^-1", 0.5),
    ("6/3/2", 1.0),             # left-associative division
    ("1 - 2 - 3", -4.0),
    ("pi", math.pi),
    ("e", math.e),
    ("exp(1)", math.e),
    ("abs(0-3.5)", 3.5),
    ("sin(pi/2)", 1.0),
    ("cos(0)", 1.0),
    ("1.5e2", 150.0),
    (".5 + 2.", 2.5),
    (" ( 1+ 2 ) *3 ", 9.0),
])
def test_grammar_values(expr, expected):
    tree = parse_expression(expr)
    assert float(tree.evaluate(0.0, 0.0)) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("expr", ["1 +", "sin(", "(1", "foo(2)", "2 $", "", "x x"])
def test_parse_errors_carry_position(expr):
    with pytest.raises(ParseError):
        parse_expression(expr).evaluate(0.0, 0.0)


def test_eval_error_on_nonfinite():
    with pytest.raises(EvalError):
        build_field("1/x", 1.0, 1.0, 4, 4)  # x = 0 at the first node
    with pytest.raises(EvalError):
        build_field("(0-1)^0.5", 1.0, 1.0, 4, 4)


def test_roundtrip_unparse_reparse_identical_evaluation():
    exprs = ["1 + 0.5*sin(2*pi*t) - cos(2*pi*x)^2",
             "exp(-abs(x - 0.25))*2.5/(1 + t)",
             "-x^2 + t*x - 1e-3"]
    t = np.linspace(0.0, 1.0, 17)[:, None]
    x = np.linspace(0.0, 1.0, 13)[None, :]
    for expr in exprs:
        tree = parse_expression(expr)
        again = parse_expression(tree.unparse())
        assert np.array_equal(tree.evaluate(t, x), again.evaluate(t, x))


def test_reflect_constant_and_even_fixed_odd_negated():
    const = field("2.5", nt=4, nx=16)
    assert np.array_equal(reflect_x(const).values, const.values)
    even = field("cos(2*pi*x)", nt=4, nx=16)
    np.testing.assert_allclose(reflect_x(even).values, even.values, atol=1e-15)
    odd = field("sin(2*pi*x)", nt=4, nx=16)
    np.testing.assert_allclose(reflect_x(odd).values, -odd.values, atol=1e-15)


def test_reflect_twice_is_identity_exactly():
    f = field("1 + 0.3*sin(2*pi*x) + 0.1*cos(2*pi*t)", nt=8, nx=12)
    assert np.array_equal(reflect_x(reflect_x(f)).values, f.values)


def test_mean_and_symmetry_examples():
    mean, rep = mean_and_symmetry(field("3", nt=8, nx=8))
    assert mean == 3.0
    assert rep.even_in_x and rep.odd_in_x is False and rep.even_in_t
    assert rep.x_independent and rep.t_independent

    mean, rep = mean_and_symmetry(field("1 + 0.5*sin(2*pi*t)", nt=64, nx=4))
    assert mean == pytest.approx(1.0, abs=1e-14)
    assert rep.even_in_x and not rep.even_in_t

    mean, rep = mean_and_symmetry(field("cos(2*pi*x)", nt=4, nx=64))
    assert abs(mean) < 1e-14
    assert rep.even_in_x and not rep.odd_in_x


def test_mean_invariant_under_reflection():
    # same multiset of samples; only the summation order differs
    f = field("1 + 0.4*sin(2*pi*x) + 0.2*cos(2*pi*t)", nt=16, nx=32)
    m1, _ = mean_and_symmetry(f)
    m2, _ = mean_and_symmetry(reflect_x(f))
    assert abs(m1 - m2) <= 1e-15 * max(1.0, abs(m1))


@pytest.mark.parametrize("k", [1, 2, 5, 15])
def test_pure_fourier_modes_average_to_zero(k):
    # periodic trapezoid rule is exact for modes below the Nyquist index
    fx = field(f"sin(2*pi*{k}*x)", nt=2, nx=64)
    ft = field(f"cos(2*pi*{k}*t)", nt=64, nx=2)
    assert abs(fx.values.mean()) < 1e-12
    assert abs(ft.values.mean()) < 1e-12


def test_field_arithmetic_and_grid_guard():
    a = field("1 + x", nt=4, nx=8)
    b = field("2*t", nt=4, nx=8)
    np.testing.assert_allclose((a + b).values, a.values + b.values)
    np.testing.assert_allclose((a - 0.5).values, a.values - 0.5)
    np.testing.assert_allclose((2.0 * a).values, 2.0 * a.values)
    other = field("1", nt=8, nx=8)
    with pytest.raises(ValueError):
        _ = a + other


def test_refine_field_resamples_exactly():
    f = field("sin(2*pi*x)*cos(2*pi*t)", nt=8, nx=8)
    g = refine_field(f)
    assert g.nt == 16 and g.nx == 16
    np.testing.assert_allclose(g.values[::2, ::2], f.values, atol=1e-15)
    bare = reflect_x(f)  # reflection drops the expression
    with pytest.raises(ValueError):
        refine_field(bare)


def test_evaluate_interpolates_and_hits_nodes_exactly():
    f = field("1 + 0.5*sin(2*pi*t) + 0.25*cos(2*pi*x)", nt=32, nx=32)
    t = 5 * (1.0 / 32)
    x = np.arange(32) * (1.0 / 32)
    np.testing.assert_allclose(f.evaluate(t, x), f.values[5], atol=1e-15)
    # periodic wrap
    np.testing.assert_allclose(f.evaluate(t + 3.0, x + 2.0), f.values[5], atol=1e-12)
