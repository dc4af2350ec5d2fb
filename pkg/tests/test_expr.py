import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from caffine import expr as ex
from helpers import mp_eval as _mp_eval
from caffine.errors import DomainError, ExprSyntaxError, OrderExceeded, UnknownIdentifier


def test_parse_sum_of_power():
    e = ex.parse("u1^2 + u2", 2)
    assert e == ex.Add(ex.Pow(ex.Var(1), ex.Num(2.0)), ex.Var(2))


def test_parse_product_of_functions():
    e = ex.parse("exp(u1)*sin(u2)", 2)
    assert e == ex.Mul(ex.Func("exp", ex.Var(1)), ex.Func("sin", ex.Var(2)))


def test_parse_out_of_range_variable():
    with pytest.raises(UnknownIdentifier):
        ex.parse("u3 + 1", 2)


def test_parse_unknown_function():
    with pytest.raises(UnknownIdentifier):
        ex.parse("foo(u1)", 1)


@pytest.mark.parametrize("text,pos", [("(u1", 3), ("u1 +* 2", 4)])
def test_syntax_error_position(text, pos):
    with pytest.raises(ExprSyntaxError) as info:
        ex.parse(text, 2)
    assert info.value.position == pos


def test_power_is_right_associative():
    assert ex.evaluate(ex.parse("2^3^2", 1), [0.0]) == 512.0


def test_power_binds_tighter_than_unary_minus_operand():
    # '^' binds tightest, so the unary minus belongs to the base
    assert ex.evaluate(ex.parse("-u1^2", 1), [3.0]) == 9.0
    assert ex.evaluate(ex.parse("0 - u1^2", 1), [3.0]) == -9.0


def test_parameters_substituted():
    e = ex.parse("a*u1 + b", 1, {"a": 2.0, "b": -1.0})
    assert ex.evaluate(e, [3.0]) == 5.0
    assert ex.params_of(e) == {"a": 2.0, "b": -1.0}


def test_domain_errors():
    with pytest.raises(DomainError):
        ex.evaluate(ex.parse("ln(u1)", 1), [-1.0])
    with pytest.raises(DomainError):
        ex.evaluate(ex.parse("u1^0.5", 1), [-1.0])
    with pytest.raises(DomainError):
        ex.eval_jet(ex.parse("sqrt(u1)", 1), [0.0], 2)


def test_jet_square():
    j = ex.eval_jet(ex.parse("u1^2", 1), [3.0], 2)
    assert np.allclose(j.coeffs, [9, 6, 1])
    assert ex.partial(j, (2,)) == 2.0


def test_jet_exp():
    j = ex.eval_jet(ex.parse("exp(u1)", 1), [0.0], 3)
    assert np.allclose(j.coeffs, [1, 1, 0.5, 1 / 6])
    assert ex.partial(j, (3,)) == pytest.approx(1.0, abs=1e-15)


def test_jet_bilinear():
    j = ex.eval_jet(ex.parse("u1*u2", 2), [2.0, 5.0], 2)
    assert j.value == 10
    assert j.coeff((1, 0)) == 5 and j.coeff((0, 1)) == 2
    assert j.coeff((1, 1)) == 1
    assert j.coeff((2, 0)) == 0 and j.coeff((0, 2)) == 0
    assert ex.partial(j, (1, 1)) == 1


def test_jet_coefficient_count():
    for n in (1, 2, 3, 5):
        for d in range(5):
            assert ex.jet_space(n, d).size == math.comb(n + d, d)


def test_order_limits():
    e = ex.parse("u1", 1)
    with pytest.raises(OrderExceeded):
        ex.eval_jet(e, [0.0], 5)
    with pytest.raises(OrderExceeded):
        ex.partial(ex.eval_jet(e, [0.0], 2), (3,))


def _mp_derivs(text, x0, order):
    f = {
        "atan(u1)": mpmath.atan,
        "sqrt(u1)": mpmath.sqrt,
        "ln(u1)": mpmath.log,
        "cos(u1)*exp(u1)": lambda x: mpmath.cos(x) * mpmath.exp(x),
        "u1^2.5": lambda x: x**2.5,
        "1/(1 + u1^2)": lambda x: 1 / (1 + x**2),
    }[text]
    mpmath.mp.dps = 30
    return [float(mpmath.diff(f, mpmath.mpf(x0), k)) for k in range(order + 1)]


@pytest.mark.parametrize(
    "text", ["atan(u1)", "sqrt(u1)", "ln(u1)", "cos(u1)*exp(u1)", "u1^2.5", "1/(1 + u1^2)"]
)
def test_univariate_jets_against_mpmath(text):
    x0 = 0.7
    j = ex.eval_jet(ex.parse(text, 1), [x0], 4)
    got = [ex.partial(j, (k,)) for k in range(5)]
    assert np.allclose(got, _mp_derivs(text, x0, 4), rtol=1e-12, atol=1e-12)


_TEMPLATES = [
    "exp(a*u1)*cos(u2)",
    "sqrt(1 + u1^2 + a*u2^2)",
    "ln(2 + u1*u2)*u3",
    "atan(u1 - a*u3)/(2 + u2^2)",
    "(1.5 + u1)^a*sin(u2 + u3)",
]


def _fd(f, x, alpha, step):
    """Nested central difference of the mixed partial alpha."""
    if sum(alpha) == 0:
        return f(x)
    i = next(k for k, a in enumerate(alpha) if a)
    rest = list(alpha)
    rest[i] -= 1
    up, down = list(x), list(x)
    up[i] += step
    down[i] -= step
    return (_fd(f, up, rest, step) - _fd(f, down, rest, step)) / (2 * step)


@given(
    st.integers(0, len(_TEMPLATES) - 1),
    st.floats(0.2, 1.5),
    st.lists(st.floats(-0.4, 0.4), min_size=3, max_size=3),
)
def test_jets_match_finite_differences(k, a, point):
    e = ex.parse(_TEMPLATES[k], 3, {"a": a})
    j = ex.eval_jet(e, point, 3)

    mpmath.mp.dps = 40
    x = [mpmath.mpf(v) for v in point]
    step = mpmath.mpf("1e-4")
    for alpha in [(1, 0, 0), (0, 1, 1), (2, 0, 0), (1, 1, 1), (0, 0, 3), (2, 1, 0)]:
        ref = float(_fd(lambda y: _mp_eval(e, y), x, alpha, step))
        assert abs(ex.partial(j, alpha) - ref) < 1e-6


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.floats(-1, 1))
def test_chain_rule_polynomials(coef, x0):
    # f(g(u)) with g = c0 + c1 u + c2 u^2 and f(t) = t^3 - 2t, expanded by hand
    c0, c1, c2 = coef
    g = f"({c0} + {c1}*u1 + {c2}*u1^2)"
    composed = ex.eval_jet(ex.parse(f"{g}^3 - 2*{g}", 1), [x0], 4)
    poly = np.polynomial.Polynomial([c0, c1, c2])
    ref = poly**3 - 2 * poly
    shifted = ref.convert(domain=[-1, 1], window=[-1, 1])
    derivs = [shifted.deriv(k)(x0) if k else shifted(x0) for k in range(5)]
    taylor = [d / math.factorial(k) for k, d in enumerate(derivs)]
    assert np.allclose(composed.coeffs, taylor, atol=1e-10 * (1 + np.abs(taylor).max()))


_leaf = st.one_of(
    st.integers(1, 3).map(lambda i: f"u{i}"),
    st.floats(0.1, 9.0).map(lambda v: repr(round(v, 3))),
)


def _compose(children):
    binary = st.tuples(children, st.sampled_from(["+", "-", "*", "/", "^"]), children).map(
        lambda t: f"({t[0]}){t[1]}({t[2]})"
    )
    unary = st.tuples(st.sampled_from(ex.FUNCTIONS), children).map(lambda t: f"{t[0]}({t[1]})")
    neg = children.map(lambda s: f"-({s})")
    return st.one_of(binary, unary, neg)


@given(st.recursive(_leaf, _compose, max_leaves=8))
def test_parse_print_roundtrip(text):
    e = ex.parse(text, 3)
    assert ex.parse(ex.to_string(e), 3) == e


def test_map_vars_and_rename():
    e = ex.parse("a*u1 + u2", 2, {"a": 1.0})
    shifted = ex.map_vars(e, lambda i: ex.Var(i + 1))
    assert ex.to_string(shifted) == "a * u2 + u3"
    renamed = ex.rename_params(e, lambda s: "L_" + s)
    assert ex.params_of(renamed) == {"L_a": 1.0}
