import numpy as np
import pytest
from hypothesis import given, strategies as st

from confspencer import taylor
from confspencer.taylor import Bin, Call, Num, Pow, Sym


def test_node_count():
    assert taylor.count_nodes(taylor.parse("x1^2 + exp(2*x2)", 4)) == 7


def test_unknown_identifier():
    with pytest.raises(taylor.ExpressionError, match="unknown identifier 'x5' at position 0"):
        taylor.parse("x5", 4)


def test_valid_log_expression():
    e = taylor.parse("ln(1 + x1*x1 + x2*x2)", 2)
    assert isinstance(e, Call) and e.func == "ln"


@pytest.mark.parametrize("text", ["x1 +", "(x1", "exp x1", "x1 ** 2", "sin()", "2 x1", "foo(x1)"])
def test_syntax_errors_carry_position(text):
    with pytest.raises(taylor.ExpressionError) as info:
        taylor.parse(text, 2)
    assert info.value.position is not None
    assert info.value.line_col()[0] == 1


def test_line_column_on_multiline_text():
    with pytest.raises(taylor.ExpressionError) as info:
        taylor.parse("x1 +\n  * x2", 2)
    assert info.value.line_col() == (2, 3)


def test_slot_symbols_parse():
    e = taylor.parse("alpha*beta2 + A1*B12 - c0*pi", 2)
    assert taylor.symbols(e) == {"alpha", "beta2", "A1", "B12", "c0", "pi"}


def test_derivative_examples():
    d = lambda t, i: taylor.to_text(taylor.differentiate(taylor.parse(t, 2), i))
    assert d("x1^2", 1) == "(2 * x1)"
    assert d("x1", 2) == "0"
    assert d("x1*exp(x2)", 1) == "exp(x2)"


def test_derivative_matches_jet_coefficient(rng):
    e = taylor.parse("x1*exp(x2) + sin(x1*x2)^2 - sqrt(2 + x1^2)/(3 + x2)", 2)
    de = [taylor.differentiate(e, i + 1) for i in range(2)]
    for p in rng.uniform(-1, 1, size=(100, 2)):
        j = taylor.eval_jet(e, p, 1)
        env = {"x1": p[0], "x2": p[1]}
        for i in range(2):
            ref = j.partial(tuple(int(k == i) for k in range(2)))
            assert abs(taylor.eval_float(de[i], env) - ref) <= 1e-10 * max(1.0, abs(ref))


def test_substitution_composes():
    e = taylor.parse("x1^2 + x2", 2)
    s = taylor.substitute(e, {"x1": taylor.parse("x2 + 1", 2)})
    assert taylor.eval_float(s, {"x1": 0.0, "x2": 2.0}) == 11.0


def test_compiled_matches_interpreter(rng):
    exprs = [taylor.parse(t, 3) for t in ["x1*exp(x2) - sin(x1*x3)", "ln(2 + x1^2)", "abs(x3)^1.5"]]
    f = taylor.compile_exprs(exprs, ["x1", "x2", "x3"])
    for p in rng.uniform(-1, 1, size=(20, 3)):
        env = {"x1": p[0], "x2": p[1], "x3": p[2]}
        got = f(*p)
        for e, g in zip(exprs, got):
            assert abs(float(g) - taylor.eval_float(e, env)) < 1e-14


# random expression trees for the print/parse round trip
leaf = st.one_of(
    st.floats(0.01, 50, allow_nan=False).map(lambda v: Num(round(v, 3))),
    st.sampled_from(["x1", "x2", "alpha", "A1", "B12"]).map(Sym),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*/"), children, children).map(lambda t: Bin(t[0], t[1], t[2])),
        st.tuples(children, st.sampled_from([2.0, 3.0, 0.5, -1.0])).map(lambda t: Pow(t[0], t[1])),
        st.tuples(st.sampled_from(taylor.FUNCTIONS), children).map(lambda t: Call(t[0], t[1])),
    )


trees = st.recursive(leaf, _extend, max_leaves=12)


@given(trees)
def test_print_parse_roundtrip(tree):
    text = taylor.to_text(tree)
    again = taylor.parse(text, 2)
    assert taylor.to_text(again) == text
    assert taylor.to_text(taylor.parse(text.replace(" ", ""), 2)) == text


@given(trees)
def test_count_nodes_is_stable_under_roundtrip(tree):
    assert taylor.count_nodes(taylor.parse(taylor.to_text(tree), 2)) == taylor.count_nodes(tree)
