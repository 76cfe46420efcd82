import math
import re
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridfts.exprparse import (
    BinOp,
    Call,
    EvalError,
    ExprSyntaxError,
    Neg,
    Num,
    Var,
    compile_batch,
    compile_scalar,
    eval_expr,
    grad_numeric,
    parse,
    to_source,
)

CORPUS = [s for s in (Path(__file__).parent / "data" / "expr_corpus.txt").read_text().splitlines() if s.strip()]


# Reference evaluator written independently of the package: plain recursion
# with Python float operators. Returns None where the value leaves the reals.
def ref_eval(e, x):
    try:
        v = _ref(e, x)
    except (ZeroDivisionError, OverflowError, _Undefined):
        return None
    return v if math.isfinite(v) else None


class _Undefined(Exception):
    pass


def _ref(e, x):
    v = _ref_node(e, x)
    if not math.isfinite(v):  # every intermediate must stay finite
        raise _Undefined
    return v


def _ref_node(e, x):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return float(x[e.index - 1])
    if isinstance(e, Neg):
        return -_ref(e.operand, x)
    if isinstance(e, Call):
        args = [_ref(a, x) for a in e.args]
        if e.name == "sign":
            return (args[0] > 0) - (args[0] < 0) + 0.0
        if e.name == "abs":
            return abs(args[0])
        return (min if e.name == "min" else max)(args)
    a, b = _ref(e.left, x), _ref(e.right, x)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        return a / b
    if a == 0.0 and b < 0:
        raise _Undefined
    if a < 0 and b != int(b):
        raise _Undefined
    return a**b


def pyeval(src, x):
    """Second oracle: the source text itself, run by Python with ``^`` read as ``**``."""
    code = re.sub(r"x(\d+)", lambda m: f"x[{int(m.group(1)) - 1}]", src.replace("^", "**"))
    env = {"x": list(x), "abs": abs, "min": min, "max": max, "sign": lambda a: (a > 0) - (a < 0) + 0.0}
    try:
        v = eval(code, env)  # noqa: S307 - test oracle over a fixed corpus
    except (ZeroDivisionError, OverflowError, TypeError):  # TypeError: a complex value reached min/max
        return None
    if isinstance(v, complex) or not math.isfinite(v):
        return None
    return float(v)


STATES = [(1.0, -2.0, 0.5), (0.3, 0.7, -1.25), (-3.0, 2.0, 4.0), (0.0, 1.0, -0.5)]


# ---------------------------------------------------------------- parse


def test_paper_signed_power_parses():
    e = parse("x2 - 20*sign(x1)*abs(x1)^0.75", 2)
    assert eval_expr(e, [1.0, 0.0]) == -20.0
    assert eval_expr(e, [0.0, 0.0]) == 0.0


def test_right_associative_power():
    for x in STATES:
        assert eval_expr(parse("2^3^2", 3), x) == 512.0


@pytest.mark.parametrize(
    "src,value",
    [("-2^2", -4.0), ("(-2)^2", 4.0), ("2^-1", 0.5), ("1 - 2 - 3", -4.0), ("8/4/2", 1.0), ("2*3^2", 18.0), ("--3", 3.0)],
)
def test_precedence(src, value):
    assert eval_expr(parse(src, 1), [0.0]) == value


def test_variable_out_of_range():
    with pytest.raises(ExprSyntaxError, match="out of range") as err:
        parse("x3", 2)
    assert err.value.offset == 0


@pytest.mark.parametrize(
    "src,offset,what",
    [
        ("x1 + ", 5, "end of input"),
        ("x1 $ 2", 3, "unexpected character"),
        ("foo(x1)", 0, "unknown identifier"),
        ("x1 + (x2", 8, "expected ')'"),
        ("sign(x1, x2)", 0, "argument"),
        ("min(x1)", 0, "argument"),
        ("é + x1 +", 0, "unexpected character"),
        ("2 x1", 2, "unexpected token"),
        ("", 0, "empty"),
    ],
)
def test_syntax_errors_report_byte_offset(src, offset, what):
    with pytest.raises(ExprSyntaxError, match=re.escape(what)) as err:
        parse(src, 2)
    assert err.value.offset == offset


def test_byte_offset_counts_utf8_bytes():
    # a no-break space is whitespace but takes two bytes, so "$" is char 5 and byte 6
    with pytest.raises(ExprSyntaxError) as err:
        parse("x1\u00a0+ $", 1)
    assert err.value.offset == 6
    with pytest.raises(ExprSyntaxError) as err:
        parse("abs(é)", 1)
    assert err.value.offset == 4


# ---------------------------------------------------------------- evaluation


def test_sign_at_zero():
    assert eval_expr(parse("sign(x1)", 1), [0.0]) == 0.0
    assert eval_expr(parse("sign(x1)", 1), [-0.0]) == 0.0


@pytest.mark.parametrize("src", ["1/x1", "x1^-1", "x2^0.5"])
def test_eval_errors_name_the_subexpression(src):
    e = parse(src, 2)
    with pytest.raises(EvalError) as err:
        eval_expr(e, [0.0, -1.0])
    assert "in '" in str(err.value)


def test_bare_power_of_negative_base_is_rejected_but_signed_power_works():
    with pytest.raises(EvalError, match="sign"):
        eval_expr(parse("x1^0.5", 1), [-4.0])
    assert eval_expr(parse("sign(x1)*abs(x1)^0.5", 1), [-4.0]) == -2.0
    assert eval_expr(parse("x1^2", 1), [-3.0]) == 9.0


def test_zero_to_positive_power():
    assert eval_expr(parse("abs(x1)^0.75", 1), [0.0]) == 0.0
    assert eval_expr(parse("x1^0", 1), [0.0]) == 1.0


def test_overflow_is_an_eval_error():
    with pytest.raises(EvalError):
        eval_expr(parse("x1^400", 1), [10.0])
    with pytest.raises(EvalError):
        compile_scalar([parse("x1*x1*x1", 1)])([1e200])


@pytest.mark.parametrize("src", CORPUS)
def test_corpus_matches_both_oracles(src):
    e = parse(src, 3)
    f = compile_scalar([e])
    for x in STATES:
        want = ref_eval(e, x)
        assert want == pyeval(src, x) or (want is None) == (pyeval(src, x) is None)
        if want is None:
            with pytest.raises(EvalError):
                eval_expr(e, x)
            continue
        assert eval_expr(e, x) == want
        assert f(x)[0] == want


@pytest.mark.parametrize("src", CORPUS)
def test_batch_agrees_on_corpus(src):
    e = parse(src, 3)
    X = np.asarray(STATES)
    wants = [ref_eval(e, x) for x in STATES]
    if any(w is None for w in wants):
        return
    out = compile_batch([e])(X)
    np.testing.assert_allclose(out[:, 0], wants, rtol=1e-12, atol=0)


# ---------------------------------------------------------------- round trip


@pytest.mark.parametrize("src", CORPUS)
def test_corpus_round_trip(src):
    e = parse(src, 3)
    text = to_source(e)
    assert parse(text, 3) == e
    assert to_source(parse(text, 3)) == text


def test_printer_keeps_needed_parentheses():
    assert to_source(parse("(x1 - x2) - x3", 3)) == "x1 - x2 - x3"
    assert to_source(parse("x1 - (x2 - x3)", 3)) == "x1 - (x2 - x3)"
    assert to_source(parse("(x1^2)^3", 1)) == "(x1^2)^3"
    assert to_source(parse("(-2)^2", 1)) == "(-2)^2"
    assert to_source(parse("2^-1", 1)) == "2^-1"


# ---------------------------------------------------------------- random trees

nums = st.floats(min_value=0.0, max_value=50.0, allow_nan=False).map(lambda v: Num(float(v)))
vars_ = st.integers(1, 3).map(Var)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/"), children, children).map(lambda t: BinOp(*t)),
        st.tuples(children, st.sampled_from([0.5, 2.0, 3.0, 0.75])).map(lambda t: BinOp("^", Call("abs", (t[0],)), Num(t[1]))),
        children.map(lambda c: Call("sign", (c,))),
        children.map(lambda c: Call("abs", (c,))),
        st.tuples(st.sampled_from(["min", "max"]), st.lists(children, min_size=2, max_size=3)).map(
            lambda t: Call(t[0], tuple(t[1]))
        ),
    )


trees = st.recursive(st.one_of(nums, vars_), _extend, max_leaves=12)
states = st.lists(st.floats(min_value=-5, max_value=5, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=300, deadline=None)
@given(trees, states)
def test_eval_matches_reference_exactly(e, x):
    want = ref_eval(e, x)
    if want is None:
        with pytest.raises(EvalError):
            eval_expr(e, x)
        return
    assert eval_expr(e, x) == want
    assert compile_scalar([e])(x)[0] == want


@settings(max_examples=300, deadline=None)
@given(trees)
def test_print_parse_is_structural_identity(e):
    text = to_source(e)
    again = parse(text, 3)
    assert to_source(again) == text
    assert parse(to_source(again), 3) == again


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_sign_times_abs_is_identity(v):
    assert eval_expr(parse("sign(x1)*abs(x1)", 1), [v]) == v


# ---------------------------------------------------------------- gradient


def test_grad_quadratic():
    np.testing.assert_allclose(grad_numeric(parse("x1^2 + x2^2", 2), [1.0, 2.0], 1e-6), [2.0, 4.0], atol=1e-6)


def test_grad_constant():
    assert grad_numeric(parse("5", 2), [0.3, -7.0]).tolist() == [0.0, 0.0]


def test_grad_product():
    np.testing.assert_allclose(grad_numeric(parse("x1*x2", 2), [3.0, -2.0], 1e-6), [-2.0, 3.0], atol=1e-6)


def test_grad_rejects_bad_step_and_non_finite():
    with pytest.raises(ValueError):
        grad_numeric(parse("x1", 1), [0.0], 0.0)
    with pytest.raises(EvalError):
        grad_numeric(parse("x1^400", 1), [10.0])
