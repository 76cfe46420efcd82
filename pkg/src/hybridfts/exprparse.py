"""Scalar expression language for vector fields, jump maps and Lyapunov functions.

Grammar (whitespace insignificant, no implicit multiplication)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | VAR | FUNC '(' expr (',' expr)* ')' | '(' expr ')'

``^`` binds tightest and is right-associative, so ``-2^2 == -4`` and
``2^3^2 == 512``. Variables are ``x1 .. xn`` (1-based). Functions are
``sign``, ``abs``, ``min`` and ``max``.

Three evaluation routes share one semantics:

* :func:`eval_expr` walks the tree and reports the first non-finite
  subexpression.
* :func:`compile_scalar` generates a Python closure for hot loops; it only
  checks the final value.
* :func:`compile_batch` generates a numpy function over an ``(m, n)`` array.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "ExprSyntaxError",
    "EvalError",
    "parse",
    "to_source",
    "eval_expr",
    "compile_scalar",
    "compile_batch",
    "grad_numeric",
    "max_var_index",
]


class ExprSyntaxError(ValueError):
    """Raised for malformed source; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int, source: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.source = source


class EvalError(ArithmeticError):
    """Raised when evaluation leaves the reals (division by zero, bad power, overflow)."""

    def __init__(self, message: str, subexpr: "Expr | None" = None):
        where = f" in '{to_source(subexpr)}'" if subexpr is not None else ""
        super().__init__(message + where)
        self.subexpr = subexpr


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Call]

_ARITY = {"sign": (1, 1), "abs": (1, 1), "min": (2, None), "max": (2, None)}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)
_VAR_RE = re.compile(r"x([1-9]\d*)")


def _tokenize(src: str):
    pos = 0
    out = []
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", _byte_offset(src, pos), src)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


def _byte_offset(src: str, char_pos: int) -> int:
    return len(src[:char_pos].encode("utf-8"))


class _Parser:
    def __init__(self, src: str, n: int):
        self.src = src
        self.n = n
        self.tokens = _tokenize(src)
        self.i = 0

    def error(self, message: str, pos: int | None = None):
        if pos is None:
            pos = self.tokens[self.i][2]
        raise ExprSyntaxError(message, _byte_offset(self.src, pos), self.src)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, value, pos = self.peek()
        if value != text or kind not in ("op",):
            found = "end of input" if kind == "end" else repr(value)
            self.error(f"expected {text!r}, found {found}")
        self.i += 1

    def parse(self) -> Expr:
        node = self.expr()
        kind, value, _ = self.peek()
        if kind != "end":
            self.error(f"unexpected token {value!r}")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, value, pos = self.take()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            m = _VAR_RE.fullmatch(value)
            if m:
                index = int(m.group(1))
                if index > self.n:
                    self.error(
                        f"variable index out of range: {value} (state dimension {self.n})", pos
                    )
                return Var(index)
            if value not in _ARITY:
                self.error(f"unknown identifier {value!r}", pos)
            self.expect("(")
            args = [self.expr()]
            while self.peek()[0] == "op" and self.peek()[1] == ",":
                self.take()
                args.append(self.expr())
            self.expect(")")
            lo, hi = _ARITY[value]
            if len(args) < lo or (hi is not None and len(args) > hi):
                self.error(f"{value}() takes {lo if hi == lo else f'at least {lo}'} argument(s)", pos)
            return Call(value, tuple(args))
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.error("unexpected end of input", pos)
        self.error(f"unexpected token {value!r}", pos)


def parse(src: str, n: int) -> Expr:
    """Parse ``src`` over state variables ``x1..xn``.

    Raises :class:`ExprSyntaxError` on malformed input, unknown identifiers and
    variable indices above ``n``.
    """
    if n < 1:
        raise ValueError("state dimension must be >= 1")
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0, src)
    return _Parser(src, n).parse()


def max_var_index(e: Expr) -> int:
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Num):
        return 0
    if isinstance(e, Neg):
        return max_var_index(e.operand)
    if isinstance(e, BinOp):
        return max(max_var_index(e.left), max_var_index(e.right))
    return max(max_var_index(a) for a in e.args)


# ---------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _fmt_num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    return _PREC["atom"]


def _wrap(e: Expr, min_prec: int) -> str:
    s = to_source(e)
    return f"({s})" if _prec(e) < min_prec else s


def to_source(e: Expr) -> str:
    """Canonical text for ``e``; ``parse(to_source(e), n) == e``."""
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _PREC["neg"])
    if isinstance(e, Call):
        return f"{e.name}(" + ", ".join(to_source(a) for a in e.args) + ")"
    p = _PREC[e.op]
    if e.op == "^":
        return _wrap(e.left, _PREC["atom"]) + "^" + _wrap(e.right, _PREC["neg"])
    return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p + 1)}"


# ---------------------------------------------------------------- semantics


def _sign(a: float) -> float:
    if a > 0.0:
        return 1.0
    if a < 0.0:
        return -1.0
    return 0.0


def _div(a: float, b: float) -> float:
    if b == 0.0:
        raise EvalError("division by zero")
    return a / b


def _pow(a: float, p: float) -> float:
    if a == 0.0:
        if p > 0.0:
            return 0.0
        if p == 0.0:
            return 1.0
        raise EvalError("zero raised to a negative power")
    if a < 0.0 and not float(p).is_integer():
        raise EvalError("negative base with non-integer exponent (write sign(x)*abs(x)^p)")
    try:
        return math.pow(a, p)
    except OverflowError:
        raise EvalError("overflow in power") from None


_SCALAR_FUNCS = {"sign": _sign, "abs": abs, "min": min, "max": max}


def eval_expr(e: Expr, x: Sequence[float]) -> float:
    """Evaluate ``e`` at state ``x`` (0-based sequence, ``x[k-1]`` is ``xk``)."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        v = float(x[e.index - 1])
    elif isinstance(e, Neg):
        v = -eval_expr(e.operand, x)
    elif isinstance(e, BinOp):
        a = eval_expr(e.left, x)
        b = eval_expr(e.right, x)
        try:
            if e.op == "+":
                v = a + b
            elif e.op == "-":
                v = a - b
            elif e.op == "*":
                v = a * b
            elif e.op == "/":
                v = _div(a, b)
            else:
                v = _pow(a, b)
        except EvalError as err:
            raise EvalError(str(err), e) from None
    else:
        v = _SCALAR_FUNCS[e.name](*(eval_expr(a, x) for a in e.args))
    if not math.isfinite(v):
        raise EvalError("non-finite value", e)
    return v


def _py(e: Expr, names=None) -> str:
    if names is None:
        names = iter(range(1 << 30))
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return f"x[{e.index - 1}]"
    if isinstance(e, Neg):
        return f"(-{_py(e.operand, names)})"
    if isinstance(e, BinOp):
        a, b = _py(e.left, names), _py(e.right, names)
        if e.op in "+-*":
            return f"({a} {e.op} {b})"
        if e.op == "^" and isinstance(e.right, Num) and e.right.value > 0.0:
            # positive base with a literal exponent: plain float power (same C pow)
            t = f"_t{next(names)}"
            return f"({t} ** {b} if ({t} := {a}) > 0.0 else _pow({t}, {b}))"
        return f"{'_div' if e.op == '/' else '_pow'}({a}, {b})"
    fn = {"sign": "_sign", "abs": "abs", "min": "min", "max": "max"}[e.name]
    return f"{fn}(" + ", ".join(_py(a, names) for a in e.args) + ")"


def _checked(exprs, values):
    for e, v in zip(exprs, values):
        if not math.isfinite(v):
            raise EvalError("non-finite value", e)
    return values


def compile_scalar(exprs: Sequence[Expr]) -> Callable[[Sequence[float]], tuple]:
    """Compile expressions into one closure ``x -> tuple of floats``.

    Agrees bit-for-bit with :func:`eval_expr` whenever every intermediate is
    finite; only the outputs are checked for finiteness.
    """
    exprs = tuple(exprs)
    names = iter(range(1 << 30))
    body = ", ".join(_py(e, names) for e in exprs)
    src = (
        "def _f(x):\n"
        f"    out = ({body},)\n"
        "    for v in out:\n"
        "        if not _isfinite(v):\n"
        "            return _checked(_exprs, out)\n"
        "    return out\n"
    )
    ns = {
        "_div": _div,
        "_pow": _pow,
        "_sign": _sign,
        "_isfinite": math.isfinite,
        "_checked": _checked,
        "_exprs": exprs,
    }
    exec(compile(src, "<hybridfts-expr>", "exec"), ns)
    return ns["_f"]


# numpy counterparts ------------------------------------------------------


def _np_div(a, b):
    b = np.asarray(b, dtype=float)
    if np.any(b == 0.0):
        raise EvalError("division by zero")
    return np.asarray(a, dtype=float) / b


def _np_pow(a, p):
    a = np.asarray(a, dtype=float)
    p = np.asarray(p, dtype=float)
    a, p = np.broadcast_arrays(a, p)
    if np.any((a == 0.0) & (p < 0.0)):
        raise EvalError("zero raised to a negative power")
    if np.any((a < 0.0) & (p != np.floor(p))):
        raise EvalError("negative base with non-integer exponent (write sign(x)*abs(x)^p)")
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.power(a, p)
    out = np.where((a == 0.0) & (p > 0.0), 0.0, out)
    return np.where((a == 0.0) & (p == 0.0), 1.0, out)


def _np_min(*args):
    return np.minimum.reduce(np.broadcast_arrays(*args))


def _np_max(*args):
    return np.maximum.reduce(np.broadcast_arrays(*args))


def _npy(e: Expr) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return f"X[:, {e.index - 1}]"
    if isinstance(e, Neg):
        return f"(-{_npy(e.operand)})"
    if isinstance(e, BinOp):
        a, b = _npy(e.left), _npy(e.right)
        if e.op in "+-*":
            return f"({a} {e.op} {b})"
        return f"{'_div' if e.op == '/' else '_pow'}({a}, {b})"
    fn = {"sign": "_sign", "abs": "_abs", "min": "_min", "max": "_max"}[e.name]
    return f"{fn}(" + ", ".join(_npy(a) for a in e.args) + ")"


def compile_batch(exprs: Sequence[Expr]) -> Callable[[np.ndarray], np.ndarray]:
    """Compile expressions into ``X (m, n) -> (m, len(exprs))`` over numpy arrays."""
    exprs = tuple(exprs)
    cols = ", ".join(f"_b({_npy(e)})" for e in exprs)
    src = (
        "def _f(X):\n"
        "    X = _asarray(X, dtype=float)\n"
        "    m = X.shape[0]\n"
        "    _b = lambda v: _broadcast_to(_asarray(v, dtype=float), (m,))\n"
        f"    with _errstate(over='ignore', invalid='ignore', divide='ignore'):\n"
        f"        out = _stack([{cols}], axis=1)\n"
        "    if not _isfinite(out).all():\n"
        "        bad = _argwhere(~_isfinite(out))[0]\n"
        "        raise _EvalError('non-finite value', _exprs[bad[1]])\n"
        "    return out\n"
    )
    ns = {
        "_div": _np_div,
        "_pow": _np_pow,
        "_sign": np.sign,
        "_abs": np.abs,
        "_min": _np_min,
        "_max": _np_max,
        "_asarray": np.asarray,
        "_broadcast_to": np.broadcast_to,
        "_stack": np.stack,
        "_errstate": np.errstate,
        "_isfinite": np.isfinite,
        "_argwhere": np.argwhere,
        "_EvalError": EvalError,
        "_exprs": exprs,
    }
    exec(compile(src, "<hybridfts-batch>", "exec"), ns)
    return ns["_f"]


def grad_numeric(e: Expr, x: Sequence[float], h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of ``e`` at ``x`` with step ``h``."""
    if not h > 0.0:
        raise ValueError("step h must be positive")
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        g[k] = (eval_expr(e, xp) - eval_expr(e, xm)) / (2.0 * h)
    if not np.isfinite(g).all():
        raise EvalError("non-finite gradient", e)
    return g
