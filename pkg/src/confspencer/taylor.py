"""Scalar expressions over chart coordinates and their Taylor jets.

Grammar::

    expr     := term (('+'|'-') term)*
    term     := factor (('*'|'/') factor)*
    factor   := '-' factor | base ('^' exponent)?
    base     := number | ident | '(' expr ')' | func '(' expr ')'
    exponent := '-'? number

Unary minus is accepted as a convenience; a minus in front of a literal
folds into the literal.
"""
from dataclasses import dataclass
import math
import re

import numpy as np

from . import jets
from .jets import DomainError, Jet

FUNCTIONS = ("exp", "ln", "sin", "cos", "sqrt", "tanh", "abs")


class ExpressionError(ValueError):
    """Syntax or name-resolution failure, with a character offset."""

    def __init__(self, message, position=None, text=None):
        self.position = position
        self.text = text
        where = "" if position is None else f" at position {position}"
        super().__init__(f"{message}{where}")

    def line_col(self):
        if self.position is None or self.text is None:
            return None
        before = self.text[: self.position]
        return before.count("\n") + 1, self.position - (before.rfind("\n") + 1) + 1


class EvaluationError(ValueError):
    pass


# AST

class Node:
    __slots__ = ()

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Num(Node):
    value: float


@dataclass(frozen=True, eq=True)
class Sym(Node):
    name: str


@dataclass(frozen=True, eq=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True, eq=True)
class Bin(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True, eq=True)
class Pow(Node):
    base: Node
    exponent: float


@dataclass(frozen=True, eq=True)
class Call(Node):
    func: str
    arg: Node


def count_nodes(e):
    if isinstance(e, (Num, Sym)):
        return 1
    if isinstance(e, (Neg, Call)):
        return 1 + count_nodes(e.arg)
    if isinstance(e, Pow):
        return 1 + count_nodes(e.base)
    return 1 + count_nodes(e.left) + count_nodes(e.right)


def symbols(e):
    if isinstance(e, Sym):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg, Call)):
        return symbols(e.arg)
    if isinstance(e, Pow):
        return symbols(e.base)
    return symbols(e.left) | symbols(e.right)


# names

def allowed_names(dim):
    names = {"alpha", "c0", "pi"}
    for i in range(1, dim + 1):
        names.update({f"x{i}", f"beta{i}", f"A{i}"})
        for j in range(1, dim + 1):
            names.add(f"B{i}{j}")
    return names


def coord(i):
    return f"x{i + 1}"


# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    out = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExpressionError(f"unexpected character {text[start]!r}", start, text)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text, names):
        self.text = text
        self.names = names
        self.toks = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.toks[self.k]

    def take(self):
        t = self.toks[self.k]
        self.k += 1
        return t

    def expect(self, value):
        t = self.take()
        if t[1] != value:
            found = "end of input" if t[0] == "end" else repr(t[1])
            raise ExpressionError(f"expected {value!r}, found {found}", t[2], self.text)
        return t

    def parse(self):
        e = self.expr()
        t = self.peek()
        if t[0] != "end":
            raise ExpressionError(f"unexpected token {t[1]!r}", t[2], self.text)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Bin(op, e, self.term())
        return e

    def term(self):
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Bin(op, e, self.factor())
        return e

    def factor(self):
        t = self.peek()
        if t[0] == "op" and t[1] == "-":
            self.take()
            return negate(self.factor())
        b = self.base()
        if self.peek()[1] == "^":
            self.take()
            sign = 1.0
            if self.peek()[1] == "-":
                self.take()
                sign = -1.0
            t = self.take()
            if t[0] != "num":
                raise ExpressionError("exponent must be a number literal", t[2], self.text)
            b = Pow(b, sign * float(t[1]))
        return b

    def base(self):
        t = self.take()
        kind, val, pos = t
        if kind == "num":
            return Num(float(val))
        if kind == "id":
            if val in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise ExpressionError(f"function {val!r} requires one parenthesized argument", pos, self.text)
                self.take()
                arg = self.expr()
                if self.peek()[1] != ")":
                    nt = self.peek()
                    raise ExpressionError(f"function {val!r} takes exactly one argument", nt[2], self.text)
                self.take()
                return Call(val, arg)
            if val not in self.names:
                raise ExpressionError(f"unknown identifier {val!r}", pos, self.text)
            if self.peek()[1] == "(":
                raise ExpressionError(f"{val!r} is not a function", pos, self.text)
            return Sym(val)
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(val)
        raise ExpressionError(f"unexpected {found}", pos, self.text)


def parse(text, dim):
    """Parse ``text`` into an AST over the chart of dimension ``dim``."""
    if not isinstance(text, str):
        raise ExpressionError("expression must be a string")
    if dim < 1 or dim > jets.MAX_DIM:
        raise ExpressionError(f"dimension must be in 1..{jets.MAX_DIM}")
    return _Parser(text, allowed_names(dim)).parse()


# printer

def _fmt(v):
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def to_text(e):
    if isinstance(e, Num):
        s = _fmt(e.value)
        return f"({s})" if e.value < 0 else s
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_text(e.arg)})"
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Pow):
        b = to_text(e.base)
        if isinstance(e.base, Pow):
            b = f"({b})"
        return f"{b}^{_fmt(e.exponent)}"
    return f"({to_text(e.left)} {e.op} {to_text(e.right)})"


# smart constructors used by differentiation

def num(v):
    return Num(float(v))


def negate(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a, b):
    if isinstance(a, Num) and a.value == 0:
        return b
    if isinstance(b, Num) and b.value == 0:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return Bin("+", a, b)


def sub(a, b):
    if isinstance(b, Num) and b.value == 0:
        return a
    if isinstance(a, Num) and a.value == 0:
        return negate(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return Bin("-", a, b)


def mul(a, b):
    for x, y in ((a, b), (b, a)):
        if isinstance(x, Num):
            if x.value == 0:
                return Num(0.0)
            if x.value == 1:
                return y
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Bin("*", a, b)


def div(a, b):
    if isinstance(b, Num) and b.value == 1:
        return a
    if isinstance(a, Num) and a.value == 0:
        return Num(0.0)
    return Bin("/", a, b)


def pow_(a, q):
    q = float(q)
    if q == 0:
        return Num(1.0)
    if q == 1:
        return a
    if isinstance(a, Num) and q.is_integer():
        return Num(a.value ** q)
    return Pow(a, q)


def differentiate(e, var):
    """Symbolic partial derivative; ``var`` is a 1-based coordinate index or a symbol name."""
    name = f"x{var}" if isinstance(var, int) else var
    return _d(e, name)


def _d(e, v):
    if isinstance(e, Num):
        return Num(0.0)
    if isinstance(e, Sym):
        return Num(1.0 if e.name == v else 0.0)
    if isinstance(e, Neg):
        return negate(_d(e.arg, v))
    if isinstance(e, Bin):
        dl, dr = _d(e.left, v), _d(e.right, v)
        if e.op == "+":
            return add(dl, dr)
        if e.op == "-":
            return sub(dl, dr)
        if e.op == "*":
            return add(mul(dl, e.right), mul(e.left, dr))
        # quotient rule
        return sub(div(dl, e.right), div(mul(e.left, dr), pow_(e.right, 2)))
    if isinstance(e, Pow):
        du = _d(e.base, v)
        return mul(mul(num(e.exponent), pow_(e.base, e.exponent - 1)), du)
    du = _d(e.arg, v)
    if isinstance(du, Num) and du.value == 0:
        return Num(0.0)
    u = e.arg
    f = e.func
    if f == "exp":
        outer = e
    elif f == "ln":
        return div(du, u)
    elif f == "sin":
        outer = Call("cos", u)
    elif f == "cos":
        outer = negate(Call("sin", u))
    elif f == "sqrt":
        return div(du, mul(num(2), e))
    elif f == "tanh":
        outer = sub(num(1), pow_(e, 2))
    elif f == "abs":
        outer = div(u, e)
    else:
        raise EvaluationError(f"unknown function {f}")
    return mul(outer, du)


def substitute(e, mapping):
    """Replace symbols by expressions."""
    if isinstance(e, Sym):
        return mapping.get(e.name, e)
    if isinstance(e, Num):
        return e
    if isinstance(e, Neg):
        return negate(substitute(e.arg, mapping))
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exponent)
    return Bin(e.op, substitute(e.left, mapping), substitute(e.right, mapping))


# evaluation

def _check(cond, what, e):
    if cond:
        raise DomainError(f"{what} in subexpression {to_text(e)}")


def evaluate(e, env):
    """Evaluate over floats, numpy arrays or jets held in ``env``."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Sym):
        if e.name in env:
            return env[e.name]
        if e.name == "pi":
            return math.pi
        raise EvaluationError(f"no value bound for symbol {e.name!r}")
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, Bin):
        a = evaluate(e.left, env)
        b = evaluate(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        _check(np.any(jets.value(b) == 0), "division by zero", e)
        if isinstance(b, Jet):
            return a * jets.reciprocal(b) if isinstance(a, Jet) else jets.reciprocal(b) * a
        return a / b
    if isinstance(e, Pow):
        a = evaluate(e.base, env)
        q = e.exponent
        if float(q).is_integer():
            if q < 0:
                _check(np.any(jets.value(a) == 0), "division by zero", e)
            return jets.integer_power(a, int(q))
        _check(np.any(jets.value(a) <= 0), "real power of non-positive base", e)
        return jets.power(a, q)
    a = evaluate(e.arg, env)
    v = jets.value(a)
    is_jet = isinstance(a, Jet)
    f = e.func
    if f == "exp":
        return jets.exp(a)
    if f == "ln":
        _check(np.any(v <= 0), "ln of non-positive value", e)
        return jets.log(a)
    if f == "sin":
        return jets.sin(a)
    if f == "cos":
        return jets.cos(a)
    if f == "tanh":
        return jets.tanh(a)
    if f == "sqrt":
        _check(np.any(v < 0) or (is_jet and a.order > 0 and np.any(v == 0)),
               "sqrt outside its differentiable domain", e)
        return jets.sqrt(a)
    if f == "abs":
        _check(is_jet and a.order > 0 and np.any(v == 0), "abs is not differentiable at 0", e)
        return jets.absolute(a)
    raise EvaluationError(f"unknown function {f}")


def coordinate_env(point, order, extra=None):
    env = {coord(i): x for i, x in enumerate(Jet.coordinates(point, order))}
    if extra:
        env.update(extra)
    return env


def eval_jet(e, point, order, extra=None):
    """Taylor jet of ``e`` at ``point``: coefficients d^I e(p) / I!."""
    point = np.asarray(point, dtype=float)
    out = evaluate(e, coordinate_env(point, order, extra))
    if not isinstance(out, Jet):
        out = Jet.constant(out, point.shape[0], order)
    return out


def eval_float(e, env):
    return float(evaluate(e, env))


# compilation to plain numpy callables

_NP_FUNCS = {"exp": "np.exp", "ln": "np.log", "sin": "np.sin", "cos": "np.cos",
             "sqrt": "np.sqrt", "tanh": "np.tanh", "abs": "np.abs"}


def to_python(e):
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Sym):
        return "np.pi" if e.name == "pi" else e.name
    if isinstance(e, Neg):
        return f"(-{to_python(e.arg)})"
    if isinstance(e, Call):
        return f"{_NP_FUNCS[e.func]}({to_python(e.arg)})"
    if isinstance(e, Pow):
        q = e.exponent
        return f"({to_python(e.base)})**{int(q) if float(q).is_integer() else repr(q)}"
    return f"({to_python(e.left)} {e.op} {to_python(e.right)})"


def compile_exprs(exprs, argnames):
    """One function returning the tuple of all expression values."""
    body = ", ".join(to_python(e) for e in exprs)
    src = f"def _f({', '.join(argnames)}):\n    return ({body},)\n"
    ns = {"np": np}
    exec(compile(src, "<expr>", "exec"), ns)
    return ns["_f"]
