"""Time-space periodic coefficient fields and their expression language.

A coefficient is a closed-form expression in the variables t and x, sampled
on a uniform grid over one period cell [0, omega) x [0, ell).  Grammar:

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := unary ('^' unary)*
    unary  := '-' unary | atom
    atom   := number | 't' | 'x' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
    func   := 'sin' | 'cos' | 'exp' | 'abs'

Whitespace is insignificant; numbers are decimal literals with an optional
exponent.  '^' is right-associative and binds the already-resolved unary,
so "-2^2" evaluates to 4.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import EvalError, ParseError

# Relative tolerance deciding whether a structural symmetry holds.
SYMMETRY_TOL = 1e-10

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]+)"
    r"|(?P<op>[-+*/^()]))"
)

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}
_CONSTANTS = {"pi": math.pi, "e": math.e}


# ---------------------------------------------------------------------------
# Expression AST
# ---------------------------------------------------------------------------

class Expr:
    """Parsed coefficient expression."""

    def __init__(self, node):
        self._node = node

    def evaluate(self, t, x):
        """Evaluate on broadcastable arrays t, x; raises EvalError on non-finite."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = np.asarray(_eval_node(self._node, t, x), dtype=float)
        out = np.broadcast_to(out, np.broadcast_shapes(t.shape, x.shape)).copy()
        if not np.all(np.isfinite(out)):
            bad = np.argwhere(~np.isfinite(np.atleast_1d(out)))
            raise EvalError(f"non-finite value at grid node index {tuple(bad[0])}")
        return out

    def unparse(self):
        """Render back to a string that re-parses to the same tree."""
        return _unparse(self._node)

    def __repr__(self):
        return f"Expr({self.unparse()!r})"


def _eval_node(node, t, x):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "t":
        return t
    if kind == "x":
        return x
    if kind == "neg":
        return -_eval_node(node[1], t, x)
    if kind == "call":
        return _FUNCS[node[1]](_eval_node(node[2], t, x))
    if kind == "bin":
        a = _eval_node(node[2], t, x)
        b = _eval_node(node[3], t, x)
        op = node[1]
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return a / b
        return np.power(a, b)
    raise AssertionError(f"unknown node {kind}")


def _unparse(node):
    kind = node[0]
    if kind == "num":
        return repr(node[1])
    if kind in ("t", "x"):
        return kind
    if kind == "neg":
        return f"(-{_unparse(node[1])})"
    if kind == "call":
        return f"{node[1]}({_unparse(node[2])})"
    return f"({_unparse(node[2])}{node[1]}{_unparse(node[3])})"


class _Parser:
    def __init__(self, text):
        self.text = text
        self.pos = 0
        self.tokens = []
        self._tokenize()
        self.i = 0

    def _tokenize(self):
        pos = 0
        while pos < len(self.text):
            m = _TOKEN_RE.match(self.text, pos)
            if m is None or m.end() == pos:
                stripped = self.text[pos:].lstrip()
                if not stripped:
                    break
                raise ParseError(f"unexpected character {stripped[0]!r}", pos)
            if m.lastgroup is not None:
                self.tokens.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
            pos = m.end()

    def peek(self):
        if self.i < len(self.tokens):
            return self.tokens[self.i]
        return ("end", "", len(self.text))

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}, found {val or 'end of input'!r}", pos)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"trailing input {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            node = ("bin", op, node, self.factor())
        return node

    def factor(self):
        bases = [self.unary()]
        while self.peek()[:2] == ("op", "^"):
            self.take()
            bases.append(self.unary())
        node = bases[-1]
        for b in reversed(bases[:-1]):  # right-associative
            node = ("bin", "^", b, node)
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return ("neg", self.unary())
        return self.atom()

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return ("num", float(val))
        if kind == "name":
            if val in ("t", "x"):
                return (val,)
            if val in _CONSTANTS:
                return ("num", _CONSTANTS[val])
            if val in _FUNCS:
                self.expect_op("(")
                inner = self.expr()
                self.expect_op(")")
                return ("call", val, inner)
            raise ParseError(f"unknown name {val!r}", pos)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ParseError(f"expected a value, found {val or 'end of input'!r}", pos)


def parse_expression(text: str) -> Expr:
    """Parse a coefficient expression; raises ParseError with position."""
    return Expr(_Parser(text).parse())


# ---------------------------------------------------------------------------
# Coefficient fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientField:
    """One (omega, ell)-periodic scalar coefficient sampled on the period cell.

    values[j, k] is the sample at (t_j, x_k) with t_j = j*omega/nt and
    x_k = k*ell/nx.  Fields are immutable; arithmetic between fields on the
    same grid yields new fields.
    """

    omega: float
    ell: float
    values: np.ndarray
    expr: str | None = field(default=None, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if not (self.omega > 0 and self.ell > 0):
            raise ValueError("periods must be positive")
        if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 2:
            raise ValueError("values must be an nt x nx array with nt, nx >= 2")
        if not np.all(np.isfinite(v)):
            raise EvalError("field contains non-finite samples")
        v.setflags(write=False)

    @property
    def nt(self):
        return self.values.shape[0]

    @property
    def nx(self):
        return self.values.shape[1]

    @property
    def dt(self):
        return self.omega / self.nt

    @property
    def dx(self):
        return self.ell / self.nx

    def row(self, j):
        """Samples at time index j, periodically wrapped."""
        return self.values[j % self.nt]

    def evaluate(self, t, x):
        """Bilinear periodic interpolation; exact at grid nodes."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        ft = (t / self.dt) % self.nt
        fx = (x / self.dx) % self.nx
        j0 = np.floor(ft).astype(int) % self.nt
        k0 = np.floor(fx).astype(int) % self.nx
        wt = ft - np.floor(ft)
        wx = fx - np.floor(fx)
        j1 = (j0 + 1) % self.nt
        k1 = (k0 + 1) % self.nx
        v = self.values
        return ((1 - wt) * (1 - wx) * v[j0, k0] + (1 - wt) * wx * v[j0, k1]
                + wt * (1 - wx) * v[j1, k0] + wt * wx * v[j1, k1])

    def same_grid(self, other):
        return (self.omega == other.omega and self.ell == other.ell
                and self.nt == other.nt and self.nx == other.nx)

    def _combine(self, other, op, sym, rsym=None):
        if isinstance(other, CoefficientField):
            if not self.same_grid(other):
                raise ValueError("field arithmetic requires matching grids")
            expr = None
            if self.expr is not None and other.expr is not None:
                expr = f"({self.expr}){sym}({other.expr})"
            return CoefficientField(self.omega, self.ell, op(self.values, other.values), expr)
        c = float(other)
        expr = None if self.expr is None else (
            f"({self.expr}){sym}({c!r})" if rsym is None else f"({c!r}){sym}({self.expr})")
        return CoefficientField(self.omega, self.ell,
                                op(self.values, c) if rsym is None else op(c, self.values), expr)

    def __add__(self, other):
        return self._combine(other, np.add, "+")

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        return self._combine(other, np.subtract, "-")

    def __rsub__(self, other):
        return self._combine(other, np.subtract, "-", rsym=True)

    def __mul__(self, other):
        return self._combine(other, np.multiply, "*")

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        expr = None if self.expr is None else f"(0-({self.expr}))"
        return CoefficientField(self.omega, self.ell, -self.values, expr)

    def min(self):
        return float(self.values.min())

    def max(self):
        return float(self.values.max())


@dataclass(frozen=True)
class SymmetryReport:
    """Structural symmetry flags with their max deviations.

    A flag is true iff the deviation is at most SYMMETRY_TOL relative to the
    field's max absolute value.
    """

    even_in_x: bool
    even_in_x_dev: float
    odd_in_x: bool
    odd_in_x_dev: float
    even_in_t: bool
    even_in_t_dev: float
    x_independent: bool
    x_independent_dev: float
    t_independent: bool
    t_independent_dev: float


def build_field(expr: str, omega: float, ell: float, nt: int, nx: int) -> CoefficientField:
    """Sample an expression exactly on the periodic cell grid."""
    if not (omega > 0 and ell > 0):
        raise ValueError("periods must be positive")
    if nt < 2 or nx < 2:
        raise ValueError("need nt >= 2 and nx >= 2")
    tree = parse_expression(expr)
    t = (np.arange(nt) * (omega / nt))[:, None]
    x = (np.arange(nx) * (ell / nx))[None, :]
    return CoefficientField(omega, ell, tree.evaluate(t, x), expr)


def constant_field(value: float, omega: float, ell: float, nt: int, nx: int) -> CoefficientField:
    return build_field(repr(float(value)), omega, ell, nt, nx)


def refine_field(f: CoefficientField, factor: int = 2) -> CoefficientField:
    """Resample an expression-backed field on a grid refined by `factor`."""
    if f.expr is None:
        raise ValueError("field carries no expression, cannot resample exactly")
    return build_field(f.expr, f.omega, f.ell, factor * f.nt, factor * f.nx)


def reflect_x(f: CoefficientField) -> CoefficientField:
    """The field (t, x) -> f(t, -x), using periodic indexing; an involution."""
    idx = (-np.arange(f.nx)) % f.nx
    return CoefficientField(f.omega, f.ell, f.values[:, idx], None)


def mean_and_symmetry(f: CoefficientField) -> tuple[float, SymmetryReport]:
    """Period-cell mean (plain node average, exact for periodic sampling) and symmetries."""
    v = f.values
    scale = float(np.max(np.abs(v)))
    tol = SYMMETRY_TOL * scale
    rx = v[:, (-np.arange(f.nx)) % f.nx]
    rt = v[(-np.arange(f.nt)) % f.nt, :]
    dev_even_x = float(np.max(np.abs(v - rx)))
    dev_odd_x = float(np.max(np.abs(v + rx)))
    dev_even_t = float(np.max(np.abs(v - rt)))
    dev_x_indep = float(np.max(np.abs(v - v.mean(axis=1, keepdims=True))))
    dev_t_indep = float(np.max(np.abs(v - v.mean(axis=0, keepdims=True))))
    rep = SymmetryReport(
        even_in_x=dev_even_x <= tol, even_in_x_dev=dev_even_x,
        odd_in_x=dev_odd_x <= tol, odd_in_x_dev=dev_odd_x,
        even_in_t=dev_even_t <= tol, even_in_t_dev=dev_even_t,
        x_independent=dev_x_indep <= tol, x_independent_dev=dev_x_indep,
        t_independent=dev_t_indep <= tol, t_independent_dev=dev_t_indep,
    )
    return float(v.mean()), rep
