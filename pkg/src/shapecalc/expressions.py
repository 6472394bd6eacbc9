"""Closed-form scalar fields on the plane with exact first and second derivatives.

Expressions over the variables x1, x2 are parsed into a small AST, differentiated
structurally, and compiled to vectorized numpy callables.  The grammar:

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ['^' ['-'] integer]
    atom   := number | 'x1' | 'x2' | name '(' expr [',' expr] ')' | '(' expr ')'

with functions sin, cos, exp, sqrt, abs (one argument) and min, max (two
arguments).  Exponents must be integer literals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ParseError",
    "NonSmoothPointError",
    "parse",
    "ShapeFunction",
    "HoldAll",
    "AdmissibilityReport",
    "check_admissible",
    "linear_combination",
]


class ParseError(ValueError):
    """Malformed expression text; carries the character offset of the problem."""

    def __init__(self, message, position):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class NonSmoothPointError(ArithmeticError):
    """Derivative requested at a kink of min/max/abs."""


# ---------------------------------------------------------------------------
# AST


class Node:
    __slots__ = ()

    def __add__(self, other):
        return Add(self, other)

    def __mul__(self, other):
        return Mul(self, other)


@dataclass(frozen=True, slots=True)
class Const(Node):
    value: float


@dataclass(frozen=True, slots=True)
class Var(Node):
    index: int  # 1 or 2


@dataclass(frozen=True, slots=True)
class Add(Node):
    a: Node
    b: Node


@dataclass(frozen=True, slots=True)
class Sub(Node):
    a: Node
    b: Node


@dataclass(frozen=True, slots=True)
class Mul(Node):
    a: Node
    b: Node


@dataclass(frozen=True, slots=True)
class Div(Node):
    a: Node
    b: Node


@dataclass(frozen=True, slots=True)
class Neg(Node):
    a: Node


@dataclass(frozen=True, slots=True)
class Pow(Node):
    a: Node
    n: int


@dataclass(frozen=True, slots=True)
class Call(Node):
    name: str  # sin cos exp sqrt abs min max
    args: tuple


# Derivative-only nodes: evaluate one branch depending on a comparison and
# refuse to evaluate exactly at the kink.
@dataclass(frozen=True, slots=True)
class BranchDeriv(Node):
    kind: str  # "min" or "max"
    a: Node
    b: Node
    da: Node
    db: Node


@dataclass(frozen=True, slots=True)
class SignDeriv(Node):  # d/dx |u| = sign(u) * du
    u: Node
    du: Node


_FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "sqrt": 1, "abs": 1, "min": 2, "max": 2}
_NONSMOOTH = {"abs", "min", "max"}


# ---------------------------------------------------------------------------
# Tokenizer / parser


def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in "+-*/^(),":
            tokens.append((c, c, i))
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lit = text[i:j]
            try:
                value = float(lit)
            except ValueError:
                raise ParseError(f"bad number literal '{lit}'", i) from None
            tokens.append(("num", value, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character '{c}'", i)
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.advance()
        if tok[0] != kind:
            raise ParseError(f"expected '{kind}', found '{tok[1]}'", tok[2])
        return tok

    def parse_expr(self):
        node = self.parse_term()
        while self.peek()[0] in "+-":
            op = self.advance()[0]
            rhs = self.parse_term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.peek()[0] in "*/":
            op = self.advance()[0]
            rhs = self.parse_unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def parse_unary(self):
        if self.peek()[0] == "-":
            self.advance()
            return Neg(self.parse_unary())
        if self.peek()[0] == "+":
            self.advance()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        if self.peek()[0] != "^":
            return base
        caret = self.advance()
        sign = 1
        if self.peek()[0] == "-":
            self.advance()
            sign = -1
        tok = self.advance()
        if tok[0] != "num" or tok[1] != int(tok[1]):
            raise ParseError("exponent must be an integer literal", caret[2])
        return Pow(base, sign * int(tok[1]))

    def parse_atom(self):
        tok = self.advance()
        kind, value, pos = tok
        if kind == "num":
            return Const(value)
        if kind == "name":
            if value == "x1":
                return Var(1)
            if value == "x2":
                return Var(2)
            if value in _FUNCTIONS:
                self.expect("(")
                args = [self.parse_expr()]
                while self.peek()[0] == ",":
                    self.advance()
                    args.append(self.parse_expr())
                self.expect(")")
                if len(args) != _FUNCTIONS[value]:
                    raise ParseError(
                        f"{value} takes {_FUNCTIONS[value]} argument(s), got {len(args)}", pos
                    )
                return Call(value, tuple(args))
            raise ParseError(f"unknown identifier '{value}'", pos)
        if kind == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected token '{value if value is not None else kind}'", pos)


# ---------------------------------------------------------------------------
# Printing (grammar syntax, used for round-trips)

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4, Const: 5, Var: 5, Call: 5}


def to_text(node):
    def wrap(child, parent_prec, right=False):
        s = to_text(child)
        prec = _PREC[type(child)]
        if prec < parent_prec or (right and prec == parent_prec):
            return f"({s})"
        return s

    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Add):
        return f"{wrap(node.a, 1)} + {wrap(node.b, 1)}"
    if isinstance(node, Sub):
        return f"{wrap(node.a, 1)} - {wrap(node.b, 1, right=True)}"
    if isinstance(node, Mul):
        return f"{wrap(node.a, 2)}*{wrap(node.b, 2)}"
    if isinstance(node, Div):
        return f"{wrap(node.a, 2)}/{wrap(node.b, 2, right=True)}"
    if isinstance(node, Neg):
        return f"-{wrap(node.a, 3)}"
    if isinstance(node, Pow):
        return f"{wrap(node.a, 5)}^{node.n}"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_text(a) for a in node.args)})"
    raise TypeError(f"cannot print {node!r}")


# ---------------------------------------------------------------------------
# Structural differentiation

_ZERO = Const(0.0)
_ONE = Const(1.0)


def _is_zero(node):
    return isinstance(node, Const) and node.value == 0.0


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return Add(a, b)


def _sub(a, b):
    if _is_zero(b):
        return a
    if _is_zero(a):
        return Neg(b)
    return Sub(a, b)


def _mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return _ZERO
    if isinstance(a, Const) and a.value == 1.0:
        return b
    if isinstance(b, Const) and b.value == 1.0:
        return a
    return Mul(a, b)


def diff(node, var):
    """Exact partial derivative of the AST with respect to x<var>."""
    if isinstance(node, Const):
        return _ZERO
    if isinstance(node, Var):
        return _ONE if node.index == var else _ZERO
    if isinstance(node, Add):
        return _add(diff(node.a, var), diff(node.b, var))
    if isinstance(node, Sub):
        return _sub(diff(node.a, var), diff(node.b, var))
    if isinstance(node, Neg):
        da = diff(node.a, var)
        return _ZERO if _is_zero(da) else Neg(da)
    if isinstance(node, Mul):
        return _add(_mul(diff(node.a, var), node.b), _mul(node.a, diff(node.b, var)))
    if isinstance(node, Div):
        # (a/b)' = a'/b - a b'/b^2
        da, db = diff(node.a, var), diff(node.b, var)
        term1 = _ZERO if _is_zero(da) else Div(da, node.b)
        term2 = _ZERO if _is_zero(db) else Div(_mul(node.a, db), Pow(node.b, 2))
        return _sub(term1, term2)
    if isinstance(node, Pow):
        da = diff(node.a, var)
        if _is_zero(da) or node.n == 0:
            return _ZERO
        if node.n == 1:
            return da
        return _mul(_mul(Const(float(node.n)), Pow(node.a, node.n - 1)), da)
    if isinstance(node, Call):
        u = node.args[0]
        du = diff(u, var)
        if node.name == "sin":
            return _mul(Call("cos", (u,)), du)
        if node.name == "cos":
            return _mul(Neg(Call("sin", (u,))), du)
        if node.name == "exp":
            return _mul(Call("exp", (u,)), du)
        if node.name == "sqrt":
            if _is_zero(du):
                return _ZERO
            return Div(du, _mul(Const(2.0), Call("sqrt", (u,))))
        if node.name == "abs":
            return _ZERO if _is_zero(du) else SignDeriv(u, du)
        if node.name in ("min", "max"):
            a, b = node.args
            da, db = diff(a, var), diff(b, var)
            if _is_zero(da) and _is_zero(db):
                return _ZERO
            return BranchDeriv(node.name, a, b, da, db)
    if isinstance(node, BranchDeriv):
        return BranchDeriv(node.kind, node.a, node.b, diff(node.da, var), diff(node.db, var))
    if isinstance(node, SignDeriv):
        return SignDeriv(node.u, diff(node.du, var))
    raise TypeError(f"cannot differentiate {node!r}")


# ---------------------------------------------------------------------------
# Compilation to numpy callables


def _kink_check(mask, what):
    if np.any(mask):
        raise NonSmoothPointError(f"derivative of {what} evaluated at a kink")


def _branch(kind, a, b, da, db):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _kink_check(a == b, kind)
    pick_a = a < b if kind == "min" else a > b
    return np.where(pick_a, da, db)


def _signd(u, du):
    u = np.asarray(u, dtype=float)
    _kink_check(u == 0.0, "abs")
    return np.sign(u) * du


_EVAL_NS = {
    "np": np,
    "_branch": _branch,
    "_signd": _signd,
}


def _pycode(node):
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Add):
        return f"({_pycode(node.a)} + {_pycode(node.b)})"
    if isinstance(node, Sub):
        return f"({_pycode(node.a)} - {_pycode(node.b)})"
    if isinstance(node, Mul):
        return f"({_pycode(node.a)} * {_pycode(node.b)})"
    if isinstance(node, Div):
        return f"({_pycode(node.a)} / {_pycode(node.b)})"
    if isinstance(node, Neg):
        return f"(-{_pycode(node.a)})"
    if isinstance(node, Pow):
        return f"({_pycode(node.a)} ** {node.n})"
    if isinstance(node, Call):
        args = ", ".join(_pycode(a) for a in node.args)
        if node.name == "abs":
            return f"np.abs({args})"
        if node.name == "min":
            return f"np.minimum({args})"
        if node.name == "max":
            return f"np.maximum({args})"
        return f"np.{node.name}({args})"
    if isinstance(node, BranchDeriv):
        return (
            f"_branch({node.kind!r}, {_pycode(node.a)}, {_pycode(node.b)}, "
            f"{_pycode(node.da)}, {_pycode(node.db)})"
        )
    if isinstance(node, SignDeriv):
        return f"_signd({_pycode(node.u)}, {_pycode(node.du)})"
    raise TypeError(f"cannot compile {node!r}")


def _compile(node):
    raw = eval(f"lambda x1, x2: {_pycode(node)}", dict(_EVAL_NS))  # noqa: S307

    def fn(x1, x2):
        out = np.asarray(raw(x1, x2), dtype=float)
        shape = np.broadcast(x1, x2).shape
        if not shape:
            return float(out)
        if out.shape != shape:
            out = np.broadcast_to(out, shape).copy()
        return out

    return fn


def _contains_nonsmooth(node):
    if isinstance(node, Call) and node.name in _NONSMOOTH:
        return True
    for attr in getattr(node, "__slots__", ()):
        child = getattr(node, attr)
        if isinstance(child, Node) and _contains_nonsmooth(child):
            return True
        if isinstance(child, tuple):
            if any(_contains_nonsmooth(c) for c in child if isinstance(c, Node)):
                return True
    return False


# ---------------------------------------------------------------------------
# ShapeFunction


class ShapeFunction:
    """A scalar field on the plane with compiled value, gradient and Hessian.

    Instances are immutable after construction; all callables are pure and
    reentrant, so concurrent evaluation is safe.
    """

    def __init__(self, expr, label=""):
        self.expr = expr
        self.label = label
        self.smooth = not _contains_nonsmooth(expr)
        d1, d2 = diff(expr, 1), diff(expr, 2)
        self._v = _compile(expr)
        self._d1 = _compile(d1)
        self._d2 = _compile(d2)
        self._d11 = _compile(diff(d1, 1))
        self._d12 = _compile(diff(d1, 2))
        self._d22 = _compile(diff(d2, 2))

    def __repr__(self):
        lbl = f" {self.label!r}" if self.label else ""
        return f"<ShapeFunction{lbl}: {to_text(self.expr)}>"

    def text(self):
        return to_text(self.expr)

    def value(self, x1, x2):
        return self._v(x1, x2)

    def gradient(self, x1, x2):
        return self._d1(x1, x2), self._d2(x1, x2)

    def hessian(self, x1, x2):
        return self._d11(x1, x2), self._d12(x1, x2), self._d22(x1, x2)

    def __call__(self, x1, x2):
        return self._v(x1, x2)

    def eval2(self, x):
        """Value, gradient (2-vector) and Hessian (2x2) at a single point."""
        x1, x2 = float(x[0]), float(x[1])
        v = float(self._v(x1, x2))
        g = np.array([float(self._d1(x1, x2)), float(self._d2(x1, x2))])
        h12 = float(self._d12(x1, x2))
        hess = np.array([[float(self._d11(x1, x2)), h12], [h12, float(self._d22(x1, x2))]])
        return v, g, hess

    def grad_at(self, x):
        x1, x2 = float(x[0]), float(x[1])
        return np.array([float(self._d1(x1, x2)), float(self._d2(x1, x2))])


def parse(text, label="", require_smooth=False):
    """Parse expression text into a ShapeFunction.

    With require_smooth=True, min/max/abs are rejected at parse time (used for
    level functions, which must be twice continuously differentiable).
    """
    p = _Parser(_tokenize(text))
    expr = p.parse_expr()
    trailing = p.peek()
    if trailing[0] != "end":
        raise ParseError(f"unexpected trailing input '{trailing[1]}'", trailing[2])
    if require_smooth and _contains_nonsmooth(expr):
        raise ParseError("min/max/abs are not allowed in a level function", 0)
    return ShapeFunction(expr, label=label or text.strip())


def linear_combination(g, h, lam, label=None):
    """The ShapeFunction g + lam*h with exact derivatives."""
    expr = Add(g.expr, Mul(Const(float(lam)), h.expr))
    return ShapeFunction(expr, label=label or f"{g.label}+{lam!r}*{h.label}")


def constant(value, label=None):
    return ShapeFunction(Const(float(value)), label=label or repr(float(value)))


# ---------------------------------------------------------------------------
# Hold-all box and admissibility


@dataclass(frozen=True)
class HoldAll:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError("degenerate hold-all box")

    def interior_grid(self, n):
        xs = np.linspace(self.xmin, self.xmax, n)
        ys = np.linspace(self.ymin, self.ymax, n)
        return np.meshgrid(xs, ys, indexing="ij")

    def boundary_samples(self, n):
        """4n points on the box boundary."""
        xs = np.linspace(self.xmin, self.xmax, n, endpoint=False)
        ys = np.linspace(self.ymin, self.ymax, n, endpoint=False)
        bottom = np.column_stack([xs, np.full(n, self.ymin)])
        right = np.column_stack([np.full(n, self.xmax), ys])
        top = np.column_stack([self.xmax - xs + self.xmin, np.full(n, self.ymax)])
        left = np.column_stack([np.full(n, self.xmin), self.ymax - ys + self.ymin])
        return np.vstack([bottom, right, top, left])

    def contains(self, x):
        return (self.xmin <= x[0] <= self.xmax) and (self.ymin <= x[1] <= self.ymax)


@dataclass(frozen=True)
class AdmissibilityReport:
    in_F: bool
    delta: float
    boundary_min: float
    has_negative_point: bool
    delta_witness: tuple
    boundary_witness: tuple
    negative_witness: tuple | None
    samples_per_axis: int


def check_admissible(g, box, n=256):
    """Sampled certificate for membership of g in the admissible class.

    Checks, on an n-by-n interior grid and 4n boundary samples: the lower bound
    delta of |grad g| + |g|, strict positivity of g on the box boundary, and the
    existence of a point with g <= 0.  This is a necessary-condition report, not
    a proof; the attained minima are returned so callers can judge the margin.
    """
    if n < 16:
        raise ValueError("need at least 16 samples per axis")
    X, Y = box.interior_grid(n)
    v = g.value(X, Y)
    g1, g2 = g.gradient(X, Y)
    margin = np.hypot(g1, g2) + np.abs(v)
    k = int(np.argmin(margin))
    delta = float(margin.flat[k])
    delta_witness = (float(X.flat[k]), float(Y.flat[k]))

    bpts = box.boundary_samples(n)
    bv = g.value(bpts[:, 0], bpts[:, 1])
    j = int(np.argmin(bv))
    boundary_min = float(bv[j])
    boundary_witness = (float(bpts[j, 0]), float(bpts[j, 1]))

    neg = v <= 0.0
    if np.any(neg):
        i = int(np.argmin(v))
        negative_witness = (float(X.flat[i]), float(Y.flat[i]))
        has_negative_point = True
    else:
        negative_witness = None
        has_negative_point = False

    return AdmissibilityReport(
        in_F=bool(delta > 0.0 and boundary_min > 0.0 and has_negative_point),
        delta=delta,
        boundary_min=boundary_min,
        has_negative_point=has_negative_point,
        delta_witness=delta_witness,
        boundary_witness=boundary_witness,
        negative_witness=negative_witness,
        samples_per_axis=n,
    )
