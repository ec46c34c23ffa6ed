"""Scalar fields on a coordinate chart: expression trees with exact
differentiation, numeric evaluation, light simplification and a parser.

The node vocabulary is fixed (constants, coordinates, negation, n-ary sums
and products, quotients, integer powers, sin/cos/exp/ln/sqrt) and is closed
under differentiation.  There is no canonical form and no decision procedure
for expression equality: fields are compared by evaluating them at the
chart's seeded sample points.

Expressions are immutable and freely share subtrees, so large tensor
formulas are DAGs in memory.  Evaluation and differentiation are memoized
per node, which makes their cost proportional to the number of distinct
nodes rather than the size of the unfolded tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ChartMismatch, DomainError, ExprSyntaxError, UnknownSymbol

_IDENT_FIRST = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_REST = _IDENT_FIRST | set("0123456789")


def _is_identifier(name: str) -> bool:
    return bool(name) and name[0] in _IDENT_FIRST and all(c in _IDENT_REST for c in name)


# ---------------------------------------------------------------------------
# charts and sampling
# ---------------------------------------------------------------------------


class SplitMix64:
    """SplitMix64 generator (Steele, Lea, Flood 2014), used for every seeded
    draw in the package so that sample points and random test data reproduce
    bit-for-bit from a scene's integer seed, independent of the host.

    next_u64:  state += 0x9E3779B97F4A7C15;  z = state;
               z = (z ^ z>>30) * 0xBF58476D1CE4E5B9
               z = (z ^ z>>27) * 0x94D049BB133111EB
               return z ^ z>>31          (all mod 2^64)
    uniform(a, b) maps next_u64 / 2^64 affinely onto [a, b).
    """

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self._MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self._MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self._MASK
        return z ^ (z >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * (self.next_u64() / 2.0**64)

    def randint(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi], by rejection-free modular draw (tiny bias is
        irrelevant for test-data generation)."""
        return lo + self.next_u64() % (hi - lo + 1)


@dataclass(frozen=True)
class Chart:
    """A single coordinate chart: names, per-coordinate domain box and the
    sampling configuration used whenever field equality is decided by
    evaluation."""

    dim: int
    coord_names: tuple[str, ...]
    domain: tuple[tuple[float, float], ...] = ()
    seed: int = 0
    num_points: int = 16

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("chart dimension must be positive")
        if len(self.coord_names) != self.dim:
            raise ValueError("need one name per coordinate")
        if len(set(self.coord_names)) != self.dim:
            raise ValueError("coordinate names must be pairwise distinct")
        for name in self.coord_names:
            if not _is_identifier(name):
                raise ValueError(f"'{name}' is not a valid identifier")
        dom = self.domain or tuple((-1.0, 1.0) for _ in range(self.dim))
        if len(dom) != self.dim:
            raise ValueError("need one interval per coordinate")
        for lo, hi in dom:
            if not lo <= hi:
                raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "domain", tuple((float(a), float(b)) for a, b in dom))

    def coord(self, i: int) -> "Coord":
        return Coord(self, i)

    def coords(self) -> tuple["Coord", ...]:
        return tuple(Coord(self, i) for i in range(self.dim))

    def rng(self, salt: int = 0) -> SplitMix64:
        return SplitMix64(self.seed * 0x100000001 + salt)

    def sample_points(self) -> list[tuple[float, ...]]:
        """num_points points, coordinates drawn uniformly from the domain box
        in row-major (point, coordinate) order from the chart's generator."""
        gen = self.rng()
        return [
            tuple(gen.uniform(lo, hi) for lo, hi in self.domain)
            for _ in range(self.num_points)
        ]


def chart(names: str | tuple[str, ...], domain=None, seed: int = 0, num_points: int = 16) -> Chart:
    """Convenience constructor: ``chart("x y")`` or ``chart(("x", "y"))``."""
    if isinstance(names, str):
        names = tuple(names.replace(",", " ").split())
    dom = tuple(domain) if domain is not None else ()
    if dom and not isinstance(dom[0], (tuple, list)):
        dom = tuple((dom[0], dom[1]) for _ in names)
    else:
        dom = tuple(tuple(iv) for iv in dom)
    return Chart(len(names), tuple(names), dom, seed, num_points)


# ---------------------------------------------------------------------------
# expression nodes
# ---------------------------------------------------------------------------


class Expr:
    """Base node.  ``chart`` is the unique chart of the coordinates appearing
    below this node (None for constant expressions)."""

    __slots__ = ("chart", "_deriv")

    def __init__(self, chart_):
        self.chart = chart_
        self._deriv = None

    # operator sugar; scalars coerce to Const
    def __add__(self, other):
        return add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_coerce(other)))

    def __rsub__(self, other):
        return add(_coerce(other), neg(self))

    def __mul__(self, other):
        return mul(self, _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        return powi(self, n)

    def __str__(self):
        return to_string(self)

    def __repr__(self):
        return f"<Expr {to_string(self)}>"

    def children(self) -> tuple["Expr", ...]:
        return ()


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        super().__init__(None)
        self.value = float(value)


class Coord(Expr):
    __slots__ = ("index", "name")

    def __init__(self, chart_: Chart, index: int):
        if not 0 <= index < chart_.dim:
            raise ValueError("coordinate index out of range")
        super().__init__(chart_)
        self.index = index
        self.name = chart_.coord_names[index]

    def __eq__(self, other):
        return isinstance(other, Coord) and other.chart == self.chart and other.index == self.index

    def __hash__(self):
        return hash((self.chart, self.index))


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        super().__init__(arg.chart)
        self.arg = arg

    def children(self):
        return (self.arg,)


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: tuple[Expr, ...], chart_):
        super().__init__(chart_)
        self.terms = terms

    def children(self):
        return self.terms


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: tuple[Expr, ...], chart_):
        super().__init__(chart_)
        self.factors = factors

    def children(self):
        return self.factors


class Div(Expr):
    __slots__ = ("num", "den")

    def __init__(self, num: Expr, den: Expr):
        super().__init__(_merge_charts(num.chart, den.chart))
        self.num = num
        self.den = den

    def children(self):
        return (self.num, self.den)


class Pow(Expr):
    """Integer power; the exponent is part of the node, not a child."""

    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: int):
        super().__init__(base.chart)
        self.base = base
        self.exponent = int(exponent)

    def children(self):
        return (self.base,)


class Func(Expr):
    __slots__ = ("arg",)
    name = "?"

    def __init__(self, arg: Expr):
        super().__init__(arg.chart)
        self.arg = arg

    def children(self):
        return (self.arg,)


class Sin(Func):
    __slots__ = ()
    name = "sin"


class Cos(Func):
    __slots__ = ()
    name = "cos"


class Exp(Func):
    __slots__ = ()
    name = "exp"


class Ln(Func):
    __slots__ = ()
    name = "ln"


class Sqrt(Func):
    __slots__ = ()
    name = "sqrt"


ZERO = Const(0.0)
ONE = Const(1.0)


def _coerce(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)):
        return Const(x)
    raise TypeError(f"cannot use {type(x).__name__} as an expression")


def _merge_charts(a, b):
    if a is None:
        return b
    if b is None or a == b:
        return a
    raise ChartMismatch("expressions live on different charts")


def is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def is_one(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 1.0


# ---------------------------------------------------------------------------
# smart constructors: constant folding, 0/1 identities, flattening
# ---------------------------------------------------------------------------


def add(*terms) -> Expr:
    flat: list[Expr] = []
    const = 0.0
    chart_ = None
    for t in terms:
        t = _coerce(t)
        chart_ = _merge_charts(chart_, t.chart)
        if isinstance(t, Const):
            const += t.value
        elif isinstance(t, Add):
            for u in t.terms:
                if isinstance(u, Const):
                    const += u.value
                else:
                    flat.append(u)
        else:
            flat.append(t)
    if const != 0.0 or not flat:
        flat.append(Const(const))
    if len(flat) == 1:
        return flat[0]
    return Add(tuple(flat), chart_)


def esum(terms) -> Expr:
    """Sum of an iterable of expressions (flat, single Add node)."""
    return add(*terms)


def neg(e) -> Expr:
    e = _coerce(e)
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Neg):
        return e.arg
    return Neg(e)


def mul(*factors) -> Expr:
    flat: list[Expr] = []
    const = 1.0
    chart_ = None
    for f in factors:
        f = _coerce(f)
        chart_ = _merge_charts(chart_, f.chart)
        if isinstance(f, Const):
            const *= f.value
        elif isinstance(f, Neg):
            const = -const
            flat.append(f.arg)
        elif isinstance(f, Mul):
            for u in f.factors:
                if isinstance(u, Const):
                    const *= u.value
                else:
                    flat.append(u)
        else:
            flat.append(f)
    if const == 0.0:
        return ZERO
    if not flat:
        return Const(const)
    if const != 1.0:
        flat.insert(0, Const(const))
    if len(flat) == 1:
        return flat[0]
    return Mul(tuple(flat), chart_)


def div(num, den) -> Expr:
    num, den = _coerce(num), _coerce(den)
    if is_one(den):
        return num
    if is_zero(num):
        return ZERO
    if isinstance(den, Const) and den.value != 0.0:
        return mul(Const(1.0 / den.value), num)
    return Div(num, den)


def powi(base, exponent: int) -> Expr:
    base = _coerce(base)
    exponent = int(exponent)
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const) and not (base.value == 0.0 and exponent < 0):
        return Const(base.value**exponent)
    return Pow(base, exponent)


def sin(e) -> Expr:
    e = _coerce(e)
    return Const(math.sin(e.value)) if isinstance(e, Const) else Sin(e)


def cos(e) -> Expr:
    e = _coerce(e)
    return Const(math.cos(e.value)) if isinstance(e, Const) else Cos(e)


def exp(e) -> Expr:
    e = _coerce(e)
    return Const(math.exp(e.value)) if isinstance(e, Const) else Exp(e)


def ln(e) -> Expr:
    e = _coerce(e)
    if isinstance(e, Const) and e.value > 0.0:
        return Const(math.log(e.value))
    return Ln(e)


def sqrt(e) -> Expr:
    e = _coerce(e)
    if isinstance(e, Const) and e.value >= 0.0:
        return Const(math.sqrt(e.value))
    return Sqrt(e)


_FUNCTIONS = {"sin": sin, "cos": cos, "exp": exp, "ln": ln, "sqrt": sqrt}


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------


def differentiate(e: Expr, coord: Coord) -> Expr:
    """Exact partial derivative of ``e`` with respect to ``coord``.

    Derivatives are cached on each node, so repeated differentiation of a
    shared subtree costs nothing extra.
    """
    e = _coerce(e)
    if not isinstance(coord, Coord):
        raise TypeError("coord must be a chart coordinate")
    if e.chart is not None and e.chart != coord.chart:
        raise UnknownSymbol(coord.name)
    return _diff(e, coord)


def _diff(e: Expr, coord: Coord) -> Expr:
    cache = e._deriv
    if cache is None:
        cache = e._deriv = {}
    hit = cache.get(coord.index)
    if hit is not None:
        return hit
    d = _diff_rules(e, coord)
    cache[coord.index] = d
    return d


def _diff_rules(e: Expr, coord: Coord) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Coord):
        return ONE if e.index == coord.index else ZERO
    if isinstance(e, Neg):
        return neg(_diff(e.arg, coord))
    if isinstance(e, Add):
        return add(*(_diff(t, coord) for t in e.terms))
    if isinstance(e, Mul):
        terms = []
        for i, f in enumerate(e.factors):
            df = _diff(f, coord)
            if not is_zero(df):
                terms.append(mul(df, *e.factors[:i], *e.factors[i + 1:]))
        return add(*terms) if terms else ZERO
    if isinstance(e, Div):
        du, dv = _diff(e.num, coord), _diff(e.den, coord)
        return div(add(mul(du, e.den), neg(mul(e.num, dv))), mul(e.den, e.den))
    if isinstance(e, Pow):
        return mul(e.exponent, powi(e.base, e.exponent - 1), _diff(e.base, coord))
    if isinstance(e, Sin):
        return mul(cos(e.arg), _diff(e.arg, coord))
    if isinstance(e, Cos):
        return neg(mul(sin(e.arg), _diff(e.arg, coord)))
    if isinstance(e, Exp):
        return mul(e, _diff(e.arg, coord))
    if isinstance(e, Ln):
        return div(_diff(e.arg, coord), e.arg)
    if isinstance(e, Sqrt):
        return div(_diff(e.arg, coord), mul(2.0, e))
    raise TypeError(f"cannot differentiate {type(e).__name__}")


def gradient(e: Expr, chart_: Chart) -> list[Expr]:
    return [differentiate(e, Coord(chart_, i)) for i in range(chart_.dim)]


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def evaluate(e: Expr, point) -> float:
    """IEEE-double value of ``e`` at ``point`` (length = chart dimension)."""
    memo: dict[int, float] = {}
    return _eval_into(e, tuple(point), memo)


def evaluate_many(exprs, point) -> list[float]:
    """Evaluate several expressions at one point with a shared memo, so
    common subtrees are computed once."""
    memo: dict[int, float] = {}
    pt = tuple(point)
    return [_eval_into(e, pt, memo) for e in exprs]


def _eval_into(root: Expr, point: tuple, memo: dict[int, float]) -> float:
    # explicit stack: tensor formulas can nest deeper than Python's default
    # recursion limit
    stack = [root]
    while stack:
        e = stack[-1]
        key = id(e)
        if key in memo:
            stack.pop()
            continue
        kids = e.children()
        pending = [k for k in kids if id(k) not in memo]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        memo[key] = _eval_node(e, point, memo)
    return memo[id(root)]


def _eval_node(e: Expr, point: tuple, memo) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Coord):
        if e.index >= len(point):
            raise DomainError("point has wrong dimension", e)
        return float(point[e.index])
    if isinstance(e, Neg):
        return -memo[id(e.arg)]
    if isinstance(e, Add):
        return math.fsum(memo[id(t)] for t in e.terms)
    if isinstance(e, Mul):
        out = 1.0
        for f in e.factors:
            out *= memo[id(f)]
        return out
    if isinstance(e, Div):
        d = memo[id(e.den)]
        if d == 0.0:
            raise DomainError("division by zero", e)
        return memo[id(e.num)] / d
    if isinstance(e, Pow):
        b = memo[id(e.base)]
        if b == 0.0 and e.exponent < 0:
            raise DomainError("zero raised to a negative power", e)
        return b**e.exponent
    if isinstance(e, Sin):
        return math.sin(memo[id(e.arg)])
    if isinstance(e, Cos):
        return math.cos(memo[id(e.arg)])
    if isinstance(e, Exp):
        return math.exp(memo[id(e.arg)])
    if isinstance(e, Ln):
        a = memo[id(e.arg)]
        if a <= 0.0:
            raise DomainError("ln of a non-positive value", e)
        return math.log(a)
    if isinstance(e, Sqrt):
        a = memo[id(e.arg)]
        if a < 0.0:
            raise DomainError("sqrt of a negative value", e)
        return math.sqrt(a)
    raise TypeError(f"cannot evaluate {type(e).__name__}")


# ---------------------------------------------------------------------------
# simplification: rebuild through the smart constructors
# ---------------------------------------------------------------------------


def simplify(e: Expr) -> Expr:
    """Constant folding, 0/1 identities and sum/product flattening.  The
    result evaluates identically to the input at every in-domain point."""
    memo: dict[int, Expr] = {}
    stack = [_coerce(e)]
    while stack:
        node = stack[-1]
        key = id(node)
        if key in memo:
            stack.pop()
            continue
        kids = node.children()
        pending = [k for k in kids if id(k) not in memo]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        memo[key] = _rebuild(node, memo)
    return memo[id(e)]


def _rebuild(e: Expr, memo) -> Expr:
    if isinstance(e, (Const, Coord)):
        return e
    if isinstance(e, Neg):
        return neg(memo[id(e.arg)])
    if isinstance(e, Add):
        return add(*(memo[id(t)] for t in e.terms))
    if isinstance(e, Mul):
        return mul(*(memo[id(f)] for f in e.factors))
    if isinstance(e, Div):
        return div(memo[id(e.num)], memo[id(e.den)])
    if isinstance(e, Pow):
        return powi(memo[id(e.base)], e.exponent)
    if isinstance(e, Func):
        return _FUNCTIONS[e.name](memo[id(e.arg)])
    raise TypeError(type(e).__name__)


# ---------------------------------------------------------------------------
# printing (parseable; grammar below)
# ---------------------------------------------------------------------------

_PREC_ADD, _PREC_NEG, _PREC_MUL, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _const_str(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_string(e: Expr) -> str:
    return _print(e)[0]


def _print(e: Expr) -> tuple[str, int]:
    if isinstance(e, Const):
        if e.value < 0:
            return f"-{_const_str(-e.value)}", _PREC_NEG
        return _const_str(e.value), _PREC_ATOM
    if isinstance(e, Coord):
        return e.name, _PREC_ATOM
    if isinstance(e, Neg):
        s, p = _print(e.arg)
        if p < _PREC_NEG:
            s = f"({s})"
        return f"-{s}", _PREC_NEG
    if isinstance(e, Add):
        parts = []
        for i, t in enumerate(e.terms):
            s, p = _print(t)
            if i == 0:
                parts.append(s)
            elif s.startswith("-"):
                parts.append(f" - {s[1:]}")
            else:
                parts.append(f" + {s}")
        return "".join(parts), _PREC_ADD
    if isinstance(e, Mul):
        parts = []
        for f in e.factors:
            s, p = _print(f)
            if p < _PREC_MUL:
                s = f"({s})"
            parts.append(s)
        return "*".join(parts), _PREC_MUL
    if isinstance(e, Div):
        ns, np_ = _print(e.num)
        ds, dp = _print(e.den)
        if np_ < _PREC_MUL:
            ns = f"({ns})"
        if dp <= _PREC_MUL:
            ds = f"({ds})"
        return f"{ns}/{ds}", _PREC_MUL
    if isinstance(e, Pow):
        bs, bp = _print(e.base)
        if bp < _PREC_ATOM:
            bs = f"({bs})"
        es = str(e.exponent) if e.exponent >= 0 else f"({e.exponent})"
        return f"{bs}^{es}", _PREC_POW
    if isinstance(e, Func):
        return f"{e.name}({_print(e.arg)[0]})", _PREC_ATOM
    raise TypeError(type(e).__name__)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------
#
# expr    := term (('+'|'-') term)*
# term    := factor (('*'|'/') factor)*
# factor  := ('-'|'+')* power
# power   := atom ('^' exponent)?      exponent := ['-'] integer | '(' ['-'] integer ')'
# atom    := number | name '(' expr ')' | name | '(' expr ')'
#
# Numbers are nonnegative decimal literals with optional fraction and
# exponent part; leading '-' is parsed as negation.

_TOK_NUM, _TOK_NAME, _TOK_OP, _TOK_END = "num", "name", "op", "end"


def _tokenize(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in "+-*/^(),":
            tokens.append((_TOK_OP, c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            tokens.append((_TOK_NUM, text[i:j], i))
            i = j
            continue
        if c in _IDENT_FIRST:
            j = i
            while j < n and text[j] in _IDENT_REST:
                j += 1
            tokens.append((_TOK_NAME, text[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character '{c}'", i)
    tokens.append((_TOK_END, "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, chart_: Chart):
        self.text = text
        self.chart = chart_
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, val, at = self.next()
        if kind != _TOK_OP or val != op:
            raise ExprSyntaxError(f"expected '{op}'", at)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, at = self.peek()
        if kind != _TOK_END:
            raise ExprSyntaxError(f"unexpected '{val}'", at)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == _TOK_OP and val in "+-":
                self.next()
                rhs = self.term()
                e = add(e, rhs) if val == "+" else add(e, neg(rhs))
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == _TOK_OP and val in "*/":
                self.next()
                rhs = self.factor()
                e = mul(e, rhs) if val == "*" else div(e, rhs)
            else:
                return e

    def factor(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == _TOK_OP and val in "+-":
            self.next()
            inner = self.factor()
            return neg(inner) if val == "-" else inner
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == _TOK_OP and val == "^":
            self.next()
            return powi(base, self.exponent())
        return base

    def exponent(self) -> int:
        kind, val, at = self.next()
        sign = 1
        parens = False
        if kind == _TOK_OP and val == "(":
            parens = True
            kind, val, at = self.next()
        if kind == _TOK_OP and val == "-":
            sign = -1
            kind, val, at = self.next()
        if kind != _TOK_NUM or any(c in val for c in ".eE"):
            raise ExprSyntaxError("power exponent must be an integer literal", at)
        if parens:
            self.expect_op(")")
        return sign * int(val)

    def atom(self) -> Expr:
        kind, val, at = self.next()
        if kind == _TOK_NUM:
            return Const(float(val))
        if kind == _TOK_OP and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        if kind == _TOK_NAME:
            nkind, nval, _ = self.peek()
            if nkind == _TOK_OP and nval == "(":
                fn = _FUNCTIONS.get(val)
                if fn is None:
                    raise UnknownSymbol(val, at)
                self.next()
                arg = self.expr()
                self.expect_op(")")
                return fn(arg)
            if val in self.chart.coord_names:
                return Coord(self.chart, self.chart.coord_names.index(val))
            raise UnknownSymbol(val, at)
        raise ExprSyntaxError(f"unexpected '{val}'" if val else "unexpected end of input", at)


def parse_expr(text: str, chart_: Chart) -> Expr:
    """Parse ``text`` against ``chart_``.  Usual infix precedence, ``^`` for
    integer powers, function-call syntax for sin/cos/exp/ln/sqrt."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text, chart_).parse()


# ---------------------------------------------------------------------------
# seeded random polynomial fields (shared by property suites and the CLI)
# ---------------------------------------------------------------------------


def random_polynomial(chart_: Chart, gen: SplitMix64, degree: int = 2, scale: float = 0.25) -> Expr:
    """Random polynomial of total degree <= degree with coefficients drawn
    uniformly from [-scale, scale].  Degree-2 fields keep derived tensor
    DAGs small while exercising all second-derivative paths."""
    xs = chart_.coords()

    def monomials(deg, start):
        if deg == 0:
            yield ()
            return
        yield ()
        for i in range(start, chart_.dim):
            for rest in monomials(deg - 1, i):
                yield (i,) + rest

    seen = set()
    terms = []
    for mono in monomials(degree, 0):
        if mono in seen:
            continue
        seen.add(mono)
        coeff = gen.uniform(-scale, scale)
        terms.append(mul(coeff, *(xs[i] for i in mono)))
    return add(*terms)


def max_abs_on_points(exprs, points):
    """Max absolute value over expressions x points; returns (value, point).
    Accepts a single Expr, an iterable, or a numpy object array."""
    import numpy as np

    if isinstance(exprs, Expr):
        flat = [exprs]
    elif isinstance(exprs, np.ndarray):
        flat = list(exprs.reshape(-1))
    else:
        flat = list(exprs)
    worst, worst_pt = 0.0, tuple(points[0]) if points else ()
    for pt in points:
        vals = evaluate_many(flat, pt)
        m = max((abs(v) for v in vals), default=0.0)
        if m >= worst:
            worst, worst_pt = m, tuple(pt)
    return worst, worst_pt
