"""Expression language for immersion components and truncated Taylor jets.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := unary ('^' factor)?
    unary  := '-'? atom
    atom   := number | ident | func '(' expr ')' | '(' expr ')'

``^`` binds tightest and associates to the right.  Note that the unary minus
applies to an atom, so ``-u1^2`` means ``(-u1)^2``.

A jet is the truncated Taylor polynomial of a scalar function around a point,
with coefficients ``f_alpha = d^alpha f / alpha!`` stored in graded
lexicographic order of the multi-indices.
"""

import functools
import itertools
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ExprSyntaxError, OrderExceeded, UnknownIdentifier

FUNCTIONS = ("exp", "ln", "sin", "cos", "atan", "sqrt")
MAX_ORDER = 4


# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as in u1


@dataclass(frozen=True)
class Param:
    name: str
    value: float


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Add:
    left: object
    right: object


@dataclass(frozen=True)
class Sub:
    left: object
    right: object


@dataclass(frozen=True)
class Mul:
    left: object
    right: object


@dataclass(frozen=True)
class Div:
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: object


@dataclass(frozen=True)
class Func:
    name: str
    arg: object


BINARY = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, n, params):
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n
        self.params = params

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value:
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self):
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", pos)
        return e

    def expr(self):
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.term()
            left = Add(left, right) if op == "+" else Sub(left, right)
        return left

    def term(self):
        left = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.factor()
            left = Mul(left, right) if op == "*" else Div(left, right)
        return left

    def factor(self):
        base = self.unary()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            return Pow(base, self.factor())
        return base

    def unary(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Neg(self.atom())
        return self.atom()

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "ident":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(val, arg)
            m = re.fullmatch(r"u(\d+)", val)
            if m:
                idx = int(m.group(1))
                if not 1 <= idx <= self.n:
                    raise UnknownIdentifier(f"variable {val} out of range for n={self.n}", pos)
                return Var(idx)
            if val in self.params:
                return Param(val, float(self.params[val]))
            raise UnknownIdentifier(f"unknown identifier {val!r}", pos)
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", pos)


def parse(text, n, params=None):
    """Parse a DSL string into an expression tree."""
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text, n, dict(params or {})).parse()


# ---------------------------------------------------------------- printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2}


def to_string(e):
    """Print an expression so that parsing the output gives back the same tree."""
    if isinstance(e, Num):
        s = repr(float(e.value))
        return f"({s})" if e.value < 0 or s.startswith("-") else s
    if isinstance(e, Var):
        return f"u{e.index}"
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Neg):
        return "-" + _atomic(e.arg)
    if isinstance(e, Pow):
        base = e.base
        b = to_string(base) if isinstance(base, Neg) else _atomic(base)
        x = e.exponent
        xs = to_string(x) if isinstance(x, (Pow, Neg)) else _atomic(x)
        return f"{b}^{xs}"
    prec = _PREC[type(e)]
    left = to_string(e.left)
    if _prec_of(e.left) < prec:
        left = f"({left})"
    right = to_string(e.right)
    # left associative: equal precedence on the right needs parentheses
    if _prec_of(e.right) <= prec:
        right = f"({right})"
    return f"{left} {BINARY[type(e)]} {right}"


def _prec_of(e):
    return _PREC.get(type(e), 3)


def _atomic(e):
    s = to_string(e)
    if isinstance(e, (Var, Param, Func, Num)):
        return s
    return f"({s})"


def variables(e):
    """Set of variable indices used by an expression."""
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, (Num, Param)):
        return set()
    if isinstance(e, (Neg, Func)):
        return variables(e.arg)
    if isinstance(e, Pow):
        return variables(e.base) | variables(e.exponent)
    return variables(e.left) | variables(e.right)


def map_vars(e, fn):
    """Return a copy of ``e`` with every variable replaced by ``fn(index)``."""
    if isinstance(e, Var):
        return fn(e.index)
    if isinstance(e, (Num, Param)):
        return e
    if isinstance(e, Neg):
        return Neg(map_vars(e.arg, fn))
    if isinstance(e, Func):
        return Func(e.name, map_vars(e.arg, fn))
    if isinstance(e, Pow):
        return Pow(map_vars(e.base, fn), map_vars(e.exponent, fn))
    return type(e)(map_vars(e.left, fn), map_vars(e.right, fn))


def rename_params(e, fn):
    if isinstance(e, Param):
        return Param(fn(e.name), e.value)
    if isinstance(e, (Num, Var)):
        return e
    if isinstance(e, Neg):
        return Neg(rename_params(e.arg, fn))
    if isinstance(e, Func):
        return Func(e.name, rename_params(e.arg, fn))
    if isinstance(e, Pow):
        return Pow(rename_params(e.base, fn), rename_params(e.exponent, fn))
    return type(e)(rename_params(e.left, fn), rename_params(e.right, fn))


def params_of(e):
    if isinstance(e, Param):
        return {e.name: e.value}
    if isinstance(e, (Num, Var)):
        return {}
    if isinstance(e, (Neg, Func)):
        return params_of(e.arg)
    if isinstance(e, Pow):
        return {**params_of(e.base), **params_of(e.exponent)}
    return {**params_of(e.left), **params_of(e.right)}


def evaluate(e, point):
    """Plain floating point value of an expression at a point."""
    return eval_jet(e, point, 0).coeffs[0]


# ---------------------------------------------------------------- jet spaces


class JetSpace:
    """Multi-index bookkeeping for jets in ``n`` variables up to ``order``."""

    def __init__(self, n, order):
        self.n = n
        self.order = order
        alphas = []
        for d in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(n), d):
                a = [0] * n
                for c in combo:
                    a[c] += 1
                alphas.append(tuple(a))
        self.alphas = alphas
        self.index = {a: i for i, a in enumerate(alphas)}
        self.size = len(alphas)
        self.degrees = np.array([sum(a) for a in alphas])
        self.factorials = np.array(
            [math.prod(math.factorial(k) for k in a) for a in alphas], dtype=float
        )
        ii, jj, kk = [], [], []
        for i, a in enumerate(alphas):
            da = sum(a)
            for j, b in enumerate(alphas):
                if da + sum(b) > order:
                    continue
                ii.append(i)
                jj.append(j)
                kk.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self.pair_i = np.array(ii, dtype=np.intp)
        self.pair_j = np.array(jj, dtype=np.intp)
        self.pair_k = np.array(kk, dtype=np.intp)

    def size_of(self, order):
        return math.comb(self.n + order, order)

    def mul(self, a, b):
        """Product of jet arrays; leading axes broadcast, last axis holds coefficients."""
        prod = a[..., self.pair_i] * b[..., self.pair_j]
        return self._scatter(prod)

    def _scatter(self, prod):
        lead = prod.shape[:-1]
        rows = int(np.prod(lead)) if lead else 1
        flat = prod.reshape(rows, -1)
        idx = (np.arange(rows)[:, None] * self.size + self.pair_k[None, :]).ravel()
        out = np.bincount(idx, weights=flat.ravel(), minlength=rows * self.size)
        return out.reshape(lead + (self.size,))

    def einsum(self, subscripts, a, b):
        """Tensor contraction of two jet-valued arrays (jets multiply pointwise)."""
        ins, out = subscripts.split("->")
        sa, sb = ins.split(",")
        pa = a[..., self.pair_i]
        pb = b[..., self.pair_j]
        prod = np.einsum(f"{sa}P,{sb}P->{out}P", pa, pb)
        return self._scatter(prod)

    def constant(self, value, shape=()):
        out = np.zeros(tuple(shape) + (self.size,))
        out[..., 0] = value
        return out

    def variable(self, i, value):
        out = np.zeros(self.size)
        out[0] = value
        if self.order >= 1:
            a = [0] * self.n
            a[i] = 1
            out[self.index[tuple(a)]] = 1.0
        return out

    def truncate(self, a, order):
        return a[..., : self.size_of(order)]

    @functools.cached_property
    def _diff_tables(self):
        lower = self.size_of(self.order - 1) if self.order >= 1 else 0
        tables = []
        for i in range(self.n):
            src = np.empty(lower, dtype=np.intp)
            fac = np.empty(lower)
            for k in range(lower):
                b = list(self.alphas[k])
                b[i] += 1
                src[k] = self.index[tuple(b)]
                fac[k] = b[i]
            tables.append((src, fac))
        return tables

    def diff(self, a, i):
        """Partial derivative along variable ``i`` (0-based); the order drops by one."""
        if self.order == 0:
            raise OrderExceeded("cannot differentiate an order-0 jet")
        src, fac = self._diff_tables[i]
        return a[..., src] * fac

    def powers(self, nil):
        """Powers 0..order of a jet with zero constant term."""
        out = [self.constant(1.0, nil.shape[:-1]), nil]
        for _ in range(2, self.order + 1):
            out.append(self.mul(out[-1], nil))
        return out[: self.order + 1]

    def compose(self, a, coeffs):
        """Evaluate ``sum_k coeffs[k] (a - a0)^k``, the Taylor composition f(a)."""
        nil = a.copy()
        nil[..., 0] = 0.0
        out = np.zeros_like(a)
        for k, p in enumerate(self.powers(nil)):
            if k < len(coeffs) and coeffs[k] != 0:
                out = out + coeffs[k] * p
        return out

    def inv_matrix(self, m):
        """Inverse of a jet-valued square matrix ``m[i, j, coeff]``."""
        m0 = m[..., 0]
        inv0 = np.linalg.inv(m0)
        nil = m.copy()
        nil[..., 0] = 0.0
        step = -self.einsum("ij,jk->ik", _lift(self, inv0), nil)
        out = _lift(self, np.eye(m0.shape[0]))
        term = out
        for _ in range(self.order):
            term = self.einsum("ij,jk->ik", step, term)
            out = out + term
        return self.einsum("ij,jk->ik", out, _lift(self, inv0))


def _lift(space, arr):
    out = np.zeros(arr.shape + (space.size,))
    out[..., 0] = arr
    return out


@functools.lru_cache(maxsize=None)
def jet_space(n, order):
    return JetSpace(n, order)


# ---------------------------------------------------------------- jets


class Jet:
    """Truncated Taylor expansion of a scalar function at a point."""

    __slots__ = ("space", "coeffs")

    def __init__(self, space, coeffs):
        self.space = space
        self.coeffs = np.asarray(coeffs, dtype=float)

    @property
    def n(self):
        return self.space.n

    @property
    def order(self):
        return self.space.order

    @property
    def value(self):
        return float(self.coeffs[0])

    def coeff(self, alpha):
        alpha = tuple(alpha)
        if sum(alpha) > self.order:
            raise OrderExceeded(f"|alpha| = {sum(alpha)} exceeds jet order {self.order}")
        return float(self.coeffs[self.space.index[alpha]])

    def __repr__(self):
        return f"Jet(n={self.n}, order={self.order}, coeffs={self.coeffs!r})"


def partial(jet, alpha):
    """Mixed partial derivative d^alpha f at the expansion point."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != jet.n:
        raise ValueError("multi-index length must equal the number of variables")
    if sum(alpha) > jet.order:
        raise OrderExceeded(f"|alpha| = {sum(alpha)} exceeds jet order {jet.order}")
    i = jet.space.index[alpha]
    return float(jet.coeffs[i] * jet.space.factorials[i])


def eval_jet(e, point, order):
    """Jet of expression ``e`` at ``point`` truncated at ``order``."""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if order > MAX_ORDER or order < 0:
        raise OrderExceeded(f"order must be between 0 and {MAX_ORDER}")
    space = jet_space(point.size, order)
    return Jet(space, _jet(e, space, point))


def eval_jets(exprs, point, order):
    """Coefficient array of several expressions, shape (len(exprs), size)."""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    space = jet_space(point.size, order)
    return np.array([_jet(e, space, point) for e in exprs])


def _is_constant(e):
    return not variables(e)


def _jet(e, space, point):
    if isinstance(e, Num):
        return space.constant(e.value)
    if isinstance(e, Param):
        return space.constant(e.value)
    if isinstance(e, Var):
        if e.index > space.n:
            raise UnknownIdentifier(f"variable u{e.index} out of range for n={space.n}")
        return space.variable(e.index - 1, point[e.index - 1])
    if isinstance(e, Neg):
        return -_jet(e.arg, space, point)
    if isinstance(e, Add):
        return _jet(e.left, space, point) + _jet(e.right, space, point)
    if isinstance(e, Sub):
        return _jet(e.left, space, point) - _jet(e.right, space, point)
    if isinstance(e, Mul):
        return space.mul(_jet(e.left, space, point), _jet(e.right, space, point))
    if isinstance(e, Div):
        den = _jet(e.right, space, point)
        if den[0] == 0.0:
            raise DomainError(f"division by zero in {to_string(e)}", to_string(e.right))
        return space.mul(_jet(e.left, space, point), _power_const(den, -1.0, space, e.right))
    if isinstance(e, Pow):
        base = _jet(e.base, space, point)
        if _is_constant(e.exponent):
            r = float(_jet(e.exponent, space, point)[0])
            return _power_const(base, r, space, e)
        if base[0] <= 0:
            raise DomainError(
                f"non-positive base {base[0]:.6g} with variable exponent", to_string(e)
            )
        lnb = space.compose(base, _ln_series(base[0], space.order))
        ex = space.mul(_jet(e.exponent, space, point), lnb)
        return space.compose(ex, _exp_series(ex[0], space.order))
    if isinstance(e, Func):
        a = _jet(e.arg, space, point)
        a0 = a[0]
        d = space.order
        if e.name == "exp":
            return space.compose(a, _exp_series(a0, d))
        if e.name == "ln":
            if a0 <= 0:
                raise DomainError(f"ln of non-positive value {a0:.6g}", to_string(e))
            return space.compose(a, _ln_series(a0, d))
        if e.name == "sin":
            return space.compose(a, [math.sin(a0 + k * math.pi / 2) / math.factorial(k) for k in range(d + 1)])
        if e.name == "cos":
            return space.compose(a, [math.cos(a0 + k * math.pi / 2) / math.factorial(k) for k in range(d + 1)])
        if e.name == "sqrt":
            if a0 <= 0:
                raise DomainError(f"sqrt of non-positive value {a0:.6g}", to_string(e))
            return space.compose(a, _binomial_series(a0, 0.5, d))
        if e.name == "atan":
            return space.compose(a, _atan_series(a0, d))
    raise TypeError(f"not an expression node: {e!r}")


def _exp_series(a0, d):
    v = math.exp(a0)
    return [v / math.factorial(k) for k in range(d + 1)]


def _ln_series(a0, d):
    return [math.log(a0)] + [(-1) ** (k + 1) / (k * a0**k) for k in range(1, d + 1)]


def _binomial_series(a0, r, d):
    out = []
    c = 1.0
    for k in range(d + 1):
        out.append(c * a0 ** (r - k))
        c = c * (r - k) / (k + 1)
    return out


def _atan_series(a0, d):
    # derivative 1/(1+x^2); expand 1/q(t) with q(t) = (1+a0^2) + 2 a0 t + t^2
    q = [1.0 + a0 * a0, 2.0 * a0, 1.0]
    g = []
    for k in range(d):
        s = 1.0 if k == 0 else 0.0
        for j in range(1, min(k, 2) + 1):
            s -= q[j] * g[k - j]
        g.append(s / q[0])
    return [math.atan(a0)] + [g[k - 1] / k for k in range(1, d + 1)]


def _power_const(base, r, space, node):
    b0 = base[0]
    if float(r).is_integer():
        k = int(r)
        if k >= 0:
            out = space.constant(1.0)
            p = base
            while k:
                if k & 1:
                    out = space.mul(out, p)
                k >>= 1
                if k:
                    p = space.mul(p, p)
            return out
        if b0 == 0.0:
            raise DomainError("negative power of zero", to_string(node))
        return space.compose(base, _binomial_series(b0, r, space.order))
    if b0 <= 0:
        raise DomainError(
            f"non-integer power of non-positive value {b0:.6g}", to_string(node)
        )
    return space.compose(base, _binomial_series(b0, r, space.order))
