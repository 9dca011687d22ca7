"""Symbolic expression layer.

Expressions are plain sympy trees built from declared :class:`Symbol` leaves,
exact rational constants, integer powers and the builtin functions
sin/cos/sinh/cosh/exp.  The sign-tagged trig functions S/C/T carry a fixed
numeric tag and are lowered to their trig or hyperbolic branch at
construction time, so every downstream operation (differentiation,
normalization, numeric evaluation) treats them uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import sympy as sp

Expr = sp.Expr

KINDS = ("coordinate", "momentum", "parameter")

NEG_INF = float("-inf")


class SymexprError(Exception):
    pass


class ParseError(SymexprError):
    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvaluationError(SymexprError):
    pass


@dataclass(frozen=True)
class Symbol:
    """A declared phase-space or parameter symbol."""

    name: str
    kind: str

    def __post_init__(self):
        if not self.name or not self.name[0].isalpha():
            raise SymexprError(f"invalid symbol name {self.name!r}")
        if any(not (ch.isalnum() or ch == "_") for ch in self.name):
            raise SymexprError(f"invalid symbol name {self.name!r}")
        if self.kind not in KINDS:
            raise SymexprError(f"unknown symbol kind {self.kind!r}")

    @property
    def sym(self) -> sp.Symbol:
        return sp.Symbol(self.name)


def coordinate(name: str) -> Symbol:
    return Symbol(name, "coordinate")


def momentum(name: str) -> Symbol:
    return Symbol(name, "momentum")


def parameter(name: str) -> Symbol:
    return Symbol(name, "parameter")


class SymbolTable:
    """Name -> Symbol registry used by the parser."""

    def __init__(self, symbols=()):
        self._by_name: dict[str, Symbol] = {}
        for s in symbols:
            self.declare(s)

    def declare(self, symbol: Symbol) -> Symbol:
        existing = self._by_name.get(symbol.name)
        if existing is not None and existing != symbol:
            raise SymexprError(
                f"symbol {symbol.name!r} already declared with kind {existing.kind!r}"
            )
        self._by_name[symbol.name] = symbol
        return symbol

    def lookup(self, name: str) -> Symbol | None:
        return self._by_name.get(name)

    def __iter__(self):
        return iter(self._by_name.values())

    def __contains__(self, name: str) -> bool:
        return name in self._by_name


# ---------------------------------------------------------------------------
# tagged trigonometric functions


def _as_rational(kappa) -> sp.Rational:
    if isinstance(kappa, float):
        kappa = Fraction(str(kappa))
    return sp.Rational(kappa)


def tagged_s(kappa, x: Expr) -> Expr:
    """Sine-like tagged function: sin(sqrt(k)x)/sqrt(k), x, or sinh branch."""
    k = _as_rational(kappa)
    if k > 0:
        r = sp.sqrt(k)
        return sp.sin(r * x) / r
    if k == 0:
        return sp.sympify(x)
    r = sp.sqrt(-k)
    return sp.sinh(r * x) / r


def tagged_c(kappa, x: Expr) -> Expr:
    k = _as_rational(kappa)
    if k > 0:
        return sp.cos(sp.sqrt(k) * x)
    if k == 0:
        return sp.Integer(1)
    return sp.cosh(sp.sqrt(-k) * x)


def tagged_t(kappa, x: Expr) -> Expr:
    return tagged_s(kappa, x) / tagged_c(kappa, x)


_FUNCTIONS = {
    "sin": sp.sin,
    "cos": sp.cos,
    "sinh": sp.sinh,
    "cosh": sp.cosh,
    "exp": sp.exp,
}

_TAGGED = {"S": tagged_s, "C": tagged_c, "T": tagged_t}


# ---------------------------------------------------------------------------
# parser


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self._skip_ws()
        if self.pos >= len(self.text):
            return None
        return self.text[self.pos]

    def take_char(self, ch: str) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def expect(self, ch: str):
        if not self.take_char(ch):
            raise ParseError(f"expected {ch!r}", self.pos)

    def take_integer(self) -> int | None:
        self._skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            return None
        return int(self.text[start : self.pos])

    def take_identifier(self) -> str | None:
        self._skip_ws()
        if self.pos >= len(self.text) or not self.text[self.pos].isalpha():
            return None
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] == "_"
        ):
            self.pos += 1
        return self.text[start : self.pos]

    def take_signed_decimal(self) -> Fraction:
        self._skip_ws()
        start = self.pos
        if self.pos < len(self.text) and self.text[self.pos] in "+-":
            self.pos += 1
        digits = False
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
            digits = True
        if self.pos < len(self.text) and self.text[self.pos] == ".":
            self.pos += 1
            while self.pos < len(self.text) and self.text[self.pos].isdigit():
                self.pos += 1
                digits = True
        if not digits:
            raise ParseError("expected decimal literal", start)
        return Fraction(self.text[start : self.pos])


class _Parser:
    def __init__(self, text: str, symbols: SymbolTable):
        self.tok = _Tokenizer(text)
        self.symbols = symbols

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.peek() is not None:
            raise ParseError("unexpected trailing input", self.tok.pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            if self.tok.take_char("+"):
                e = e + self.term()
            elif self.tok.take_char("-"):
                e = e - self.term()
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            if self.tok.take_char("*"):
                e = e * self.unary()
            elif self.tok.take_char("/"):
                e = e / self.unary()
            else:
                return e

    def unary(self) -> Expr:
        sign = 1
        while True:
            if self.tok.take_char("-"):
                sign = -sign
            elif self.tok.take_char("+"):
                pass
            else:
                break
        return sign * self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.take_char("^"):
            neg = self.tok.take_char("-")
            n = self.tok.take_integer()
            if n is None:
                raise ParseError("exponent must be an integer literal", self.tok.pos)
            return base ** (-n if neg else n)
        return base

    def atom(self) -> Expr:
        if self.tok.take_char("("):
            e = self.expr()
            self.tok.expect(")")
            return e
        n = self.tok.take_integer()
        if n is not None:
            return sp.Integer(n)
        pos = self.tok.pos
        name = self.tok.take_identifier()
        if name is None:
            raise ParseError("expected expression", self.tok.pos)
        if name in _TAGGED and self.tok.take_char("["):
            kappa = self.tok.take_signed_decimal()
            self.tok.expect("]")
            self.tok.expect("(")
            arg = self.expr()
            self.tok.expect(")")
            return _TAGGED[name](kappa, arg)
        if name in _FUNCTIONS and self.tok.peek() == "(":
            self.tok.expect("(")
            arg = self.expr()
            self.tok.expect(")")
            return _FUNCTIONS[name](arg)
        sym = self.symbols.lookup(name)
        if sym is None:
            raise ParseError(f"undeclared identifier {name!r}", pos)
        return sym.sym


def parse(text: str, symbols: SymbolTable) -> Expr:
    """Parse an infix expression over the declared symbols."""
    return _Parser(text, symbols).parse()


# ---------------------------------------------------------------------------
# core operations


def differentiate(e: Expr, s: Symbol) -> Expr:
    return sp.diff(e, s.sym)


def substitute(e: Expr, bindings: dict) -> Expr:
    """Simultaneous replacement of symbols (or subexpressions) in e."""
    subs = {}
    for key, val in bindings.items():
        subs[key.sym if isinstance(key, Symbol) else key] = sp.sympify(val)
    return sp.sympify(e).subs(subs, simultaneous=True)


def _split_sin_power(p: Expr) -> Expr:
    base, n = p.as_base_exp()
    arg = base.args[0]
    n = int(n)
    rem = n % 2
    half = (n - rem) // 2
    return sp.sin(arg) ** rem * (1 - sp.cos(arg) ** 2) ** half


def _split_cosh_power(p: Expr) -> Expr:
    base, n = p.as_base_exp()
    arg = base.args[0]
    n = int(n)
    rem = n % 2
    half = (n - rem) // 2
    return sp.cosh(arg) ** rem * (1 + sp.sinh(arg) ** 2) ** half


def _eliminate_sin_squares(e: Expr) -> Expr:
    """Rewrite sin(x)**n via sin^2 = 1 - cos^2 and cosh(x)**n via
    cosh^2 = 1 + sinh^2 whenever |n| >= 2."""
    e = e.replace(
        lambda p: p.is_Pow
        and p.base.func is sp.sin
        and p.exp.is_Integer
        and p.exp not in (sp.Integer(0), sp.Integer(1)),
        _split_sin_power,
    )
    return e.replace(
        lambda p: p.is_Pow
        and p.base.func is sp.cosh
        and p.exp.is_Integer
        and p.exp not in (sp.Integer(0), sp.Integer(1)),
        _split_cosh_power,
    )


def _normalize_once(e: Expr) -> Expr:
    e = sp.expand(e)
    e = _eliminate_sin_squares(e)
    e = sp.cancel(sp.together(e))
    num, den = e.as_numer_denom()
    num = sp.expand(num)
    if den == 1:
        return num
    return num / den


_MAX_NORMALIZE_ROUNDS = 8


class _FastPathUnavailable(Exception):
    """Raised when an expression falls outside the sparse-field fast path."""


def _fast_atoms(e: Expr):
    """Collect the generators needed to model e as a rational function.

    Generators are plain symbols, whole trig/hyperbolic applications, and
    square roots of positive rationals.  Each sin (sinh) generator is paired
    with the matching cos (cosh) so even powers can be rewritten later.
    Anything else (exp, symbolic exponents, nested roots, ...) disqualifies
    the fast path.
    """
    gens = set(e.free_symbols)
    for f in e.atoms(sp.Function):
        if f.func in (sp.sin, sp.cos, sp.sinh, sp.cosh):
            gens.add(f)
            if f.func is sp.sin:
                gens.add(sp.cos(f.args[0]))
            elif f.func is sp.cosh:
                gens.add(sp.sinh(f.args[0]))
        else:
            raise _FastPathUnavailable(f"function {f.func}")
    for p in e.atoms(sp.Pow):
        if p.exp.is_Integer:
            continue
        if (
            p.exp == sp.Rational(1, 2)
            and p.base.is_Rational
            and p.base.is_positive
        ):
            gens.add(p)
        else:
            raise _FastPathUnavailable(f"power {p}")
    return sorted(gens, key=sp.default_sort_key)


def _to_frac(e: Expr, ring, gen_index: dict):
    """Recursively convert e into a raw (numerator, denominator) pair of
    sparse ring polynomials.  No gcd cancellation happens here except the
    cheap denominator-lcm bookkeeping when adding; the caller performs a
    single cancellation at the end."""
    if e in gen_index:
        return gen_index[e], ring.one
    if e.is_Rational:
        return ring.ground_new(ring.domain.convert(e)), ring.one
    if e.is_Add:
        # Group addends by denominator so the bulk of the work is plain
        # polynomial addition; denominators only meet in small-poly gcds.
        groups = {}
        for a in e.args:
            num, den = _to_frac(a, ring, gen_index)
            if den in groups:
                groups[den] = groups[den] + num
            else:
                groups[den] = num
        items = iter(groups.items())
        total_den, total_num = next(items)
        for den, num in items:
            g, d_cof, den_cof = total_den.cofactors(den)
            total_num = total_num * den_cof + num * d_cof
            total_den = total_den * den_cof
        return total_num, total_den
    if e.is_Mul:
        num, den = ring.one, ring.one
        for a in e.args:
            n, d = _to_frac(a, ring, gen_index)
            num = num * n
            den = den * d
        return num, den
    if e.is_Pow and e.exp.is_Integer:
        k = int(e.exp)
        num, den = _to_frac(e.base, ring, gen_index)
        if k < 0:
            num, den = den, num
            k = -k
        return num ** k, den ** k
    raise _FastPathUnavailable(f"node {type(e).__name__}: {e}")


def _reduce_squares(poly, ring, gens):
    """Rewrite sin**(2k) -> (1-cos**2)**k, sinh is analogous, and collapse
    even powers of rational square roots, at the monomial level."""
    rules = {}
    for i, g in enumerate(gens):
        if isinstance(g, sp.Pow):
            rules[i] = ring.ground_new(ring.domain.convert(g.base))
        elif g.func is sp.sin:
            j = gens.index(sp.cos(g.args[0]))
            rules[i] = ring.one - ring.gens[j] ** 2
        elif g.func is sp.cosh:
            j = gens.index(sp.sinh(g.args[0]))
            rules[i] = ring.one + ring.gens[j] ** 2
    if not rules:
        return poly
    pow_cache = {}

    def rule_power(i, k):
        if (i, k) not in pow_cache:
            pow_cache[(i, k)] = rules[i] ** k
        return pow_cache[(i, k)]

    zero = ring.domain.zero
    out = {}
    for monom, coeff in poly.terms():
        hits = [(i, k) for i, k in enumerate(monom) if i in rules and k >= 2]
        if not hits:
            out[monom] = out.get(monom, zero) + coeff
            continue
        base = list(monom)
        repl = ring.ground_new(coeff)
        for i, k in hits:
            repl = repl * rule_power(i, k // 2)
            base[i] = k % 2
        for m2, c2 in repl.terms():
            key = tuple(a + b for a, b in zip(base, m2))
            out[key] = out.get(key, zero) + c2
    return ring.from_dict({m: c for m, c in out.items() if c})


def _sum_pairs(pairs, ring):
    """Add raw (numer, denom) fractions, grouping equal denominators so the
    bulk is plain polynomial addition and cross-denominators only meet in
    small gcds."""
    groups = {}
    for n, d in pairs:
        if d in groups:
            groups[d] = groups[d] + n
        else:
            groups[d] = n
    if not groups:
        return ring.zero, ring.one
    items = iter(groups.items())
    total_den, total_num = next(items)
    for den, num in items:
        g, total_cof, den_cof = total_den.cofactors(den)
        total_num = total_num * den_cof + num * total_cof
        total_den = total_den * den_cof
    return total_num, total_den


def _pair_mul(a, b):
    return a[0] * b[0], a[1] * b[1]


class FractionContext:
    """Shared sparse rational-function model for a family of expressions.

    Expressions over a fixed generator set (symbols, trig/hyperbolic
    applications, rational square roots) are held as raw polynomial
    (numerator, denominator) pairs.  Arithmetic and differentiation stay
    inside the sparse ring; gcd cancellation and sin**2 elimination happen
    only when `cancel` or `from_pair` is called.
    """

    def __init__(self, exprs):
        gens = set()
        for e in exprs:
            gens.update(_fast_atoms(sp.sympify(e)))
        partner = {sp.sin: sp.cos, sp.cos: sp.sin,
                   sp.sinh: sp.cosh, sp.cosh: sp.sinh}
        # close under trig partners so generator derivatives stay modelled
        for g in list(gens):
            if isinstance(g, sp.Function):
                gens.add(partner[g.func](g.args[0]))
        self.gens = sorted(gens, key=sp.default_sort_key)
        names = [sp.Dummy(f"g{i}") for i in range(len(self.gens))]
        self.field = sp.polys.fields.FracField(
            names, sp.QQ, sp.polys.orderings.lex
        )
        self.ring = self.field.ring
        self.gen_index = {
            g: self.ring.gens[i] for i, g in enumerate(self.gens)
        }
        self._diff_table = {}

    def to_pair(self, e: Expr):
        return _to_frac(sp.sympify(e), self.ring, self.gen_index)

    def scale(self, pair, q):
        coeff = self.ring.domain.convert(sp.Rational(q))
        return pair[0].mul_ground(coeff), pair[1]

    def add(self, *pairs):
        return _sum_pairs(pairs, self.ring)

    def neg(self, pair):
        return -pair[0], pair[1]

    def _canonical(self, pair):
        elem = self.field.new(pair[0], pair[1])
        for _ in range(_MAX_NORMALIZE_ROUNDS):
            num = _reduce_squares(elem.numer, self.ring, self.gens)
            den = _reduce_squares(elem.denom, self.ring, self.gens)
            nxt = self.field.new(num, den)
            if nxt == elem:
                break
            elem = nxt
        return elem

    def cancel(self, pair):
        elem = self._canonical(pair)
        return elem.numer, elem.denom

    def from_pair(self, pair) -> Expr:
        elem = self._canonical(pair)
        num = elem.numer.as_expr(*self.gens)
        den = elem.denom.as_expr(*self.gens)
        if den == 1:
            return num
        return num / den

    def _gen_diff(self, i: int, x):
        key = (i, x)
        if key not in self._diff_table:
            self._diff_table[key] = self.to_pair(sp.diff(self.gens[i], x))
        return self._diff_table[key]

    def _poly_diff(self, poly, x):
        """Chain-rule derivative of a ring polynomial w.r.t. the sympy
        symbol x, as a raw fraction pair."""
        parts = []
        for i, g in enumerate(self.ring.gens):
            pd = poly.diff(g)
            if not pd:
                continue
            dn, dd = self._gen_diff(i, x)
            if not dn:
                continue
            parts.append((pd * dn, dd))
        return _sum_pairs(parts, self.ring)

    def diff(self, pair, x):
        num, den = pair
        nn, nd = self._poly_diff(num, x)
        if den == self.ring.one:
            return nn, nd
        dn, dd = self._poly_diff(den, x)
        if not dn:
            return nn, nd * den
        return nn * dd * den - num * dn * nd, nd * dd * den * den

    def power(self, pair, k: int):
        num, den = pair
        if k < 0:
            num, den = den, num
            k = -k
        return num**k, den**k

    def substitute_gen(self, pair, target: Expr, value_pair):
        """Replace the generator `target` by the fraction `value_pair`.

        The numerator is regrouped by powers of the generator; the
        denominator must not contain it."""
        if target not in self.gen_index:
            return pair
        gen = self.gen_index[target]
        gi = self.ring.gens.index(gen)
        num, den = pair
        if den.degree(gen) > 0:
            raise _FastPathUnavailable(
                f"denominator depends on substitution target {target}"
            )
        groups = {}
        for monom, coeff in num.terms():
            k = monom[gi]
            rest = list(monom)
            rest[gi] = 0
            bucket = groups.setdefault(k, {})
            key = tuple(rest)
            bucket[key] = bucket.get(key, self.ring.domain.zero) + coeff
        parts = []
        for k, bucket in groups.items():
            cp = self.ring.from_dict({m: c for m, c in bucket.items() if c})
            if not cp:
                continue
            vn, vd = self.power(value_pair, k)
            parts.append((cp * vn, vd))
        total = _sum_pairs(parts, self.ring)
        return total[0], total[1] * den


def _fast_normalize(e: Expr) -> Expr:
    """Canonicalize via sympy's sparse rational-function field, avoiding
    repeated tree-level expand/cancel passes on large expressions."""
    gens = _fast_atoms(e)
    if not gens:
        return e
    names = [sp.Dummy(f"g{i}") for i in range(len(gens))]
    field = sp.polys.fields.FracField(names, sp.QQ, sp.polys.orderings.lex)
    ring = field.ring
    gen_index = {g: ring.gens[i] for i, g in enumerate(gens)}
    num, den = _to_frac(e, ring, gen_index)
    elem = field.new(num, den)
    for _ in range(_MAX_NORMALIZE_ROUNDS):
        num = _reduce_squares(elem.numer, ring, gens)
        den = _reduce_squares(elem.denom, ring, gens)
        nxt = field.new(num, den)
        if nxt == elem:
            break
        elem = nxt
    num_expr = elem.numer.as_expr(*gens)
    den_expr = elem.denom.as_expr(*gens)
    if den_expr == 1:
        return num_expr
    return num_expr / den_expr


def normalize(e: Expr) -> Expr:
    """Canonical form: momentum-polynomial numerator over a factored
    denominator, sin squares eliminated per angle.  Idempotent by fixed point.
    """
    cur = sp.sympify(e)
    try:
        return _fast_normalize(cur)
    except _FastPathUnavailable:
        pass
    for _ in range(_MAX_NORMALIZE_ROUNDS):
        nxt = _normalize_once(cur)
        if nxt == cur:
            return cur
        cur = nxt
    return cur


@lru_cache(maxsize=4096)
def _compiled(e: Expr, names: tuple):
    syms = [sp.Symbol(n) for n in names]
    return sp.lambdify(syms, e, modules="math")


def evaluate(e: Expr, env: dict) -> float:
    """IEEE double evaluation of e with every free symbol bound by env."""
    e = sp.sympify(e)
    bindings = {}
    for key, val in env.items():
        name = key.name if isinstance(key, Symbol) else str(key)
        bindings[name] = float(val)
    missing = [s for s in e.free_symbols if s.name not in bindings]
    if missing:
        raise EvaluationError(
            f"unbound symbols: {sorted(s.name for s in missing)}"
        )
    names = tuple(sorted(s.name for s in e.free_symbols))
    fn = _compiled(e, names)
    try:
        value = fn(*(bindings[n] for n in names))
    except ZeroDivisionError as exc:
        raise EvaluationError("pole at evaluation point") from exc
    value = float(value)
    if math.isnan(value) or math.isinf(value):
        raise EvaluationError("non-finite value at evaluation point")
    return value


def momentum_degree(e: Expr, momenta) -> float:
    """Max total momentum degree of e; -inf for the zero expression."""
    e = sp.sympify(e)
    if e == 0:
        return NEG_INF
    psyms = {m.sym if isinstance(m, Symbol) else m for m in momenta}
    num, den = e.as_numer_denom()

    def poly_degree(part):
        part = sp.expand(part)
        best = 0
        for term in sp.Add.make_args(part):
            d = 0
            for factor, power in term.as_powers_dict().items():
                if factor in psyms:
                    d += int(power)
            best = max(best, d)
        return best

    deg = poly_degree(num)
    if den.free_symbols & psyms:
        deg -= poly_degree(den)
    return deg


def render(e: Expr, format: str = "plaintext") -> str:
    """Deterministic text rendering (plaintext or latex)."""
    e = sp.sympify(e)
    if format == "plaintext":
        return sp.sstr(e, order="lex").replace("**", "^")
    if format == "latex":
        return sp.latex(e, order="lex")
    raise SymexprError(f"unknown render format {format!r}")


# ---------------------------------------------------------------------------
# zero testing


def is_exact_zero(e: Expr) -> bool:
    return normalize(e) == 0


def heuristic_zero_samples(e: Expr, rng, box: dict, n_points: int = 200):
    """Sample |e| at random points drawn from per-symbol intervals.

    Returns (max_abs, max_scale) where scale is the sum of |term| over the
    expanded form, guarding against reporting zero merely by cancellation.
    """
    e = sp.expand(sp.sympify(e))
    terms = list(sp.Add.make_args(e)) or [sp.Integer(0)]
    names = tuple(sorted(s.name for s in e.free_symbols))
    fns = [_compiled(t, names) for t in terms]
    boxes = {}
    for key, iv in box.items():
        name = key.name if isinstance(key, Symbol) else str(key)
        boxes[name] = iv
    missing = [n for n in names if n not in boxes]
    if missing:
        raise EvaluationError(f"no sampling interval for symbols: {missing}")
    max_abs = 0.0
    max_scale = 0.0
    for _ in range(n_points):
        point = [
            rng.uniform(boxes[n][0], boxes[n][1]) for n in names
        ]
        vals = [fn(*point) for fn in fns]
        max_abs = max(max_abs, abs(sum(vals)))
        max_scale = max(max_scale, sum(abs(v) for v in vals))
    return max_abs, max_scale
