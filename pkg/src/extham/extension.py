"""The extension construction: seed validation, structural functions,
the G_nu recursion, the operator W and the first integral K = W^(mu/2)(G_nu).
"""

from __future__ import annotations

import math
import os
import threading
from dataclasses import dataclass, field

import sympy as sp

from .mechanics import CanonicalChart, apply_vector_field
from .symexpr import (
    Expr,
    FractionContext,
    Symbol,
    SymexprError,
    _FastPathUnavailable,
    _pair_mul,
    coordinate,
    heuristic_zero_samples,
    momentum,
    normalize,
    tagged_s,
    tagged_t,
)

DEFAULT_TERM_CAP = 200_000
DEGREE_BUDGET = 14
HEURISTIC_ZERO_TOL = 1e-9

EXTENSION_COORD = "u"
EXTENSION_MOMENTUM = "p_u"


class ExtensionError(SymexprError):
    pass


class ResourceCapError(ExtensionError):
    pass


def term_cap() -> int:
    return int(os.environ.get("EXTHAM_TERM_CAP", DEFAULT_TERM_CAP))


def _check_cap(e: Expr, context: str):
    n = len(sp.Add.make_args(e))
    cap = term_cap()
    if n > cap:
        raise ResourceCapError(
            f"{context}: expression has {n} terms, exceeding the cap of {cap}; "
            "raise EXTHAM_TERM_CAP to override"
        )


def _rational(x) -> sp.Rational:
    return sp.Rational(x)


@dataclass(frozen=True)
class SeedSystem:
    """Low-dimensional Hamiltonian L with G, c, L0 satisfying the seed equation."""

    chart: CanonicalChart
    L: Expr
    G: Expr
    c: sp.Rational
    L0: sp.Rational
    sample_box: dict = field(default=None, hash=False)

    def __post_init__(self):
        if self.chart.extension_pair is not None:
            raise ExtensionError("seed chart must not carry an extension pair")
        object.__setattr__(self, "c", _rational(self.c))
        object.__setattr__(self, "L0", _rational(self.L0))
        if self.c == 0 and self.L0 == 0:
            raise ExtensionError("c and L0 must not both vanish")
        object.__setattr__(self, "L", sp.sympify(self.L))
        object.__setattr__(self, "G", sp.sympify(self.G))


def mu_nu(m: int, n: int) -> tuple:
    """(mu, nu) = (m, n) for even m, (2m, 2n) for odd m; mu is always even."""
    if not (isinstance(m, int) and isinstance(n, int)):
        raise ExtensionError("m and n must be integers")
    if m <= 0 or n <= 0:
        raise ExtensionError("m and n must be positive")
    if math.gcd(m, n) != 1:
        raise ExtensionError(f"m={m} and n={n} must be coprime")
    if m % 2 == 0:
        return m, n
    return 2 * m, 2 * n


@dataclass(frozen=True)
class ExtensionParams:
    """Extension data: coprime (m, n), the case constant (A or kappa), f0."""

    m: int
    n: int
    f0: sp.Rational = sp.Integer(0)
    A: sp.Rational | None = None
    kappa: sp.Rational | None = None

    def __post_init__(self):
        mu_nu(self.m, self.n)  # validates positivity and coprimality
        object.__setattr__(self, "f0", _rational(self.f0))
        if self.A is not None:
            object.__setattr__(self, "A", _rational(self.A))
        if self.kappa is not None:
            object.__setattr__(self, "kappa", _rational(self.kappa))

    def validate_against(self, c: sp.Rational, L0: sp.Rational):
        if c == 0:
            if self.A is None:
                raise ExtensionError("the c=0 case requires the constant A")
            if self.A == 0:
                raise ExtensionError("A must be nonzero in the c=0 case")
        else:
            if self.kappa is None:
                raise ExtensionError("the c!=0 case requires the curvature tag kappa")
            if L0 != 0:
                raise ExtensionError("L0 must vanish when c != 0")


@dataclass(frozen=True)
class StructuralFunctions:
    """alpha, f, gamma, delta of the extension, as expressions in u."""

    alpha: Expr
    f: Expr
    gamma: Expr
    delta: Expr


def table1(params: ExtensionParams, c, L0, u: Symbol | None = None) -> StructuralFunctions:
    """Structural functions for the two cases (c = 0 and c != 0)."""
    c = _rational(c)
    L0 = _rational(L0)
    params.validate_against(c, L0)
    uu = (u or coordinate(EXTENSION_COORD)).sym
    mn2 = sp.Rational(params.m**2, params.n**2)
    if c == 0:
        A = params.A
        alpha = sp.sympify(A)
        gamma = -A * uu
    else:
        alpha = c / tagged_s(params.kappa, c * uu) ** 2
        gamma = 1 / tagged_t(params.kappa, c * uu)
    f = mn2 * L0 * gamma**2 + params.f0 / gamma**2
    delta = 2 * params.f0 / gamma**2
    funcs = StructuralFunctions(alpha=alpha, f=f, gamma=gamma, delta=delta)
    # structural identities, exact
    if normalize(alpha + sp.diff(gamma, uu)) != 0:
        raise ExtensionError("structural identity alpha = -gamma' failed")
    return funcs


@dataclass
class SeedReport:
    """Residual of the seed equation X_L^2(G) + 2(cL + L0)G."""

    residual: Expr
    exact: bool
    max_abs: float | None = None
    scale: float | None = None
    xlg_nonzero: bool = True

    @property
    def passed(self) -> bool:
        if not self.xlg_nonzero:
            return False
        if self.exact:
            return True
        if self.max_abs is None:
            return False
        scale = self.scale or 1.0
        return self.max_abs / max(scale, 1e-300) < HEURISTIC_ZERO_TOL


_DEFAULT_BOX = (0.4, 2.2)


def _seed_box(seed: SeedSystem) -> dict:
    box = dict(seed.sample_box or {})
    free = set()
    for e in (seed.L, seed.G):
        free |= sp.sympify(e).free_symbols
    for s in sorted(free, key=lambda s: s.name):
        box.setdefault(s.name, _DEFAULT_BOX)
    return box


def check_seed(seed: SeedSystem, n_points: int = 1000, rng_seed: int = 20151124) -> SeedReport:
    """Verify X_L^2(G) = -2(cL + L0)G and X_L(G) != 0."""
    import random

    xlg = apply_vector_field(seed.L, seed.G, seed.chart)
    xl2g = apply_vector_field(seed.L, xlg, seed.chart)
    residual = normalize(xl2g + 2 * (seed.c * seed.L + seed.L0) * seed.G)

    box = _seed_box(seed)
    rng = random.Random(rng_seed)
    g_max, _ = heuristic_zero_samples(xlg, rng, box, n_points=50)
    xlg_nonzero = g_max > 1e-9

    if residual == 0:
        return SeedReport(residual=residual, exact=True, xlg_nonzero=xlg_nonzero)
    rng = random.Random(rng_seed)
    max_abs, scale = heuristic_zero_samples(residual, rng, box, n_points=n_points)
    return SeedReport(
        residual=residual,
        exact=False,
        max_abs=max_abs,
        scale=scale,
        xlg_nonzero=xlg_nonzero,
    )


def g_recursion(seed: SeedSystem, nu: int) -> Expr:
    """G_1 = G, G_{nu+1} = X_L(G_1) G_nu + (1/nu) G_1 X_L(G_nu)."""
    if nu < 1:
        raise ExtensionError("nu must be >= 1")
    g1 = seed.G
    xlg1 = apply_vector_field(seed.L, g1, seed.chart)
    g = g1
    for k in range(1, nu):
        g = normalize(
            xlg1 * g + sp.Rational(1, k) * g1 * apply_vector_field(seed.L, g, seed.chart)
        )
    return g


@dataclass
class ExtendedSystem:
    """H = p_u^2/2 + f(u) + (m/n)^2 alpha(u) L with its first integral K."""

    seed: SeedSystem
    params: ExtensionParams
    chart: CanonicalChart
    H: Expr
    structural: StructuralFunctions
    mu: int
    nu: int
    u: Symbol
    p_u: Symbol
    _K: Expr | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def L(self) -> Expr:
        return self.seed.L

    @property
    def K(self) -> Expr:
        return first_integral(self)


def extend(seed: SeedSystem, params: ExtensionParams) -> ExtendedSystem:
    """Assemble the extended Hamiltonian on the chart enlarged by (u, p_u)."""
    report = check_seed(seed)
    if not report.passed:
        raise ExtensionError(
            "seed condition failed: residual max "
            f"{report.max_abs if not report.exact else 0.0}"
        )
    u = coordinate(EXTENSION_COORD)
    p_u = momentum(EXTENSION_MOMENTUM)
    taken = {s.name for s in seed.chart.symbols}
    if u.name in taken or p_u.name in taken:
        raise ExtensionError("seed chart already uses the names u / p_u")
    chart = seed.chart.with_extension(u, p_u)
    funcs = table1(params, seed.c, seed.L0, u)
    mn2 = sp.Rational(params.m**2, params.n**2)
    H = sp.Rational(1, 2) * p_u.sym**2 + funcs.f + mn2 * funcs.alpha * seed.L
    mu, nu = mu_nu(params.m, params.n)
    return ExtendedSystem(
        seed=seed,
        params=params,
        chart=chart,
        H=H,
        structural=funcs,
        mu=mu,
        nu=nu,
        u=u,
        p_u=p_u,
    )


def w_apply(ext: ExtendedSystem, f: Expr, delta: Expr | None = None) -> Expr:
    """One application of W = (p_u + (mu/nu^2) gamma X_L)^2 + delta.

    The square means applying the first-order operator twice; p_u acts by
    multiplication and X_L never touches (u, p_u).
    """
    a = sp.Rational(ext.mu, ext.nu**2)
    gamma = ext.structural.gamma
    delta = ext.structural.delta if delta is None else delta

    def d(g):
        return ext.p_u.sym * g + a * gamma * apply_vector_field(
            ext.seed.L, g, ext.chart, normal=False
        )

    out = normalize(d(d(f)) + delta * f)
    _check_cap(out, "w_apply")
    return out


def _bracket_pair(ctx: FractionContext, fp, lp, pairs):
    """{f, l} on raw fraction pairs, summed over the given chart pairs."""
    parts = []
    for q, p in pairs:
        dfq = ctx.diff(fp, q.sym)
        if dfq[0]:
            dlp = ctx.diff(lp, p.sym)
            if dlp[0]:
                parts.append(_pair_mul(dfq, dlp))
        dfp = ctx.diff(fp, p.sym)
        if dfp[0]:
            dlq = ctx.diff(lp, q.sym)
            if dlq[0]:
                parts.append(ctx.neg(_pair_mul(dfp, dlq)))
    return ctx.add(*parts)


def _ring_context(ext: ExtendedSystem, extra_exprs=()):
    """Shared sparse-ring model for an extended system.

    Returns (ctx, l_pair, pairs): the context, L as a canonical fraction
    pair, and the seed chart pairs (X_L never touches the extension pair)."""
    seed = ext.seed
    exprs = [seed.L, seed.G, ext.structural.gamma, ext.structural.delta,
             ext.p_u.sym]
    exprs.extend(s.sym for s in ext.chart.symbols)
    exprs.extend(extra_exprs)
    ctx = FractionContext(exprs)
    l_pair = ctx.cancel(ctx.to_pair(seed.L))
    return ctx, l_pair, seed.chart.all_pairs


def _g_pair(ctx: FractionContext, l_pair, pairs, seed: SeedSystem, nu: int):
    """G_nu of the recursion as a canonical fraction pair."""
    g1 = ctx.cancel(ctx.to_pair(seed.G))
    xlg1 = ctx.cancel(_bracket_pair(ctx, g1, l_pair, pairs))
    g = g1
    for k in range(1, nu):
        xlg = _bracket_pair(ctx, g, l_pair, pairs)
        g = ctx.cancel(
            ctx.add(
                _pair_mul(xlg1, g),
                ctx.scale(_pair_mul(g1, xlg), sp.Rational(1, k)),
            )
        )
    return g


def _w_chain_pair(ctx, l_pair, pairs, ext: ExtendedSystem, start, delta_pair):
    """mu/2 ring-level applications of W = (p_u + (mu/nu^2) gamma X_L)^2 + delta."""
    a = sp.Rational(ext.mu, ext.nu**2)
    gam = ctx.cancel(ctx.to_pair(ext.structural.gamma))
    pu = ctx.to_pair(ext.p_u.sym)

    def d(h):
        return ctx.add(
            _pair_mul(pu, h),
            ctx.scale(_pair_mul(gam, _bracket_pair(ctx, h, l_pair, pairs)), a),
        )

    out = start
    cap = term_cap()
    for _ in range(ext.mu // 2):
        out = ctx.cancel(ctx.add(d(d(out)), _pair_mul(delta_pair, out)))
        if len(out[0]) > cap:
            raise ResourceCapError(
                f"w_apply: expression has {len(out[0])} terms, exceeding the "
                f"cap of {cap}; raise EXTHAM_TERM_CAP to override"
            )
    return out


def _first_integral_fast(ext: ExtendedSystem) -> Expr:
    """Ring-level evaluation of W^(mu/2)(G_nu).

    The recursion and the operator chain run on sparse polynomial fraction
    pairs; only the final result is converted back to an expression tree.
    Raises _FastPathUnavailable when the inputs fall outside the model.
    """
    ctx, l_pair, pairs = _ring_context(ext)
    g = _g_pair(ctx, l_pair, pairs, ext.seed, ext.nu)
    dlt = ctx.cancel(ctx.to_pair(ext.structural.delta))
    out = _w_chain_pair(ctx, l_pair, pairs, ext, g, dlt)
    return ctx.from_pair(out)


def first_integral(ext: ExtendedSystem) -> Expr:
    """K = W^(mu/2)(G_nu), cached on the extended system."""
    with ext._lock:
        if ext._K is not None:
            return ext._K
        if ext.mu + ext.nu > DEGREE_BUDGET:
            raise ResourceCapError(
                f"mu + nu = {ext.mu + ext.nu} exceeds the degree budget {DEGREE_BUDGET}"
            )
        try:
            k = _first_integral_fast(ext)
        except _FastPathUnavailable:
            k = g_recursion(ext.seed, ext.nu)
            for _ in range(ext.mu // 2):
                k = w_apply(ext, k)
        ext._K = k
        return k
