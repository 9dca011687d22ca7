"""Canonical phase-space structure: charts, Poisson brackets, vector fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp

from .symexpr import Expr, Symbol, SymexprError, normalize


class ChartError(SymexprError):
    pass


@dataclass(frozen=True)
class CanonicalChart:
    """Ordered canonical (q, p) pairs plus an optional extension pair (u, p_u)."""

    pairs: tuple
    extension_pair: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        seen = set()
        for q, p in self.all_pairs:
            if q.kind != "coordinate":
                raise ChartError(f"{q.name} is not a coordinate")
            if p.kind != "momentum":
                raise ChartError(f"{p.name} is not a momentum")
            for s in (q, p):
                if s.name in seen:
                    raise ChartError(f"duplicate symbol {s.name!r} in chart")
                seen.add(s.name)

    @property
    def all_pairs(self) -> tuple:
        if self.extension_pair is not None:
            return self.pairs + (tuple(self.extension_pair),)
        return self.pairs

    @property
    def coordinates(self) -> tuple:
        return tuple(q for q, _ in self.all_pairs)

    @property
    def momenta(self) -> tuple:
        return tuple(p for _, p in self.all_pairs)

    @property
    def symbols(self) -> tuple:
        out = []
        for q, p in self.all_pairs:
            out.extend((q, p))
        return tuple(out)

    def with_extension(self, u: Symbol, p_u: Symbol) -> "CanonicalChart":
        if self.extension_pair is not None:
            raise ChartError("chart already carries an extension pair")
        return CanonicalChart(self.pairs, (u, p_u))


@dataclass(frozen=True)
class PhasePoint:
    """Numeric binding of every chart symbol; parameters are bound separately."""

    chart: CanonicalChart
    values: dict = field(hash=False)

    def __post_init__(self):
        names = {s.name for s in self.chart.symbols}
        bound = {
            (k.name if isinstance(k, Symbol) else str(k)) for k in self.values
        }
        if names != bound:
            raise ChartError(
                f"phase point binds {sorted(bound)} but chart needs {sorted(names)}"
            )

    def as_env(self) -> dict:
        return dict(self.values)


def poisson_bracket(a: Expr, b: Expr, chart: CanonicalChart, normal: bool = True) -> Expr:
    """{a, b} = sum_i da/dq^i db/dp_i - da/dp_i db/dq^i over all chart pairs."""
    a = sp.sympify(a)
    b = sp.sympify(b)
    out = sp.Integer(0)
    for q, p in chart.all_pairs:
        out += sp.diff(a, q.sym) * sp.diff(b, p.sym)
        out -= sp.diff(a, p.sym) * sp.diff(b, q.sym)
    return normalize(out) if normal else out


def apply_vector_field(l: Expr, f: Expr, chart: CanonicalChart, normal: bool = True) -> Expr:
    """Hamiltonian vector field of l applied to f: X_l(f) = {f, l}."""
    return poisson_bracket(f, l, chart, normal=normal)
