"""Built-in systems: the deformed-oscillator (TTW) extension, its CCM image
(the Post-Winternitz system), the caged anisotropic oscillator and its CCM
image on the Poincare half-plane.

Each entry stores explicit chart maps and a rational prefactor relating the
internal Hamiltonian to the reference form, so numeric cross-checks are exact
rather than modulo unexplained scalars.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp

from .ccm import CcmSystem, WtildeOperator, ccm_extension
from .extension import (
    ExtendedSystem,
    ExtensionError,
    ExtensionParams,
    SeedSystem,
    extend,
)
from .mechanics import CanonicalChart
from .symexpr import Expr, Symbol, coordinate, momentum, normalize, parameter


class CatalogError(ExtensionError):
    pass


def _rat(x):
    return sp.Rational(x)


@dataclass(frozen=True)
class ChartMap:
    """Substitution map onto a reference chart, with internal = prefactor * reference."""

    name: str
    substitution: dict = field(hash=False)
    prefactor: sp.Rational = sp.Integer(1)
    reference: Expr = sp.Integer(0)
    sample_box: dict = field(default_factory=dict, hash=False)

    def apply(self, e: Expr) -> Expr:
        return sp.sympify(e).subs(self.substitution, simultaneous=True)


def substitute_u_squared(e: Expr, u: sp.Symbol, u_squared: Expr) -> Expr:
    """Apply the rescaling u^2 = <u_squared> to even powers of u."""
    out = sp.expand(sp.sympify(e)).subs(u, sp.sqrt(u_squared))
    for p in out.atoms(sp.Pow):
        if p.exp.is_Rational and not p.exp.is_Integer:
            raise CatalogError(
                f"odd power of {u} survives the u^2 substitution: {p}"
            )
    return normalize(out)


# ---------------------------------------------------------------------------
# TTW


PSI = coordinate("psi")
P_PSI = momentum("p_psi")
C1 = parameter("c1")
C2 = parameter("c2")

TTW_BOX = {
    "psi": (0.4, 2.6),
    "p_psi": (-2.0, 2.0),
    "u": (0.5, 2.0),
    "p_u": (-2.0, 2.0),
    "c1": (0.5, 1.5),
    "c2": (0.2, 0.4),
    "E": (0.5, 1.5),
}


def ttw_seed(c1=None, c2=None) -> SeedSystem:
    """Seed L = p_psi^2/2 + (c1 + c2 cos psi)/sin^2 psi with G = p_psi sin psi."""
    c1 = C1.sym if c1 is None else _rat(c1)
    c2 = C2.sym if c2 is None else _rat(c2)
    chart = CanonicalChart(((PSI, P_PSI),))
    L = sp.Rational(1, 2) * P_PSI.sym**2 + (c1 + c2 * sp.cos(PSI.sym)) / sp.sin(PSI.sym) ** 2
    G = P_PSI.sym * sp.sin(PSI.sym)
    return SeedSystem(chart=chart, L=L, G=G, c=1, L0=0, sample_box=dict(TTW_BOX))


def ttw(m: int, n: int, c1=None, c2=None, f0=1) -> ExtendedSystem:
    """Extension of the TTW seed for c = 1, kappa = 0 (gamma = 1/u)."""
    seed = ttw_seed(c1, c2)
    params = ExtensionParams(m=m, n=n, f0=_rat(f0), kappa=sp.Integer(0))
    return extend(seed, params)


def ttw_reference_map(ext: ExtendedSystem) -> ChartMap:
    """Map onto the deformed-oscillator reference Hamiltonian
    H_ref = p_rho^2 + (p_theta^2 + f2(theta))/rho^2 - Et*rho^2, with
    f2(t) = k^2 (a/cos^2(kt) + b/sin^2(kt)); internal H = H_ref / 2."""
    k = sp.Rational(ext.params.m, ext.params.n)
    rho, theta = sp.Symbol("rho"), sp.Symbol("theta")
    p_rho, p_theta = sp.Symbol("p_rho"), sp.Symbol("p_theta")
    a, b, et = sp.Symbol("alpha"), sp.Symbol("beta"), sp.Symbol("Et")
    f2 = k**2 * (a / sp.cos(k * theta) ** 2 + b / sp.sin(k * theta) ** 2)
    reference = p_rho**2 + (p_theta**2 + f2) / rho**2 - et * rho**2
    # the extension fixes the coupling Et = -2 f0
    reference = reference.subs(et, -2 * ext.params.f0)
    substitution = {
        ext.u.sym: rho,
        ext.p_u.sym: p_rho,
        PSI.sym: 2 * k * theta,
        P_PSI.sym: p_theta / k,
        C1.sym: a + b,
        C2.sym: b - a,
    }
    box = {
        "rho": (0.5, 2.0),
        "theta": (0.3 / float(k), 1.2 / float(k)),
        "p_rho": (-2.0, 2.0),
        "p_theta": (-2.0, 2.0),
        "alpha": (0.5, 1.5),
        "beta": (0.5, 1.5),
    }
    return ChartMap(
        name="ttw_reference",
        substitution=substitution,
        prefactor=sp.Rational(1, 2),
        reference=reference,
        sample_box=box,
    )


# ---------------------------------------------------------------------------
# PW (CCM image of TTW)


@dataclass
class PwSystem:
    """CCM of the TTW extension, in the u chart and the r chart (u^2 = 2r)."""

    ccm: CcmSystem
    chart_r: CanonicalChart
    r: Symbol
    p_r: Symbol
    Htilde_r: Expr
    Ktilde_r: Expr
    Wtilde_r: WtildeOperator

    @property
    def source(self) -> ExtendedSystem:
        return self.ccm.source


def pw(m: int, n: int, c1=None, c2=None) -> PwSystem:
    """Build the CCM of the TTW extension with Etilde = -f0, U = u^2."""
    ext = ttw(m, n, c1, c2, f0=1)
    sys = ccm_extension(ext)
    r = coordinate("r")
    p_r = momentum("p_r")
    chart_r = CanonicalChart(((PSI, P_PSI), (r, p_r)))
    u = ext.u.sym

    def to_r(e: Expr) -> Expr:
        # canonical rescaling u^2 = 2r, p_u = u p_r
        e = sp.sympify(e).subs(ext.p_u.sym, u * p_r.sym)
        return substitute_u_squared(e, u, 2 * r.sym)

    htilde_r = to_r(sys.Htilde)
    ktilde_r = to_r(sys.Ktilde)
    wtilde_r = WtildeOperator(
        px_coeff=to_r(sys.Wtilde.px_coeff * u),
        L_coeff=to_r(sys.Wtilde.L_coeff),
        rest=to_r(sys.Wtilde.rest),
        p_u=p_r,
    )
    return PwSystem(
        ccm=sys,
        chart_r=chart_r,
        r=r,
        p_r=p_r,
        Htilde_r=htilde_r,
        Ktilde_r=ktilde_r,
        Wtilde_r=wtilde_r,
    )


def pw_reference_map(pw_sys: PwSystem) -> ChartMap:
    """Map onto the Kepler-Coulomb reference
    H_ref = p_r^2 + (p_phi^2 + f2(phi/2)/4)/r^2 - Q/(2r); internal = H_ref / 2.

    The angle identification is psi = k*phi (consistent with psi = 2k*theta
    and phi = 2*theta)."""
    ext = pw_sys.source
    k = sp.Rational(ext.params.m, ext.params.n)
    phi, p_phi = sp.Symbol("phi"), sp.Symbol("p_phi")
    a, b, Q = sp.Symbol("alpha"), sp.Symbol("beta"), sp.Symbol("Q")
    r, p_r = pw_sys.r.sym, pw_sys.p_r.sym
    f2_half = k**2 * (a / sp.cos(k * phi / 2) ** 2 + b / sp.sin(k * phi / 2) ** 2)
    reference = p_r**2 + (p_phi**2 + f2_half / 4) / r**2 - Q / (2 * r)
    substitution = {
        PSI.sym: k * phi,
        P_PSI.sym: 2 * p_phi / k,
        C1.sym: a + b,
        C2.sym: b - a,
        pw_sys.ccm.E.sym: Q / 2,
    }
    box = {
        "r": (0.5, 2.0),
        "phi": (0.6 / float(k), 2.4 / float(k)),
        "p_r": (-2.0, 2.0),
        "p_phi": (-2.0, 2.0),
        "alpha": (0.5, 1.5),
        "beta": (0.5, 1.5),
        "Q": (0.5, 1.5),
    }
    return ChartMap(
        name="pw_reference",
        substitution=substitution,
        prefactor=sp.Rational(1, 2),
        reference=reference,
        sample_box=box,
    )


# ---------------------------------------------------------------------------
# caged anisotropic oscillator and its half-plane CCM image


QC = coordinate("q")
P_QC = momentum("p_q")

CAGED_BOX = {
    "q": (0.5, 2.0),
    "p_q": (-2.0, 2.0),
    "u": (0.5, 2.0),
    "p_u": (-2.0, 2.0),
    "c1": (0.5, 1.5),
    "c2": (0.2, 0.4),
    "E": (0.5, 1.5),
}


def caged_seed(a1=1, a2=0, L0=1, c1=None, c2=None) -> SeedSystem:
    """Seed L = p_q^2/2 + (L0/(4 a1^2))(a1 q + a2)^2 + c1/(a1 q + a2)^2 + c2
    with G = (a1 q + a2) p_q, admitting an extension for c = 0."""
    a1 = _rat(a1)
    a2 = _rat(a2)
    if a1 == 0:
        raise CatalogError("a1 must be nonzero")
    c1 = C1.sym if c1 is None else _rat(c1)
    c2 = C2.sym if c2 is None else _rat(c2)
    chart = CanonicalChart(((QC, P_QC),))
    w = a1 * QC.sym + a2
    L = sp.Rational(1, 2) * P_QC.sym**2 + _rat(L0) / (4 * a1**2) * w**2 + c1 / w**2 + c2
    G = w * P_QC.sym
    box = dict(CAGED_BOX)
    if a2 != 0:
        lo = max(0.5, float(-a2 / a1) + 0.5)
        box["q"] = (lo, lo + 1.5)
    return SeedSystem(chart=chart, L=L, G=G, c=0, L0=_rat(L0), sample_box=box)


@dataclass
class CagedSystem:
    ext: ExtendedSystem
    ccm: CcmSystem
    a1: sp.Rational
    a2: sp.Rational
    A: sp.Rational


def caged(m: int, n: int, A=1, a1=1, a2=0, L0=1, f0=1, c1=None, c2=None) -> CagedSystem:
    if _rat(A) == 0:
        raise CatalogError("A must be nonzero")
    seed = caged_seed(a1, a2, L0, c1, c2)
    params = ExtensionParams(m=m, n=n, f0=_rat(f0), A=_rat(A))
    ext = extend(seed, params)
    return CagedSystem(ext=ext, ccm=ccm_extension(ext), a1=_rat(a1), a2=_rat(a2), A=_rat(A))


def halfplane_map(sys: CagedSystem) -> ChartMap:
    """Identifications u = y/A, q = (m/n)x + x0 mapping the caged CCM onto
    H_ref = y^2 (p_y^2/2 + p_x^2/2 + w2 (k^2 x^2 + y^2) + b/x^2 - E), where
    k = m/(2n), w2 = omega^2 = 4 k^2 L0, b = c1/a1^2 and the CCM energy
    parameter plays E' = E + 4 c2 k^2."""
    ext = sys.ext
    m, n = ext.params.m, ext.params.n
    k = sp.Rational(m, 2 * n)
    x, y = sp.Symbol("x"), sp.Symbol("y")
    p_x, p_y = sp.Symbol("p_x"), sp.Symbol("p_y")
    b, E = sp.Symbol("b"), sp.Symbol("E")
    w2 = 4 * k**2 * ext.seed.L0
    reference = y**2 * (
        sp.Rational(1, 2) * p_y**2
        + sp.Rational(1, 2) * p_x**2
        + w2 * (k**2 * x**2 + y**2)
        + b / x**2
        - E
    )
    x0 = -sys.a2 / sys.a1
    substitution = {
        ext.u.sym: y / sys.A,
        ext.p_u.sym: sys.A * p_y,
        QC.sym: sp.Rational(m, n) * x + x0,
        P_QC.sym: sp.Rational(n, m) * p_x,
        C1.sym: sys.a1**2 * b,
        sys.ccm.E.sym: E + 4 * C2.sym * k**2,
    }
    box = {
        "x": (0.5, 2.0),
        "y": (0.5, 2.0),
        "p_x": (-2.0, 2.0),
        "p_y": (-2.0, 2.0),
        "b": (0.5, 1.5),
        "E": (0.5, 1.5),
        "c2": (0.2, 0.4),
    }
    return ChartMap(
        name="halfplane",
        substitution=substitution,
        prefactor=sp.Integer(1),
        reference=reference,
        sample_box=box,
    )


@dataclass
class HalfplaneSystem:
    """Caged CCM pushed to the half-plane chart (x, y); brackets are preserved
    because the identification is a canonical point transformation."""

    caged: CagedSystem
    chart: CanonicalChart
    Htilde: Expr
    Ktilde: Expr
    L: Expr


def halfplane(m: int, n: int, A=1, a1=1, a2=0, L0=1, f0=1, c1=None, c2=None) -> HalfplaneSystem:
    sys = caged(m, n, A, a1, a2, L0, f0, c1, c2)
    cmap = halfplane_map(sys)
    xs = coordinate("x")
    ys = coordinate("y")
    pxs = momentum("p_x")
    pys = momentum("p_y")
    chart = CanonicalChart(((xs, pxs), (ys, pys)))
    sub = dict(cmap.substitution)
    # keep the CCM energy symbol itself; the E' shift only matters for the
    # comparison against the reference form
    sub.pop(sys.ccm.E.sym)
    return HalfplaneSystem(
        caged=sys,
        chart=chart,
        Htilde=normalize(sp.sympify(sys.ccm.Htilde).subs(sub, simultaneous=True)),
        Ktilde=normalize(sp.sympify(sys.ccm.Ktilde).subs(sub, simultaneous=True)),
        L=normalize(sp.sympify(sys.ext.seed.L).subs(sub, simultaneous=True)),
    )


HALFPLANE_BOX = {
    "x": (0.5, 2.0),
    "y": (0.5, 2.0),
    "p_x": (-2.0, 2.0),
    "p_y": (-2.0, 2.0),
    "c1": (0.5, 1.5),
    "b": (0.5, 1.5),
    "c2": (0.2, 0.4),
    "E": (0.5, 1.5),
}


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    description: str
    builder: object
    sample_box: dict = field(hash=False, default_factory=dict)


ENTRIES = {
    "ttw": CatalogEntry(
        id="ttw",
        description="deformed-oscillator extension (c=1, L0=0, kappa=0)",
        builder=ttw,
        sample_box=TTW_BOX,
    ),
    "pw": CatalogEntry(
        id="pw",
        description="CCM image of the ttw extension (u chart and r chart)",
        builder=pw,
        sample_box=TTW_BOX,
    ),
    "caged": CatalogEntry(
        id="caged",
        description="caged anisotropic oscillator extension (c=0) with its CCM",
        builder=caged,
        sample_box=CAGED_BOX,
    ),
    "halfplane": CatalogEntry(
        id="halfplane",
        description="caged CCM pushed to the Poincare half-plane chart",
        builder=halfplane,
        sample_box=HALFPLANE_BOX,
    ),
}


def get_entry(system_id: str) -> CatalogEntry:
    try:
        return ENTRIES[system_id]
    except KeyError:
        raise CatalogError(f"unknown system {system_id!r}") from None
