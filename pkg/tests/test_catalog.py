"""Built-in systems and their reference chart maps."""

import math
import random

import pytest
import sympy as sp

from extham.catalog import (
    CatalogError,
    ENTRIES,
    caged,
    caged_seed,
    get_entry,
    halfplane,
    halfplane_map,
    pw,
    pw_reference_map,
    substitute_u_squared,
    ttw,
    ttw_reference_map,
    ttw_seed,
)
from extham.extension import check_seed
from extham.symexpr import evaluate, normalize


def _sample_env(box, rng):
    return {name: rng.uniform(lo, hi) for name, (lo, hi) in box.items()}


def _assert_map_numeric(chart_map, internal, n_points=100, seed=42, rel=1e-12):
    rng = random.Random(seed)
    mapped = chart_map.apply(internal)
    target = chart_map.prefactor * chart_map.reference
    for _ in range(n_points):
        env = _sample_env(chart_map.sample_box, rng)
        lhs = evaluate(mapped, env)
        rhs = evaluate(target, env)
        assert lhs == pytest.approx(rhs, rel=rel, abs=1e-12)


# ---------------------------------------------------------------------------
# registry


def test_registry_entries():
    assert set(ENTRIES) == {"ttw", "pw", "caged", "halfplane"}


def test_get_entry_unknown_id():
    with pytest.raises(CatalogError):
        get_entry("nonexistent")


def test_all_entry_seeds_pass_exactly():
    for seed_sys in (ttw_seed(), caged_seed()):
        report = check_seed(seed_sys)
        assert report.exact and report.xlg_nonzero


# ---------------------------------------------------------------------------
# TTW


def test_ttw_reference_map_numeric():
    ext = ttw(2, 1)
    _assert_map_numeric(ttw_reference_map(ext), ext.H)


def test_ttw_reference_map_numeric_odd_m():
    ext = ttw(1, 2)
    _assert_map_numeric(ttw_reference_map(ext), ext.H)


def test_ttw_map_round_trip():
    ext = ttw(2, 1)
    m = ttw_reference_map(ext)
    c1, c2 = sp.Symbol("c1"), sp.Symbol("c2")
    inverse = {
        sp.Symbol("rho"): sp.Symbol("u"),
        sp.Symbol("theta"): sp.Symbol("psi") / 4,
        sp.Symbol("p_rho"): sp.Symbol("p_u"),
        sp.Symbol("p_theta"): 2 * sp.Symbol("p_psi"),
        sp.Symbol("alpha"): (c1 - c2) / 2,
        sp.Symbol("beta"): (c1 + c2) / 2,
    }
    back = m.apply(ext.H).subs(inverse, simultaneous=True)
    assert normalize(back - ext.H) == 0


def test_ttw_f2_reconstruction():
    # k^2 V(2k theta) = f2(theta) / 2 with V the seed potential and
    # f2(t) = k^2 (alpha/cos^2(kt) + beta/sin^2(kt))
    rng = random.Random(3)
    for m, n in [(2, 1), (1, 1), (3, 2)]:
        k = m / n
        for _ in range(25):
            alpha, beta = rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0)
            c1, c2 = alpha + beta, beta - alpha
            theta = rng.uniform(0.1, 1.4) / k
            psi = 2 * k * theta
            v = (c1 + c2 * math.cos(psi)) / math.sin(psi) ** 2
            f2 = k**2 * (
                alpha / math.cos(k * theta) ** 2 + beta / math.sin(k * theta) ** 2
            )
            assert k**2 * v == pytest.approx(f2 / 2, rel=1e-12)


def test_ttw_f0_zero_drops_u_potential():
    ext = ttw(2, 1, f0=0)
    u = ext.u.sym
    p_u = ext.p_u.sym
    assert normalize(ext.H - (p_u**2 / 2 + 4 * ext.seed.L / u**2)) == 0
    assert ext.structural.delta == 0


# ---------------------------------------------------------------------------
# PW


def test_pw_reference_map_numeric():
    sys = pw(2, 1)
    _assert_map_numeric(pw_reference_map(sys), sys.Htilde_r)


def test_pw_u_and_r_charts_agree():
    sys = pw(2, 1)
    rng = random.Random(11)
    u_expr = sys.ccm.Htilde
    r_expr = sys.Htilde_r
    for _ in range(100):
        r = rng.uniform(0.5, 2.0)
        p_r = rng.uniform(-2.0, 2.0)
        psi = rng.uniform(0.3, 2.7)
        p_psi = rng.uniform(-2.0, 2.0)
        c1, c2 = rng.uniform(0.5, 1.5), rng.uniform(-0.5, 0.5)
        e = rng.uniform(-1.0, 1.0)
        u = math.sqrt(2 * r)
        env = {"psi": psi, "p_psi": p_psi, "c1": c1, "c2": c2, "E": e}
        lhs = evaluate(u_expr, {**env, "u": u, "p_u": u * p_r})
        rhs = evaluate(r_expr, {**env, "r": r, "p_r": p_r})
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_pw_r_chart_operator_coefficients():
    sys = pw(2, 1)
    mu, nu = sys.ccm.source.mu, sys.ccm.source.nu
    r = sys.r.sym
    wt = sys.Wtilde_r
    assert normalize(wt.px_coeff - sp.Rational(2 * mu, nu**2)) == 0
    assert normalize(wt.L_coeff + sp.Rational(2 * mu**2, nu**2) / r) == 0
    assert normalize(wt.rest - 2 * sys.ccm.E.sym) == 0


def test_substitute_u_squared_rejects_odd_powers():
    u = sp.Symbol("u")
    r = sp.Symbol("r")
    assert normalize(substitute_u_squared(u**4 + 2 * u**2, u, 2 * r) - (4 * r**2 + 4 * r)) == 0
    with pytest.raises(CatalogError):
        substitute_u_squared(u**3, u, 2 * r)


# ---------------------------------------------------------------------------
# caged oscillator and half-plane image


def test_caged_ccm_exact_roundtrip():
    cg = caged(2, 1)
    assert cg.ccm.route_difference == 0


def test_halfplane_map_is_exact():
    cg = caged(2, 1)
    m = halfplane_map(cg)
    assert normalize(m.apply(cg.ccm.Htilde) - m.prefactor * m.reference) == 0


def test_halfplane_seed_function_after_identification():
    # G = (a1 q + a2) p_q becomes a1 x p_x in the half-plane chart
    cg = caged(2, 1)
    m = halfplane_map(cg)
    g = m.apply(cg.ext.seed.G)
    x, p_x = sp.Symbol("x"), sp.Symbol("p_x")
    assert normalize(g - cg.a1 * x * p_x) == 0


def test_halfplane_first_integral_commutes():
    hp = halfplane(2, 1)
    from extham.mechanics import poisson_bracket

    assert normalize(poisson_bracket(hp.Htilde, hp.Ktilde, hp.chart)) == 0
    assert normalize(poisson_bracket(hp.Htilde, hp.L, hp.chart)) == 0


def test_catalog_builders_validate_mn():
    from extham.extension import ExtensionError

    with pytest.raises(ExtensionError):
        ttw(2, 4)
    with pytest.raises(ExtensionError):
        pw(0, 1)
