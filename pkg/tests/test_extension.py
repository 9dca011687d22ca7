"""Extension algorithm: Table 1 data, seed checks, G recursion, W, and K."""

import math

import pytest
import sympy as sp

from extham.catalog import caged_seed, ttw_seed
from extham.extension import (
    DEGREE_BUDGET,
    ExtensionError,
    ExtensionParams,
    ResourceCapError,
    SeedSystem,
    check_seed,
    extend,
    first_integral,
    g_recursion,
    mu_nu,
    table1,
    w_apply,
)
from extham.mechanics import apply_vector_field, poisson_bracket
from extham.symexpr import (
    coordinate,
    evaluate,
    momentum_degree,
    normalize,
    tagged_s,
    tagged_t,
)

U = coordinate("u")
TTW_ENV = {"psi": math.pi / 3, "p_psi": 1.0, "c1": 1.0, "c2": 0.0}


# ---------------------------------------------------------------------------
# mu_nu


def test_mu_nu_even_m_passthrough():
    assert mu_nu(2, 3) == (2, 3)


def test_mu_nu_odd_m_doubles():
    assert mu_nu(1, 1) == (2, 2)
    assert mu_nu(3, 2) == (6, 4)


def test_mu_nu_rejects_nonpositive():
    with pytest.raises(ExtensionError):
        mu_nu(0, 1)
    with pytest.raises(ExtensionError):
        mu_nu(2, -1)


def test_mu_nu_rejects_non_coprime():
    with pytest.raises(ExtensionError):
        mu_nu(2, 4)


# ---------------------------------------------------------------------------
# table1


def test_table1_flat_nonzero_c():
    params = ExtensionParams(2, 1, f0=0, kappa=0)
    sf = table1(params, sp.Integer(1), sp.Integer(0), u=U)
    u = U.sym
    assert normalize(sf.gamma - 1 / u) == 0
    assert normalize(sf.alpha - 1 / u**2) == 0
    assert sf.f == 0 and sf.delta == 0


def test_table1_zero_c_column():
    params = ExtensionParams(2, 1, f0=0, A=1)
    sf = table1(params, sp.Integer(0), sp.Integer(0), u=U)
    assert normalize(sf.alpha - 1) == 0
    assert normalize(sf.gamma + U.sym) == 0
    assert sf.f == 0 and sf.delta == 0


def test_table1_alpha_is_minus_gamma_prime():
    from extham.symexpr import differentiate

    for kappa in (sp.Integer(1), sp.Integer(-1), sp.Integer(0)):
        params = ExtensionParams(2, 3, f0=sp.Rational(1, 2), kappa=kappa)
        sf = table1(params, sp.Integer(1), sp.Integer(0), u=U)
        assert normalize(sf.alpha + differentiate(sf.gamma, U)) == 0
    params = ExtensionParams(2, 3, f0=sp.Rational(1, 2), A=sp.Rational(3, 2))
    sf = table1(params, sp.Integer(0), sp.Integer(1), u=U)
    assert normalize(sf.alpha + differentiate(sf.gamma, U)) == 0


def test_table1_f_and_delta_nonzero_f0():
    params = ExtensionParams(2, 1, f0=sp.Rational(1, 3), kappa=1)
    sf = table1(params, sp.Integer(1), sp.Integer(0), u=U)
    t = tagged_t(1, U.sym)
    assert normalize(sf.f - sp.Rational(1, 3) * t**2) == 0
    assert normalize(sf.delta - sp.Rational(2, 3) * t**2) == 0


def test_table1_requires_case_constant():
    with pytest.raises(ExtensionError):
        params = ExtensionParams(2, 1, f0=0)
        params.validate_against(sp.Integer(1), sp.Integer(0))
    with pytest.raises(ExtensionError):
        params = ExtensionParams(2, 1, f0=0)
        params.validate_against(sp.Integer(0), sp.Integer(1))


def test_nonzero_c_rejects_nonzero_L0():
    params = ExtensionParams(2, 1, f0=0, kappa=0)
    with pytest.raises(ExtensionError):
        params.validate_against(sp.Integer(1), sp.Integer(1))


# ---------------------------------------------------------------------------
# seed systems


def test_seed_rejects_both_constants_zero():
    s = ttw_seed()
    with pytest.raises(ExtensionError):
        SeedSystem(s.chart, s.L, s.G, sp.Integer(0), sp.Integer(0), s.sample_box)


def test_check_seed_ttw_exact():
    report = check_seed(ttw_seed())
    assert report.exact
    assert report.xlg_nonzero
    assert normalize(report.residual) == 0


def test_check_seed_caged_exact():
    report = check_seed(caged_seed())
    assert report.exact


def test_check_seed_detects_perturbation():
    s = ttw_seed()
    q = s.chart.coordinates[0].sym
    bad = SeedSystem(s.chart, s.L + q**3, s.G, s.c, s.L0, s.sample_box)
    report = check_seed(bad)
    assert not report.exact
    assert report.max_abs > 1e-6


# ---------------------------------------------------------------------------
# g_recursion


def test_g1_is_seed_function():
    s = ttw_seed()
    assert normalize(g_recursion(s, 1) - s.G) == 0


def test_g2_closed_form():
    s = ttw_seed()
    xlg = apply_vector_field(s.L, s.G, s.chart)
    assert normalize(g_recursion(s, 2) - 2 * s.G * xlg) == 0


def test_g2_numeric_oracle():
    s = ttw_seed()
    value = evaluate(g_recursion(s, 2), TTW_ENV)
    assert value == pytest.approx(11 * math.sqrt(3) / 6, rel=1e-12)


def test_g_recursion_rejects_nonpositive_index():
    with pytest.raises(ExtensionError):
        g_recursion(ttw_seed(), 0)


# ---------------------------------------------------------------------------
# extend / w_apply / first_integral


def test_extend_ttw_hamiltonian_form():
    s = ttw_seed()
    ext = extend(s, ExtensionParams(2, 1, f0=0, kappa=0))
    u, p_u = ext.u.sym, ext.p_u.sym
    expected = p_u**2 / 2 + 4 * s.L / u**2
    assert normalize(ext.H - expected) == 0


def test_extend_pure_kinetic_curved():
    s = ttw_seed()
    ext = extend(s, ExtensionParams(2, 1, f0=0, kappa=1))
    u, p_u = ext.u.sym, ext.p_u.sym
    expected = p_u**2 / 2 + 4 * s.L / tagged_s(1, u) ** 2
    assert normalize(ext.H - expected) == 0


def test_w_apply_raises_degree_by_two():
    s = ttw_seed()
    ext = extend(s, ExtensionParams(2, 1, f0=0, kappa=0))
    g2 = g_recursion(s, 2)
    w = w_apply(ext, g2)
    momenta = ext.chart.momenta
    assert momentum_degree(g2, momenta) == 3
    assert momentum_degree(w, momenta) == 5


def test_w_apply_delta_zero_is_squared_operator():
    s = ttw_seed()
    ext = extend(s, ExtensionParams(2, 1, f0=0, kappa=0))
    mu, nu = ext.mu, ext.nu
    gam = ext.structural.gamma
    p_u = ext.p_u.sym

    def d(h):
        return p_u * h + sp.Rational(mu, nu**2) * gam * apply_vector_field(
            s.L, h, ext.chart
        )

    g = g_recursion(s, nu)
    assert normalize(w_apply(ext, g, delta=sp.Integer(0)) - d(d(g))) == 0


def test_first_integral_commutes_with_hamiltonian():
    s = ttw_seed()
    ext = extend(s, ExtensionParams(2, 1, f0=sp.Rational(1, 4), kappa=0))
    k = first_integral(ext)
    assert normalize(poisson_bracket(ext.H, k, ext.chart)) == 0


def test_first_integral_is_cached():
    ext = extend(ttw_seed(), ExtensionParams(2, 1, f0=0, kappa=0))
    assert first_integral(ext) is first_integral(ext)


def test_degree_budget_enforced():
    assert DEGREE_BUDGET == 14
    ext = extend(ttw_seed(), ExtensionParams(13, 3, f0=0, kappa=0))
    with pytest.raises(ResourceCapError):
        first_integral(ext)


def test_term_cap_override_trips(monkeypatch):
    monkeypatch.setenv("EXTHAM_TERM_CAP", "3")
    ext = extend(ttw_seed(), ExtensionParams(2, 3, f0=0, kappa=0))
    with pytest.raises(ResourceCapError):
        first_integral(ext)
