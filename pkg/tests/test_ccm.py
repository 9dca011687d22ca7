"""Coupling-constant metamorphosis and the transformed operator."""

import math

import numpy as np
import pytest
import sympy as sp

from extham.catalog import caged, pw, ttw_seed
from extham.ccm import (
    CcmError,
    CcmInput,
    ccm,
    ccm_compatible,
    ccm_extension,
    rescaled_operator,
)
from extham.extension import ExtensionParams, extend, g_recursion
from extham.mechanics import CanonicalChart, apply_vector_field
from extham.symexpr import (
    coordinate,
    differentiate,
    momentum,
    normalize,
    parameter,
    substitute,
)

Q = coordinate("q")
P = momentum("p_q")
CHART = CanonicalChart(((Q, P),))
ET = parameter("Et")
E = parameter("E")


def _ttw_ccm(m, n, kappa=0, f0=0):
    ext = extend(ttw_seed(), ExtensionParams(m, n, f0=f0, kappa=kappa))
    return ccm_extension(ext)


# ---------------------------------------------------------------------------
# generic transform


def test_ccm_input_rejects_coupling_in_hamiltonian():
    with pytest.raises(CcmError):
        CcmInput(Hhat=P.sym**2 / 2 + ET.sym * Q.sym, U=Q.sym, K=P.sym, Etilde=ET, E=E)


def test_ccm_input_rejects_zero_divisor():
    with pytest.raises(CcmError):
        CcmInput(Hhat=P.sym**2 / 2, U=sp.Integer(0), K=P.sym, Etilde=ET, E=E)


def test_ccm_trivial_divisor():
    inp = CcmInput(Hhat=P.sym**2 / 2, U=sp.Integer(1), K=P.sym + ET.sym, Etilde=ET, E=E)
    htilde, ktilde = ccm(inp)
    assert normalize(htilde - (P.sym**2 / 2 - E.sym)) == 0
    assert normalize(ktilde - (P.sym + htilde)) == 0


def test_ccm_substitutes_energy_for_coupling():
    inp = CcmInput(
        Hhat=P.sym**2 / 2 + 1 / Q.sym**2,
        U=Q.sym**2,
        K=P.sym**2 + ET.sym * Q.sym,
        Etilde=ET,
        E=E,
    )
    htilde, ktilde = ccm(inp)
    expected = substitute(inp.K, {ET: htilde})
    assert normalize(ktilde - expected) == 0


# ---------------------------------------------------------------------------
# ccm_extension structure


def test_ccm_extension_hhat_and_htilde_forms():
    sys = _ttw_ccm(2, 1)
    ext = sys.source
    gam = ext.structural.gamma
    mu, nu = ext.mu, ext.nu
    L = ext.seed.L
    p_u = ext.p_u.sym
    gamp = differentiate(gam, ext.u)
    hhat = p_u**2 / 2 - sp.Rational(mu**2, nu**2) * gamp * L + sp.Rational(
        mu**2, nu**2
    ) * ext.seed.L0 * gam**2
    assert normalize(sys.Hhat - hhat) == 0
    assert normalize(sys.U - 1 / gam**2) == 0
    assert normalize(sys.Htilde - gam**2 * (hhat - sys.E.sym)) == 0


def test_ccm_extension_wtilde_coefficients():
    sys = _ttw_ccm(2, 1)
    ext = sys.source
    gam = ext.structural.gamma
    gamp = differentiate(gam, ext.u)
    mu, nu = ext.mu, ext.nu
    c, L0 = ext.seed.c, ext.seed.L0
    assert normalize(sys.Wtilde.px_coeff - 2 * sp.Rational(mu, nu**2) * gam) == 0
    assert (
        normalize(
            sys.Wtilde.L_coeff + 2 * sp.Rational(mu**2, nu**2) * (c * gam**2 - gamp)
        )
        == 0
    )
    assert (
        normalize(
            sys.Wtilde.rest
            - 2 * sys.E.sym
            + 4 * sp.Rational(mu**2, nu**2) * gam**2 * L0
        )
        == 0
    )


@pytest.mark.parametrize("mn", [(1, 1), (2, 1), (1, 2)])
def test_route_agreement_exact(mn):
    sys = _ttw_ccm(*mn)
    assert sys.route_difference == 0


def test_route_agreement_exact_nonzero_L0():
    cg = caged(2, 1)
    assert cg.ccm.route_difference == 0


@pytest.mark.parametrize("nu", [1, 2, 3, 4])
def test_wtilde_commutes_with_seed_field(nu):
    # X_L(Wt(G_nu)) = Wt(X_L(G_nu)) on the recursion family
    sys = _ttw_ccm(2, 1)
    ext = sys.source
    seed = ext.seed
    g = g_recursion(seed, nu)
    wt = sys.Wtilde
    lhs = apply_vector_field(seed.L, wt.apply(seed.L, ext.chart, g), ext.chart)
    rhs = wt.apply(seed.L, ext.chart, apply_vector_field(seed.L, g, ext.chart))
    assert normalize(lhs - rhs) == 0


# ---------------------------------------------------------------------------
# compatibility check


def test_compatible_when_divisor_ignores_seed_chart():
    sys = _ttw_ccm(2, 1)
    ext = sys.source
    report = ccm_compatible(ext.seed.L, sys.U, ext.chart)
    assert report.exact


def test_incompatible_divisor_reports_residual():
    report = ccm_compatible(P.sym**2 / 2, Q.sym, CHART)
    assert not report.exact
    assert normalize(report.residual - P.sym) == 0


def test_disjoint_divisor_is_compatible():
    u = coordinate("u")
    p_u = momentum("p_u")
    chart = CanonicalChart(((Q, P), (u, p_u)))
    report = ccm_compatible(P.sym**2 / 2 + 1 / Q.sym**2, u.sym**2, chart)
    assert report.exact


def test_momentum_dependent_divisor_rejected():
    with pytest.raises(CcmError):
        ccm_compatible(P.sym**2 / 2, P.sym, CHART)


# ---------------------------------------------------------------------------
# rescaled operator vs. table oracles (numeric)

US = np.linspace(0.3, 2.5, 25)


def test_rescaled_flat_kappa_delta1_sign():
    ro = rescaled_operator(pw(2, 1).ccm)
    cmp1 = ro.compare_delta1(US)
    assert cmp1.sign_flipped
    assert cmp1.max_rel_discrepancy_flipped < 1e-10


def test_rescaled_curved_kappa_delta1_sign():
    for kappa in (1, -1):
        sys = _ttw_ccm(2, 1, kappa=kappa)
        ro = rescaled_operator(sys, interval=(0.25, 1.2))
        cmp1 = ro.compare_delta1(np.linspace(0.3, 1.1, 15))
        assert cmp1.sign_flipped
        assert cmp1.max_rel_discrepancy_flipped < 1e-10


def test_rescaled_zero_c_delta1_is_constant_A():
    cg = caged(2, 1)
    ro = rescaled_operator(cg.ccm)
    vals = np.array([ro.delta1(u) for u in US])
    # extracted coefficient is the constant -A; tabulated closed form is +A
    assert np.allclose(vals, -float(cg.A), rtol=1e-12)
    cmp1 = ro.compare_delta1(US)
    assert cmp1.sign_flipped and cmp1.max_rel_discrepancy_flipped < 1e-10


def test_rescaled_zero_c_delta2_exponential_is_u_squared():
    # e^{-2A*utilde} with utilde anchored at u=1 equals u^2 for gamma = -Au
    cg = caged(2, 1)
    ro = rescaled_operator(cg.ccm, anchor=1.0)
    for u in (0.4, 0.9, 1.7):
        assert math.exp(-2.0 * float(cg.A) * ro.utilde_of_u(u)) == pytest.approx(
            u**2, rel=1e-9
        )
    # extracted delta2 differs from the tabulated closed form by a factor -2
    ratios = [ro.delta2_minus_2E(u) / ro.table2_delta2_minus_2E(u) for u in US]
    assert np.allclose(ratios, -2.0, rtol=1e-9)


def test_rescaled_rejects_vanishing_gamma():
    sys = _ttw_ccm(2, 1, kappa=1)  # gamma = 1/tan(u) vanishes at pi/2
    with pytest.raises(CcmError):
        rescaled_operator(sys, interval=(0.5, 3.0))
