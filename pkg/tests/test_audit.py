import numpy as np
import pytest

from congestion_waves.audit import (
    EtaMember,
    FMember,
    audit_h_bounds,
    audit_linear_operator_bounds,
    audit_psi_estimate,
    audit_veps_derivatives,
    c_eps_apply,
    default_eta_family,
    default_f_family,
    h_derivatives,
    l_eps_apply,
    l_eps_quadratic_split,
    operator_coefficients,
)
from congestion_waves.errors import AdmissibilityError, InvalidParametersError, SizeMismatchError
from congestion_waves.model import ModelParams, phi_derivative
from congestion_waves.numerics import Grid, diff1, trapz
from congestion_waves.profile import Profile, solve_profile


def bump(profile, center=0.0, width=2.0):
    return EtaMember("gaussian", center, width).evaluate(profile)


def test_operators_vanish_on_zero(profile, params):
    z = np.zeros(profile.grid.n)
    assert np.all(l_eps_apply(z, profile, params) == 0)
    assert np.all(c_eps_apply(z, profile, params) == 0)
    assert l_eps_quadratic_split(z, profile, params) == (0.0, 0.0, 0.0, 0.0)


def test_operators_reject_wrong_size(profile, params):
    with pytest.raises(SizeMismatchError):
        l_eps_apply(np.zeros(3), profile, params)


@pytest.mark.parametrize("op", [l_eps_apply, c_eps_apply])
def test_operators_linear(profile, params, rng, op):
    a, b = rng.normal(size=2)
    e1, e2 = bump(profile, 0.0), EtaMember("dipole", 3.0).evaluate(profile)
    lhs = op(a * e1 + b * e2, profile, params)
    rhs = a * op(e1, profile, params) + b * op(e2, profile, params)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * np.max(np.abs(rhs)))


def test_operators_negligible_in_far_tail(profile, params):
    # eta supported near xi = 15: v_eps' is zero to round-off there
    eta = bump(profile, 150.0)
    near = bump(profile, 0.0)
    for op in (l_eps_apply, c_eps_apply):
        assert np.max(np.abs(op(eta, profile, params))) < 1e-8 * np.max(np.abs(op(near, profile, params)))


def test_constant_profile_annihilates(params):
    g = Grid(-5.0, 5.0, 501)
    flat = Profile.from_samples(g, params, np.full(g.n, 1.7), derivatives=(np.zeros(g.n),) * 3)
    eta = np.exp(-g.xi**2)
    assert np.max(np.abs(c_eps_apply(eta, flat, params))) == 0
    assert np.max(np.abs(l_eps_apply(eta, flat, params))) == 0


@pytest.fixture(scope="module")
def ladder(params):
    return [solve_profile(params, Grid(-10.0, 20.0, n)) for n in (3001, 6001, 12001)]


def second_order(errs):
    return all(3.6 < a / b < 4.4 for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize("name", ["a1", "a2", "a3", "a4"])
def test_coefficient_derivatives(ladder, params, name):
    errs = []
    for prof in ladder:
        c = operator_coefficients(prof, params)
        fd = diff1(c[name], prof.grid)
        errs.append(np.max(np.abs(fd - c["d" + name])[10:-10]) / np.max(np.abs(c["d" + name])))
    assert second_order(errs)


def test_dphi_coefficient(profile, params):
    c = operator_coefficients(profile, params)
    np.testing.assert_allclose(c["dphi"], phi_derivative(profile.v_eps, 1, params) * c["v1"])


def test_commutator_oracle(params):
    # C eta = (phi_eps' eta')' + d(L eta) - L(d eta), to second order in dx
    errs = []
    for n in (3001, 6001, 12001):
        prof = solve_profile(params, Grid(-10.0, 20.0, n))
        g = prof.grid
        eta = bump(prof, 0.0)
        d = lambda f: diff1(f, g)
        c = operator_coefficients(prof, params)
        ref = d(c["dphi"] * d(eta)) + d(l_eps_apply(eta, prof, params)) - l_eps_apply(d(eta), prof, params)
        got = c_eps_apply(eta, prof, params)
        errs.append(np.max(np.abs(got - ref)[5:-5]) / np.max(np.abs(got)))
    assert errs[-1] < 1e-3
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


@pytest.mark.parametrize("member", [EtaMember("gaussian", 0.0), EtaMember("dipole", -3.0),
                                    EtaMember("weighted", 0.0, 5.0)])
def test_quadratic_split_matches_assembled(ladder, params, member):
    errs = []
    for prof in ladder:
        eta = member.evaluate(prof)
        assembled = trapz(l_eps_apply(eta, prof, params) * eta, prof.grid)
        errs.append(abs(sum(l_eps_quadratic_split(eta, prof, params)) - assembled) / abs(assembled))
    assert errs[-1] < 2e-3
    assert second_order(errs)


def test_veps_first_derivative_constant(profile, params):
    # eps v' / (v - 1)^(gamma + 1) = s v (v_plus - v) / gamma exactly
    reports = audit_veps_derivatives(profile, params)
    assert [r.lemma_id for r in reports] == ["veps-derivative-1", "veps-derivative-2", "veps-derivative-3"]
    c1 = reports[0].fitted_constant
    s, g = params.s, params.gamma
    v = profile.v_eps
    assert c1 == pytest.approx(np.max(s * v * (params.v_plus - v) / g), rel=1e-9)
    assert c1 <= min(4.0, s * (params.v_plus / 2) ** 2 / g)
    assert all(r.passed for r in reports)


def test_veps_k_max_validation(profile, params):
    with pytest.raises(InvalidParametersError):
        audit_veps_derivatives(profile, params, k_max=4)
    assert len(audit_veps_derivatives(profile, params, k_max=1)) == 1


def test_psi_estimate(params):
    reports = audit_psi_estimate(params)
    assert [r.lemma_id for r in reports] == ["psi-derivative-1", "psi-derivative-2"]
    # phi (v-1)^(gamma+1) / eps = gamma / v, largest as v -> 1
    assert reports[0].fitted_constant == pytest.approx(params.gamma, rel=1e-6)
    assert all(r.passed for r in reports)


def test_h_derivatives_zero_offset(profile, params):
    z = np.zeros(profile.grid.n)
    for arr in h_derivatives(z, z, z, profile, params):
        assert np.all(arr == 0)


def test_h_derivatives_match_finite_differences(ladder, params):
    errs = []
    for prof in ladder:
        f, df, d2f = FMember(0.3, "gaussian", 0.0).evaluate(prof)
        H, dH, d2H = h_derivatives(f, df, d2f, prof, params)
        g = prof.grid
        errs.append((np.max(np.abs(diff1(H, g) - dH)[10:-10]) / np.max(np.abs(dH)),
                     np.max(np.abs(diff1(dH, g) - d2H)[10:-10]) / np.max(np.abs(d2H))))
    for level in zip(*errs):
        assert second_order(level)


def test_h_bounds_proportional_offset(profile, params):
    reports = audit_h_bounds(profile, params, f_family=[FMember(0.3, "constant")])
    assert [r.lemma_id for r in reports] == ["H", "dxH", "dx2H"]
    assert all(r.passed and r.fitted_constant > 0 for r in reports)


def test_h_bounds_inadmissible(profile, params):
    with pytest.raises(AdmissibilityError):
        audit_h_bounds(profile, params, f_family=[FMember(0.7)], delta=0.5)
    with pytest.raises(InvalidParametersError):
        audit_h_bounds(profile, params, delta=1.0)


def test_h_constants_grow_with_delta(profile, params):
    small = audit_h_bounds(profile, params, delta=0.3)
    large = audit_h_bounds(profile, params, delta=0.9)
    for a, b in zip(small, large):
        assert b.fitted_constant >= a.fitted_constant
    assert len(default_f_family()) == 21


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.5])
def test_linear_bounds_alpha_sweep(profile, params, alpha):
    reports = audit_linear_operator_bounds(profile, params, alpha=alpha)
    assert [r.lemma_id for r in reports] == ["linear-L", "linear-C"]
    for r in reports:
        assert np.isfinite(r.fitted_constant) and r.fitted_constant >= 0
        assert r.passed


def test_linear_bounds_validation(profile, params):
    with pytest.raises(InvalidParametersError):
        audit_linear_operator_bounds(profile, params, alpha=1.5)
    with pytest.raises(AdmissibilityError):
        audit_linear_operator_bounds(profile, params, eta_family=[EtaMember("gaussian", 0.0, 1e4)])
    assert len(default_eta_family()) == 12


def test_report_dict(profile, params):
    d = audit_veps_derivatives(profile, params, k_max=1)[0].to_dict()
    assert set(d) == {"lemma_id", "fitted_constant", "refinement_ratio", "pass", "worst_point"}
    assert 0.8 <= d["refinement_ratio"] <= 1.25
