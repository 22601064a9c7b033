import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import BAND_WIDTH, GAMMA_AT_MIN
from shockfront import builtin
from shockfront.bounds import (BoundEntry, BoundReport, EstimateParams, bv_seminorm_check,
                               certify_run, check_params, constants_C1_C2, default_params,
                               energy_identity_residual, energy_identity_terms, gronwall_check,
                               infimum_check, multiplier_l1_check, penalty_l1_check,
                               sample_params, violation_check, violation_metrics)
from shockfront.errors import InvalidEstimateParams, WrongMethod
from shockfront.fields import BoundsCertificate, FieldSpec, Scenario, validate_hypotheses
from shockfront.penalty import PenaltyOptions, refine_trajectory, solve_penalized
from shockfront.projection import ProjectionOptions, solve_projected


def cert(Gamma_max=1.0, U_0max=0.2, U_Lip=0.0, C_Gamma=0.0, eta=0.9, gs=0.62):
    return BoundsCertificate(U_Lip, U_0max, Gamma_max, C_Gamma, eta, gs)


@pytest.fixture(scope="module")
def band5():
    s = builtin.static_band(T=5.0)
    return s, validate_hypotheses(s), solve_penalized(s, PenaltyOptions(epsilon=1e-3))


def test_C1_example():
    c1, _ = constants_C1_C2(cert(), EstimateParams(0.65, 0.03), 5.0)
    assert c1 == pytest.approx(1.65, abs=1e-14)


def test_C2_examples():
    assert constants_C1_C2(cert(), EstimateParams(0.65, 0.03), 5.0)[1] == 0.0
    _, c2 = constants_C1_C2(cert(U_Lip=0.1, C_Gamma=0.05), EstimateParams(0.65, 0.03), 5.0)
    assert c2 == pytest.approx(0.215, abs=1e-14)


@pytest.mark.parametrize("alpha, rho", [(0.62, 0.01), (0.9, 0.01), (0.95, 0.01), (0.7, 0.0),
                                        (0.7, 0.09)])
def test_parameter_window(alpha, rho):
    with pytest.raises(InvalidEstimateParams):
        check_params(cert(), EstimateParams(alpha, rho))


def test_default_and_sampled_params_are_admissible():
    c = cert()
    p = default_params(c)
    assert p.alpha == pytest.approx(0.62 + 0.75 * 0.28)
    assert p.rho == pytest.approx(0.5 * (p.alpha - 0.62))
    samples = sample_params(c)
    assert len(samples) == 5
    for q in samples:
        check_params(c, q)
    assert len({q.alpha for q in samples}) == 5


def test_empty_window():
    with pytest.raises(InvalidEstimateParams):
        default_params(cert(eta=0.6))
    with pytest.raises(InvalidEstimateParams):
        sample_params(cert(eta=0.62))


pos = st.floats(0.0, 10.0)


@given(G=st.floats(0.62, 5.0), U0=pos, UL=pos, CG=pos, T=st.floats(0.1, 20.0),
       da=st.floats(1e-3, 1.0), which=st.sampled_from(["G", "a", "U0", "T", "UL", "CG"]))
def test_constants_are_monotone(G, U0, UL, CG, T, da, which):
    base = dict(G=G, U0=U0, UL=UL, CG=CG, T=T, a=0.7)
    bumped = dict(base)
    bumped[which] += da

    def consts(k):
        c = BoundsCertificate(k["UL"], k["U0"], k["G"], k["CG"], 10.0, 0.62)
        return constants_C1_C2(c, EstimateParams(k["a"], 0.05), k["T"])

    c1, c2 = consts(base)
    d1, d2 = consts(bumped)
    assert d1 >= c1 and d2 >= c2
    if which in ("G", "a", "U0", "T") and U0 > 1e-6:
        assert d1 > c1
    if which in ("UL", "CG") or (which in ("G", "a") and UL > 1e-6):
        assert d2 > c2


def test_gronwall_trivial(trivial_penalty):
    e = gronwall_check(trivial_penalty, cert(), EstimateParams(0.65, 0.03))
    assert e.at == 5.0
    assert e.bound == pytest.approx(6.6, abs=1e-12)
    assert e.observed == pytest.approx(1.0, abs=1e-8)
    assert e.satisfied and e.margin > 0


def test_gronwall_at_time_zero(trivial_penalty):
    tr = trivial_penalty
    head = type(tr)(tr.times[:1], tr.positions[:1], tr.mu[:1], tr.method, tr.parameter)
    e = gronwall_check(head, cert(), EstimateParams(0.65, 0.03), T=5.0)
    assert e.observed == 0.0 and e.bound > 0


def _at_T(traj):
    # single sample at t = T, so the entry reports the bound there
    return type(traj)(traj.times[-1:], traj.positions[-1:], traj.mu[-1:], traj.method,
                      traj.parameter)


def test_bv_trivial(trivial_penalty):
    for rho in (0.005, 0.03):
        e = bv_seminorm_check(trivial_penalty, cert(), EstimateParams(0.65, rho))
        assert e.satisfied
        assert e.bound - e.observed == pytest.approx(1.65 / rho, rel=1e-9)
        at_T = bv_seminorm_check(_at_T(trivial_penalty), cert(), EstimateParams(0.65, rho), T=5.0)
        assert at_T.bound == pytest.approx(1.0 + 1.65 / rho, abs=1e-12)
    tv = np.sum(np.abs(np.diff(trivial_penalty.positions)))
    assert tv == pytest.approx(1.0, abs=1e-8)


def test_bv_band_telescopes(band, band_penalty, band_cert):
    e = bv_seminorm_check(band_penalty, band_cert, default_params(band_cert))
    assert e.satisfied
    assert e.at == band.T or e.observed <= band_penalty.positions[-1]
    tv = np.sum(np.abs(np.diff(band_penalty.positions)))
    assert tv == pytest.approx(band_penalty.positions[-1] - band.L0, abs=1e-12)


def test_bv_with_zero_velocity():
    s = Scenario(FieldSpec.constant(0.9), FieldSpec.constant(0.0), 0.62, 0.0, 5.0, 5.0)
    tr = solve_penalized(s, PenaltyOptions(epsilon=1e-3))
    e = bv_seminorm_check(tr, cert(U_0max=0.0), EstimateParams(0.65, 0.03))
    assert e.observed == 0.0
    assert e.satisfied


def test_bv_bound_with_growth(trivial_penalty):
    # C2 > 0 branch: U_Lip * (C1/C2) (exp - 1)
    c = cert(U_Lip=0.1, C_Gamma=0.05)
    p = EstimateParams(0.65, 0.03)
    c1, c2 = constants_C1_C2(c, p, 5.0)
    d = 0.9 - 0.65
    grow = math.exp(c2 * 5.0 / d)
    expected = 0.2 * 5 + c1 / 0.03 * grow + 0.1 * (c1 / c2) * (grow - 1)
    e = bv_seminorm_check(_at_T(trivial_penalty), c, p, T=5.0)
    assert e.at == 5.0 and e.bound == pytest.approx(expected, rel=1e-12)


def test_penalty_l1_trivial(trivial_penalty):
    entries = penalty_l1_check(trivial_penalty, builtin.trivial(), cert(), EstimateParams(0.65, 0.03))
    assert [e.name for e in entries] == ["penalty_l1", "pairing_lower", "pairing_upper"]
    assert all(e.satisfied for e in entries)
    assert entries[0].observed == 0.0


def test_penalty_l1_band(band5):
    s, c, tr = band5
    l1, low, up = penalty_l1_check(tr, s, c, EstimateParams(0.65, 0.03))
    assert l1.bound == pytest.approx(55.0, rel=1e-12)
    assert l1.observed == pytest.approx(BAND_WIDTH, abs=1e-2)
    assert l1.satisfied and low.satisfied and up.satisfied
    assert low.observed >= 0


def test_pairing_integrand_is_nonnegative(band5):
    s, c, tr = band5
    z = s.gamma.value(tr.times, tr.positions)
    assert np.all(tr.mu * (z - 0.65) >= 0)


def test_penalty_only_checks_reject_projection(band, band_cert, band_projection):
    p = default_params(band_cert)
    with pytest.raises(WrongMethod):
        penalty_l1_check(band_projection, band, band_cert, p)
    with pytest.raises(WrongMethod):
        violation_check(band_projection, band, band_cert, p)
    with pytest.raises(WrongMethod):
        energy_identity_terms(band_projection, band, p)


def test_multiplier_l1_on_projection(band, band_cert, band_projection):
    l1, low, up = multiplier_l1_check(band_projection, band, band_cert, default_params(band_cert))
    assert l1.name == "multiplier_l1"
    assert l1.observed == pytest.approx(BAND_WIDTH, abs=5e-3)
    assert l1.satisfied and low.satisfied and up.satisfied


def test_violation_trivial(trivial, trivial_penalty):
    assert violation_metrics(trivial_penalty, trivial) == {"sup": 0.0, "l2sq": 0.0}


def test_violation_halves_with_epsilon(band5):
    s = band5[0]
    runs = {e: solve_penalized(s, PenaltyOptions(epsilon=e)) for e in (2e-3, 1e-3, 1e-4)}
    m = {e: violation_metrics(tr, s) for e, tr in runs.items()}
    ratio = m[2e-3]["l2sq"] / m[1e-3]["l2sq"]
    assert 2 / 1.5 <= ratio <= 2 * 1.5
    # pointwise violation does not scale: it plateaus at the band depth
    depth = s.gamma_star - GAMMA_AT_MIN
    for e in runs:
        assert m[e]["sup"] == pytest.approx(depth, abs=1e-3)
    c = band5[1]
    assert violation_check(runs[1e-4], s, c, default_params(c)).satisfied


def test_energy_identity_trivial(trivial, trivial_penalty):
    assert energy_identity_residual(trivial_penalty, trivial, EstimateParams(0.65, 0.03)) <= 1e-6


def test_energy_identity_band(band5):
    s, c, tr = band5
    p = default_params(c)
    r0 = energy_identity_residual(tr, s, p)
    r1 = energy_identity_residual(refine_trajectory(tr, s), s, p, panels=1024)
    assert r0 <= 1e-2
    assert r0 >= 2 * r1


def test_energy_terms_on_trivial_run(trivial, trivial_penalty):
    k = energy_identity_terms(trivial_penalty, trivial, EstimateParams(0.65, 0.03))
    assert k["pairing"] == 0.0 and k["time_derivative"] == 0.0
    assert k["potential"] == pytest.approx(0.9, abs=1e-8)
    assert k["drive"] == pytest.approx(0.2 * 5 * 0.25, abs=1e-8)


@pytest.mark.parametrize("fixture", ["band_penalty", "band_projection"])
def test_infimum_inequality(fixture, request, band, band_cert):
    e = infimum_check(request.getfixturevalue(fixture), band, band_cert)
    assert e.kind == "lower" and e.satisfied


def test_entry_semantics():
    upper = BoundEntry("x", 1.0, 1.0 + 5e-10, "upper", 1e-9, 0.0)
    assert upper.margin == pytest.approx(-5e-10)
    assert upper.satisfied
    lower = BoundEntry("y", 0.0, -1e-6, "lower", 1e-9, 0.0)
    assert lower.margin == pytest.approx(-1e-6) and not lower.satisfied
    report = BoundReport([upper, lower])
    assert not report.satisfied
    assert report.failures() == [lower]
    again = BoundReport.from_dict(report.to_dict())
    assert [e.name for e in again.entries] == ["x", "y"]
    assert [e.satisfied for e in again.entries] == [True, False]


@pytest.mark.parametrize("fixture, scenario", [
    ("trivial_penalty", "trivial"), ("trivial_projection", "trivial"),
    ("band_penalty", "band"), ("band_penalty_coarse", "band"), ("band_projection", "band")])
def test_certify_runs(fixture, scenario, request):
    tr = request.getfixturevalue(fixture)
    s = request.getfixturevalue(scenario)
    report = certify_run(tr, s, validate_hypotheses(s))
    assert report.satisfied, [e.to_dict() for e in report.failures()]
    names = {e.name for e in report.entries}
    assert {"gronwall", "bv_seminorm", "infimum", "multiplier_sign", "complementarity"} <= names
    if tr.method == "penalty":
        assert {"penalty_l1", "pairing_lower", "pairing_upper", "violation_l2",
                "energy_identity"} <= names
    else:
        assert "multiplier_l1" in names
    assert len(report.by_name("gronwall")) == 6


def test_certify_needs_nonempty_window(band, band_penalty):
    c = validate_hypotheses(band.with_(gamma_star=0.7))
    with pytest.raises(InvalidEstimateParams):
        certify_run(band_penalty, band, c)


def test_smooth_velocity_run_certifies():
    s = Scenario(FieldSpec.gauss_band(1.2, 0.5, a1=-0.01), FieldSpec.expression("0.2 + 0.05*sin(x)"),
                 0.62, 0.0, 6.0, 5.0)
    c = validate_hypotheses(s)
    for tr in (solve_penalized(s, PenaltyOptions(epsilon=1e-3)),
               solve_projected(s, ProjectionOptions(h=6e-3))):
        report = certify_run(tr, s, c)
        assert report.satisfied, [e.to_dict() for e in report.failures()]
