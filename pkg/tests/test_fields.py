import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import ETA_STAR_BAND, GAMMA_AT_MIN
from shockfront import builtin
from shockfront.errors import (DegenerateAverage, EvaluationDomainError, ExprSyntaxError,
                               HypothesisViolation, SchemaError)
from shockfront.fields import (ETA_REFINEMENT_TOL, BoundsCertificate, FieldSpec, Grid,
                               Scenario, eval_fields, estimate_eta_star, running_average,
                               validate_hypotheses)


def band(a0=1.0, g0=0.5, a1=0.0, gs=0.62, L0=0.0, T=8.0, X=5.0, U=0.2):
    return Scenario(FieldSpec.gauss_band(a0, g0, a1), FieldSpec.constant(U), gs, L0, T, X)


def test_eval_constant_velocity():
    s = builtin.trivial()
    assert eval_fields(s, 1.0, 3.0)[0] == 0.2


def test_eval_band_at_origin():
    u, g, gt = eval_fields(band(), 0.0, 0.0)
    assert (g, gt) == (1.0, 0.0)


def test_eval_band_at_minimum():
    _, g, _ = eval_fields(band(), 0.0, 1 / math.sqrt(2))
    assert g == pytest.approx(GAMMA_AT_MIN, abs=1e-14)


def test_analytic_time_derivative():
    _, _, gt = eval_fields(band(a1=-0.05), 3.0, 0.7)
    assert gt == -0.05


def test_expression_time_derivative_is_central_difference():
    s = Scenario(FieldSpec.expression("1 + 0.1*t^2"), FieldSpec.constant(0.1), 0.5, 0.0, 4.0, 1.0)
    assert eval_fields(s, 2.0, 0.3)[2] == pytest.approx(0.4, abs=1e-6)


@pytest.mark.parametrize("t, x", [(-0.1, 0.0), (8.1, 0.0), (1.0, -1e-9)])
def test_eval_domain(t, x):
    with pytest.raises(EvaluationDomainError):
        eval_fields(band(), t, x)


def test_fieldspec_invariants():
    with pytest.raises(SchemaError):
        FieldSpec.gauss_band(1.0, 0.0)
    with pytest.raises(ExprSyntaxError):
        FieldSpec.expression("1 +")


@pytest.mark.parametrize("changes", [{"gamma_star": 0.0}, {"L0": -1.0}, {"T": 0.0},
                                     {"X_max": 0.0}])
def test_scenario_invariants(changes):
    kw = dict(gamma=FieldSpec.constant(0.9), velocity=FieldSpec.constant(0.2),
              gamma_star=0.62, L0=0.0, T=5.0, X_max=5.0)
    kw.update(changes)
    with pytest.raises(SchemaError):
        Scenario(**kw)


def test_trivial_certificate():
    cert = validate_hypotheses(builtin.trivial())
    assert cert.valid
    assert (cert.U_Lip, cert.U_0max, cert.Gamma_max, cert.C_Gamma) == (0.0, 0.2, 0.9, 0.0)
    assert cert.eta_star == pytest.approx(0.9, abs=1e-12)


def test_negative_velocity_violates():
    s = Scenario(FieldSpec.constant(0.9), FieldSpec.constant(-1.0), 0.62, 0.0, 5.0, 5.0)
    with pytest.raises(HypothesisViolation) as info:
        validate_hypotheses(s)
    names = [v.hypothesis for v in info.value.violations]
    assert "U >= 0" in names
    assert info.value.violations[0].value == -1.0


def test_declared_bound_too_small_violates():
    s = band().with_(bounds=(("Gamma_max", 0.9),))
    with pytest.raises(HypothesisViolation) as info:
        validate_hypotheses(s)
    assert info.value.violations[0].hypothesis == "gamma <= Gamma_max"


def test_declared_constants_are_used():
    s = band().with_(bounds=(("Gamma_max", 1.5), ("U_Lip", 0.0)))
    cert = validate_hypotheses(s)
    assert cert.Gamma_max == 1.5
    assert cert.source("Gamma_max") == "declared"
    assert cert.source("eta_star") == "estimated"
    infl = cert.inflated()
    assert infl.Gamma_max == 1.5
    assert infl.U_0max == pytest.approx(1.05 * cert.U_0max)


def test_threshold_above_eta_star_gives_invalid_certificate():
    cert = validate_hypotheses(band(gs=0.7))
    assert not cert.valid
    assert cert.eta_star == pytest.approx(ETA_STAR_BAND, abs=1e-4)


def test_certificate_round_trip():
    cert = validate_hypotheses(band())
    assert BoundsCertificate.from_dict(cert.to_dict()) == cert


def test_eta_star_constant_field():
    s = builtin.trivial()
    assert estimate_eta_star(s) == pytest.approx(0.9, abs=1e-12)


@pytest.mark.parametrize("a0, expected", [(1.0, ETA_STAR_BAND), (2.0, ETA_STAR_BAND + 1.0)])
def test_eta_star_band(a0, expected):
    assert estimate_eta_star(band(a0=a0)) == pytest.approx(expected, abs=ETA_REFINEMENT_TOL)


def test_eta_star_is_grid_infimum():
    s = band(a1=-0.02)
    eta = estimate_eta_star(s, ny=101, nt=51)
    t = np.linspace(0, s.T, 51)[:, None]
    y = np.linspace(0, s.X_max, 101)[1:][None, :]
    avg = running_average(s, t, y, panels=800)
    assert avg.min() >= eta - 1e-5
    assert avg.min() == pytest.approx(eta, abs=1e-5)


@pytest.mark.parametrize("make", [builtin.static_band, builtin.decaying_band,
                                  builtin.contact_tracking, builtin.trivial])
def test_eta_star_refinement(make):
    s = make()
    coarse = estimate_eta_star(s, ny=401, nt=401)
    fine = estimate_eta_star(s, ny=801, nt=801)
    assert abs(coarse - fine) < ETA_REFINEMENT_TOL


def test_eta_star_independent_of_time_grid_for_static_field():
    s = band()
    values = {estimate_eta_star(s, nt=nt) for nt in (2, 17, 401)}
    assert len(values) == 1


def test_degenerate_average_with_positive_start():
    s = band(L0=0.5)
    with pytest.raises(DegenerateAverage):
        estimate_eta_star(s)
    with pytest.raises(DegenerateAverage):
        validate_hypotheses(s)
    shifted = validate_hypotheses(s, eta_variant="shifted")
    assert shifted.eta_variant == "shifted"
    assert 0.5 < shifted.eta_star < 1.0


def test_validation_is_deterministic():
    assert validate_hypotheses(band(), Grid(51, 61)) == validate_hypotheses(band(), Grid(51, 61))


def test_grid_needs_two_points():
    with pytest.raises(ValueError):
        Grid(1, 10)


@settings(max_examples=25, deadline=None)
@given(a0=st.floats(0.7, 2.0), g0=st.floats(0.05, 0.5), a1=st.floats(-0.03, 0.03),
       U=st.floats(0.0, 1.0))
def test_valid_certificates_have_eta_above_threshold(a0, g0, a1, U):
    s = band(a0=a0, g0=g0, a1=a1, gs=0.3, T=5.0, U=U)
    cert = validate_hypotheses(s, Grid(41, 81))
    if cert.valid:
        assert cert.eta_star > cert.gamma_star > 0
        assert cert.Gamma_max >= cert.gamma_star
    assert min(cert.U_Lip, cert.U_0max, cert.C_Gamma) >= 0
