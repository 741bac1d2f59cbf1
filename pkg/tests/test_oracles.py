import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdc_imaging.geometry import ExperimentGeometry
from spdc_imaging.oracles import (
    ImagingGeometry,
    ScanAnalysisError,
    closed_form_arm_kernel,
    fraunhofer_double_slit,
    fringe_period,
    linear_scale,
    peak_separation,
    predict_coincidence_profile,
    printed_kernel_residual,
    relative_phase_factor,
    thin_lens_solve,
)


def slits(x):
    return ((np.abs(np.abs(x) - 150e-6) <= 50e-6)).astype(float)


def test_thin_lens_solves_image_distance():
    g = thin_lens_solve(O=0.41, f=0.25)
    assert g.I == pytest.approx(0.640625, rel=1e-12)
    assert g.m == pytest.approx(1.5625, rel=1e-12)


def test_unit_magnification_at_2f():
    assert thin_lens_solve(O=0.5, f=0.25).m == pytest.approx(1.0, rel=1e-12)


def test_virtual_image_refused():
    with pytest.raises(ValueError, match="virtual"):
        thin_lens_solve(O=0.2, f=0.25)


def test_needs_exactly_two_distances():
    with pytest.raises(ValueError):
        thin_lens_solve(O=0.4)


@given(st.floats(0.05, 2.0), st.floats(1.05, 20.0))
def test_thin_lens_round_trip(f, ratio):
    g = thin_lens_solve(O=f * ratio, f=f)
    back = thin_lens_solve(O=g.O, I=g.I)
    assert back.f == pytest.approx(f, rel=1e-12)
    assert abs(g.residual) <= 1e-12


@given(st.floats(0.05, 2.0), st.floats(1.05, 20.0))
def test_linear_scale_is_inverse_magnification(f, ratio):
    g = thin_lens_solve(O=f * ratio, f=f)
    assert linear_scale(g) == pytest.approx(g.O / g.I, rel=1e-12)


def test_predicted_fixed_profile_doubles_separation():
    geo = thin_lens_solve(O=0.41, f=0.25)
    x = np.linspace(-1.2e-3, 1.2e-3, 4801)
    fixed = predict_coincidence_profile(slits, geo, "fixed-signal", x)
    same = predict_coincidence_profile(slits, geo, "same", x)
    assert peak_separation((x, fixed), smooth=0) == pytest.approx(0.9375e-3, abs=1e-6)
    assert peak_separation((x, same), smooth=0) == pytest.approx(0.46875e-3, abs=1e-6)


def test_unit_magnification_profile_is_object():
    geo = thin_lens_solve(O=0.5, f=0.25)
    x = np.linspace(-0.4e-3, 0.4e-3, 161) + 1.25e-6
    np.testing.assert_array_equal(predict_coincidence_profile(slits, geo, "same", x), slits(-x))


def test_opposite_profile_is_flat():
    geo = thin_lens_solve(O=0.41, f=0.25)
    assert np.all(predict_coincidence_profile(slits, geo, "opposite", np.zeros(5)) == 1)


def test_prediction_needs_imaging_condition():
    with pytest.raises(ValueError, match="imaging condition"):
        predict_coincidence_profile(slits, ImagingGeometry(0.41, 0.7, 0.25), "same", np.zeros(3))


def test_fraunhofer_normalised_and_envelope_zero():
    D, lam = 1.04, 442e-9
    assert fraunhofer_double_slit(300e-6, 100e-6, lam, D, 0.0) == 1.0
    assert fraunhofer_double_slit(300e-6, 100e-6, lam, D, lam * D / 100e-6) < 1e-30
    x = np.linspace(-6e-3, 6e-3, 481)
    period = fringe_period((x, fraunhofer_double_slit(300e-6, 100e-6, lam, D, x)))
    assert period == pytest.approx(1.532e-3, rel=0.01)


def test_arm_kernel_at_zero_momentum_is_constant_in_printed_form():
    h = closed_form_arm_kernel(0.07, 0.25, 0.710625, 2 * np.pi / 884e-9, np.linspace(-1e-3, 1e-3, 5), 0.0, printed=True)
    np.testing.assert_array_equal(h, np.ones_like(h))


def test_printed_coefficient_is_off_and_derived_is_exact():
    geo = ExperimentGeometry.at_imaging_condition(0.34, 0.07, 0.25)
    res = printed_kernel_residual(geo.z1, geo.z2, geo.f, geo.z, geo.k_p)
    assert abs(res["derived_residual"]) < 1e-12
    assert abs(res["printed_residual"]) == pytest.approx(2 * geo.f**2 / (geo.I - geo.f), rel=1e-12)


def test_relative_phase_factor_constant_modulus():
    r = np.linspace(-2e-3, 2e-3, 41)
    for printed in (False, True):
        M = relative_phase_factor(r, 0.34, 0.41, 0.640625, 2 * np.pi / 442e-9, printed)
        assert np.ptp(np.abs(M)) < 1e-12 * np.abs(M[0])
    with pytest.raises(ValueError):
        relative_phase_factor(r, 0.0, 0.41, 0.640625, 1.0)


# ---------------------------------------------------------------- analysis


@pytest.mark.parametrize("period", [0.3e-3, 0.77e-3, 1.53e-3])
def test_fringe_period_on_synthetic_cosine(period):
    x = np.linspace(-6e-3, 6e-3, 241)
    y = 1 + np.cos(2 * np.pi * x / period + 0.3)
    assert fringe_period((x, y)) == pytest.approx(period, rel=0.01)


def test_fringe_period_with_noise():
    rng = np.random.default_rng(2)
    x = np.linspace(-6e-3, 6e-3, 241)
    y = rng.poisson(1e4 * np.cos(np.pi * x / 1.53e-3) ** 2) / 1e4
    assert fringe_period((x, y)) == pytest.approx(1.53e-3, rel=0.02)


def test_fringe_period_refuses_constant_scan():
    with pytest.raises(ScanAnalysisError):
        fringe_period((np.linspace(0, 1, 50), np.ones(50)))


def test_fringe_period_scale_invariant():
    x = np.linspace(-6e-3, 6e-3, 241)
    y = np.cos(np.pi * x / 1.53e-3) ** 2
    assert fringe_period((x, y)) == fringe_period((x, 4 * y))


def test_peak_separation_of_top_hats():
    x = np.linspace(-1.2e-3, 1.2e-3, 101)
    y = (np.abs(np.abs(x) - 0.234e-3) <= 0.06e-3).astype(float)
    assert peak_separation((x, y)) == pytest.approx(0.468e-3, abs=x[1] - x[0])


def test_peak_separation_refuses_single_peak():
    x = np.linspace(-1, 1, 101)
    with pytest.raises(ScanAnalysisError, match="found 1"):
        peak_separation((x, np.exp(-(x**2) / 0.1)))


def test_peak_separation_with_noise():
    rng = np.random.default_rng(4)
    x = np.linspace(-1.2e-3, 1.2e-3, 101)
    clean = np.exp(-(((np.abs(x) - 0.469e-3) / 0.1e-3) ** 2))
    y = rng.poisson(1e4 * clean) / 1e4
    assert peak_separation((x, y)) == pytest.approx(0.938e-3, rel=0.02)


@settings(max_examples=25)
@given(st.floats(1e-3, 1e6))
def test_peak_separation_scale_invariant(scale):
    x = np.linspace(-1.2e-3, 1.2e-3, 101)
    y = np.exp(-(((np.abs(x) - 0.469e-3) / 0.1e-3) ** 2))
    assert peak_separation((x, scale * y)) == pytest.approx(peak_separation((x, y)), rel=1e-12)
