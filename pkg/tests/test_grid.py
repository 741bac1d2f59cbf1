import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdc_imaging.grid import (
    DomainError,
    Grid,
    GridError,
    SampledField,
    evaluate_spectrum,
    forward_spectrum,
    inverse_spectrum,
    make_grid,
)


def test_small_grid_axes():
    g = make_grid(8, 1.0)
    np.testing.assert_array_equal(g.x, np.arange(-4, 4))
    assert g.dq == pytest.approx(2 * np.pi / 8)


def test_span_and_dq():
    g = make_grid(1024, 10e-6)
    assert g.span == pytest.approx(10.24e-3)
    assert g.dq == pytest.approx(613.6, abs=0.05)


@pytest.mark.parametrize("n, dx", [(7, 1.0), (12, 1.0), (4, 1.0), (8, 0.0), (8, -1e-6)])
def test_bad_grids_rejected(n, dx):
    with pytest.raises(GridError):
        make_grid(n, dx)


def test_constant_field_gives_discrete_delta():
    g = Grid(64, 0.5)
    V = forward_spectrum(SampledField(g, np.ones(64)))
    assert V.values[32] == pytest.approx(64 * 0.5)
    assert np.max(np.abs(np.delete(V.values, 32))) < 1e-12


def test_gaussian_spectrum_matches_continuous_transform():
    w = 1e-3
    g = Grid(1024, 20e-6)
    V = forward_spectrum(SampledField(g, np.exp(-(g.x**2) / w**2)))
    expected = np.sqrt(np.pi) * w * np.exp(-(g.q**2) * w**2 / 4)
    np.testing.assert_allclose(V.values, expected, atol=1e-12 * expected.max())


def test_double_slit_spectrum_envelope():
    d, a = 300e-6, 100e-6
    g = Grid(8192, 1e-6)
    W = ((np.abs(g.x - d / 2) < a / 2) | (np.abs(g.x + d / 2) < a / 2)).astype(float)
    V = forward_spectrum(SampledField(g, W))
    q = g.q[np.abs(g.q) < 2e5]
    sel = np.abs(g.q) < 2e5
    expected = (2 * a * np.cos(q * d / 2) * np.sinc(q * a / 2 / np.pi)) ** 2
    # sampled top-hats differ from ideal ones by O(dx / a)
    np.testing.assert_allclose(np.abs(V.values[sel]) ** 2, expected, atol=0.03 * expected.max())


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([8, 64, 256, 1024]), st.integers(0, 2**31 - 1))
def test_round_trip_and_parseval(n, seed):
    rng = np.random.default_rng(seed)
    g = Grid(n, 3.7e-6)
    f = SampledField(g, rng.normal(size=n) + 1j * rng.normal(size=n))
    V = forward_spectrum(f)
    back = inverse_spectrum(V)
    assert np.max(np.abs(back.values - f.values)) <= 1e-12 * np.max(np.abs(f.values))
    assert abs(V.energy() - f.energy()) <= 1e-12 * f.energy()


def test_delta_spectrum_gives_constant_field():
    g = Grid(32, 1e-5)
    V = np.zeros(32, complex)
    V[16] = 1.0
    f = inverse_spectrum(SampledField(g, V, "momentum"))
    np.testing.assert_allclose(f.values, np.full(32, f.values[0]), atol=1e-15)


def test_shift_theorem(rng):
    g = Grid(256, 1e-6)
    f = SampledField(g, rng.normal(size=256) + 1j * rng.normal(size=256))
    V = forward_spectrum(f)
    shifted = inverse_spectrum(V.with_values(V.values * np.exp(-1j * g.q * 5 * g.dx)))
    np.testing.assert_allclose(shifted.values, np.roll(f.values, 5), atol=1e-12)


def test_wrong_domain_rejected():
    g = Grid(8, 1.0)
    with pytest.raises(DomainError):
        forward_spectrum(SampledField(g, np.ones(8), "momentum"))
    with pytest.raises(DomainError):
        inverse_spectrum(SampledField(g, np.ones(8)))


def test_band_limited_interpolation_hits_grid_samples(rng):
    g = Grid(64, 1.0)
    f = SampledField(g, rng.normal(size=64))
    V = forward_spectrum(f)
    np.testing.assert_allclose(evaluate_spectrum(V, g.x), f.values, atol=1e-12)


def test_values_are_read_only():
    f = SampledField(Grid(8, 1.0), np.ones(8))
    with pytest.raises(ValueError):
        f.values[0] = 2
