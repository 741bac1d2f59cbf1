import numpy as np
import pytest

from spdc_imaging.grid import Grid, SampledField, forward_spectrum
from spdc_imaging.optics import (
    Aperture,
    ArmChain,
    DoubleSlit,
    FreeSpace,
    OpenMask,
    SamplingError,
    ThinLens,
    UnsupportedElementError,
    apply_aperture,
    apply_thin_lens,
    build_arm_kernel,
    load_mask,
    propagate_free,
    soft_window,
)
from spdc_imaging.oracles import closed_form_arm_kernel

K_P = 2 * np.pi / 442e-9
K_S = K_P / 2


def gaussian_field(n=2048, dx=10e-6, w=0.2e-3, k=K_P):
    g = Grid(n, dx)
    return SampledField(g, np.exp(-(g.x**2) / w**2), k=k)


def blurred_slit(x, centre, width, blur=15e-6):
    """Top-hat convolved with a Gaussian, so its spectrum is band limited."""
    from scipy.special import erf

    s = np.sqrt(2) * blur
    return 0.5 * (erf((x - centre + width / 2) / s) - erf((x - centre - width / 2) / s))


def rms_width(f):
    p = np.abs(f.values) ** 2
    x = f.grid.x
    return np.sqrt(np.sum(p * x**2) / np.sum(p))


def test_unit_mask_is_identity(rng):
    g = Grid(64, 1e-6)
    f = SampledField(g, rng.normal(size=64))
    np.testing.assert_array_equal(apply_aperture(f, OpenMask()).values, f.values)


def test_double_slit_mask_on_constant_field():
    g = Grid(1024, 1e-6)
    out = apply_aperture(SampledField(g, np.ones(1024)), Aperture(DoubleSlit(300e-6, 100e-6)))
    lit = g.x[np.abs(out.values) > 0]
    assert set(np.round(np.sign(lit))) == {-1, 1}
    assert np.all(np.abs(np.abs(lit) - 150e-6) <= 50e-6)


def test_mask_file_above_one_rejected(tmp_path):
    path = tmp_path / "mask.txt"
    path.write_text("-1 0\n0 1.2\n1 0\n")
    with pytest.raises(ValueError):
        load_mask(path)


def test_mask_file_interpolates(tmp_path):
    path = tmp_path / "mask.txt"
    path.write_text("# x_mm t\n-0.1 0\n0 1\n0.1 0\n")
    m = load_mask(path)
    assert m(np.array([0.05e-3]))[0] == pytest.approx(0.5)
    assert m(np.array([1e-3]))[0] == 0


def test_zero_distance_is_identity():
    f = gaussian_field()
    assert propagate_free(f, 0.0) is f


def test_forward_then_back_is_identity():
    f = gaussian_field()
    back = propagate_free(propagate_free(f, 0.5), -0.5)
    np.testing.assert_allclose(back.values, f.values, atol=1e-12)


def test_gaussian_beam_width():
    w0, z = 0.2e-3, 0.5
    f = gaussian_field(w=w0)
    out = propagate_free(f, z)
    zr = np.pi * w0**2 / 442e-9
    expected = w0 * np.sqrt(1 + (z / zr) ** 2)
    # rms intensity width of exp(-2x^2/w^2) is w/2
    assert 2 * rms_width(out) == pytest.approx(expected, rel=5e-3)


def test_unitarity_and_composition():
    f = gaussian_field()
    once = propagate_free(f, 0.6)
    twice = propagate_free(propagate_free(f, 0.25), 0.35)
    assert abs(once.energy() - f.energy()) <= 1e-12 * f.energy()
    np.testing.assert_allclose(twice.values, once.values, atol=1e-12)


def test_undersampled_propagation_refused():
    g = Grid(64, 1e-6)
    f = SampledField(g, np.exp(-(g.x**2) / (3e-6) ** 2), k=K_P)
    with pytest.raises(SamplingError, match="need n >="):
        propagate_free(f, 1.0)


def test_weak_lens_is_identity():
    f = gaussian_field()
    out = apply_thin_lens(f, 1e9)
    assert np.max(np.abs(out.values - f.values)) < 1e-6


def test_lens_focuses_plane_wave():
    # finite aperture of width D, lens f: focal spot width ~ lambda f / D
    n, dx, D, fl = 4096, 2e-6, 2e-3, 0.05
    g = Grid(n, dx)
    u = SampledField(g, blurred_slit(g.x, 0.0, D), k=K_P)
    spot = propagate_free(apply_thin_lens(u, fl), fl)
    I = np.abs(spot.values) ** 2
    assert abs(g.x[np.argmax(I)]) <= dx
    first_zero = 442e-9 * fl / D
    y = I / I.max()
    j = np.argmax(y) + np.flatnonzero(y[np.argmax(y):] < 0.5)[0]
    # half-maximum crossing on the falling edge, linearly interpolated
    half_width = g.x[j - 1] + (y[j - 1] - 0.5) / (y[j - 1] - y[j]) * g.dx
    # full width at half maximum of sinc^2 is 0.886 lambda f / D
    assert 2 * half_width == pytest.approx(0.886 * first_zero, rel=0.1)


def test_two_f_imaging_inverts_double_slit():
    fl = 0.02
    g = Grid(4096, 2e-6)
    W = blurred_slit(g.x, 40e-6 - 150e-6, 100e-6) + blurred_slit(g.x, 40e-6 + 150e-6, 100e-6)
    src = SampledField(g, W, k=K_P)
    u = propagate_free(src, 2 * fl)
    u = propagate_free(apply_thin_lens(u, fl), 2 * fl)
    I = np.abs(u.values) ** 2
    left, right = g.x < 0, g.x >= 0
    # object centred at +40 um, image centred at -40 um
    centre = 0.5 * (np.sum(g.x * I * right) / np.sum(I * right) + np.sum(g.x * I * left) / np.sum(I * left))
    assert centre == pytest.approx(-40e-6, abs=g.dx)


def test_lens_matrix_elements_match_momentum_kernel():
    # momentum-space matrix of the lens chirp against exp(i f |q - q'|^2 / 2k)
    n, dx, k, fl = 8, 1.0, 3.0, 2.5
    g = Grid(n, dx)
    # continuous-q check via direct quadrature of the Gaussian integral
    x = np.linspace(-60, 60, 200001)
    h = x[1] - x[0]
    q = g.q[:3]
    chirp = np.exp(-1j * k * x**2 / (2 * fl))
    M = np.array([[np.sum(chirp * np.exp(-1j * (qa - qb) * x) * np.exp(-(x / 40) ** 8)) * h for qb in q] for qa in q])
    T = np.exp(1j * fl * np.subtract.outer(q, q) ** 2 / (2 * k))
    ratio = M / T
    np.testing.assert_allclose(ratio, ratio[0, 0], rtol=2e-3)


def test_empty_chain_kernel_is_plane_wave():
    rho = np.linspace(-1e-3, 1e-3, 5)
    q = np.linspace(-1e4, 1e4, 7)
    h = build_arm_kernel(ArmChain(K_S, ()), rho, q).h
    np.testing.assert_allclose(h, np.exp(1j * np.outer(rho, q)), atol=1e-15)


def test_free_space_kernel():
    rho = np.linspace(-1e-3, 1e-3, 5)
    q = np.linspace(-1e5, 1e5, 7)
    h = build_arm_kernel(ArmChain(K_S, (FreeSpace(0.3),)), rho, q).h
    expected = np.exp(1j * (np.outer(rho, q) - q**2 * 0.3 / (2 * K_S)))
    np.testing.assert_allclose(h, expected, atol=1e-12)


def test_lens_chain_kernel_matches_closed_form():
    rho = np.linspace(-1.5e-3, 1.5e-3, 31)
    q = np.linspace(-2e5, 2e5, 401)
    chain = ArmChain(K_S, (FreeSpace(0.07), ThinLens(0.25), FreeSpace(0.63)))
    h = build_arm_kernel(chain, rho, q).h
    ref = closed_form_arm_kernel(0.07, 0.25, 0.70, K_S, rho, q)
    assert np.max(np.abs(h - ref)) <= 1e-8 * np.max(np.abs(ref))


def test_fft_kernel_agrees_for_free_space():
    g = Grid(256, 20e-6)
    rho = np.linspace(-0.5e-3, 0.5e-3, 5)
    chain = ArmChain(K_S, (FreeSpace(0.02),))
    a = build_arm_kernel(chain, rho, g.q).h
    b = build_arm_kernel(chain, rho, g.q, method="fft", grid=g).h
    np.testing.assert_allclose(b, a, atol=1e-9)


def test_fft_kernel_serial_equals_parallel():
    g = Grid(64, 20e-6)
    rho = np.linspace(-0.1e-3, 0.1e-3, 3)
    chain = ArmChain(K_S, (FreeSpace(0.001),))
    a = build_arm_kernel(chain, rho, g.q, method="fft", grid=g).h
    b = build_arm_kernel(chain, rho, g.q, method="fft", grid=g, workers=3).h
    assert np.array_equal(a, b)


def test_aperture_in_chain_unsupported():
    with pytest.raises(UnsupportedElementError):
        build_arm_kernel(ArmChain(K_S, (Aperture(OpenMask()),)), [0.0], np.zeros(3))


@pytest.mark.parametrize("bad", [lambda: FreeSpace(0.0), lambda: FreeSpace(-1.0), lambda: ThinLens(0.0)])
def test_element_invariants(bad):
    with pytest.raises(ValueError):
        bad()


def test_soft_window_shape():
    q = np.linspace(-2, 2, 4001)
    w = soft_window(q, 1.0)
    assert np.all(w[np.abs(q) < 0.6] > 1 - 1e-15)
    assert np.all(w[np.abs(q) >= 1.0] == 0)
    assert np.all(np.diff(w[q >= 0]) <= 0)
