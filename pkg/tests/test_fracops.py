import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pnloops.fracops import (PeriodicField, compute_Cn, frac_lap_1d, frac_lap_quadrature,
                             frac_lap_spectral, gaussian_image_mass, kernel_shell_integrals,
                             lemma_one_to_n_check, spectral_constant)


def test_constants():
    assert abs(compute_Cn(2) - 2.0) < 1e-10
    assert abs(compute_Cn(3) - math.pi) < 1e-10 * math.pi
    assert spectral_constant(1) == math.pi
    assert spectral_constant(2) == pytest.approx(2 * math.pi, abs=1e-12)
    with pytest.raises(ValueError):
        compute_Cn(4)


def test_shell_integrals():
    assert kernel_shell_integrals(1.0, 2) == pytest.approx((2 * math.pi, 2 * math.pi))
    assert kernel_shell_integrals(2.0, 2) == pytest.approx((4 * math.pi, math.pi))
    assert kernel_shell_integrals(1.0, 1) == pytest.approx((2.0, 2.0))
    for R in (0.0, -1.0):
        with pytest.raises(ValueError):
            kernel_shell_integrals(R)


def test_field_validation():
    with pytest.raises(ValueError):
        PeriodicField(np.zeros((48, 48)), 1.0)
    with pytest.raises(ValueError):
        PeriodicField(np.zeros((16, 16)), 0.0)
    with pytest.raises(ValueError):
        frac_lap_spectral(PeriodicField(np.full((8, 8), np.nan), 1.0))


def test_constant_annihilated():
    out = frac_lap_spectral(PeriodicField(np.full((32, 32), 7.0), 3.0))
    assert np.max(np.abs(out.values)) < 1e-12


@pytest.mark.parametrize("L", [1.0, 4.0, 2 * math.pi])
def test_cosine_eigenvalue(L):
    f = PeriodicField.from_function(lambda x, y: np.cos(2 * np.pi * x / L), L, 64)
    out = frac_lap_spectral(f).values
    lam = -2 * math.pi * (2 * math.pi / L)
    assert np.max(np.abs(out - lam * f.values)) < 1e-10 * abs(lam)


def test_spectral_vs_quadrature_gaussian():
    L, M, sigma, R = 4.0, 256, 0.2, 1.0
    f = PeriodicField.from_function(lambda x, y: np.exp(-(x * x + y * y) / (2 * sigma**2)), L, M)
    spec = frac_lap_spectral(f)
    far = gaussian_image_mass(L, sigma, (0.0, 0.0), R)
    for j in (M // 2, M // 2 + 8, M // 2 + 20):
        x = (f.axis()[j], 0.0)
        quad = frac_lap_quadrature(lambda X, Y: np.exp(-(X * X + Y * Y) / (2 * sigma**2)), x, R,
                                   far_mass=far, scale=sigma / 4)
        ref = spec.values[j, M // 2]
        assert abs(quad - ref) <= 1e-4 * abs(ref)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_spectral_symmetric_negative(seed):
    r = np.random.default_rng(seed)
    f = PeriodicField(r.standard_normal((32, 32)), 2.0)
    g = PeriodicField(r.standard_normal((32, 32)), 2.0)
    If, Ig = frac_lap_spectral(f).values, frac_lap_spectral(g).values
    scale = np.abs(If).sum() * np.abs(g.values).max()
    assert abs(np.sum(If * g.values) - np.sum(f.values * Ig)) <= 1e-10 * scale
    f0 = f.values - f.values.mean()
    assert np.sum(frac_lap_spectral(f.like(f0)).values * f0) <= 0
    # realness: complex round trip leaves no imaginary residue
    z = np.fft.ifft2(np.fft.fft2(f.values))
    assert np.max(np.abs(z.imag)) <= 1e-12 * np.linalg.norm(f.values)


def test_linear():
    r = np.random.default_rng(1)
    a, b = r.standard_normal((2, 16, 16))
    F = lambda v: frac_lap_spectral(PeriodicField(v, 1.0)).values
    assert np.allclose(F(2 * a - 3 * b), 2 * F(a) - 3 * F(b), atol=1e-11)


def test_1d_affine_zero():
    # affine on the support of the kernel pairing: second differences vanish
    assert abs(frac_lap_1d(lambda y: 3.0 * y - 1.0, 0.7)) < 1e-10


def test_1d_compact_bump():
    # I_1 of the Cauchy profile: v = 1/(1+y^2) has I_1 v = -pi (1 - y^2)/(1+y^2)^2
    v = lambda y: 1.0 / (1.0 + y * y)
    for y in (0.0, 0.5, 2.0):
        ref = -math.pi * (1 - y * y) / (1 + y * y) ** 2
        assert frac_lap_1d(v, y) == pytest.approx(ref, abs=1e-8)


def test_1d_layer(exact, W):
    assert abs(exact.C_n * frac_lap_1d(exact, 0.0)) < 1e-9
    for xi in (1.0, -3.0, 25.0):
        assert abs(exact.C_n * frac_lap_1d(exact, xi) - float(W.Wp(exact(xi)))) < 1e-6


def test_one_to_n(exact, rng):
    Cn = compute_Cn(2)
    for _ in range(20):
        th = rng.uniform(0, 2 * np.pi)
        e = (math.cos(th), math.sin(th))
        x = rng.uniform(-2, 2, 2)
        planar, one_d, bound = lemma_one_to_n_check(exact, e, x, Cn, R_trunc=200.0, n_theta=256)
        assert abs(planar - one_d) <= 1e-4 + bound
