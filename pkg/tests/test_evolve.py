import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from pnloops.evolve import (SimConfig, SimulationError, Stepper, circle_law_errors, dt_max,
                            exact_circle_radius, mcf_levelset_reference, relative_deviation,
                            run_simulation, step, write_manifest, zero_level_radius)
from pnloops.fracops import PeriodicField
from pnloops.geometry import build_initial_condition, concentric_circles, extract_fronts, front_statistics


def cfg_for(profile, W, radii=(1.0,), eps=0.1, M=256, L=4.0, **kw):
    return SimConfig(eps, concentric_circles(radii, L=L), profile, W, M=M, L=L, **kw)


def test_dt_max(W):
    assert dt_max(0.025, W) == pytest.approx(0.025**2 * math.log(40) / (8 * math.pi))
    assert dt_max(0.025, W) == pytest.approx(9.17e-5, rel=1e-3)


def test_config_policy(exact, W):
    with pytest.raises(ValueError, match="resolution"):
        cfg_for(exact, W, M=64)
    with pytest.raises(ValueError, match="stability"):
        cfg_for(exact, W, dt=1.0)
    c = cfg_for(exact, W)
    assert c.dt == dt_max(0.1, W)
    const = c.constants()
    assert const["mu"] == pytest.approx(2 * math.pi, abs=1e-4)
    assert const["kappa_n"] == pytest.approx(2 * math.pi)


def test_integer_stationary(exact, W):
    c = cfg_for(exact, W, eps=0.5, M=32)
    st = Stepper(c)
    for k in (0, 1, 2, 3):
        v = np.full((32, 32), float(k))
        for _ in range(10_000):
            v = st(v)
        assert np.max(np.abs(v - k)) <= 1e-12


def test_nan_aborts(exact, W):
    c = cfg_for(exact, W)
    u = PeriodicField(np.full((256, 256), np.nan), 4.0)
    with pytest.raises(SimulationError):
        step(u, c)


def test_range_preserved(exact, W):
    c = cfg_for(exact, W, radii=(1.0, 0.6, 0.3), T_final=0.02, output_every=4)
    tr = run_simulation(c)
    lo = min(r[0] for r in tr.u_range)
    hi = max(r[1] for r in tr.u_range)
    assert lo >= -1e-6 and hi <= 3 + 1e-6


def test_comparison(exact, W):
    c = cfg_for(exact, W, T_final=0.02)
    a = build_initial_condition(concentric_circles([0.8]), 0.1, exact, 256).values
    b = build_initial_condition(concentric_circles([1.0]), 0.1, exact, 256).values
    assert np.all(a <= b)
    st = Stepper(c)
    n = int(round(c.T_final / c.dt))
    check = set(np.linspace(1, n, 10).astype(int))
    for k in range(1, n + 1):
        a, b = st(a), st(b)
        if k in check:
            assert np.min(b - a) >= -1e-8


def test_times_and_radii(exact, W):
    tr = run_simulation(cfg_for(exact, W, radii=(1.0,), eps=0.05, M=512, T_final=0.03,
                                output_every=40))
    assert np.all(np.diff(tr.times) > 0)
    R = tr.radius_array()[:, 0]
    assert np.all(np.diff(R) < 0)


def _front_after(exact, W, M, eps=0.1, L=2.0, T=0.01):
    c = cfg_for(exact, W, radii=(0.4,), eps=eps, M=M, L=L)
    f = PeriodicField.from_function(lambda x, y: exact.eval((0.4 - np.abs(x)) / eps), L, M)
    st = Stepper(c)
    v = f.values
    n = int(round(T / c.dt))
    for _ in range(n):
        v = st(v)
    row = np.fft.rfft(v[:, 0])
    k = 2 * np.pi * np.fft.rfftfreq(M, d=L / M)

    def u(s):
        return np.fft.irfft(row * np.exp(1j * k * (s + L / 2)), n=M)[0]
    return brentq(lambda s: u(s) - 0.5, 0.2, 0.7), n * c.dt


def test_straight_front_h2_drift(exact, W):
    # the grid-dependent part of the front drift, measured against a fine grid
    ref, _ = _front_after(exact, W, 1024)
    drift = {}
    for M in (128, 256, 512):
        X, T = _front_after(exact, W, M)
        drift[M] = abs(X - ref) / T
        assert drift[M] <= (2.0 / M) ** 2
    assert drift[128] / drift[256] >= 3.0


def test_exact_circle_radius():
    assert exact_circle_radius(1.0, 2 * np.pi, 0.0) == 1.0
    assert exact_circle_radius(1.0, 2 * np.pi, 1 / (4 * np.pi)) == 0.0
    assert exact_circle_radius(1.0, 2 * np.pi, 1 / (16 * np.pi)) == pytest.approx(math.sqrt(0.75))
    assert exact_circle_radius(1.0, 2 * np.pi, 1 / (32 * np.pi)) == pytest.approx(math.sqrt(0.875))
    with pytest.raises(ValueError):
        exact_circle_radius(1.0, 2 * np.pi, 1.0)
    with pytest.raises(ValueError):
        exact_circle_radius(1.0, 2 * np.pi, -0.1)


def test_mcf_circle():
    L, M, mu = 4.0, 128, 2 * np.pi
    d0 = PeriodicField.from_function(lambda x, y: 1.0 - np.hypot(x, y), L, M)
    for T in (0.02, 0.05):
        R = zero_level_radius(mcf_levelset_reference(d0, mu, T))
        assert abs(R - exact_circle_radius(1.0, mu, T)) <= 2 * d0.h
    with pytest.raises(ValueError, match="CFL"):
        mcf_levelset_reference(d0, mu, 0.01, dt=1.0)


def test_mcf_affine():
    d0 = PeriodicField.from_function(lambda x, y: 0.3 - x + 0.5 * y, 2.0, 64)
    out = mcf_levelset_reference(d0, 2 * np.pi, 0.01)
    assert np.max(np.abs(out.values - d0.values)) < 1e-10


def test_mcf_ellipse_rounds():
    L, M = 4.0, 128
    d0 = PeriodicField.from_function(lambda x, y: 1.0 - np.hypot(x / 1.2, y / 0.7), L, M)
    ecc = []

    def record(t, u):
        (c,) = [c for c in extract_fronts(u.like(-u.values + 0.5), 1)]
        ext = c.max(axis=0) - c.min(axis=0)
        ecc.append(ext[0] / ext[1])
    mcf_levelset_reference(d0, 1.0, 0.15, callback=record, every=100)
    assert len(ecc) > 5 and np.all(np.diff(ecc) < 0)


def test_relative_deviation():
    a = np.array([1.0, 0.9, np.nan])
    assert np.array_equal(relative_deviation(a, a), [0.0, 0.0])
    b = np.array([1.0, 0.8, 0.5])
    assert np.allclose(relative_deviation(a, b), [0.0, 0.125, 1.0])
    assert np.allclose(relative_deviation(a, b, stop=0.6), [0.0, 0.125])


def test_circle_law_errors_and_manifest(tmp_path, exact, W):
    c = cfg_for(exact, W, eps=0.1, T_final=0.02, output_every=5)
    tr = run_simulation(c)
    t, R, Rex = circle_law_errors(tr, 1.0, c.constants()["mu"], stop=0.3)
    assert len(t) == len(R) == len(Rex) > 2
    man = write_manifest(tmp_path / "m.json", c)
    on_disk = json.loads((tmp_path / "m.json").read_text())
    for key in ("C_n", "c0", "mu", "alpha", "kappa_n", "dt_max"):
        assert key in on_disk["constants"]
    assert man["config"]["M"] == 256


def test_deterministic(exact, W):
    c = cfg_for(exact, W, T_final=0.005, output_every=2)
    a, b = run_simulation(c), run_simulation(c)
    assert np.array_equal(a.final.values, b.final.values)
    assert a.radii == b.radii
