import math

import numpy as np
import pytest

from pnloops.fracops import PeriodicField
from pnloops.geometry import (Circle, DistanceField, FourierCurve, LoopConfig,
                              build_initial_condition, concentric_circles, ellipse_perimeter,
                              extract_fronts, front_statistics, signed_distance, smooth_extension)


def test_signed_distance_circle():
    c = Circle((0.1, -0.2), 1.0)
    assert c.dtilde(0.1, -0.2) == 1.0
    assert c.dtilde(2.1, -0.2) == pytest.approx(-1.0)
    pts = c.sample(64)
    assert np.max(np.abs(c.dtilde(*pts.T))) < 1e-14
    d = signed_distance(concentric_circles([1.0]), 0, 4.0, 64)
    assert d.values[32, 32] == pytest.approx(1.0)


def test_signed_distance_fourier():
    c = FourierCurve((0.0, 0.0), 0.8, a=(0.0, 0.1))
    pts = c.sample(200)
    assert np.max(np.abs(c.dtilde(pts[:, 0], pts[:, 1]))) < 1e-6
    assert c.dtilde(0.0, 0.0) > 0
    assert c.dtilde(1.0, 0.1) < 0
    # exact for a degenerate (circular) Fourier curve
    r = FourierCurve((0.0, 0.0), 0.7)
    x = np.linspace(-0.9, 0.9, 11)
    assert np.allclose(r.dtilde(x, 0.3 * x), 0.7 - np.hypot(x, 0.3 * x), atol=1e-10)


def test_grid_too_coarse():
    loops = concentric_circles([1.0, 0.99])
    with pytest.raises(ValueError, match="coarse"):
        signed_distance(loops, 0, 4.0, 64)


def test_loopconfig_rejects():
    with pytest.raises(ValueError):
        LoopConfig([Circle((0, 0), 0.5), Circle((0, 0), 0.8)])
    with pytest.raises(ValueError):
        LoopConfig([Circle((0, 0), 1.5)], L=4.0)
    with pytest.raises(ValueError):
        LoopConfig([])


def test_extension_examples():
    rho = 0.2
    assert smooth_extension(rho / 2, rho) == pytest.approx(rho / 2)
    assert smooth_extension(3 * rho, rho) == pytest.approx(2 * rho)
    assert smooth_extension(-3 * rho, rho) == pytest.approx(-2 * rho)
    s = np.linspace(1.0001, 1.9999, 200) * rho
    v = smooth_extension(s, rho)
    assert np.all((v > rho) & (v < 2 * rho))
    assert np.all(np.diff(v) >= 0)


def test_eikonal_and_laplacian():
    loops = concentric_circles([1.0, 0.5])
    df = DistanceField.from_loops(loops)
    L, M = 4.0, 512
    for i, R in enumerate((1.0, 0.5)):
        d = df.field(i, L, M).values
        h = L / M
        gx, gy = np.gradient(d, h)
        lap = (np.roll(d, 1, 0) + np.roll(d, -1, 0) + np.roll(d, 1, 1) + np.roll(d, -1, 1) - 4 * d) / h**2
        X, Y = PeriodicField(d, L).coords()
        r = np.hypot(X, Y)
        band = np.abs(R - r) <= df.rho * 0.9
        g = np.hypot(gx, gy)[band]
        assert np.mean((g < 0.99) | (g > 1.01)) < 0.05
        assert np.max(np.abs(lap[band] + 1 / r[band])) <= 2 * h
        # pointwise analytic Laplacian
        assert np.allclose(df.laplacian(i, X[band], Y[band]), -1 / r[band], atol=1e-12)


def test_initial_condition(exact):
    loops = concentric_circles([1.0, 0.6, 0.3])
    eps, M = 0.05, 512
    u = build_initial_condition(loops, eps, exact, M)
    assert 0 < u.values.min() and u.values.max() < 3
    X, Y = u.coords()
    r = np.hypot(X, Y)
    alpha = exact.alpha
    c = r == r.min()
    assert abs(u.values[c].max() - 3) <= 3 * eps / (alpha * 0.3)
    far = r >= 1.7
    assert np.max(u.values[far]) <= 3 * eps / (alpha * 0.7)
    # on the middle front: 1/2 plus the tails of the other two
    x = 0.6
    expected = 0.5 + exact.eval(0.4 / eps) + exact.eval(-0.3 / eps)
    val = sum(exact.eval(c.dtilde(x, 0.0) / eps) for c in loops.loops)
    assert float(val) == pytest.approx(float(expected), abs=1e-12)
    assert abs(float(val) - 1.5) < 3 * eps / (alpha * 0.3)
    with pytest.raises(ValueError, match="under-resolved"):
        build_initial_condition(loops, 0.01, exact, 256)


def test_extract_fronts(exact):
    L, M, eps = 4.0, 256, 0.0625
    u = build_initial_condition(concentric_circles([1.0]), eps, exact, M)
    (f,) = extract_fronts(u, 1)
    assert abs(front_statistics(f).mean_radius - 1.0) <= L / M
    assert all(len(c) == 0 for c in extract_fronts(u.like(np.full((M, M), 0.2)), 3))
    u3 = build_initial_condition(concentric_circles([1.0, 0.7, 0.4]), eps, exact, M)
    fr = extract_fronts(u3, 3)
    radii = [front_statistics(c).mean_radius for c in fr]
    assert radii[0] > radii[1] > radii[2]
    # nesting preserved: each inner contour lies inside the previous one
    from matplotlib.path import Path
    for a, b in zip(fr, fr[1:]):
        assert Path(a).contains_points(b).all()


def test_front_statistics():
    t = 2 * np.pi * np.arange(1024) / 1024
    st = front_statistics(np.column_stack([np.cos(t), np.sin(t)]))
    assert abs(st.area - math.pi) < 1e-4
    assert np.allclose(st.curvature, 1.0, atol=1e-4)
    assert not st.self_intersecting
    s = np.linspace(-1, 1, 9)[:-1]
    sq = np.concatenate([np.column_stack([s, -np.ones(8)]), np.column_stack([np.ones(8), s]),
                         np.column_stack([-s, np.ones(8)]), np.column_stack([-np.ones(8), -s])])
    assert front_statistics(sq).area == pytest.approx(4.0)
    e = np.column_stack([2 * np.cos(t), np.sin(t)])
    assert abs(front_statistics(e).perimeter / ellipse_perimeter(2, 1) - 1) < 0.005
    bow = np.column_stack([np.sin(2 * t), np.sin(t)])
    assert front_statistics(bow).self_intersecting
    with pytest.raises(ValueError):
        front_statistics(np.zeros((5, 2)))
