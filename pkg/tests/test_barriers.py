import math

import numpy as np
import pytest

from pnloops.barriers import BarrierError, BarrierSpec, build_barrier, plateau_check, radial_nodes
from pnloops.fracops import PeriodicField


def spec(exact, W, radii=(1.0,), **kw):
    kw.setdefault("M", 256)
    kw.setdefault("with_correctors", False)
    return BarrierSpec.shrinking_circles(radii, 0.1, kw.pop("sigma_tilde", 0.05), exact, W, **kw)


def test_degenerate_assembly(exact, W):
    s = spec(exact, W, sigma_tilde=0.0)
    X, Y = PeriodicField(np.zeros((256, 256)), 4.0).coords()
    v = build_barrier(s, 0.0, X, Y)
    ref = exact.eval(s.distance(0, 0.0, X, Y) / s.eps)
    assert np.array_equal(v, ref)


def test_missing_table(exact, W):
    s = spec(exact, W, with_correctors=True)
    with pytest.raises(BarrierError, match="missing"):
        build_barrier(s, 0.0, np.zeros(3), np.zeros(3))


def test_rejections(exact, W):
    with pytest.raises(BarrierError, match="under-resolved"):
        spec(exact, W, M=64)
    with pytest.raises(BarrierError):
        spec(exact, W, gamma=0.05)
    s = spec(exact, W)
    with pytest.raises(BarrierError):
        s.check_conditions(1.0 / s.C)


def test_conditions(exact, W):
    s = spec(exact, W, radii=(1.0, 0.5))
    c = s.check_conditions(0.0)
    assert c["mc_ok"] and c["bands_disjoint"] and c["rho_gt_2sigma"]
    assert s.rho == pytest.approx(0.2)
    assert s.sigma == pytest.approx(2 * math.pi * 0.05)
    assert s.radius(0, 0.01) == pytest.approx(1.0 - 0.01 * s.C)


def test_plateau_without_correctors(exact, W):
    s = spec(exact, W, radii=(1.0, 0.5))
    p = plateau_check(s)
    assert p["target"] == pytest.approx(2 - 2 * 0.05 * 0.1 * math.log(10))
    assert p["max_d_minus_s"] == pytest.approx(2 * s.rho - 0.05)


def test_radial_nodes():
    r = radial_nodes(1.0, 0.4, 0.5, 0.05)
    assert r[0] == 0.0 and r[-1] >= 1.0 + 0.8 + 0.5
    assert np.allclose(np.diff(r), np.diff(r)[0])
