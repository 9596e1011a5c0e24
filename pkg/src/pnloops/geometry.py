"""Nested loop geometry, clamped distance fields, initial data and fronts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from matplotlib.path import Path
from scipy.spatial import cKDTree
from scipy.special import ellipe
from shapely.geometry import LinearRing
from skimage import measure

from .fracops import PeriodicField

SAMPLES = 4096


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class Circle:
    center: tuple = (0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("circle radius must be positive")

    def sample(self, n: int = SAMPLES) -> np.ndarray:
        t = 2 * np.pi * np.arange(n) / n
        return np.column_stack([self.center[0] + self.radius * np.cos(t),
                                self.center[1] + self.radius * np.sin(t)])

    def dtilde(self, x, y):
        """Signed distance, positive inside."""
        return self.radius - np.hypot(x - self.center[0], y - self.center[1])

    def local_frame(self, x, y):
        """Unit gradient of d-tilde and the curvature of the curve at the nearest point."""
        dx, dy = x - self.center[0], y - self.center[1]
        r = np.maximum(np.hypot(dx, dy), 1e-300)
        return -dx / r, -dy / r, np.full(np.shape(r), 1.0 / self.radius)

    @property
    def max_curvature(self) -> float:
        return 1.0 / self.radius

    @property
    def inradius(self) -> float:
        return self.radius


@dataclass(frozen=True)
class FourierCurve:
    """Star-shaped curve r(theta) = r0 + sum_k a_k cos k theta + b_k sin k theta."""

    center: tuple = (0.0, 0.0)
    r0: float = 1.0
    a: tuple = ()
    b: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        th = np.linspace(0, 2 * np.pi, 4 * SAMPLES, endpoint=False)
        if np.any(self.r(th) <= 0):
            raise ValueError("Fourier curve radius must stay positive")

    def _coef(self):
        K = max(len(self.a), len(self.b))
        a = np.zeros(K)
        b = np.zeros(K)
        a[:len(self.a)] = self.a
        b[:len(self.b)] = self.b
        return np.arange(1, K + 1), a, b

    def r(self, th, order: int = 0):
        k, a, b = self._coef()
        th = np.asarray(th, dtype=float)[..., None]
        c, s = np.cos(k * th), np.sin(k * th)
        if order == 0:
            return self.r0 + np.sum(a * c + b * s, axis=-1)
        if order == 1:
            return np.sum(k * (-a * s + b * c), axis=-1)
        return np.sum(-k * k * (a * c + b * s), axis=-1)

    def point(self, th, order: int = 0):
        r, r1, r2 = self.r(th), self.r(th, 1), self.r(th, 2)
        c, s = np.cos(th), np.sin(th)
        if order == 0:
            return self.center[0] + r * c, self.center[1] + r * s
        if order == 1:
            return r1 * c - r * s, r1 * s + r * c
        return (r2 - r) * c - 2 * r1 * s, (r2 - r) * s + 2 * r1 * c

    def curvature(self, th):
        r, r1, r2 = self.r(th), self.r(th, 1), self.r(th, 2)
        return (r * r + 2 * r1 * r1 - r * r2) / (r * r + r1 * r1) ** 1.5

    def sample(self, n: int = SAMPLES) -> np.ndarray:
        th = 2 * np.pi * np.arange(n) / n
        return np.column_stack(self.point(th))

    def _tree(self):
        if "tree" not in self._cache:
            th = 2 * np.pi * np.arange(4 * SAMPLES) / (4 * SAMPLES)
            pts = np.column_stack(self.point(th))
            self._cache.update(tree=cKDTree(pts), th=th, path=Path(pts))
        return self._cache

    def nearest(self, x, y):
        """Parameter of the nearest curve point (KD-tree start, Newton polish)."""
        c = self._tree()
        shape = np.shape(x)
        xf, yf = np.ravel(x), np.ravel(y)
        _, idx = c["tree"].query(np.column_stack([xf, yf]))
        th = c["th"][idx]
        for _ in range(4):
            px, py = self.point(th)
            dx, dy = self.point(th, 1)
            ddx, ddy = self.point(th, 2)
            f = (px - xf) * dx + (py - yf) * dy
            fp = dx * dx + dy * dy + (px - xf) * ddx + (py - yf) * ddy
            th = th - f / np.where(np.abs(fp) > 1e-14, fp, 1.0)
        return th.reshape(shape)

    def dtilde(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        th = self.nearest(x, y)
        px, py = self.point(th)
        dist = np.hypot(x - px, y - py)
        inside = self._tree()["path"].contains_points(
            np.column_stack([x.ravel(), y.ravel()])).reshape(x.shape)
        return np.where(inside, dist, -dist)

    def local_frame(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        th = self.nearest(x, y)
        dx, dy = self.point(th, 1)
        s = np.hypot(dx, dy)
        # inward normal of a counter-clockwise curve
        return -dy / s, dx / s, self.curvature(th)

    @property
    def max_curvature(self) -> float:
        th = np.linspace(0, 2 * np.pi, 4 * SAMPLES, endpoint=False)
        return float(np.max(np.abs(self.curvature(th))))

    @property
    def inradius(self) -> float:
        pts = self.sample()
        return float(np.min(np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])))


@dataclass(frozen=True)
class HalfPlane:
    """Flat front {n . x = offset}; the side n . x < offset counts as inside."""

    normal: tuple = (1.0, 0.0)
    offset: float = 0.0

    def _n(self):
        n = np.asarray(self.normal, dtype=float)
        return n / np.linalg.norm(n)

    def dtilde(self, x, y):
        n = self._n()
        return self.offset - (n[0] * np.asarray(x) + n[1] * np.asarray(y))

    def local_frame(self, x, y):
        n = self._n()
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        return np.full(shape, -n[0]), np.full(shape, -n[1]), np.zeros(shape)

    max_curvature = 0.0
    inradius = math.inf


@dataclass
class CurveSet:
    """Unvalidated collection of fronts (e.g. half-planes) for pointwise fields."""

    loops: list
    L: float = 4.0

    @property
    def N(self) -> int:
        return len(self.loops)


def _min_curve_distance(c1, c2) -> float:
    p1, p2 = c1.sample(), c2.sample()
    dist, _ = cKDTree(p1).query(p2)
    return float(dist.min())


@dataclass
class LoopConfig:
    """Strictly nested closed loops, outermost first, in a periodic box of side L."""

    loops: list
    L: float = 4.0
    delta_sep: float = 1e-3

    def __post_init__(self):
        if not self.loops:
            raise ValueError("at least one loop is required")
        for c in self.loops:
            pts = c.sample()
            if np.max(np.abs(pts)) > self.L / 4 + 1e-12:
                raise ValueError("loops must lie in the central L/2 x L/2 sub-box")
        for outer, inner in zip(self.loops, self.loops[1:]):
            if np.any(outer.dtilde(*inner.sample().T) <= 0):
                raise ValueError("loops are not strictly nested")
            if _min_curve_distance(outer, inner) < self.delta_sep:
                raise ValueError("loop separation below delta_sep")

    @property
    def N(self) -> int:
        return len(self.loops)

    def min_separation(self) -> float:
        seps = [_min_curve_distance(a, b) for a, b in zip(self.loops, self.loops[1:])]
        return min(seps) if seps else math.inf

    def default_rho(self) -> float:
        """0.4 x the smaller of the loop separation and the smallest curvature radius."""
        reach = min(min(1.0 / c.max_curvature, c.inradius) for c in self.loops)
        return 0.4 * min(self.min_separation(), reach)


def concentric_circles(radii, center=(0.0, 0.0), L: float = 4.0) -> LoopConfig:
    radii = sorted(radii, reverse=True)
    return LoopConfig([Circle(tuple(center), float(r)) for r in radii], L)


# ---------------------------------------------------------------------------
# clamped extension


def _smoothstep(s, order=0):
    s = np.clip(s, 0.0, 1.0)
    if order == 0:
        return s**3 * (10 - 15 * s + 6 * s * s)
    if order == 1:
        return 30 * s * s * (s - 1) ** 2
    return 60 * s * (2 * s * s - 3 * s + 1)


def extension_map(dt, rho: float, order: int = 0):
    """The clamp E with d = E(d-tilde), or its first or second derivative."""
    dt = np.asarray(dt, dtype=float)
    a = np.abs(dt)
    s = (a - rho) / rho
    eta = 1.0 - _smoothstep(s)
    if order == 0:
        return np.sign(dt) * (a * eta + 2 * rho * (1 - eta))
    eta1 = -_smoothstep(s, 1) / rho
    if order == 1:
        return eta + (a - 2 * rho) * eta1
    eta2 = -_smoothstep(s, 2) / rho**2
    return np.sign(dt) * (2 * eta1 + (a - 2 * rho) * eta2)


def smooth_extension(dt, rho: float):
    """Clamped extension: d-tilde on |d-tilde| <= rho, +-2 rho beyond 2 rho."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    if isinstance(dt, PeriodicField):
        return dt.like(extension_map(dt.values, rho))
    return extension_map(dt, rho)


# ---------------------------------------------------------------------------
# distance fields


def _check_grid(loops: LoopConfig, L: float, M: int):
    h = L / M
    if loops.N > 1 and loops.min_separation() < 2 * h:
        raise ValueError(f"grid spacing {h:g} too coarse to separate the loops")


def signed_distance(loops: LoopConfig, i: int, L: float, M: int) -> PeriodicField:
    """Unclamped signed distance to loop i (positive inside) on the periodic grid."""
    _check_grid(loops, L, M)
    c = loops.loops[i]
    return PeriodicField.from_function(c.dtilde, L, M)


@dataclass
class DistanceField:
    """Clamped distance functions d_i with pointwise derivatives."""

    loops: LoopConfig
    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    @classmethod
    def from_loops(cls, loops: LoopConfig, rho: float | None = None) -> "DistanceField":
        return cls(loops, loops.default_rho() if rho is None else rho)

    @property
    def N(self) -> int:
        return self.loops.N

    def dtilde(self, i: int, x, y):
        return self.loops.loops[i].dtilde(x, y)

    def evaluate(self, i: int, x, y):
        return extension_map(self.dtilde(i, x, y), self.rho)

    def gradient(self, i: int, x, y):
        c = self.loops.loops[i]
        gx, gy, _ = c.local_frame(x, y)
        e1 = extension_map(c.dtilde(x, y), self.rho, 1)
        return e1 * gx, e1 * gy

    def hessian(self, i: int, x, y):
        """(d_xx, d_xy, d_yy) of the clamped field."""
        c = self.loops.loops[i]
        dt = c.dtilde(x, y)
        gx, gy, k = c.local_frame(x, y)
        e1 = extension_map(dt, self.rho, 1)
        e2 = extension_map(dt, self.rho, 2)
        # Hess d-tilde = -k / (1 - k d-tilde) t t^T with t = (-gy, gx)
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = np.where(np.abs(dt) < 2 * self.rho, -k / (1 - k * dt), 0.0)
        tx, ty = -gy, gx
        return (e2 * gx * gx + e1 * lam * tx * tx,
                e2 * gx * gy + e1 * lam * tx * ty,
                e2 * gy * gy + e1 * lam * ty * ty)

    def laplacian(self, i: int, x, y):
        dxx, _, dyy = self.hessian(i, x, y)
        return dxx + dyy

    def field(self, i: int, L: float, M: int, clamped: bool = True) -> PeriodicField:
        _check_grid(self.loops, L, M)
        f = self.evaluate if clamped else self.dtilde
        return PeriodicField.from_function(lambda X, Y: f(i, X, Y), L, M)


def build_initial_condition(loops: LoopConfig, eps: float, profile, M: int,
                            L: float | None = None) -> PeriodicField:
    """u_0 = sum_i phi(d-tilde_i / eps) with the unclamped signed distances."""
    L = loops.L if L is None else L
    h = L / M
    if eps < 4 * h:
        raise ValueError(f"interface under-resolved: eps={eps:g} < 4h={4 * h:g}")
    _check_grid(loops, L, M)
    u = np.zeros((M, M))
    X, Y = PeriodicField(u, L).coords()
    for c in loops.loops:
        u += profile.eval(c.dtilde(X, Y) / eps)
    return PeriodicField(u, L)


# ---------------------------------------------------------------------------
# fronts


def extract_fronts(u: PeriodicField, N: int) -> list:
    """Closed level-(i - 1/2) polylines, outermost (i = 1) first.

    A missing contour (extinct front) is returned as an empty (0, 2) array.
    Where several closed pieces exist the longest one is kept.
    """
    out = []
    h, x0 = u.h, -0.5 * u.L
    for i in range(1, N + 1):
        level = i - 0.5
        best = np.zeros((0, 2))
        if u.values.min() < level < u.values.max():
            for c in measure.find_contours(u.values, level):
                if len(c) < 4 or not np.allclose(c[0], c[-1]):
                    continue
                if len(c) > len(best):
                    best = x0 + h * c[:-1]
        out.append(best)
    return out


@dataclass
class FrontStats:
    area: float
    perimeter: float
    mean_radius: float
    curvature: np.ndarray = field(repr=False)
    self_intersecting: bool = False


def front_statistics(poly) -> FrontStats:
    """Shoelace area, arc length, effective radius and 5-point curvature."""
    P = np.asarray(poly, dtype=float)
    if len(P) > 1 and np.allclose(P[0], P[-1]):
        P = P[:-1]
    if len(P) < 16:
        raise ValueError("closed polyline needs at least 16 vertices")
    x, y = P[:, 0], P[:, 1]
    signed = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    area = abs(signed)
    perim = float(np.sum(np.hypot(np.diff(x, append=x[0]), np.diff(y, append=y[0]))))
    # circumscribed circle through vertices i-2, i, i+2
    A, B, C = np.roll(P, 2, axis=0), P, np.roll(P, -2, axis=0)
    cross = (B[:, 0] - A[:, 0]) * (C[:, 1] - A[:, 1]) - (B[:, 1] - A[:, 1]) * (C[:, 0] - A[:, 0])
    ab = np.hypot(*(B - A).T)
    bc = np.hypot(*(C - B).T)
    ca = np.hypot(*(A - C).T)
    kappa = 2.0 * cross / (ab * bc * ca) * np.sign(signed)
    simple = LinearRing(P).is_simple
    return FrontStats(float(area), perim, math.sqrt(area / math.pi), kappa, not simple)


def ellipse_perimeter(a: float, b: float) -> float:
    """Perimeter of the ellipse with semi-axes a, b via the complete elliptic integral."""
    a, b = max(a, b), min(a, b)
    return 4.0 * a * float(ellipe(1.0 - (b / a) ** 2))
