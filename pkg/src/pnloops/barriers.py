"""Barrier v = sum phi((d_i - s)/eps) + eps|ln eps| sum psi_i - s eps|ln eps| for shrinking circles.

Each d_i is the clamped distance to a circle of radius R_i(t) = R_i(0) - C t
around a common centre.  The correctors psi_i(xi; t, x) only depend on
(R_i(t), |x - centre|), so they are tabulated on a radial grid per time level
and interpolated bicubically in (r, xi).
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .aeps import AepsParams, a_eps
from .corrector import CorrectorProblem, solve_corrector
from .fracops import PeriodicField, frac_lap_spectral
from .geometry import Circle, CurveSet, DistanceField, extension_map
from .potential import Potential

log = logging.getLogger(__name__)

AEPS_LEVEL = (512, 8, 1.0)


class BarrierError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# corrector tables


@dataclass
class CorrectorTable:
    """psi(xi; r) for one circle of radius R, on radial nodes r_k."""

    R: float
    r: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    abar: np.ndarray = field(repr=False)

    def __post_init__(self):
        self._spline = RectBivariateSpline(self.r, self.xi, self.psi, kx=3, ky=3)

    def __call__(self, xi, r):
        xi = np.asarray(xi, dtype=float)
        r = np.clip(np.asarray(r, dtype=float), self.r[0], self.r[-1])
        inside = np.abs(xi) < self.xi[-1]
        val = self._spline(r, np.clip(xi, self.xi[0], self.xi[-1]), grid=False)
        return np.where(inside, val, 0.0)


def radial_nodes(R_max: float, rho: float, gamma: float, r_step: float = 0.05) -> np.ndarray:
    """Nodes on [0, R_max + 2 rho + gamma + 2 r_step], beyond which a_eps vanishes."""
    r_max = R_max + 2 * rho + gamma + 2 * r_step
    return np.linspace(0.0, r_max, int(math.ceil(r_max / r_step)) + 1)


def build_corrector_table(R: float, rho: float, eps: float, gamma: float, sigma_tilde: float,
                          profile, potential: Potential, r_step: float = 0.05,
                          xi_stride: int = 10, r: np.ndarray | None = None) -> CorrectorTable:
    """Solve the corrector on radial nodes covering every r where a_eps can be nonzero.

    a_eps is evaluated on every ``xi_stride``-th layer node, spline-interpolated
    to the full grid, and abar is the layer quadrature of those samples so the
    solvability condition holds to rounding.  Tables that are differenced in
    time must share the radial nodes ``r``.
    """
    r = radial_nodes(R, rho, gamma, r_step) if r is None else np.asarray(r, dtype=float)
    df = DistanceField(CurveSet([Circle((0.0, 0.0), R)]), rho)
    params = AepsParams(eps, gamma, profile, df)
    xi = profile.xi
    sub = np.unique(np.r_[np.arange(0, xi.size, xi_stride), xi.size - 1])
    w, dphi = profile.grid.weights, profile.dvalues
    log_scale = params.log_scale
    psi = np.empty((r.size, xi.size))
    abar = np.empty(r.size)
    for k, rk in enumerate(r):
        a_sub = a_eps(params, xi[sub], (rk, 0.0), level=AEPS_LEVEL)
        a = CubicSpline(xi[sub], a_sub)(xi)
        tail = (a[0] + a[-1]) / (2 * profile.alpha * profile.Xi)
        abar[k] = (w @ (a * dphi) + tail) / log_scale
        prob = CorrectorProblem(eps, sigma_tilde, profile, potential, a, abar[k], (rk, 0.0))
        psi[k] = solve_corrector(prob).psi
    return CorrectorTable(R, r, xi, psi, abar)


# ---------------------------------------------------------------------------
# barrier specification


@dataclass
class BarrierSpec:
    """Concentric shrinking circles R_i(t) = R_i(0) - C t, outermost first."""

    radii0: tuple
    C: float
    rho: float
    sigma_tilde: float
    eps: float
    gamma: float
    profile: object
    potential: Potential
    L: float = 4.0
    M: int = 1024
    with_correctors: bool = True
    r_step: float = 0.05
    tables: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.radii0 = tuple(sorted(self.radii0, reverse=True))
        if self.L / self.M > self.eps / 4:
            raise BarrierError(f"under-resolved: h={self.L / self.M:g} > eps/4")
        if not 0 < self.eps < self.gamma < 1:
            raise BarrierError("need 0 < eps < gamma < 1")

    @classmethod
    def shrinking_circles(cls, radii0, eps: float, sigma_tilde: float, profile, potential,
                          rho: float | None = None, gamma: float = 0.5, margin: float = 1.25,
                          t_max: float = 0.0, **kw) -> "BarrierSpec":
        """Choose C = margin * (mu / (R_min(t_max) - rho) + c0 sigma) so that
        d_t d <= mu Lap d - c0 sigma holds on every Q_rho."""
        radii0 = sorted(radii0, reverse=True)
        gaps = [a - b for a, b in zip(radii0, radii0[1:])]
        if rho is None:
            rho = 0.4 * min(gaps + [radii0[-1]])
        c0 = profile.c0()
        mu = profile.mu()
        sigma = float(potential.Wpp(0.0)) * sigma_tilde
        C = margin * (mu / (radii0[-1] - rho) + c0 * sigma)
        # account for the shrinkage over [0, t_max] by iterating once
        if t_max > 0:
            C = margin * (mu / (radii0[-1] - C * t_max - rho) + c0 * sigma)
        return cls(tuple(radii0), C, rho, sigma_tilde, eps, gamma, profile, potential, **kw)

    @property
    def N(self) -> int:
        return len(self.radii0)

    @property
    def sigma(self) -> float:
        return float(self.potential.Wpp(0.0)) * self.sigma_tilde

    @property
    def log_scale(self) -> float:
        return self.eps * abs(math.log(self.eps))

    def radius(self, i: int, t: float) -> float:
        return self.radii0[i] - self.C * t

    def check_conditions(self, t: float) -> dict:
        """Band disjointness and the supersonic shrinkage condition at time t."""
        R = [self.radius(i, t) for i in range(self.N)]
        if min(R) - self.rho <= 0:
            raise BarrierError("innermost circle too small for the clamp scale")
        mu, c0 = self.profile.mu(), self.profile.c0()
        # d_t d - mu Lap d = -C + mu / r, worst at r = R_i - rho
        mc = max(-self.C + mu / (Ri - self.rho) for Ri in R) + c0 * self.sigma
        disjoint = all(a - b > 2 * self.sigma_tilde for a, b in zip(R, R[1:]))
        return {"mc_margin": mc, "mc_ok": mc <= 0, "bands_disjoint": disjoint,
                "rho_gt_2sigma": self.rho > 2 * self.sigma_tilde}

    def _key(self, i, t):
        return round(self.radius(i, t), 12)

    def prepare(self, times) -> None:
        """Build (or reuse) the corrector tables needed at the given times."""
        if not self.with_correctors:
            return
        # one radial grid for all time levels keeps time differences smooth
        r = radial_nodes(max(self.radii0), self.rho, self.gamma, self.r_step)
        for t in times:
            for i in range(self.N):
                key = self._key(i, t)
                if key not in self.tables:
                    log.info("corrector table R=%.6f", key)
                    self.tables[key] = build_corrector_table(
                        key, self.rho, self.eps, self.gamma, self.sigma_tilde,
                        self.profile, self.potential, self.r_step, r=r)

    def distance(self, i: int, t: float, X, Y):
        return extension_map(self.radius(i, t) - np.hypot(X, Y), self.rho)


def build_barrier(spec: BarrierSpec, t: float, X, Y):
    """v(t, x) at points (X, Y) (arrays); raises if a corrector table is missing."""
    X, Y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
    r = np.hypot(X, Y)
    ls = spec.log_scale
    v = np.full(np.broadcast(X, Y).shape, -spec.sigma_tilde * ls)
    for i in range(spec.N):
        xi = (spec.distance(i, t, X, Y) - spec.sigma_tilde) / spec.eps
        v = v + spec.profile.eval(xi)
        if spec.with_correctors:
            table = spec.tables.get(spec._key(i, t))
            if table is None:
                raise BarrierError(f"missing corrector for front {i} at t={t:g}")
            v = v + ls * table(xi, r)
    return v


# ---------------------------------------------------------------------------
# subsolution check


@dataclass
class SubsolutionReport:
    t: float
    worst: float
    threshold: float
    passed: bool
    band_worst: list
    lattice_worst: float
    samples: list = field(default_factory=list, repr=False)
    conditions: dict = field(default_factory=dict)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "x", "y", "band", "J", "threshold"])
            for row in self.samples:
                wr.writerow([f"{v:.10g}" if isinstance(v, float) else v for v in row])


def residual_field(spec: BarrierSpec, t: float, dt: float | None = None) -> tuple:
    """J[v] = eps d_t v - (eps I_2 v - W'(v)) / (eps|ln eps|) on the periodic grid.

    d_t by centred differences with step dt; I_2 spectrally.
    """
    if dt is None:
        dt = 1e-3 * spec.radii0[-1] / spec.C
    spec.prepare([t - dt, t, t + dt])
    X, Y = PeriodicField(np.zeros((spec.M, spec.M)), spec.L).coords()
    v = build_barrier(spec, t, X, Y)
    vt = (build_barrier(spec, t + dt, X, Y) - build_barrier(spec, t - dt, X, Y)) / (2 * dt)
    In = frac_lap_spectral(PeriodicField(v, spec.L)).values
    J = spec.eps * vt - (spec.eps * In - spec.potential.Wp(v)) / spec.log_scale
    return X, Y, v, J


def check_subsolution(spec: BarrierSpec, t: float = 0.0, *, lattice_stride: int = 8,
                      n_report: int = 2000, seed: int = 0) -> SubsolutionReport:
    """Worst J over the front bands |d_i - s| <= |ln eps|^{-1/2} plus a coarse lattice.

    PASS iff the worst value is <= -sigma/4.
    """
    X, Y, v, J = residual_field(spec, t)
    band_w = abs(math.log(spec.eps)) ** -0.5
    threshold = -spec.sigma / 4
    band_worst, masks = [], []
    for i in range(spec.N):
        m = np.abs(spec.distance(i, t, X, Y) - spec.sigma_tilde) <= band_w
        masks.append(m)
        band_worst.append(float(J[m].max()) if m.any() else float("nan"))
    lattice = np.zeros_like(J, dtype=bool)
    lattice[::lattice_stride, ::lattice_stride] = True
    worst = max([float(J[lattice].max())] + [b for b in band_worst if np.isfinite(b)])
    rng = np.random.default_rng(seed)
    rows = []
    for label, m in [*((f"band{i + 1}", m) for i, m in enumerate(masks)), ("lattice", lattice)]:
        idx = np.flatnonzero(m)
        pick = rng.choice(idx, size=min(n_report // (spec.N + 1), idx.size), replace=False)
        pick.sort()
        for k in pick:
            rows.append((float(t), float(X.flat[k]), float(Y.flat[k]), label, float(J.flat[k]),
                         float(threshold)))
    return SubsolutionReport(t, worst, threshold, worst <= threshold, band_worst,
                             float(J[lattice].max()), rows, spec.check_conditions(t))


def plateau_check(spec: BarrierSpec, t: float = 0.0) -> dict:
    """Plateau bound v >= N - 2 s eps|ln eps| on {d_N - s >= C / (s |ln eps|)}.

    Returns the smallest threshold on d_N - s above which the bound holds at
    every grid point (inf if it fails even at the deepest points), together
    with the constant C it corresponds to and the worst deficit at the deepest
    points.
    """
    spec.prepare([t])
    X, Y = PeriodicField(np.zeros((spec.M, spec.M)), spec.L).coords()
    v = build_barrier(spec, t, X, Y)
    dN = spec.distance(spec.N - 1, t, X, Y) - spec.sigma_tilde
    target = spec.N - 2 * spec.sigma_tilde * spec.log_scale
    order = np.argsort(dN, axis=None)[::-1]
    ok = v.flat[order] >= target
    # longest prefix (deepest points first) on which the bound holds
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        thr = float(dN.flat[order[-1]])
    elif bad[0] == 0:
        thr = math.inf
    else:
        thr = float(dN.flat[order[bad[0] - 1]])
    deepest = dN >= dN.max() - 1e-12
    s_ln = spec.sigma_tilde * abs(math.log(spec.eps))
    return {"threshold": thr, "C_required": thr * s_ln, "target": target,
            "min_v_deepest": float(v[deepest].min()),
            "deficit": float(target - v[deepest].min()),
            "max_d_minus_s": float(dN.max()), "holds": math.isfinite(thr)}
