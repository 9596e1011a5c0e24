"""Semi-implicit spectral time stepping, front tracking and curvature-flow references."""
from __future__ import annotations

import json
import logging
import math
import platform
from dataclasses import dataclass, field

import numpy as np
from matplotlib.path import Path
from scipy.spatial import cKDTree

from . import __version__
from .fracops import PeriodicField, compute_Cn, spectral_constant, wavenumber_modulus
from .geometry import LoopConfig, build_initial_condition, extract_fronts, front_statistics
from .potential import Potential

log = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    pass


def dt_max(eps: float, potential: Potential) -> float:
    """eps^2 |ln eps| / (4 max|W''|); the explicit reaction bound is twice as large."""
    return eps**2 * abs(math.log(eps)) / (4.0 * potential.max_abs_Wpp)


@dataclass
class SimConfig:
    eps: float
    loops: LoopConfig
    profile: object
    potential: Potential
    M: int = 1024
    L: float | None = None
    dt: float | None = None
    T_final: float = 0.1
    output_every: int = 20
    stop_radius: float = 0.0
    stop_front: int = -1

    def __post_init__(self):
        if self.L is None:
            self.L = self.loops.L
        h = self.L / self.M
        if h > self.eps / 4 + 1e-15:
            raise ValueError(f"resolution policy h <= eps/4 violated (h={h:g}, eps={self.eps:g})")
        cap = dt_max(self.eps, self.potential)
        if self.dt is None:
            self.dt = cap
        if self.dt > cap * (1 + 1e-12):
            raise ValueError(f"dt={self.dt:g} exceeds the stability cap {cap:g}")

    @property
    def h(self) -> float:
        return self.L / self.M

    @property
    def log_scale(self) -> float:
        return self.eps * abs(math.log(self.eps))

    def constants(self) -> dict:
        p = self.profile
        return {"C_n": compute_Cn(2), "c0": p.c0(), "mu": p.mu(), "alpha": p.alpha,
                "kappa_n": spectral_constant(2), "dt_max": dt_max(self.eps, self.potential)}


class Stepper:
    """First-order IMEX: implicit nonlocal term, explicit reaction."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        kmod = wavenumber_modulus(cfg.M, cfg.L, 2)
        self.denom = 1.0 + cfg.dt * spectral_constant(2) * kmod / cfg.log_scale
        self.react = cfg.dt / (cfg.eps * cfg.log_scale)
        self.nsteps = 0

    def __call__(self, u: np.ndarray) -> np.ndarray:
        rhs = np.fft.rfft2(u - self.react * self.cfg.potential.Wp(u))
        out = np.fft.irfft2(rhs / self.denom, s=u.shape)
        self.nsteps += 1
        if not np.all(np.isfinite(out)):
            raise SimulationError(f"non-finite field after step {self.nsteps} "
                                  f"(dt={self.cfg.dt:g}, max|u|={np.max(np.abs(u)):.3g})")
        return out


def step(u: PeriodicField, cfg: SimConfig) -> PeriodicField:
    return u.like(Stepper(cfg)(u.values))


@dataclass
class FrontTrace:
    times: list = field(default_factory=list)
    fronts: list = field(default_factory=list, repr=False)
    radii: list = field(default_factory=list)
    areas: list = field(default_factory=list)
    plateaus: list = field(default_factory=list)
    u_range: list = field(default_factory=list)
    N: int = 1

    def radius_array(self) -> np.ndarray:
        return np.array(self.radii, dtype=float).reshape(len(self.times), self.N)

    def plateau_array(self) -> np.ndarray:
        return np.array(self.plateaus, dtype=float).reshape(len(self.times), self.N + 1)


def plateau_values(u: PeriodicField, fronts: list, eps: float, erode: float = 3.0) -> list:
    """Mean of u over {inside exactly k fronts}, k = 0..N, eroded by erode*eps."""
    X, Y = u.coords()
    pts = np.column_stack([X.ravel(), Y.ravel()])
    count = np.zeros(pts.shape[0], dtype=int)
    far = np.ones(pts.shape[0], dtype=bool)
    for f in fronts:
        if len(f) < 3:
            continue
        count += Path(f).contains_points(pts)
        dist, _ = cKDTree(f).query(pts, distance_upper_bound=erode * eps)
        far &= ~np.isfinite(dist)
    vals = u.values.ravel()
    out = []
    for k in range(len(fronts) + 1):
        sel = far & (count == k)
        out.append(float(vals[sel].mean()) if sel.any() else float("nan"))
    return out


def _record(trace: FrontTrace, t: float, u: PeriodicField, cfg: SimConfig):
    fronts = extract_fronts(u, trace.N)
    radii, areas = [], []
    for f in fronts:
        if len(f) >= 16:
            st = front_statistics(f)
            radii.append(st.mean_radius)
            areas.append(st.area)
        else:
            radii.append(float("nan"))
            areas.append(0.0)
    trace.times.append(t)
    trace.fronts.append(fronts)
    trace.radii.append(radii)
    trace.areas.append(areas)
    trace.plateaus.append(plateau_values(u, fronts, cfg.eps))
    trace.u_range.append((float(u.values.min()), float(u.values.max())))


def run_simulation(cfg: SimConfig, u0: PeriodicField | None = None) -> FrontTrace:
    """Integrate from the layer initial datum until T_final, extinction or stop_radius."""
    u = u0 if u0 is not None else build_initial_condition(cfg.loops, cfg.eps, cfg.profile,
                                                           cfg.M, cfg.L)
    trace = FrontTrace(N=cfg.loops.N)
    stepper = Stepper(cfg)
    vals = u.values.copy()
    t, n = 0.0, 0
    _record(trace, t, u, cfg)
    nmax = int(math.ceil(cfg.T_final / cfg.dt - 1e-9))
    while n < nmax:
        vals = stepper(vals)
        n += 1
        t = n * cfg.dt
        if n % cfg.output_every == 0 or n == nmax:
            _record(trace, t, u.like(vals), cfg)
            r = trace.radii[-1]
            if all(not np.isfinite(x) for x in r):
                break
            rs = r[cfg.stop_front]
            if cfg.stop_radius > 0 and (not np.isfinite(rs) or rs < cfg.stop_radius):
                break
    trace.final = u.like(vals)
    return trace


def exact_circle_radius(R0: float, mu: float, t):
    t = np.asarray(t, dtype=float)
    T = R0**2 / (2 * mu)
    if np.any(t > T * (1 + 1e-12)) or np.any(t < 0):
        raise ValueError("time outside [0, extinction]")
    return np.sqrt(np.maximum(R0**2 - 2 * mu * t, 0.0))


def circle_law_errors(trace: FrontTrace, R0: float, mu: float, stop: float = 0.3,
                      front: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(t, R_measured, R_exact) while the exact radius is >= stop."""
    t = np.asarray(trace.times)
    R = trace.radius_array()[:, front]
    sel = (t <= (R0**2 - stop**2) / (2 * mu)) & np.isfinite(R)
    return t[sel], R[sel], exact_circle_radius(R0, mu, t[sel])


# ---------------------------------------------------------------------------
# level-set reference


def mcf_levelset_reference(d0: PeriodicField, mu: float, T: float, dt: float | None = None,
                           delta: float = 1e-6, callback=None, every: int = 100) -> PeriodicField:
    """u_t = mu (Lap u - grad u . D^2u grad u / (|grad u|^2 + delta^2)), explicit.

    Ghost cells extrapolate linearly, so affine data are exactly stationary.
    """
    h = d0.h
    cap = h * h / (8 * mu)
    if dt is None:
        dt = cap
    if dt > cap * (1 + 1e-12):
        raise ValueError(f"CFL violated: dt={dt:g} > h^2/(8 mu)={cap:g}")
    n = int(math.ceil(T / dt - 1e-9))
    dt = T / n if n else 0.0
    u = d0.values.copy()
    for k in range(n):
        p = np.pad(u, 1, mode="reflect", reflect_type="odd")
        ux = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2 * h)
        uy = (p[1:-1, 2:] - p[1:-1, :-2]) / (2 * h)
        uxx = (p[2:, 1:-1] - 2 * u + p[:-2, 1:-1]) / h**2
        uyy = (p[1:-1, 2:] - 2 * u + p[1:-1, :-2]) / h**2
        uxy = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / (4 * h * h)
        proj = (ux * ux * uxx + 2 * ux * uy * uxy + uy * uy * uyy) / (ux * ux + uy * uy + delta**2)
        u = u + dt * mu * (uxx + uyy - proj)
        if callback is not None and (k + 1) % every == 0:
            callback((k + 1) * dt, d0.like(u))
    return d0.like(u)


def zero_level_radius(u: PeriodicField) -> float:
    """Effective radius of the longest closed zero contour."""
    from skimage import measure
    best = None
    for c in measure.find_contours(u.values, 0.0):
        if np.allclose(c[0], c[-1]) and (best is None or len(c) > len(best)):
            best = c
    if best is None:
        return float("nan")
    return front_statistics(-0.5 * u.L + u.h * best[:-1]).mean_radius


# ---------------------------------------------------------------------------
# interaction study


def relative_deviation(a, b, stop: float = 0.0) -> np.ndarray:
    """|a - b| / b on frames with control radius b >= stop.

    A front that has already vanished (nan) while its control is still
    tracked counts as a full deviation of 1.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    n = min(a.size, b.size)
    a, b = a[:n], b[:n]
    keep = np.isfinite(b) & (b >= stop)
    dev = np.where(np.isfinite(a), np.abs(a - b) / np.where(keep, b, 1.0), 1.0)
    return dev[keep]


def interaction_drift_study(eps_list, R_outer: float, R_inner: float, profile, potential,
                            T: float, L: float = 4.0, M_of_eps=None, frames: int = 40,
                            stop: float = 0.0):
    """Inner-front deviation of a two-front run from its single-front control.

    The deviation is the largest relative radius gap over frames where the
    control radius is at least ``stop``; frames are spaced evenly in time.
    Returns rows with keys eps, M, separation, deviation and
    scaled = deviation * |ln eps|.
    """
    from .geometry import concentric_circles
    rows = []
    for eps in eps_list:
        M = M_of_eps(eps) if M_of_eps else _min_grid(L, eps)
        every = max(1, int(T / (frames * dt_max(eps, potential))))
        runs = {}
        for key, radii in (("pair", [R_outer, R_inner]), ("single", [R_inner])):
            cfg = SimConfig(eps, concentric_circles(radii, L=L), profile, potential, M=M,
                            T_final=T, output_every=every)
            runs[key] = run_simulation(cfg)
        dev = relative_deviation(runs["pair"].radius_array()[:, -1],
                                 runs["single"].radius_array()[:, 0], stop)
        d = float(dev.max()) if dev.size else float("nan")
        rows.append({"eps": eps, "M": M, "separation": R_outer - R_inner, "deviation": d,
                     "scaled": d * abs(math.log(eps))})
    return rows


def _min_grid(L: float, eps: float) -> int:
    M = 2 ** int(math.ceil(math.log2(4 * L / eps)))
    return M


def write_manifest(path, cfg: SimConfig, extra: dict | None = None) -> dict:
    man = {
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": {"eps": cfg.eps, "L": cfg.L, "M": cfg.M, "dt": cfg.dt, "T_final": cfg.T_final,
                   "output_every": cfg.output_every,
                   "loops": [repr(c) for c in cfg.loops.loops],
                   "potential": cfg.potential.kind},
        "constants": cfg.constants(),
    }
    if extra:
        man.update(extra)
    with open(path, "w") as fh:
        json.dump(man, fh, indent=2, sort_keys=True)
    return man
