"""The truncated nonlocal curvature term a_eps and its projection abar_eps.

a_eps(xi; x) = int_{|z| < gamma/eps} [phi(xi + D(z)) - phi(xi + grad d . z)] |z|^{-3} dz
with D(z) = (d(x + eps z) - d(x)) / eps, and

abar_eps(x) = (eps |ln eps|)^{-1} int a_eps(xi; x) phi_dot(xi) dxi.

Swapping the order of integration, abar_eps only needs the correlation
F(s) = int phi(xi + s) phi_dot(xi) dxi, which is tabulated once per profile.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .fracops import frac_lap_1d, frac_lap_quadrature, kernel_shell_integrals
from .geometry import DistanceField

QUAD_TOL = 1e-7


@dataclass
class AepsParams:
    eps: float
    gamma: float
    profile: object
    dist: DistanceField
    loop: int = 0

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0 < self.eps < self.gamma:
            raise ValueError("need 0 < eps < gamma")

    @property
    def log_scale(self) -> float:
        """eps |ln eps|."""
        return self.eps * abs(math.log(self.eps))


# ---------------------------------------------------------------------------
# profile correlation


class ProfileCorrelation:
    """F(s) = int phi(xi + s) phi_dot(xi) dxi for a layer profile.

    For the closed-form layer F is the Cauchy(2) distribution function.
    Otherwise F is tabulated on a graded s-grid with the layer quadrature
    weights, the |xi| > Xi tails integrated in t = 1/xi.
    """

    def __init__(self, profile, s_max: float = 1e4, n: int = 1201):
        self.profile = profile
        self.alpha = profile.alpha
        if getattr(profile, "analytic", False):
            self._spline = None
            return
        xi, w = profile.xi, profile.grid.weights
        dphi = profile.dvalues
        Xi = profile.Xi
        gx, gw = np.polynomial.legendre.leggauss(24)
        t = 0.5 * (gx + 1) / Xi
        wt = 0.5 * gw / Xi
        u = np.linspace(-1, 1, n)
        s = s_max * np.sinh(8 * u) / math.sinh(8)
        F = np.empty(n)
        for k, sk in enumerate(s):
            inner = w @ (profile.eval(xi + sk) * dphi)
            # dxi / (alpha xi^2) = dt / alpha with t = +-1/xi
            right = wt @ profile.eval(1 / t + sk) / self.alpha
            left = wt @ profile.eval(-1 / t + sk) / self.alpha
            F[k] = inner + right + left
        self._s_max = s_max
        self._spline = CubicSpline(s, F)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self._spline is None:
            return 0.5 + np.arctan(0.5 * s) / np.pi
        inside = np.abs(s) <= self._s_max
        with np.errstate(divide="ignore"):
            tail = np.heaviside(s, 0.5) - 2.0 / (self.alpha * s)
        return np.where(inside, self._spline(np.clip(s, -self._s_max, self._s_max)), tail)


_CORR_CACHE: dict = {}


def profile_correlation(profile) -> ProfileCorrelation:
    key = id(profile)
    if key not in _CORR_CACHE or _CORR_CACHE[key].profile is not profile:
        _CORR_CACHE[key] = ProfileCorrelation(profile)
    return _CORR_CACHE[key]


# ---------------------------------------------------------------------------
# quadrature in z


def _z_nodes(R: float, per_panel: int, panel: float):
    """Gauss-Legendre nodes on [0, R]: panels of width <= panel, finer below 1."""
    edges = np.concatenate([[0.0, 0.25, 0.5], np.arange(1.0, R, panel), [R]])
    edges = np.unique(edges[edges <= R])
    x, w = np.polynomial.legendre.leggauss(per_panel)
    a, b = edges[:-1, None], edges[1:, None]
    return (0.5 * (b - a) * x + 0.5 * (a + b)).ravel(), (0.5 * (b - a) * w).ravel()


def _shifts(params: AepsParams, x, n_theta: int, per_panel: int, panel: float):
    """Return (b, Delta, weight) on the polar z-grid for the point x."""
    eps, i, df = params.eps, params.loop, params.dist
    x0, y0 = float(x[0]), float(x[1])
    d0 = float(df.evaluate(i, x0, y0))
    gx, gy = (float(v) for v in df.gradient(i, x0, y0))
    r, wr = _z_nodes(params.gamma / eps, per_panel, panel)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    c, s = np.cos(th), np.sin(th)
    b = r[:, None] * (gx * c + gy * s)
    D = (df.evaluate(i, x0 + eps * r[:, None] * c, y0 + eps * r[:, None] * s) - d0) / eps
    # dz / |z|^3 = dr dtheta / r^2
    wgt = (wr / r**2)[:, None] * (2 * np.pi / n_theta)
    return b, D - b, wgt


def _refine(evaluate, tol, n_theta, per_panel, panel, max_refine):
    prev = evaluate(n_theta, per_panel, panel)
    for _ in range(max_refine):
        n_theta, per_panel, panel = 2 * n_theta, per_panel + 4, panel / 2
        cur = evaluate(n_theta, per_panel, panel)
        if np.max(np.abs(cur - prev)) < tol:
            return cur, (n_theta, per_panel, panel)
        prev = cur
    warnings.warn(f"a_eps quadrature not converged to {tol:g} "
                  f"(last change {np.max(np.abs(cur - prev)):.2e})", RuntimeWarning)
    return cur, (n_theta, per_panel, panel)


def a_eps(params: AepsParams, xi, x, *, tol: float = QUAD_TOL, n_theta: int = 512,
          per_panel: int = 8, panel: float = 1.0, max_refine: int = 3, level=None):
    """a_eps(xi; x) for scalar or array xi.

    The z-grid is refined until successive values at a few probe xi differ
    by less than tol; long xi arrays are then evaluated once at that level.
    A fixed ``level = (n_theta, per_panel, panel)`` skips the refinement.
    """
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    phi = params.profile

    def make(points):
        def evaluate(nt, pp, pn):
            b, delta, wgt = _shifts(params, x, nt, pp, pn)
            out = np.empty(points.size)
            for k, s in enumerate(points):
                out[k] = np.sum(wgt * (phi.eval(s + b + delta) - phi.eval(s + b)))
            return out
        return evaluate

    if level is not None:
        val = make(xi_arr)(*level)
    elif xi_arr.size <= 8:
        val, _ = _refine(make(xi_arr), tol, n_theta, per_panel, panel, max_refine)
    else:
        probe = np.array([-5.0, -1.0, 0.0, 1.0, 5.0])
        _, level = _refine(make(probe), tol, n_theta, per_panel, panel, max_refine)
        val = make(xi_arr)(*level)
    return val if np.ndim(xi) else float(val[0])


def a_bar_eps(params: AepsParams, x, *, tol: float = QUAD_TOL, n_theta: int = 512,
              per_panel: int = 8, panel: float = 1.0, max_refine: int = 3) -> float:
    """abar_eps(x) through the profile correlation F."""
    F = profile_correlation(params.profile)

    def evaluate(nt, pp, pn):
        b, delta, wgt = _shifts(params, x, nt, pp, pn)
        return np.array([np.sum(wgt * (F(b + delta) - F(b)))])

    val, _ = _refine(evaluate, tol * params.log_scale, n_theta, per_panel, panel, max_refine)
    return float(val[0]) / params.log_scale


def profile_quantiles(profile, q):
    """xi with phi(xi) = q, by monotone interpolation of the table (tails analytic)."""
    q = np.asarray(q, dtype=float)
    if getattr(profile, "analytic", False):
        return np.tan(np.pi * (q - 0.5))
    lo, hi = profile.values[0], profile.values[-1]
    out = np.interp(q, profile.values, profile.xi)
    out = np.where(q < lo, -1.0 / (profile.alpha * q), out)
    return np.where(q > hi, 1.0 / (profile.alpha * (1.0 - q)), out)


def a_bar_eps_direct(params: AepsParams, x, n_q: int = 64, **kw) -> float:
    """abar_eps(x) by Gauss-Legendre in q = phi(xi) over a_eps samples.

    Independent of the correlation shortcut used by a_bar_eps.
    """
    gq, gw = np.polynomial.legendre.leggauss(n_q)
    xi = profile_quantiles(params.profile, 0.5 * (gq + 1))
    vals = a_eps(params, xi, x, **kw)
    return float(0.5 * gw @ vals) / params.log_scale


def a_eps_identity_check(params: AepsParams, x, *, R_trunc: float | None = None,
                         n_theta: int = 1024) -> dict:
    """Compare a_eps(d(x)/eps; x) with eps I_2[phi(d/eps)](x) - C_2 I_1[phi](d(x)/eps).

    The planar term is the brute-force quadrature oracle applied to the clamped
    field.  Beyond R_trunc the field equals its constant exterior value.
    """
    eps, i, df = params.eps, params.loop, params.dist
    phi = params.profile
    x = np.asarray(x, dtype=float)
    d0 = float(df.evaluate(i, x[0], x[1]))
    xi = d0 / eps
    rho = df.rho

    def u(X, Y):
        return phi.eval(df.evaluate(i, X, Y) / eps)

    c = df.loops.loops[i]
    u_in, u_out = float(phi.eval(2 * rho / eps)), float(phi.eval(-2 * rho / eps))
    if hasattr(c, "sample"):
        # closed loop: beyond R the clamped field is the exterior constant
        extent = float(np.max(np.hypot(*(c.sample() - x).T))) + 2 * rho
        R = extent if R_trunc is None else R_trunc
        far = u_out * kernel_shell_integrals(R, 2)[1]
    else:
        # half-plane: the two constant states split the far shell; the
        # offset s = d-tilde(x) tilts the split by arcsin(s / r)
        s = float(c.dtilde(x[0], x[1]))
        R = 4.0 * rho + abs(s) if R_trunc is None else R_trunc
        w = s / R
        tilt = (w * math.asin(w) + math.sqrt(1 - w * w) - 1) / s if s else 0.0
        far = (u_in + u_out) * math.pi / R + 2 * (u_in - u_out) * tilt
    planar = eps * frac_lap_quadrature(u, x, R, far_mass=lambda _: far,
                                       scale=eps, n_theta=n_theta, per_panel=16)
    one_d = phi.C_n * frac_lap_1d(phi, xi, alpha=phi.alpha)
    a = a_eps(params, xi, x)
    return {"a_eps": a, "eps_In": planar, "Cn_I1": one_d, "residual": abs(a - (planar - one_d))}


# ---------------------------------------------------------------------------
# rate fitting


def fit_power_law(rate, value):
    """Least-squares fit log|value| = p log(rate) + log C.  Returns (p, C)."""
    rate = np.asarray(rate, dtype=float)
    value = np.abs(np.asarray(value, dtype=float))
    p, logC = np.polyfit(np.log(rate), np.log(value), 1)
    return float(p), float(math.exp(logC))


def rate_consistent(rate, value, exponent: float, slack: float = 0.3) -> tuple[bool, float, float]:
    """True if the fitted exponent is within slack of the stated one (or better)."""
    p, C = fit_power_law(rate, value)
    return (p >= exponent - slack) and math.isfinite(C), p, C
