"""The one-dimensional layer solution phi of C_n I_1[phi] = W'(phi).

The profile is tabulated on a symmetric sinh-graded grid and continued
analytically by H(xi) - 1/(alpha xi) outside the table.  The same grid
carries the cubic-spline collocation matrix of I_1 used by the corrector.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .fracops import asymptotic_tail, compute_Cn
from .potential import Potential

log = logging.getLogger(__name__)


class ProfileSolveError(RuntimeError):
    """Raised when the layer iteration fails to converge."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


def exact_profile(xi):
    """Closed-form layer for the calibrated cosine: 1/2 + arctan(xi)/pi."""
    return 0.5 + np.arctan(xi) / np.pi


def _exact_eval(xi, order):
    xi = np.asarray(xi, dtype=float)
    if order == 0:
        return exact_profile(xi)
    if order == 1:
        return 1.0 / (np.pi * (1.0 + xi * xi))
    if order == 2:
        return -2.0 * xi / (np.pi * (1.0 + xi * xi) ** 2)
    raise ValueError("order must be 0, 1 or 2")


# ---------------------------------------------------------------------------
# grid, spline and collocation machinery


def graded_grid(Xi: float = 200.0, m: int = 2001, core_ratio: float = 0.05) -> np.ndarray:
    """Symmetric sinh-stretched grid on [-Xi, Xi] with a node at 0.

    The spacing at the origin is about core_ratio * Xi / m.
    """
    if m % 2 == 0:
        m += 1
    # central spacing ~ Xi * beta / sinh(beta) * 2 / (m - 1)
    target = core_ratio * (m - 1) / (2.0 * m)
    beta = brentq(lambda b: b / math.sinh(b) - target, 1e-6, 50.0)
    s = np.linspace(-1.0, 1.0, m)
    xi = Xi * np.sinh(beta * s) / math.sinh(beta)
    xi[m // 2] = 0.0
    return xi


def natural_spline_operator(x: np.ndarray) -> np.ndarray:
    """Matrix S with M = S v the second derivatives of the natural spline of v."""
    m = x.size
    h = np.diff(x)
    ab = np.zeros((3, m - 2))
    ab[0, 1:] = h[1:-1] / 6.0
    ab[1, :] = (h[:-1] + h[1:]) / 3.0
    ab[2, :-1] = h[1:-1] / 6.0
    B = np.zeros((m - 2, m))
    idx = np.arange(m - 2)
    B[idx, idx] = 1.0 / h[:-1]
    B[idx, idx + 1] = -1.0 / h[:-1] - 1.0 / h[1:]
    B[idx, idx + 2] = 1.0 / h[1:]
    S = np.zeros((m, m))
    S[1:-1] = linalg.solve_banded((1, 1), ab, B)
    return S


def spline_weights(x: np.ndarray, S: np.ndarray | None = None) -> np.ndarray:
    """Weights w with sum(w * v) = integral over [x_0, x_end] of the spline of v."""
    if S is None:
        S = natural_spline_operator(x)
    h = np.diff(x)
    w = np.zeros(x.size)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    corr = np.zeros(x.size)
    corr[:-1] -= h**3 / 24.0
    corr[1:] -= h**3 / 24.0
    return w + corr @ S


def _finite_part_moments(t0, t1, c):
    """f.p. int_{t0}^{t1} t^p / (t - c)^2 dt for p = 0..3 in closed form.

    Endpoint evaluations at t = c drop the divergent -1/u and log terms.
    """
    out = []
    ua, ub = t0 - c, t1 - c

    def prim(u, p):
        with np.errstate(divide="ignore", invalid="ignore"):
            zero = np.abs(u) < 1e-300
            inv = np.where(zero, 0.0, -1.0 / np.where(zero, 1.0, u))
            lg = np.where(zero, 0.0, np.log(np.abs(np.where(zero, 1.0, u))))
        if p == 0:
            return inv
        if p == 1:
            return lg + c * inv
        if p == 2:
            return u + 2 * c * lg + c * c * inv
        return 0.5 * u * u + 3 * c * u + 3 * c * c * lg + c**3 * inv

    for p in range(4):
        out.append(prim(ub, p) - prim(ua, p))
    return out


def collocation_matrix(x: np.ndarray, S: np.ndarray | None = None,
                       points: np.ndarray | None = None, near: float = 2.5,
                       n_gauss: int = 10) -> np.ndarray:
    """Matrix A with (A v)_i = f.p. int_{x_0}^{x_end} s_v(y) / (y - p_i)^2 dy.

    s_v is the natural cubic spline of the nodal values v.  With v extended by
    zero outside the table this is exactly I_1 of the extension at p_i; other
    continuations add their own tail integral (see ``asymptotic_tail``).
    """
    if S is None:
        S = natural_spline_operator(x)
    if points is None:
        points = x
    m = x.size
    a, h = x[:-1], np.diff(x)
    gx, gw = np.polynomial.legendre.leggauss(n_gauss)
    gx = 0.5 * (gx + 1.0)
    gw = 0.5 * gw
    Av = np.zeros((points.size, m))
    AM = np.zeros((points.size, m))
    chunk = max(1, 4_000_000 // (m * n_gauss))
    for start in range(0, points.size, chunk):
        p = points[start:start + chunk, None]
        c = p - a[None, :]                       # singularity in local t = y - a
        hh = np.broadcast_to(h, c.shape)
        far = (c < -near * hh) | (c > (1.0 + near) * hh)
        # Gauss-Legendre for intervals well separated from the evaluation point
        t = hh[..., None] * gx
        ker = gw * hh[..., None] / (t - c[..., None]) ** 2
        Wg = [np.sum(ker * t**q, axis=-1) for q in range(4)]
        Wa = _finite_part_moments(0.0, hh, c)
        W0, W1, W2, W3 = [np.where(far, g, an) for g, an in zip(Wg, Wa)]
        hk = hh
        cv0 = W0 - W1 / hk
        cv1 = W1 / hk
        cm0 = -W1 * hk / 3.0 + W2 / 2.0 - W3 / (6.0 * hk)
        cm1 = -W1 * hk / 6.0 + W3 / (6.0 * hk)
        rows = slice(start, start + p.shape[0])
        Av[rows, :-1] += cv0
        Av[rows, 1:] += cv1
        AM[rows, :-1] += cm0
        AM[rows, 1:] += cm1
    return Av + AM @ S


def spline_derivative(x: np.ndarray, v: np.ndarray, S: np.ndarray) -> np.ndarray:
    M = S @ v
    h = np.diff(x)
    d = np.empty_like(v)
    d[:-1] = (v[1:] - v[:-1]) / h - h * (2 * M[:-1] + M[1:]) / 6.0
    d[-1] = (v[-1] - v[-2]) / h[-1] + h[-1] * (M[-2] + 2 * M[-1]) / 6.0
    return d


@dataclass
class LayerGrid:
    """Graded grid with its spline operator, quadrature weights and I_1 matrix."""

    xi: np.ndarray
    S: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, Xi: float = 200.0, m: int = 2001) -> "LayerGrid":
        """Build (or fetch from the per-process cache) the grid for (Xi, m)."""
        key = (float(Xi), int(m))
        if key not in _GRID_CACHE:
            _GRID_CACHE[key] = cls._build(Xi, m)
        return _GRID_CACHE[key]

    @classmethod
    def _build(cls, Xi, m):
        xi = graded_grid(Xi, m)
        S = natural_spline_operator(xi)
        return cls(xi, S, spline_weights(xi, S), collocation_matrix(xi, S))

    @property
    def Xi(self) -> float:
        return float(self.xi[-1])

    def tail(self, alpha: float) -> np.ndarray:
        """I_1 contribution of the continuation H - 1/(alpha y) beyond the table."""
        X = self.Xi
        inner = np.abs(self.xi) < X
        out = np.full(self.xi.size, np.nan)
        out[inner] = [asymptotic_tail(float(s), X, alpha) for s in self.xi[inner]]
        return out


_GRID_CACHE: dict = {}


# ---------------------------------------------------------------------------
# profile


@dataclass
class LayerProfile:
    """Tabulated monotone layer with analytic tail continuation."""

    grid: LayerGrid = field(repr=False)
    values: np.ndarray = field(repr=False)
    dvalues: np.ndarray = field(repr=False)
    alpha: float
    C_n: float = 2.0
    C_fit: float = float("nan")
    analytic: bool = False
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self._p0 = PchipInterpolator(self.grid.xi, self.values, extrapolate=False)
        self._p1 = PchipInterpolator(self.grid.xi, self.dvalues, extrapolate=False)
        self._p2 = self._p1.derivative()

    @classmethod
    def exact(cls, Xi: float = 200.0, m: int = 2001, grid: LayerGrid | None = None,
              n: int = 2) -> "LayerProfile":
        """Closed-form calibrated-cosine layer evaluated analytically."""
        grid = grid or LayerGrid.build(Xi, m)
        pot = Potential.calibrated_cosine(n)
        prof = cls(grid, _exact_eval(grid.xi, 0), _exact_eval(grid.xi, 1), pot.alpha,
                   compute_Cn(n), analytic=True)
        prof.C_fit = prof._fit_tail_constant()
        return prof

    @property
    def xi(self) -> np.ndarray:
        return self.grid.xi

    @property
    def Xi(self) -> float:
        return self.grid.Xi

    def eval(self, xi, order: int = 0):
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        if self.analytic:
            return _exact_eval(xi, order)
        xi = np.asarray(xi, dtype=float)
        inside = np.abs(xi) <= self.Xi
        interp = (self._p0, self._p1, self._p2)[order]
        with np.errstate(divide="ignore"):
            if order == 0:
                tail = np.heaviside(xi, 0.5) - 1.0 / (self.alpha * xi)
            elif order == 1:
                tail = 1.0 / (self.alpha * xi * xi)
            else:
                tail = -2.0 / (self.alpha * xi**3)
        return np.where(inside, interp(np.where(inside, xi, 0.0)), tail)

    def __call__(self, xi):
        return self.eval(xi, 0)

    def dot(self, xi):
        return self.eval(xi, 1)

    def ddot(self, xi):
        return self.eval(xi, 2)

    def integrate(self, f_nodes: np.ndarray, tail_right: float = 0.0,
                  tail_left: float = 0.0) -> float:
        """Integral of nodal data over the table plus caller-supplied tail pieces."""
        return float(self.grid.weights @ f_nodes) + tail_right + tail_left

    def c0(self) -> float:
        """c_0 = 1 / int phi_dot^2, with the analytic tail 2/(3 alpha^2 Xi^3)."""
        d = self.dvalues
        tail = 2.0 / (3.0 * self.alpha**2 * self.Xi**3)
        return 1.0 / self.integrate(d * d, tail)

    def mu(self, n: int = 2) -> float:
        """Velocity constant (c_0 / 2) |S^{n-2}| / (n - 1)."""
        from .fracops import sphere_area
        return 0.5 * self.c0() * sphere_area(n - 2) / (n - 1)

    def fit_alpha(self, lo: float = 20.0, hi: float | None = None) -> float:
        """Least-squares tail coefficient from xi (H - phi) = 1/alpha + b/xi."""
        hi = self.Xi / 2 if hi is None else hi
        xi = self.xi
        sel = (np.abs(xi) >= lo) & (np.abs(xi) <= hi)
        y = xi[sel] * (np.heaviside(xi[sel], 0.5) - self.values[sel])
        X = np.column_stack([np.ones(sel.sum()), 1.0 / np.abs(xi[sel])])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        return 1.0 / coef[0]

    def _fit_tail_constant(self) -> float:
        xi = self.xi
        sel = np.abs(xi) >= 1.0
        err = self.values[sel] - np.heaviside(xi[sel], 0.5) + 1.0 / (self.alpha * xi[sel])
        return float(np.max(np.abs(err) * xi[sel] ** 2))

    def residual(self, potential: Potential) -> np.ndarray:
        """Discrete C_n I_1[phi] - W'(phi) at the table nodes (NaN at the ends)."""
        I1 = self.grid.A @ self.values + self.grid.tail(self.alpha)
        return self.C_n * I1 - potential.Wp(self.values)

    def save(self, path) -> None:
        """Write a versioned CSV table: xi, phi, phi_dot."""
        header = (f"pnloops-layer v1 alpha={self.alpha!r} C_n={self.C_n!r} "
                  f"analytic={int(self.analytic)}\nxi,phi,phi_dot")
        np.savetxt(path, np.column_stack([self.xi, self.values, self.dvalues]),
                   delimiter=",", header=header, fmt="%.17g")

    @classmethod
    def load(cls, path) -> "LayerProfile":
        with open(path) as fh:
            first = fh.readline()
        if not first.startswith("# pnloops-layer v1"):
            raise ValueError(f"{path}: not a version-1 layer table")
        meta = dict(tok.split("=") for tok in first.split()[3:])
        data = np.loadtxt(path, delimiter=",", comments="#")
        xi = data[:, 0]
        S = natural_spline_operator(xi)
        grid = LayerGrid(xi, S, spline_weights(xi, S), collocation_matrix(xi, S))
        prof = cls(grid, data[:, 1], data[:, 2], float(meta["alpha"]), float(meta["C_n"]),
                   analytic=bool(int(meta["analytic"])))
        prof.C_fit = prof._fit_tail_constant()
        return prof


def eval_profile(p: LayerProfile, xi, order: int = 0):
    return p.eval(xi, order)


def solve_profile(W: Potential, Xi: float = 200.0, m: int = 2001, *,
                  grid: LayerGrid | None = None, tol: float = 1e-11,
                  max_iter: int = 200) -> LayerProfile:
    """Solve C_n I_1[phi] = W'(phi), phi(0) = 1/2, phi(+-Xi) on the tail formula.

    Linearly implicit pseudo-time stepping of the gradient flow
    phi_t = C_n I_1[phi] - W'(phi) with a growing step, which turns into
    Newton's method near the solution.  Iterates are kept monotone.
    """
    if Xi < 50 or m < 2000:
        raise ValueError("solve_profile needs Xi >= 50 and m >= 2000")
    grid = grid or LayerGrid.build(Xi, m)
    xi = grid.xi
    C_n = compute_Cn(W.n)
    alpha = W.alpha
    centre = int(np.argmin(np.abs(xi)))
    free = np.ones(xi.size, dtype=bool)
    free[[0, centre, xi.size - 1]] = False

    phi = 0.5 + 0.5 * np.tanh(xi / 2.0)
    phi[0] = -1.0 / (alpha * xi[0])
    phi[-1] = 1.0 - 1.0 / (alpha * xi[-1])
    phi[centre] = 0.5
    tail = np.zeros(xi.size)
    tail[free] = grid.tail(alpha)[free]
    A = grid.A[np.ix_(free, free)]
    A_fixed = grid.A[np.ix_(free, ~free)]
    projections = 0
    tau, res_norm = 1.0, np.inf
    for it in range(max_iter):
        F = C_n * (A @ phi[free] + A_fixed @ phi[~free] + tail[free]) - W.Wp(phi[free])
        res_norm = float(np.max(np.abs(F)))
        if res_norm < tol:
            break
        J = C_n * A - np.diag(W.Wpp(phi[free]))
        step = np.linalg.solve(np.eye(J.shape[0]) / tau - J, F)
        trial = phi.copy()
        trial[free] += step
        if np.any(np.diff(trial) <= 0) or np.any((trial <= 0) | (trial >= 1)):
            projections += 1
            trial = np.maximum.accumulate(np.clip(trial, 1e-300, 1 - 1e-16))
            trial[~free] = phi[~free]
            tau = max(tau * 0.5, 1e-3)
        else:
            tau = min(tau * 4.0, 1e12)
        phi = trial
    else:
        raise ProfileSolveError("layer iteration did not converge", res_norm)

    dphi = spline_derivative(xi, phi, grid.S)
    prof = LayerProfile(grid, phi, dphi, alpha, C_n,
                        diagnostics={"iterations": it, "residual": res_norm,
                                     "monotone_projections": projections})
    prof.C_fit = prof._fit_tail_constant()
    if projections:
        log.info("solve_profile: %d iterates projected onto the monotone envelope", projections)
    return prof
