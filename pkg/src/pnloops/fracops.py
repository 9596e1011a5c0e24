"""Fractional Laplacian discretizations.

Three routes to the order-one operator

    I_n u(x) = P.V. int (u(x+y) - u(x)) |y|^{-(n+1)} dy

are provided: a Fourier multiplier on periodic boxes, an adaptive
principal-value quadrature on the line, and a brute-force truncated-kernel
quadrature in the plane that serves as an oracle for the other two.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

QUAD_TOL = 1e-9


def sphere_area(k: int) -> float:
    """Surface measure of the unit sphere S^k embedded in R^{k+1}."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def compute_Cn(n: int) -> float:
    """Constant relating I_n of a planar profile to I_1 of the profile.

    C_n = int_{R^{n-1}} (|y|^2 + 1)^{-(n+1)/2} dy, reduced to a radial integral.
    """
    if n not in (2, 3):
        raise ValueError(f"compute_Cn supports n in {{2, 3}}, got {n}")
    radial, _ = integrate.quad(
        lambda r: r ** (n - 2) * (1.0 + r * r) ** (-(n + 1) / 2),
        0.0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=200,
    )
    return sphere_area(n - 2) * radial


def spectral_constant(n: int) -> float:
    """kappa_n in the Fourier symbol -kappa_n |k| of I_n."""
    if n == 1:
        return math.pi
    return math.pi * compute_Cn(n)


def kernel_shell_integrals(R: float, n: int = 2) -> tuple[float, float]:
    """Return (int_{|z|<R} |z|^{1-n} dz, int_{|z|>R} |z|^{-1-n} dz)."""
    if not R > 0:
        raise ValueError("R must be positive")
    s = sphere_area(n - 1)
    return s * R, s / R


@dataclass
class PeriodicField:
    """Real field sampled on a uniform periodic grid of side L.

    Grid nodes are x_j = -L/2 + j*L/M along every axis, indexed 'ij'.
    """

    values: np.ndarray
    L: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        M = self.values.shape[0]
        if any(s != M for s in self.values.shape):
            raise ValueError("PeriodicField must be square")
        if M & (M - 1):
            raise ValueError(f"grid size {M} is not a power of two")
        if not self.L > 0:
            raise ValueError("box length must be positive")

    @property
    def n(self) -> int:
        return self.values.ndim

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return self.L / self.M

    def axis(self) -> np.ndarray:
        return -0.5 * self.L + self.h * np.arange(self.M)

    def coords(self) -> tuple[np.ndarray, ...]:
        ax = self.axis()
        return np.meshgrid(*([ax] * self.n), indexing="ij")

    @classmethod
    def from_function(cls, func, L: float, M: int, n: int = 2) -> "PeriodicField":
        ax = -0.5 * L + (L / M) * np.arange(M)
        grids = np.meshgrid(*([ax] * n), indexing="ij")
        return cls(func(*grids), L)

    def like(self, values) -> "PeriodicField":
        return PeriodicField(values, self.L)


def wavenumber_modulus(M: int, L: float, n: int) -> np.ndarray:
    """|k| on the rfft layout, k = 2*pi*(integer vector)/L."""
    k_full = 2.0 * np.pi * np.fft.fftfreq(M, d=L / M)
    k_half = 2.0 * np.pi * np.fft.rfftfreq(M, d=L / M)
    axes = [k_full] * (n - 1) + [k_half]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.sqrt(sum(g * g for g in grids))


def frac_lap_spectral(f: PeriodicField) -> PeriodicField:
    """Apply I_n through its Fourier multiplier -kappa_n |k|.

    Nyquist modes receive the same multiplier as every other mode; the zero
    mode is annihilated.
    """
    u = f.values
    if not np.all(np.isfinite(u)):
        raise ValueError("frac_lap_spectral: input contains NaN or Inf")
    n = f.n
    symbol = -spectral_constant(n) * wavenumber_modulus(f.M, f.L, n)
    out = np.fft.irfftn(symbol * np.fft.rfftn(u), s=u.shape, axes=tuple(range(n)))
    return f.like(out)


# ---------------------------------------------------------------------------
# one-dimensional principal-value quadrature


def _tail_inverse_kernel(xi: float, X: float) -> float:
    """int_X^inf dy / (y (y - xi)^2) for |xi| < X."""
    x = xi / X
    if abs(x) < 1e-3:
        k = np.arange(12)
        return float(np.sum((k + 1) / (k + 2) * x**k) / X**2)
    return 1.0 / (xi * (X - xi)) + math.log1p(-x) / xi**2


def asymptotic_tail(xi: float, X: float, alpha: float) -> float:
    """Exact kernel integral of the continuation H(y) - 1/(alpha y) over |y| > X.

    Returns int_{|y|>X} v_tail(y) / (y - xi)^2 dy for |xi| < X.
    """
    right = 1.0 / (X - xi) - _tail_inverse_kernel(xi, X) / alpha
    left = _tail_inverse_kernel(-xi, X) / alpha
    return right + left


def frac_lap_1d(v, xi: float, *, alpha: float | None = None,
                cutoff: float | None = None, tol: float = QUAD_TOL,
                features=()) -> float:
    """P.V. I_1 v(xi) by adaptive Gauss-Kronrod quadrature.

    ``v`` is any vectorised callable on the line; when it behaves like
    H(y) - 1/(alpha y) at infinity pass ``alpha`` (a LayerProfile carries it)
    and the contribution of |y| > cutoff is integrated in closed form.
    Without ``alpha`` the outer zone is integrated to infinity directly.

    The inner zone |y| <= 1 uses the symmetric second difference, which is
    bounded at y = 0 for C^{1,1} integrands.  ``features`` lists abscissae
    where v has structure (e.g. support edges); they become breakpoints.
    """
    if alpha is None:
        alpha = getattr(v, "alpha", None)
    v0 = float(v(np.asarray(xi)))

    def second_diff(y):
        return (v(xi + y) + v(xi - y) - 2.0 * v0) / (y * y)

    inner, _ = integrate.quad(second_diff, 0.0, 1.0, epsabs=tol, epsrel=0, limit=400)
    brk = {abs(f - xi) for f in features}
    if alpha is None:
        pts = sorted(p for p in brk if p > 1.0)
        Y = 2.0 * max(pts, default=1.0)
        outer, _ = integrate.quad(second_diff, 1.0, Y, points=pts or None,
                                  epsabs=tol, epsrel=0, limit=800)
        far, _ = integrate.quad(second_diff, Y, np.inf, epsabs=tol, epsrel=0, limit=400)
        return inner + outer + far

    Y = cutoff if cutoff is not None else 1e3 * (1.0 + abs(xi))
    pts = sorted({p for p in brk | {abs(xi), 2 * abs(xi), 10.0, 100.0} if 1.0 < p < Y})
    outer, _ = integrate.quad(second_diff, 1.0, Y, points=pts or None,
                              epsabs=tol, epsrel=0, limit=800)
    # beyond Y both xi + y and xi - y sit on the continuation H - 1/(alpha y):
    # int_Y^inf [1 - 1/(alpha (y + xi)) + 1/(alpha (y - xi)) - 2 v0] / y^2 dy
    tail = (1.0 - 2.0 * v0) / Y
    if xi != 0.0:
        def inv_cubic(c):
            # int_Y^inf dy / (y^2 (y + c))
            return 1.0 / (c * Y) - math.log1p(c / Y) / c**2
        tail += (inv_cubic(-xi) - inv_cubic(xi)) / alpha
    return inner + outer + tail


# ---------------------------------------------------------------------------
# planar truncated-kernel quadrature (oracle)


def _radial_panels(r_max: float, r_fine: float, per_panel: int = 16):
    """Gauss-Legendre nodes on geometrically growing panels of [0, r_max]."""
    edges = [0.0, r_fine]
    while edges[-1] < r_max:
        edges.append(min(r_max, edges[-1] * 1.35 + r_fine))
    x, w = np.polynomial.legendre.leggauss(per_panel)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * x + 0.5 * (b + a))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def frac_lap_quadrature(u: Callable, x, R_trunc: float, *, far_mass: Callable | None = None,
                        scale: float = 1.0, n_theta: int = 512, per_panel: int = 16) -> float:
    """Brute-force I_2 u(x) on |y| <= R_trunc with analytic far-field closure.

    ``u(X, Y)`` is a vectorised function on the plane.  The near field uses the
    paired form (u(x+y) + u(x-y) - 2u(x)) / 2, integrated in polar coordinates
    with Gauss-Legendre panels in r (finest width ``scale``) and the periodic
    trapezoid rule in angle.  Beyond R_trunc the -u(x) part is closed with
    kernel_shell_integrals; ``far_mass(x)`` may supply int_{|y|>R} u(x+y)|y|^{-3} dy.
    """
    x = np.asarray(x, dtype=float)
    u0 = float(u(x[0], x[1]))
    r, wr = _radial_panels(R_trunc, scale, per_panel)
    th = np.pi * np.arange(n_theta) / n_theta
    wth = np.pi / n_theta
    c, s = np.cos(th), np.sin(th)
    total = 0.0
    for chunk in np.array_split(np.arange(r.size), max(1, r.size * n_theta // 400000)):
        rr = r[chunk][:, None]
        X1, Y1 = x[0] + rr * c, x[1] + rr * s
        X2, Y2 = x[0] - rr * c, x[1] - rr * s
        diff = u(X1, Y1) + u(X2, Y2) - 2.0 * u0
        # dy / |y|^3 = dr dtheta / r^2 ; the angular range [0, pi) covers both signs
        total += np.sum(wr[chunk] / (rr[:, 0] ** 2) * diff.sum(axis=1)) * wth
    _, outer = kernel_shell_integrals(R_trunc, 2)
    far = -u0 * outer
    if far_mass is not None:
        far += far_mass(x)
    return total + far


def gaussian_image_mass(L: float, sigma: float, center, R_trunc: float,
                        n_images: int = 60) -> Callable:
    """far_mass callback for a periodised Gaussian exp(-|x-c|^2 / (2 sigma^2)).

    The primary copy is integrated over the annulus R_trunc < |y| < R_trunc + 12 sigma
    by Gauss-Legendre x trapezoid quadrature.  Periodic images contribute
    mass * (K + sigma^2/2 * Laplacian K) with K = |y|^{-3}; the lattice sum is
    truncated at |m| <= n_images and closed with its integral approximation.
    """
    mass = 2.0 * np.pi * sigma**2
    center = np.asarray(center, dtype=float)
    m = np.arange(-n_images, n_images + 1)
    MX, MY = np.meshgrid(m, m, indexing="ij")
    keep = (MX * MX + MY * MY <= n_images**2) & ~((MX == 0) & (MY == 0))
    MX, MY = MX[keep], MY[keep]
    gx, gw = np.polynomial.legendre.leggauss(64)
    a, b = R_trunc, R_trunc + 12.0 * sigma
    r = 0.5 * (b - a) * gx + 0.5 * (b + a)
    wr = 0.5 * (b - a) * gw
    n_theta = 1024
    th = 2.0 * np.pi * np.arange(n_theta) / n_theta

    def far_mass(x):
        dx = center[0] + L * MX - x[0]
        dy = center[1] + L * MY - x[1]
        dist = np.sqrt(dx * dx + dy * dy)
        if np.any(dist < R_trunc + 6 * sigma):
            raise ValueError("periodic image overlaps the near-field disk")
        lattice = np.sum(dist**-3 + 0.5 * sigma**2 * 9.0 * dist**-5)
        tail = 2.0 * np.pi / (n_images * L) / L**2
        X = x[0] + r[:, None] * np.cos(th) - center[0]
        Y = x[1] + r[:, None] * np.sin(th) - center[1]
        primary = np.exp(-(X * X + Y * Y) / (2 * sigma**2))
        primary = np.sum(wr / r**2 * primary.sum(axis=1)) * (2.0 * np.pi / n_theta)
        return mass * (lattice + tail) + primary

    return far_mass


def lemma_one_to_n_check(profile, e, x, C_n: float, R_trunc: float = 200.0,
                         n_theta: int = 2048) -> tuple[float, float, float]:
    """Compare I_2[phi(e.x)] by planar quadrature with C_n I_1[phi](e.x).

    Returns (planar, one-dimensional, truncation bound).  The far field of the
    planar quadrature only closes the -u(x) part, so the discrepancy is
    bounded by C_2/R_trunc.
    """
    e = np.asarray(e, dtype=float)
    xi = float(e @ np.asarray(x, dtype=float))
    phi = profile

    def u(X, Y):
        return phi(e[0] * X + e[1] * Y)

    planar = frac_lap_quadrature(u, x, R_trunc, n_theta=n_theta, per_panel=20)
    # the omitted far field int_{|y|>R} u(x+y)|y|^-3 dy is between 0 and C_2/R
    _, bound = kernel_shell_integrals(R_trunc, 2)
    one_d = C_n * frac_lap_1d(phi, xi)
    return planar, one_d, bound


__all__ = [
    "PeriodicField", "compute_Cn", "spectral_constant", "kernel_shell_integrals",
    "frac_lap_spectral", "frac_lap_1d", "frac_lap_quadrature", "asymptotic_tail",
    "gaussian_image_mass", "sphere_area", "lemma_one_to_n_check", "wavenumber_modulus",
]
