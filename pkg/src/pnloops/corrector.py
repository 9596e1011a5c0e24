"""Corrector psi solving -C_n I_1[psi] + W''(phi) psi = g with int psi phi_dot = 0."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .aeps import AepsParams, a_bar_eps, a_eps
from .potential import Potential


class CorrectorError(RuntimeError):
    pass


def _far_tail(xi, X: float, p: int, n: int = 24):
    """int_X^inf y^{-p} / (y - xi)^2 dy by Gauss-Legendre in t = 1/y (xi well inside X)."""
    gx, gw = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (gx + 1) / X
    w = 0.5 * gw / X
    xi = np.asarray(xi, dtype=float)[..., None]
    return np.sum(w * t**p / (1 - xi * t) ** 2, axis=-1)


@dataclass
class LinearizedOperator:
    """Discrete L = -C_n I_1 + W''(phi) on the layer grid.

    The weighted collocation matrix W A is symmetrised, so W L is exactly
    symmetric and the discrete Fredholm condition is orthogonality to the
    discrete kernel in the weighted inner product.  psi vanishes at and
    beyond +-Xi.
    """

    profile: object
    potential: Potential
    _lu: tuple = field(default=None, repr=False)

    def __post_init__(self):
        g = self.profile.grid
        w = g.weights
        B = w[:, None] * g.A
        self.A_sym = 0.5 * (B + B.T) / w[:, None]
        self.raw_asymmetry = float(np.max(np.abs(B - B.T)) / np.max(np.abs(B)))
        self.Wpp = self.potential.Wpp(self.profile.values)
        self.C_n = self.profile.C_n
        self.interior = slice(1, g.xi.size - 1)

    @property
    def xi(self):
        return self.profile.xi

    @property
    def weights(self):
        return self.profile.grid.weights

    def matrix(self) -> np.ndarray:
        s = self.interior
        return -self.C_n * self.A_sym[s, s] + np.diag(self.Wpp[s])

    def apply(self, v, tail_power: int | None = None, tail_coef: float = 0.0) -> np.ndarray:
        """L v at the nodes; optionally close with v ~ tail_coef |y|^{-p} beyond Xi."""
        I1 = self.A_sym @ v
        if tail_power is not None:
            X = self.profile.Xi
            I1 = I1 + tail_coef * (_far_tail(self.xi, X, tail_power) + _far_tail(-self.xi, X, tail_power))
        return -self.C_n * I1 + self.Wpp * v

    def symmetry_defect(self) -> float:
        """max |(W L) - (W L)^T| / max |W L| on the interior block."""
        s = self.interior
        B = self.weights[s, None] * self.matrix()
        return float(np.max(np.abs(B - B.T)) / np.max(np.abs(B)))

    def bordered_lu(self):
        if self._lu is None:
            s = self.interior
            dphi = self.profile.dvalues[s]
            n = dphi.size
            K = np.zeros((n + 1, n + 1))
            K[:n, :n] = self.matrix()
            K[:n, n] = dphi
            K[n, :n] = self.weights[s] * dphi
            lu = linalg.lu_factor(K, check_finite=True)
            piv = np.abs(np.diag(lu[0]))
            if piv.min() < 1e-12 * piv.max():
                raise CorrectorError("bordered system is singular: kernel not captured")
            self._lu = lu
        return self._lu


_OPERATORS: dict = {}


def linearized_operator(profile, potential: Potential) -> LinearizedOperator:
    key = (id(profile), id(potential))
    op = _OPERATORS.get(key)
    if op is None or op.profile is not profile or op.potential is not potential:
        op = _OPERATORS[key] = LinearizedOperator(profile, potential)
    return op


@dataclass
class CorrectorProblem:
    """Frozen-point data for the corrector equation.

    ``a_values`` are a_eps samples on the layer grid nodes, ``abar`` the
    projected value, sigma = W''(0) sigma_tilde.
    """

    eps: float
    sigma_tilde: float
    profile: object
    potential: Potential
    a_values: np.ndarray = field(repr=False)
    abar: float = 0.0
    x: tuple = (0.0, 0.0)

    @property
    def sigma(self) -> float:
        return float(self.potential.Wpp(0.0)) * self.sigma_tilde

    @property
    def log_scale(self) -> float:
        return self.eps * abs(math.log(self.eps))

    @classmethod
    def flat(cls, eps, profile, potential, sigma_tilde: float = 0.0):
        return cls(eps, sigma_tilde, profile, potential, np.zeros(profile.xi.size), 0.0)

    @classmethod
    def from_geometry(cls, params: AepsParams, x, potential: Potential,
                      sigma_tilde: float = 0.0, **quad) -> "CorrectorProblem":
        a = a_eps(params, params.profile.xi, x, **quad)
        abar = a_bar_eps(params, x)
        return cls(params.eps, sigma_tilde, params.profile, potential, a, abar, tuple(x))


def build_g(prob: CorrectorProblem, xi=None) -> np.ndarray:
    """g = a/(eps|ln eps|) + c0 phi_dot (sigma - abar) + sigma_tilde (W''(phi) - W''(0)).

    With xi None the nodal values are returned; otherwise a_eps is linearly
    interpolated from the nodes (and continued by Xi/xi decay).
    """
    p = prob.profile
    c0 = p.c0()
    if xi is None:
        xi, a = p.xi, prob.a_values
        dphi, phi = p.dvalues, p.values
    else:
        xi = np.asarray(xi, dtype=float)
        X = p.Xi
        a = np.interp(xi, p.xi, prob.a_values)
        a = np.where(xi > X, prob.a_values[-1] * X / np.abs(xi), a)
        a = np.where(xi < -X, prob.a_values[0] * X / np.abs(xi), a)
        dphi, phi = p.eval(xi, 1), p.eval(xi)
    W = prob.potential
    return (a / prob.log_scale + c0 * dphi * (prob.sigma - prob.abar)
            + prob.sigma_tilde * (W.Wpp(phi) - W.Wpp(0.0)))


def orthogonality_residual(prob: CorrectorProblem, g: np.ndarray | None = None) -> float:
    """int g phi_dot with the layer weights plus the g ~ 1/xi tail closure."""
    p = prob.profile
    g = build_g(prob) if g is None else g
    tail = (g[-1] + g[0]) / (2.0 * p.alpha * p.Xi)
    return float(p.grid.weights @ (g * p.dvalues) + tail)


@dataclass
class CorrectorSolution:
    xi: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    multiplier: float
    constraint_residual: float
    equation_residual: float
    g_sup: float


def solve_corrector(prob: CorrectorProblem, g: np.ndarray | None = None,
                    ortho_tol: float = 1e-5) -> CorrectorSolution:
    """Bordered solve of L psi + lambda phi_dot = g, int psi phi_dot = 0."""
    g = build_g(prob) if g is None else np.asarray(g, dtype=float)
    res = orthogonality_residual(prob, g)
    if abs(res) > ortho_tol:
        raise CorrectorError(f"right-hand side violates the solvability condition ({res:.2e})")
    op = linearized_operator(prob.profile, prob.potential)
    s = op.interior
    rhs = np.append(g[s], 0.0)
    sol = linalg.lu_solve(op.bordered_lu(), rhs)
    if not np.all(np.isfinite(sol)):
        raise CorrectorError("bordered solve produced non-finite values")
    psi = np.zeros(op.xi.size)
    psi[s] = sol[:-1]
    lam = float(sol[-1])
    constraint = float(op.weights @ (psi * prob.profile.dvalues))
    if abs(constraint) > 1e-8:
        raise CorrectorError(f"constraint residual {constraint:.2e} exceeds 1e-8")
    inner = np.abs(op.xi) <= prob.profile.Xi / 2
    eq = op.apply(psi) - g
    g_sup = float(np.max(np.abs(g[inner]))) if np.any(g) else 0.0
    return CorrectorSolution(op.xi, psi, g, lam, constraint,
                             float(np.max(np.abs(eq[inner]))), g_sup)


def kernel_check(profile, potential: Potential, values=None) -> float:
    """sup |L[phi_dot]| on |xi| <= Xi/2, closing phi_dot ~ 1/(alpha y^2) beyond the table."""
    op = linearized_operator(profile, potential)
    v = profile.dvalues if values is None else values
    r = op.apply(v, tail_power=2, tail_coef=1.0 / profile.alpha)
    inner = np.abs(op.xi) <= profile.Xi / 2
    return float(np.max(np.abs(r[inner])))


def envelope_constant(xi, values, scale: float, lo: float, hi: float, shift: float = 1.0):
    """max |values| (shift + |xi|) scale over lo <= |xi| <= hi, and the fitted decay exponent."""
    xi = np.asarray(xi)
    sel = (np.abs(xi) >= lo) & (np.abs(xi) <= hi) & (np.abs(values) > 0)
    C = float(np.max(np.abs(values[sel]) * (shift + np.abs(xi[sel])) * scale))
    p, _ = np.polyfit(np.log(shift + np.abs(xi[sel])), np.log(np.abs(values[sel])), 1)
    return C, float(-p)
