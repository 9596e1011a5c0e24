"""Periodic multi-well potentials W with W = 0 exactly on the integers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .fracops import compute_Cn


@dataclass(frozen=True)
class Potential:
    """1-periodic potential and its first three derivatives.

    The calibrated cosine W(u) = A (1 - cos 2 pi u) with A = C_n / (4 pi) makes
    phi(xi) = 1/2 + arctan(xi)/pi the exact layer solution.  A user table is
    interpolated by a periodic cubic spline.
    """

    kind: str = "calibrated-cosine"
    amplitude: float = float("nan")
    n: int = 2
    _spline: CubicSpline | None = field(default=None, repr=False, compare=False)

    @classmethod
    def calibrated_cosine(cls, n: int = 2) -> "Potential":
        return cls("calibrated-cosine", compute_Cn(n) / (4.0 * math.pi), n)

    @classmethod
    def from_table(cls, u, W, n: int = 2) -> "Potential":
        u = np.asarray(u, dtype=float)
        W = np.asarray(W, dtype=float)
        if u[0] != 0.0 or u[-1] != 1.0:
            raise ValueError("table must span u in [0, 1]")
        if abs(W[0]) > 1e-12 or abs(W[-1]) > 1e-12:
            raise ValueError("table must vanish at u = 0 and u = 1")
        if np.any(W[1:-1] <= 0):
            raise ValueError("table must be positive away from the integers")
        W = W.copy()
        W[0] = W[-1] = 0.0
        spline = CubicSpline(u, W, bc_type="periodic")
        if spline(0.0, 2) <= 0:
            raise ValueError("W''(0) must be positive")
        return cls("user-table", float("nan"), n, spline)

    @classmethod
    def load(cls, path, n: int = 2) -> "Potential":
        data = np.loadtxt(path, ndmin=2)
        return cls.from_table(data[:, 0], data[:, 1], n)

    def _eval(self, u, order: int):
        u = np.asarray(u, dtype=float)
        if self.kind == "calibrated-cosine":
            A, w = self.amplitude, 2.0 * math.pi
            if order == 0:
                return A * (1.0 - np.cos(w * u))
            if order == 1:
                return A * w * np.sin(w * u)
            if order == 2:
                return A * w * w * np.cos(w * u)
            return -A * w**3 * np.sin(w * u)
        return self._spline(np.mod(u, 1.0), order)

    def W(self, u):
        return self._eval(u, 0)

    def Wp(self, u):
        return self._eval(u, 1)

    def Wpp(self, u):
        return self._eval(u, 2)

    def Wppp(self, u):
        return self._eval(u, 3)

    @property
    def alpha(self) -> float:
        """Tail coefficient W''(0) / C_n of the layer solution."""
        return float(self.Wpp(0.0)) / compute_Cn(self.n)

    @property
    def max_abs_Wpp(self) -> float:
        u = np.linspace(0.0, 1.0, 2049)
        return float(np.max(np.abs(self.Wpp(u))))


def eval_W(pot: Potential, u):
    return pot.W(u)


def eval_Wp(pot: Potential, u):
    return pot.Wp(u)


def eval_Wpp(pot: Potential, u):
    return pot.Wpp(u)
