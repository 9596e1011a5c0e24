import math

import numpy as np
import pytest

from pnloops.aeps import AepsParams
from pnloops.corrector import (CorrectorError, CorrectorProblem, build_g, envelope_constant,
                               kernel_check, linearized_operator, orthogonality_residual,
                               solve_corrector)
from pnloops.geometry import DistanceField, concentric_circles


def bump(xi):
    s = np.asarray(xi)
    return np.where(np.abs(s) < 4, s * (1 - (s / 4) ** 2) ** 4, 0.0)


@pytest.fixture(scope="module")
def circle_problems(exact, W):
    df = DistanceField(concentric_circles([1.0]), 0.4)
    out = {}
    for eps in (0.1, 0.05, 0.025, 0.0125):
        out[eps] = CorrectorProblem.from_geometry(AepsParams(eps, 0.5, exact, df), (1.0, 0.0), W)
    return out


def test_kernel(exact, W):
    assert kernel_check(exact, W) <= 1e-5


def test_kernel_perturbed(exact, W):
    amp = 1e-3
    r = kernel_check(exact, W, exact.dvalues + amp * np.exp(-exact.xi**2))
    assert r >= 0.1 * amp * W.Wpp(0.0)


def test_symmetry(exact, W):
    assert linearized_operator(exact, W).symmetry_defect() <= 1e-8


def test_zero_rhs(exact, W):
    sol = solve_corrector(CorrectorProblem.flat(0.05, exact, W))
    assert np.all(sol.psi == 0)
    assert np.all(build_g(CorrectorProblem.flat(0.05, exact, W)) == 0)


def test_manufactured(exact, W):
    op = linearized_operator(exact, W)
    chi = bump(exact.xi)  # odd, so orthogonal to the even phi_dot
    g = op.apply(chi)
    prob = CorrectorProblem.flat(0.05, exact, W)
    sol = solve_corrector(prob, g)
    assert np.max(np.abs(sol.psi - chi)) <= 1e-4


def test_rejects_non_orthogonal(exact, W):
    prob = CorrectorProblem.flat(0.05, exact, W)
    with pytest.raises(CorrectorError, match="solvability"):
        solve_corrector(prob, exact.dvalues)


def test_circle_orthogonal_and_solved(circle_problems):
    prob = circle_problems[0.05]
    assert abs(orthogonality_residual(prob)) <= 1e-6
    sol = solve_corrector(prob)
    assert abs(sol.constraint_residual) <= 1e-8
    assert sol.equation_residual <= 1e-5 * sol.g_sup
    xi = prob.profile.xi
    Cg, _ = envelope_constant(xi, sol.g, prob.log_scale, 1.0, prob.profile.Xi / 2, shift=0.0)
    Cpsi, _ = envelope_constant(xi, sol.psi, prob.log_scale, 5.0, prob.profile.Xi / 2)
    assert np.isfinite(Cg) and np.isfinite(Cpsi)


def test_sigma_forcing(exact, solved, W):
    # for the cosine layer c0 sigma phi_dot = 4 pi s / (1 + xi^2) = -s (W''(phi) - W''(0)),
    # so the sigma forcing cancels pointwise
    prob = CorrectorProblem.flat(0.05, exact, W, sigma_tilde=0.05)
    assert prob.sigma_tilde * W.Wpp(0.0) == prob.sigma
    assert np.max(np.abs(build_g(prob))) < 1e-10
    prob = CorrectorProblem.flat(0.05, solved, W, sigma_tilde=0.05)
    assert abs(orthogonality_residual(prob)) <= 1e-6
    assert np.max(np.abs(solve_corrector(prob).psi)) < 1e-4


def test_near_front_growth_decelerates(circle_problems):
    sup = [np.max(np.abs(solve_corrector(p).psi)) for p in circle_problems.values()]
    inc = np.diff(sup)
    assert np.all(inc > 0)
    assert np.all(np.diff(inc) <= 1e-4)
