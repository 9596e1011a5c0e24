import numpy as np

from pnloops.barriers import SubsolutionReport
from pnloops.experiments import ExperimentResult, Table
from pnloops.plotting import RENDERERS, render_figures


def synthetic():
    res = ExperimentResult("synthetic", {})
    t = np.linspace(0, 0.07, 8)
    res.tables["circle_law"] = Table(["t", "R_measured", "R_exact"],
                                     [(a, 1 - 3 * a, np.sqrt(1 - 4 * np.pi * a)) for a in t])
    res.tables["nested"] = Table(["t", "R1", "R2", "R_control", "plateau0", "plateau1", "plateau2"],
                                 [(a, 1 - a, 0.5 - a, 0.5 - a, 0.01, 1.0, 2.0) for a in t])
    res.tables["abar"] = Table(["eps", "max_front_error"], [(0.1, 0.5), (0.05, 0.4)])
    xi = np.linspace(-10, 10, 41)
    res.tables["corrector"] = Table(["xi", "psi", "g", "psi_bound"],
                                    [(x, 1 / (1 + x * x), 0.1 / (1 + abs(x)), 2 / (1 + abs(x))) for x in xi])
    res.tables["drift"] = Table(["eps", "deviation"], [(0.1, 1.0), (0.05, 0.6)])
    res.tables["layer"] = Table(["xi", "phi_solved", "phi_exact", "residual_exact"],
                                [(x, 0.5 + np.arctan(x) / np.pi, 0.5 + np.arctan(x) / np.pi, 1e-9) for x in xi])
    samples = [(0.0, 0.1 * k, 0.0, "band1" if k % 2 else "lattice", -0.1 * k, -0.5) for k in range(20)]
    res.tables["barrier"] = Table(["N"], [(1,)])
    res.traces["slack"] = [SubsolutionReport(0.0, 0.0, -0.5, False, [0.0], 0.0, samples)]
    return res


def test_render_all(tmp_path):
    paths = render_figures(synthetic(), str(tmp_path))
    assert len(paths) == len(RENDERERS)
    for p in paths:
        with open(p, "rb") as fh:
            assert fh.read(8) == b"\x89PNG\r\n\x1a\n"


def test_render_skips_missing(tmp_path):
    assert render_figures(ExperimentResult("empty", {}), str(tmp_path)) == []
