"""Static figures for experiment results, rendered next to the CSV tables."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "savefig.bbox": "tight",
}


def _save(fig, outdir, name) -> str:
    path = os.path.join(outdir, name + ".png")
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def _circle_law(res, outdir):
    tab = res.tables["circle_law"]
    fig, ax = plt.subplots()
    ax.plot(tab.column("t"), tab.column("R_measured") ** 2, label="measured")
    ax.plot(tab.column("t"), tab.column("R_exact") ** 2, "k--", label=r"$R_0^2 - 2\mu t$")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$R^2$")
    ax.legend()
    return [_save(fig, outdir, "circle_law")]


def _nested(res, outdir):
    tab = res.tables["nested"]
    t = tab.column("t")
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8.0, 3.4))
    for c in tab.columns:
        if c.startswith("R") and c != "R_control":
            a1.plot(t, tab.column(c), label=c)
    a1.plot(t, tab.column("R_control"), "k--", label="control")
    a1.set_xlabel("t")
    a1.set_ylabel("effective radius")
    a1.legend()
    for c in tab.columns:
        if c.startswith("plateau"):
            a2.plot(t, tab.column(c), label=c)
    a2.set_xlabel("t")
    a2.set_ylabel("plateau average")
    a2.legend()
    return [_save(fig, outdir, "nested")]


def _abar(res, outdir):
    tab = res.tables["abar"]
    fig, ax = plt.subplots()
    eps = tab.column("eps")
    ax.loglog(eps, tab.column("max_front_error"), "o-", label="front error")
    ax.axhline(0.15, color="k", ls=":", label="0.15")
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel(r"$|\bar a_\varepsilon - \Delta d|$")
    ax.legend()
    return [_save(fig, outdir, "abar_convergence")]


def _corrector(res, outdir):
    tab = res.tables["corrector"]
    xi = tab.column("xi")
    pos = xi > 0
    fig, ax = plt.subplots()
    ax.loglog(xi[pos], np.abs(tab.column("psi")[pos]), label=r"$|\psi|$")
    ax.loglog(xi[pos], tab.column("psi_bound")[pos], "k--", label="fitted envelope")
    ax.loglog(xi[pos], np.abs(tab.column("g")[pos]), label="|g|")
    ax.set_xlabel(r"$\xi$")
    ax.legend()
    return [_save(fig, outdir, "corrector")]


def _barrier(res, outdir):
    paths = []
    for rep in res.traces.get("slack", []):
        fig, ax = plt.subplots()
        labels = sorted({r[3] for r in rep.samples})
        for lab in labels:
            J = np.array([r[4] for r in rep.samples if r[3] == lab])
            ax.hist(J, bins=40, alpha=0.6, label=lab)
        ax.axvline(rep.threshold, color="k", ls="--", label=r"$-\sigma/4$")
        ax.set_xlabel("J[v]")
        ax.set_ylabel("samples")
        ax.legend()
        paths.append(_save(fig, outdir, f"barrier_slack_N{len(rep.band_worst)}"))
    return paths


def _drift(res, outdir):
    tab = res.tables["drift"]
    sep = res.tables.get("drift_separation")
    fig, axes = plt.subplots(1, 2 if sep is not None else 1, figsize=(8.0, 3.4) if sep else None,
                             squeeze=False)
    ax = axes[0, 0]
    ax.loglog(tab.column("eps"), tab.column("deviation"), "o-", label="deviation")
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel("inner-front relative deviation")
    ax.legend()
    if sep is not None:
        ax = axes[0, 1]
        ax.plot(sep.column("separation"), sep.column("deviation"), "o-")
        ax.set_xlabel("front separation")
        ax.set_ylabel("deviation")
    return [_save(fig, outdir, "interaction_drift")]


def _layer(res, outdir):
    tab = res.tables["layer"]
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8.0, 3.4))
    xi = tab.column("xi")
    a1.plot(xi, tab.column("phi_solved"), label="solved")
    a1.plot(xi, tab.column("phi_exact"), "k--", label="closed form")
    a1.set_xlim(-20, 20)
    a1.set_xlabel(r"$\xi$")
    a1.legend()
    a2.semilogy(xi, np.abs(tab.column("residual_exact")) + 1e-18)
    a2.set_xlabel(r"$\xi$")
    a2.set_ylabel("residual")
    return [_save(fig, outdir, "layer")]


RENDERERS = {
    "circle_law": _circle_law,
    "nested": _nested,
    "abar": _abar,
    "corrector": _corrector,
    "barrier": _barrier,
    "drift": _drift,
    "layer": _layer,
}


def render_figures(res, outdir) -> list:
    """Render every figure whose source table is present; returns file paths."""
    paths = []
    with plt.rc_context(STYLE):
        for key, func in RENDERERS.items():
            if key in res.tables:
                paths.extend(func(res, outdir))
    return paths
