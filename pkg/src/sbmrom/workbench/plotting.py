"""Figures for study reports, rendered off-screen to PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402
import numpy as np  # noqa: E402

from ..embedded import classify  # noqa: E402
from .metrics import FIELDS  # noqa: E402

_MARKERS = {"projection": "o", "iROM": "*", "ROM": "x"}


def plot_error_vs_modes(report, param, path):
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.4), constrained_layout=True)
    rows = [r for r in report.rows if r["param"] == param]
    for ax, fname in zip(axes, FIELDS):
        for model in _MARKERS:
            pts = sorted((r["n_modes"], r["errors"][FIELDS.index(fname)]) for r in rows
                         if r["model"] == model and r["errors"] is not None)
            if pts:
                n, e = zip(*pts)
                ax.semilogy(n, e, marker=_MARKERS[model], label=model)
        ax.set_xlabel("number of modes")
        ax.set_title(fname)
        ax.grid(True, which="both", alpha=0.3)
    axes[0].set_ylabel("relative error")
    axes[0].legend()
    fig.suptitle(param)
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_spectrum(eigenvalues, path):
    fig, ax = plt.subplots(figsize=(5, 3.6), constrained_layout=True)
    for model, lam in eigenvalues.items():
        lam = np.asarray(lam)
        lam = lam[lam > 0]
        ax.semilogy(np.arange(1, lam.size + 1), lam / lam[0], label=model)
    ax.set_xlabel("i")
    ax.set_ylabel(r"$\lambda_i / \lambda_1$")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_terminal_h(mesh, states, path, title="", surrogate=None):
    """Stacked height fields on the color range of the first (reference)
    field; removed elements are masked out when a surrogate is given."""
    tri = mtri.Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.elements)
    nodes = np.ones(mesh.n_node, dtype=bool)
    if surrogate is not None:
        tri.set_mask(~np.asarray(surrogate.element_active, dtype=bool))
        nodes = np.asarray(surrogate.node_active, dtype=bool)
    n = mesh.n_node
    hs = {k: np.asarray(U)[:n] for k, U in states.items()}
    ref = hs.get("FOM", next(iter(hs.values())))[nodes]
    vmin, vmax = float(ref.min()), float(ref.max())
    fig, axes = plt.subplots(len(hs), 1, figsize=(8, 1.9 * len(hs)), constrained_layout=True, squeeze=False)
    for ax, (name, h) in zip(axes[:, 0], hs.items()):
        pc = ax.tripcolor(tri, h, shading="gouraud", vmin=vmin, vmax=vmax, cmap="viridis")
        ax.set_aspect("equal")
        ax.set_title(f"{name} {title}".strip(), fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.colorbar(pc, ax=axes[:, 0], shrink=0.8, label="h")
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_study(report, mesh, config, out):
    out = Path(out)
    figs = out / "figures"
    figs.mkdir(exist_ok=True)
    if report.eigenvalues:
        plot_spectrum(report.eigenvalues, figs / "spectrum.png")
    for case in config.evaluation:
        param = case.label
        plot_error_vs_modes(report, param, figs / f"errors_{case.slug}.png")
        if param in report.terminal:
            sd = classify(mesh, case.geometry)
            plot_terminal_h(mesh, report.terminal[param], figs / f"h_{case.slug}.png", f"t={case.T:g}", sd)
