"""SVG figures for the CLI report path.

Figures are built on bare ``Figure`` objects (no pyplot state) and saved with
a fixed hash salt and no date stamp so that identical inputs give identical
files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib import rcParams  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

rcParams["svg.hashsalt"] = "turnpike-hyp"
rcParams["svg.fonttype"] = "none"
rcParams["font.size"] = 9
rcParams["axes.grid"] = True
rcParams["grid.alpha"] = 0.3


def _save(fig: Figure, path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})


def plot_signals(path, t, series: dict, title: str = "", ylabel: str = "", logy: bool = False) -> None:
    fig = Figure(figsize=(6.0, 3.6))
    ax = fig.add_subplot()
    for name, y in series.items():
        ax.plot(t, y, label=name, lw=1.2)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(series) > 1:
        ax.legend(frameon=False)
    _save(fig, path)


def plot_report(path, report) -> None:
    """Log-log turnpike metric against the horizon, with a 1/T reference line."""
    T = np.asarray(report.horizons, dtype=float)
    cm = np.asarray(report.control_metric, dtype=float)
    fig = Figure(figsize=(5.0, 3.8))
    ax = fig.add_subplot()
    if np.all(cm > 0):
        ax.loglog(T, cm, "o-", label="control metric")
        ax.loglog(T, cm[0] * T[0] / T, "k--", lw=0.8, label="slope -1")
        title = f"fitted exponent {report.fitted_exponent:.3f}" if report.exponent_applicable else ""
    else:
        ax.semilogx(T, cm, "o-", label="control metric")
        title = "exponent not applicable"
    ax.set_xlabel("T")
    ax.set_ylabel("(1/T) |u - u_s|^2")
    ax.set_title(title)
    ax.legend(frameon=False)
    _save(fig, path)


def plot_pipeline(path, rep) -> None:
    """Entry and exit flux, density, and the relative entry errors."""
    t = rep.grid.t
    fig = Figure(figsize=(10.0, 3.4))
    ax1, ax2, ax3 = fig.subplots(1, 3)
    ax1.plot(t, rep.q[:, 0], label="x = 0")
    ax1.plot(t, rep.q[:, -1], label="x = L")
    ax1.axhline(rep.q_static[0], color="k", lw=0.6, ls="--")
    ax1.set_title("flux q")
    ax1.legend(frameon=False)
    ax2.plot(t, rep.rho[:, 0], label="x = 0")
    ax2.plot(t, rep.rho[:, -1], label="x = L")
    ax2.axhline(rep.rho_static[0], color="k", lw=0.6, ls="--")
    ax2.set_title("density rho")
    ax2.legend(frameon=False)
    ax3.semilogy(t, np.maximum(rep.e_rho, 1e-16), label="e_rho")
    ax3.semilogy(t, np.maximum(rep.e_q, 1e-16), label="e_q")
    ax3.axhline(1e-2, color="k", lw=0.6, ls=":")
    ax3.set_title("relative entry error")
    ax3.legend(frameon=False)
    for ax in (ax1, ax2, ax3):
        ax.set_xlabel("t")
    _save(fig, path)


def plot_profile(path, x, profile, title: str = "") -> None:
    fig = Figure(figsize=(5.0, 3.4))
    ax = fig.add_subplot()
    ax.plot(x, profile[:, 0], label="plus")
    ax.plot(x, profile[:, 1], label="minus")
    ax.set_xlabel("x")
    ax.set_title(title)
    ax.legend(frameon=False)
    _save(fig, path)


def plot_bars(path, labels, values, title: str = "") -> None:
    fig = Figure(figsize=(4.5, 3.2))
    ax = fig.add_subplot()
    ax.bar([str(v) for v in labels], values)
    ax.set_title(title)
    _save(fig, path)
