"""Static figures for batch runs: comb spectra, Bloch spectra, decay traces.

Figures are built on ``matplotlib.figure.Figure`` with the Agg canvas, so
nothing touches pyplot's global state and no display is needed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .grid import Comb, Field2

STYLE = {"figsize": (6.0, 3.6), "dpi": 120}


def _figure(ncols: int = 1):
    fig = Figure(figsize=(STYLE["figsize"][0] * ncols, STYLE["figsize"][1]), dpi=STYLE["dpi"])
    FigureCanvasAgg(fig)
    axes = [fig.add_subplot(1, ncols, i + 1) for i in range(ncols)]
    return fig, axes


def _save(fig: Figure, path: Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # drop the software tag so reruns give identical files
    fig.savefig(path, format="png", metadata={"Software": None})
    return path


def plot_comb(c: Comb, path: Path, title: str = "") -> Path:
    fig, (ax,) = _figure()
    k = np.asarray(c.wavenumbers)
    y = np.asarray(c.log_magnitude) / np.log(10)
    ax.vlines(k, y.min(), y, lw=0.8)
    ax.plot(k, y, ".", ms=2)
    ax.set_xlabel("wavenumber k")
    ax.set_ylabel("log10 |u_k|")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_profile(field: Field2, path: Path, title: str = "") -> Path:
    fig, (ax,) = _figure()
    x = field.grid.x
    ax.plot(x, field.u1, lw=1, label="Re u")
    ax.plot(x, field.u2, lw=1, label="Im u")
    ax.plot(x, field.modulus, "k", lw=1.2, label="|u|")
    ax.set_xlabel("x")
    ax.legend(frameon=False, fontsize=8)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_spectrum(sw, path: Path, title: str = "") -> Path:
    """Bloch spectrum coloured by xi, and the tracked critical curve."""
    fig, (ax, bx) = _figure(2)
    for s in sw.slices:
        ev = np.asarray(s.eigenvalues)
        ax.scatter(ev.real, ev.imag, s=3, c=np.full(ev.size, s.xi), cmap="twilight", vmin=-np.pi, vmax=np.pi)
    ax.axvline(0.0, color="0.6", lw=0.6)
    ax.set_xlabel("Re lambda")
    ax.set_ylabel("Im lambda")
    if sw.critical:
        xi, lam = zip(*sw.critical)
        bx.plot(xi, np.real(lam), "o-", ms=3)
    bx.axhline(0.0, color="0.6", lw=0.6)
    bx.set_xlabel("xi")
    bx.set_ylabel("critical eigenvalue")
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def plot_trace(trace, path: Path, title: str = "", loglog: bool = False) -> Path:
    fig, (ax,) = _figure()
    t, raw, mod, _ = trace.as_arrays()
    ax.plot(t, raw, lw=1, label="raw")
    ax.plot(t, mod, lw=1, label="modulo translation")
    if trace.uniform_l2:
        ax.plot(t, trace.uniform_l2, lw=1, ls="--", label="modulo uniform translation")
    ax.set_yscale("log")
    if loglog:
        ax.set_xscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("L2 distance")
    ax.legend(frameon=False, fontsize=8)
    if title:
        ax.set_title(title)
    return _save(fig, path)
