"""Optional figures written next to the CSV/JSON outputs of the command line.

matplotlib is imported lazily so the library and the data-only commands do
not depend on it; install the ``plot`` extra to enable ``--plot``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigurationError


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise ConfigurationError(
            "--plot needs matplotlib; install heredlab with the 'plot' extra"
        ) from exc
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    # fixed metadata keeps repeated runs byte-stable
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={"Software": None})
    return path


def plot_series(x, series: dict, path, xlabel: str, ylabel: str, logx=False, logy=False) -> Path:
    """Line plot of named series sharing the abscissa ``x``."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, y in series.items():
        ax.plot(x, y, label=name, lw=1.4)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend(frameon=False, fontsize="small")
    ax.grid(alpha=0.3)
    try:
        return _save(fig, path)
    finally:
        plt.close(fig)


def plot_singular_values(values, path, rank: int | None = None) -> Path:
    """Semilog plot of ``s_k`` with the retained rank marked."""
    plt = _pyplot()
    s = np.asarray(values, dtype=float)
    k = np.arange(1, s.size + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    pos = s > 0
    ax.semilogy(k[pos], s[pos], "o-", ms=3, lw=1)
    if rank is not None and 0 < rank < s.size:
        ax.axvline(rank + 0.5, color="0.5", ls="--", lw=1)
        ax.annotate(f"s_{rank + 1} = {s[rank]:.3g}", (rank + 1, s[rank]), xytext=(8, 8),
                    textcoords="offset points", fontsize="small")
    ax.set_xlabel("k")
    ax.set_ylabel("singular value")
    ax.grid(alpha=0.3, which="both")
    try:
        return _save(fig, path)
    finally:
        plt.close(fig)
