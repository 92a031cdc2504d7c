"""Byte-reproducible SVG figures for traces and root loci."""

from __future__ import annotations

from typing import Dict, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# Fixed hash salt and no timestamp make the SVG output a pure function of
# the data; text stays as text so the files carry no font subsets.
_RC = {
    "svg.hashsalt": "mfaclab",
    "svg.fonttype": "none",
    "figure.figsize": (7.0, 3.6),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.1,
}
_META = {"Date": None, "Creator": "mfaclab"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def plot_tracking(traces: Dict[str, Sequence], path) -> None:
    """Output of every trace against the (shared) reference."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        first = next(iter(traces.values()))
        if first:
            ax.step([r.k + 1 for r in first], [r.y_star for r in first], where="post",
                    color="k", linestyle="--", linewidth=0.9, label="y*")
        for label, tr in traces.items():
            ax.plot([r.k + 1 for r in tr], [r.y for r in tr], label=label)
        ax.set_xlabel("k")
        ax.set_ylabel("y(k)")
        ax.set_title("Tracking performance")
        ax.legend(loc="best", fontsize="small")
        _save(fig, path)


def plot_control(traces: Dict[str, Sequence], path) -> None:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for label, tr in traces.items():
            ax.plot([r.k for r in tr], [r.u for r in tr], label=label)
        ax.set_xlabel("k")
        ax.set_ylabel("u(k)")
        ax.set_title("Control input")
        ax.legend(loc="best", fontsize="small")
        _save(fig, path)


def plot_pg(trace: Sequence, names: Sequence[str], path, title="Estimated PG components") -> None:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        if trace:
            phi = np.array([r.phi_hat for r in trace])
            ks = [r.k for r in trace]
            for i in range(phi.shape[1]):
                ax.plot(ks, phi[:, i], label=names[i] if i < len(names) else f"phi_{i + 1}")
        ax.set_xlabel("k")
        ax.set_ylabel("phi_hat(k)")
        ax.set_title(title)
        ax.legend(loc="best", fontsize="small", ncol=2)
        _save(fig, path)


def plot_root_locus(lams: Sequence[float], roots: Sequence[Sequence[complex]], path) -> None:
    """Closed-loop roots over a lambda grid, drawn against the unit circle."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.8, 4.8))
        t = np.linspace(0.0, 2.0 * np.pi, 361)
        ax.plot(np.cos(t), np.sin(t), color="0.5", linewidth=0.8)
        xs, ys, cs = [], [], []
        for lam, rs in zip(lams, roots):
            for r in rs:
                xs.append(r.real)
                ys.append(r.imag)
                cs.append(lam)
        if xs:
            sc = ax.scatter(xs, ys, c=cs, s=10, cmap="viridis")
            fig.colorbar(sc, ax=ax, label="lambda")
        ax.axhline(0.0, color="0.8", linewidth=0.6)
        ax.axvline(0.0, color="0.8", linewidth=0.6)
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_xlabel("Re z")
        ax.set_ylabel("Im z")
        ax.set_title("Closed-loop poles")
        _save(fig, path)
