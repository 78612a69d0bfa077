"""Static SVG curves rendered with matplotlib, made byte-stable across runs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..surrogate import running_mean  # noqa: E402

_STYLE = {
    "svg.hashsalt": "deepsurrogate",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (5.0, 3.2),
}


def check_steps(steps) -> np.ndarray:
    steps = np.asarray(steps)
    if steps.size > 1 and np.any(np.diff(steps) <= 0):
        raise ValueError("curve steps must be strictly increasing")
    return steps


def curve_chart(path, steps, values, title="", xlabel="step", ylabel="", window: int = 500, markers: bool = False) -> Path:
    """Raw values in a light line, plus the running mean over ``window`` points when window > 1."""
    steps = check_steps(steps)
    values = np.asarray(values, dtype=np.float64)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        style = {"marker": "o", "markersize": 3} if markers else {}
        if window > 1 and len(values) > 1:
            ax.plot(steps, values, color="0.75", lw=0.6, label="raw")
            ax.plot(steps, running_mean(values, window), color="C0", lw=1.4, label=f"running mean ({window})")
            ax.legend(frameon=False)
        else:
            ax.plot(steps, values, color="C0", lw=1.4, **style)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
