"""Static SVG line charts of a scenario run."""

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402

__all__ = ["plot_run"]

_COLORS = ["tab:red", "tab:blue", "tab:green", "tab:orange", "tab:purple"]


def plot_run(sys, run, path, title=None):
    """Write average infection and resource contamination versus time.

    Output is byte-stable across runs: fixed hash salt and no date stamp.
    """
    with matplotlib.rc_context({"svg.hashsalt": "siws", "svg.fonttype": "path"}):
        panels = 2 if sys.resource_enabled else 1
        fig = Figure(figsize=(6.0, 2.6 * panels))
        axes = fig.subplots(panels, 1, sharex=True, squeeze=False)[:, 0]
        pbar = run.pbar
        for k in range(sys.m):
            color = _COLORS[k % len(_COLORS)]
            axes[0].plot(run.times, pbar[:, k], color=color, label=f"virus {k + 1}")
            if sys.resource_enabled:
                axes[1].plot(run.times, run.states[:, k, -1], color=color,
                             label=f"virus {k + 1}")
        axes[0].set_ylabel("mean infected fraction")
        axes[0].legend(loc="best", frameon=False)
        if sys.resource_enabled:
            axes[1].set_ylabel("resource contamination z")
        for ax in axes:
            for t in run.event_times:
                ax.axvline(t, color="0.5", linestyle="--", linewidth=0.8)
            ax.set_ylim(bottom=0)
        axes[-1].set_xlabel("time")
        if title:
            axes[0].set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path
