"""Figure rendering for the report path.

The experiment core emits plot-ready columns only; this module turns a saved
report into publication-style PNG figures next to the delimited output.
"""

from __future__ import annotations

import numpy as np

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["render_report_figures"]

_FIG_KW = dict(figsize=(5.2, 3.4), dpi=150)


def _style(ax):
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    ax.grid(alpha=0.25, linewidth=0.5)


def render_report_figures(payload, out_dir):
    """Render histogram, log-MGF, and discrepancy figures; returns the paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    values = np.asarray(payload["fluctuations"], dtype=float)
    target_var = payload["target_variance"]

    fig, ax = plt.subplots(**_FIG_KW)
    ax.hist(values, bins=40, density=True, color="#4878a8", alpha=0.8,
            label="fluctuations")
    if target_var > 0:
        xs = np.linspace(values.min(), values.max(), 400)
        ax.plot(xs, np.exp(-xs * xs / (2 * target_var))
                / np.sqrt(2 * np.pi * target_var),
                "k-", lw=1.2, label="target normal")
    ax.set_xlabel("fluctuation of the linear statistic")
    ax.set_ylabel("density")
    ax.legend(frameon=False, fontsize=8)
    _style(ax)
    p = out_dir / "fluctuation_hist.png"
    fig.tight_layout()
    fig.savefig(p)
    plt.close(fig)
    paths.append(p)

    mgf = payload["mgf"]
    t = np.asarray(mgf["t"])
    fig, ax = plt.subplots(**_FIG_KW)
    ax.fill_between(t, mgf["band_lo"], mgf["band_hi"], color="#4878a8",
                    alpha=0.3, label=f"{int(mgf['band_level']*100)}% bootstrap band")
    ax.plot(t, mgf["log_mgf"], "o-", ms=3, lw=1, color="#2b4b6f",
            label="empirical log-MGF")
    if "target" in mgf:
        ax.plot(t, mgf["target"], "k--", lw=1.2, label="quadratic target")
    ax.set_xlabel("t")
    ax.set_ylabel("log MGF")
    ax.legend(frameon=False, fontsize=8)
    _style(ax)
    p = out_dir / "log_mgf.png"
    fig.tight_layout()
    fig.savefig(p)
    plt.close(fig)
    paths.append(p)

    rows = payload["discrepancy"]["rows"]
    R = [row["R"] for row in rows]
    v_over_r = [row["var_over_R"] for row in rows]
    err = [row["jackknife_se"] / row["R"] for row in rows]
    fig, ax = plt.subplots(**_FIG_KW)
    ax.errorbar(R, v_over_r, yerr=err, fmt="o-", ms=4, lw=1, color="#a85448",
                capsize=3)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("interval half-length R")
    ax.set_ylabel("Var(count discrepancy) / R")
    _style(ax)
    p = out_dir / "discrepancy_scan.png"
    fig.tight_layout()
    fig.savefig(p)
    plt.close(fig)
    paths.append(p)
    return paths
