"""Matplotlib figures for runs and batch reports (file output only)."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .joints import INDEX, JointId  # noqa: E402


def plot_run(inputs, outputs, path: str | Path, cycle_ms: int = 12,
             joints=(JointId.HipYawPitch, JointId.LHipPitch, JointId.LKneePitch)) -> None:
    """Torso pitch with mode bands, and requested vs measured angles of a few joints."""
    t = [k * cycle_ms / 1000 for k in range(len(inputs))]
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    ax0.plot(t, [math.degrees(i.pitch) for i in inputs], color="black", lw=1.2, label="torso pitch")
    ax0.plot(t, [math.degrees(i.roll) for i in inputs], color="grey", lw=0.8, label="torso roll")
    start = 0
    colors = {"BreakUp": "tab:red", "Waiting": "tab:orange", "HelpMe": "tab:purple"}
    for k in range(1, len(outputs) + 1):
        if k == len(outputs) or outputs[k].mode != outputs[start].mode:
            c = colors.get(outputs[start].mode.value)
            if c:
                ax0.axvspan(t[start], t[k - 1] + cycle_ms / 1000, color=c, alpha=0.2, lw=0)
            start = k
    ax0.set_ylabel("deg")
    ax0.legend(loc="upper right", fontsize=8)
    for j in joints:
        i = INDEX[j]
        line, = ax1.plot(t, [math.degrees(o.request[i]) for o in outputs], lw=1, label=f"{j.value} req")
        ax1.plot(t, [math.degrees(m.measured[i]) for m in inputs], lw=1, ls="--",
                 color=line.get_color(), label=f"{j.value} meas")
    ax1.set_xlabel("time [s]")
    ax1.set_ylabel("deg")
    ax1.legend(loc="upper right", fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_batch(stats, path: str | Path) -> None:
    """Bar chart of successes, BreakUps and HelpMe counts per variant."""
    names = [s.variant for s in stats]
    x = range(len(names))
    w = 0.27
    fig, ax = plt.subplots(figsize=(max(5, 1.6 * len(names)), 4))
    ax.bar([i - w for i in x], [s.successes for s in stats], w, label="successes")
    ax.bar(list(x), [s.breakups for s in stats], w, label="BreakUp")
    ax.bar([i + w for i in x], [s.helpme for s in stats], w, label="HelpMe")
    for i, s in zip(x, stats):
        ax.annotate(f"{s.success_rate:.0%}", (i - w, s.successes), ha="center", va="bottom", fontsize=8)
    ax.set_xticks(list(x), names)
    ax.set_ylabel("count")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
