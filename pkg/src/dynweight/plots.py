"""Figures for the CLI report: weight trajectories and per-seed sweep summaries."""

from __future__ import annotations

from fractions import Fraction

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .checkers import CompletionLedger, config_of, mode_of  # noqa: E402


def weight_trajectories(trace, path) -> None:
    """Step plot of every server's weight over the completion ledger."""
    cfg = config_of(trace)
    mode = mode_of(trace)
    ts, rows = [], []
    for t, cs in CompletionLedger.from_trace(trace).prefixes():
        m: dict = {}
        for c in cs:
            m[c.target] = m.get(c.target, 0) + c.delta
        ts.append(t)
        rows.append([float(m.get(s, 0)) for s in cfg.servers])
    end = trace.records[-1]["t"]
    ts.append(end)
    rows.append(rows[-1])
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, s in enumerate(cfg.servers):
        ax.step(ts, [r[i] for r in rows], where="post", label=str(s))
    if mode in ("rpwr", "dwas"):
        floor = float(cfg.total_weight / (2 * (cfg.n - cfg.f)))
        ax.axhline(floor, color="black", linestyle="--", linewidth=1, label="floor")
    seed = trace.records[0]["payload"]["seed"]
    ax.set_title(f"{trace.records[0]['payload']['scenario']} seed {seed}: server weights")
    ax.set_xlabel("trace event")
    ax.set_ylabel("weight")
    ax.legend(fontsize="small", ncol=2)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def sweep_summary(rows, path) -> None:
    """``rows``: (seed, steps, min weight or None, threshold or None) per run."""
    seeds = [r[0] for r in rows]
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    a1.plot(seeds, [r[1] for r in rows], ".", markersize=3)
    a1.set_ylabel("steps to quiescence")
    mins = [(r[0], r[2], r[3]) for r in rows if r[2] is not None]
    if mins:
        a2.plot([m[0] for m in mins], [float(Fraction(m[1])) for m in mins], ".", markersize=3, label="min weight")
        floors = [m for m in mins if m[2] is not None]
        if floors:
            a2.plot([m[0] for m in floors], [float(Fraction(m[2])) for m in floors], "k_", markersize=6,
                    label="floor")
        a2.legend(fontsize="small")
    a2.set_ylabel("weight")
    a2.set_xlabel("seed")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
