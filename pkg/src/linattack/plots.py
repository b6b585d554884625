"""Standalone SVG figures for experiment rows."""
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def objective_vs_eta(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    groups = {}
    for r in rows:
        groups.setdefault((r.attack, r.label), []).append(r)
    for (attack, label), rs in sorted(groups.items()):
        rs = sorted(rs, key=lambda r: r.eta)
        x = [r.eta_fraction if r.eta_fraction is not None else r.eta for r in rs]
        ax.plot(x, [r.objective for r in rs], marker="o", label=f"{attack} {label}".strip())
    frac = any(r.eta_fraction is not None for r in rows)
    ax.set_xlabel("eta / sigma_m" if frac else "eta")
    ax.set_ylabel("objective")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def beta_bars(row, path, names=None):
    m = len(row.beta_before)
    idx = np.arange(m)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(idx - 0.2, row.beta_before, width=0.4, label="orig")
    ax.bar(idx + 0.2, row.beta_after, width=0.4, label=row.attack)
    ax.set_xticks(idx)
    ax.set_xticklabels(names or [str(k + 1) for k in idx])
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_ylabel("coefficient")
    ax.set_title(f"eta = {row.eta:.4g}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def traces(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for r in rows:
        if r.trace:
            lab = f"{r.attack} eta={r.eta:.3g}" + ("" if r.seed is None else f" seed={r.seed}")
            ax.plot(np.arange(len(r.trace)), r.trace, label=lab)
    ax.set_xscale("symlog")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def emit(rows, out_dir, fit=None):
    out = {}
    if not rows:
        return out
    out["objective_svg"] = os.path.join(out_dir, "objective_vs_eta.svg")
    objective_vs_eta(rows, out["objective_svg"])
    last = max(rows, key=lambda r: r.eta)
    out["beta_svg"] = os.path.join(out_dir, "beta_before_after.svg")
    beta_bars(last, out["beta_svg"])
    if any(r.trace for r in rows):
        out["trace_svg"] = os.path.join(out_dir, "traces.svg")
        traces(rows, out["trace_svg"])
    return out
