"""Figure rendering for experiment reports.

One PNG per experiment, written next to the JSON/CSV output.  Figures are
derived from the report rows only, so a cached report re-renders the same
picture.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _new_axes(title, xlabel, ylabel):
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _cval(cell):
    if isinstance(cell, dict) and set(cell) == {"re", "im"}:
        return complex(float(cell["re"]), float(cell["im"]))
    return cell


def _plot_finite_bv(rows, ax):
    seeds = [r["seed"] for r in rows if "max_anomaly_dev" in r]
    devs = [max(r["max_anomaly_dev"], 1e-18) for r in rows if "max_anomaly_dev" in r]
    kinds = [r["kind"] for r in rows if "max_anomaly_dev" in r]
    for kind, marker in (("supertraceless", "o"), ("general", "s")):
        xs = [s for s, k in zip(seeds, kinds) if k == kind]
        ys = [d for d, k in zip(devs, kinds) if k == kind]
        if xs:
            ax.semilogy(xs, ys, marker, ms=3, label=kind)
    ax.axhline(1e-8, color="crimson", lw=0.8, label="tolerance")
    ax.legend(fontsize=8)


def _plot_hodge(rows, ax):
    seeds = [r["seed"] for r in rows if "max_ledger_dev" in r]
    ledger = [max(r["max_ledger_dev"], 1e-18) for r in rows if "max_ledger_dev" in r]
    norm = [max(r["normalized_constancy_dev"], 1e-18)
            for r in rows if "normalized_constancy_dev" in r]
    ax.semilogy(seeds, ledger, "o", ms=3, label="ledger drift")
    ax.semilogy(seeds, norm, "s", ms=3, label="normalized sdet drift")
    ax.axhline(1e-8, color="crimson", lw=0.8)
    ax.legend(fontsize=8)


def _plot_circle(rows, ax):
    pts = [(r["theta"], r["radius"], r["torsion"]) for r in rows if "torsion" in r]
    thetas = sorted({p[0] for p in pts})
    grid = np.linspace(min(thetas) * 0.5, max(thetas) * 1.1, 200)
    ax.plot(grid, 2.0 * np.abs(np.sin(grid / 2.0)), "-", lw=1.0,
            color="gray", label="2|sin(theta/2)|")
    for radius in sorted({p[1] for p in pts}):
        xs = [p[0] for p in pts if p[1] == radius]
        ys = [p[2] for p in pts if p[1] == radius]
        ax.plot(xs, ys, "o", ms=3, label=f"r = {radius}")
    ax.legend(fontsize=8)


def _plot_heat(rows, ax):
    sup = [(r["t"], r["value"]) for r in rows
           if r.get("quantity") == "remainder_sup"]
    err = [(r["t"], r["value"]) for r in rows
           if r.get("quantity") == "kernel_error"]
    if sup:
        ts, vals = zip(*sup)
        ax.loglog(ts, vals, "o-", ms=3, label="sup |S_N(t,x,x)|")
    if err:
        ts, vals = zip(*err)
        positive = [(t, v) for t, v in zip(ts, vals) if v > 0]
        if positive:
            ts, vals = zip(*positive)
            ax.loglog(ts, vals, "s--", ms=3, label="|K_N - oracle|")
    fit = [r for r in rows if r.get("quantity") == "remainder_exponent"]
    if fit and sup:
        slope = fit[0]["fitted"]
        ts = np.array([t for t, _ in sup])
        ref = sup[-1][1] * (ts / sup[-1][0]) ** slope
        ax.loglog(ts, ref, ":", lw=1.0, label=f"slope {slope:.3f}")
    ax.legend(fontsize=8)


def _plot_ruelle(rows, ax):
    grid = [(r["lambda"], _cval(r["zeta"]), _cval(r["zeta_closed"]))
            for r in rows if "zeta_closed" in r]
    if grid:
        lams, zs, closed = zip(*grid)
        ax.plot(lams, [z.real for z in zs], "o", ms=3, label="truncated product")
        ax.plot(lams, [z.real for z in closed], "-", lw=1.0, label="closed form")
    defects = [(r["lambda"], r["sdet_zeta_defect"]) for r in rows
               if "sdet_zeta_defect" in r]
    if defects:
        twin = ax.twinx()
        lams, ds = zip(*defects)
        twin.semilogy(lams, [max(d, 1e-18) for d in ds], "x", color="crimson",
                      ms=3, label="sdet-zeta defect")
        twin.set_ylabel("identity defect")
    ax.legend(fontsize=8)


def _plot_subshift(rows, ax):
    pts = [(r["alpha"], r["family"], _cval(r["zeta_at_zero"]))
           for r in rows if "zeta_at_zero" in r]
    for alpha in sorted({p[0] for p in pts}):
        xs = [p[1] for p in pts if p[0] == alpha]
        ys = [abs(p[2]) for p in pts if p[0] == alpha]
        ax.plot(xs, ys, "o-", ms=3, label=f"|zeta(0)|, alpha = {alpha:.4f}")
    ax.legend(fontsize=8)


_PLOTTERS = {
    "finite-bv": (_plot_finite_bv, "anomaly deviation per seed",
                  "seed", "max |log sdet drift - int str(theta)|"),
    "hodge-anomaly": (_plot_hodge, "Gram anomaly ledger",
                      "seed", "deviation"),
    "circle-torsion": (_plot_circle, "circle torsion across radii",
                       "holonomy angle", "torsion"),
    "heat-parametrix": (_plot_heat, "parametrix remainder scaling",
                        "t", "sup norm"),
    "ruelle-cat": (_plot_ruelle, "zeta on the lambda grid",
                   "lambda", "Re zeta"),
    "subshift-zeta": (_plot_subshift, "roof independence of zeta(0)",
                      "roof family", "|zeta(0)|"),
}


def render_figure(report: dict, out_dir: str) -> str:
    """Render the experiment's figure to <experiment>.png; returns the path."""
    experiment = report["config"]["experiment"]
    plotter, title, xlabel, ylabel = _PLOTTERS[experiment]
    fig, ax = _new_axes(title, xlabel, ylabel)
    plotter(report["rows"], ax)
    path = os.path.join(out_dir, f"{experiment}.png")
    os.makedirs(out_dir, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
