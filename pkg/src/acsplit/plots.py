"""Figure rendering for the experiment driver (headless, SVG output).

The CSV files are the authoritative outputs; these figures are the quick
visual check that a run reproduced the expected geometry.  Every figure
carries the resolved configuration of the run that produced it as a footer.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

matplotlib.rcParams.update({"font.size": 9, "svg.fonttype": "none"})


def _finish(fig, path, config_echo: str):
    if config_echo:
        fig.text(0.01, 0.005, config_echo, fontsize=6, color="0.4", family="monospace")
    fig.savefig(path, metadata={"Title": config_echo} if config_echo else None)
    plt.close(fig)


def plot_energy_trace(traces, path, c_eff_ref: float, r0: float, cw: float,
                      config_echo: str = ""):
    """Normalized energy vs effective time against the shrinking-circle perimeter."""
    fig, ax = plt.subplots(figsize=(5, 3.6), constrained_layout=True)
    t_max = 0.0
    for label, eps, trace in traces:
        t = np.asarray(trace.steps, dtype=float) * c_eff_ref * eps**2
        e = np.asarray(trace.energies) / cw
        ax.plot(t, e, lw=1.2, label=label)
        if t.size:
            t_max = max(t_max, float(t[-1]))
    if t_max > 0:
        tt = np.linspace(0.0, min(t_max, r0**2 / 2.0 * 0.999), 400)
        ax.plot(tt, 2.0 * np.pi * np.sqrt(r0**2 - 2.0 * tt), "k--", lw=1.0,
                label="circle perimeter")
    ax.set_xlabel(f"effective time  {c_eff_ref:g}" + r"$\,\varepsilon^2 k$")
    ax.set_ylabel("energy / interface constant")
    ax.legend(fontsize=7)
    _finish(fig, path, config_echo)


def plot_tau_sweep(rows, path, config_echo: str = ""):
    """Iterations-to-energy-level against nominal step size (log x)."""
    fig, ax = plt.subplots(figsize=(5, 3.6), constrained_layout=True)
    by_eps = {}
    for eps, tau, iters, capped in rows:
        by_eps.setdefault(eps, []).append((tau, iters, capped))
    for eps, entries in sorted(by_eps.items()):
        finite = [(t, i) for t, i, _ in entries if math.isfinite(t)]
        if finite:
            ts, its = zip(*sorted(finite))
            ax.semilogx(ts, its, "o-", ms=3, lw=1.0, label=f"eps={eps:g}")
        inf_pts = [i for t, i, _ in entries if math.isinf(t)]
        if inf_pts and finite:
            ax.axhline(inf_pts[0], color=ax.lines[-1].get_color(), ls=":", lw=0.8)
    ax.set_xlabel("nominal step size")
    ax.set_ylabel("iterations to energy level")
    ax.legend(fontsize=7)
    _finish(fig, path, config_echo)


def plot_obstacle_profile(sol, path, config_echo: str = ""):
    """Radial profile with coincidence radii and the optimal-transition overlay."""
    from .potentials import PROFILE_SEGMENT

    prob = sol.problem
    fig, ax = plt.subplots(figsize=(5, 3.6), constrained_layout=True)
    pad = 4.0 * prob.eps
    s = np.linspace(max(sol.r_i - pad, 1e-9), sol.r_o + pad, 1200)
    ax.plot(s, sol(s), lw=1.4, label="one-step profile")
    ax.plot(s, PROFILE_SEGMENT.fn((sol.r_new - s) / prob.eps), lw=1.0, ls="--",
            label="optimal transition")
    ax.axvline(prob.r, color="g", lw=0.8)
    ax.axvline(sol.r_i, color="r", lw=0.8)
    ax.axvline(sol.r_o, color="r", lw=0.8)
    ax.axhline(0.0, color="0.6", lw=0.6)
    ax.set_xlabel("radius")
    ax.set_ylabel("u")
    ax.set_title(f"d={prob.d}, r={prob.r:g}, eps={prob.eps:g}", fontsize=9)
    ax.legend(fontsize=7)
    _finish(fig, path, config_echo)


def plot_scaling(study, path, config_echo: str = ""):
    """Log-log radii displacements vs eps with linear and quadratic references."""
    fig, ax = plt.subplots(figsize=(5, 3.6), constrained_layout=True)
    eps = np.array([row.eps for row in study.rows])
    series = [
        ("r - r_i", [row.r_minus_ri for row in study.rows]),
        ("r_o - r", [row.ro_minus_r for row in study.rows]),
        ("r - r_new", [row.r_minus_rnew for row in study.rows]),
    ]
    for label, ys in series:
        ax.loglog(eps, ys, "o-", ms=3, lw=1.0, label=label)
    ref = np.sort(eps)
    ax.loglog(ref, ref, "k--", lw=0.8, label="eps")
    ax.loglog(ref, ref**2 / 2.0, "k:", lw=0.8, label="eps^2/2")
    ax.set_xlabel("eps")
    ax.set_ylabel("displacement")
    ax.set_title(f"d={study.d}, r={study.r:g}", fontsize=9)
    ax.legend(fontsize=7)
    _finish(fig, path, config_echo)


def plot_potentials(pots, path, config_echo: str = ""):
    """Potential wells and their transition profiles, side by side."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.6, 3.2), constrained_layout=True)
    u = np.linspace(-1.0, 1.0, 801)
    x = np.linspace(-3.0, 3.0, 801)
    for pot in pots:
        wv = pot.w_conc(u) + (0.0 if pot.family == "barrier" else pot.w_vex(u))
        ax1.plot(u, wv, lw=1.1, label=pot.id)
        ax2.plot(x, pot.profile.fn(x), lw=1.1, label=pot.id)
    ax1.set_xlabel("u")
    ax1.set_ylabel("W(u)")
    ax2.set_xlabel("x")
    ax2.set_ylabel("profile")
    ax1.legend(fontsize=6)
    _finish(fig, path, config_echo)
