"""Experiment driver: reproduce the scheme's figures at desk scale.

Subcommands take `key=value` arguments (optionally preloaded from a config
file of the same format, `#` comments allowed; command-line pairs override
the file).  Unknown keys are errors, never silently ignored.  Every CSV
embeds the resolved configuration as `# key=value` comment lines and a
format-version line; figures are rendered next to the CSVs as SVG.

Exit codes: 0 success, 1 usage error, 2 run failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics, plots, radial, stepper, thresholding, verify
from .fields import GridSpec, ScalarField, make_circle, save_field
from .potentials import parse_potential, normalization_constant, optimal_profile
from .stepper import StepError, StepperConfig

USAGE_EXIT, RUN_EXIT, VERIFY_EXIT = 1, 2, 3

DEFAULT_C_EFF = {"wr": 0.29, "wbar": 0.5, "standard": 0.25,
                 "barrier_quad": 0.5, "barrier_abs": 0.5, "elloneg": 0.5}


class UsageError(Exception):
    pass


def _parse_tau(text: str) -> float:
    if text in ("inf", "Inf", "INF"):
        return math.inf
    return float(text)


def _parse_float_list(text: str):
    return [float(t) for t in text.split(",") if t]


def _parse_tau_list(text: str):
    return [_parse_tau(t) for t in text.split(",") if t]


# key -> (parser, default); None default means required
KEYS = {
    "simulate": {
        "potential": (str, "wr:R=100"),
        "n": (int, 128),
        "length": (float, 1.0),
        "eps": (_parse_float_list, [0.1]),
        "tau": (_parse_tau, 100.0),
        "steps": (int, 200),
        "r0": (float, 0.4),
        "c_eff_ref": (float, None),
    },
    "sweep-tau": {
        "potential": (str, "wr:R=100"),
        "n": (int, 128),
        "length": (float, 1.0),
        "eps": (_parse_float_list, [0.1, 0.05]),
        "taus": (_parse_tau_list, [0.01, 0.1, 1.0, 10.0, 100.0, math.inf]),
        "level": (float, 2.0),
        "max_steps": (int, 500),
        "r0": (float, 0.4),
    },
    "mbo": {
        "n": (int, 256),
        "length": (float, 1.0),
        "eps": (float, 0.05),
        "steps": (int, 20),
        "r0": (float, 0.4),
    },
    "obstacle": {
        "r": (float, 2.0),
        "d": (int, 3),
        "eps": (_parse_float_list, [0.05]),
        "samples": (int, 1200),
    },
    "verify": {
        "only": (str, ""),
    },
    "profile": {
        "potentials": (str, "wr:R=1,wr:R=100,wbar,standard,barrier_abs,barrier_quad"),
        "xmax": (float, 3.0),
        "samples": (int, 801),
    },
}


def parse_kv_config(subcommand: str, pairs, config_path=None) -> dict:
    """Resolve config-file lines and key=value pairs against the known keys."""
    known = KEYS[subcommand]
    raw = {}
    if config_path:
        for lineno, line in enumerate(Path(config_path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{config_path}:{lineno}: expected key=value, got {line!r}")
            key, _, val = line.partition("=")
            raw[key.strip()] = val.strip()
    for pair in pairs:
        if "=" not in pair:
            raise UsageError(f"expected key=value argument, got {pair!r}")
        key, _, val = pair.partition("=")
        raw[key.strip()] = val.strip()
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise UsageError(
            f"unknown key(s) for {subcommand}: {', '.join(unknown)} "
            f"(known: {', '.join(sorted(known))})"
        )
    resolved = {}
    for key, (parser, default) in known.items():
        if key in raw:
            try:
                resolved[key] = parser(raw[key])
            except ValueError as exc:
                raise UsageError(f"bad value for {key}: {raw[key]!r} ({exc})") from None
        else:
            resolved[key] = default
    return resolved


def _echo(subcommand: str, cfg: dict) -> str:
    def fmt(v):
        if isinstance(v, list):
            return ",".join(fmt(x) for x in v)
        if isinstance(v, float) and math.isinf(v):
            return "inf"
        if isinstance(v, float):
            return format(v, "g")
        return str(v)

    parts = [subcommand] + [f"{k}={fmt(cfg[k])}" for k in sorted(cfg)]
    return " ".join(parts)


def _write_config_echo(out: Path, name: str, echo: str):
    (out / name).write_text(f"# format=acsplit-config-v1\n{echo}\n")


def _eps_tag(eps: float) -> str:
    return format(eps, "g").replace(".", "p")


# -- subcommands -------------------------------------------------------------

def cmd_simulate(cfg: dict, out: Path, threads: int) -> int:
    pot = parse_potential(cfg["potential"])
    grid = GridSpec(cfg["n"], cfg["length"])
    c_ref = cfg["c_eff_ref"]
    if c_ref is None:
        c_ref = DEFAULT_C_EFF.get(pot.kind, 0.5)
    cw = normalization_constant(pot)
    echo = _echo("simulate", cfg)
    traces = []
    for eps in cfg["eps"]:
        scfg = StepperConfig(grid=grid, potential=pot, eps=eps, tau=cfg["tau"])
        u0 = make_circle(grid, cfg["r0"])
        trace = stepper.run(u0, scfg, cfg["steps"])
        trace.metadata.update(r0=cfg["r0"], c_eff_ref=c_ref, command=echo)
        tag = _eps_tag(eps)
        diagnostics.write_trace_csv(trace, out / f"trace_eps{tag}.csv")
        if trace.final_field is not None:
            save_field(trace.final_field, out / f"final_eps{tag}.acsf")
        traces.append((f"eps={eps:g}", eps, trace))
        print(f"simulate: eps={eps:g} steps={len(trace)} "
              f"wall={trace.metadata['wall_time']:.2f}s"
              + (f" FAILED: {trace.failure}" if trace.failed else ""))
        if trace.failed:
            plots.plot_energy_trace(traces, out / "energy.svg", c_ref, cfg["r0"], cw, echo)
            print(f"run failure: {trace.failure}", file=sys.stderr)
            return RUN_EXIT
    plots.plot_energy_trace(traces, out / "energy.svg", c_ref, cfg["r0"], cw, echo)
    _write_config_echo(out, "simulate_config.txt", echo)
    return 0


def _iterations_to_level(grid, pot, eps, tau, r0, level_abs, cap):
    scfg = StepperConfig(grid=grid, potential=pot, eps=eps, tau=tau)
    u = make_circle(grid, r0)
    ws = stepper.AdmmWorkspace()
    for k in range(1, cap + 1):
        u, rep = stepper.step(u, scfg, ws)
        if rep.energy_after <= level_abs:
            return k, False
    return cap, True


def cmd_sweep_tau(cfg: dict, out: Path, threads: int) -> int:
    pot = parse_potential(cfg["potential"])
    grid = GridSpec(cfg["n"], cfg["length"])
    cw = normalization_constant(pot)
    echo = _echo("sweep-tau", cfg)
    jobs = []
    for eps in cfg["eps"]:
        for tau in cfg["taus"]:
            if math.isinf(tau) and pot.family == "quartic":
                continue
            jobs.append((eps, tau))
    level_abs = cfg["level"] * cw  # level is measured in perimeter units

    def work(job):
        eps, tau = job
        iters, capped = _iterations_to_level(
            grid, pot, eps, tau, cfg["r0"], level_abs, cfg["max_steps"]
        )
        return (eps, tau, iters, capped)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, jobs))
    else:
        rows = [work(j) for j in jobs]

    lines = ["# format=acsplit-sweep-v1"]
    lines += [f"# {part}" for part in echo.split(" ", 1)[1:]]
    lines.append("eps,tau,iterations,capped")
    for eps, tau, iters, capped in rows:
        tau_s = "inf" if math.isinf(tau) else format(tau, ".17g")
        lines.append(f"{eps:.17g},{tau_s},{iters},{int(capped)}")
    (out / "sweep_tau.csv").write_text("\n".join(lines) + "\n")
    plots.plot_tau_sweep(rows, out / "sweep_tau.svg", echo)
    for eps, tau, iters, capped in rows:
        flag = " (cap reached)" if capped else ""
        tau_s = "inf" if math.isinf(tau) else format(tau, "g")
        print(f"sweep-tau: eps={eps:g} tau={tau_s}: {iters} iterations{flag}")
    return 0


def cmd_mbo(cfg: dict, out: Path, threads: int) -> int:
    grid = GridSpec(cfg["n"], cfg["length"])
    eps = cfg["eps"]
    echo = _echo("mbo", cfg)
    state = thresholding.MboState.from_field(make_circle(grid, cfg["r0"]))
    lines = ["# format=acsplit-mbo-v1"]
    lines += [f"# {p}" for p in echo.split(" ")[1:]]
    lines.append("step,radius,eo_energy")
    radii = []
    for k in range(1, cfg["steps"] + 1):
        state = thresholding.mbo_step(state, eps)
        r = diagnostics.interface_radius(state.u)
        en = thresholding.eo_energy(state.u_tilde, eps**2 / 2.0)
        radii.append((k, r))
        lines.append(f"{k},{'' if r is None else format(r, '.17g')},{en:.17g}")
    (out / "mbo.csv").write_text("\n".join(lines) + "\n")
    import matplotlib.pyplot as plt  # backend already set by plots import

    fig, ax = plt.subplots(figsize=(5, 3.6), constrained_layout=True)
    ks = [k for k, r in radii if r is not None]
    rs = [r for _, r in radii if r is not None]
    ax.plot(ks, np.square(rs), "o-", ms=3, lw=1.0, label="measured r^2")
    kk = np.asarray(ks, dtype=float)
    ax.plot(kk, cfg["r0"] ** 2 - kk * eps**2, "k--", lw=0.9,
            label="r0^2 - k eps^2 (mean curvature)")
    ax.set_xlabel("iteration")
    ax.set_ylabel("squared radius")
    ax.legend(fontsize=7)
    fig.text(0.01, 0.005, echo, fontsize=6, color="0.4", family="monospace")
    fig.savefig(out / "mbo.svg")
    plt.close(fig)
    print(f"mbo: {cfg['steps']} iterations, final radius "
          f"{rs[-1] if rs else float('nan'):.4f}")
    return 0


def cmd_obstacle(cfg: dict, out: Path, threads: int) -> int:
    echo = _echo("obstacle", cfg)
    eps_list = cfg["eps"]
    if len(eps_list) == 1:
        prob = radial.RadialProblem(r=cfg["r"], eps=eps_list[0], d=cfg["d"])
        sol = radial.radial_solution(prob)
        s = np.linspace(max(sol.r_i - 4 * prob.eps, 1e-9), sol.r_o + 4 * prob.eps,
                        cfg["samples"])
        from .potentials import PROFILE_SEGMENT

        overlay = PROFILE_SEGMENT.fn((sol.r_new - s) / prob.eps)
        lines = ["# format=acsplit-obstacle-v1"]
        lines += [f"# {p}" for p in echo.split(" ")[1:]]
        for name, val in (("r_i", sol.r_i), ("r_o", sol.r_o), ("r_new", sol.r_new),
                          ("a", sol.a), ("b", sol.b), ("c", sol.c), ("e", sol.e)):
            lines.append(f"# {name}={val:.17g}")
        lines.append("s,u,optimal_overlay")
        for si, ui, oi in zip(s, sol(s), overlay):
            lines.append(f"{si:.17g},{ui:.17g},{oi:.17g}")
        (out / "obstacle_profile.csv").write_text("\n".join(lines) + "\n")
        plots.plot_obstacle_profile(sol, out / "obstacle_profile.svg", echo)
        print(f"obstacle: d={cfg['d']} r={cfg['r']:g} eps={eps_list[0]:g}: "
              f"r_i={sol.r_i:.6f} r_new={sol.r_new:.6f} r_o={sol.r_o:.6f}")
    else:
        study = radial.scaling_study(cfg["r"], cfg["d"], eps_list)
        radial.write_scaling_csv(
            study, out / "obstacle_scaling.csv",
            metadata={"format": "acsplit-obstacle-scaling-v1", "command": echo,
                      **{f"slope_{k}": f"{v:.6g}" for k, v in study.slopes.items()}},
        )
        plots.plot_scaling(study, out / "obstacle_scaling.svg", echo)
        for eps, msg in study.errors:
            print(f"obstacle: eps={eps:g} skipped: {msg}", file=sys.stderr)
        print(f"obstacle: d={cfg['d']} slopes: "
              + " ".join(f"{k}={v:.3f}" for k, v in study.slopes.items()))
    return 0


def cmd_verify(cfg: dict, out: Path, threads: int, seed: int) -> int:
    results = verify.run_checks(only=cfg["only"] or None, seed=seed)
    lines = [f"# format=acsplit-verify-v1", f"# seed={seed}"]
    n_fail = 0
    for check in results:
        line = check.line()
        print(line)
        lines.append(line)
        n_fail += 0 if check.ok else 1
    (out / "verify_report.txt").write_text("\n".join(lines) + "\n")
    print(f"verify: {len(results) - n_fail}/{len(results)} checks passed")
    return 0 if n_fail == 0 else VERIFY_EXIT


def cmd_profile(cfg: dict, out: Path, threads: int) -> int:
    pots = [parse_potential(pid) for pid in _split_ids(cfg["potentials"])]
    echo = _echo("profile", cfg)
    u = np.linspace(-1.0, 1.0, cfg["samples"])
    x = np.linspace(-cfg["xmax"], cfg["xmax"], cfg["samples"])
    lines = ["# format=acsplit-profile-v1"]
    lines += [f"# {p}" for p in echo.split(" ")[1:]]
    header = ["u"] + [f"W[{p.id}]" for p in pots] + ["x"] + [f"phi[{p.id}]" for p in pots]
    lines.append(",".join(header))
    wvals = [p.w_conc(u) + (0.0 if p.family == "barrier" else p.w_vex(u)) for p in pots]
    pvals = [optimal_profile(p, x) for p in pots]
    for i in range(cfg["samples"]):
        row = [f"{u[i]:.17g}"] + [f"{wv[i]:.17g}" for wv in wvals]
        row += [f"{x[i]:.17g}"] + [f"{pv[i]:.17g}" for pv in pvals]
        lines.append(",".join(row))
    (out / "profiles.csv").write_text("\n".join(lines) + "\n")
    plots.plot_potentials(pots, out / "profiles.svg", echo)
    print(f"profile: wrote {len(pots)} potentials to profiles.csv")
    return 0


def _split_ids(text: str):
    return [t for t in (s.strip() for s in text.split(",")) if t]


# -- entry point -------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def main(argv=None) -> int:
    parser = _Parser(
        prog="acsplit",
        description="Convex-concave splitting laboratory for the Allen-Cahn equation.",
    )
    parser.add_argument("command", choices=sorted(KEYS))
    parser.add_argument("pairs", nargs="*", metavar="key=value")
    parser.add_argument("--config", metavar="PATH", default=None)
    parser.add_argument("--out", metavar="DIR", default=".")
    parser.add_argument("--threads", type=int, default=1, metavar="N")
    parser.add_argument("--seed", type=int, default=0, metavar="N")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT

    try:
        cfg = parse_kv_config(args.command, args.pairs, args.config)
    except (UsageError, OSError) as exc:
        print(f"acsplit: {exc}", file=sys.stderr)
        return USAGE_EXIT

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "simulate":
            return cmd_simulate(cfg, out, args.threads)
        if args.command == "sweep-tau":
            return cmd_sweep_tau(cfg, out, args.threads)
        if args.command == "mbo":
            return cmd_mbo(cfg, out, args.threads)
        if args.command == "obstacle":
            return cmd_obstacle(cfg, out, args.threads)
        if args.command == "verify":
            return cmd_verify(cfg, out, args.threads, args.seed)
        if args.command == "profile":
            return cmd_profile(cfg, out, args.threads)
    except (StepError, ArithmeticError) as exc:
        print(f"acsplit {args.command}: run failed: {exc}", file=sys.stderr)
        return RUN_EXIT
    except ValueError as exc:
        print(f"acsplit {args.command}: {exc}", file=sys.stderr)
        return USAGE_EXIT
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
