"""Energies, executable inequality checks, and effective-time-step fitting.

The scheme is judged here: the interface energy must fall monotonically, each
step must dissipate at least its predicted three-term budget, the iterates
must stay within the a-priori drift bound, and the extracted circle radius
must shrink like mean curvature flow with an effective step proportional to
eps^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import ScalarField, h1_seminorm, lp_norm
from .potentials import Potential

TRACE_FORMAT = "acsplit-trace-v1"


def mm_energy(u: ScalarField, eps: float, spec: Potential) -> float:
    """Interface energy (eps/2)|grad u|^2 + W(u)/eps on the grid.

    Barrier kinds clip to the box first (ADMM iterates may overshoot it by
    the solver tolerance); a violation beyond 1e-6 is a genuine error since
    the energy would be infinite.
    """
    vals = u.values
    if spec.family == "barrier":
        overshoot = float(np.max(np.abs(vals))) - 1.0
        if overshoot > 1e-6:
            raise ValueError(
                f"barrier energy undefined: |u| exceeds the box by {overshoot:.2e}"
            )
        vals = np.clip(vals, -1.0, 1.0)
        w_vals = spec.w_conc(vals)
    else:
        w_vals = spec.w(vals)
    grad_sq = h1_seminorm(u) ** 2
    return float(eps / 2.0 * grad_sq + u.grid.h**2 * np.sum(w_vals) / eps)


def dissipation_check(u0: ScalarField, u1: ScalarField, eps: float, tau: float,
                      spec: Potential, slack: float = 1e-6) -> dict:
    """Three-term dissipation budget of one step against the energy drop.

    Checks (eps/2)[d]_H1^2 + (eps/tau)|d|_2^2 + (cbar/eps)|d|_p^p <= E0 - E1
    for every stored curvature pair (p, cbar); for infinite tau the middle
    term is absent.  Returns lhs/rhs and a verdict with additive slack.
    """
    if not spec.curvature_pairs:
        raise ValueError(f"{spec.id} has no curvature constants; the bound does not apply")
    delta = ScalarField(u0.grid, u1.values - u0.values)
    inv_tau = 0.0 if math.isinf(tau) else 1.0 / tau
    base = eps / 2.0 * h1_seminorm(delta) ** 2 + eps * inv_tau * lp_norm(delta, 2) ** 2
    rhs = mm_energy(u0, eps, spec) - mm_energy(u1, eps, spec)
    lhs = 0.0
    for p, cbar in spec.curvature_pairs:
        lhs = max(lhs, base + cbar / eps * lp_norm(delta, p) ** p)
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs + slack)}


def drift_bound(e0: float, n_steps: int, eps: float, p: float) -> float:
    """A-priori bound on |u_N - u_0|_p from the initial energy alone.

    For p = 2 this is the simple form sqrt(2 N eps E0); general p gives
    E0^(1/p) (N eps^(1/(p-1)))^(1-1/p).
    """
    if e0 < 0:
        raise ValueError("initial energy must be nonnegative")
    if n_steps == 0:
        return 0.0
    if p == 2:
        return math.sqrt(2.0 * n_steps * eps * e0)
    return e0 ** (1.0 / p) * (n_steps * eps ** (1.0 / (p - 1.0))) ** (1.0 - 1.0 / p)


def interface_radius(u: ScalarField):
    """Radius of the positive region by area counting: r = sqrt(area/pi).

    Robust at desk-scale resolution (bias O(h)); returns None when the
    positive set is empty.
    """
    count = int(np.count_nonzero(u.values > 0))
    if count == 0:
        return None
    return float(math.sqrt(count * u.grid.h**2 / math.pi))


@dataclass
class EnergyTrace:
    """Per-step records of a run plus its resolved configuration."""

    metadata: dict = field(default_factory=dict)
    steps: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    radii: list = field(default_factory=list)
    l2_moves: list = field(default_factory=list)
    lp_moves: list = field(default_factory=list)
    h1_moves: list = field(default_factory=list)
    inner_iters: list = field(default_factory=list)
    failed: bool = False
    failure: str = ""
    final_field: ScalarField | None = None

    def append(self, step, energy, radius, l2_move, lp_move, h1_move, inner_iters):
        self.steps.append(step)
        self.energies.append(energy)
        self.radii.append(radius)
        self.l2_moves.append(l2_move)
        self.lp_moves.append(lp_move)
        self.h1_moves.append(h1_move)
        self.inner_iters.append(inner_iters)

    def __len__(self):
        return len(self.steps)

    def energy_monotone(self, rel_slack: float = 1e-8) -> bool:
        e = self.energies
        return all(
            e[i + 1] <= e[i] + rel_slack * (1.0 + abs(e[i])) for i in range(len(e) - 1)
        )


def trace_metadata(cfg) -> dict:
    return {
        "potential": cfg.potential.id,
        "n": cfg.grid.n,
        "length": cfg.grid.length,
        "eps": cfg.eps,
        "tau": cfg.tau,
    }


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_trace_csv(trace: EnergyTrace, path) -> None:
    """CSV with `# key=value` metadata lines; deterministic for fixed config.

    Wall time is intentionally not written: identical configurations must
    produce bit-identical files.
    """
    lines = [f"# format={TRACE_FORMAT}"]
    for key in sorted(trace.metadata):
        if key == "wall_time":
            continue
        lines.append(f"# {key}={_fmt(trace.metadata[key])}")
    if trace.failed:
        lines.append(f"# failed={trace.failure}")
    lines.append("step,energy,radius,l2_move,lp_move,h1_move,inner_iters")
    for i in range(len(trace)):
        lines.append(",".join([
            str(trace.steps[i]),
            _fmt(trace.energies[i]),
            _fmt(trace.radii[i]),
            _fmt(trace.l2_moves[i]),
            _fmt(trace.lp_moves[i]),
            _fmt(trace.h1_moves[i]),
            str(trace.inner_iters[i]),
        ]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace_csv(path) -> EnergyTrace:
    trace = EnergyTrace()
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                trace.metadata[key] = val
                continue
            if line.startswith("step,"):
                continue
            parts = line.split(",")
            trace.append(
                step=int(parts[0]),
                energy=float(parts[1]),
                radius=float(parts[2]) if parts[2] else None,
                l2_move=float(parts[3]),
                lp_move=float(parts[4]),
                h1_move=float(parts[5]),
                inner_iters=int(parts[6]),
            )
    if "failed" in trace.metadata:
        trace.failed = True
        trace.failure = trace.metadata["failed"]
    return trace


@dataclass
class FitResult:
    """Effective-step coefficient: time advanced per step is c_eff * eps^2."""

    c_eff: float
    residual: float
    n_points: int


def fit_effective_step(trace: EnergyTrace, eps: float,
                       min_radius_cells: float = 5.0) -> FitResult:
    """Least-squares fit r_k^2 = r_0^2 - 2 c_eff eps^2 k over resolved radii.

    Samples with r below `min_radius_cells` grid cells are excluded: radii
    near extinction are not resolved by area counting.
    """
    h = float(trace.metadata.get("length", 1.0)) / int(trace.metadata["n"])
    ks, ys = [], []
    for k, r in zip(trace.steps, trace.radii):
        if r is not None and r >= min_radius_cells * h:
            ks.append(float(k))
            ys.append(r * r)
    if len(ks) < 10:
        raise ValueError(f"need at least 10 resolved radius samples, have {len(ks)}")
    A = np.vstack([np.asarray(ks), np.ones(len(ks))]).T
    coef, res, *_ = np.linalg.lstsq(A, np.asarray(ys), rcond=None)
    slope = float(coef[0])
    rms = float(np.sqrt(res[0] / len(ks))) if res.size else 0.0
    return FitResult(c_eff=-slope / (2.0 * eps**2), residual=rms, n_points=len(ks))
