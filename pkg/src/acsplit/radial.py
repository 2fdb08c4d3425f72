"""Closed-form radial solutions of the box-constrained infinite-step problem.

A ball of radius r evolving under the barrier-potential split with infinite
step size admits an explicit piecewise solution in dimension d >= 3: the
field sticks to +1 inside an inner radius r_i, to -1 outside an outer radius
r_o, and follows matched fundamental-solution branches in between.  The two
radii solve the algebraic system

    r_i^2 + r_o^2 = 2 r^2 - 4 (d-2) eps^2,      r_i^d + r_o^d = 2 r^d,

and the zero crossing r_new of the profile measures how far the interface
actually moved in one step - quadratically in eps, although r - r_i and
r_o - r are linear in eps.

All root finding is bisection: monotonicity of the auxiliary function is
known, and bisection stays robust arbitrarily close to the eps -> 0 limit.
Dimension d = 2 is excluded; the coefficient formulas divide by d - 2 and
the logarithmic-kernel case is not covered here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


@dataclass(frozen=True)
class RadialProblem:
    """Initial interface radius r, transition scale eps, dimension d >= 3."""

    r: float
    eps: float
    d: int

    def __post_init__(self):
        if self.d == 2:
            raise ValueError("dimension 2 is unsupported (formulas divide by d-2)")
        if self.d < 3:
            raise ValueError(f"dimension must be >= 3, got {self.d}")
        if not (self.r > 0 and self.eps > 0):
            raise ValueError("r and eps must be positive")
        if not self.r > 2.0 * self.eps * math.sqrt(self.d - 2):
            raise ValueError(
                f"need r > 2 eps sqrt(d-2) = {2 * self.eps * math.sqrt(self.d - 2):.4g} "
                f"for the radii system to be solvable (r={self.r}, eps={self.eps}, d={self.d})"
            )


def xi(s, prob: RadialProblem):
    """Auxiliary function whose root on (0, r) is the inner radius.

    xi(s) = sqrt(2r^2 - 4(d-2)eps^2 - s^2) - (2r^d - s^d)^(1/d); strictly
    decreasing, positive at 0 and negative at r.
    """
    s = np.asarray(s, dtype=float)
    r, eps, d = prob.r, prob.eps, prob.d
    radicand = 2.0 * r * r - 4.0 * (d - 2) * eps * eps - s * s
    if np.any(radicand < 0):
        raise ValueError("xi evaluated outside its domain (negative radicand)")
    return np.sqrt(radicand) - (2.0 * r**d - s**d) ** (1.0 / d)


def _bisect(f, lo: float, hi: float, atol: float) -> float:
    flo, fhi = f(lo), f(hi)
    if not (flo > 0 > fhi or flo < 0 < fhi):
        raise ValueError(f"no sign change on bracket [{lo}, {hi}]: f={flo:.3e}, {fhi:.3e}")
    while hi - lo > atol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_radii(prob: RadialProblem) -> tuple[float, float]:
    """Inner and outer coincidence radii by bisection to 1e-12 * r."""
    r_i = _bisect(lambda s: float(xi(s, prob)), 0.0, prob.r, atol=1e-12 * prob.r)
    r_o = (2.0 * prob.r**prob.d - r_i**prob.d) ** (1.0 / prob.d)
    return r_i, r_o


@dataclass(frozen=True)
class RadialSolution:
    """Piecewise radial profile with its coincidence radii and coefficients."""

    problem: RadialProblem
    r_i: float
    r_o: float
    a: float
    b: float
    c: float
    e: float
    r_new: float = field(init=False, default=math.nan)

    def __post_init__(self):
        object.__setattr__(self, "r_new", new_radius(self))

    def __call__(self, s):
        """Evaluate the profile u(s): 1 inside r_i, -1 outside r_o."""
        s = np.asarray(s, dtype=float)
        r, eps, d = self.problem.r, self.problem.eps, self.problem.d
        de2 = d * eps * eps
        with np.errstate(divide="ignore", invalid="ignore"):
            inner = (
                1.0
                + self.r_i**2 / (2.0 * (d - 2) * eps**2)
                - self.r_i**d * s ** (2.0 - d) / ((d - 2) * de2)
                - s**2 / (2.0 * de2)
            )
            outer = (
                -1.0
                - self.r_o**2 / (2.0 * (d - 2) * eps**2)
                + self.r_o**d * s ** (2.0 - d) / ((d - 2) * de2)
                + s**2 / (2.0 * de2)
            )
        out = np.where(s <= r, inner, outer)
        out = np.where(s <= self.r_i, 1.0, out)
        out = np.where(s >= self.r_o, -1.0, out)
        return out if out.shape else float(out)

    def derivative(self, s):
        """du/ds; on (r_i, r) this is ((r_i/s)^d - 1) s / (d eps^2)."""
        s = np.asarray(s, dtype=float)
        r, eps, d = self.problem.r, self.problem.eps, self.problem.d
        de2 = d * eps * eps
        with np.errstate(divide="ignore", invalid="ignore"):
            inner = ((self.r_i / s) ** d - 1.0) * s / de2
            outer = (1.0 - (self.r_o / s) ** d) * s / de2
        out = np.where(s <= r, inner, outer)
        out = np.where((s <= self.r_i) | (s >= self.r_o), 0.0, out)
        return out if out.shape else float(out)


def radial_solution(prob: RadialProblem) -> RadialSolution:
    """Solve the radii system and assemble the piecewise profile."""
    r_i, r_o = solve_radii(prob)
    d, eps = prob.d, prob.eps
    omega = unit_ball_volume(d)
    return RadialSolution(
        problem=prob,
        r_i=r_i,
        r_o=r_o,
        a=1.0 + r_i**2 / (2.0 * (d - 2) * eps**2),
        b=omega * r_i**d / eps**2,
        c=-(1.0 + r_o**2 / (2.0 * (d - 2) * eps**2)),
        e=-omega * r_o**d / eps**2,
    )


def new_radius(sol: RadialSolution) -> float:
    """Zero crossing of the profile, bisected on (r_i, r) to 1e-12 * r.

    The profile is strictly decreasing there with u(r_i) = 1, so the crossing
    is unique; it measures the one-step displacement of the interface.
    """
    prob = sol.problem
    lo, hi = sol.r_i, prob.r
    if sol(hi) > 0:  # extremely small eps: crossing collapses onto r
        return hi
    return _bisect(lambda s: float(sol(s)), lo, hi, atol=1e-12 * prob.r)


def profile_comparison(sol: RadialSolution, n_samples: int = 2001) -> float:
    """Max deviation from the finite-segment transition centered at the crossing.

    Samples |u(s) - phi((r_new - s)/eps)| for the closed-form box-potential
    profile phi on the band of width 2*sqrt(2)*eps around r_new.
    """
    from .potentials import PROFILE_SEGMENT

    eps = sol.problem.eps
    band = 2.0 * math.sqrt(2.0) * eps
    s = np.linspace(sol.r_new - band, sol.r_new + band, n_samples)
    s = s[s > 0]
    ref = PROFILE_SEGMENT.fn((sol.r_new - s) / eps)
    return float(np.max(np.abs(sol(s) - ref)))


@dataclass
class ScalingRow:
    eps: float
    r_minus_ri: float
    ro_minus_r: float
    r_minus_rnew: float


@dataclass
class ScalingStudy:
    r: float
    d: int
    rows: list
    errors: list
    slopes: dict  # column -> fitted log-log slope (nan with < 2 rows)


def scaling_study(r: float, d: int, eps_list) -> ScalingStudy:
    """One row (eps, r - r_i, r_o - r, r - r_new) per eps, plus log-log slopes.

    Rows whose eps violates the problem constraint are skipped and recorded
    in `errors`.
    """
    rows, errors = [], []
    for eps in eps_list:
        try:
            prob = RadialProblem(r=r, eps=eps, d=d)
            sol = radial_solution(prob)
        except ValueError as exc:
            errors.append((eps, str(exc)))
            continue
        rows.append(ScalingRow(eps, r - sol.r_i, sol.r_o - r, r - sol.r_new))
    slopes = {}
    for name in ("r_minus_ri", "ro_minus_r", "r_minus_rnew"):
        vals = [(row.eps, getattr(row, name)) for row in rows if getattr(row, name) > 0]
        if len(vals) >= 2:
            lx = np.log([v[0] for v in vals])
            ly = np.log([v[1] for v in vals])
            slopes[name] = float(np.polyfit(lx, ly, 1)[0])
        else:
            slopes[name] = math.nan
    return ScalingStudy(r=r, d=d, rows=rows, errors=errors, slopes=slopes)


def write_scaling_csv(study: ScalingStudy, path, metadata: dict | None = None) -> None:
    """17-significant-digit CSV: eps, r_minus_ri, ro_minus_r, r_minus_rnew."""
    lines = [f"# {k}={v}" for k, v in (metadata or {}).items()]
    lines.append("eps,r_minus_ri,ro_minus_r,r_minus_rnew")
    for row in study.rows:
        lines.append(
            f"{row.eps:.17g},{row.r_minus_ri:.17g},{row.ro_minus_r:.17g},{row.r_minus_rnew:.17g}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
