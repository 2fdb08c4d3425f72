"""Machine-checkable verification suite behind the `verify` subcommand.

Each check returns one record (id, status, measured, expected, tolerance);
the CLI prints one line per record and exits nonzero when anything fails.
The checks mirror the acceptance test suite at a scale that runs in tens of
seconds.
"""

from __future__ import annotations

import math

import numpy as np

from . import diagnostics, radial, stepper, thresholding
from .fields import GridSpec, ScalarField, make_circle
from .potentials import (
    QuadraticWR,
    SQRT2,
    beta_min,
    check_power_law,
    normalization_constant,
    one_d_first_step_periodic,
    parse_potential,
    wr_coefficients,
)


class Check:
    def __init__(self, id, measured, expected, tol, ok=None):
        self.id = id
        self.measured = measured
        self.expected = expected
        self.tol = tol
        self.ok = ok if ok is not None else abs(measured - expected) <= tol

    @property
    def status(self):
        return "PASS" if self.ok else "FAIL"

    def line(self):
        return (
            f"{self.id} {self.status} {self.measured:.9g} "
            f"{self.expected:.9g} {self.tol:g}"
        )


def _checks_constants(rng):
    m0, m2, pl = thresholding.kernel_moments()
    yield Check("kernel_m0", m0, 1.0, 1e-6)
    yield Check("kernel_m2", m2, 6.0, 1e-6)
    yield Check("kernel_plane", pl, 1.5, 1e-6)
    worst = 0.0
    for _ in range(20):
        A = rng.normal(size=(3, 3))
        S = 0.5 * (A + A.T)
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        worst = max(worst, abs(
            thresholding.kernel_velocity(S, n) - thresholding.perp_trace_velocity(S, n)
        ))
    yield Check("kernel_velocity_20_random", worst, 0.0, 1e-6)
    yield Check("beta_p2", beta_min(2), 1.0, 1e-8)
    yield Check("beta_p4", beta_min(4), 1.0 / 3.0, 1e-8)
    yield Check("cwbar", normalization_constant(parse_potential("wbar")), SQRT2, 1e-8)
    for R in (1.0, 10.0, 100.0):
        pot = QuadraticWR(R)
        yield Check(
            f"wr_second_derivative_R{R:g}", float(pot.w_second(1.0)),
            2.0 * R / (R + 1.0), 1e-8,
        )
        beta, gamma = wr_coefficients(R)
        yield Check(f"wr_wells_R{R:g}", float(pot.w(1.0)), 0.0, 1e-12)


def _checks_radial(rng):
    worst_sum_d = 0.0
    worst_sum_2 = 0.0
    worst_linear = -math.inf
    for d in (3, 4, 5, 10):
        for r in (1.0, 2.0, 5.0):
            for eps in (0.2, 0.1, 0.05, 0.01):
                if not r > 2.0 * eps * math.sqrt(d - 2):
                    continue
                prob = radial.RadialProblem(r=r, eps=eps, d=d)
                sol = radial.radial_solution(prob)
                rd = abs(sol.r_i**d + sol.r_o**d - 2.0 * r**d) / (2.0 * r**d)
                r2 = abs(
                    sol.r_i**2 + sol.r_o**2 - (2.0 * r**2 - 4.0 * (d - 2) * eps**2)
                ) / (2.0 * r**2)
                worst_sum_d = max(worst_sum_d, rd)
                worst_sum_2 = max(worst_sum_2, r2)
                worst_linear = max(worst_linear, (r - sol.r_i) - (2.0 * eps + 10.0 * eps**2))
    yield Check("radial_identity_power_d", worst_sum_d, 0.0, 1e-10)
    yield Check("radial_identity_power_2", worst_sum_2, 0.0, 1e-10)
    yield Check("radial_inner_linear_bound", worst_linear, -1.0, 1.0,
                ok=worst_linear <= 0.0)
    for d in (3, 10):
        study = radial.scaling_study(2.0, d, [0.2, 0.1, 0.05, 0.025, 0.0125])
        yield Check(f"radial_rnew_slope_d{d}", study.slopes["r_minus_rnew"], 2.0, 0.15)
        asym = radial.scaling_study(2.0, d, [0.05, 0.025, 0.0125])
        yield Check(f"radial_ri_slope_d{d}", asym.slopes["r_minus_ri"], 1.0, 0.1)
        yield Check(f"radial_ro_slope_d{d}", asym.slopes["ro_minus_r"], 1.0, 0.1)


def _checks_first_step(rng):
    grid = GridSpec(512)
    pot = parse_potential("wbar")
    for eps in (0.1, 0.05):
        for tau in (1.0, 100.0, math.inf):
            cfg = stepper.StepperConfig(grid=grid, potential=pot, eps=eps, tau=tau)
            u0 = ScalarField(grid, np.sign(grid.cell_centers() - 0.5)[:, None]
                             * np.ones((1, grid.n)))
            u1, _ = stepper.step_quadratic(u0, cfg)
            x = grid.cell_centers()
            ref = one_d_first_step_periodic(x, eps, tau)[:, None]
            err = float(np.max(np.abs(u1.values - ref)))
            # seam term with L = the half-side distance between the two jumps
            tol = 1e-6 + 10.0 * math.exp(-SQRT2 * 0.5 * grid.length / (2.0 * eps))
            tau_id = "inf" if math.isinf(tau) else f"{tau:g}"
            yield Check(f"first_step_1d_eps{eps:g}_tau{tau_id}", err, 0.0, tol)


def _checks_mbo(rng):
    grid = GridSpec(128)
    eps = 0.05
    state = thresholding.MboState.from_field(make_circle(grid, 0.4))
    pot = parse_potential("wbar")
    cfg = stepper.StepperConfig(grid=grid, potential=pot, eps=eps, tau=math.inf)
    u1, _ = stepper.step_quadratic(state.u, cfg)
    nxt = thresholding.mbo_step(state, eps)
    yield Check("mbo_matches_quadratic_step",
                float(np.max(np.abs(u1.values - nxt.u.values))), 0.0, 1e-10)
    energies = []
    st = thresholding.MboState.from_field(
        ScalarField(grid, rng.choice([-1.0, 1.0], size=(grid.n, grid.n)))
    )
    for _ in range(30):
        energies.append(thresholding.eo_energy(st.u_tilde, eps**2 / 2.0))
        st = thresholding.mbo_step(st, eps)
    drops = [energies[i + 1] - energies[i] for i in range(len(energies) - 1)]
    worst = max(drops) / (1.0 + abs(energies[0]))
    yield Check("mbo_eo_energy_monotone", worst, 0.0, 1e-8, ok=worst <= 1e-8)


def _checks_power_law(rng):
    for p in (2, 3, 4, 6):
        u = rng.uniform(-10, 10, size=20000)
        w = rng.uniform(-10, 10, size=20000)
        ok = check_power_law(p, u, w)
        yield Check(f"power_law_p{p}", 1.0 if ok else 0.0, 1.0, 0.0, ok=ok)


def _checks_dissipation(rng):
    grid = GridSpec(64)
    eps = 0.1
    for pid in ("wr:R=100", "standard", "barrier_quad"):
        pot = parse_potential(pid)
        taus = [eps**2, eps, 1.0, 1e3]
        if pot.family != "quartic":
            taus.append(math.inf)
        worst = -math.inf
        ok = True
        u = make_circle(grid, 0.3)
        for tau in taus:
            cfg = stepper.StepperConfig(grid=grid, potential=pot, eps=eps, tau=tau)
            v = u
            for _ in range(5):
                v_new, rep = stepper.step(v, cfg)
                chk = diagnostics.dissipation_check(v, v_new, eps, tau, pot)
                ok = ok and chk["holds"] and rep.energy_after <= rep.energy_before + 1e-8 * (
                    1 + abs(rep.energy_before)
                )
                worst = max(worst, chk["lhs"] - chk["rhs"])
                v = v_new
        yield Check(f"dissipation_{pot.kind}", worst, 0.0, 1e-6, ok=ok)


GROUPS = {
    "constants": _checks_constants,
    "radial": _checks_radial,
    "first-step": _checks_first_step,
    "mbo": _checks_mbo,
    "power-law": _checks_power_law,
    "dissipation": _checks_dissipation,
}


def run_checks(only: str | None = None, seed: int = 0):
    """Run all (or a prefix-filtered subset of) verification groups."""
    rng = np.random.default_rng(seed)
    results = []
    for name, group in GROUPS.items():
        if only and not name.startswith(only):
            continue
        results.extend(group(rng))
    return results
