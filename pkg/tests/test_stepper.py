import math

import numpy as np
import pytest

from acsplit.diagnostics import dissipation_check, mm_energy
from acsplit.fields import (
    GridSpec,
    HelmholtzOperator,
    ScalarField,
    helmholtz_solve,
    laplacian,
    make_circle,
    make_constant,
    make_field,
)
from acsplit.potentials import SQRT2, one_d_first_step, parse_potential
from acsplit.stepper import (
    AdmmConfig,
    NewtonConfig,
    StepError,
    StepperConfig,
    run,
    step,
    step_barrier,
    step_quadratic,
    step_quartic,
)


def cfg_for(pid, n=64, eps=0.1, tau=100.0, **kw):
    return StepperConfig(
        grid=GridSpec(n), potential=parse_potential(pid), eps=eps, tau=tau, **kw
    )


def wrapped_step(grid):
    return make_field(grid, lambda x, y: np.where(x >= 0.5, 1.0, -1.0))


# -- config validation --------------------------------------------------------

def test_config_rejects_bad_values():
    g = GridSpec(32)
    pot = parse_potential("wr:R=100")
    with pytest.raises(ValueError):
        StepperConfig(grid=g, potential=pot, eps=0.0, tau=1.0)
    with pytest.raises(ValueError):
        StepperConfig(grid=g, potential=pot, eps=0.1, tau=-1.0)
    with pytest.raises(ValueError):
        StepperConfig(grid=g, potential=parse_potential("standard"), eps=0.1,
                      tau=math.inf)
    # infinite tau is first-class for the other families
    StepperConfig(grid=g, potential=pot, eps=0.1, tau=math.inf)
    StepperConfig(grid=g, potential=parse_potential("barrier_abs"), eps=0.1,
                  tau=math.inf)


def test_step_dispatch_checks_family():
    g = GridSpec(32)
    u = make_circle(g, 0.3)
    with pytest.raises(ValueError):
        step_quadratic(u, cfg_for("standard"))
    with pytest.raises(ValueError):
        step_quartic(u, cfg_for("wr:R=100"))
    with pytest.raises(ValueError):
        step_barrier(u, cfg_for("wr:R=100"))


# -- quadratic family ----------------------------------------------------------

def test_quadratic_well_is_stationary():
    for tau in (1.0, 100.0, math.inf):
        cfg = cfg_for("wr:R=100", tau=tau)
        u = make_constant(cfg.grid, 1.0)
        u1, rep = step_quadratic(u, cfg)
        assert np.max(np.abs(u1.values - 1.0)) < 1e-12
        assert rep.l2_move < 1e-12


def test_quadratic_first_step_matches_line_profile_near_jump():
    # wrapped step function, sharp-corner split, infinite step size: the first
    # step is the optimal transition at scale eps on the band around the jump;
    # the tolerance carries the interaction with the seam interface 1/2 away
    n, eps = 256, 0.1
    cfg = cfg_for("wbar", n=n, eps=eps, tau=math.inf)
    u0 = wrapped_step(cfg.grid)
    u1, _ = step_quadratic(u0, cfg)
    x = cfg.grid.cell_centers()
    mask = np.abs(x - 0.5) <= 1.2 * eps
    ref = one_d_first_step(x[mask] - 0.5, eps, math.inf)
    err = np.max(np.abs(u1.values[mask, :] - ref[:, None]))
    assert err <= 1e-6 + 10.0 * math.exp(-SQRT2 * 0.5 / eps)


def test_quadratic_first_step_periodic_reference_all_columns():
    # the full-domain comparison against the exact periodic closed form
    from acsplit.potentials import one_d_first_step_periodic

    n, eps, tau = 256, 0.1, 100.0
    cfg = cfg_for("wbar", n=n, eps=eps, tau=tau)
    u1, _ = step_quadratic(wrapped_step(cfg.grid), cfg)
    ref = one_d_first_step_periodic(cfg.grid.cell_centers(), eps, tau)
    err = np.max(np.abs(u1.values - ref[:, None]))
    assert err < 2e-4  # spectral truncation of the C^{1,1} solution at n=256


def test_quadratic_sharp_circle_energy_bound():
    # one step from the sharp circle relaxes to energy <= (sqrt2 + 1) * perimeter
    cfg = cfg_for("wr:R=100", n=128, eps=0.1, tau=100.0)
    u0 = make_circle(cfg.grid, 0.4)
    u1, rep = step_quadratic(u0, cfg)
    bound = (SQRT2 + 1.0) * 2.0 * math.pi * 0.4
    assert rep.energy_after <= bound
    assert rep.energy_after < rep.energy_before


def test_quadratic_step_is_preconditioned_gradient_descent():
    # u1 = u - tau (1 + tau (2/eps^2 - Lap))^{-1} grad E(u), grad the
    # time-normalized Allen-Cahn drift -Lap u + W'(u)/eps^2
    cfg = cfg_for("wr:R=100", n=64, eps=0.1, tau=3.0)
    pot = cfg.potential
    rng = np.random.default_rng(2)
    u = ScalarField(cfg.grid, np.tanh(rng.normal(size=(64, 64))))
    u1, _ = step_quadratic(u, cfg)
    grad = ScalarField(
        cfg.grid,
        -laplacian(u).values
        + (pot.w_vex_prime(u.values) + pot.w_conc_prime(u.values)) / cfg.eps**2,
    )
    op = HelmholtzOperator(cfg.grid, a=1.0 + 2.0 * cfg.tau / cfg.eps**2, b=cfg.tau)
    expected = u.values - cfg.tau * helmholtz_solve(op, grad).values
    assert np.max(np.abs(u1.values - expected)) < 1e-9


def test_quadratic_infinite_tau_maximum_principle():
    # the relaxed field stays inside [-1, 1] when fed sign data; tiny slack
    # covers the truncation lobes of the discrete screened-Poisson kernel
    rng = np.random.default_rng(8)
    for eps in (0.1, 0.05):
        cfg = cfg_for("wbar", n=128, eps=eps, tau=math.inf)
        u = ScalarField(cfg.grid, rng.choice([-1.0, 1.0], size=(128, 128)))
        u1, _ = step_quadratic(u, cfg)
        assert np.max(np.abs(u1.values)) <= 1.0 + 1e-5


# -- quartic family ------------------------------------------------------------

def test_quartic_wells_and_origin_are_fixed_points():
    cfg = cfg_for("standard", n=64, eps=0.1, tau=1e3)
    for value in (1.0, -1.0, 0.0):
        u = make_constant(cfg.grid, value)
        u1, rep = step_quartic(u, cfg)
        assert np.max(np.abs(u1.values - value)) < 1e-10
    assert rep.inner_iterations >= 1


def test_quartic_newton_converges_from_circle():
    cfg = cfg_for("standard", n=64, eps=0.1, tau=1e3)
    u = make_circle(cfg.grid, 0.3)
    u1, rep = step_quartic(u, cfg)
    assert rep.residual <= cfg.newton.tol
    assert rep.energy_after < rep.energy_before
    assert rep.inner_iterations <= 10


def test_quartic_newton_failure_raises():
    cfg = cfg_for("standard", n=64, eps=0.05, tau=1e3,
                  newton=NewtonConfig(tol=1e-10, max_iter=1))
    u = make_circle(cfg.grid, 0.3)
    with pytest.raises(StepError):
        step_quartic(u, cfg)


# -- barrier family ------------------------------------------------------------

def test_barrier_well_is_stationary():
    for tau in (1.0, math.inf):
        cfg = cfg_for("barrier_abs", n=64, eps=0.1, tau=tau)
        u = make_constant(cfg.grid, 1.0)
        u1, rep = step_barrier(u, cfg)
        assert np.max(np.abs(u1.values - 1.0)) <= 1e-6


def test_barrier_requires_box_data():
    cfg = cfg_for("barrier_abs")
    with pytest.raises(ValueError):
        step_barrier(make_constant(cfg.grid, 1.5), cfg)


def test_barrier_step_transition_band_width():
    # infinite-tau step from a wrapped step: the transition occupies a band of
    # width 2*sqrt(2)*eps around the jump, up to a couple of cells
    n, eps = 256, 0.05
    cfg = cfg_for("barrier_abs", n=n, eps=eps, tau=math.inf)
    u1, _ = step_barrier(wrapped_step(cfg.grid), cfg)
    x = cfg.grid.cell_centers()
    col = u1.values[:, 0]
    central = np.abs(x - 0.5) < 0.2
    free = central & (np.abs(col) < 1.0 - 1e-4)
    width = x[free].max() - x[free].min() + cfg.grid.h
    assert abs(width - 2.0 * SQRT2 * eps) <= 2.0 * cfg.grid.h


def test_barrier_step_iterates_stay_in_box():
    cfg = cfg_for("barrier_quad", n=64, eps=0.1, tau=1e3)
    u1, rep = step_barrier(make_circle(cfg.grid, 0.3), cfg)
    assert np.max(np.abs(u1.values)) <= 1.0
    assert rep.residual <= cfg.admm.primal_tol


def test_barrier_admm_failure_raises():
    cfg = cfg_for("barrier_quad", n=64, eps=0.1, tau=1e3,
                  admm=AdmmConfig(max_iter=3))
    with pytest.raises(StepError):
        step_barrier(make_circle(cfg.grid, 0.3), cfg)


def _ellone_step_reference(u, cfg, alpha):
    """Independent route for the soft-penalty step: ADMM whose z-update is the
    proximal shrinkage of (alpha+1)*max(|z|-1, 0) instead of the box clip."""
    eps, grid = cfg.eps, cfg.grid
    inv_tau = cfg.inv_tau
    scale = eps**2 / 2.0
    lam = grid.laplacian_symbol()
    P = scale * (lam + inv_tau)
    q = scale * (cfg.potential.w_conc_prime(u.values) / eps**2 - inv_tau * u.values)
    kappa = scale * (alpha + 1.0) / eps**2  # penalty weight in the scaled objective
    rho, sigma, relax = 10.0, 1e-6, 1.6
    x = u.values.copy()
    z = u.values.copy()
    y = np.zeros_like(x)
    sym = P + sigma + rho
    for _ in range(20000):
        xt = np.fft.irfft2(np.fft.rfft2(sigma * x - q + rho * z - y) / sym, s=x.shape)
        r_dual = float(np.max(np.abs(sigma * (x - xt) + rho * (z - xt))))
        x = relax * xt + (1 - relax) * x
        zm = relax * xt + (1 - relax) * z + y / rho
        mag = np.abs(zm)
        z_new = np.where(
            mag <= 1.0, zm,
            np.sign(zm) * np.maximum(1.0, mag - kappa / rho),
        )
        y = y + rho * (relax * xt + (1 - relax) * z - z_new)
        z = z_new
        if float(np.max(np.abs(x - z))) <= 1e-8 and r_dual <= 1e-8:
            break
    return z


def test_ellone_penalty_equals_hard_barrier():
    # soft l1 penalty outside the box gives the same step as the hard barrier
    # whenever the data lives in the box (the penalty is never activated)
    cfg = cfg_for("elloneg:alpha=0.5", n=64, eps=0.1, tau=math.inf)
    u = make_circle(cfg.grid, 0.3)
    hard, _ = step_barrier(u, cfg)
    soft = _ellone_step_reference(u, cfg, alpha=0.5)
    assert np.max(np.abs(hard.values - soft)) < 1e-4
    assert np.max(np.abs(soft)) <= 1.0 + 1e-6


def test_ellone_and_barrier_abs_share_the_step():
    cfg1 = cfg_for("elloneg:alpha=0.5", n=64, eps=0.1, tau=10.0)
    cfg2 = cfg_for("barrier_abs", n=64, eps=0.1, tau=10.0)
    u = make_circle(cfg1.grid, 0.3)
    v1, _ = step_barrier(u, cfg1)
    v2, _ = step_barrier(u, cfg2)
    assert np.max(np.abs(v1.values - v2.values)) < 1e-8


# -- dissipation and monotonicity (quick lattice; the full one is acceptance) --

@pytest.mark.parametrize("pid", ["wr:R=100", "standard", "barrier_quad"])
def test_energy_decreases_and_dissipation_holds(pid):
    eps = 0.1
    taus = [1e-2 * eps**2, eps**2, eps, 1.0, 1e3]
    pot = parse_potential(pid)
    if pot.family != "quartic":
        taus.append(math.inf)
    for tau in taus:
        cfg = cfg_for(pid, n=64, eps=eps, tau=tau)
        u = make_circle(cfg.grid, 0.3)
        for _ in range(3):
            u_new, rep = step(u, cfg)
            assert rep.energy_after <= rep.energy_before + 1e-8 * (
                1.0 + abs(rep.energy_before)
            ), (pid, tau)
            chk = dissipation_check(u, u_new, eps, tau, pot)
            assert chk["holds"], (pid, tau, chk)
            u = u_new


# -- run loop ------------------------------------------------------------------

def test_run_zero_steps_returns_empty_trace():
    cfg = cfg_for("wr:R=100", n=32)
    u0 = make_circle(cfg.grid, 0.3)
    trace = run(u0, cfg, 0)
    assert len(trace) == 0
    assert not trace.failed
    assert np.array_equal(trace.final_field.values, u0.values)


def test_run_records_monotone_energy_and_radii():
    cfg = cfg_for("wr:R=100", n=64, eps=0.1, tau=100.0)
    trace = run(make_circle(cfg.grid, 0.35), cfg, 10)
    assert len(trace) == 10
    assert trace.energy_monotone()
    assert all(r is not None for r in trace.radii)
    assert trace.radii[-1] < trace.radii[0]
    assert trace.metadata["potential"] == "wr:R=100"


def test_run_tags_failures_with_step_index():
    cfg = cfg_for("barrier_quad", n=64, eps=0.1, tau=1e3,
                  admm=AdmmConfig(max_iter=2))
    trace = run(make_circle(cfg.grid, 0.3), cfg, 5)
    assert trace.failed
    assert "step 1" in trace.failure
    assert len(trace) == 0
