"""Convex-concave splitting time steps and the simulation run loop.

One step solves

    (1 - tau*Lap) u1 + (tau/eps^2) W_vex'(u1) = u0 - (tau/eps^2) W_conc'(u0)

with the convex part implicit and the concave part explicit.  Three inner
solvers cover the potential families:

  * quadratic convex part  -> a single screened-Poisson solve,
  * quartic convex part    -> Newton iteration with spectrally preconditioned
                              conjugate gradients on the linearizations,
  * box-constrained part   -> operator-splitting QP (ADMM) with the linear
                              systems diagonalized by FFT.

tau = inf is a first-class value: the 1/tau terms are dropped rather than
approximated by a huge float, since that limit is analyzed separately and a
large float would poison the conditioning.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import diagnostics
from .fields import (
    GridSpec,
    HelmholtzOperator,
    ScalarField,
    h1_seminorm,
    helmholtz_solve,
    lp_norm,
)
from .potentials import Potential, sign_plus


class StepError(RuntimeError):
    """An inner solver failed to reach its tolerance."""

    def __init__(self, message, residual=math.nan, iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 50
    cg_tol: float = 1e-8
    cg_max_iter: int = 500


@dataclass(frozen=True)
class AdmmConfig:
    """Operator-splitting QP settings (reference defaults, adaptive rho).

    rho is the initial constraint penalty; it is rebalanced during the
    iteration the way reference operator-splitting QP solvers do, because a
    fixed penalty can be orders of magnitude off for stiff grids.
    """

    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    max_iter: int = 20000
    primal_tol: float = 1e-6
    dual_tol: float = 1e-6


@dataclass(frozen=True)
class StepperConfig:
    grid: GridSpec
    potential: Potential
    eps: float
    tau: float  # may be math.inf
    newton: NewtonConfig = NewtonConfig()
    admm: AdmmConfig = AdmmConfig()

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.tau > 0:
            raise ValueError("tau must be positive (math.inf allowed)")
        if math.isinf(self.tau) and self.potential.family == "quartic":
            raise ValueError(
                "infinite step size is not supported for the quartic potential; "
                "use a finite tau"
            )
        for tol in (self.newton.tol, self.admm.primal_tol, self.admm.dual_tol):
            if not tol > 0:
                raise ValueError("solver tolerances must be positive")

    @property
    def inv_tau(self) -> float:
        return 0.0 if math.isinf(self.tau) else 1.0 / self.tau


@dataclass
class StepReport:
    inner_iterations: int
    residual: float
    energy_before: float
    energy_after: float
    l2_move: float
    lp_move: float
    h1_move: float = math.nan


def _report(cfg: StepperConfig, u0: ScalarField, u1: ScalarField,
            iterations: int, residual: float) -> StepReport:
    delta = ScalarField(u0.grid, u1.values - u0.values)
    p = cfg.potential.curvature_p or 2
    return StepReport(
        inner_iterations=iterations,
        residual=residual,
        energy_before=diagnostics.mm_energy(u0, cfg.eps, cfg.potential),
        energy_after=diagnostics.mm_energy(u1, cfg.eps, cfg.potential),
        l2_move=lp_norm(delta, 2),
        lp_move=lp_norm(delta, p),
        h1_move=h1_seminorm(delta),
    )


# -- quadratic convex part -------------------------------------------------

def step_quadratic(u: ScalarField, cfg: StepperConfig) -> tuple[ScalarField, StepReport]:
    """One split step for potentials with convex part u^2 (a single linear solve).

    Finite tau solves (1/tau + 2/eps^2 - Lap) u1 = u/tau - W_conc'(u)/eps^2;
    with tau = inf the 1/tau terms are dropped.
    """
    if cfg.potential.family != "quadratic":
        raise ValueError(f"step_quadratic needs a quadratic-convex kind, got {cfg.potential.id}")
    a = cfg.inv_tau + 2.0 / cfg.eps**2
    op = HelmholtzOperator(cfg.grid, a=a, b=1.0)
    rhs_vals = cfg.inv_tau * u.values - cfg.potential.w_conc_prime(u.values) / cfg.eps**2
    u1 = helmholtz_solve(op, ScalarField(cfg.grid, rhs_vals))
    residual = _linf(op.apply(u1).values - rhs_vals) / max(_linf(rhs_vals), 1.0)
    return u1, _report(cfg, u, u1, iterations=1, residual=residual)


def _linf(a) -> float:
    return float(np.max(np.abs(a)))


# -- quartic convex part (Newton / preconditioned CG) -----------------------

def step_quartic(u: ScalarField, cfg: StepperConfig) -> tuple[ScalarField, StepReport]:
    """One split step for the quartic well: solve the cubic semilinear system.

    (1 - tau*Lap) v + (4 tau/eps^2) v^3 = (1 + 4 tau/eps^2) u  is solved by
    Newton iteration on the full field, each linearization by conjugate
    gradients preconditioned with (1 - tau*Lap + (12 tau/eps^2) mean(v^2)),
    which is diagonal in Fourier space.  Warm start at v = u: steps move
    O(eps^2), comfortably inside the Newton basin.
    """
    if cfg.potential.family != "quartic":
        raise ValueError(f"step_quartic needs the quartic kind, got {cfg.potential.id}")
    tau, eps, grid = cfg.tau, cfg.eps, cfg.grid
    lam = grid.laplacian_symbol()
    cubic = 4.0 * tau / eps**2
    rhs = (1.0 + cubic) * u.values
    rhs_scale = 1.0 + _linf(rhs)

    def apply_linear(vals):
        return np.fft.irfft2((1.0 + tau * lam) * np.fft.rfft2(vals), s=vals.shape)

    v = u.values.copy()
    newton_iters = 0
    cg_total = 0
    residual = math.inf
    for newton_iters in range(cfg.newton.max_iter + 1):
        F = apply_linear(v) + cubic * v**3 - rhs
        residual = _linf(F)
        if residual <= cfg.newton.tol * rhs_scale:
            break
        if newton_iters == cfg.newton.max_iter:
            raise StepError(
                f"Newton did not reach tol {cfg.newton.tol:g} within "
                f"{cfg.newton.max_iter} iterations (residual {residual:.3e})",
                residual=residual, iterations=newton_iters,
            )
        jac_diag = 3.0 * cubic * v**2
        precond = 1.0 + 3.0 * cubic * float(np.mean(v**2)) + tau * lam
        delta, cg_iters = _pcg(
            lambda w: apply_linear(w) + jac_diag * w,
            -F,
            lambda r: np.fft.irfft2(np.fft.rfft2(r) / precond, s=r.shape),
            rtol=cfg.newton.cg_tol,
            max_iter=cfg.newton.cg_max_iter,
        )
        cg_total += cg_iters
        v = v + delta
    u1 = ScalarField(grid, v)
    rep = _report(cfg, u, u1, iterations=newton_iters, residual=residual / rhs_scale)
    rep.inner_iterations = max(newton_iters, 1)
    return u1, rep


def _pcg(apply_A, b, apply_M, rtol, max_iter):
    """Matrix-free preconditioned conjugate gradients for SPD operators."""
    x = np.zeros_like(b)
    r = b.copy()
    z = apply_M(r)
    p = z.copy()
    rz = float(np.sum(r * z))
    b_norm = math.sqrt(float(np.sum(b * b)))
    if b_norm == 0.0:
        return x, 0
    for it in range(1, max_iter + 1):
        Ap = apply_A(p)
        alpha = rz / float(np.sum(p * Ap))
        x += alpha * p
        r -= alpha * Ap
        if math.sqrt(float(np.sum(r * r))) <= rtol * b_norm:
            return x, it
        z = apply_M(r)
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise StepError(f"CG stalled after {max_iter} iterations", iterations=max_iter)


# -- barrier kinds (box-constrained QP via ADMM) -----------------------------

@dataclass
class AdmmWorkspace:
    """Warm-start state carried across consecutive steps of a run."""

    x: np.ndarray | None = None
    z: np.ndarray | None = None
    y: np.ndarray | None = None
    rho: float | None = None


def step_barrier(u: ScalarField, cfg: StepperConfig,
                 workspace: AdmmWorkspace | None = None) -> tuple[ScalarField, StepReport]:
    """One split step for barrier kinds: a box-constrained quadratic program.

    Minimizes 0.5 <(-Lap + 1/tau) v, v> + <W_conc'(u)/eps^2 - u/tau, v> over
    -1 <= v <= 1 by over-relaxed ADMM; the x-update system is diagonal in
    Fourier space and solved exactly.  The objective is normalized by eps^2/2
    internally so the absolute stopping tolerances act on O(1) data, and the
    penalty rho is rebalanced from the residual ratio as reference QP solvers
    do.  The returned iterate is the projected variable, inside the box by
    construction.
    """
    if cfg.potential.family != "barrier":
        raise ValueError(f"step_barrier needs a barrier kind, got {cfg.potential.id}")
    if _linf(u.values) > 1.0 + 1e-9:
        raise ValueError("barrier step needs |u| <= 1")
    admm = cfg.admm
    inv_tau = cfg.inv_tau
    scale = cfg.eps**2 / 2.0
    lam = cfg.grid.laplacian_symbol()
    P = scale * (lam + inv_tau)  # spectral symbol of the normalized quadratic part
    q = scale * (cfg.potential.w_conc_prime(u.values) / cfg.eps**2 - inv_tau * u.values)
    q_norm = max(_linf(q), 1e-30)

    ws = workspace if workspace is not None else AdmmWorkspace()
    x = ws.x if ws.x is not None else u.values.copy()
    z = ws.z if ws.z is not None else np.clip(u.values, -1.0, 1.0)
    y = ws.y if ws.y is not None else np.zeros_like(u.values)
    rho = ws.rho if ws.rho is not None else admm.rho
    sigma, alpha = admm.sigma, admm.alpha

    shape = u.values.shape
    solve_sym = P + sigma + rho
    converged = False
    it = 0
    for it in range(1, admm.max_iter + 1):
        rhs = sigma * x - q + rho * z - y
        xt = np.fft.irfft2(np.fft.rfft2(rhs) / solve_sym, s=shape)
        # dual residual at xt comes for free: P xt + q + y = sigma(x-xt) + rho(z-xt)
        r_dual = _linf(sigma * (x - xt) + rho * (z - xt))
        x = alpha * xt + (1.0 - alpha) * x
        z_mix = alpha * xt + (1.0 - alpha) * z
        z_new = np.clip(z_mix + y / rho, -1.0, 1.0)
        y = y + rho * (z_mix - z_new)
        z = z_new
        r_prim = _linf(x - z)
        if r_prim <= admm.primal_tol and r_dual <= admm.dual_tol:
            converged = True
            break
        if it % 25 == 0:
            rel_p = r_prim / max(_linf(x), _linf(z), 1e-30)
            rel_d = r_dual / max(q_norm, _linf(y), 1e-30)
            ratio = math.sqrt(rel_p / max(rel_d, 1e-30))
            if ratio > 5.0 or ratio < 0.2:
                rho = min(max(rho * ratio, 1e-6), 1e6)
                solve_sym = P + sigma + rho
    if not converged:
        raise StepError(
            f"ADMM did not converge within {admm.max_iter} iterations",
            residual=_linf(x - z), iterations=it,
        )
    ws.x, ws.z, ws.y, ws.rho = x, z, y, rho
    u1 = ScalarField(cfg.grid, z.copy())
    return u1, _report(cfg, u, u1, iterations=it, residual=_linf(x - z))


# -- dispatch and run loop ---------------------------------------------------

def step(u: ScalarField, cfg: StepperConfig,
         workspace: AdmmWorkspace | None = None) -> tuple[ScalarField, StepReport]:
    """Apply the step appropriate for the configured potential family."""
    fam = cfg.potential.family
    if fam == "quadratic":
        return step_quadratic(u, cfg)
    if fam == "quartic":
        return step_quartic(u, cfg)
    return step_barrier(u, cfg, workspace)


def run(u0: ScalarField, cfg: StepperConfig, n_steps: int,
        hooks=()) -> "diagnostics.EnergyTrace":
    """Drive n_steps of the scheme, recording one trace row per step.

    Hooks are callables (step_index, field, report) evaluated after each
    step.  A step failure aborts the run; the partial trace is returned with
    its `failed` flag set, because silently shrinking tau would contaminate
    every experiment built on top of this loop.
    """
    trace = diagnostics.EnergyTrace(metadata=diagnostics.trace_metadata(cfg))
    u = u0
    ws = AdmmWorkspace()
    t0 = time.perf_counter()
    for k in range(1, n_steps + 1):
        try:
            u, rep = step(u, cfg, ws)
        except StepError as exc:
            trace.failed = True
            trace.failure = f"step {k}: {exc}"
            break
        trace.append(
            step=k,
            energy=rep.energy_after,
            radius=diagnostics.interface_radius(u),
            l2_move=rep.l2_move,
            lp_move=rep.lp_move,
            h1_move=rep.h1_move,
            inner_iters=rep.inner_iterations,
        )
        for hook in hooks:
            hook(k, u, rep)
    trace.metadata["wall_time"] = time.perf_counter() - t0
    trace.final_field = u
    return trace
