"""Numerical laboratory for convex-concave splitting steps of the Allen-Cahn equation."""

from .fields import (
    GridSpec,
    HelmholtzOperator,
    ScalarField,
    field_to_csv,
    h1_seminorm,
    helmholtz_solve,
    l2_inner,
    laplacian,
    load_field,
    lp_norm,
    make_circle,
    make_constant,
    make_field,
    save_field,
)
from .potentials import (
    BarrierAbs,
    BarrierQuadratic,
    EllOneAlpha,
    OptimalProfile,
    Potential,
    QuadraticWbar,
    QuadraticWR,
    Standard,
    beta_min,
    check_power_law,
    normalization_constant,
    one_d_first_step,
    one_d_first_step_periodic,
    optimal_profile,
    parse_potential,
    wr_coefficients,
)
from .stepper import (
    AdmmConfig,
    NewtonConfig,
    StepError,
    StepReport,
    StepperConfig,
    run,
    step,
    step_barrier,
    step_quadratic,
    step_quartic,
)
from .thresholding import (
    MboState,
    eo_energy,
    kernel_moments,
    kernel_velocity,
    mbo_step,
    perp_trace_velocity,
)
from .radial import (
    RadialProblem,
    RadialSolution,
    new_radius,
    profile_comparison,
    radial_solution,
    scaling_study,
    solve_radii,
    xi,
)
from .diagnostics import (
    EnergyTrace,
    FitResult,
    dissipation_check,
    drift_bound,
    fit_effective_step,
    interface_radius,
    mm_energy,
)

__version__ = "0.1.0"
