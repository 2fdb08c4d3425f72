"""Double-well potentials with explicit convex/concave splits.

Every potential here vanishes exactly at u = -1, 1 and is positive in
between.  Each kind carries its split W = W_vex + W_conc, its joint curvature
constants (p, c_bar) for the dissipation inequality, and the closed-form
transition profile it is paired with.  The barrier kinds realize their convex
part as the box constraint |u| <= 1, so they expose no w_vex_prime.

sign(0) is +1 everywhere; a single global convention keeps runs deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

SQRT2 = math.sqrt(2.0)


def sign_plus(u):
    """sign with the tie sign(0) = +1, vectorized."""
    return np.where(np.asarray(u) >= 0, 1.0, -1.0)


def wr_coefficients(R: float) -> tuple[float, float]:
    """Coefficients (beta, gamma) pinning the wells of the smooth quadratic family.

    beta = 1 + 2/R and gamma = 2 sqrt(R+1)/R place the double-well minima of
    u^2 + beta - gamma*sqrt(R u^2 + 1) exactly at u = -1, 1 with value 0.
    """
    if not R > 0:
        raise ValueError(f"family parameter R must be positive, got {R}")
    return 1.0 + 2.0 / R, 2.0 * math.sqrt(R + 1.0) / R


# -- transition profiles ---------------------------------------------------

@dataclass(frozen=True)
class OptimalProfile:
    """Closed-form heteroclinic connecting the wells -1 and 1.

    `well(z)` is the double-well shape this profile solves exactly, in the
    sense phi' = sqrt(2 * well(phi)); `span` is the half-width of the open
    transition region (inf for exponentially localized profiles).
    """

    name: str
    fn: any
    derivative: any
    well: any
    span: float


def _phi_exp(x):
    x = np.asarray(x, dtype=float)
    return sign_plus(x) * (1.0 - np.exp(-SQRT2 * np.abs(x)))


def _phi_exp_prime(x):
    return SQRT2 * np.exp(-SQRT2 * np.abs(np.asarray(x, dtype=float)))


def _phi_tanh(x):
    return np.tanh(SQRT2 * np.asarray(x, dtype=float))


def _phi_tanh_prime(x):
    return SQRT2 / np.cosh(SQRT2 * np.asarray(x, dtype=float)) ** 2


def _phi_segment(x):
    x = np.asarray(x, dtype=float)
    inner = SQRT2 * x - sign_plus(x) * x**2 / 2.0
    return np.where(np.abs(x) >= SQRT2, sign_plus(x), inner)


def _phi_segment_prime(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) >= SQRT2, 0.0, SQRT2 - np.abs(x))


PROFILE_EXP = OptimalProfile(
    "exponential",
    _phi_exp,
    _phi_exp_prime,
    lambda z: (1.0 - np.abs(z)) ** 2,
    math.inf,
)
PROFILE_TANH = OptimalProfile(
    "tanh",
    _phi_tanh,
    _phi_tanh_prime,
    lambda z: (np.asarray(z) ** 2 - 1.0) ** 2,
    math.inf,
)
PROFILE_SEGMENT = OptimalProfile(
    "segment",
    _phi_segment,
    _phi_segment_prime,
    lambda z: 1.0 - np.abs(z),
    SQRT2,
)


# -- potential kinds -------------------------------------------------------

class Potential:
    """Base class; subclasses fill in the split and constants."""

    family: str  # "quadratic" | "quartic" | "barrier"
    kind: str
    # joint curvature pairs (p, c_bar), strongest-to-check first; empty if the
    # dissipation lemma does not apply to this kind
    curvature_pairs: tuple = ()
    profile: OptimalProfile

    def w(self, u):
        return self.w_vex(u) + self.w_conc(u)

    def w_vex(self, u):
        raise NotImplementedError

    def w_conc(self, u):
        raise NotImplementedError

    def w_vex_prime(self, u):
        raise ValueError(
            f"{self.kind}: the convex part is a box constraint, not a smooth term"
        )

    def w_conc_prime(self, u):
        raise NotImplementedError

    @property
    def curvature_p(self):
        return self.curvature_pairs[0][0] if self.curvature_pairs else None

    @property
    def curvature_cbar(self):
        return self.curvature_pairs[0][1] if self.curvature_pairs else None

    @property
    def id(self) -> str:
        return self.kind

    def __repr__(self):
        return f"<Potential {self.id}>"

    def __eq__(self, other):
        return isinstance(other, Potential) and self.id == other.id

    def __hash__(self):
        return hash(self.id)


class QuadraticWR(Potential):
    """Smooth double well u^2 + beta - gamma*sqrt(R u^2 + 1), convex part u^2."""

    family = "quadratic"
    profile = PROFILE_EXP
    curvature_pairs = ((2, 1.0),)

    def __init__(self, R: float):
        self.R = float(R)
        self.beta, self.gamma = wr_coefficients(self.R)

    @property
    def kind(self):
        return "wr"

    @property
    def id(self):
        return f"wr:R={self.R:g}"

    def w_vex(self, u):
        return np.asarray(u, dtype=float) ** 2

    def w_vex_prime(self, u):
        return 2.0 * np.asarray(u, dtype=float)

    def w_conc(self, u):
        u = np.asarray(u, dtype=float)
        return self.beta - self.gamma * np.sqrt(self.R * u**2 + 1.0)

    def w_conc_prime(self, u):
        u = np.asarray(u, dtype=float)
        return -self.gamma * self.R * u / np.sqrt(self.R * u**2 + 1.0)

    def w_second(self, u):
        u = np.asarray(u, dtype=float)
        s = np.sqrt(self.R * u**2 + 1.0)
        return 2.0 - self.gamma * self.R / s + self.gamma * self.R**2 * u**2 / s**3


class QuadraticWbar(Potential):
    """The sharp corner limit (|u|-1)^2 = u^2 + 1 - 2|u| of the smooth family."""

    family = "quadratic"
    kind = "wbar"
    profile = PROFILE_EXP
    curvature_pairs = ((2, 1.0),)

    def w_vex(self, u):
        return np.asarray(u, dtype=float) ** 2

    def w_vex_prime(self, u):
        return 2.0 * np.asarray(u, dtype=float)

    def w_conc(self, u):
        return 1.0 - 2.0 * np.abs(np.asarray(u, dtype=float))

    def w_conc_prime(self, u):
        return -2.0 * sign_plus(u)


class Standard(Potential):
    """(u^2 - 1)^2 = u^4 + 1 - 2u^2, the classical quartic well."""

    family = "quartic"
    kind = "standard"
    profile = PROFILE_TANH
    # the quadratic pair dominates the dissipation check; the quartic pair
    # from the convex part is recorded alongside and both are verified
    curvature_pairs = ((2, 2.0), (4, 1.0 / 3.0))

    def w_vex(self, u):
        return np.asarray(u, dtype=float) ** 4

    def w_vex_prime(self, u):
        return 4.0 * np.asarray(u, dtype=float) ** 3

    def w_conc(self, u):
        return 1.0 - 2.0 * np.asarray(u, dtype=float) ** 2

    def w_conc_prime(self, u):
        return -4.0 * np.asarray(u, dtype=float)


class _BarrierBase(Potential):
    family = "barrier"

    def w_vex(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) > 1.0, np.inf, 0.0)

    def w(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) > 1.0, np.inf, self.w_conc(u))


class BarrierAbs(_BarrierBase):
    """1 - |u| inside the box, infinite outside."""

    kind = "barrier_abs"
    profile = PROFILE_SEGMENT
    curvature_pairs = ()

    def w_conc(self, u):
        return 1.0 - np.abs(np.asarray(u, dtype=float))

    def w_conc_prime(self, u):
        return -sign_plus(u)


class BarrierQuadratic(_BarrierBase):
    """1 - u^2 inside the box, infinite outside."""

    kind = "barrier_quad"
    profile = PROFILE_EXP
    curvature_pairs = ((2, 1.0),)

    def w_conc(self, u):
        return 1.0 - np.asarray(u, dtype=float) ** 2

    def w_conc_prime(self, u):
        return -2.0 * np.asarray(u, dtype=float)


class EllOneAlpha(Potential):
    """1 - |u| inside the box with linear growth alpha*(|u|-1) outside.

    Its convex part (alpha+1)*max(|u|-1, 0) is inactive on the box, which is
    why a step with it coincides with the hard-barrier step whenever the
    previous iterate satisfies |u| <= 1.
    """

    family = "barrier"
    profile = PROFILE_SEGMENT
    curvature_pairs = ()

    def __init__(self, alpha: float):
        if alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {alpha}")
        self.alpha = float(alpha)

    @property
    def kind(self):
        return "elloneg"

    @property
    def id(self):
        return f"elloneg:alpha={self.alpha:g}"

    def w_vex(self, u):
        u = np.asarray(u, dtype=float)
        return (self.alpha + 1.0) * np.maximum(np.abs(u) - 1.0, 0.0)

    def w_conc(self, u):
        return 1.0 - np.abs(np.asarray(u, dtype=float))

    def w_conc_prime(self, u):
        return -sign_plus(u)


# -- string ids ------------------------------------------------------------

def parse_potential(spec: str) -> Potential:
    """Build a potential from a config id like `wr:R=100` or `standard`."""
    name, _, params = spec.partition(":")
    kv = {}
    if params:
        for item in params.split(","):
            key, _, val = item.partition("=")
            if not val:
                raise ValueError(f"malformed potential parameter {item!r} in {spec!r}")
            kv[key.strip()] = float(val)
    try:
        if name == "wr":
            return QuadraticWR(kv.pop("R"))
        if name == "elloneg":
            return EllOneAlpha(kv.pop("alpha"))
    except KeyError as exc:
        raise ValueError(f"potential {spec!r} is missing parameter {exc}") from None
    if kv:
        raise ValueError(f"unexpected parameters {sorted(kv)} for potential {name!r}")
    table = {
        "wbar": QuadraticWbar,
        "standard": Standard,
        "barrier_abs": BarrierAbs,
        "barrier_quad": BarrierQuadratic,
    }
    if name not in table:
        raise ValueError(f"unknown potential id {spec!r}")
    return table[name]()


# -- pointwise evaluation wrappers (spec operation surface) ----------------

def w(spec: Potential, u):
    return spec.w(u)


def w_vex_prime(spec: Potential, u):
    return spec.w_vex_prime(u)


def w_conc_prime(spec: Potential, u):
    return spec.w_conc_prime(u)


def optimal_profile(spec: Potential, x):
    return spec.profile.fn(x)


def normalization_constant(spec: Potential, tol: float = 1e-8) -> float:
    """Per-length interface energy: adaptive quadrature of sqrt(2 W) over [-1, 1]."""
    def integrand(z):
        val = spec.w_conc(z) + (0.0 if spec.family == "barrier" else spec.w_vex(z))
        return math.sqrt(max(2.0 * float(val), 0.0))

    val, err = integrate.quad(integrand, -1.0, 1.0, epsabs=tol, limit=200, points=[0.0])
    if err > 10 * tol:
        raise ArithmeticError(f"interface-constant quadrature failed: err={err:.2e}")
    return val


# -- the sharpened Bernoulli constant --------------------------------------

def _power_objective(z, p):
    return ((z - 1.0) ** p + p * z - 1.0) / z**p


def beta_min(p: float, z_max: float = 50.0, tol: float = 1e-10) -> float:
    """Largest constant beta with |u+w|^p >= |u|^p + p|u|^(p-2)u w + beta|w|^p.

    Minimizes ((z-1)^p + pz - 1)/z^p over z >= 1 numerically (coarse scan plus
    bounded refinement); the result must land inside the analytic bracket
    [2^-p, p 2^(1-p)], otherwise something is broken and we say so.
    """
    if p < 2:
        raise ValueError(f"power-law constant needs p >= 2, got {p}")
    zs = np.linspace(1.0, z_max, 4001)
    vals = _power_objective(zs, p)
    i = int(np.argmin(vals))
    lo = zs[max(i - 1, 0)]
    hi = zs[min(i + 1, len(zs) - 1)]
    res = optimize.minimize_scalar(
        _power_objective, args=(p,), bounds=(lo, hi), method="bounded",
        options={"xatol": tol},
    )
    beta = float(min(res.fun, vals[i]))
    lo_b, hi_b = 2.0 ** (-p), p * 2.0 ** (1.0 - p)
    if not (lo_b - 1e-12 <= beta <= hi_b + 1e-12):
        raise RuntimeError(
            f"beta({p}) = {beta} escaped the bracket [{lo_b}, {hi_b}]; "
            "minimizer search is buggy"
        )
    return beta


def check_power_law(p: float, u, w, beta: float | None = None):
    """Sharpened Bernoulli inequality with beta reduced by 1e-9 slack."""
    if beta is None:
        beta = beta_min(p)
    u = np.asarray(u, dtype=float)
    w_ = np.asarray(w, dtype=float)
    lhs = np.abs(u + w_) ** p
    rhs = (
        np.abs(u) ** p
        + p * sign_plus(u) * np.abs(u) ** (p - 1.0) * w_
        + (beta - 1e-9) * np.abs(w_) ** p
    )
    scale = 1.0 + np.abs(u) ** p + np.abs(w_) ** p
    return bool(np.all(lhs - rhs >= -1e-12 * scale))


# -- one-dimensional first-step closed forms -------------------------------

def one_d_first_step(x, eps: float, tau: float):
    """First step from sign(x) on the line, for quadratic-convex splits.

    The transition forms immediately at scale eps, steepened by the factor
    sqrt(1 + eps^2/(2 tau)); with infinite step size that factor is 1.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not tau > 0:
        raise ValueError("tau must be positive")
    kappa = 1.0 if math.isinf(tau) else math.sqrt(1.0 + eps**2 / (2.0 * tau))
    return PROFILE_EXP.fn(kappa * np.asarray(x, dtype=float) / eps)


def one_d_first_step_periodic(x, eps: float, tau: float, length: float = 1.0):
    """First step from the wrapped step function sign(x - L/2) on a circle.

    Exact piecewise solution of the same linear problem on the periodic
    domain: jumps sit at 0 and L/2, and each half-interval carries a
    symmetric hyperbolic-cosine transition.  Far from the seams this matches
    one_d_first_step centered at L/2, up to an exp(-sqrt(2) L kappa/(2 eps))
    interaction term between the two interfaces.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not tau > 0:
        raise ValueError("tau must be positive")
    kappa = 1.0 if math.isinf(tau) else math.sqrt(1.0 + eps**2 / (2.0 * tau))
    mu = SQRT2 * kappa / eps
    xm = np.mod(np.asarray(x, dtype=float), length)
    half = 0.5 * length
    quarter = 0.25 * length
    # cosh ratios computed in shifted form to stay finite for large mu; the
    # clamp only affects the half-domain the branch is discarded on
    def bump(center, s):
        d = np.abs(s - center)
        e1 = np.exp(np.minimum(-mu * (quarter - d), 0.0))
        e2 = np.exp(-mu * (quarter + d))
        return (e1 + e2) / (1.0 + np.exp(-mu * half))

    left = -1.0 + bump(quarter, xm)
    right = 1.0 - bump(3 * quarter, xm)
    return np.where(xm < half, left, right)
