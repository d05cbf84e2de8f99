"""Gaussian-level analysis of a trapped particle coupled to a particle bath.

A change of variables (relative bath coordinates, total momentum) brings the
particle-bath Hamiltonian into almost-factorizable form: the system becomes a
harmonic oscillator at a bath-shifted effective frequency, coupled to the
bath through exactly one momentum-type and one position-type product term.
This module works entirely at that effective level: closed-form symplectic
evolution of Gaussian moments, period-averaged dispersion integrals for both
coupling channels, and the minimum-uncertainty state minimizing their
weighted sum.  The bath self-Hamiltonian (pair potentials included) never
enters any computation and is carried as a description only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize

from .sieve import OptimizerConfig

MIN_UNCERTAINTY_DET = 0.25  # covariance determinant bound at hbar = 1
_DET_ATOL = 1e-12


@dataclass(frozen=True)
class QbmParams:
    """Trapped-particle-plus-bath parameters (natural units, hbar = 1).

    M and Omega are the mass and trap frequency of the distinguished
    particle; m and omega those of each of the N identical bath particles.
    """

    M: float
    m: float
    N: int
    Omega: float
    omega: float

    def __post_init__(self):
        if self.M <= 0 or self.m <= 0 or self.Omega <= 0 or self.omega <= 0:
            raise ValueError("masses and frequencies must be positive")
        if int(self.N) != self.N or self.N < 0:
            raise ValueError("N must be a nonnegative integer")


def effective_frequency(params: QbmParams) -> float:
    """Trap frequency of the system oscillator after the change of variables.

    Squared, it picks up N m / M times the bath frequency squared on top of
    the bare trap frequency squared.
    """
    return math.sqrt(params.Omega**2 + params.N * params.m / params.M * params.omega**2)


@dataclass(frozen=True)
class InteractionChannel:
    """One factorized coupling channel of the transformed model."""

    system_symbol: str
    system_coefficient: float
    environment_symbol: str
    bath_terms: int


@dataclass(frozen=True)
class TransformedModel:
    """System oscillator plus the two coupling channels, after the transform.

    ``spring_constant`` is the coefficient of x^2/  2 in the system part and
    equals mass * frequency^2.  ``environment_note`` records what the dropped
    bath self-Hamiltonian contains; it is descriptive metadata only.
    """

    mass: float
    frequency: float
    spring_constant: float
    channels: tuple[InteractionChannel, InteractionChannel]
    environment_note: str


def transform_model(params: QbmParams) -> TransformedModel:
    """Almost-factorizable form of the particle-bath model.

    The momentum channel couples -p/M on the system to the summed bath
    momenta; the position channel couples m omega^2 x to the summed relative
    bath coordinates.  Both sums are empty for an empty bath.
    """
    spring = params.M * params.Omega**2 + params.N * params.m * params.omega**2
    channels = (
        InteractionChannel("p", -1.0 / params.M, "sum of bath momenta", params.N),
        InteractionChannel("x", params.m * params.omega**2, "sum of bath coordinates", params.N),
    )
    note = (
        "bath oscillators in relative coordinates, pair potentials, and a "
        "collective-momentum correction; not used in any computation here"
    )
    return TransformedModel(params.M, effective_frequency(params), spring, channels, note)


@dataclass(frozen=True)
class GaussianState:
    """First and second moments of a one-dimensional Gaussian state.

    dx2 and dp2 are the position and momentum dispersions squared, sxp the
    symmetrized covariance.  The uncertainty determinant dx2 * dp2 - sxp^2 is
    at least 1/4 (hbar = 1), with equality for minimum-uncertainty states.
    """

    x_mean: float = 0.0
    p_mean: float = 0.0
    dx2: float = 0.5
    dp2: float = 0.5
    sxp: float = 0.0

    def __post_init__(self):
        if self.dx2 < 0.0 or self.dp2 < 0.0:
            raise ValueError("dispersions must be nonnegative")
        if self.uncertainty_det < MIN_UNCERTAINTY_DET - _DET_ATOL:
            raise ValueError(
                f"covariance determinant {self.uncertainty_det} violates the "
                f"uncertainty bound {MIN_UNCERTAINTY_DET}"
            )

    @property
    def uncertainty_det(self) -> float:
        return self.dx2 * self.dp2 - self.sxp**2


def gaussian_evolve(
    state: GaussianState,
    mass: float,
    frequency: float,
    t: float,
    linear_x: float = 0.0,
    linear_p: float = 0.0,
) -> GaussianState:
    """Moments after time t of harmonic evolution.

    Hamiltonian p^2 / 2M + (1/2) M frequency^2 x^2 + linear_x * x
    + linear_p * p.  The quadratic part rotates phase space; the linear terms
    only displace the rotation center, so they shift the means and leave
    every second moment untouched.  The covariance determinant is a
    symplectic invariant and is preserved to roundoff.
    """
    if mass <= 0.0 or frequency <= 0.0:
        raise ValueError("mass and frequency must be positive")
    c = math.cos(frequency * t)
    s = math.sin(frequency * t)
    mw = mass * frequency
    x_fix = -linear_x / (mass * frequency**2)
    p_fix = -linear_p * mass
    dx = state.x_mean - x_fix
    dp = state.p_mean - p_fix
    x_mean = x_fix + dx * c + dp * s / mw
    p_mean = p_fix + dp * c - mw * dx * s
    dx2 = c * c * state.dx2 + (s * s / (mw * mw)) * state.dp2 + 2.0 * c * s / mw * state.sxp
    dp2 = c * c * state.dp2 + mw * mw * s * s * state.dx2 - 2.0 * mw * c * s * state.sxp
    sxp = c * s * (state.dp2 / mw - mw * state.dx2) + (c * c - s * s) * state.sxp
    return GaussianState(x_mean, p_mean, dx2, dp2, sxp)


class PeriodIntegrals(NamedTuple):
    """Integrals of the second moments over one oscillator period."""

    momentum: float  # integral of dp2
    position: float  # integral of dx2
    cross: float  # integral of sxp; zero for harmonic evolution


def period_integrals(state: GaussianState, mass: float, frequency: float) -> PeriodIntegrals:
    """Closed-form period integrals of the evolving second moments.

    Over a full period the squared-cosine and squared-sine factors average
    to one half and every cosine-sine cross term integrates to zero, which
    is what kills the covariance (interference) contribution.
    """
    if mass <= 0.0 or frequency <= 0.0:
        raise ValueError("mass and frequency must be positive")
    period = 2.0 * math.pi / frequency
    mw2 = (mass * frequency) ** 2
    momentum = 0.5 * (mw2 * state.dx2 + state.dp2) * period
    position = 0.5 * (state.dx2 + state.dp2 / mw2) * period
    return PeriodIntegrals(momentum, position, 0.0)


def qbm_objective(
    state: GaussianState, weights: tuple[float, float], mass: float, frequency: float
) -> float:
    """Weighted sum of the two period-averaged coupling dispersions."""
    a, b = weights
    if a <= 0.0 or b <= 0.0:
        raise ValueError("objective weights must be positive")
    integrals = period_integrals(state, mass, frequency)
    return a * integrals.momentum + b * integrals.position


def qbm_pointer_state(mass: float, frequency: float) -> GaussianState:
    """Minimum-uncertainty state minimizing the period-averaged dispersions.

    dx2 = 1 / (2 M frequency) and dp2 = M frequency / 2, so dx * dp = 1/2
    exactly; the centroid is irrelevant to the objective and set to zero.
    """
    if mass <= 0.0 or frequency <= 0.0:
        raise ValueError("mass and frequency must be positive")
    return GaussianState(0.0, 0.0, 1.0 / (2.0 * mass * frequency), mass * frequency / 2.0, 0.0)


def _covariance_from_params(params: np.ndarray) -> tuple[float, float, float]:
    # (w, q, alpha): determinant 1/4 + w^2 by construction, so the
    # uncertainty bound is built in and its boundary sits at w = 0.
    w, q, alpha = params
    det = MIN_UNCERTAINTY_DET + w * w
    root = math.sqrt(det)
    c, s = math.cos(alpha), math.sin(alpha)
    eq, emq = math.exp(q), math.exp(-q)
    dx2 = root * (c * c * eq + s * s * emq)
    dp2 = root * (s * s * eq + c * c * emq)
    sxp = root * c * s * (eq - emq)
    return dx2, dp2, sxp


@dataclass(frozen=True, eq=False)
class QbmSieveResult:
    """Minimizer of the weighted period objective over valid Gaussian states."""

    state: GaussianState
    objective: float
    restarts: int
    converged: bool
    history: tuple[tuple[np.ndarray, float], ...]


def qbm_sieve(
    mass: float,
    frequency: float,
    weights: tuple[float, float] = (1.0, 1.0),
    cfg: Optional[OptimizerConfig] = None,
) -> QbmSieveResult:
    """Minimize the weighted period objective over the second moments.

    The covariance is parameterized as sqrt(det) R(alpha) diag(e^q, e^-q)
    R(alpha)^T with det = 1/4 + w^2, which enforces the uncertainty bound
    without penalties and makes the bound's boundary an interior point of
    the parameter space.  Each restart minimizes the objective normalized by
    its starting value, so convergence tolerances are scale-free.
    """
    if mass <= 0.0 or frequency <= 0.0:
        raise ValueError("mass and frequency must be positive")
    a, b = weights
    if a <= 0.0 or b <= 0.0:
        raise ValueError("objective weights must be positive")
    cfg = cfg or OptimizerConfig()
    rng = np.random.default_rng(cfg.seed)

    def objective_of(params: np.ndarray) -> float:
        dx2, dp2, sxp = _covariance_from_params(params)
        return qbm_objective(GaussianState(0.0, 0.0, dx2, dp2, sxp), weights, mass, frequency)

    history = []
    best_params, best_value, best_converged = None, math.inf, False
    for _ in range(cfg.restarts):
        start = np.array([rng.normal(), rng.normal(), rng.uniform(0.0, math.pi)])
        scale = objective_of(start)
        result = minimize(
            lambda p: objective_of(p) / scale,
            start,
            method="Nelder-Mead",
            options={
                "xatol": cfg.xatol,
                "fatol": cfg.fatol,
                "maxiter": cfg.max_iterations,
                "maxfev": 4 * cfg.max_iterations,
            },
        )
        value = objective_of(result.x)
        history.append((np.array(result.x), value))
        if value < best_value:
            best_params, best_value, best_converged = result.x, value, bool(result.success)
    dx2, dp2, sxp = _covariance_from_params(best_params)
    state = GaussianState(0.0, 0.0, dx2, dp2, sxp)
    return QbmSieveResult(
        state=state,
        objective=qbm_objective(state, weights, mass, frequency),
        restarts=cfg.restarts,
        converged=best_converged,
        history=tuple(history),
    )
