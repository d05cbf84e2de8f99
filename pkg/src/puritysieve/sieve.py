"""Pointer-state selection over pure system states.

Implements the closed-form short-time purity-decay coefficient for a single
factorized coupling, numeric derivative estimates valid for any number of
coupling terms, the mean-field effective Hamiltonian, the time-integrated
dispersion of the coupling operators along the effective trajectory, and two
selection searches: the canonical sieve (maximize reduced purity at a fixed
time) and the modified sieve (minimize the integrated dispersion).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from . import qcore
from .dynamics import FactorizedModel, FixedTimeReducedMap, ProductEvolution

DEFAULT_QUADRATURE_STEPS = 64
QUADRATURE_REL_TOL = 1e-8
QUADRATURE_ABS_TOL = 1e-12  # floor for integrals that are pure roundoff noise
_MAX_DOUBLINGS = 10

# Restart bookkeeping: objectives closer than this count as equal, overlaps
# above 1 minus this count as the same state.
OBJECTIVE_MATCH_ATOL = 1e-8
STATE_MATCH_INFIDELITY = 1e-6


class UnsupportedModelError(ValueError):
    """A closed form was requested outside the model class it exists for."""


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    """Mean-field system Hamiltonian hs + sum_j kappa_j s_j."""

    h_eff: np.ndarray
    kappa: tuple[float, ...]


def effective_hamiltonian(model: FactorizedModel, rho_e) -> EffectiveHamiltonian:
    """Average each environment factor over rho_e and fold it into hs."""
    rho_e = qcore.density_matrix(rho_e)
    if rho_e.shape[0] != model.environment_dim:
        raise ValueError("environment state does not match the model dimension")
    h = model.hs.copy()
    kappas = []
    for s, e in model.terms:
        kappa = float(np.einsum("ij,ji->", e, rho_e).real)
        kappas.append(kappa)
        h = h + kappa * s
    return EffectiveHamiltonian(h, tuple(kappas))


def short_time_coefficient(model: FactorizedModel, psi_s, rho_e) -> float:
    """Coefficient c of the short-time purity law P(t) ~ 1 - (c/2) t^2.

    c = 4 * (environment-factor dispersion) * (system-factor dispersion),
    both evaluated on the initial states.  The closed form exists only for a
    single coupling term; it vanishes exactly when the system state is an
    eigenvector of the coupling operator, or the environment state an
    eigenprojector of its factor.
    """
    if len(model.terms) != 1:
        raise UnsupportedModelError(
            "the closed-form short-time coefficient requires exactly one "
            "interaction term; use numeric_second_derivative for multi-term models"
        )
    s, e = model.terms[0]
    _, disp_s = qcore.mean_dispersion(s, qcore.ket(psi_s))
    _, disp_e = qcore.mean_dispersion(e, qcore.density_matrix(rho_e))
    return 4.0 * disp_e * disp_s


def numeric_second_derivative(
    model: FactorizedModel, psi_s, rho_e, h: float = 1e-3
) -> tuple[float, float]:
    """Central-difference estimates of (dP/dt, d2P/dt2) of purity at t = 0.

    Valid for any number of coupling terms.  Both estimates carry O(h^2)
    bias; the first derivative is exactly zero for a pure initial system
    state, so its estimate measures only that bias.
    """
    if not 0.0 < h <= 0.1:
        raise ValueError("h must lie in (0, 0.1]")
    evolution = ProductEvolution(model, psi_s, rho_e)
    p_zero = qcore.purity(evolution.reduced_at(0.0))
    p_plus = qcore.purity(evolution.reduced_at(h))
    p_minus = qcore.purity(evolution.reduced_at(-h))
    first = (p_plus - p_minus) / (2.0 * h)
    second = (p_plus - 2.0 * p_zero + p_minus) / (h * h)
    return first, second


class _EffectiveTrajectory:
    """State under the effective Hamiltonian, one eigendecomposition upfront."""

    def __init__(self, h_eff: np.ndarray, psi0: np.ndarray):
        self._w, self._v = np.linalg.eigh(h_eff)
        self._c0 = self._v.conj().T @ psi0

    def state(self, t: float) -> np.ndarray:
        return self._v @ (np.exp(-1j * self._w * t) * self._c0)


def _simpson(f, t_final: float, intervals: int) -> float:
    ts = np.linspace(0.0, t_final, intervals + 1)
    ys = np.array([f(t) for t in ts])
    h = t_final / intervals
    return float(h / 3.0 * (ys[0] + ys[-1] + 4.0 * ys[1:-1:2].sum() + 2.0 * ys[2:-1:2].sum()))


def _integrated_dispersion(
    h_eff: np.ndarray,
    system_ops: Sequence[np.ndarray],
    weights: np.ndarray,
    psi0: np.ndarray,
    t_final: float,
    steps: int,
) -> float:
    if t_final == 0.0 or not system_ops:
        return 0.0
    trajectory = _EffectiveTrajectory(h_eff, psi0)

    def integrand(t: float) -> float:
        psi = trajectory.state(t)
        total = 0.0
        for weight, op in zip(weights, system_ops):
            _, disp = qcore.mean_dispersion(op, psi)
            total += weight * disp
        return total

    intervals = steps + (steps % 2)
    value = _simpson(integrand, t_final, intervals)
    # Accept only once doubling the step count moves the value by < 1e-8 rel.
    for _ in range(_MAX_DOUBLINGS):
        intervals *= 2
        refined = _simpson(integrand, t_final, intervals)
        tolerance = QUADRATURE_REL_TOL * max(abs(refined), abs(value)) + QUADRATURE_ABS_TOL
        if abs(refined - value) <= tolerance:
            return refined
        value = refined
    raise RuntimeError("Simpson refinement did not stabilize")


def dispersion_integral(
    model: FactorizedModel,
    psi_s0,
    rho_e,
    t_final: float,
    steps: int = DEFAULT_QUADRATURE_STEPS,
    weights: Optional[Sequence[float]] = None,
) -> float:
    """Integral over [0, t_final] of the coupling-operator dispersion.

    The system state follows the mean-field effective dynamics generated by
    ``effective_hamiltonian``; the integrand is sum_j w_j * dispersion^2(s_j)
    along that trajectory (all weights default to 1).  Quadrature is
    composite Simpson on a uniform grid with exact state propagation between
    nodes, refined by step doubling.  Nonnegative, and monotone nondecreasing
    in ``t_final``.
    """
    if t_final < 0.0:
        raise ValueError("t_final must be nonnegative")
    if steps < 16:
        raise ValueError("steps must be at least 16")
    if weights is None:
        weights = np.ones(len(model.terms))
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(model.terms),):
            raise ValueError("weights must provide one entry per interaction term")
        if np.any(weights < 0.0):
            raise ValueError("weights must be nonnegative")
    psi0 = qcore.ket(psi_s0)
    effective = effective_hamiltonian(model, rho_e)
    system_ops = [s for s, _ in model.terms]
    return _integrated_dispersion(effective.h_eff, system_ops, weights, psi0, t_final, steps)


def default_horizon(model: FactorizedModel) -> float:
    """One period of the dominant self-Hamiltonian frequency.

    The dominant frequency is the spread of the system spectrum; a system
    Hamiltonian proportional to the identity has no period to speak of.
    """
    w = np.linalg.eigvalsh(model.hs)
    spread = float(w[-1] - w[0])
    if spread <= 0.0:
        raise ValueError("system Hamiltonian has no frequency scale")
    return 2.0 * np.pi / spread


@dataclass(frozen=True)
class StateChart:
    """Real-parameter chart over normalized pure states, global phase fixed.

    ``bloch`` covers dimension 2 with the polar pair (theta in [0, pi],
    phi in [0, 2 pi)); ``full-sphere`` covers any dimension d with 2d - 2
    reals: d - 1 hyperspherical magnitude angles followed by one phase per
    amplitude after the first, which stays real.
    """

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("bloch", "full-sphere"):
            raise ValueError(f"unknown chart kind {self.kind!r}")
        if self.kind == "bloch" and self.dim != 2:
            raise ValueError("the Bloch chart only covers dimension 2")
        if self.dim < 2:
            raise ValueError("chart dimension must be at least 2")

    @classmethod
    def bloch(cls) -> "StateChart":
        return cls("bloch", 2)

    @classmethod
    def full_sphere(cls, dim: int) -> "StateChart":
        return cls("full-sphere", dim)

    @property
    def n_params(self) -> int:
        return 2 if self.kind == "bloch" else 2 * self.dim - 2

    def to_ket(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float).ravel()
        if params.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {params.size}")
        if self.kind == "bloch":
            theta, phi = params
            return np.array(
                [np.cos(theta / 2.0), np.exp(1j * phi) * np.sin(theta / 2.0)],
                dtype=complex,
            )
        d = self.dim
        angles, phases = params[: d - 1], params[d - 1 :]
        magnitudes = np.empty(d)
        residual = 1.0
        for k, angle in enumerate(angles):
            magnitudes[k] = residual * np.cos(angle)
            residual *= np.sin(angle)
        magnitudes[d - 1] = residual
        psi = magnitudes.astype(complex)
        psi[1:] *= np.exp(1j * phases)
        return psi

    def params_from_ket(self, psi) -> np.ndarray:
        """Canonical parameters of a state (inverse chart, gauge-fixed)."""
        psi = qcore.ket(psi)
        if psi.size != self.dim:
            raise ValueError(f"state dimension {psi.size} does not match chart dimension {self.dim}")
        psi = psi * np.exp(-1j * np.angle(psi[0]))
        if self.kind == "bloch":
            theta = 2.0 * np.arctan2(abs(psi[1]), psi[0].real)
            phi = float(np.angle(psi[1])) % (2.0 * np.pi)
            return np.array([theta, phi])
        d = self.dim
        mags = np.abs(psi)
        angles = np.empty(d - 1)
        residual = 1.0
        for k in range(d - 1):
            if residual > 1e-300:
                angles[k] = np.arccos(np.clip(mags[k] / residual, -1.0, 1.0))
            else:
                angles[k] = 0.0
            residual *= np.sin(angles[k])
        phases = np.angle(psi[1:]) % (2.0 * np.pi)
        return np.concatenate([angles, phases])

    def random_params(self, rng: np.random.Generator) -> np.ndarray:
        """Parameters of a Haar-random state."""
        z = rng.normal(size=self.dim) + 1j * rng.normal(size=self.dim)
        return self.params_from_ket(qcore.normalized(z))


@dataclass(frozen=True)
class OptimizerConfig:
    """Multi-start Nelder-Mead settings for the sieve searches."""

    restarts: int = 8
    max_iterations: int = 4000
    xatol: float = 1e-8
    fatol: float = 1e-12
    seed: Optional[int] = None


@dataclass(frozen=True, eq=False)
class RestartResult:
    """Endpoint of a single optimizer restart (canonical chart parameters)."""

    params: np.ndarray
    objective: float
    converged: bool


@dataclass(frozen=True, eq=False)
class SieveResult:
    """Best state found by a multi-start sieve search.

    ``degenerate_manifold`` is set when restarts reached distinct states at
    numerically equal objective (a flat optimum set, continuous or discrete);
    ``ambiguous`` when the restarts did not settle on a single state at all,
    so the search selects no unique pointer candidate.  A degenerate manifold
    is always ambiguous in this sense.
    """

    state: np.ndarray
    objective: float
    mode: str
    restarts: int
    converged: bool
    history: tuple[RestartResult, ...]
    degenerate_manifold: bool
    ambiguous: bool


def _same_state(a: np.ndarray, b: np.ndarray) -> bool:
    return 1.0 - abs(np.vdot(a, b)) ** 2 <= STATE_MATCH_INFIDELITY


def _multistart(objective, chart: StateChart, cfg: OptimizerConfig, mode: str, maximize: bool) -> SieveResult:
    if cfg.restarts < 1:
        raise ValueError("at least one restart is required")
    sign = -1.0 if maximize else 1.0
    rng = np.random.default_rng(cfg.seed)
    records: list[RestartResult] = []
    kets: list[np.ndarray] = []
    for _ in range(cfg.restarts):
        start = chart.random_params(rng)
        result = minimize(
            lambda p: sign * objective(chart.to_ket(p)),
            start,
            method="Nelder-Mead",
            options={
                "xatol": cfg.xatol,
                "fatol": cfg.fatol,
                "maxiter": cfg.max_iterations,
                "maxfev": 4 * cfg.max_iterations,
            },
        )
        params = chart.params_from_ket(chart.to_ket(result.x))
        psi = chart.to_ket(params)
        records.append(RestartResult(params, float(objective(psi)), bool(result.success)))
        kets.append(psi)

    indices = range(len(records))
    best = max(indices, key=lambda i: records[i].objective) if maximize else min(
        indices, key=lambda i: records[i].objective
    )
    best_objective = records[best].objective
    considered = [i for i in indices if records[i].converged] or list(indices)
    scale = max(1.0, abs(best_objective))
    degenerate = any(
        abs(records[i].objective - best_objective) <= OBJECTIVE_MATCH_ATOL * scale
        and not _same_state(kets[i], kets[best])
        for i in considered
    )
    ambiguous = any(not _same_state(kets[i], kets[best]) for i in considered)
    return SieveResult(
        state=kets[best],
        objective=best_objective,
        mode=mode,
        restarts=cfg.restarts,
        converged=records[best].converged,
        history=tuple(records),
        degenerate_manifold=degenerate,
        ambiguous=ambiguous,
    )


def _default_chart(model: FactorizedModel) -> StateChart:
    return StateChart.bloch() if model.system_dim == 2 else StateChart.full_sphere(model.system_dim)


def canonical_sieve(
    model: FactorizedModel,
    rho_e,
    t_star: float,
    chart: Optional[StateChart] = None,
    cfg: Optional[OptimizerConfig] = None,
) -> SieveResult:
    """Search for the pure initial system state maximizing purity at ``t_star``.

    Multi-start derivative-free local search over the chart; the final
    objective is re-evaluated at the returned state through the exact
    evolution, so it is exactly the purity of that state's trajectory.
    """
    if t_star <= 0.0:
        raise ValueError("t_star must be positive")
    chart = chart or _default_chart(model)
    cfg = cfg or OptimizerConfig()
    reduced_map = FixedTimeReducedMap(model, rho_e, t_star)
    return _multistart(reduced_map.purity, chart, cfg, "canonical", maximize=True)


def modified_sieve(
    model: FactorizedModel,
    rho_e,
    t_final: float,
    chart: Optional[StateChart] = None,
    cfg: Optional[OptimizerConfig] = None,
    steps: int = DEFAULT_QUADRATURE_STEPS,
    weights: Optional[Sequence[float]] = None,
) -> SieveResult:
    """Search for the pure initial state minimizing the dispersion integral.

    Same search contract as ``canonical_sieve``; the objective is
    ``dispersion_integral`` over [0, t_final], so the recorded optimum agrees
    with a fresh call of that function at the returned state.
    """
    if t_final <= 0.0:
        raise ValueError("t_final must be positive")
    if steps < 16:
        raise ValueError("steps must be at least 16")
    chart = chart or _default_chart(model)
    cfg = cfg or OptimizerConfig()
    if weights is None:
        weights = np.ones(len(model.terms))
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(model.terms),):
            raise ValueError("weights must provide one entry per interaction term")
        if np.any(weights < 0.0):
            raise ValueError("weights must be nonnegative")
    effective = effective_hamiltonian(model, rho_e)
    system_ops = [s for s, _ in model.terms]

    def objective(psi: np.ndarray) -> float:
        return _integrated_dispersion(effective.h_eff, system_ops, weights, psi, t_final, steps)

    return _multistart(objective, chart, cfg, "modified", maximize=False)
