"""Experiment runner: JSON config in, CSV/JSON results out.

Four experiments are available through one positional JSON config (plus
``--set key=value`` overrides): purity traces of the two canonical initial
spin directions (``fig1``), analytic versus numeric short-time purity decay
(``short-time``), the modified sieve over Bloch states of the central spin
(``spin-sieve``), and the Gaussian sieve against the analytic
minimum-uncertainty prediction (``qbm-sieve``).

Exit codes: 0 success (optimizer non-convergence is reported in the output,
not fatal), 2 malformed configuration, 3 model unsupported by the requested
experiment.  All floating-point output is printed with 17 significant digits
so values round-trip, and a fixed seed reproduces output files byte for byte.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dynamics, oscillator, qcore, sieve
from .sieve import UnsupportedModelError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSUPPORTED = 3

_FIT_T_MAX = 0.3
_FIT_SAMPLES = 31
_SHORT_TIME_THRESHOLD = 1e-3
_DEFAULT_WEIGHT_SWEEP = (0.01, 1.0, 100.0)

STATE_0Z = (1.0, 0.0)
STATE_0X = (1.0, 1.0)  # normalized on use; the sigma_x +1 eigenvector


class ConfigError(Exception):
    """Configuration problem, reported with the offending field name."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


# ---------------------------------------------------------------------------
# deterministic output formatting

def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    if not math.isfinite(x):
        raise ValueError("non-finite value in output")
    return f"{x:.17g}"


def dumps_report(value, level: int = 0) -> str:
    """Deterministic JSON: sorted keys, fixed float formatting.

    The stdlib encoder offers no control over float formatting, which the
    byte-identical-output contract needs, hence this small emitter.
    """
    indent = "  " * level
    child = "  " * (level + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        parts = [
            f"{child}{json.dumps(str(k))}: {dumps_report(value[k], level + 1)}"
            for k in sorted(value)
        ]
        return "{\n" + ",\n".join(parts) + "\n" + indent + "}"
    if isinstance(value, (list, tuple)):
        if not len(value):
            return "[]"
        parts = [f"{child}{dumps_report(v, level + 1)}" for v in value]
        return "[\n" + ",\n".join(parts) + "\n" + indent + "]"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if isinstance(value, str):
        return json.dumps(value)
    if value is None:
        return "null"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _write_json(path: Path, report: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(dumps_report(report) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(float(x)) for x in row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# config handling

def load_config(path: str, overrides: list[str]) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError("config", f"cannot read {path}: {err}") from err
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("config", f"invalid JSON: {err}") from err
    if not isinstance(cfg, dict):
        raise ConfigError("config", "top level must be a JSON object")
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError("--set", f"expected KEY=VALUE, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise ConfigError(key, "cannot override a non-object parent")
            node = nxt
        node[parts[-1]] = value
    return cfg


def _section(cfg: dict, name: str) -> dict:
    value = cfg.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(name, "must be a JSON object")
    return value


def _number(section: dict, key: str, field: str, default, positive=False, nonnegative=False):
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, "must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(field, "must be finite")
    if positive and value <= 0.0:
        raise ConfigError(field, "must be positive")
    if nonnegative and value < 0.0:
        raise ConfigError(field, "must be nonnegative")
    return value


def _integer(section: dict, key: str, field: str, default, minimum=None):
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(field, "must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(field, f"must be at least {minimum}")
    return int(value)


def _spin_model(cfg: dict) -> tuple[dynamics.FactorizedModel, dict]:
    model_cfg = _section(cfg, "model")
    n_bath = _integer(model_cfg, "N", "model.N", 6, minimum=1)
    omega = _number(model_cfg, "omega", "model.omega", 1.0)
    epsilon = _number(model_cfg, "epsilon", "model.epsilon", 0.1)
    raw = model_cfg.get("couplings", [["x", "x", epsilon]])
    if not isinstance(raw, list) or not raw:
        raise ConfigError("model.couplings", "must be a non-empty list")
    couplings = []
    for k, entry in enumerate(raw):
        field = f"model.couplings[{k}]"
        if not isinstance(entry, list) or len(entry) != 3:
            raise ConfigError(field, "must be [system_axis, bath_axis, strength]")
        system_axis, bath_axis, strength = entry
        if system_axis not in dynamics.PAULI or bath_axis not in dynamics.PAULI:
            raise ConfigError(field, "axes must be 'x', 'y' or 'z'")
        if isinstance(strength, bool) or not isinstance(strength, (int, float)):
            raise ConfigError(field, "strength must be a number")
        couplings.append((system_axis, bath_axis, float(strength)))
    model = dynamics.spin_star_model(n_bath, omega, couplings)
    echo = {
        "N": n_bath,
        "omega": omega,
        "epsilon": epsilon,
        "couplings": [[sa, ba, st] for sa, ba, st in couplings],
    }
    return model, echo


def _initial_state(value, field: str, dim: int) -> np.ndarray:
    if isinstance(value, str):
        if value not in ("0z", "0x"):
            raise ConfigError(field, "named states are '0z' and '0x'")
        if dim != 2:
            raise ConfigError(field, "named states require a two-dimensional system")
        return qcore.normalized(STATE_0Z if value == "0z" else STATE_0X)
    if isinstance(value, list):
        amplitudes = []
        for k, item in enumerate(value):
            if isinstance(item, (int, float)) and not isinstance(item, bool):
                amplitudes.append(complex(item))
            elif (
                isinstance(item, list)
                and len(item) == 2
                and all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in item)
            ):
                amplitudes.append(complex(item[0], item[1]))
            else:
                raise ConfigError(f"{field}[{k}]", "amplitude must be a number or an [re, im] pair")
        if len(amplitudes) != dim:
            raise ConfigError(field, f"expected {dim} amplitudes, got {len(amplitudes)}")
        try:
            return qcore.normalized(amplitudes)
        except ValueError as err:
            raise ConfigError(field, str(err)) from err
    raise ConfigError(field, "must be a state name or an amplitude list")


def _optimizer_config(cfg: dict) -> sieve.OptimizerConfig:
    opt = _section(cfg, "optimizer")
    restarts = _integer(opt, "restarts", "optimizer.restarts", 8, minimum=1)
    max_iterations = _integer(opt, "max_iterations", "optimizer.max_iterations", 4000, minimum=1)
    tolerance = _number(opt, "tolerance", "optimizer.tolerance", 1e-8, positive=True)
    seed = _integer(cfg, "seed", "seed", 0)
    return sieve.OptimizerConfig(
        restarts=restarts,
        max_iterations=max_iterations,
        xatol=tolerance,
        fatol=1e-4 * tolerance,
        seed=seed,
    )


def _output_path(cfg: dict, out_override, default: str) -> Path:
    value = out_override if out_override is not None else cfg.get("output", default)
    if not isinstance(value, str) or not value:
        raise ConfigError("output", "must be a non-empty path")
    return Path(value)


def _quadratic_coefficient(model, psi, rho_e) -> float:
    # Pure t^2 fit of the purity loss on a fine short-time grid.
    ts = np.linspace(0.0, _FIT_T_MAX, _FIT_SAMPLES)
    series = dynamics.purity_series(model, psi, rho_e, ts)
    mask = ts > 0.0
    t = ts[mask]
    loss = 1.0 - series.values[mask]
    return float(np.sum(t**2 * loss) / np.sum(t**4))


# ---------------------------------------------------------------------------
# experiments

def run_fig1(cfg: dict, out_override=None) -> Path:
    model, model_echo = _spin_model(cfg)
    time_cfg = _section(cfg, "time")
    t_max = _number(time_cfg, "t_max", "time.t_max", 40.0, positive=True)
    samples = _integer(time_cfg, "samples", "time.samples", 400, minimum=2)
    seed = _integer(cfg, "seed", "seed", 0)
    rho_e = qcore.maximally_mixed(model.environment_dim)
    psi_0z = qcore.normalized(STATE_0Z)
    psi_0x = qcore.normalized(STATE_0X)

    times = np.linspace(0.0, t_max, samples)
    series_0z = dynamics.purity_series(model, psi_0z, rho_e, times)
    series_0x = dynamics.purity_series(model, psi_0x, rho_e, times)

    csv_path = _output_path(cfg, out_override, "fig1.csv")
    rows = zip(times, series_0z.values, series_0x.values, series_0z.pmax, series_0x.pmax)
    _write_csv(csv_path, ["t", "purity_0z", "purity_0x", "pmax_0z", "pmax_0x"], rows)

    summary = {
        "experiment": "fig1",
        "model": model_echo,
        "time": {"t_max": t_max, "samples": samples},
        "fit": {
            "t_max": _FIT_T_MAX,
            "samples": _FIT_SAMPLES,
            "quadratic_coefficient_0z": _quadratic_coefficient(model, psi_0z, rho_e),
            "quadratic_coefficient_0x": _quadratic_coefficient(model, psi_0x, rho_e),
        },
        "output": str(csv_path),
        "seed": seed,
    }
    summary_path = csv_path.with_name(csv_path.stem + ".summary.json")
    _write_json(summary_path, summary)
    print(f"wrote {csv_path} and {summary_path}")
    return csv_path


def run_short_time(cfg: dict, out_override=None) -> Path:
    model, model_echo = _spin_model(cfg)
    if len(model.terms) != 1:
        raise UnsupportedModelError(
            "the short-time experiment requires a model with exactly one interaction term"
        )
    state_spec = cfg.get("state", "0z")
    psi = _initial_state(state_spec, "state", model.system_dim)
    h = _number(cfg, "h", "h", 1e-3, positive=True)
    if h > 0.1:
        raise ConfigError("h", "must be at most 0.1")
    seed = _integer(cfg, "seed", "seed", 0)
    rho_e = qcore.maximally_mixed(model.environment_dim)

    coefficient = sieve.short_time_coefficient(model, psi, rho_e)
    first, second = sieve.numeric_second_derivative(model, psi, rho_e, h)
    _, env_dispersion = qcore.mean_dispersion(model.terms[0][1], rho_e)
    no_decoherence = env_dispersion < 1e-12
    if coefficient > 1e-8:
        relative_error = abs(second + coefficient) / coefficient
        passed = relative_error < _SHORT_TIME_THRESHOLD
    else:
        relative_error = None
        passed = abs(second) < 1e-6

    report = {
        "experiment": "short-time",
        "model": model_echo,
        "state": state_spec if isinstance(state_spec, str) else "custom",
        "h": h,
        "analytic_coefficient": coefficient,
        "analytic_second_derivative": -coefficient,
        "numeric_first_derivative": first,
        "numeric_second_derivative": second,
        "relative_error": relative_error,
        "threshold": _SHORT_TIME_THRESHOLD,
        "passed": passed,
        "no_decoherence": no_decoherence,
        "seed": seed,
    }
    path = _output_path(cfg, out_override, "short_time.json")
    _write_json(path, report)
    print(f"wrote {path}")
    return path


def run_spin_sieve(cfg: dict, out_override=None) -> Path:
    model, model_echo = _spin_model(cfg)
    if model.system_dim != 2:
        raise ConfigError("model", "spin-sieve requires a two-dimensional system")
    rho_e = qcore.maximally_mixed(model.environment_dim)
    if "t_final" in cfg:
        t_final = _number(cfg, "t_final", "t_final", None, positive=True)
    else:
        try:
            t_final = sieve.default_horizon(model)
        except ValueError as err:
            raise ConfigError("t_final", f"no default horizon for this model ({err})") from err
    optimizer = _optimizer_config(cfg)

    result = sieve.modified_sieve(
        model, rho_e, t_final, chart=sieve.StateChart.bloch(), cfg=optimizer
    )
    restarts = [
        {
            "theta": float(record.params[0]),
            "phi": float(record.params[1]),
            "objective": record.objective,
            "converged": record.converged,
        }
        for record in result.history
    ]
    best_params = sieve.StateChart.bloch().params_from_ket(result.state)
    report = {
        "experiment": "spin-sieve",
        "model": model_echo,
        "t_final": t_final,
        "best": {
            "theta": float(best_params[0]),
            "phi": float(best_params[1]),
            "objective": result.objective,
        },
        "restarts": restarts,
        "converged": result.converged,
        "degenerate_manifold": result.degenerate_manifold,
        "ambiguous": result.ambiguous,
        "reference_objectives": {
            "state_0z": sieve.dispersion_integral(
                model, qcore.normalized(STATE_0Z), rho_e, t_final
            ),
            "state_0x": sieve.dispersion_integral(
                model, qcore.normalized(STATE_0X), rho_e, t_final
            ),
        },
        "optimizer": {
            "restarts": optimizer.restarts,
            "max_iterations": optimizer.max_iterations,
            "xatol": optimizer.xatol,
            "fatol": optimizer.fatol,
        },
        "seed": optimizer.seed,
    }
    path = _output_path(cfg, out_override, "spin_sieve.json")
    _write_json(path, report)
    print(f"wrote {path}")
    return path


def run_qbm_sieve(cfg: dict, out_override=None) -> Path:
    model_cfg = _section(cfg, "model")
    mass = _number(model_cfg, "M", "model.M", 2.0, positive=True)
    bath_mass = _number(model_cfg, "m", "model.m", 0.5, positive=True)
    n_bath = _integer(model_cfg, "N", "model.N", 4, minimum=0)
    trap = _number(model_cfg, "Omega", "model.Omega", 1.0, positive=True)
    bath_trap = _number(model_cfg, "omega", "model.omega", 1.0, positive=True)
    params = oscillator.QbmParams(mass, bath_mass, n_bath, trap, bath_trap)

    weights_raw = cfg.get("weights", [1.0, 1.0])
    if (
        not isinstance(weights_raw, list)
        or len(weights_raw) != 2
        or any(isinstance(w, bool) or not isinstance(w, (int, float)) for w in weights_raw)
    ):
        raise ConfigError("weights", "must be a pair of numbers")
    weights = (float(weights_raw[0]), float(weights_raw[1]))
    if weights[0] <= 0.0 or weights[1] <= 0.0:
        raise ConfigError("weights", "must be positive")
    sweep_raw = cfg.get("weight_sweep", list(_DEFAULT_WEIGHT_SWEEP))
    if not isinstance(sweep_raw, list) or any(
        isinstance(r, bool) or not isinstance(r, (int, float)) or r <= 0 for r in sweep_raw
    ):
        raise ConfigError("weight_sweep", "must be a list of positive weight ratios")
    optimizer = _optimizer_config(cfg)

    frequency = oscillator.effective_frequency(params)
    analytic = oscillator.qbm_pointer_state(params.M, frequency)
    result = oscillator.qbm_sieve(params.M, frequency, weights, optimizer)

    sweep = []
    sweep_dx2 = []
    for ratio in sweep_raw:
        entry = oscillator.qbm_sieve(params.M, frequency, (float(ratio), 1.0), optimizer)
        sweep_dx2.append(entry.state.dx2)
        sweep.append(
            {
                "ratio": float(ratio),
                "dx2": entry.state.dx2,
                "relative_deviation_dx2": (entry.state.dx2 - analytic.dx2) / analytic.dx2,
                "converged": entry.converged,
            }
        )
    spread = 0.0
    for i in range(len(sweep_dx2)):
        for j in range(i + 1, len(sweep_dx2)):
            spread = max(spread, abs(sweep_dx2[i] - sweep_dx2[j]) / analytic.dx2)

    report = {
        "experiment": "qbm-sieve",
        "model": {
            "M": params.M,
            "m": params.m,
            "N": params.N,
            "Omega": params.Omega,
            "omega": params.omega,
        },
        "effective_frequency": frequency,
        "analytic": {"dx2": analytic.dx2, "dp2": analytic.dp2, "sxp": analytic.sxp},
        "minimizer": {
            "dx2": result.state.dx2,
            "dp2": result.state.dp2,
            "sxp": result.state.sxp,
            "uncertainty_det": result.state.uncertainty_det,
            "objective": result.objective,
        },
        "relative_deviation": {
            "dx2": (result.state.dx2 - analytic.dx2) / analytic.dx2,
            "dp2": (result.state.dp2 - analytic.dp2) / analytic.dp2,
        },
        "weights": [weights[0], weights[1]],
        "weight_sweep": sweep,
        "max_pairwise_dx2_spread": spread,
        "converged": result.converged,
        "seed": optimizer.seed,
    }
    path = _output_path(cfg, out_override, "qbm_sieve.json")
    _write_json(path, report)
    print(f"wrote {path}")
    return path


RUNNERS = {
    "fig1": run_fig1,
    "short-time": run_short_time,
    "spin-sieve": run_spin_sieve,
    "qbm-sieve": run_qbm_sieve,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="puritysieve",
        description="Run a decoherence / pointer-state experiment from a JSON config.",
    )
    parser.add_argument("config", help="path to the JSON experiment configuration")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        dest="overrides",
        help="override a config entry (dotted keys reach into sections)",
    )
    parser.add_argument("--out", help="override the output path")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        experiment = cfg.get("experiment")
        if experiment not in RUNNERS:
            raise ConfigError(
                "experiment", f"must be one of {', '.join(sorted(RUNNERS))}"
            )
        RUNNERS[experiment](cfg, args.out)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except UnsupportedModelError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
