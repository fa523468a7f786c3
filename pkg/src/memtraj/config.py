"""Experiment configuration: JSON schema, validation, defaults, echo.

Configs are strict: unknown keys are rejected and every error names the
offending field path, so a typo never silently falls back to a default.
The fully populated echo is embedded in every output file for
provenance, and re-parsing an echo reproduces it exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConfigError

MODELS = ("atom_cavity", "linear_optomech", "quadratic_optomech")
RUNS = ("sse", "sme", "compare", "converge", "ensemble", "markovian",
        "phonon_fixture")

PLANT_STATES = ("plus_x", "plus_y", "excited", "ground")

_PHYSICS_DEFAULTS = {
    "atom_cavity": {
        "omega_q": 1.0, "delta": 1.0, "g": 1.0, "gamma": 2.0,
        "plant_state": "plus_x",
    },
    "linear_optomech": {
        "omega_m": 1.0, "delta": 1.0, "g_prime": 0.05, "gamma": 2.0,
        "mass": 1.0, "alpha_mech": 1.0,
    },
    "quadratic_optomech": {
        "omega_m": 1.0, "delta": 0.0, "g": 0.1, "gamma": 0.5,
    },
}

_NUMERICS_DEFAULTS = {
    "dt": 1e-3, "t_final": 10.0, "n_cavity": 16, "n_mech": 10,
    "sample_stride": 10,
}

_EXPERIMENT_DEFAULTS = {
    "sse": {},
    "sme": {},
    "compare": {},
    "converge": {"truncations": [2, 4, 8, 16]},
    "ensemble": {"n_traj": 2000},
    "markovian": {},
    "phonon_fixture": {"n_steps": 10000, "cross_run": True},
}


def _expect_mapping(value, path):
    if not isinstance(value, dict):
        raise ConfigError(path, f"expected an object, got {type(value).__name__}")
    return value


def _as_float(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _as_int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return int(value)


def _as_bool(value, path):
    if not isinstance(value, bool):
        raise ConfigError(path, f"expected true/false, got {value!r}")
    return value


def _reject_unknown(raw, allowed, path):
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")


def _validate_physics(model, raw):
    defaults = _PHYSICS_DEFAULTS[model]
    raw = _expect_mapping(raw, "physics")
    _reject_unknown(raw, defaults, "physics")
    out = dict(defaults)
    for key, value in raw.items():
        path = f"physics.{key}"
        if key == "plant_state":
            if value not in PLANT_STATES:
                raise ConfigError(path, f"must be one of {PLANT_STATES}")
            out[key] = value
        else:
            out[key] = _as_float(value, path)
    if out["gamma"] < 0:
        raise ConfigError("physics.gamma", "must be >= 0")
    for key in ("omega_m", "mass"):
        if key in out and out[key] <= 0:
            raise ConfigError(f"physics.{key}", "must be > 0")
    return out


def _validate_numerics(raw):
    raw = _expect_mapping(raw, "numerics")
    _reject_unknown(raw, _NUMERICS_DEFAULTS, "numerics")
    out = dict(_NUMERICS_DEFAULTS)
    for key, value in raw.items():
        path = f"numerics.{key}"
        if key in ("dt", "t_final"):
            out[key] = _as_float(value, path)
        else:
            out[key] = _as_int(value, path)
    if out["dt"] <= 0:
        raise ConfigError("numerics.dt", "must be > 0")
    if out["t_final"] < out["dt"]:
        raise ConfigError("numerics.t_final", "must be >= dt")
    for key in ("n_cavity", "n_mech"):
        if out[key] < 2:
            raise ConfigError(f"numerics.{key}", "must be >= 2")
    if out["sample_stride"] < 1:
        raise ConfigError("numerics.sample_stride", "must be >= 1")
    return out


def _validate_experiment(run, raw):
    defaults = _EXPERIMENT_DEFAULTS[run]
    raw = _expect_mapping(raw, "experiment")
    _reject_unknown(raw, defaults, "experiment")
    out = json.loads(json.dumps(defaults))  # deep copy of plain data
    for key, value in raw.items():
        path = f"experiment.{key}"
        if key == "truncations":
            if (not isinstance(value, list) or not value
                    or any(isinstance(v, bool) or not isinstance(v, int) for v in value)):
                raise ConfigError(path, "expected a non-empty list of integers")
            if any(v < 2 for v in value):
                raise ConfigError(path, "every truncation must be >= 2")
            if any(b <= a for a, b in zip(value, value[1:])):
                raise ConfigError(path, "truncations must be strictly increasing")
            out[key] = list(value)
        elif key == "n_traj":
            n = _as_int(value, path)
            if n < 1:
                raise ConfigError(path, "must be >= 1")
            out[key] = n
        elif key == "n_steps":
            n = _as_int(value, path)
            if n < 1:
                raise ConfigError(path, "must be >= 1")
            out[key] = n
        elif key == "cross_run":
            out[key] = _as_bool(value, path)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration with every default filled in."""

    model: str
    run: str
    seed: int
    physics: dict
    numerics: dict
    experiment: dict

    def echo(self):
        """Plain nested dict, round-trips through validation unchanged."""
        return {
            "model": self.model,
            "run": self.run,
            "seed": self.seed,
            "physics": dict(self.physics),
            "numerics": dict(self.numerics),
            "experiment": json.loads(json.dumps(self.experiment)),
        }

    def echo_json(self):
        return json.dumps(self.echo(), sort_keys=True)


def validate_config(raw, run=None, seed=None, source="config"):
    """Build an :class:`ExperimentConfig` from parsed JSON.

    ``run`` (from the command line) overrides any run key in the file;
    ``seed`` likewise.  Raises :class:`ConfigError` naming the bad field.
    """
    raw = _expect_mapping(raw, source)
    _reject_unknown(raw, ("model", "run", "seed", "physics", "numerics",
                          "experiment"), "")
    if "model" not in raw:
        raise ConfigError("model", "is required")
    model = raw["model"]
    if model not in MODELS:
        raise ConfigError("model", f"must be one of {MODELS}, got {model!r}")

    effective_run = run if run is not None else raw.get("run")
    if effective_run is None:
        raise ConfigError("run", "is required (config key or command line)")
    if effective_run not in RUNS:
        raise ConfigError("run", f"must be one of {RUNS}, got {effective_run!r}")

    effective_seed = seed if seed is not None else raw.get("seed", 42)
    if isinstance(effective_seed, bool) or not isinstance(effective_seed, int):
        raise ConfigError("seed", f"expected an integer, got {effective_seed!r}")

    return ExperimentConfig(
        model=model,
        run=effective_run,
        seed=int(effective_seed),
        physics=_validate_physics(model, raw.get("physics", {})),
        numerics=_validate_numerics(raw.get("numerics", {})),
        experiment=_validate_experiment(effective_run, raw.get("experiment", {})),
    )


def load_config(path, run=None, seed=None):
    """Parse and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}")
    return validate_config(raw, run=run, seed=seed)


def n_steps_for(numerics):
    """Number of integration steps implied by (dt, t_final)."""
    return max(1, int(round(numerics["t_final"] / numerics["dt"])))
