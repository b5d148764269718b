"""Experiment configuration: JSON schema, defaults and consistency checks.

A configuration file looks like::

    {
      "model":       {"A": [[...]], "B": [[...]]},
      "plant":       {"A": [[...]], "B": [[...]]},        # default: the model
      "constraints": {"state": {"lower": [...], "upper": [...]},
                      "input": {"A": [[...]], "b": [...]}},
      "gain":        [[...]],
      "horizon":     20,
      ...
    }

Every optional field and its default is listed in :data:`DEFAULTS`.  A missing
``horizon`` is filled with 20 and reported with a warning since it changes the
safe set noticeably; other defaults are filled silently.
"""

from __future__ import annotations

import copy
import json
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from ..errors import ConfigError
from ..geometry import Polytope
from ..linsys import LinearModel, TubeGain
from .signals import KINDS, LearningSignal

DEFAULT_HORIZON = 20

_matrix = {"type": "array", "minItems": 1,
           "items": {"type": "array", "minItems": 1, "items": {"type": "number"}}}
_vector = {"type": "array", "minItems": 1, "items": {"type": "number"}}
_system = {"type": "object", "required": ["A", "B"], "additionalProperties": False,
           "properties": {"A": _matrix, "B": _matrix}}
_set = {"oneOf": [
    {"type": "object", "required": ["lower", "upper"], "additionalProperties": False,
     "properties": {"lower": _vector, "upper": _vector}},
    {"type": "object", "required": ["A", "b"], "additionalProperties": False,
     "properties": {"A": _matrix, "b": _vector}},
]}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "required": ["model", "constraints", "gain"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "model": _system,
        "plant": _system,
        "constraints": {"type": "object", "required": ["state", "input"],
                        "additionalProperties": False,
                        "properties": {"state": _set, "input": _set}},
        "gain": _matrix,
        "horizon": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "steps": {"type": "integer", "minimum": 1},
        "x0": _vector,
        "mode": {"enum": ["algorithm1", "recursive"]},
        "scenarios": {"type": "object", "additionalProperties": False, "properties": {
            "count": {"type": "integer", "minimum": 1},
            "confidence": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "tau_grid": {"type": "integer", "minimum": 2}}},
        "enlargement": {"type": "object", "additionalProperties": False, "properties": {
            "enabled": {"type": "boolean"},
            "cadence": {"type": "integer", "minimum": 1},
            "measured": {"type": "boolean"},
            "snapshots": {"type": "array", "items": {"type": "integer", "minimum": 0}}}},
        "signal": {"type": "object", "required": ["kind"], "properties": {
            "kind": {"enum": list(KINDS)}}},
        "tolerances": {"type": "object", "additionalProperties": False, "properties": {
            "solver": _pos, "check": _pos, "pass": _pos, "lmi": _pos, "safety": _pos}},
        "baseline_steps": {"type": "integer", "minimum": 1},
        "boundary_samples": {"type": "integer", "minimum": 8},
    },
}

DEFAULTS = {
    "name": "experiment",
    "seed": 0,
    "steps": 500,
    "mode": "algorithm1",
    "scenarios": {"count": 600, "confidence": 0.97, "tau_grid": 50},
    "enlargement": {"enabled": False, "cadence": 1, "measured": False, "snapshots": []},
    "signal": {"kind": "constant", "value": [0.0]},
    "tolerances": {"solver": 1e-8, "check": 1e-7, "pass": 1e-10, "lmi": 1e-8, "safety": 1e-6},
    "baseline_steps": 20,
    "boundary_samples": 64,
}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    name: str
    model: LinearModel
    plant: LinearModel
    state_set: Polytope
    input_set: Polytope
    gain: TubeGain
    horizon: int
    seed: int
    steps: int
    x0: np.ndarray
    mode: str
    samples: int
    confidence: float
    tau_grid: int
    enlarge: bool
    cadence: int
    measured: bool
    snapshots: tuple
    signal: LearningSignal
    tolerances: dict
    baseline_steps: int
    boundary_samples: int
    raw: dict

    def to_dict(self):
        return copy.deepcopy(self.raw)


def _polytope(spec, path):
    if "lower" in spec:
        lo, hi = np.asarray(spec["lower"], float), np.asarray(spec["upper"], float)
        if lo.shape != hi.shape:
            raise ConfigError(f"{path}: lower and upper differ in length")
        if np.any(lo >= hi):
            raise ConfigError(f"{path}: every lower bound must be below its upper bound")
        return Polytope.box(lo, hi)
    try:
        return Polytope(spec["A"], spec["b"])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _system(spec, path):
    try:
        return LinearModel(spec["A"], spec["B"])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "signal":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_config(data: dict, base_dir=None) -> ExperimentConfig:
    """Validate a decoded configuration and fill defaults."""
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{'.'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))
    if "horizon" not in data:
        warnings.warn(f"horizon not given; using the default N = {DEFAULT_HORIZON}", stacklevel=2)
    raw = _merge({**DEFAULTS, "horizon": DEFAULT_HORIZON}, data)

    model = _system(raw["model"], "model")
    plant = _system(raw.get("plant", raw["model"]), "plant")
    raw.setdefault("plant", copy.deepcopy(raw["model"]))
    if (plant.n, plant.m) != (model.n, model.m):
        raise ConfigError("plant: dimensions differ from the model")
    X = _polytope(raw["constraints"]["state"], "constraints.state")
    U = _polytope(raw["constraints"]["input"], "constraints.input")
    if X.dim != model.n:
        raise ConfigError(f"constraints.state: expected dimension {model.n}, got {X.dim}")
    if U.dim != model.m:
        raise ConfigError(f"constraints.input: expected dimension {model.m}, got {U.dim}")
    K = np.asarray(raw["gain"], dtype=float)
    if K.shape != (model.m, model.n):
        raise ConfigError(f"gain: expected shape {(model.m, model.n)}, got {K.shape}")
    try:
        gain = TubeGain(K, model)
    except ValueError as exc:
        raise ConfigError(f"gain: {exc}") from exc
    x0 = np.asarray(raw.get("x0", np.zeros(model.n)), dtype=float)
    raw.setdefault("x0", x0.tolist())
    if x0.shape != (model.n,):
        raise ConfigError(f"x0: expected {model.n} entries, got {x0.size}")

    signal = LearningSignal.from_dict(raw["signal"], base_dir)
    try:
        u0 = signal(0)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"signal: cannot evaluate ({exc})") from exc
    if u0.shape != (model.m,):
        raise ConfigError(f"signal: produces {u0.size} inputs, model has {model.m}")

    sc, en = raw["scenarios"], raw["enlargement"]
    return ExperimentConfig(
        name=raw["name"], model=model, plant=plant, state_set=X, input_set=U, gain=gain,
        horizon=raw["horizon"], seed=raw["seed"], steps=raw["steps"], x0=x0, mode=raw["mode"],
        samples=sc["count"], confidence=sc["confidence"], tau_grid=sc["tau_grid"],
        enlarge=en["enabled"], cadence=en["cadence"], measured=en["measured"],
        snapshots=tuple(en["snapshots"]), signal=signal, tolerances=dict(raw["tolerances"]),
        baseline_steps=raw["baseline_steps"], boundary_samples=raw["boundary_samples"], raw=raw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(data, base_dir=path.parent)


def bundled_config_path(name="mass_spring_damper") -> Path:
    """Path of a configuration shipped with the package."""
    ref = resources.files("mpsc.harness") / "configs" / f"{name}.json"
    if not ref.is_file():
        raise ConfigError(f"no bundled configuration named {name!r}")
    return Path(str(ref))
