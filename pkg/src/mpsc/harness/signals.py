"""Learning-input signals evaluated at integer time steps."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError

KINDS = ("sinusoid", "csv-replay", "constant")


@dataclass(frozen=True, eq=False)
class LearningSignal:
    """Deterministic learning input ``u_L(k)``.

    ``sinusoid``
        ``sum_i a_i sin(omega_i k + phi_i)`` per input channel.  ``amplitudes``,
        ``frequencies`` (rad per step) and ``phases`` are 1-D for a single input
        or ``(m, terms)`` for several.
    ``csv-replay``
        Column(s) of a recorded trace, one row per step.
    ``constant``
        ``value`` at every step.
    """

    kind: str
    params: dict = field(default_factory=dict)
    _table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"signal.kind: expected one of {KINDS}, got {self.kind!r}")
        if self.kind == "csv-replay" and self._table is None:
            object.__setattr__(self, "_table", _read_columns(self.params))

    @classmethod
    def from_dict(cls, spec: dict, base_dir=None):
        spec = dict(spec)
        kind = spec.pop("kind", None)
        if kind == "csv-replay" and base_dir is not None:
            from pathlib import Path

            path = Path(spec["path"])
            spec["path"] = str(path if path.is_absolute() else Path(base_dir) / path)
        return cls(kind, spec)

    def to_dict(self):
        return {"kind": self.kind, **self.params}

    def __call__(self, k: int) -> np.ndarray:
        if k < 0:
            raise ValueError("time step must be non-negative")
        if self.kind == "constant":
            return np.atleast_1d(np.asarray(self.params["value"], dtype=float))
        if self.kind == "sinusoid":
            a = np.atleast_2d(np.asarray(self.params["amplitudes"], dtype=float))
            w = np.atleast_2d(np.asarray(self.params["frequencies"], dtype=float))
            p = np.atleast_2d(np.asarray(self.params.get("phases", np.zeros_like(a)), dtype=float))
            return np.sum(a * np.sin(w * k + p), axis=1)
        if k >= len(self._table):
            raise ValueError(f"replayed signal has {len(self._table)} steps, asked for step {k}")
        return self._table[k].copy()


def _read_columns(params):
    path = params.get("path")
    if not path:
        raise ConfigError("signal.path: csv-replay needs a file path")
    columns = params.get("columns", ["uL"])
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"signal.path: cannot read {path}: {exc}") from exc
    missing = [c for c in columns if rows and c not in rows[0]]
    if not rows or missing:
        raise ConfigError(f"signal.columns: {path} lacks columns {missing or columns}")
    return np.array([[float(r[c]) for c in columns] for r in rows])
