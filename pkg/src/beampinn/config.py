"""Strict JSON experiment configuration.

Every section is optional; anything omitted falls back to the preset of the
subcommand being run. Unknown sections or keys are rejected by name. Numeric
fields also accept simple multiples of pi written as strings: ``"pi"``,
``"pi/8"``, ``"2*pi"``, ``"3*pi/4"``.
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass, field

from .beam import BeamConfig, DeltaModel
from .errors import ConfigurationError
from .trainer import TrainConfig, delta_fit_preset, dirac_preset, forward_preset, inverse_preset

_PI_RE = re.compile(r"^\s*(?:([0-9.eE+-]+)\s*\*\s*)?pi(?:\s*/\s*([0-9.eE+-]+))?\s*$")

BEAM_KEYS = {f.name for f in dataclasses.fields(BeamConfig)}
DELTA_KEYS = {f.name for f in dataclasses.fields(DeltaModel)}
TRAIN_KEYS = {
    "hidden_layers",
    "neurons",
    "epochs",
    "learning_rate",
    "load_learning_rate",
    "lambda1",
    "lambda2",
    "lambda3",
    "seed",
    "p_init",
    "augmented_conditions",
    "eval_nx",
    "eval_nt",
    "trace_every",
}
SAMPLING_KEYS = {"n_int", "n_b", "n_in", "n_data", "sensor_locations"}
ORACLE_KEYS = {"engine", "n_terms", "resonance_eps", "n_modes", "dt"}
OUTPUT_KEYS = {"dir"}
SECTIONS = {
    "beam": BEAM_KEYS,
    "delta": DELTA_KEYS,
    "train": TRAIN_KEYS,
    "sampling": SAMPLING_KEYS,
    "oracle": ORACLE_KEYS,
    "output": OUTPUT_KEYS,
}
INT_KEYS = {"hidden_layers", "neurons", "epochs", "seed", "n_int", "n_b", "n_in", "n_data", "n_terms", "n_modes", "eval_nx", "eval_nt", "trace_every"}

PRESETS = {
    "forward": forward_preset,
    "dirac": dirac_preset,
    "inverse": inverse_preset,
    "delta-fit": delta_fit_preset,
}


def parse_number(value, key: str = "value") -> float:
    if isinstance(value, bool):
        raise ConfigurationError(f"{key}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _PI_RE.match(value)
        if m:
            factor = float(m.group(1)) if m.group(1) else 1.0
            divisor = float(m.group(2)) if m.group(2) else 1.0
            return factor * math.pi / divisor
    raise ConfigurationError(f"{key}: expected a number or a multiple of pi, got {value!r}")


@dataclass(frozen=True)
class OracleSettings:
    engine: str = "series"
    n_terms: int = 200
    resonance_eps: float = 1e-8
    n_modes: int = 60
    dt: float = 1e-3

    def __post_init__(self):
        if self.engine not in ("series", "modal"):
            raise ConfigurationError(f"oracle.engine must be 'series' or 'modal', got {self.engine!r}")


@dataclass(frozen=True)
class Experiment:
    beam: BeamConfig
    train: TrainConfig
    oracle: OracleSettings = OracleSettings()
    output_dir: str | None = None
    raw: dict = field(default_factory=dict, compare=False)

    def echo(self) -> dict:
        """Fully resolved configuration, re-loadable with :func:`load_experiment`."""
        t = self.train
        return {
            "beam": dataclasses.asdict(self.beam),
            "delta": dataclasses.asdict(t.delta),
            "train": {k: getattr(t, k) for k in sorted(TRAIN_KEYS)},
            "sampling": {
                "n_int": t.n_int,
                "n_b": t.n_b,
                "n_in": t.n_in,
                "n_data": t.n_data,
                "sensor_locations": list(t.sensor_locations),
            },
            "oracle": dataclasses.asdict(self.oracle),
            "output": {"dir": self.output_dir},
        }


def _typed(key: str, value):
    if key in ("kind", "engine", "dir"):
        if value is not None and not isinstance(value, str):
            raise ConfigurationError(f"{key}: expected a string")
        return value
    if key == "augmented_conditions":
        if not isinstance(value, bool):
            raise ConfigurationError(f"{key}: expected true/false")
        return value
    if key == "sensor_locations":
        if not isinstance(value, list):
            raise ConfigurationError(f"{key}: expected a list")
        return tuple(parse_number(v, key) for v in value)
    if key == "load_learning_rate" and value is None:
        return None
    number = parse_number(value, key)
    if key in INT_KEYS:
        if number != int(number):
            raise ConfigurationError(f"{key}: expected an integer, got {value!r}")
        return int(number)
    return number


def build_experiment(doc: dict, preset: str = "forward") -> Experiment:
    if not isinstance(doc, dict):
        raise ConfigurationError("configuration must be a JSON object")
    for section, body in doc.items():
        if section not in SECTIONS:
            raise ConfigurationError(f"unknown configuration section {section!r}")
        if not isinstance(body, dict):
            raise ConfigurationError(f"section {section!r} must be an object")
        for key in body:
            if key not in SECTIONS[section]:
                raise ConfigurationError(f"unknown key {key!r} in section {section!r}")
    typed = {s: {k: _typed(k, v) for k, v in doc.get(s, {}).items()} for s in SECTIONS}

    beam = BeamConfig(**typed["beam"])
    base = PRESETS[preset]()
    delta = dataclasses.replace(base.delta, **typed["delta"]) if typed["delta"] else base.delta
    train = dataclasses.replace(base, delta=delta, **typed["train"], **typed["sampling"])
    oracle = OracleSettings(**typed["oracle"])
    return Experiment(beam, train, oracle, typed["output"].get("dir"), doc)


def load_experiment(path, preset: str = "forward") -> Experiment:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    return build_experiment(doc, preset)
