"""Seeded collocation and sensor-data sets."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .beam import BeamConfig
from .errors import UsageError

# independent Philox streams per category
_STREAM = {"interior": 0, "boundary": 1, "initial": 2, "data": 3}


def _rng(seed: int, category: str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed).jumped(_STREAM[category]))


def _empty(cols: int) -> np.ndarray:
    return np.zeros((0, cols))


@dataclass
class SampleSet:
    """Point sets as arrays: (N, 2) of (x, t) and (N, 3) of (x, t, u_target) for data."""

    interior: np.ndarray = field(default_factory=lambda: _empty(2))
    boundary: np.ndarray = field(default_factory=lambda: _empty(2))
    initial: np.ndarray = field(default_factory=lambda: _empty(2))
    data: np.ndarray = field(default_factory=lambda: _empty(3))

    def counts(self) -> dict:
        return {k: len(getattr(self, k)) for k in ("interior", "boundary", "initial", "data")}

    def with_data(self, data: np.ndarray) -> SampleSet:
        return SampleSet(self.interior, self.boundary, self.initial, np.asarray(data, dtype=float).reshape(-1, 3))


def sample_training_points(beam: BeamConfig, n_int: int, n_b: int, n_in: int, seed: int) -> SampleSet:
    if min(n_int, n_b, n_in) < 0:
        raise UsageError("point counts must be non-negative")
    if n_b % 2:
        raise UsageError(f"n_b must be even to split across both ends, got {n_b}")
    L, T = beam.L, beam.t_end

    rng = _rng(seed, "interior")
    # row-wise (x, t) draws: a longer request extends, not reshuffles, a shorter one
    interior = rng.uniform(0.0, 1.0, (n_int, 2)) * np.array([L, T])

    rng = _rng(seed, "boundary")
    tb = rng.uniform(0.0, T, n_b)
    xb = np.concatenate([np.zeros(n_b // 2), np.full(n_b // 2, L)])
    boundary = np.column_stack([xb, tb])

    rng = _rng(seed, "initial")
    initial = np.column_stack([rng.uniform(0.0, L, n_in), np.zeros(n_in)])

    return SampleSet(interior, boundary, initial)


def sensor_counts(n_locations: int, n_total: int) -> list[int]:
    """Even split, the remainder going one point each to the leading locations."""
    base, rem = divmod(n_total, n_locations)
    return [base + (1 if i < rem else 0) for i in range(n_locations)]


def sample_sensor_data(
    locations,
    n_total: int,
    beam: BeamConfig,
    truth: Callable[[np.ndarray, np.ndarray], np.ndarray],
    seed: int,
) -> np.ndarray:
    """Rows (x_s, t, truth(x_s, t)) at uniformly random times on each sensor line."""
    locations = [float(x) for x in locations]
    if not locations:
        raise UsageError("need at least one sensor location")
    for x in locations:
        if not 0.0 <= x <= beam.L:
            raise UsageError(f"sensor location {x} outside [0, {beam.L}]")
    if n_total < 0:
        raise UsageError("n_total must be non-negative")
    rng = _rng(seed, "data")
    rows = []
    for x, count in zip(locations, sensor_counts(len(locations), n_total)):
        ts = rng.uniform(0.0, beam.t_end, count)
        xs = np.full(count, x)
        us = np.asarray(truth(xs, ts), dtype=float).reshape(count)
        rows.append(np.column_stack([xs, ts, us]))
    data = np.vstack(rows) if rows else _empty(3)
    if not np.all(np.isfinite(data)):
        raise UsageError("sensor truth produced non-finite values")
    return data


def read_sensor_csv(path) -> np.ndarray:
    """Load external measurements with header ``x,t,u``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"x", "t", "u"} <= set(reader.fieldnames):
            raise UsageError(f"{path}: expected columns x,t,u")
        rows = [(float(r["x"]), float(r["t"]), float(r["u"])) for r in reader]
    return np.array(rows, dtype=float).reshape(-1, 3)
