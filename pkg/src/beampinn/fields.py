"""Space-time grid fields and their CSV form.

CSV layout: header ``x,t,u``; one row per grid point, t-major (all x for the
first t, then the next t); every float written with 17 significant digits so a
read-back is bit-exact; LF line endings and a trailing newline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError


@dataclass
class GridField:
    xs: np.ndarray  # (nx,)
    ts: np.ndarray  # (nt,)
    values: np.ndarray  # (nt, nx)

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ts = np.asarray(self.ts, dtype=float)
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.ts), len(self.xs))

    @classmethod
    def from_function(cls, fn, xs, ts) -> GridField:
        tt, xx = np.meshgrid(ts, xs, indexing="ij")
        return cls(xs, ts, np.asarray(fn(xx.ravel(), tt.ravel()), dtype=float).reshape(tt.shape))

    def flat(self):
        """(x, t, u) columns in file order."""
        tt, xx = np.meshgrid(self.ts, self.xs, indexing="ij")
        return xx.ravel(), tt.ravel(), self.values.ravel()

    def same_grid(self, other: GridField) -> bool:
        return (
            self.xs.shape == other.xs.shape
            and self.ts.shape == other.ts.shape
            and np.array_equal(self.xs, other.xs)
            and np.array_equal(self.ts, other.ts)
        )


def write_field_csv(path, field: GridField) -> None:
    x, t, u = field.flat()
    lines = ["x,t,u"]
    lines.extend(f"{a:.17g},{b:.17g},{c:.17g}" for a, b, c in zip(x, t, u))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field_csv(path) -> GridField:
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if header != "x,t,u":
            raise UsageError(f"{path}: expected header 'x,t,u', got {header!r}")
        rows = [line.split(",") for line in fh.read().splitlines() if line]
    try:
        arr = np.array(rows, dtype=float).reshape(-1, 3)
    except ValueError as exc:
        raise UsageError(f"{path}: malformed row ({exc})") from None
    if len(arr) == 0:
        raise UsageError(f"{path}: no data rows")
    ts = np.unique(arr[:, 1])
    xs = arr[arr[:, 1] == arr[0, 1], 0]
    if len(ts) * len(xs) != len(arr):
        raise UsageError(f"{path}: not a rectangular grid")
    field = GridField(xs, ts, arr[:, 2])
    x, t, _ = field.flat()
    if not (np.array_equal(x, arr[:, 0]) and np.array_equal(t, arr[:, 1])):
        raise UsageError(f"{path}: rows are not in t-major grid order")
    return field
