"""Moving-load beam physics: forcing, PDE residual, closed-form modal series.

Governing equation (damping carried in the config but required to be zero)::

    m u_tt + EI u_xxxx = p delta(x - v t),   0 <= x <= L, 0 <= t <= t_end

with simply supported ends (u = u_xx = 0 at x = 0, L) and the beam at rest at t = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UndefinedMetricError, UsageError

DEFAULT_SIGMA = 1.0 / math.sqrt(2.0 * math.pi)  # unit peak height
DEFAULT_RESONANCE_EPS = 1e-8
DEFAULT_N_TERMS = 200


@dataclass(frozen=True)
class BeamConfig:
    m: float = 1.0
    E_times_I: float = 1.0
    L: float = math.pi
    p: float = 1.0
    v: float = 1.0
    t_end: float = math.pi / 2
    c_e: float = 0.0
    c_i: float = 0.0

    def __post_init__(self):
        if not (self.m > 0 and self.E_times_I > 0 and self.L > 0 and self.t_end > 0):
            raise ConfigurationError("m, E_times_I, L and t_end must be positive")
        if self.v < 0:
            raise ConfigurationError("load speed v must be non-negative")
        if self.c_e != 0 or self.c_i != 0:
            raise ConfigurationError("damped beams are not supported (c_e and c_i must be 0)")
        # the load must stay on the beam; small slack for pi-valued inputs
        if self.v * self.t_end > self.L * (1 + 1e-12):
            raise ConfigurationError(f"load leaves the beam: v*t_end={self.v * self.t_end} > L={self.L}")


@dataclass(frozen=True)
class DeltaModel:
    """Point-load model: a Gaussian density, or the indicator ``|arg| < tol``."""

    kind: str = "gaussian"
    mu: float = 0.0
    sigma: float = DEFAULT_SIGMA
    tol: float = 1e-12

    def __post_init__(self):
        if self.kind not in ("gaussian", "discrete"):
            raise ConfigurationError(f"unknown delta kind {self.kind!r}")
        if self.kind == "gaussian" and not self.sigma > 0:
            raise ConfigurationError("gaussian delta needs sigma > 0")
        if self.kind == "discrete" and not self.tol > 0:
            raise ConfigurationError("discrete delta needs tol > 0")

    def __call__(self, arg):
        if self.kind == "gaussian":
            return gaussian_delta(arg, self.mu, self.sigma)
        return discrete_delta(arg, self.tol)


@dataclass(frozen=True)
class ModalConstants:
    n: int
    Omega_n: float
    omega_n: float
    S_n: float


def gaussian_delta(x, mu=0.0, sigma=DEFAULT_SIGMA):
    if not sigma > 0:
        raise UsageError("sigma must be positive")
    z = (np.asarray(x, dtype=float) - mu) / sigma
    out = np.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))
    return float(out) if np.ndim(out) == 0 else out


def discrete_delta(arg, tol=1e-12):
    if not tol > 0:
        raise UsageError("tol must be positive")
    out = (np.abs(np.asarray(arg, dtype=float)) < tol).astype(float)
    return float(out) if np.ndim(out) == 0 else out


def check_undamped(beam: BeamConfig) -> None:
    if beam.c_e != 0 or beam.c_i != 0:
        raise ConfigurationError("damped beams are not supported (c_e and c_i must be 0)")


def load_forcing(x, t, beam: BeamConfig, delta: DeltaModel):
    """Right-hand side delta(x - v t) without the load magnitude."""
    return delta(np.asarray(x, dtype=float) - beam.v * np.asarray(t, dtype=float))


def pde_residual(d, x, t, beam: BeamConfig, delta: DeltaModel, load=None):
    """``m u_tt + EI u_xxxx - p delta(x - v t)``.

    ``d`` is a DerivBundle (fields may be arrays or tape variables). ``load``
    overrides ``beam.p``; in inverse mode it is the trainable load estimate.
    """
    check_undamped(beam)
    p = beam.p if load is None else load
    forcing = load_forcing(x, t, beam, delta)
    return beam.m * d.u_tt + beam.E_times_I * d.u_xxxx - p * forcing


def modal_constants(n: int, beam: BeamConfig) -> ModalConstants:
    if n < 1:
        raise UsageError(f"mode index must be >= 1, got {n}")
    Omega = n * beam.v * math.pi / beam.L
    omega = (n * math.pi / beam.L) ** 2 * math.sqrt(beam.E_times_I / beam.m)
    return ModalConstants(n, Omega, omega, Omega / omega)


def generic_bracket(S, omega, t):
    """Time factor ``(sin(S w t) - S sin(w t)) / (1 - S^2)`` of one mode."""
    return (np.sin(S * omega * t) - S * np.sin(omega * t)) / (1.0 - S * S)


def resonant_bracket(omega, t):
    """Limit of :func:`generic_bracket` as ``S -> 1``."""
    wt = omega * np.asarray(t, dtype=float)
    return 0.5 * (np.sin(wt) - wt * np.cos(wt))


def analytical_deflection(
    x,
    t,
    beam: BeamConfig,
    n_terms: int = DEFAULT_N_TERMS,
    resonance_eps: float = DEFAULT_RESONANCE_EPS,
):
    """Truncated modal series for a true point load; ``x`` and ``t`` broadcast."""
    if n_terms < 1:
        raise UsageError("n_terms must be >= 1")
    check_undamped(beam)
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    shape = x.shape
    xf, tf = x.ravel(), t.ravel()
    amp = 2.0 * beam.p * beam.L**3 / (beam.E_times_I * math.pi**4)
    total = np.zeros(xf.shape)
    chunk = 64
    for start in range(1, n_terms + 1, chunk):
        n = np.arange(start, min(start + chunk, n_terms + 1), dtype=float)[:, None]
        Omega = n * beam.v * math.pi / beam.L
        omega = (n * math.pi / beam.L) ** 2 * math.sqrt(beam.E_times_I / beam.m)
        S = Omega / omega
        resonant = np.abs(1.0 - S * S) < resonance_eps
        safe_S = np.where(resonant, 0.0, S)
        bracket = np.where(resonant, resonant_bracket(omega, tf[None, :]), generic_bracket(safe_S, omega, tf[None, :]))
        total += np.sum(np.sin(n * math.pi * xf[None, :] / beam.L) * bracket / n**4, axis=0)
    out = (amp * total).reshape(shape)
    return float(out) if out.ndim == 0 else out


def relative_error_percent(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.size != truth.size:
        raise UsageError(f"length mismatch: {pred.size} predictions vs {truth.size} reference values")
    if pred.size == 0:
        raise UsageError("empty input")
    denom = np.linalg.norm(truth)
    if denom == 0:
        raise UndefinedMetricError("relative error undefined for an all-zero reference")
    return float(np.linalg.norm(pred - truth) / denom * 100.0)
