"""Modal-superposition reference solution for a Gaussian moving load.

The deflection is expanded in the simply supported sine modes,
``u(x, t) = sum_n q_n(t) sin(n pi x / L)``, which turns the beam equation into
independent oscillators

    q_n'' + omega_n^2 q_n = (2 / (m L)) * p * integral_0^L g(x - v t - mu) sin(n pi x / L) dx

started from rest. The load projections use composite Simpson quadrature on the
load's support window, and each oscillator is stepped with classical RK4. No part
of this module uses the closed-form point-load series, so it can serve as an
independent check on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .beam import BeamConfig, DeltaModel, check_undamped, modal_constants
from .errors import ConfigurationError, StabilityError, UsageError
from .network import DerivBundle

SIMPSON_PANELS = 256
WINDOW_SIGMAS = 8.0
MAX_STEP_OMEGA = 0.5  # h * omega_n per RK4 step
DEFAULT_MAX_SUBSTEPS = 16


def _check_delta(delta: DeltaModel) -> None:
    if delta.kind != "gaussian":
        raise ConfigurationError("the reference solver only supports Gaussian loads")


def _simpson_weights(panels: int = SIMPSON_PANELS) -> np.ndarray:
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def _gauss(z, sigma):
    return np.exp(-0.5 * (z / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))


def modal_forces(modes, times, beam: BeamConfig, delta: DeltaModel) -> np.ndarray:
    """Generalized forces, shape (len(times), len(modes)).

    Quadrature runs over ``[c - 8 sigma, c + 8 sigma]`` clipped to the beam,
    with ``c = v t + mu`` the load centre. When the window lies inside the beam
    the nodes are a fixed offset pattern around ``c``, and the same Simpson sum
    is evaluated through the angle-addition identity.
    """
    _check_delta(delta)
    modes = np.atleast_1d(np.asarray(modes, dtype=float))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(modes < 1):
        raise UsageError("mode indices must be >= 1")
    k = modes * math.pi / beam.L
    scale = 2.0 * beam.p / (beam.m * beam.L)
    sigma, half = delta.sigma, WINDOW_SIGMAS * delta.sigma
    w = _simpson_weights()
    out = np.zeros((times.size, modes.size))
    if beam.p == 0:
        return out

    centre = beam.v * times + delta.mu
    lo = np.maximum(centre - half, 0.0)
    hi = np.minimum(centre + half, beam.L)
    inside = (centre - half >= 0.0) & (centre + half <= beam.L)
    clipped = ~inside & (hi > lo)

    if inside.any():
        offsets = np.linspace(-half, half, SIMPSON_PANELS + 1)
        h = 2.0 * half / SIMPSON_PANELS
        wg = h * w * _gauss(offsets, sigma)
        cos_part = (wg[:, None] * np.cos(offsets[:, None] * k[None, :])).sum(axis=0)
        sin_part = (wg[:, None] * np.sin(offsets[:, None] * k[None, :])).sum(axis=0)
        kc = centre[inside, None] * k[None, :]
        out[inside] = scale * (np.sin(kc) * cos_part + np.cos(kc) * sin_part)

    idx = np.flatnonzero(clipped)
    chunk = max(1, 2_000_000 // ((SIMPSON_PANELS + 1) * modes.size))
    for start in range(0, idx.size, chunk):
        sel = idx[start : start + chunk]
        frac = np.linspace(0.0, 1.0, SIMPSON_PANELS + 1)
        nodes = lo[sel, None] + (hi[sel] - lo[sel])[:, None] * frac[None, :]
        h = (hi[sel] - lo[sel]) / SIMPSON_PANELS
        wg = h[:, None] * w[None, :] * _gauss(nodes - centre[sel, None], sigma)
        out[sel] = scale * np.einsum("tj,tjn->tn", wg, np.sin(nodes[:, :, None] * k[None, None, :]))
    return out


def modal_force(n: int, t: float, beam: BeamConfig, delta: DeltaModel) -> float:
    """Projection of the moving Gaussian load onto mode ``n`` at time ``t``."""
    if n < 1:
        raise UsageError(f"mode index must be >= 1, got {n}")
    return float(modal_forces([n], [t], beam, delta)[0, 0])


def rk4_step(q, qd, f0, fh, f1, omega, h):
    """One classical RK4 step of ``q'' = -omega^2 q + f(t)``."""
    w2 = omega * omega
    k1q, k1v = qd, -w2 * q + f0
    k2q, k2v = qd + 0.5 * h * k1v, -w2 * (q + 0.5 * h * k1q) + fh
    k3q, k3v = qd + 0.5 * h * k2v, -w2 * (q + 0.5 * h * k2q) + fh
    k4q, k4v = qd + h * k3v, -w2 * (q + h * k3q) + f1
    return (
        q + h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q),
        qd + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v),
    )


def _rk4_affine(omega, h):
    """RK4 on a linear oscillator is affine: y+ = P y + Q [f0, fh, f1].

    Returns P with shape (modes, 2, 2) and Q with shape (modes, 2, 3), read off
    by stepping unit inputs.
    """
    z = np.zeros_like(omega)
    one = np.ones_like(omega)
    P = np.empty(omega.shape + (2, 2))
    Q = np.empty(omega.shape + (2, 3))
    for col, (q, qd) in enumerate(((one, z), (z, one))):
        P[:, 0, col], P[:, 1, col] = rk4_step(q, qd, z, z, z, omega, h)
    for col, f in enumerate(((one, z, z), (z, one, z), (z, z, one))):
        Q[:, 0, col], Q[:, 1, col] = rk4_step(z, z, *f, omega, h)
    return P, Q


@dataclass
class ModalSolution:
    n_modes: int
    dt: float
    times: np.ndarray
    q: np.ndarray  # (n_modes, len(times))
    qd: np.ndarray
    beam: BeamConfig
    delta: DeltaModel
    substeps: np.ndarray  # RK4 steps per dt, per mode

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(1, self.n_modes + 1) * math.pi / self.beam.L

    def _modal_state(self, t):
        """Cubic Hermite interpolation of (q, q') in time; shapes (n_modes, T)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12) or np.any(t > self.times[-1] + 1e-12):
            raise UsageError("time outside the solved interval")
        pos = np.clip(t / self.dt, 0.0, len(self.times) - 1)
        i = np.minimum(np.floor(pos).astype(int), len(self.times) - 2)
        s = pos - i
        exact = s == 0.0
        h = self.dt
        q0, q1 = self.q[:, i], self.q[:, i + 1]
        d0, d1 = self.qd[:, i], self.qd[:, i + 1]
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        q = h00 * q0 + h10 * h * d0 + h01 * q1 + h11 * h * d1
        dh00 = (6 * s**2 - 6 * s) / h
        dh10 = 3 * s**2 - 4 * s + 1
        dh01 = (-6 * s**2 + 6 * s) / h
        dh11 = 3 * s**2 - 2 * s
        qd = dh00 * q0 + dh10 * d0 + dh01 * q1 + dh11 * d1
        q = np.where(exact, q0, q)
        qd = np.where(exact, d0, qd)
        return q, qd

    def evaluate(self, x, t):
        """Deflection at broadcast (x, t)."""
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        q, _ = self._modal_state(t.ravel())
        basis = np.sin(self.wavenumbers[:, None] * x.ravel()[None, :])
        out = np.sum(q * basis, axis=0).reshape(x.shape)
        return float(out) if out.ndim == 0 else out

    __call__ = evaluate

    def derivatives(self, x, t) -> DerivBundle:
        """Space and time derivatives of the modal reconstruction.

        ``u_tt`` uses the oscillator equation, ``q'' = F_n(t) - omega_n^2 q``.
        """
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        xf, tf = x.ravel(), t.ravel()
        q, qd = self._modal_state(tf)
        k = self.wavenumbers[:, None]
        omega2 = (k**4) * self.beam.E_times_I / self.beam.m
        forces = modal_forces(np.arange(1, self.n_modes + 1), tf, self.beam, self.delta).T
        qdd = forces - omega2 * q
        s, c = np.sin(k * xf[None, :]), np.cos(k * xf[None, :])

        def total(a):
            return np.sum(a, axis=0).reshape(x.shape)

        return DerivBundle(
            u=total(q * s),
            u_t=total(qd * s),
            u_tt=total(qdd * s),
            u_x=total(k * q * c),
            u_xx=total(-(k**2) * q * s),
            u_xxxx=total(k**4 * q * s),
        )


def solve_reference(
    beam: BeamConfig,
    delta: DeltaModel,
    n_modes: int,
    dt: float,
    max_substeps: int = DEFAULT_MAX_SUBSTEPS,
) -> ModalSolution:
    """Integrate every mode from rest over [0, t_end] with fixed-step RK4.

    Output samples are spaced ``dt`` (shrunk slightly so it divides ``t_end``).
    Stiff modes take ``ceil(dt * omega_n / 0.5)`` RK4 substeps per sample; if a
    mode would need more than ``max_substeps`` a :class:`StabilityError` is
    raised. ``max_substeps=1`` gives the plain single-step integrator.
    """
    check_undamped(beam)
    _check_delta(delta)
    if n_modes < 1:
        raise UsageError("n_modes must be >= 1")
    if not dt > 0:
        raise UsageError("dt must be positive")
    n_steps = max(1, math.ceil(beam.t_end / dt - 1e-9))
    dt = beam.t_end / n_steps
    times = np.linspace(0.0, beam.t_end, n_steps + 1)

    modes = np.arange(1, n_modes + 1)
    omega = np.array([modal_constants(int(n), beam).omega_n for n in modes])
    substeps = np.maximum(1, np.ceil(dt * omega / MAX_STEP_OMEGA - 1e-12)).astype(int)
    if substeps.max() > max_substeps:
        raise StabilityError(
            f"dt * max omega = {dt * omega.max():.3g} needs {substeps.max()} RK4 substeps "
            f"(limit {max_substeps}); reduce dt or n_modes"
        )

    # per-interval step matrices A and forcing increments c, grouped by substep count
    A = np.empty((n_modes, 2, 2))
    incr = np.empty((n_steps, n_modes, 2))
    for s in np.unique(substeps):
        sel = np.flatnonzero(substeps == s)
        h = dt / s
        P, Q = _rk4_affine(omega[sel], h)
        fine_t = np.linspace(0.0, beam.t_end, 2 * s * n_steps + 1)
        F = modal_forces(modes[sel], fine_t, beam, delta)  # (T_fine, group)
        acc = np.zeros((n_steps, sel.size, 2))
        Pk = np.broadcast_to(np.eye(2), P.shape).copy()
        for j in range(s):
            f0 = F[2 * j : -1 : 2 * s][:n_steps]
            fh = F[2 * j + 1 :: 2 * s][:n_steps]
            f1 = F[2 * j + 2 :: 2 * s][:n_steps]
            fvec = np.stack([f0, fh, f1], axis=-1)  # (K, group, 3)
            acc = np.einsum("gij,kgj->kgi", P, acc) + np.einsum("gij,kgj->kgi", Q, fvec)
            Pk = np.einsum("gij,gjk->gik", P, Pk)
        A[sel] = Pk
        incr[:, sel, :] = acc

    q = np.zeros((n_modes, n_steps + 1))
    qd = np.zeros((n_modes, n_steps + 1))
    a00, a01, a10, a11 = A[:, 0, 0], A[:, 0, 1], A[:, 1, 0], A[:, 1, 1]
    yq = np.zeros(n_modes)
    yv = np.zeros(n_modes)
    for i in range(n_steps):
        yq, yv = a00 * yq + a01 * yv + incr[i, :, 0], a10 * yq + a11 * yv + incr[i, :, 1]
        q[:, i + 1] = yq
        qd[:, i + 1] = yv
    return ModalSolution(n_modes, dt, times, q, qd, beam, delta, substeps)
