"""Fully connected tanh network ``u*(x, t; theta)``.

The same forward code runs on plain arrays, on :class:`~beampinn.autodiff.Jet`
inputs (input derivatives), and with :class:`~beampinn.autodiff.Var` parameters
(parameter gradients), because it only uses the arithmetic those types share.

Checkpoint layout (all little-endian)::

    int32   n_sizes
    int32   layer_sizes[n_sizes]     e.g. [2, 20, 1]
    int32   has_load                 0 or 1
    float64 theta[n_params]          flattened parameters, see MlpParams.flatten
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Jet, Var, jet_constant, jet_variable, value_of
from .errors import ConfigurationError, EvaluationError, UsageError


@dataclass(frozen=True)
class Architecture:
    hidden_layers: int
    neurons_per_layer: int
    n_inputs: int = 2

    def __post_init__(self):
        if self.hidden_layers < 1 or self.neurons_per_layer < 1:
            raise ConfigurationError("hidden_layers and neurons_per_layer must be >= 1")
        if self.n_inputs < 1:
            raise ConfigurationError("n_inputs must be >= 1")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.n_inputs] + [self.neurons_per_layer] * self.hidden_layers + [1]

    def n_params(self, with_load: bool = False) -> int:
        sizes = self.layer_sizes
        return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:])) + int(with_load)


@dataclass
class MlpParams:
    """Weights ``W[l]`` of shape (fan_in, fan_out), biases ``b[l]`` of shape (fan_out,).

    Entries may be numpy arrays or tape variables. ``trainable_load`` holds the
    unknown load magnitude in inverse mode and is ``None`` otherwise.
    """

    weights: list
    biases: list
    trainable_load: object = None
    arch: Architecture | None = field(default=None, compare=False)

    @property
    def layer_sizes(self) -> list[int]:
        return [np.shape(self.weights[0])[0]] + [np.shape(w)[1] for w in self.weights]

    def flatten(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(np.ravel(value_of(w)))
            parts.append(np.ravel(value_of(b)))
        if self.trainable_load is not None:
            parts.append(np.atleast_1d(float(value_of(self.trainable_load))))
        return np.concatenate(parts).astype(float)

    @classmethod
    def unflatten(cls, layer_sizes, theta, with_load: bool = False) -> MlpParams:
        """Rebuild from a flat vector; ``theta`` may be an ndarray or a tape variable."""
        expected = sum(a * b + b for a, b in zip(layer_sizes[:-1], layer_sizes[1:])) + int(with_load)
        if np.shape(theta) != (expected,):
            raise UsageError(f"parameter vector has shape {np.shape(theta)}, expected ({expected},)")
        weights, biases, pos = [], [], 0
        for a, b in zip(layer_sizes[:-1], layer_sizes[1:]):
            weights.append(theta[pos : pos + a * b].reshape(a, b))
            pos += a * b
            biases.append(theta[pos : pos + b].reshape(1, b))
            pos += b
        load = theta[pos] if with_load else None
        return cls(weights, biases, load)

    def copy_frozen(self) -> MlpParams:
        """Plain-array copy, detached from any tape."""
        return MlpParams(
            [np.array(value_of(w), dtype=float) for w in self.weights],
            [np.array(value_of(b), dtype=float).reshape(1, -1) for b in self.biases],
            None if self.trainable_load is None else float(value_of(self.trainable_load)),
            self.arch,
        )


@dataclass
class DerivBundle:
    u: object
    u_t: object
    u_tt: object
    u_x: object
    u_xx: object
    u_xxxx: object


def init_params(arch: Architecture, seed: int, with_load: bool = False, p_init: float = 0.1) -> MlpParams:
    """Glorot-uniform weights, zero biases, from a Philox stream keyed by ``seed``."""
    rng = np.random.Generator(np.random.Philox(seed))
    sizes = arch.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros((1, fan_out)))
    return MlpParams(weights, biases, float(p_init) if with_load else None, arch)


def _as_column(c):
    if isinstance(c, (int, float)) and not isinstance(c, np.ndarray):
        return c
    if isinstance(c, Var):
        return c if len(c.shape) == 2 else c.reshape(-1, 1)
    return np.asarray(c, dtype=float).reshape(-1, 1)


def _coefficient_rows(inputs, k):
    """Per-input k-th coefficients as (N, 1) columns or scalars."""
    return [_as_column(j.coeffs[k]) if isinstance(j, Jet) else (_as_column(j) if k == 0 else 0.0) for j in inputs]


def network_output(params: MlpParams, inputs):
    """Evaluate the network on a list of per-input values (arrays, scalars or jets).

    Returns an array of shape (N,) for plain inputs, or a Jet whose coefficients
    have shape (N,).
    """
    if len(inputs) != len(params.weights[0] if not isinstance(params.weights[0], Var) else params.weights[0].value):
        raise UsageError(f"network expects {np.shape(value_of(params.weights[0]))[0]} inputs, got {len(inputs)}")
    jets = [j for j in inputs if isinstance(j, Jet)]
    order = jets[0].order if jets else 0
    if any(j.order != order for j in jets):
        raise UsageError("all jet inputs must share one order")

    w0, b0 = params.weights[0], params.biases[0]
    coeffs = []
    for k in range(order + 1):
        rows = _coefficient_rows(inputs, k)
        if k == 0:
            x0 = np.hstack([np.broadcast_to(r, (max(np.size(value_of(q)) for q in rows), 1)) for r in rows])
            coeffs.append(x0 @ w0 + b0)
            continue
        acc = 0.0
        for i, r in enumerate(rows):
            if isinstance(r, (int, float)) and r == 0:
                continue
            term = w0[i : i + 1, :] if (isinstance(r, (int, float)) and r == 1) else r * w0[i : i + 1, :]
            acc = term if (isinstance(acc, float) and acc == 0) else acc + term
        coeffs.append(acc)

    h = Jet(coeffs)
    for w, b in zip(params.weights[1:], params.biases[1:]):
        h = h.tanh()
        h = h.map(lambda c, w=w: c @ w)
        h = Jet((h.coeffs[0] + b,) + h.coeffs[1:])
    out = h.map(lambda c: c[:, 0] if np.ndim(value_of(c)) == 2 else c)
    return out if jets else out.coeffs[0]


def forward(params: MlpParams, x, t=None):
    """Network output at ``(x, t)``; scalar in, scalar out; array in, array out."""
    inputs = [x] if t is None else [x, t]
    scalar = all(np.ndim(value_of(j.coeffs[0] if isinstance(j, Jet) else j)) == 0 for j in inputs)
    out = network_output(params, inputs)
    if scalar:
        if isinstance(out, Jet):
            return out.map(lambda c: c[0] if np.ndim(value_of(c)) else c)
        return out[0]
    return out


def output_jet(params: MlpParams, x, t, wrt: str, order: int) -> Jet:
    """Taylor jet of the output in one input direction, the other held fixed."""
    if wrt == "x":
        return network_output(params, [jet_variable(x, order), jet_constant(t, order)])
    if wrt == "t":
        return network_output(params, [jet_constant(x, order), jet_variable(t, order)])
    raise UsageError(f"unknown differentiation direction {wrt!r}")


def forward_with_derivs(params: MlpParams, x, t) -> DerivBundle:
    """All derivatives needed by the beam equation and its side conditions.

    Two passes: an order-4 jet in x (t fixed) and an order-2 jet in t (x fixed).
    """
    scalar = np.ndim(x) == 0 and np.ndim(t) == 0
    xs, ts = np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(t, dtype=float))
    jx = output_jet(params, xs, ts, "x", 4)
    jt = output_jet(params, xs, ts, "t", 2)
    fields = [jx.derivative(0), jt.derivative(1), jt.derivative(2), jx.derivative(1), jx.derivative(2), jx.derivative(4)]
    fields = [np.broadcast_to(np.asarray(value_of(f), dtype=float), xs.shape) for f in fields]
    for f in fields:
        if not np.all(np.isfinite(f)):
            raise EvaluationError("non-finite network derivative")
    if scalar:
        fields = [float(f[0]) for f in fields]
    else:
        fields = [np.array(f) for f in fields]
    return DerivBundle(*fields)


def save_checkpoint(path, params: MlpParams) -> None:
    sizes = params.layer_sizes
    has_load = params.trainable_load is not None
    with open(path, "wb") as fh:
        fh.write(struct.pack("<i", len(sizes)))
        fh.write(struct.pack(f"<{len(sizes)}i", *sizes))
        fh.write(struct.pack("<i", int(has_load)))
        fh.write(params.flatten().astype("<f8").tobytes())


def load_checkpoint(path) -> MlpParams:
    raw = Path(path).read_bytes()
    (n,) = struct.unpack_from("<i", raw, 0)
    sizes = list(struct.unpack_from(f"<{n}i", raw, 4))
    (has_load,) = struct.unpack_from("<i", raw, 4 + 4 * n)
    theta = np.frombuffer(raw, dtype="<f8", offset=8 + 4 * n).astype(float)
    params = MlpParams.unflatten(sizes, theta, with_load=bool(has_load))
    params.weights = [np.array(w) for w in params.weights]
    params.biases = [np.array(b) for b in params.biases]
    if has_load:
        params.trainable_load = float(params.trainable_load)
    if len(sizes) >= 3 and len(set(sizes[1:-1])) == 1 and sizes[-1] == 1:
        params.arch = Architecture(len(sizes) - 2, sizes[1], sizes[0])
    return params
