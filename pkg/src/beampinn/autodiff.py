"""Truncated Taylor jets and a minimal reverse-mode tape.

Two pieces live here:

* :class:`Var` -- a node on a reverse-mode tape wrapping a numpy array. Only the
  handful of operations the network and the losses need are supported.
* :class:`Jet` -- truncated univariate Taylor coefficients ``coeffs[k] = f^(k)(a) / k!``.
  Coefficients may be Python floats, numpy arrays, or :class:`Var` nodes, so the same
  jet arithmetic yields input derivatives (forward, through the jet) and parameter
  gradients (reverse, through the tape underneath).

Literal Python zeros in a jet are treated as structural zeros and skipped, which
keeps the recurrences cheap for inputs seeded as ``[x, 1, 0, 0, 0]``.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, TrainingError, UsageError

SUPPORTED_ORDERS = (1, 2, 3, 4)

_ids = itertools.count()


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    grad = np.asarray(grad)
    if grad.shape == tuple(shape):
        return grad
    ndim_extra = grad.ndim - len(shape)
    if ndim_extra > 0:
        grad = grad.sum(axis=tuple(range(ndim_extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Var:
    """Array-valued node of a reverse-mode tape."""

    __slots__ = ("value", "parents", "id")
    # make ndarray <op> Var dispatch to Var's reflected operators
    __array_ufunc__ = None

    def __init__(self, value, parents=()):
        self.value = value
        self.parents = parents
        self.id = next(_ids)

    @property
    def shape(self):
        return np.shape(self.value)

    def __repr__(self):
        return f"Var(shape={self.shape})"

    def __add__(self, other):
        if isinstance(other, Var):
            sa, sb = self.shape, other.shape
            return Var(
                self.value + other.value,
                ((self, lambda g: _unbroadcast(g, sa)), (other, lambda g: _unbroadcast(g, sb))),
            )
        sa = self.shape
        return Var(self.value + other, ((self, lambda g: _unbroadcast(g, sa)),))

    __radd__ = __add__

    def __neg__(self):
        return Var(-self.value, ((self, lambda g: -g),))

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Var):
            a, b = self.value, other.value
            sa, sb = np.shape(a), np.shape(b)
            return Var(
                a * b,
                ((self, lambda g: _unbroadcast(g * b, sa)), (other, lambda g: _unbroadcast(g * a, sb))),
            )
        sa = self.shape
        return Var(self.value * other, ((self, lambda g: _unbroadcast(g * other, sa)),))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            raise UsageError("division by a tape variable is not supported")
        return self * (1.0 / other)

    def __matmul__(self, other):
        if isinstance(other, Var):
            a, b = self.value, other.value
            return Var(a @ b, ((self, lambda g: g @ b.T), (other, lambda g: a.T @ g)))
        return Var(self.value @ other, ((self, lambda g: g @ other.T),))

    def __rmatmul__(self, other):
        b = self.value
        return Var(other @ b, ((self, lambda g: other.T @ g),))

    def __getitem__(self, idx):
        shape = self.shape

        def back(g):
            out = np.zeros(shape)
            out[idx] = g
            return out

        return Var(self.value[idx], ((self, back),))

    def reshape(self, *shape):
        old = self.shape
        return Var(np.reshape(self.value, shape), ((self, lambda g: np.reshape(g, old)),))

    def sum(self):
        shape = self.shape
        return Var(np.sum(self.value), ((self, lambda g: np.broadcast_to(g, shape)),))

    def square(self):
        a = self.value
        return Var(a * a, ((self, lambda g: 2.0 * g * a),))

    def tanh(self):
        y = np.tanh(self.value)
        return Var(y, ((self, lambda g: g * (1.0 - y * y)),))

    def exp(self):
        y = np.exp(self.value)
        return Var(y, ((self, lambda g: g * y),))


def value_of(x):
    """Strip tape wrappers, returning the underlying numeric value."""
    return x.value if isinstance(x, Var) else x


def backward(root: Var, leaves: Sequence[Var]) -> list:
    """Gradients of scalar ``root`` with respect to each leaf (zeros if unreachable)."""
    if np.size(root.value) != 1:
        raise UsageError("backward needs a scalar root")
    nodes = {}
    stack = [root]
    while stack:
        node = stack.pop()
        if node.id in nodes:
            continue
        nodes[node.id] = node
        for parent, _ in node.parents:
            if parent.id not in nodes:
                stack.append(parent)
    grads = {root.id: np.ones_like(root.value, dtype=float)}
    leaf_ids = {leaf.id for leaf in leaves}
    for nid in sorted(nodes, reverse=True):
        node = nodes[nid]
        g = grads.get(nid)
        if g is None or not node.parents:
            continue
        if nid not in leaf_ids:
            del grads[nid]
        for parent, fn in node.parents:
            contrib = fn(g)
            prev = grads.get(parent.id)
            grads[parent.id] = contrib if prev is None else prev + contrib
    return [np.array(grads.get(leaf.id, np.zeros(leaf.shape)), dtype=float) for leaf in leaves]


def value_and_grad(evaluate: Callable[[Var], Var], params) -> tuple[float, np.ndarray]:
    """Evaluate a scalar loss of a flat parameter vector and its exact gradient."""
    theta = Var(np.array(params, dtype=float))
    loss = evaluate(theta)
    if not isinstance(loss, Var):
        # loss does not depend on the parameters at all
        return float(loss), np.zeros_like(theta.value)
    value = float(loss.value)
    if not math.isfinite(value):
        raise TrainingError(f"non-finite loss {value}")
    (grad,) = backward(loss, [theta])
    if not np.all(np.isfinite(grad)):
        raise TrainingError("non-finite gradient")
    return value, grad


def loss_gradient(evaluate: Callable[[Var], Var], params) -> np.ndarray:
    """Exact gradient of ``evaluate(theta)`` at ``params`` by a reverse pass."""
    return value_and_grad(evaluate, params)[1]


# ---------------------------------------------------------------------------
# Taylor jets


def _is_zero(c) -> bool:
    return isinstance(c, (int, float)) and c == 0


def _mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return 0.0
    if isinstance(a, (int, float)) and a == 1:
        return b
    if isinstance(b, (int, float)) and b == 1:
        return a
    return a * b


def _scale(c, s):
    if _is_zero(c) or s == 0:
        return 0.0
    return c if s == 1 else c * s


def _sum(terms):
    out = 0.0
    for term in terms:
        if _is_zero(term):
            continue
        out = term if _is_zero(out) else out + term
    return out


def _square_coeff(a, k):
    """k-th coefficient of the square of the series ``a``."""
    cross = _sum(_mul(a[i], a[k - i]) for i in range((k + 1) // 2))
    mid = _mul(a[k // 2], a[k // 2]) if k % 2 == 0 else 0.0
    return _sum((_scale(cross, 2.0), mid))


def _tanh(c):
    return c.tanh() if isinstance(c, Var) else np.tanh(c)


def _exp(c):
    return c.exp() if isinstance(c, Var) else np.exp(c)


def _check_order(order: int) -> int:
    if order not in SUPPORTED_ORDERS:
        raise ConfigurationError(f"unsupported jet order {order!r}; expected one of {SUPPORTED_ORDERS}")
    return order


class Jet:
    """Truncated Taylor expansion ``sum_k coeffs[k] * h**k`` of a scalar quantity."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = tuple(coeffs)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __repr__(self):
        return f"Jet({[value_of(c) for c in self.coeffs]!r})"

    def _lift(self, other) -> Jet:
        if isinstance(other, Jet):
            if other.order != self.order:
                raise UsageError(f"jet order mismatch: {self.order} vs {other.order}")
            return other
        return Jet((other,) + (0.0,) * self.order)

    def __add__(self, other):
        other = self._lift(other)
        return Jet(_sum((a, b)) for a, b in zip(self.coeffs, other.coeffs))

    __radd__ = __add__

    def __neg__(self):
        return Jet(_scale(c, -1.0) for c in self.coeffs)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, (Jet, Var, np.ndarray)) and np.ndim(other) == 0:
            return Jet(_scale(c, other) for c in self.coeffs)
        other = self._lift(other)
        a, b = self.coeffs, other.coeffs
        return Jet(_sum(_mul(a[i], b[k - i]) for i in range(k + 1)) for k in range(self.order + 1))

    __rmul__ = __mul__

    def square(self) -> Jet:
        return Jet(_square_coeff(self.coeffs, k) for k in range(self.order + 1))

    def tanh(self) -> Jet:
        # y = tanh(s), y' = z s' with z = 1 - y^2, matched degree by degree
        s = self.coeffs
        y = [_tanh(s[0])]
        z = [1.0 - y[0] * y[0]]
        for k in range(1, self.order + 1):
            y.append(_scale(_sum(_scale(_mul(s[j], z[k - j]), j) for j in range(1, k + 1)), 1.0 / k))
            if k < self.order:
                z.append(_scale(_square_coeff(y, k), -1.0))
        return Jet(y)

    def exp(self) -> Jet:
        a = self.coeffs
        y = [_exp(a[0])]
        for k in range(1, self.order + 1):
            y.append(_scale(_sum(_scale(_mul(a[j], y[k - j]), j) for j in range(1, k + 1)), 1.0 / k))
        return Jet(y)

    def derivative(self, k: int):
        """k-th derivative at the expansion point, i.e. ``k! * coeffs[k]``."""
        if not 0 <= k <= self.order:
            raise UsageError(f"derivative order {k} outside 0..{self.order}")
        return _scale(self.coeffs[k], math.factorial(k))

    def map(self, fn) -> Jet:
        """Apply a linear map to every coefficient (structural zeros stay zero)."""
        return Jet(c if _is_zero(c) else fn(c) for c in self.coeffs)


def jet_variable(value, order: int) -> Jet:
    """The differentiation variable seated at ``value``."""
    _check_order(order)
    return Jet((value, 1.0) + (0.0,) * (order - 1))


def jet_constant(value, order: int) -> Jet:
    _check_order(order)
    return Jet((value,) + (0.0,) * order)


_UNARY = {"tanh": Jet.tanh, "exp": Jet.exp, "square": Jet.square, "neg": Jet.__neg__}
_BINARY = {"add": Jet.__add__, "sub": Jet.__sub__, "mul": Jet.__mul__}


def jet_arith(kind: str, a: Jet, b=None) -> Jet:
    """Apply a named operation; ``scale`` takes a real factor as ``b``."""
    if kind in _UNARY:
        return _UNARY[kind](a)
    if kind == "scale":
        if b is None or isinstance(b, Jet):
            raise UsageError("scale needs a real factor")
        return a * b
    if kind in _BINARY:
        if not isinstance(b, Jet):
            raise UsageError(f"{kind} needs two jets")
        if a.order != b.order:
            raise UsageError(f"jet order mismatch: {a.order} vs {b.order}")
        return _BINARY[kind](a, b)
    raise UsageError(f"unknown jet operation {kind!r}")


def extract_derivative(j: Jet, k: int):
    return value_of(j.derivative(k))
