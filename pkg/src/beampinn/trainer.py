"""Composite loss, ADAM, and the forward / inverse / delta-fit training loops."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import Var, value_and_grad, value_of
from .beam import (
    DEFAULT_SIGMA,
    BeamConfig,
    DeltaModel,
    gaussian_delta,
    load_forcing,
    relative_error_percent,
)
from .errors import ConfigurationError, TrainingError, UndefinedMetricError, UsageError
from .network import Architecture, MlpParams, forward, init_params, output_jet
from .sampling import SampleSet, sample_training_points

log = logging.getLogger(__name__)

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]

SENSOR_LINES = (math.pi / 8, math.pi / 4, math.pi / 2)


@dataclass(frozen=True)
class TrainConfig:
    hidden_layers: int = 1
    neurons: int = 20
    epochs: int = 5000
    learning_rate: float = 1e-3
    # step size for the load estimate; None means learning_rate
    load_learning_rate: float | None = None
    lambda1: float = 10.0  # PDE
    lambda2: float = 1.0  # initial conditions
    lambda3: float = 10.0  # boundary conditions
    mode: str = "forward"
    delta: DeltaModel = DeltaModel()
    seed: int = 0
    n_int: int = 1200
    n_b: int = 200
    n_in: int = 200
    n_data: int = 5000
    sensor_locations: tuple = SENSOR_LINES
    p_init: float = 0.1
    # include u_xx at the ends and u_t at t = 0, not only u
    augmented_conditions: bool = True
    eval_nx: int = 101
    eval_nt: int = 51
    trace_every: int = 1

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be > 0")
        if self.load_learning_rate is not None and not self.load_learning_rate > 0:
            raise ConfigurationError("load_learning_rate must be > 0")
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise ConfigurationError("loss weights must be >= 0")
        if self.mode not in ("forward", "inverse", "delta-fit"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.trace_every < 1:
            raise ConfigurationError("trace_every must be >= 1")
        # validates hidden_layers / neurons
        self.arch

    @property
    def arch(self) -> Architecture:
        return Architecture(self.hidden_layers, self.neurons, 1 if self.mode == "delta-fit" else 2)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["delta"] = dataclasses.asdict(self.delta)
        out["sensor_locations"] = list(self.sensor_locations)
        return out


def forward_preset(**overrides) -> TrainConfig:
    """Gaussian-forced forward run: 1x20, 5000 epochs, PDE/BC weight 10, IC weight 1."""
    return TrainConfig(**overrides)


def dirac_preset(**overrides) -> TrainConfig:
    """Indicator-delta run with the weights used for the failed point-load attempt."""
    base = dict(lambda1=1.0, lambda2=10.0, lambda3=10.0, delta=DeltaModel(kind="discrete"))
    return TrainConfig(**{**base, **overrides})


def inverse_preset(**overrides) -> TrainConfig:
    """4x20, unit weights, 2500 epochs, 5000 sensor points on three lines."""
    base = dict(
        hidden_layers=4,
        neurons=20,
        epochs=2500,
        lambda1=1.0,
        lambda2=1.0,
        lambda3=1.0,
        mode="inverse",
        load_learning_rate=1e-2,
    )
    return TrainConfig(**{**base, **overrides})


def delta_fit_preset(**overrides) -> TrainConfig:
    """4x50 regression of a narrow Gaussian."""
    base = dict(hidden_layers=4, neurons=50, epochs=20000, mode="delta-fit")
    return TrainConfig(**{**base, **overrides})


@dataclass
class LossBreakdown:
    l_pde: float
    l_ic: float
    l_bc: float
    l_data: float
    total: float
    means: dict = field(default_factory=dict)


def _loss_terms(params: MlpParams, samples: SampleSet, beam: BeamConfig, cfg: TrainConfig, load=None) -> dict:
    """Unnormalized squared-error sums; entries may be tape variables."""
    terms = {}
    if len(samples.interior):
        x, t = samples.interior[:, 0], samples.interior[:, 1]
        jx = output_jet(params, x, t, "x", 4)
        jt = output_jet(params, x, t, "t", 2)
        p = beam.p if load is None else load
        residual = beam.m * jt.derivative(2) + beam.E_times_I * jx.derivative(4) - p * load_forcing(x, t, beam, cfg.delta)
        terms["l_pde"] = _sumsq(residual)
    if len(samples.boundary):
        x, t = samples.boundary[:, 0], samples.boundary[:, 1]
        if cfg.augmented_conditions:
            jb = output_jet(params, x, t, "x", 2)
            terms["l_bc"] = _sumsq(jb.coeffs[0]) + _sumsq(jb.derivative(2))
        else:
            terms["l_bc"] = _sumsq(forward(params, x, t))
    if len(samples.initial):
        x, t = samples.initial[:, 0], samples.initial[:, 1]
        if cfg.augmented_conditions:
            ji = output_jet(params, x, t, "t", 1)
            terms["l_ic"] = _sumsq(ji.coeffs[0]) + _sumsq(ji.derivative(1))
        else:
            terms["l_ic"] = _sumsq(forward(params, x, t))
    if len(samples.data):
        x, t, target = samples.data.T
        terms["l_data"] = _sumsq(forward(params, x, t) - target)
    return terms


def _sumsq(r):
    if isinstance(r, Var):
        return r.square().sum()
    r = np.asarray(r, dtype=float)
    return float(np.sum(r * r))


def _total(terms: dict, cfg: TrainConfig):
    total = 0.0
    for name, weight in (("l_pde", cfg.lambda1), ("l_ic", cfg.lambda2), ("l_bc", cfg.lambda3), ("l_data", 1.0)):
        if name in terms and weight:
            total = total + weight * terms[name]
    return total


def _breakdown(terms: dict, total, samples: SampleSet) -> LossBreakdown:
    vals = {k: float(value_of(terms.get(k, 0.0))) for k in ("l_pde", "l_ic", "l_bc", "l_data")}
    counts = {"l_pde": len(samples.interior), "l_ic": len(samples.initial), "l_bc": len(samples.boundary), "l_data": len(samples.data)}
    means = {k: (vals[k] / counts[k] if counts[k] else 0.0) for k in vals}
    return LossBreakdown(total=float(value_of(total)), means=means, **vals)


def assemble_loss(params: MlpParams, samples: SampleSet, beam: BeamConfig, cfg: TrainConfig) -> LossBreakdown:
    """Weighted composite loss; the data term is unweighted."""
    frozen = params.copy_frozen()
    terms = _loss_terms(frozen, samples, beam, cfg, load=frozen.trainable_load if cfg.mode == "inverse" else None)
    out = _breakdown(terms, _total(terms, cfg), samples)
    if not all(math.isfinite(v) for v in (out.l_pde, out.l_ic, out.l_bc, out.l_data, out.total)):
        raise TrainingError("non-finite loss term")
    return out


class Adam:
    """ADAM with bias-corrected moments; ``lr`` may be a scalar or per-parameter array."""

    def __init__(self, n: int, lr=1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        if params.shape != grads.shape or params.shape != self.m.shape:
            raise UsageError("parameter and gradient shapes differ")
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grads * grads
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(state: Adam, params: np.ndarray, grads: np.ndarray, lr=None, epoch: int | None = None):
    """Functional wrapper: returns (new_params, state). ``epoch`` is informational."""
    if lr is not None:
        state.lr = lr
    return state.step(np.asarray(params, dtype=float), np.asarray(grads, dtype=float)), state


@dataclass
class RunReport:
    mode: str
    losses: LossBreakdown
    relative_error_percent: float | None
    relative_error_percent_grid: float | None
    per_time_slice_error: list
    predicted_p: float | None
    loss_trace: list
    seed: int
    config: dict
    wall_time: float
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "final_loss": self.losses.total,
            "l_pde": self.losses.l_pde,
            "l_ic": self.losses.l_ic,
            "l_bc": self.losses.l_bc,
            "l_data": self.losses.l_data,
            "mean_losses": self.losses.means,
            "relative_error_percent": self.relative_error_percent,
            "relative_error_percent_grid": self.relative_error_percent_grid,
            "per_time_slice_error": self.per_time_slice_error,
            "predicted_p": self.predicted_p,
            "loss_trace": self.loss_trace,
            "seed": self.seed,
            "config": self.config,
            "wall_time": self.wall_time,
            "provenance": self.provenance,
        }

    def numeric_fields(self) -> dict:
        """Everything but wall time, for reproducibility comparisons."""
        d = self.to_dict()
        d.pop("wall_time")
        return d


def evaluation_grid(beam: BeamConfig, nx: int = 101, nt: int = 51):
    """Rectangular grid flattened t-major: for each t, every x."""
    xs = np.linspace(0.0, beam.L, nx)
    ts = np.linspace(0.0, beam.t_end, nt)
    tt, xx = np.meshgrid(ts, xs, indexing="ij")
    return xx.ravel(), tt.ravel(), xs, ts


def _errors_vs_oracle(params: MlpParams, beam: BeamConfig, cfg: TrainConfig, oracle: Field | None):
    if oracle is None:
        return None, None, []
    x, t, xs, ts = evaluation_grid(beam, cfg.eval_nx, cfg.eval_nt)
    pred = np.asarray(forward(params, x, t)).reshape(len(ts), len(xs))
    truth = np.asarray(oracle(x, t), dtype=float).reshape(len(ts), len(xs))
    slices = []
    for i in range(len(ts)):
        try:
            slices.append(relative_error_percent(pred[i], truth[i]))
        except UndefinedMetricError:
            slices.append(None)
    try:
        grid_r = relative_error_percent(pred, truth)
    except UndefinedMetricError:
        grid_r = None
    return slices[-1], grid_r, slices


def _run_adam(loss_fn, theta, cfg: TrainConfig, lr, progress=None):
    """Full-batch ADAM; returns final parameters and the per-epoch loss trace."""
    opt = Adam(theta.size, lr)
    trace = []
    for epoch in range(cfg.epochs):
        try:
            # overflow is reported as divergence below, not as a numpy warning
            with np.errstate(over="ignore", invalid="ignore"):
                value, grad = value_and_grad(loss_fn, theta)
        except TrainingError as exc:
            raise TrainingError(str(exc), epoch) from None
        if epoch % cfg.trace_every == 0:
            trace.append(value)
        if progress is not None:
            progress(epoch, value)
        theta = opt.step(theta, grad)
    return theta, trace


def train(
    beam: BeamConfig,
    cfg: TrainConfig,
    oracle: Field | None = None,
    samples: SampleSet | None = None,
    data: np.ndarray | None = None,
    params: MlpParams | None = None,
    progress=None,
) -> tuple[RunReport, MlpParams]:
    """Train a PINN; inverse mode learns the load magnitude alongside the network.

    ``data`` rows are (x, t, u) sensor readings (required in inverse mode,
    optional in forward mode). Errors are measured against ``oracle`` on the
    evaluation grid.
    """
    if cfg.mode not in ("forward", "inverse"):
        raise ConfigurationError(f"train() handles forward/inverse, not {cfg.mode!r}")
    inverse = cfg.mode == "inverse"
    if samples is None:
        samples = sample_training_points(beam, cfg.n_int, cfg.n_b, cfg.n_in, cfg.seed)
    if data is not None:
        samples = samples.with_data(data)
    if inverse and len(samples.data) == 0:
        raise ConfigurationError("inverse mode needs sensor data")
    if params is None:
        params = init_params(cfg.arch, cfg.seed, with_load=inverse, p_init=cfg.p_init)
    if inverse and params.trainable_load is None:
        params = MlpParams(params.weights, params.biases, cfg.p_init, params.arch)
    sizes = params.layer_sizes

    def loss_fn(theta):
        p = MlpParams.unflatten(sizes, theta, with_load=inverse)
        terms = _loss_terms(p, samples, beam, cfg, load=p.trainable_load if inverse else None)
        return _total(terms, cfg)

    theta = params.flatten()
    lr = np.full(theta.size, cfg.learning_rate)
    if inverse and cfg.load_learning_rate is not None:
        lr[-1] = cfg.load_learning_rate

    start = time.perf_counter()
    theta, trace = _run_adam(loss_fn, theta, cfg, lr, progress)
    wall = time.perf_counter() - start

    final = MlpParams.unflatten(sizes, theta, with_load=inverse).copy_frozen()
    final.arch = params.arch
    losses = assemble_loss(final, samples, beam, cfg)
    r_final, r_grid, slices = _errors_vs_oracle(final, beam, cfg, oracle)
    report = RunReport(
        mode=cfg.mode,
        losses=losses,
        relative_error_percent=r_final,
        relative_error_percent_grid=r_grid,
        per_time_slice_error=slices,
        predicted_p=final.trainable_load if inverse else None,
        loss_trace=trace,
        seed=cfg.seed,
        config={"beam": dataclasses.asdict(beam), "train": cfg.to_dict(), "counts": samples.counts()},
        wall_time=wall,
    )
    return report, final


DELTA_FIT_GRID = 2000


def fit_delta_dnn(sigma: float, cfg: TrainConfig, params: MlpParams | None = None, progress=None) -> tuple[RunReport, MlpParams]:
    """Supervised regression of the Gaussian ``g(x; 0, sigma)`` on [-0.5, 0.5].

    Trained on a uniform 2000-point grid, scored on the midpoints between
    training points.
    """
    if not sigma > 0:
        raise UsageError("sigma must be positive")
    if cfg.mode != "delta-fit":
        cfg = dataclasses.replace(cfg, mode="delta-fit")
    x_train = np.linspace(-0.5, 0.5, DELTA_FIT_GRID)
    y_train = gaussian_delta(x_train, 0.0, sigma)
    x_test = 0.5 * (x_train[1:] + x_train[:-1])
    y_test = gaussian_delta(x_test, 0.0, sigma)
    if params is None:
        params = init_params(cfg.arch, cfg.seed)
    sizes = params.layer_sizes

    def loss_fn(theta):
        p = MlpParams.unflatten(sizes, theta)
        return _sumsq(forward(p, x_train) - y_train)

    start = time.perf_counter()
    theta, trace = _run_adam(loss_fn, params.flatten(), cfg, cfg.learning_rate, progress)
    wall = time.perf_counter() - start
    final = MlpParams.unflatten(sizes, theta).copy_frozen()
    final.arch = params.arch
    pred = np.asarray(forward(final, x_test))
    fit = np.asarray(forward(final, x_train))
    fit_loss = _sumsq(fit - y_train)
    r = relative_error_percent(pred, y_test)
    report = RunReport(
        mode="delta-fit",
        losses=LossBreakdown(0.0, 0.0, 0.0, fit_loss, fit_loss, {"l_data": fit_loss / DELTA_FIT_GRID}),
        relative_error_percent=r,
        relative_error_percent_grid=r,
        per_time_slice_error=[],
        predicted_p=None,
        loss_trace=trace,
        seed=cfg.seed,
        config={
            "sigma": sigma,
            "train": cfg.to_dict(),
            "grid": DELTA_FIT_GRID,
            # diagnostic only: error on the points the network was fitted to
            "train_grid_r": relative_error_percent(fit, y_train),
        },
        wall_time=wall,
    )
    return report, final


__all__ = [
    "Adam",
    "LossBreakdown",
    "DEFAULT_SIGMA",
    "RunReport",
    "TrainConfig",
    "adam_step",
    "assemble_loss",
    "delta_fit_preset",
    "dirac_preset",
    "evaluation_grid",
    "fit_delta_dnn",
    "forward_preset",
    "inverse_preset",
    "train",
]
