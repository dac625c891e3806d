"""Regression training of the filter network: MSE loss, backprop, Adam.

Training runs in float64; the returned :class:`~llip.mlp.MlpModel` holds the
parameters rounded to float32, which is what gets exported.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InputError, NumericError
from .mlp import Component, MlpModel, Normalization, ResolutionGroup, Scheme


@dataclass
class Params:
    """Float64 network parameters (or gradients of the same shape)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray  # (d,)
    b2: np.ndarray  # (1,)

    @classmethod
    def of(cls, model) -> "Params":
        if isinstance(model, Params):
            return model
        return cls(
            model.layer1.weights.astype(np.float64),
            model.layer1.biases.astype(np.float64),
            model.layer2.weights.astype(np.float64).reshape(-1),
            model.layer2.biases.astype(np.float64),
        )

    @classmethod
    def zeros_like(cls, other: "Params") -> "Params":
        return cls(*(np.zeros_like(a) for a in other.arrays()))

    @classmethod
    def from_flat(cls, flat: np.ndarray, d: int) -> "Params":
        flat = np.asarray(flat, dtype=np.float64)
        i = d * d
        return cls(flat[:i].reshape(d, d).copy(), flat[i:i + d].copy(),
                   flat[i + d:i + 2 * d].copy(), flat[i + 2 * d:].copy())

    @property
    def input_dim(self) -> int:
        return self.b1.size

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2)

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def to_model(self, scheme, **kwargs) -> MlpModel:
        return MlpModel.from_arrays(scheme, self.w1, self.b1, self.w2, self.b2, **kwargs)


@dataclass(frozen=True)
class TrainingSet:
    """Network inputs (n, d) and normalised targets (n,)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        g = np.asarray(self.targets, dtype=np.float64).reshape(-1)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[0] != g.size:
            raise InputError(f"{x.shape} inputs do not pair with {g.size} targets")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", g)

    def __len__(self) -> int:
        return self.targets.size

    def subset(self, index) -> "TrainingSet":
        return TrainingSet(self.inputs[index], self.targets[index])


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 1000
    epochs: int = 3
    lr_initial: float = 1e-4
    lr_final: float = 3e-5
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise InputError("batch_size and epochs must be >= 1")
        if self.lr_initial <= 0 or self.lr_final <= 0:
            raise InputError("learning rates must be > 0")

    def learning_rates(self) -> list[float]:
        """Per-epoch rate: the initial rate, dropping to the final rate in the last epoch."""
        return [self.lr_initial] * (self.epochs - 1) + [self.lr_final]


@dataclass
class AdamState:
    m: Params
    v: Params
    t: int = 0

    @classmethod
    def zeros(cls, params: Params) -> "AdamState":
        return cls(Params.zeros_like(params), Params.zeros_like(params), 0)


def forward(params: Params, inputs: np.ndarray):
    """Double-precision forward pass; returns (pre-activation, hidden, output)."""
    x = np.asarray(inputs, dtype=np.float64)
    pre = x @ params.w1.T + params.b1
    hidden = np.maximum(pre, 0.0)
    return pre, hidden, hidden @ params.w2 + params.b2[0]


def _check_dim(params: Params, inputs: np.ndarray) -> None:
    if inputs.shape[-1] != params.input_dim:
        raise InputError(
            f"inputs have {inputs.shape[-1]} features, model expects {params.input_dim}"
        )


def mse_loss(model, batch: TrainingSet) -> float:
    params = Params.of(model)
    if len(batch) == 0:
        raise InputError("empty batch")
    _check_dim(params, batch.inputs)
    residual = forward(params, batch.inputs)[2] - batch.targets
    return float(np.mean(residual * residual))


def batch_gradients(params: Params, batch: TrainingSet) -> tuple[Params, float]:
    """Gradient of the batch-mean squared error, together with the loss itself."""
    x = batch.inputs
    # overflow surfaces as non-finite values, which adam_step rejects
    with np.errstate(over="ignore", invalid="ignore"):
        pre, hidden, out = forward(params, x)
        residual = out - batch.targets
        n = len(batch)
        d_out = (2.0 / n) * residual
        g_w2 = hidden.T @ d_out
        g_b2 = np.array([d_out.sum()])
        # relu'(0) taken as 0
        d_pre = np.outer(d_out, params.w2) * (pre > 0)
        g_w1 = d_pre.T @ x
        g_b1 = d_pre.sum(axis=0)
        loss = float(np.mean(residual * residual))
    return Params(g_w1, g_b1, g_w2, g_b2), loss


def backward(model, sample: TrainingSet) -> Params:
    """Analytic gradient of the squared residual of a single sample."""
    params = Params.of(model)
    if len(sample) != 1:
        raise InputError("backward takes exactly one sample")
    _check_dim(params, sample.inputs)
    return batch_gradients(params, sample)[0]


def finite_diff_gradients(model, sample: TrainingSet, step: float = 1e-5) -> Params:
    """Central-difference estimate of the same gradient as :func:`backward`."""
    if step <= 0:
        raise InputError("step must be > 0")
    params = Params.of(model)
    d = params.input_dim
    theta = params.flat()
    grad = np.empty_like(theta)
    for k in range(theta.size):
        hi = theta.copy()
        lo = theta.copy()
        hi[k] += step
        lo[k] -= step
        j_hi = mse_loss(Params.from_flat(hi, d), sample)
        j_lo = mse_loss(Params.from_flat(lo, d), sample)
        grad[k] = (j_hi - j_lo) / (2 * step)
    return Params.from_flat(grad, d)


def adam_step(
    state: AdamState, params: Params, grads: Params, lr: float, config: TrainConfig
) -> tuple[Params, AdamState]:
    """One bias-corrected Adam update. Inputs are not modified."""
    for g in grads.arrays():
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient at step {state.t + 1}")
    b1, b2 = config.beta1, config.beta2
    t = state.t + 1
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * (g * g)
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_p.append(p - lr * m_hat / (np.sqrt(v_hat) + config.eps))
        new_m.append(m)
        new_v.append(v)
    return Params(*new_p), AdamState(Params(*new_m), Params(*new_v), t)


def init_parameters(
    scheme,
    seed: int = 0,
    normalization: Normalization | None = None,
    **metadata,
) -> MlpModel:
    """Weights uniform in +-1/sqrt(d), biases zero."""
    scheme = Scheme.parse(scheme)
    d = scheme.input_dim
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(d)
    w1 = rng.uniform(-bound, bound, size=(d, d))
    w2 = rng.uniform(-bound, bound, size=(1, d))
    return MlpModel.from_arrays(
        scheme, w1, np.zeros(d), w2, np.zeros(1),
        normalization=normalization or Normalization(), **metadata,
    )


@dataclass
class BatchLog:
    epoch: int
    batch: int
    lr: float
    loss: float


def train(
    dataset: TrainingSet,
    config: TrainConfig = TrainConfig(),
    init_seed: int | None = None,
    *,
    scheme=None,
    normalization: Normalization | None = None,
    component=Component.SHARED,
    group=ResolutionGroup.SHARED,
    bit_depth: int = 10,
    init: MlpModel | None = None,
    callback: Callable[[BatchLog], None] | None = None,
) -> MlpModel:
    """Fit the network to ``dataset`` with minibatch Adam.

    Batches are drawn from a fresh seeded permutation every epoch. The
    reported loss of a batch is measured before that batch's update.
    """
    if len(dataset) == 0:
        raise InputError("empty dataset")
    d = dataset.inputs.shape[1]
    if scheme is None:
        scheme = {5: Scheme.SCHEME1, 7: Scheme.SCHEME2}.get(d)
        if scheme is None:
            raise InputError(f"no scheme takes {d} inputs")
    scheme = Scheme.parse(scheme)
    if scheme.input_dim != d:
        raise InputError(f"scheme {int(scheme)} expects {scheme.input_dim} inputs, dataset has {d}")
    seed = config.seed if init_seed is None else init_seed
    if init is None:
        init = init_parameters(scheme, seed)
    params = Params.of(init)
    state = AdamState.zeros(params)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    n = len(dataset)
    for epoch, lr in enumerate(config.learning_rates(), start=1):
        order = rng.permutation(n)
        for b, start in enumerate(range(0, n, config.batch_size)):
            batch = dataset.subset(order[start:start + config.batch_size])
            grads, loss = batch_gradients(params, batch)
            if not np.isfinite(loss):
                raise NumericError(f"loss diverged in epoch {epoch}, batch {b}")
            params, state = adam_step(state, params, grads, lr, config)
            if callback is not None:
                callback(BatchLog(epoch, b, lr, loss))
    return params.to_model(
        scheme,
        normalization=normalization or init.normalization,
        component=component,
        group=group,
        bit_depth=bit_depth,
    )
