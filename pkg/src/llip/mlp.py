"""Two-layer fully connected filter network and its single-precision inference.

The network is ``FC(d -> d) -> ReLU -> FC(d -> 1)`` with d = 5 (scheme 1,
inputs R1..R4, P) or d = 7 (scheme 2, inputs R1..R4, P, x, y). Inference is
plain float32 multiply-add in a fixed order: for each output unit the bias
is loaded first and the products ``w[j, i] * v[i]`` are added for
i = 0..d-1. The scalar path and the vectorised block path evaluate the
same sequence of float32 operations, so they agree bit for bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError, NumericError
from .interpf import DEFAULT_BIT_DEPTH, BlockContext, max_sample


class Scheme(enum.IntEnum):
    SCHEME1 = 1
    SCHEME2 = 2

    @property
    def input_dim(self) -> int:
        return 5 if self is Scheme.SCHEME1 else 7

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, Scheme):
            return value
        text = str(value).lower().removeprefix("scheme")
        try:
            return cls(int(text))
        except ValueError:
            raise InputError(f"unknown scheme {value!r}") from None


class Component(enum.IntEnum):
    Y = 0
    U = 1
    V = 2
    SHARED = 255

    @classmethod
    def parse(cls, value) -> "Component":
        if isinstance(value, Component):
            return value
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise InputError(f"unknown component {value!r}") from None


class ResolutionGroup(enum.IntEnum):
    HIGH_RES = 0
    LOW_RES = 1
    SHARED = 255

    @classmethod
    def parse(cls, value) -> "ResolutionGroup":
        if isinstance(value, ResolutionGroup):
            return value
        key = str(value).lower().replace("_", "").replace("-", "")
        names = {"highres": cls.HIGH_RES, "high": cls.HIGH_RES, "lowres": cls.LOW_RES,
                 "low": cls.LOW_RES, "shared": cls.SHARED}
        if key not in names:
            raise InputError(f"unknown resolution group {value!r}")
        return names[key]


@dataclass(frozen=True)
class Normalization:
    """Divisors applied to sample values and to block coordinates."""

    pixel_scale: float = float(max_sample(DEFAULT_BIT_DEPTH))
    coord_scale: float = 64.0

    def __post_init__(self):
        # stored as float32 since that is what the model file carries
        ps, cs = np.float32(self.pixel_scale), np.float32(self.coord_scale)
        if not (np.isfinite(ps) and np.isfinite(cs) and ps > 0 and cs > 0):
            raise InputError("normalization scales must be finite and > 0")
        object.__setattr__(self, "pixel_scale", float(ps))
        object.__setattr__(self, "coord_scale", float(cs))

    @classmethod
    def for_bit_depth(cls, bit_depth: int, coord_scale: float = 64.0) -> "Normalization":
        return cls(float(max_sample(bit_depth)), coord_scale)


@dataclass(frozen=True)
class DenseLayer:
    weights: np.ndarray  # (out_dim, in_dim)
    biases: np.ndarray  # (out_dim,)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float32)
        b = np.array(self.biases, dtype=np.float32).reshape(-1)
        if w.ndim != 2 or w.shape[0] != b.size:
            raise InputError(f"weights {w.shape} do not match {b.size} biases")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise NumericError("layer parameters must be finite")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def parameter_count(self) -> int:
        return self.weights.size + self.biases.size


@dataclass(frozen=True)
class MlpModel:
    scheme: Scheme
    layer1: DenseLayer
    layer2: DenseLayer
    normalization: Normalization = field(default_factory=Normalization)
    component: Component = Component.SHARED
    group: ResolutionGroup = ResolutionGroup.SHARED
    bit_depth: int = DEFAULT_BIT_DEPTH

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        object.__setattr__(self, "component", Component.parse(self.component))
        object.__setattr__(self, "group", ResolutionGroup.parse(self.group))
        max_sample(self.bit_depth)
        d = self.scheme.input_dim
        if (self.layer1.in_dim, self.layer1.out_dim) != (d, d):
            raise InputError(
                f"layer1 is {self.layer1.in_dim}->{self.layer1.out_dim}, "
                f"scheme {int(self.scheme)} needs {d}->{d}"
            )
        if (self.layer2.in_dim, self.layer2.out_dim) != (d, 1):
            raise InputError(
                f"layer2 is {self.layer2.in_dim}->{self.layer2.out_dim}, "
                f"scheme {int(self.scheme)} needs {d}->1"
            )

    @classmethod
    def from_arrays(cls, scheme, w1, b1, w2, b2, **kwargs) -> "MlpModel":
        return cls(Scheme.parse(scheme), DenseLayer(w1, b1), DenseLayer(np.reshape(w2, (1, -1)), b2),
                   **kwargs)

    @classmethod
    def zeros(cls, scheme, **kwargs) -> "MlpModel":
        d = Scheme.parse(scheme).input_dim
        return cls.from_arrays(scheme, np.zeros((d, d)), np.zeros(d), np.zeros((1, d)),
                               np.zeros(1), **kwargs)

    @property
    def input_dim(self) -> int:
        return self.scheme.input_dim

    @property
    def parameter_count(self) -> int:
        return self.layer1.parameter_count + self.layer2.parameter_count

    def parameters(self) -> np.ndarray:
        """Flat float32 view in file order: w1 (row-major), b1, w2, b2."""
        return np.concatenate([
            self.layer1.weights.ravel(), self.layer1.biases,
            self.layer2.weights.ravel(), self.layer2.biases,
        ])

    def with_metadata(self, **changes) -> "MlpModel":
        return replace(self, **changes)


class MacCounter:
    """Tally of multiply-accumulates performed by an instrumented forward pass."""

    def __init__(self):
        self.macs = 0

    def add(self, n: int) -> None:
        self.macs += int(n)


def mac_count(model: MlpModel | int) -> int:
    """MACs per pixel: d*d for the hidden layer plus d for the output unit.

    Accepts a model or a bare input dimension.
    """
    d = model if isinstance(model, int) else model.input_dim
    return d * d + d


def build_input(scheme, r1, r2, r3, r4, p, x, y, norm: Normalization) -> np.ndarray:
    """Assemble one network input vector (float32) for a pixel."""
    scheme = Scheme.parse(scheme)
    ps = np.float32(norm.pixel_scale)
    values = np.array([r1, r2, r3, r4, p], dtype=np.float32) / ps
    if scheme is Scheme.SCHEME1:
        return values
    cs = np.float32(norm.coord_scale)
    return np.concatenate([values, np.array([x, y], dtype=np.float32) / cs])


def _input_columns(scheme: Scheme, r1, r2, r3, r4, p, x, y, norm: Normalization, shape):
    """Feature-major (input_dim, n) float32 inputs.

    Each argument is divided by its scale at its own (possibly small) shape
    and only then broadcast to ``shape``; the float32 quotients are the same
    either way.
    """
    n = int(np.prod(shape))
    cols = np.empty((scheme.input_dim, n), dtype=np.float32)
    ps = np.float32(norm.pixel_scale)
    feats = [(r1, ps), (r2, ps), (r3, ps), (r4, ps), (p, ps)]
    if scheme is Scheme.SCHEME2:
        cs = np.float32(norm.coord_scale)
        feats += [(x, cs), (y, cs)]
    for i, (values, scale) in enumerate(feats):
        q = np.asarray(values, dtype=np.float32) / scale
        cols[i].reshape(shape)[...] = q
    return cols


def build_inputs(scheme, r1, r2, r3, r4, p, x, y, norm: Normalization) -> np.ndarray:
    """Column-wise version of :func:`build_input`; returns (n, input_dim) float32."""
    scheme = Scheme.parse(scheme)
    shape = np.broadcast_shapes(*(np.shape(a) for a in (r1, r2, r3, r4, p, x, y)))
    return _input_columns(scheme, r1, r2, r3, r4, p, x, y, norm, shape).T


def _dense_columns(layer: DenseLayer, cols: np.ndarray) -> np.ndarray:
    """Affine map on feature-major data: (in_dim, n) -> (out_dim, n).

    Same float32 operation sequence per element as :func:`dense_forward`.
    """
    n = cols.shape[1]
    w, b = layer.weights, layer.biases
    out = np.empty((layer.out_dim, n), dtype=np.float32)
    tmp = np.empty(n, dtype=np.float32)
    for j in range(layer.out_dim):
        acc = out[j]
        acc.fill(b[j])
        for i in range(layer.in_dim):
            np.multiply(cols[i], w[j, i], out=tmp)
            acc += tmp
    return out


def dense_forward(layer: DenseLayer, inputs: np.ndarray, counter: MacCounter | None = None):
    """Affine map of a vector (in_dim,) or batch (n, in_dim), float32.

    Each output starts from its bias and accumulates ``w[j, i] * v[i]`` in
    increasing i.
    """
    v = np.asarray(inputs, dtype=np.float32)
    if v.ndim not in (1, 2) or v.shape[-1] != layer.in_dim:
        raise InputError(f"input of shape {v.shape} does not fit a {layer.in_dim}-input layer")
    if counter is not None:
        rows = 1 if v.ndim == 1 else v.shape[0]
        counter.add(rows * layer.in_dim * layer.out_dim)
    if v.ndim == 2:
        return _dense_columns(layer, np.ascontiguousarray(v.T)).T
    w = layer.weights
    out = layer.biases.copy()
    for i in range(layer.in_dim):
        out += w[:, i] * v[i]
    return out


def relu(v: np.ndarray) -> np.ndarray:
    return np.maximum(v, np.zeros((), dtype=np.asarray(v).dtype))


def _forward_columns(model: MlpModel, cols: np.ndarray, counter: MacCounter | None = None):
    hidden = _dense_columns(model.layer1, cols)
    np.maximum(hidden, np.float32(0), out=hidden)
    out = _dense_columns(model.layer2, hidden)[0]
    if counter is not None:
        counter.add(cols.shape[1] * mac_count(model))
    return out


def forward_batch(model: MlpModel, inputs: np.ndarray, counter: MacCounter | None = None):
    """Network output for each row of an (n, input_dim) batch; shape (n,)."""
    v = np.asarray(inputs, dtype=np.float32)
    if v.ndim != 2 or v.shape[1] != model.input_dim:
        raise InputError(
            f"scheme {int(model.scheme)} expects rows of {model.input_dim} values, got {v.shape}"
        )
    return _forward_columns(model, np.ascontiguousarray(v.T), counter)


def mlp_forward(model: MlpModel, inputs, counter: MacCounter | None = None) -> np.float32:
    v = np.asarray(inputs, dtype=np.float32)
    if v.shape != (model.input_dim,):
        raise InputError(
            f"scheme {int(model.scheme)} expects {model.input_dim} inputs, got shape {v.shape}"
        )
    hidden = relu(dense_forward(model.layer1, v, counter))
    return dense_forward(model.layer2, hidden, counter)[0]


def denormalize_output(raw, norm: Normalization, bit_depth: int = DEFAULT_BIT_DEPTH):
    """Scale network output(s) back to samples: round half to even, then clamp.

    Accepts a scalar (returns int) or an array (returns int32 array).
    """
    arr = np.asarray(raw, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise NumericError("network output is not finite")
    out = np.clip(np.rint(arr * norm.pixel_scale), 0, max_sample(bit_depth)).astype(np.int32)
    return int(out) if out.ndim == 0 else out


def learned_filter_arrays(model: MlpModel, prediction, top, left, bit_depth=None,
                          counter: MacCounter | None = None):
    """Learned filter over a stack of same-geometry blocks, (..., h, w) in and out."""
    prediction = np.asarray(prediction)
    top = np.asarray(top)
    left = np.asarray(left)
    h, w = prediction.shape[-2:]
    shape = prediction.shape
    ys = np.arange(h)[:, None]
    xs = np.arange(w)[None, :]
    cols = _input_columns(
        model.scheme,
        top[..., None, :w],
        top[..., w, None, None],
        left[..., :h, None],
        left[..., h, None, None],
        prediction,
        xs,
        ys,
        model.normalization,
        shape,
    )
    raw = _forward_columns(model, cols, counter)
    bd = model.bit_depth if bit_depth is None else bit_depth
    return denormalize_output(raw, model.normalization, bd).reshape(shape)


def learned_filter_block(model: MlpModel, ctx: BlockContext, counter: MacCounter | None = None):
    """Drop-in replacement for the integer filter's output computation."""
    return learned_filter_arrays(model, ctx.prediction, ctx.top, ctx.left, ctx.bit_depth, counter)
