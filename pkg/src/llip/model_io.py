"""Binary model files and per-component / per-resolution model sets.

File layout, all little endian::

    offset  size  field
    0       4     magic b"LLIP"
    4       2     version (u16, currently 1)
    6       1     scheme (u8: 1 or 2)
    7       1     component (u8: 0=Y 1=U 2=V 255=shared)
    8       1     resolution group (u8: 0=high 1=low 255=shared)
    9       1     bit depth (u8)
    10      4     pixel scale (f32)
    14      4     coordinate scale (f32)
    18      8     layer dims: l1 in, l1 out, l2 in, l2 out (u16 each)
    26      ...   f32 parameters: w1 row-major, b1, w2, b2

A scheme 1 payload is 36 floats, scheme 2 is 64.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionsError,
    LengthError,
    MagicError,
    TruncationError,
    VersionError,
)
from .interpf import BIT_DEPTHS
from .mlp import Component, DenseLayer, MlpModel, Normalization, ResolutionGroup, Scheme

MAGIC = b"LLIP"
VERSION = 1
HEADER = struct.Struct("<4sHBBBBff4H")
PARAM_DTYPE = np.dtype("<f4")
HIGH_RES_MIN_HEIGHT = 1080


def model_to_bytes(model: MlpModel) -> bytes:
    header = HEADER.pack(
        MAGIC,
        VERSION,
        int(model.scheme),
        int(model.component),
        int(model.group),
        model.bit_depth,
        model.normalization.pixel_scale,
        model.normalization.coord_scale,
        model.layer1.in_dim,
        model.layer1.out_dim,
        model.layer2.in_dim,
        model.layer2.out_dim,
    )
    return header + model.parameters().astype(PARAM_DTYPE).tobytes()


def export_model(model: MlpModel, destination) -> bytes:
    """Write ``model`` to a path or binary stream; returns the bytes written."""
    data = model_to_bytes(model)
    if isinstance(destination, (str, os.PathLike)):
        Path(destination).write_bytes(data)
    elif destination is not None:
        destination.write(data)
    return data


def model_from_bytes(data: bytes) -> MlpModel:
    if data[:4] != MAGIC:
        raise MagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", field="magic")
    if len(data) < HEADER.size:
        raise TruncationError(
            f"header needs {HEADER.size} bytes, file has {len(data)}", field="header"
        )
    (_, version, scheme, comp, group, bit_depth, pscale, cscale,
     in1, out1, in2, out2) = HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionError(f"unsupported version {version}, expected {VERSION}", field="version")
    try:
        scheme = Scheme(scheme)
    except ValueError:
        raise DimensionsError(f"unknown scheme tag {scheme}", field="scheme") from None
    d = scheme.input_dim
    if (in1, out1, in2, out2) != (d, d, d, 1):
        raise DimensionsError(
            f"layer dims {in1}x{out1}, {in2}x{out2} do not match scheme {int(scheme)}",
            field="dims",
        )
    try:
        component = Component(comp)
        group = ResolutionGroup(group)
    except ValueError as exc:
        raise DimensionsError(f"bad metadata tag: {exc}", field="metadata") from None
    if bit_depth not in BIT_DEPTHS:
        raise DimensionsError(f"unsupported bit depth {bit_depth}", field="bit_depth")
    if not (np.isfinite(pscale) and np.isfinite(cscale) and pscale > 0 and cscale > 0):
        raise DimensionsError("normalization scales must be finite and > 0", field="normalization")
    n_params = d * d + d + d + 1
    payload = len(data) - HEADER.size
    expected = n_params * PARAM_DTYPE.itemsize
    if payload < expected:
        raise TruncationError(
            f"payload holds {payload} bytes, scheme {int(scheme)} needs {expected}", field="payload"
        )
    if payload > expected:
        raise LengthError(
            f"payload holds {payload} bytes, scheme {int(scheme)} needs exactly {expected}",
            field="payload",
        )
    params = np.frombuffer(data, dtype=PARAM_DTYPE, offset=HEADER.size).astype(np.float32)
    if not np.isfinite(params).all():
        raise DimensionsError("non-finite parameter value", field="payload")
    i = d * d
    return MlpModel(
        scheme,
        DenseLayer(params[:i].reshape(d, d), params[i : i + d]),
        DenseLayer(params[i + d : i + 2 * d].reshape(1, d), params[i + 2 * d :]),
        Normalization(pscale, cscale),
        component,
        group,
        bit_depth,
    )


def import_model(source) -> MlpModel:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return model_from_bytes(bytes(source))
    if isinstance(source, (str, os.PathLike)):
        return model_from_bytes(Path(source).read_bytes())
    return model_from_bytes(source.read())


def models_bit_equal(a: MlpModel, b: MlpModel) -> bool:
    return model_to_bytes(a) == model_to_bytes(b)


def resolution_group(frame_width: int, frame_height: int) -> ResolutionGroup:
    """Luma height of 1080 or more selects the high-resolution set."""
    return ResolutionGroup.HIGH_RES if frame_height >= HIGH_RES_MIN_HEIGHT else ResolutionGroup.LOW_RES


@dataclass
class ModelSet:
    """Models keyed by (component, resolution group).

    A scheme 2 set holds the six (Y/U/V x high/low) models. A scheme 1 set
    holds either one fully shared model or one shared-resolution model per
    component.
    """

    scheme: Scheme
    models: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scheme = Scheme.parse(self.scheme)

    def add(self, model: MlpModel) -> None:
        if model.scheme is not self.scheme:
            raise ConfigurationError(
                f"scheme {int(model.scheme)} model in a scheme {int(self.scheme)} set"
            )
        self.models[(model.component, model.group)] = model

    def validate(self) -> None:
        if self.scheme is Scheme.SCHEME2:
            needed = {(c, g) for c in (Component.Y, Component.U, Component.V)
                      for g in (ResolutionGroup.HIGH_RES, ResolutionGroup.LOW_RES)}
            missing = needed - set(self.models)
            extra = set(self.models) - needed
            if missing or extra:
                raise ConfigurationError(
                    f"scheme 2 set needs exactly the six component/group models; "
                    f"missing {sorted((c.name, g.name) for c, g in missing)}"
                )
        else:
            if not self.models:
                raise ConfigurationError("scheme 1 set is empty")
            if any(g is not ResolutionGroup.SHARED for _, g in self.models):
                raise ConfigurationError("scheme 1 models must use the shared resolution group")


def select_model(model_set: ModelSet, component, frame_width: int, frame_height: int) -> MlpModel:
    component = Component.parse(component)
    if model_set.scheme is Scheme.SCHEME2:
        key = (component, resolution_group(frame_width, frame_height))
        if key not in model_set.models:
            raise ConfigurationError(f"no model for {key[0].name}/{key[1].name}")
        return model_set.models[key]
    for key in ((component, ResolutionGroup.SHARED), (Component.SHARED, ResolutionGroup.SHARED)):
        if key in model_set.models:
            return model_set.models[key]
    raise ConfigurationError(f"no scheme 1 model for component {component.name}")


def write_manifest(entries, destination) -> None:
    """``entries`` is an iterable of (component, group, path) triples."""
    lines = [f"{Component.parse(c).name},{_group_name(ResolutionGroup.parse(g))},{p}"
             for c, g, p in entries]
    Path(destination).write_text("\n".join(lines) + "\n")


def _group_name(group: ResolutionGroup) -> str:
    return {ResolutionGroup.HIGH_RES: "HighRes", ResolutionGroup.LOW_RES: "LowRes",
            ResolutionGroup.SHARED: "shared"}[group]


def load_manifest(path) -> ModelSet:
    """Load a model set from ``component,group,path`` lines (paths relative to the manifest)."""
    path = Path(path)
    base = path.parent
    model_set = None
    for n, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ConfigurationError(f"{path}:{n}: expected component,group,path")
        comp, group, file = parts
        model = import_model(base / file)
        if (model.component, model.group) != (Component.parse(comp), ResolutionGroup.parse(group)):
            raise ConfigurationError(
                f"{path}:{n}: {file} is tagged {model.component.name}/{model.group.name}"
            )
        if model_set is None:
            model_set = ModelSet(model.scheme)
        model_set.add(model)
    if model_set is None:
        raise ConfigurationError(f"{path}: manifest lists no models")
    model_set.validate()
    return model_set
