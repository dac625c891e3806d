"""Training-data extraction from raw planar 4:2:0 video.

A codec would hand us the prediction block and reconstructed border of every
block it filtered. Here both are simulated from the original frames: the
prediction is the co-located block displaced by a small integer motion
vector plus Gaussian noise, and the border is the true neighbouring row and
column plus (independent) Gaussian noise. The untouched original block is
the regression target.
"""

from __future__ import annotations

import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, GeometryError, ParseError
from .interpf import BIT_DEPTHS, BlockContext, check_geometry, max_sample
from .mlp import Component

COMPONENT_NAMES = ("Y", "U", "V")

RECORD_DTYPE = np.dtype([
    ("component", np.uint8),
    ("frame", np.int32),
    ("w", np.int16),
    ("h", np.int16),
    ("x", np.int16),
    ("y", np.int16),
    ("r1", np.int32),
    ("r2", np.int32),
    ("r3", np.int32),
    ("r4", np.int32),
    ("p", np.int32),
    ("g", np.int32),
])
RECORD_FIELDS = RECORD_DTYPE.names
DATASET_HEADER = "component,frame,w,h,x,y,R1,R2,R3,R4,P,G"


@dataclass(frozen=True)
class FrameSpec:
    width: int
    height: int
    bit_depth: int = 10
    frame_count: int = 1

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.width % 2 or self.height % 2:
            raise FormatError(f"4:2:0 frame size must be positive and even, got {self.width}x{self.height}")
        if self.bit_depth not in BIT_DEPTHS:
            raise FormatError(f"unsupported bit depth {self.bit_depth}")
        if self.frame_count < 1:
            raise FormatError("frame_count must be >= 1")

    @property
    def bytes_per_sample(self) -> int:
        return 1 if self.bit_depth == 8 else 2

    @property
    def frame_samples(self) -> int:
        return self.width * self.height + 2 * (self.width // 2) * (self.height // 2)

    @property
    def frame_bytes(self) -> int:
        return self.frame_samples * self.bytes_per_sample


@dataclass(frozen=True)
class Frame:
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    bit_depth: int = 10

    def plane(self, component) -> np.ndarray:
        return (self.y, self.u, self.v)[int(Component.parse(component))]


def read_yuv420(source, spec: FrameSpec) -> list[Frame]:
    """Decode raw planar 4:2:0 video from a path, bytes or binary file object.

    8-bit video is one byte per sample; 10/12-bit video two bytes, little
    endian.
    """
    if isinstance(source, (bytes, bytearray, memoryview)):
        data = bytes(source)
    elif isinstance(source, (str, os.PathLike)):
        data = Path(source).read_bytes()
    else:
        data = source.read()
    expected = spec.frame_count * spec.frame_bytes
    if len(data) != expected:
        raise FormatError(
            f"expected {expected} bytes for {spec.frame_count} frame(s) of "
            f"{spec.width}x{spec.height} at {spec.bit_depth}-bit, got {len(data)}"
        )
    dtype = np.uint8 if spec.bit_depth == 8 else np.dtype("<u2")
    samples = np.frombuffer(data, dtype=dtype).astype(np.int32)
    if samples.size and samples.max() > max_sample(spec.bit_depth):
        raise FormatError(f"sample value {samples.max()} exceeds {spec.bit_depth}-bit range")
    w, h = spec.width, spec.height
    cw, ch = w // 2, h // 2
    frames = []
    for f in samples.reshape(spec.frame_count, spec.frame_samples):
        y = f[: w * h].reshape(h, w)
        u = f[w * h : w * h + cw * ch].reshape(ch, cw)
        v = f[w * h + cw * ch :].reshape(ch, cw)
        frames.append(Frame(y, u, v, spec.bit_depth))
    return frames


def write_yuv420(frames, destination) -> None:
    """Inverse of :func:`read_yuv420`; the layout is chosen by each frame's bit depth."""
    out = io.BytesIO()
    for fr in frames:
        dtype = np.uint8 if fr.bit_depth == 8 else np.dtype("<u2")
        for plane in (fr.y, fr.u, fr.v):
            out.write(np.asarray(plane).astype(dtype).tobytes())
    if isinstance(destination, (str, os.PathLike)):
        Path(destination).write_bytes(out.getvalue())
    else:
        destination.write(out.getvalue())


@dataclass(frozen=True)
class ExtractionConfig:
    block_sizes: tuple[tuple[int, int], ...] = ((8, 8), (16, 16))
    components: tuple[str, ...] = ("Y", "U", "V")
    max_shift: int = 3
    noise_sigma: float = 4.0
    border_noise_sigma: float = 4.0
    seed: int = 0
    cap_per_frame: int | None = None

    def __post_init__(self):
        sizes = tuple((int(w), int(h)) for w, h in self.block_sizes)
        if not sizes:
            raise GeometryError("at least one block size is required")
        for w, h in sizes:
            check_geometry(w, h)
        comps = tuple(Component.parse(c).name for c in self.components)
        if not comps or any(c not in COMPONENT_NAMES for c in comps):
            raise GeometryError(f"components must be a non-empty subset of {COMPONENT_NAMES}")
        if self.max_shift < 0 or self.noise_sigma < 0 or self.border_noise_sigma < 0:
            raise GeometryError("shift range and noise levels must be >= 0")
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "components", comps)


def _noisy(values: np.ndarray, sigma: float, rng: np.random.Generator, hi: int) -> np.ndarray:
    if sigma <= 0:
        return values.astype(np.int32)
    noise = rng.normal(0.0, sigma, size=values.shape)
    return np.clip(np.rint(values + noise), 0, hi).astype(np.int32)


def synthesize_context(
    plane: np.ndarray,
    origin: tuple[int, int],
    geometry: tuple[int, int],
    config: ExtractionConfig,
    rng: np.random.Generator,
    bit_depth: int = 10,
) -> tuple[BlockContext, np.ndarray]:
    """Build a degraded (context, original block) pair at ``origin`` = (x0, y0).

    The block needs one sample of border above and to the left, plus the
    top-right sample (x0+w, y0-1) and bottom-left sample (x0-1, y0+h), all
    inside the plane. The displaced prediction source is clamped to the
    plane so shifts near the edge never read outside it.
    """
    x0, y0 = origin
    w, h = geometry
    check_geometry(w, h)
    ph, pw = plane.shape
    if x0 < 1 or y0 < 1 or x0 + w >= pw or y0 + h >= ph:
        raise GeometryError(f"{w}x{h} block at ({x0}, {y0}) with border does not fit {pw}x{ph} plane")
    hi = max_sample(bit_depth)
    original = plane[y0 : y0 + h, x0 : x0 + w].astype(np.int32)
    s = config.max_shift
    dx, dy = (int(v) for v in rng.integers(-s, s + 1, size=2)) if s else (0, 0)
    sx = min(max(x0 + dx, 0), pw - w)
    sy = min(max(y0 + dy, 0), ph - h)
    prediction = _noisy(plane[sy : sy + h, sx : sx + w], config.noise_sigma, rng, hi)
    top = _noisy(plane[y0 - 1, x0 : x0 + w + 1], config.border_noise_sigma, rng, hi)
    left = _noisy(plane[y0 : y0 + h + 1, x0 - 1], config.border_noise_sigma, rng, hi)
    return BlockContext(w, h, prediction, top, left, bit_depth), original


def block_origins(plane_shape: tuple[int, int], w: int, h: int) -> list[tuple[int, int]]:
    """Raster tiling of a plane, leaving room for the border on every block."""
    ph, pw = plane_shape
    xs = range(1, pw - w, w)
    ys = range(1, ph - h, h)
    return [(x, y) for y in ys for x in xs]


def _records_for_block(ctx: BlockContext, original: np.ndarray, component: int, frame: int):
    w, h = ctx.width, ctx.height
    rec = np.empty(w * h, dtype=RECORD_DTYPE)
    ys, xs = np.divmod(np.arange(w * h), w)
    rec["component"] = component
    rec["frame"] = frame
    rec["w"] = w
    rec["h"] = h
    rec["x"] = xs
    rec["y"] = ys
    rec["r1"] = ctx.top[xs]
    rec["r2"] = ctx.top[w]
    rec["r3"] = ctx.left[ys]
    rec["r4"] = ctx.left[h]
    rec["p"] = ctx.prediction.reshape(-1)
    rec["g"] = original.reshape(-1)
    return rec


def iter_contexts(frame: Frame, frame_index: int, config: ExtractionConfig):
    """Yield (component, origin, context, original) for one frame in extraction order.

    Order is component, then block size, then block raster. The generator
    is seeded from (seed, frame index), so frames are independent of each
    other and of the order they are processed in.
    """
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, frame_index]))
    for name in config.components:
        comp = Component[name]
        plane = frame.plane(comp)
        for w, h in config.block_sizes:
            for origin in block_origins(plane.shape, w, h):
                ctx, original = synthesize_context(plane, origin, (w, h), config, rng, frame.bit_depth)
                yield comp, origin, ctx, original


def extract_frame(frame: Frame, frame_index: int, config: ExtractionConfig) -> np.ndarray:
    parts = [
        _records_for_block(ctx, original, int(comp), frame_index)
        for comp, _, ctx, original in iter_contexts(frame, frame_index, config)
    ]
    records = np.concatenate(parts) if parts else np.empty(0, dtype=RECORD_DTYPE)
    cap = config.cap_per_frame
    if cap is not None and records.size > cap:
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, frame_index, 1]))
        keep = np.sort(rng.choice(records.size, size=cap, replace=False))
        records = records[keep]
    return records


def extract_samples(frames, config: ExtractionConfig, threads: int = 1) -> np.ndarray:
    """One record per pixel of every tiled block, frame-major order."""
    frames = list(frames)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda a: extract_frame(a[1], a[0], config), enumerate(frames)))
    else:
        parts = [extract_frame(f, i, config) for i, f in enumerate(frames)]
    return np.concatenate(parts) if parts else np.empty(0, dtype=RECORD_DTYPE)


def expected_record_count(spec: FrameSpec, config: ExtractionConfig) -> int:
    """Record count :func:`extract_samples` yields before any cap."""
    total = 0
    for name in config.components:
        shape = (spec.height, spec.width) if name == "Y" else (spec.height // 2, spec.width // 2)
        for w, h in config.block_sizes:
            total += len(block_origins(shape, w, h)) * w * h
    return total * spec.frame_count


def make_records(rows) -> np.ndarray:
    """Build a record array from tuples in dataset column order."""
    return np.array([tuple(r) for r in rows], dtype=RECORD_DTYPE)


def write_dataset(records: np.ndarray, destination) -> None:
    lines = [DATASET_HEADER]
    if records.size:
        cols = [np.asarray(COMPONENT_NAMES)[records["component"]]]
        cols += [records[f].astype(str) for f in RECORD_FIELDS[1:]]
        body = cols[0]
        for c in cols[1:]:
            body = np.char.add(np.char.add(body, ","), c)
        lines.extend(body.tolist())
    text = "\n".join(lines) + "\n"
    if isinstance(destination, (str, os.PathLike)):
        Path(destination).write_text(text)
    else:
        destination.write(text)


def read_dataset(source) -> np.ndarray:
    if isinstance(source, (str, os.PathLike)):
        text = Path(source).read_text()
    else:
        text = source.read()
    lines = text.splitlines()
    if not lines or lines[0].strip() != DATASET_HEADER:
        raise ParseError(f"missing header {DATASET_HEADER!r}", line=1)
    comp_index = {name: i for i, name in enumerate(COMPONENT_NAMES)}
    rows = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 12:
            raise ParseError(f"expected 12 fields, got {len(parts)}", line=n)
        if parts[0] not in comp_index:
            raise ParseError(f"unknown component {parts[0]!r}", line=n, field="component")
        try:
            vals = [int(p) for p in parts[1:]]
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", line=n) from None
        w, h, x, y = vals[1:5]
        if not (0 <= x < w and 0 <= y < h):
            raise ParseError(f"coordinate ({x}, {y}) outside {w}x{h} block", line=n)
        if min(vals[5:]) < 0:
            raise ParseError("negative sample value", line=n)
        rows.append((comp_index[parts[0]], *vals))
    if not rows:
        return np.empty(0, dtype=RECORD_DTYPE)
    return make_records(rows)


def records_bit_depth_check(records: np.ndarray, bit_depth: int) -> None:
    hi = max_sample(bit_depth)
    for f in ("r1", "r2", "r3", "r4", "p", "g"):
        if records.size and records[f].max() > hi:
            raise FormatError(f"{f} exceeds {bit_depth}-bit range")


def split_records(records: np.ndarray, held_out: float = 0.1, seed: int = 0):
    """Seeded random split into (train, held-out) record arrays."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    order = rng.permutation(records.size)
    n_test = int(round(records.size * held_out))
    return records[np.sort(order[n_test:])], records[np.sort(order[:n_test])]


def synthetic_video(spec: FrameSpec, seed: int = 0) -> list[Frame]:
    """Smooth moving test content: gradients, blobs and mild texture.

    Used by the tests and the demo commands when no real footage is at hand.
    """
    rng = np.random.default_rng(seed)
    hi = max_sample(spec.bit_depth)
    frames = []
    blobs = rng.uniform(0, 1, size=(6, 5))

    def render(w, h, t, phase):
        yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
        u, v = xx / w, yy / h
        img = 0.35 + 0.25 * u + 0.15 * v * np.cos(phase)
        for cx, cy, r, a, s in blobs:
            cx = (cx + 0.02 * t * s) % 1.0
            img += (a - 0.5) * 0.5 * np.exp(-((u - cx) ** 2 + (v - cy) ** 2) / (0.02 + 0.05 * r))
        img += 0.04 * np.sin(2 * np.pi * (xx / 7.0 + yy / 11.0 + 0.1 * t + phase))
        img += rng.normal(0, 0.01, size=img.shape)
        return np.clip(np.rint(img * hi), 0, hi).astype(np.int32)

    for t in range(spec.frame_count):
        y = render(spec.width, spec.height, t, 0.0)
        u = render(spec.width // 2, spec.height // 2, t, 1.3)
        v = render(spec.width // 2, spec.height // 2, t, 2.1)
        frames.append(Frame(y, u, v, spec.bit_depth))
    return frames
