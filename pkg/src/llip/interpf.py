"""Integer inter prediction filter (INTERPF).

Each predicted pixel P(x, y) of a w x h block is blended with four
reconstructed neighbours taken from the row above and the column to the
left of the block:

    R1 = top[x]   R2 = top[w]   R3 = left[y]   R4 = left[h]

    PV = ((h-1-y)*R1 + (y+1)*R4 + (h>>1)) >> log2(h)
    PH = ((w-1-x)*R3 + (x+1)*R2 + (w>>1)) >> log2(w)
    PQ = (PV + PH + 1) >> 1
    O  = (5*P + 3*PQ + 4) >> 3

``top`` holds the w+1 samples at (0,-1)..(w,-1) and ``left`` the h+1 samples
at (-1,0)..(-1,h). Everything is integer arithmetic; the largest
intermediate is below 2**18 for 12-bit samples and 128-sample blocks, so
int32 is sufficient and is used for the vectorised path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoordinateError, GeometryError

BIT_DEPTHS = (8, 10, 12)
DEFAULT_BIT_DEPTH = 10
MIN_BLOCK = 4
MAX_BLOCK = 128


def max_sample(bit_depth: int) -> int:
    if bit_depth not in BIT_DEPTHS:
        raise GeometryError(f"unsupported bit depth {bit_depth}; expected one of {BIT_DEPTHS}")
    return (1 << bit_depth) - 1


def log2_exact(n: int) -> int:
    return n.bit_length() - 1


def check_geometry(width: int, height: int) -> None:
    for name, n in (("width", width), ("height", height)):
        if not isinstance(n, (int, np.integer)) or n < MIN_BLOCK or n > MAX_BLOCK or n & (n - 1):
            raise GeometryError(
                f"block {name} {n} must be a power of two in [{MIN_BLOCK}, {MAX_BLOCK}]"
            )


@dataclass(frozen=True)
class BlockContext:
    """A prediction block plus its reconstructed border.

    ``prediction`` is stored as an (h, w) array; raster order is row-major.
    Arrays are copied and made read-only on construction.
    """

    width: int
    height: int
    prediction: np.ndarray
    top: np.ndarray
    left: np.ndarray
    bit_depth: int = DEFAULT_BIT_DEPTH

    def __post_init__(self):
        check_geometry(self.width, self.height)
        hi = max_sample(self.bit_depth)
        pred = np.array(self.prediction, dtype=np.int32).reshape(-1)
        if pred.size != self.width * self.height:
            raise GeometryError(
                f"prediction has {pred.size} samples, expected {self.width * self.height}"
            )
        top = np.array(self.top, dtype=np.int32).reshape(-1)
        left = np.array(self.left, dtype=np.int32).reshape(-1)
        if top.size != self.width + 1:
            raise GeometryError(f"top border has {top.size} samples, expected {self.width + 1}")
        if left.size != self.height + 1:
            raise GeometryError(f"left border has {left.size} samples, expected {self.height + 1}")
        for name, arr in (("prediction", pred), ("top", top), ("left", left)):
            if arr.size and (arr.min() < 0 or arr.max() > hi):
                raise GeometryError(f"{name} samples outside [0, {hi}]")
        pred = pred.reshape(self.height, self.width)
        for arr in (pred, top, left):
            arr.flags.writeable = False
        object.__setattr__(self, "prediction", pred)
        object.__setattr__(self, "top", top)
        object.__setattr__(self, "left", left)

    @classmethod
    def constant(cls, width: int, height: int, value: int, bit_depth: int = DEFAULT_BIT_DEPTH):
        return cls(
            width,
            height,
            np.full((height, width), value),
            np.full(width + 1, value),
            np.full(height + 1, value),
            bit_depth,
        )


def gather_neighbors(ctx: BlockContext, x: int, y: int) -> tuple[int, int, int, int]:
    """Return (R1, R2, R3, R4) for pixel (x, y)."""
    if not (0 <= x < ctx.width and 0 <= y < ctx.height):
        raise CoordinateError(f"({x}, {y}) outside {ctx.width}x{ctx.height} block")
    return (
        int(ctx.top[x]),
        int(ctx.top[ctx.width]),
        int(ctx.left[y]),
        int(ctx.left[ctx.height]),
    )


def vertical_blend(y: int, h: int, r1: int, r4: int) -> int:
    return ((h - 1 - y) * r1 + (y + 1) * r4 + (h >> 1)) >> log2_exact(h)


def horizontal_blend(x: int, w: int, r3: int, r2: int) -> int:
    return ((w - 1 - x) * r3 + (x + 1) * r2 + (w >> 1)) >> log2_exact(w)


def combine_quarter(pv: int, ph: int) -> int:
    return (pv + ph + 1) >> 1


def blend_output(p: int, pq: int) -> int:
    return (p * 5 + pq * 3 + 4) >> 3


def filter_pixel(ctx: BlockContext, x: int, y: int) -> int:
    r1, r2, r3, r4 = gather_neighbors(ctx, x, y)
    pv = vertical_blend(y, ctx.height, r1, r4)
    ph = horizontal_blend(x, ctx.width, r3, r2)
    return blend_output(int(ctx.prediction[y, x]), combine_quarter(pv, ph))


def filter_arrays(
    prediction: np.ndarray, top: np.ndarray, left: np.ndarray
) -> np.ndarray:
    """Vectorised filter over a stack of same-geometry blocks.

    ``prediction`` is (..., h, w), ``top`` (..., w+1), ``left`` (..., h+1);
    leading dimensions broadcast. No validation is done here.
    """
    h, w = prediction.shape[-2:]
    p = prediction.astype(np.int32, copy=False)
    top = top.astype(np.int32, copy=False)
    left = left.astype(np.int32, copy=False)
    ys = np.arange(h, dtype=np.int32)[:, None]
    xs = np.arange(w, dtype=np.int32)[None, :]
    r1 = top[..., None, :w]
    r2 = top[..., w, None, None]
    r3 = left[..., :h, None]
    r4 = left[..., h, None, None]
    pv = ((h - 1 - ys) * r1 + (ys + 1) * r4 + (h >> 1)) >> log2_exact(h)
    ph = ((w - 1 - xs) * r3 + (xs + 1) * r2 + (w >> 1)) >> log2_exact(w)
    pq = (pv + ph + 1) >> 1
    return (p * 5 + pq * 3 + 4) >> 3


def filter_block(ctx: BlockContext) -> np.ndarray:
    """Filter every pixel of ``ctx``; returns a new (h, w) int32 array."""
    return filter_arrays(ctx.prediction, ctx.top, ctx.left)


def filter_records(r1, r2, r3, r4, p, x, y, w, h) -> np.ndarray:
    """Per-pixel filter over flat record columns of mixed block sizes."""
    r1, r2, r3, r4, p, x, y, w, h = (
        np.asarray(a, dtype=np.int64) for a in (r1, r2, r3, r4, p, x, y, w, h)
    )
    log_w = np.log2(w).astype(np.int64)
    log_h = np.log2(h).astype(np.int64)
    pv = ((h - 1 - y) * r1 + (y + 1) * r4 + (h >> 1)) >> log_h
    ph = ((w - 1 - x) * r3 + (x + 1) * r2 + (w >> 1)) >> log_w
    pq = (pv + ph + 1) >> 1
    return (p * 5 + pq * 3 + 4) >> 3
