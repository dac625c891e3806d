import numpy as np
import pytest

from llip.interpf import BlockContext

SIZES = (4, 8, 16, 32, 64, 128)


def oracle_filter(pred, top, left, w, h):
    """Straight-line re-implementation of the integer filter with floor division.

    Deliberately avoids shifts, log2 and numpy broadcasting so it shares no
    code path with the library.
    """
    out = [[0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            r1 = int(top[x])
            r2 = int(top[w])
            r3 = int(left[y])
            r4 = int(left[h])
            p = int(pred[y][x])
            pv = ((h - 1 - y) * r1 + (y + 1) * r4 + h // 2) // h
            ph = ((w - 1 - x) * r3 + (x + 1) * r2 + w // 2) // w
            pq = (pv + ph + 1) // 2
            out[y][x] = (5 * p + 3 * pq + 4) // 8
    return out


def random_context(rng, w, h, bit_depth=10):
    hi = (1 << bit_depth)
    return BlockContext(
        w, h,
        rng.integers(0, hi, size=(h, w)),
        rng.integers(0, hi, size=w + 1),
        rng.integers(0, hi, size=h + 1),
        bit_depth,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
