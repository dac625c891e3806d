import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llip.errors import CoordinateError, GeometryError
from llip.interpf import (
    BlockContext,
    blend_output,
    combine_quarter,
    filter_arrays,
    filter_block,
    filter_records,
    gather_neighbors,
    horizontal_blend,
    vertical_blend,
)

from conftest import SIZES, oracle_filter, random_context


def border_ctx(w, h):
    return BlockContext(w, h, np.zeros((h, w)), np.arange(1, w + 2), np.arange(w + 2, w + h + 3))


class TestGatherNeighbors:
    def test_origin(self):
        ctx = BlockContext(4, 4, np.zeros((4, 4)), [1, 2, 3, 4, 5], [6, 7, 8, 9, 10])
        assert gather_neighbors(ctx, 0, 0) == (1, 5, 6, 10)

    def test_far_corner(self):
        ctx = BlockContext(4, 4, np.zeros((4, 4)), [1, 2, 3, 4, 5], [6, 7, 8, 9, 10])
        assert gather_neighbors(ctx, 3, 3) == (4, 5, 9, 10)

    def test_rectangular(self):
        ctx = border_ctx(8, 4)
        top, left = ctx.top, ctx.left
        assert gather_neighbors(ctx, 7, 0) == (top[7], top[8], left[0], left[4])

    @pytest.mark.parametrize("xy", [(-1, 0), (0, -1), (4, 0), (0, 4)])
    def test_out_of_range(self, xy):
        with pytest.raises(CoordinateError):
            gather_neighbors(border_ctx(4, 4), *xy)


@pytest.mark.parametrize(
    "args, expected",
    [
        ((2, 8, 100, 110), 104),
        ((0, 4, 0, 1023), 256),
    ],
)
def test_vertical_blend(args, expected):
    assert vertical_blend(*args) == expected


def test_vertical_blend_constant():
    assert all(vertical_blend(y, 8, 512, 512) == 512 for y in range(8))


@pytest.mark.parametrize("args, expected", [((3, 8, 90, 120), 105), ((3, 4, 40, 80), 80)])
def test_horizontal_blend(args, expected):
    assert horizontal_blend(*args) == expected


def test_horizontal_blend_constant():
    assert all(horizontal_blend(x, 16, 7, 7) == 7 for x in range(16))


def test_combine_quarter():
    assert combine_quarter(104, 105) == 105
    assert combine_quarter(512, 512) == 512
    assert combine_quarter(0, 1) == 1


def test_blend_output():
    assert blend_output(105, 105) == 105
    assert blend_output(0, 1023) == 384
    assert blend_output(1023, 0) == 639


def test_filter_block_composed_example():
    top = np.full(9, 100)
    top[8] = 120
    left = np.full(9, 90)
    left[8] = 110
    ctx = BlockContext(8, 8, np.full((8, 8), 105), top, left)
    assert filter_block(ctx)[2, 3] == 105


def test_filter_block_does_not_mutate(rng):
    ctx = random_context(rng, 8, 16)
    before = ctx.prediction.copy()
    out = filter_block(ctx)
    out[...] = 0
    assert np.array_equal(ctx.prediction, before)


def test_filter_block_matches_oracle_4x4(rng):
    for _ in range(10_000):
        ctx = random_context(rng, 4, 4)
        expected = oracle_filter(ctx.prediction.tolist(), ctx.top.tolist(), ctx.left.tolist(), 4, 4)
        assert filter_block(ctx).tolist() == expected


def test_filter_arrays_stack_matches_single(rng):
    ctxs = [random_context(rng, 8, 4) for _ in range(5)]
    stacked = filter_arrays(
        np.stack([c.prediction for c in ctxs]),
        np.stack([c.top for c in ctxs]),
        np.stack([c.left for c in ctxs]),
    )
    for c, out in zip(ctxs, stacked):
        assert np.array_equal(out, filter_block(c))


def test_filter_records_matches_block(rng):
    ctx = random_context(rng, 16, 8)
    ys, xs = np.mgrid[0:8, 0:16]
    out = filter_records(ctx.top[xs], ctx.top[16], ctx.left[ys], ctx.left[8], ctx.prediction,
                         xs, ys, 16, 8)
    assert np.array_equal(out, filter_block(ctx))


@pytest.mark.parametrize("w, h", [(2, 4), (4, 256), (12, 8), (4, 6), (0, 4)])
def test_bad_geometry(w, h):
    with pytest.raises(GeometryError):
        BlockContext(w, h, np.zeros(w * h), np.zeros(w + 1), np.zeros(h + 1))


def test_bad_border_lengths():
    with pytest.raises(GeometryError):
        BlockContext(4, 4, np.zeros(16), np.zeros(4), np.zeros(5))
    with pytest.raises(GeometryError):
        BlockContext(4, 4, np.zeros(15), np.zeros(5), np.zeros(5))


def test_sample_range_checked():
    with pytest.raises(GeometryError):
        BlockContext(4, 4, np.full(16, 1024), np.zeros(5), np.zeros(5), bit_depth=10)
    BlockContext(4, 4, np.full(16, 4095), np.zeros(5), np.zeros(5), bit_depth=12)


sizes = st.sampled_from(SIZES)


@settings(max_examples=300, deadline=None)
@given(w=sizes, h=sizes, bd=st.sampled_from([8, 10, 12]), data=st.data())
def test_constant_propagation(w, h, bd, data):
    v = data.draw(st.integers(0, (1 << bd) - 1))
    out = filter_block(BlockContext.constant(w, h, v, bd))
    assert (out == v).all()


@settings(max_examples=300, deadline=None)
@given(w=sizes, h=sizes, seed=st.integers(0, 2**32 - 1))
def test_range_containment(w, h, seed):
    ctx = random_context(np.random.default_rng(seed), w, h)
    out = filter_block(ctx)
    ys, xs = np.mgrid[0:h, 0:w]
    stack = np.stack([
        ctx.prediction,
        ctx.top[xs],
        np.broadcast_to(ctx.top[w], (h, w)),
        ctx.left[ys],
        np.broadcast_to(ctx.left[h], (h, w)),
    ])
    assert (out >= stack.min(axis=0)).all()
    assert (out <= stack.max(axis=0)).all()


def test_deterministic(rng):
    ctx = random_context(rng, 32, 16)
    assert np.array_equal(filter_block(ctx), filter_block(ctx))
