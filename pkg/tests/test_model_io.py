import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llip.errors import (
    ConfigurationError,
    DimensionsError,
    LengthError,
    MagicError,
    TruncationError,
    VersionError,
)
from llip.mlp import Component, MlpModel, Normalization, ResolutionGroup, Scheme
from llip.model_io import (
    HEADER,
    ModelSet,
    export_model,
    import_model,
    load_manifest,
    model_to_bytes,
    select_model,
    write_manifest,
)
from llip.trainer import init_parameters

f32 = st.floats(width=32, allow_nan=False, allow_infinity=False, allow_subnormal=True)


def model_from_flat(scheme, flat, **kw):
    d = Scheme(scheme).input_dim
    flat = np.asarray(flat, dtype=np.float32)
    i = d * d
    return MlpModel.from_arrays(scheme, flat[:i].reshape(d, d), flat[i:i + d],
                                flat[i + d:i + 2 * d], flat[i + 2 * d:], **kw)


def bits(model):
    return model.parameters().view(np.uint32)


@pytest.mark.parametrize("scheme, n", [(1, 36), (2, 64)])
def test_payload_size(scheme, n):
    data = model_to_bytes(init_parameters(scheme, 3))
    assert len(data) == HEADER.size + 4 * n


def test_export_deterministic(tmp_path):
    m = init_parameters(2, 9)
    export_model(m, tmp_path / "a.bin")
    export_model(m, tmp_path / "b.bin")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_stream_round_trip():
    m = init_parameters(2, 4).with_metadata(component=Component.U, group=ResolutionGroup.LOW_RES,
                                            normalization=Normalization(255, 32), bit_depth=8)
    buf = io.BytesIO()
    export_model(m, buf)
    back = import_model(io.BytesIO(buf.getvalue()))
    assert np.array_equal(bits(back), bits(m))
    assert (back.component, back.group, back.bit_depth) == (Component.U, ResolutionGroup.LOW_RES, 8)
    assert back.normalization == m.normalization


def test_round_trip_random_models(rng):
    for _ in range(200):
        scheme = int(rng.integers(1, 3))
        n = 36 if scheme == 1 else 64
        raw = rng.integers(0, 2**32, size=n, dtype=np.uint64).astype(np.uint32)
        vals = raw.view(np.float32)
        vals = np.where(np.isfinite(vals), vals, np.float32(0))
        m = model_from_flat(scheme, vals)
        data = model_to_bytes(m)
        back = import_model(data)
        assert np.array_equal(bits(back), bits(m))
        assert model_to_bytes(back) == data


@settings(max_examples=200, deadline=None)
@given(st.lists(f32, min_size=64, max_size=64))
def test_round_trip_property(values):
    values[0] = -0.0
    values[1] = 1e-45  # smallest positive subnormal
    m = model_from_flat(2, values)
    back = import_model(model_to_bytes(m))
    assert np.array_equal(bits(back), bits(m))
    assert np.signbit(back.layer1.weights[0, 0])


def test_bad_magic():
    data = bytearray(model_to_bytes(init_parameters(1)))
    data[:4] = b"XXXX"
    with pytest.raises(MagicError) as exc:
        import_model(bytes(data))
    assert exc.value.field == "magic"


def test_bad_version():
    data = bytearray(model_to_bytes(init_parameters(1)))
    struct.pack_into("<H", data, 4, 99)
    with pytest.raises(VersionError):
        import_model(bytes(data))


def test_bad_dims():
    data = bytearray(model_to_bytes(init_parameters(1)))
    struct.pack_into("<H", data, 18, 7)
    with pytest.raises(DimensionsError) as exc:
        import_model(bytes(data))
    assert exc.value.field == "dims"


def test_scheme1_header_with_scheme2_payload():
    s1 = model_to_bytes(init_parameters(1))
    s2 = model_to_bytes(init_parameters(2))
    with pytest.raises(LengthError) as exc:
        import_model(s1[: HEADER.size] + s2[HEADER.size:])
    assert exc.value.field == "payload"


@pytest.mark.parametrize("cut", [2, 10, HEADER.size + 5])
def test_truncated(cut):
    data = model_to_bytes(init_parameters(2))
    with pytest.raises((TruncationError, MagicError)):
        import_model(data[:cut])


def test_truncated_payload_is_truncation_error():
    data = model_to_bytes(init_parameters(2))
    with pytest.raises(TruncationError):
        import_model(data[:-1])


def six_models():
    models = []
    for c in (Component.Y, Component.U, Component.V):
        for g in (ResolutionGroup.HIGH_RES, ResolutionGroup.LOW_RES):
            models.append(init_parameters(2, seed=10 * int(c) + int(g), component=c, group=g))
    return models


class TestSelect:
    def make_set(self):
        s = ModelSet(Scheme.SCHEME2)
        for m in six_models():
            s.add(m)
        s.validate()
        return s

    def test_4k_chroma(self):
        m = select_model(self.make_set(), "U", 3840, 2160)
        assert (m.component, m.group) == (Component.U, ResolutionGroup.HIGH_RES)

    def test_720p_luma(self):
        m = select_model(self.make_set(), "Y", 1280, 720)
        assert (m.component, m.group) == (Component.Y, ResolutionGroup.LOW_RES)

    def test_1080_boundary(self):
        s = self.make_set()
        assert select_model(s, "V", 1920, 1080).group is ResolutionGroup.HIGH_RES
        assert select_model(s, "V", 1920, 1078).group is ResolutionGroup.LOW_RES

    def test_scheme1_shared(self):
        s = ModelSet(Scheme.SCHEME1)
        shared = init_parameters(1)
        s.add(shared)
        s.validate()
        for comp in "YUV":
            for size in ((416, 240), (3840, 2160)):
                assert select_model(s, comp, *size) is shared

    def test_scheme1_per_component(self):
        s = ModelSet(Scheme.SCHEME1)
        for c in (Component.Y, Component.U, Component.V):
            s.add(init_parameters(1, int(c), component=c))
        assert select_model(s, "V", 1920, 1080).component is Component.V

    def test_missing_entry(self):
        s = ModelSet(Scheme.SCHEME2)
        s.add(six_models()[0])
        with pytest.raises(ConfigurationError):
            s.validate()
        with pytest.raises(ConfigurationError):
            select_model(s, "V", 1920, 1080)

    def test_wrong_scheme_rejected(self):
        with pytest.raises(ConfigurationError):
            ModelSet(Scheme.SCHEME2).add(init_parameters(1))


def test_manifest_round_trip(tmp_path):
    entries = []
    for m in six_models():
        name = f"{m.component.name}_{m.group.name}.bin"
        export_model(m, tmp_path / name)
        entries.append((m.component, m.group, name))
    write_manifest(entries, tmp_path / "set.txt")
    lines = (tmp_path / "set.txt").read_text().splitlines()
    assert len(lines) == 6 and lines[0] == "Y,HighRes,Y_HIGH_RES.bin"
    loaded = load_manifest(tmp_path / "set.txt")
    assert len(loaded.models) == 6
    m = select_model(loaded, "U", 1280, 720)
    assert model_to_bytes(m) == (tmp_path / "U_LOW_RES.bin").read_bytes()


def test_manifest_tag_mismatch(tmp_path):
    m = six_models()[0]
    export_model(m, tmp_path / "y.bin")
    (tmp_path / "set.txt").write_text("U,HighRes,y.bin\n")
    with pytest.raises(ConfigurationError):
        load_manifest(tmp_path / "set.txt")
