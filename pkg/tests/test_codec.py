import numpy as np
import pytest

from splatstream.codec import (
    CODEC_DEFLATE,
    CODEC_H264,
    CodecConfig,
    EncoderError,
    STREAM_SOURCES,
    decode_group,
    deflate_decode,
    deflate_encode,
    encode_group,
    h264_available,
    h264_decode,
    h264_encode,
    qp_policy,
)
from splatstream.packing import pack_group
from splatstream.synthetic import smooth_motion_sequence

needs_h264 = pytest.mark.skipif(
    not h264_available(),
    reason="external H.264 encoder not on PATH (set SPLATSTREAM_FFMPEG to override)",
)


# --- QP policy ------------------------------------------------------------


def test_qp_policy_below_threshold_is_uniform():
    policy = qp_policy(20)
    assert policy["pos_hi"] is None
    for name in ("pos_lo", "rotation", "scale", "opacity", "color", "sh"):
        assert policy[name] == 20


def test_qp_policy_above_threshold_caps_visual_attrs():
    policy = qp_policy(30)
    assert policy["pos_hi"] is None
    assert policy["color"] == 22
    assert policy["scale"] == 22
    assert policy["rotation"] == 22
    assert policy["opacity"] == 30
    assert policy["sh"] == 30
    assert policy["pos_lo"] == 30


def test_qp_policy_at_threshold_is_uniform():
    policy = qp_policy(22)
    assert policy["pos_hi"] is None
    assert all(policy[n] == 22 for n in policy if n != "pos_hi")


def test_qp_policy_full_map():
    # independent restatement of the rule over the whole QP range
    for base in range(52):
        policy = qp_policy(base)
        assert set(policy) == set(STREAM_SOURCES)
        for name in policy:
            if name == "pos_hi":
                expected = None
            elif name in ("color", "scale", "rotation") and base > 22:
                expected = 22
            else:
                expected = base
            assert policy[name] == expected, (base, name)


def test_qp_policy_rejects_out_of_range():
    with pytest.raises(ValueError):
        qp_policy(-1)
    with pytest.raises(ValueError):
        qp_policy(52)


# --- lossless backend -----------------------------------------------------


def test_deflate_roundtrip_bitexact():
    rng = np.random.default_rng(7)
    for t, side in [(1, 8), (5, 16), (20, 24), (3, 8)]:
        planes = rng.integers(0, 256, size=(t, side, side), dtype=np.uint8)
        out = deflate_decode(deflate_encode(planes), t, side)
        assert out.dtype == np.uint8
        np.testing.assert_array_equal(out, planes)


def test_deflate_roundtrip_extremes():
    planes = np.zeros((4, 8, 8), dtype=np.uint8)
    planes[1] = 255
    planes[2] = 1
    out = deflate_decode(deflate_encode(planes), 4, 8)
    np.testing.assert_array_equal(out, planes)


def test_deflate_static_sequence_compresses():
    # temporally constant planes: the 19 repeats cost almost nothing beyond
    # the first (incompressible) frame, and the total stays far below raw
    rng = np.random.default_rng(3)
    frame = rng.integers(0, 256, size=(64, 64), dtype=np.uint8)
    planes = np.broadcast_to(frame, (20, 64, 64)).copy()
    data = deflate_encode(planes)
    first_alone = deflate_encode(planes[:1])
    assert len(data) < 1.1 * len(first_alone)
    assert len(data) < 0.10 * planes.nbytes


def test_deflate_rejects_wrong_dtype():
    with pytest.raises(ValueError):
        deflate_encode(np.zeros((2, 8, 8), dtype=np.float64))


def test_deflate_decode_length_mismatch():
    planes = np.zeros((2, 8, 8), dtype=np.uint8)
    data = deflate_encode(planes)
    with pytest.raises(ValueError):
        deflate_decode(data, 3, 8)


# --- group encode/decode --------------------------------------------------


def _stack(num_frames=5, n=50, seed=0, sh_degree=0):
    frames = smooth_motion_sequence(n, num_frames, seed=seed, sh_degree=sh_degree)
    return pack_group(frames)


def test_group_roundtrip_lossless_bitexact():
    stack = _stack()
    enc = encode_group(stack, CodecConfig(backend="lossless-internal"))
    out = decode_group(enc)
    assert out.side == stack.side
    assert out.splat_count == stack.splat_count
    assert set(out.planes) == set(stack.planes)
    for name in stack.planes:
        np.testing.assert_array_equal(out.planes[name], stack.planes[name])
    for name, qr in stack.quant.items():
        np.testing.assert_allclose(out.quant[name].mins, qr.mins)
        np.testing.assert_allclose(out.quant[name].maxs, qr.maxs)
        assert out.quant[name].bits == qr.bits


def test_group_roundtrip_with_sh():
    stack = _stack(sh_degree=1)
    enc = encode_group(stack, CodecConfig())
    assert "sh" in enc.streams
    assert len(enc.streams["sh"].channels) == 9
    out = decode_group(enc)
    np.testing.assert_array_equal(out.planes["sh"], stack.planes["sh"])


def test_degree_zero_has_no_sh_stream():
    enc = encode_group(_stack(sh_degree=0), CodecConfig())
    assert "sh" not in enc.streams


def test_lossless_backend_marks_all_streams_lossless():
    enc = encode_group(_stack(), CodecConfig(backend="lossless-internal", base_qp=40))
    for name, stream in enc.streams.items():
        assert stream.lossless, name
        assert stream.qp is None
        assert stream.codec == CODEC_DEFLATE


def test_position_splits_into_two_byte_streams():
    enc = encode_group(_stack(), CodecConfig())
    assert "pos_hi" in enc.streams and "pos_lo" in enc.streams
    assert len(enc.streams["pos_hi"].channels) == 3
    assert len(enc.streams["pos_lo"].channels) == 3
    assert "position" not in enc.streams


def test_groups_decode_in_isolation():
    frames = smooth_motion_sequence(40, 10, seed=5)
    first = pack_group(frames[:5])
    second = pack_group(frames[5:])
    enc_second = encode_group(second, CodecConfig())
    # decode the later group without ever touching the first group's bytes
    out = decode_group(enc_second)
    for name in second.planes:
        np.testing.assert_array_equal(out.planes[name], second.planes[name])
    assert out.start_frame == 5


def test_decode_group_checks_manifest_entry():
    from types import SimpleNamespace

    stack = _stack()
    enc = encode_group(stack, CodecConfig())
    good = SimpleNamespace(
        side=stack.side, num_frames=stack.num_frames, splat_count=stack.splat_count
    )
    decode_group(enc, good)  # no error
    bad = SimpleNamespace(side=stack.side + 8, num_frames=stack.num_frames, splat_count=stack.splat_count)
    with pytest.raises(ValueError, match="mismatch"):
        decode_group(enc, bad)


def test_total_bytes_sums_streams():
    enc = encode_group(_stack(), CodecConfig())
    assert enc.total_bytes == sum(
        sum(len(c) for c in s.channels) for s in enc.streams.values()
    )
    assert enc.total_bytes > 0


def test_config_validation():
    with pytest.raises(ValueError):
        CodecConfig(backend="mystery")
    with pytest.raises(ValueError):
        CodecConfig(base_qp=52)
    with pytest.raises(ValueError):
        CodecConfig(gop=0)


# --- external H.264 backend ----------------------------------------------


def test_h264_encode_errors_when_binary_missing(monkeypatch):
    monkeypatch.setenv("SPLATSTREAM_FFMPEG", "no-such-encoder-binary")
    planes = np.zeros((2, 16, 16), dtype=np.uint8)
    with pytest.raises(EncoderError):
        h264_encode(planes, 22, 2)
    with pytest.raises(EncoderError):
        h264_decode(b"", 2, 16)


@needs_h264
def test_h264_roundtrip_shape_and_proximity():
    rng = np.random.default_rng(11)
    base = rng.integers(80, 176, size=(16, 16), dtype=np.uint8)
    planes = np.stack([base + np.uint8(t) for t in range(8)])
    data = h264_encode(planes, 10, 8)
    out = h264_decode(data, 8, 16)
    assert out.shape == planes.shape
    assert np.mean(np.abs(out.astype(int) - planes.astype(int))) < 8.0


@needs_h264
def test_h264_quality_monotone_in_qp():
    rng = np.random.default_rng(12)
    planes = rng.integers(0, 256, size=(8, 32, 32), dtype=np.uint8)
    errs = []
    sizes = []
    for qp in (10, 40):
        data = h264_encode(planes, qp, 8)
        out = h264_decode(data, 8, 32)
        errs.append(np.mean((out.astype(float) - planes.astype(float)) ** 2))
        sizes.append(len(data))
    assert errs[0] <= errs[1]
    assert sizes[0] >= sizes[1]


@needs_h264
def test_h264_group_pos_hi_still_lossless():
    stack = _stack(num_frames=4, n=30)
    enc = encode_group(stack, CodecConfig(backend="h264-external", base_qp=30, gop=4))
    assert enc.streams["pos_hi"].lossless
    assert enc.streams["pos_hi"].codec == CODEC_DEFLATE
    assert enc.streams["color"].codec == CODEC_H264
    assert enc.streams["color"].qp == 22
    assert enc.streams["opacity"].qp == 30
    out = decode_group(enc)
    np.testing.assert_array_equal(
        out.planes["position"] >> 8, stack.planes["position"] >> 8
    )
