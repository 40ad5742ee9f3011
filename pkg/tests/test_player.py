import time

import numpy as np
import pytest

from splatstream.bake import bake_frames
from splatstream.codec import decode_group
from splatstream.container import read_group, read_manifest
from splatstream.packing import unpack_frame
from splatstream.player import (
    EndOfStream,
    PlaySession,
    Stalled,
    open_session,
)
from splatstream.server import ServeConfig, serve
from splatstream.synthetic import smooth_motion_sequence


@pytest.fixture(scope="module")
def asset(tmp_path_factory):
    root = tmp_path_factory.mktemp("player-asset")
    frames = smooth_motion_sequence(80, 45, seed=0)
    bake_frames(frames, root, group_size=20)
    return root


def _offline_frames(root):
    manifest = read_manifest(root)
    out = []
    for entry in manifest.groups:
        stack = decode_group(read_group(root, manifest, entry.index), entry)
        for local in range(entry.num_frames):
            out.append(unpack_frame(stack, local))
    return out


def test_open_starts_paused_at_zero(asset):
    with PlaySession.open(asset) as session:
        assert session.state == "paused"
        assert session.cursor == 0
        assert session.frame_count == 45
        # prefetch reaches group 0 without any frame being pulled
        deadline = time.monotonic() + 5.0
        while time.monotonic() < deadline and 0 not in session.fetched_groups:
            time.sleep(0.01)
        assert 0 in session.fetched_groups


def test_frames_in_order_exactly_once(asset):
    with open_session(asset) as session:
        session.play()
        seen = []
        while True:
            try:
                seen.append(session.next_frame(timeout=10.0).frame_index)
            except EndOfStream:
                break
        assert seen == list(range(45))
        # repeated calls keep signalling end-of-stream
        with pytest.raises(EndOfStream):
            session.next_frame(timeout=1.0)


def test_frames_bitexact_vs_offline_decode(asset):
    reference = _offline_frames(asset)
    with open_session(asset) as session:
        for ref in reference:
            got = session.next_frame(timeout=10.0)
            assert got.frame_index == ref.frame_index
            assert np.array_equal(got.positions, ref.positions)
            assert np.array_equal(got.rotations, ref.rotations)
            assert np.array_equal(got.log_scales, ref.log_scales)
            assert np.array_equal(got.opacities, ref.opacities)
            assert np.array_equal(got.colors, ref.colors)
            assert np.array_equal(got.sh, ref.sh)


def test_playback_over_http(asset):
    reference = _offline_frames(asset)
    with serve(ServeConfig(root=asset)) as srv:
        with open_session(srv.url) as session:
            for ref in reference[:25]:
                got = session.next_frame(timeout=10.0)
                assert got.frame_index == ref.frame_index
                assert np.array_equal(got.positions, ref.positions)
            assert session.stats["download"].count >= 1
            assert session.stats["decode"].count >= 1
            assert session.stats["reconstruct"].count >= 25


def test_open_unreachable_url_errors():
    with pytest.raises(Exception):
        PlaySession.open("http://127.0.0.1:9/")  # discard port: nothing there


def test_seek_lands_on_group_start_then_fast_forwards(asset):
    with open_session(asset) as session:
        assert session.next_frame(timeout=10.0).frame_index == 0
        assert session.seek(25) == 25
        got = session.next_frame(timeout=10.0)
        assert got.frame_index == 25
        # decode restarted at the target's group (frame 25 // 20 = group 1),
        # not at frame 25's position directly
        assert session.decoded_groups[-1] in (1, 2)
        assert 1 in session.decoded_groups[-2:]
        following = session.next_frame(timeout=10.0)
        assert following.frame_index == 26


def test_seek_zero_from_anywhere(asset):
    with open_session(asset) as session:
        for _ in range(7):
            session.next_frame(timeout=10.0)
        session.seek(0)
        assert session.next_frame(timeout=10.0).frame_index == 0


def test_seek_to_last_frame_then_eos(asset):
    with open_session(asset) as session:
        session.seek(44)
        assert session.next_frame(timeout=10.0).frame_index == 44
        with pytest.raises(EndOfStream):
            session.next_frame(timeout=10.0)


def test_rapid_double_seek_delivers_last_target_only(asset):
    with open_session(asset) as session:
        session.seek(21)
        session.seek(3)
        indices = [session.next_frame(timeout=10.0).frame_index for _ in range(5)]
        assert indices == [3, 4, 5, 6, 7]


def test_seek_out_of_range(asset):
    with open_session(asset) as session:
        with pytest.raises(ValueError):
            session.seek(45)
        with pytest.raises(ValueError):
            session.seek(-1)


def test_seek_resets_end_of_stream(asset):
    with open_session(asset) as session:
        session.seek(44)
        session.next_frame(timeout=10.0)
        with pytest.raises(EndOfStream):
            session.next_frame(timeout=10.0)
        session.seek(43)
        assert session.next_frame(timeout=10.0).frame_index == 43


def test_try_next_frame_repeats_last_on_starvation(asset):
    with open_session(asset) as session:
        first = session.next_frame(timeout=10.0)
        # drain whatever is buffered until a stall is reported
        last, stalls_before = first, session.stalls
        for _ in range(10_000):
            frame, fresh = session.try_next_frame()
            if not fresh:
                break
            last = frame
        assert session.stalls == stalls_before + 1
        # the stalled pull handed back the previous frame, not None
        assert frame is last


def test_next_frame_timeout_raises_stalled(asset):
    with open_session(asset) as session:
        drained = 0
        try:
            while drained < 45:
                session.next_frame(timeout=10.0)
                drained += 1
        except EndOfStream:
            pass
        session.seek(0)
        # swap in a source that never returns, then starve the pipeline
        class _Hang:
            def segment(self, file):
                time.sleep(30)
                raise AssertionError("unreachable")

            def manifest(self):
                raise AssertionError("unreachable")

        session.seek(0)
        session._source = _Hang()
        session.seek(0)
        with pytest.raises(Stalled):
            while True:
                session.next_frame(timeout=0.5)


def test_queue_occupancy_bounded(asset):
    with open_session(asset) as session:
        session.next_frame(timeout=10.0)
        time.sleep(0.5)  # let the pipeline fill to its caps
        assert session._fetched_q.qsize() <= 3
        assert session._decoded_q.qsize() <= 2
        assert session._frames_q.qsize() <= 4


def test_throughput_bounded_by_slowest_stage(asset, monkeypatch):
    import splatstream.player as player_mod

    fetch_delay, decode_delay, reconstruct_delay = 0.02, 0.06, 0.002
    real_decode = player_mod.decode_group
    real_unpack = player_mod.unpack_frame

    def slow_decode(enc, entry=None):
        time.sleep(decode_delay)
        return real_decode(enc, entry)

    def slow_unpack(stack, local, frame_index=None):
        time.sleep(reconstruct_delay)
        return real_unpack(stack, local, frame_index=frame_index)

    monkeypatch.setattr(player_mod, "decode_group", slow_decode)
    monkeypatch.setattr(player_mod, "unpack_frame", slow_unpack)

    frames = smooth_motion_sequence(60, 60, seed=1)
    import tempfile

    with tempfile.TemporaryDirectory() as root:
        bake_frames(frames, root, group_size=10)
        with open_session(root) as session:
            real_segment = session._source.segment

            def slow_segment(file):
                if file.endswith("pos_hi.bin"):
                    time.sleep(fetch_delay)
                return real_segment(file)

            session._source.segment = slow_segment
            session.next_frame(timeout=10.0)  # warm the pipeline
            started = time.perf_counter()
            for _ in range(59):
                session.next_frame(timeout=10.0)
            elapsed = time.perf_counter() - started

    # 6 groups: fetch 6*0.02=0.12 s, decode 6*0.06=0.36 s (slowest),
    # reconstruct 60*0.002=0.12 s; concurrent stages must approach the
    # slowest stage, not the sum
    slowest = 6 * decode_delay
    assert elapsed < 1.5 * slowest, elapsed


def test_close_idempotent_and_threads_exit(asset):
    session = open_session(asset)
    session.next_frame(timeout=10.0)
    session.close()
    session.close()
    assert all(not t.is_alive() for t in session._threads)
