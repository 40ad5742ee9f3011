"""
Serve an asset over HTTP and stream it back
===========================================

The server side is deliberately boring: segments are static files, so a
range-capable HTTP/1.1 server with strong ETags is the whole protocol.
The player is where the structure lives — three workers (fetch, decode,
reconstruct) push work through bounded queues, and the consumer pulls
finished frames off the end.
"""

from pathlib import Path

from splatstream import PlaySession, ServeConfig, bake_frames, serve
from splatstream.player import EndOfStream
from splatstream.synthetic import smooth_motion_sequence

root = Path(__file__).parent / "output" / "streamed"
bake_frames(smooth_motion_sequence(1500, 50, seed=1), root, group_size=20)

with serve(ServeConfig(root=root)) as srv:
    print(f"serving at {srv.url}")

    with PlaySession.open(srv.url) as session:
        print(f"{session.frame_count} frames in {len(session.manifest.groups)} groups")

        # Pull the first ten frames in order.
        for _ in range(10):
            frame = session.next_frame(timeout=10.0)
            print(f"  frame {frame.frame_index:2d}: {frame.splat_count} splats")

        # Seeking lands on the start of the target's group (the only
        # random-access points) and fast-forwards internally, so frame 33
        # costs decoding its group from frame 20.
        session.seek(33)
        frame = session.next_frame(timeout=10.0)
        print(f"after seek(33): delivered frame {frame.frame_index}")
        print(f"groups decoded so far: {session.decoded_groups}")

        # Drain to the end; the session signals end-of-stream distinctly
        # from a mere stall.
        delivered = 0
        while True:
            try:
                session.next_frame(timeout=10.0)
                delivered += 1
            except EndOfStream:
                break
        print(f"drained {delivered} more frames, {session.stalls} stalls")

        print("\nper-stage timings:")
        for name, st in session.stats.items():
            print(
                f"  {name:>11}: {st.count:3d} calls, "
                f"mean {st.mean_seconds * 1e3:6.2f} ms"
            )
