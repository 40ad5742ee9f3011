"""Streaming playback pipeline: fetch → decode → reconstruct.

Three worker threads mirror the asset's life cycle — download a group's
segments, entropy-decode them into a plane stack, inverse-quantize planes
into frames — and hand work forward through bounded queues (3 fetched
groups, 2 decoded stacks, 4 reconstructed frames).  The consumer pulls
frames off the end with :meth:`PlaySession.next_frame` (blocking) or
:meth:`PlaySession.try_next_frame` (non-blocking; on starvation it repeats
the last delivered frame and counts a stall instead of blocking a render
loop).

Groups are closed random-access units: a seek lands on the start of the
target frame's group, decodes from there, and drops frames before the
target.  Every queue item carries a generation number; a seek bumps the
generation and flushes the queues, so in-flight work for the old position
is discarded wherever it happens to be.
"""
from __future__ import annotations

import queue
import threading
import time
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urljoin

from .codec import decode_group
from .container import (
    MANIFEST_NAME,
    Manifest,
    assemble_group,
    manifest_from_json,
    read_manifest,
)
from .frames import GaussianFrame
from .packing import unpack_frame

FETCH_QUEUE_GROUPS = 3
DECODE_QUEUE_GROUPS = 2
FRAME_QUEUE_FRAMES = 4

PLAYING = "playing"
PAUSED = "paused"
SEEKING = "seeking"


class EndOfStream(Exception):
    """Raised by next_frame once every frame has been delivered."""


class Stalled(Exception):
    """Raised by next_frame on timeout while the pipeline is behind.

    Distinct from EndOfStream: the stream has more frames, they just are
    not ready yet.
    """


@dataclass
class StageTimings:
    """Accumulated wall-clock time for one pipeline stage."""

    name: str
    total_seconds: float = 0.0
    count: int = 0

    def add(self, seconds: float) -> None:
        self.total_seconds += seconds
        self.count += 1

    @property
    def mean_seconds(self) -> float:
        return self.total_seconds / self.count if self.count else 0.0


class _DirSource:
    """Reads an asset straight from a baked directory."""

    def __init__(self, root: Path):
        self.root = root

    def manifest(self) -> Manifest:
        return read_manifest(self.root)

    def segment(self, file: str) -> bytes:
        return (self.root / file).read_bytes()


class _HttpSource:
    """Reads an asset over HTTP from a segment server."""

    def __init__(self, base_url: str):
        self.base = base_url if base_url.endswith("/") else base_url + "/"

    def _get(self, rel: str) -> bytes:
        with urllib.request.urlopen(urljoin(self.base, rel)) as resp:
            return resp.read()

    def manifest(self) -> Manifest:
        return manifest_from_json(self._get(MANIFEST_NAME).decode("utf-8"))

    def segment(self, file: str) -> bytes:
        return self._get(file)


def _make_source(url: str | Path):
    text = str(url)
    if text.startswith(("http://", "https://")):
        return _HttpSource(text)
    return _DirSource(Path(url))


_EOS = object()  # end-of-schedule marker flowing through the queues


@dataclass
class _Item:
    gen: int
    payload: object  # _EOS, or stage-specific data
    group_index: int = -1
    deliver_from: int = 0


class PlaySession:
    """An open asset plus its running pipeline.

    Create with :meth:`PlaySession.open`; always :meth:`close` (or use as a
    context manager) so the worker threads shut down.
    """

    def __init__(self, source, manifest: Manifest):
        self._source = source
        self.manifest = manifest
        self.state = PAUSED
        self.stalls = 0
        self.stats = {
            "download": StageTimings("download"),
            "decode": StageTimings("decode"),
            "reconstruct": StageTimings("reconstruct"),
        }
        self.fetched_groups: list[int] = []
        self.decoded_groups: list[int] = []

        self._lock = threading.Lock()
        self._wakeup = threading.Condition(self._lock)
        self._closed = False
        self._gen = 0
        self._next_group = 0
        self._deliver_from = 0
        self._cursor = 0
        self._at_end = False
        self._last_frame: GaussianFrame | None = None

        self._fetched_q: queue.Queue[_Item] = queue.Queue(FETCH_QUEUE_GROUPS)
        self._decoded_q: queue.Queue[_Item] = queue.Queue(DECODE_QUEUE_GROUPS)
        self._frames_q: queue.Queue[_Item] = queue.Queue(FRAME_QUEUE_FRAMES)
        self._threads = [
            threading.Thread(target=fn, name=f"player-{nm}", daemon=True)
            for nm, fn in [
                ("fetch", self._fetch_worker),
                ("decode", self._decode_worker),
                ("reconstruct", self._reconstruct_worker),
            ]
        ]
        for t in self._threads:
            t.start()

    # ------------------------------------------------------------------ API

    @classmethod
    def open(cls, url: str | Path) -> "PlaySession":
        """Load the manifest at ``url`` (http(s) or a local directory) and
        start prefetching the first group.  The session starts paused at
        frame 0."""
        source = _make_source(url)
        manifest = source.manifest()
        return cls(source, manifest)

    @property
    def frame_count(self) -> int:
        return self.manifest.frame_count

    @property
    def cursor(self) -> int:
        """Index of the next frame to be delivered."""
        return self._cursor

    def play(self) -> None:
        self.state = PLAYING

    def pause(self) -> None:
        self.state = PAUSED

    def next_frame(self, timeout: float | None = None) -> GaussianFrame:
        """Deliver the next frame in order, blocking until it is ready.

        Raises EndOfStream after the last frame and Stalled if ``timeout``
        seconds pass first.
        """
        if self._at_end:
            raise EndOfStream
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            if self._closed:
                raise RuntimeError("session is closed")
            remaining = None
            if deadline is not None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise Stalled(f"no frame within {timeout} s")
            try:
                item = self._frames_q.get(timeout=min(remaining, 0.1) if remaining is not None else 0.1)
            except queue.Empty:
                continue
            if item.gen != self._gen:
                continue  # pre-seek leftovers
            if item.payload is _EOS:
                self._at_end = True
                raise EndOfStream
            if isinstance(item.payload, Exception):
                raise item.payload
            frame: GaussianFrame = item.payload
            self._last_frame = frame
            self._cursor = frame.frame_index + 1
            return frame

    def try_next_frame(self) -> tuple[GaussianFrame | None, bool]:
        """Non-blocking pull: ``(frame, fresh)``.

        When the pipeline is behind, repeats the last delivered frame with
        ``fresh=False`` and counts a stall, so a render loop never blocks.
        Raises EndOfStream at the end.
        """
        if self._at_end:
            raise EndOfStream
        while True:
            try:
                item = self._frames_q.get_nowait()
            except queue.Empty:
                self.stalls += 1
                return self._last_frame, False
            if item.gen != self._gen:
                continue
            if item.payload is _EOS:
                self._at_end = True
                raise EndOfStream
            if isinstance(item.payload, Exception):
                raise item.payload
            frame: GaussianFrame = item.payload
            self._last_frame = frame
            self._cursor = frame.frame_index + 1
            return frame, True

    def seek(self, frame: int) -> int:
        """Restart delivery at ``frame``.

        Decoding restarts at the start of the frame's group (the only
        random-access points); frames before the target are decoded and
        dropped.  Returns the acknowledged target.
        """
        if not 0 <= frame < self.frame_count:
            raise ValueError(f"seek target {frame} outside [0, {self.frame_count})")
        self.state = SEEKING
        with self._wakeup:
            self._gen += 1
            self._next_group = self.manifest.group_for_frame(frame).index
            self._deliver_from = frame
            self._cursor = frame
            self._at_end = False
            self._last_frame = None
            self._wakeup.notify_all()
        for q in (self._fetched_q, self._decoded_q, self._frames_q):
            while True:
                try:
                    q.get_nowait()
                except queue.Empty:
                    break
        self.state = PAUSED
        return frame

    def close(self) -> None:
        with self._wakeup:
            self._closed = True
            self._wakeup.notify_all()
        for q in (self._fetched_q, self._decoded_q, self._frames_q):
            while True:
                try:
                    q.get_nowait()
                except queue.Empty:
                    break
        for t in self._threads:
            t.join(timeout=5.0)

    def __enter__(self) -> "PlaySession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -------------------------------------------------------------- workers

    def _put(self, q: queue.Queue, item: _Item) -> bool:
        """Offer an item, giving up if the item's generation goes stale or
        the session closes. Returns True when the item was enqueued."""
        while True:
            with self._lock:
                if self._closed or item.gen != self._gen:
                    return False
            try:
                q.put(item, timeout=0.05)
                return True
            except queue.Full:
                continue

    def _fetch_worker(self) -> None:
        while True:
            with self._wakeup:
                if self._closed:
                    return
                gen = self._gen
                g = self._next_group
                deliver_from = self._deliver_from
                if g >= len(self.manifest.groups):
                    # everything scheduled; park until a seek or close
                    self._wakeup.wait(timeout=0.5)
                    continue
            entry = self.manifest.groups[g]
            started = time.perf_counter()
            try:
                segments = {
                    name: self._source.segment(stream.file)
                    for name, stream in entry.streams.items()
                }
                enc = assemble_group(entry, segments)
            except Exception as exc:  # surface on the consumer side
                self._put(self._frames_q, _Item(gen=gen, payload=exc))
                with self._wakeup:
                    # park until a seek retargets us or the session closes
                    while not self._closed and self._gen == gen:
                        self._wakeup.wait(timeout=0.5)
                continue
            elapsed = time.perf_counter() - started
            if self._put(
                self._fetched_q,
                _Item(gen=gen, payload=enc, group_index=g, deliver_from=deliver_from),
            ):
                self.stats["download"].add(elapsed)
                self.fetched_groups.append(g)
                with self._lock:
                    if self._gen == gen:
                        self._next_group = g + 1
                        # only the seek-landing group skips leading frames
                        self._deliver_from = entry.start_frame + entry.num_frames

    def _decode_worker(self) -> None:
        while True:
            try:
                item = self._fetched_q.get(timeout=0.1)
            except queue.Empty:
                with self._lock:
                    if self._closed:
                        return
                continue
            with self._lock:
                if self._closed:
                    return
                if item.gen != self._gen:
                    continue
            entry = self.manifest.groups[item.group_index]
            started = time.perf_counter()
            stack = decode_group(item.payload, entry)
            elapsed = time.perf_counter() - started
            if self._put(
                self._decoded_q,
                _Item(
                    gen=item.gen,
                    payload=stack,
                    group_index=item.group_index,
                    deliver_from=item.deliver_from,
                ),
            ):
                self.stats["decode"].add(elapsed)
                self.decoded_groups.append(item.group_index)

    def _reconstruct_worker(self) -> None:
        while True:
            try:
                item = self._decoded_q.get(timeout=0.1)
            except queue.Empty:
                with self._lock:
                    if self._closed:
                        return
                continue
            with self._lock:
                if self._closed:
                    return
                if item.gen != self._gen:
                    continue
            stack = item.payload
            entry = self.manifest.groups[item.group_index]
            start = entry.start_frame
            for local in range(entry.num_frames):
                frame_index = start + local
                if frame_index < item.deliver_from:
                    continue  # seek landed mid-group: drop leading frames
                started = time.perf_counter()
                frame = unpack_frame(stack, local, frame_index=frame_index)
                elapsed = time.perf_counter() - started
                if not self._put(self._frames_q, _Item(gen=item.gen, payload=frame)):
                    break  # stale generation or closing — abandon the group
                self.stats["reconstruct"].add(elapsed)
            else:
                if item.group_index == len(self.manifest.groups) - 1:
                    self._put(self._frames_q, _Item(gen=item.gen, payload=_EOS))


def open_session(url: str | Path) -> PlaySession:
    """Convenience alias for PlaySession.open."""
    return PlaySession.open(url)
