"""Static HTTP server for baked assets.

Serves exactly two kinds of resources out of an asset directory:

* ``/manifest.json`` — the asset manifest;
* ``/groups/{i}/{attr}.bin`` — one attribute segment of one group (the
  on-disk ``group_0000/...`` relative paths from the manifest are accepted
  as aliases).

Segments are group-granular, so ordinary range-capable HTTP/1.1 is all a
player needs for random access; there is no custom protocol.  The whole
asset is loaded into an immutable in-memory index at startup — request
handling touches no shared mutable state, responses for identical requests
are identical bytes, and ETags are strong content hashes.
"""
from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import urlsplit

from .container import Manifest, group_dir_name, manifest_to_json, read_manifest

MANIFEST_PATH = "/manifest.json"
_SEGMENT_RE = re.compile(r"^/groups/(\d+)/([A-Za-z0-9_]+\.bin)$")


@dataclass(frozen=True)
class ServeConfig:
    """Where to serve from and how."""

    root: str | Path
    host: str = "127.0.0.1"
    port: int = 0  # 0 binds an ephemeral port
    cache_seconds: int = 3600
    cors_origins: tuple[str, ...] = ("*",)

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))
        if self.cache_seconds < 0:
            raise ValueError("cache_seconds must be >= 0")


@dataclass(frozen=True)
class ContentEntry:
    """One servable resource, fully materialized."""

    data: bytes
    content_type: str
    etag: str


def _entry(data: bytes, content_type: str) -> ContentEntry:
    digest = hashlib.sha256(data).hexdigest()
    return ContentEntry(data=data, content_type=content_type, etag=f'"{digest}"')


@dataclass(frozen=True)
class ContentIndex:
    """Immutable path → resource map built once at startup."""

    manifest: Manifest
    entries: dict[str, ContentEntry] = field(default_factory=dict)

    def lookup(self, path: str) -> ContentEntry | None:
        return self.entries.get(path)


def build_content_index(root: str | Path) -> ContentIndex:
    """Load the manifest and every segment it names into memory.

    Raises if the manifest is missing/invalid or any segment's on-disk size
    does not match its declared byte length — better to fail at startup
    than to serve a truncated stream.
    """
    root = Path(root)
    manifest = read_manifest(root)
    entries: dict[str, ContentEntry] = {
        MANIFEST_PATH: _entry(
            manifest_to_json(manifest).encode("utf-8"), "application/json"
        )
    }
    for group in manifest.groups:
        for name, stream in group.streams.items():
            data = (root / stream.file).read_bytes()
            if len(data) != stream.byte_length:
                raise ValueError(
                    f"{stream.file}: {len(data)} bytes on disk, "
                    f"manifest declares {stream.byte_length}"
                )
            entry = _entry(data, "application/octet-stream")
            entries[f"/groups/{group.index}/{name}.bin"] = entry
            entries[f"/{group_dir_name(group.index)}/{name}.bin"] = entry
    return ContentIndex(manifest=manifest, entries=entries)


def _parse_range(header: str, total: int) -> tuple[int, int] | None:
    """First satisfiable single byte range as (start, end) inclusive.

    Returns None for anything we choose to ignore (multiple ranges, other
    units, malformed) — the caller then responds with the full body, which
    is always a correct fallback.  Raises ValueError for a syntactically
    valid but unsatisfiable range.
    """
    if not header.startswith("bytes="):
        return None
    spec = header[len("bytes=") :]
    if "," in spec or "/" in spec:
        return None
    start_s, dash, end_s = spec.partition("-")
    start_s, end_s = start_s.strip(), end_s.strip()
    if not dash or not (start_s or end_s):
        return None

    if start_s == "":  # suffix form: last N bytes
        if not end_s.isdigit():
            return None
        n = int(end_s)
        if n == 0 or total == 0:
            raise ValueError("unsatisfiable range")
        return max(total - n, 0), total - 1

    if not start_s.isdigit() or (end_s and not end_s.isdigit()):
        return None
    start = int(start_s)
    end = int(end_s) if end_s else total - 1
    if start >= total or end < start:
        raise ValueError("unsatisfiable range")
    return start, min(end, total - 1)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "splatstream"

    # set by serve() on the subclass
    index: ContentIndex
    cache_seconds: int = 3600
    cors_origins: tuple[str, ...] = ("*",)

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _cors_header(self) -> str | None:
        if "*" in self.cors_origins:
            return "*"
        origin = self.headers.get("Origin")
        if origin and origin in self.cors_origins:
            return origin
        return None

    def _common_headers(self, entry: ContentEntry) -> None:
        self.send_header("ETag", entry.etag)
        self.send_header("Accept-Ranges", "bytes")
        if self.cache_seconds:
            self.send_header("Cache-Control", f"public, max-age={self.cache_seconds}")
        else:
            self.send_header("Cache-Control", "no-cache")
        cors = self._cors_header()
        if cors is not None:
            self.send_header("Access-Control-Allow-Origin", cors)
            self.send_header("Access-Control-Expose-Headers", "ETag, Content-Range")
            if cors != "*":
                self.send_header("Vary", "Origin")

    def _respond(self, include_body: bool) -> None:
        entry = self.index.lookup(urlsplit(self.path).path)
        if entry is None:
            body = b"not found\n"
            self.send_response(404)
            self.send_header("Content-Type", "text/plain")
            self.send_header("Content-Length", str(len(body)))
            cors = self._cors_header()
            if cors is not None:
                self.send_header("Access-Control-Allow-Origin", cors)
            self.end_headers()
            if include_body:
                self.wfile.write(body)
            return

        if self.headers.get("If-None-Match") in (entry.etag, "*"):
            self.send_response(304)
            self.send_header("ETag", entry.etag)
            self.end_headers()
            return

        total = len(entry.data)
        range_header = self.headers.get("Range")
        window = None
        if range_header is not None:
            try:
                window = _parse_range(range_header, total)
            except ValueError:
                self.send_response(416)
                self.send_header("Content-Range", f"bytes */{total}")
                self.send_header("Content-Length", "0")
                self.end_headers()
                return

        if window is None:
            payload = entry.data
            self.send_response(200)
        else:
            start, end = window
            payload = entry.data[start : end + 1]
            self.send_response(206)
            self.send_header("Content-Range", f"bytes {start}-{end}/{total}")
        self.send_header("Content-Type", entry.content_type)
        self.send_header("Content-Length", str(len(payload)))
        self._common_headers(entry)
        self.end_headers()
        if include_body:
            self.wfile.write(payload)

    def do_GET(self):
        self._respond(include_body=True)

    def do_HEAD(self):
        self._respond(include_body=False)

    def do_OPTIONS(self):
        self.send_response(204)
        cors = self._cors_header()
        if cors is not None:
            self.send_header("Access-Control-Allow-Origin", cors)
            self.send_header("Access-Control-Allow-Methods", "GET, HEAD, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Range, If-None-Match")
            if cors != "*":
                self.send_header("Vary", "Origin")
        self.send_header("Content-Length", "0")
        self.end_headers()


class RunningServer:
    """A bound, serving HTTP server on its own daemon thread."""

    def __init__(self, httpd: ThreadingHTTPServer, index: ContentIndex):
        self._httpd = httpd
        self.index = index
        self._thread = threading.Thread(
            target=httpd.serve_forever, name="splatstream-server", daemon=True
        )
        self._thread.start()

    @property
    def host(self) -> str:
        return self._httpd.server_address[0]

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5.0)

    def __enter__(self) -> "RunningServer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def serve(cfg: ServeConfig) -> RunningServer:
    """Index the asset under ``cfg.root`` and start serving it.

    Returns a running server whose ``url`` is ready for requests; ``close()``
    (or use as a context manager) stops it.  Raises on bind failure or an
    unreadable asset.
    """
    index = build_content_index(cfg.root)
    handler = type(
        "_BoundHandler",
        (_Handler,),
        {
            "index": index,
            "cache_seconds": cfg.cache_seconds,
            "cors_origins": tuple(cfg.cors_origins),
        },
    )
    httpd = ThreadingHTTPServer((cfg.host, cfg.port), handler)
    httpd.daemon_threads = True
    return RunningServer(httpd, index)
