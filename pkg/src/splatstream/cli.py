"""Command line entry points tying the pipeline together.

Subcommands::

    splatstream bake IN_DIR OUT_DIR     bake splat frames into a streamable asset
    splatstream play URL_OR_DIR         play an asset; --offline-out renders PNGs
    splatstream rd-sweep IN_DIR         rate-distortion sweep, CSV output
    splatstream serve                   static HTTP server for a baked asset
    splatstream fit-motion PREV CUR     fit a deformation field between two clouds
    splatstream losses PREV CUR         dump regularizer values/gradients

Flags may also come from a JSON file via ``--config``; explicit command
line flags win over config values, which win over built-in defaults.
Exit codes: 0 success, 2 usage error, 1 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import motion as motion_mod
from .bake import bake_directory, find_frame_files
from .camera import load_camera, make_camera
from .player import EndOfStream, PlaySession
from .quantize import QuantRange
from .regularizers import EntropyModel, entropy_loss, residual_quantize, temporal_loss
from .render import psnr, render
from .server import ServeConfig, serve
from .splatio import load_frame, save_frame
from .sweeps import rate_distortion_sweep, write_rd_csv


class UsageError(Exception):
    """Bad invocation that argparse could not catch itself."""


# ----------------------------------------------------------------- plumbing

# defaults per subcommand; the parser itself uses SUPPRESS so that values
# merge as: defaults < config file < explicit flags
_DEFAULTS: dict[str, dict[str, object]] = {
    "bake": {
        "group_size": 20,
        "sh_degree": 0,
        "prune_ratio": 0.3,
        "target_count": 100_000,
        "qp": None,
        "backend": "lossless-internal",
    },
    "play": {
        "camera": None,
        "fps": 30.0,
        "offline_out": None,
    },
    "rd-sweep": {
        "qps": (),
        "out": "rd.csv",
        "camera": None,
        "group_size": 20,
        "sh_degree": 0,
    },
    "serve": {
        "root": ".",
        "addr": "127.0.0.1:8080",
        "cors": "*",
        "cache_seconds": 3600,
    },
    "fit-motion": {
        "out_cloud": "warped.npz",
        "out_checkpoint": "motion.gvmf",
        "iters": 500,
        "seed": 0,
        "levels": 16,
        "features": 4,
        "table_size": 1 << 19,
        "base_resolution": 16,
        "max_resolution": 512,
        "lr_tables": 1e-2,
        "lr_mlp": 1e-3,
    },
    "losses": {
        "out": None,
        "bits": 8,
        "noise": False,
        "noise_seed": 0,
    },
}


def _resolve(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags, unknown config keys rejected."""
    defaults = _DEFAULTS[args.command]
    opts = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path is not None:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except FileNotFoundError:
            raise UsageError(f"config file not found: {config_path}")
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {config_path} is not valid JSON: {exc}")
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in loaded.items():
            dest = key.replace("-", "_")
            if dest not in defaults:
                raise UsageError(
                    f"unknown config key {key!r} for {args.command!r}"
                )
            opts[dest] = value
    for key, value in vars(args).items():
        if key in ("command", "func", "config"):
            continue
        opts[key] = value  # positionals + explicitly given flags only
    return opts


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splatstream",
        description="Bake, serve and play Gaussian-splat video assets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    p = sub.add_parser("bake", help="bake a directory of splat frames")
    p.add_argument("input_dir")
    p.add_argument("output_dir")
    p.add_argument("--config", default=None, help="JSON file with flag values")
    p.add_argument("--group-size", type=int, default=S)
    p.add_argument("--sh-degree", type=int, default=S)
    p.add_argument("--prune-ratio", type=float, default=S)
    p.add_argument("--target-count", type=int, default=S)
    p.add_argument("--qp", type=int, default=S, help="use the external H.264 encoder at this QP")
    p.add_argument("--backend", choices=["lossless-internal", "h264-external"], default=S)
    p.set_defaults(func=cmd_bake)

    p = sub.add_parser("play", help="play a baked asset (directory or URL)")
    p.add_argument("url")
    p.add_argument("--config", default=None)
    p.add_argument("--camera", default=S, help="camera text file (default: a fixed front view)")
    p.add_argument("--fps", type=float, default=S)
    p.add_argument("--offline-out", default=S, help="write one PNG per frame to this directory")
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("rd-sweep", help="rate-distortion sweep over QPs")
    p.add_argument("input_dir")
    p.add_argument("--config", default=None)
    p.add_argument("--qps", type=int, nargs="*", default=S)
    p.add_argument("--out", default=S)
    p.add_argument("--camera", default=S)
    p.add_argument("--group-size", type=int, default=S)
    p.add_argument("--sh-degree", type=int, default=S)
    p.set_defaults(func=cmd_rd_sweep)

    p = sub.add_parser("serve", help="serve a baked asset over HTTP")
    p.add_argument("--config", default=None)
    p.add_argument("--root", default=S)
    p.add_argument("--addr", default=S, help="host:port (port 0 = ephemeral)")
    p.add_argument("--cors", default=S, help="comma-separated allowed origins, or *")
    p.add_argument("--cache-seconds", type=int, default=S)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("fit-motion", help="fit a deformation field between two clouds")
    p.add_argument("prev")
    p.add_argument("cur")
    p.add_argument("--config", default=None)
    p.add_argument("--out-cloud", default=S)
    p.add_argument("--out-checkpoint", default=S)
    p.add_argument("--iters", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--levels", type=int, default=S)
    p.add_argument("--features", type=int, default=S)
    p.add_argument("--table-size", type=int, default=S)
    p.add_argument("--base-resolution", type=int, default=S)
    p.add_argument("--max-resolution", type=int, default=S)
    p.add_argument("--lr-tables", type=float, default=S)
    p.add_argument("--lr-mlp", type=float, default=S)
    p.set_defaults(func=cmd_fit_motion)

    p = sub.add_parser("losses", help="dump regularizer values/gradients for two frames")
    p.add_argument("prev")
    p.add_argument("cur")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=S, help="write gradient arrays to this .npz")
    p.add_argument("--bits", type=int, default=S)
    p.add_argument("--noise", action="store_true", default=S)
    p.add_argument("--noise-seed", type=int, default=S)
    p.set_defaults(func=cmd_losses)

    return parser


# -------------------------------------------------------------- subcommands

def cmd_bake(opts: dict) -> int:
    from .codec import CodecConfig

    if opts["backend"] == "h264-external":
        codec = CodecConfig(backend="h264-external", base_qp=opts["qp"] if opts["qp"] is not None else 22)
    elif opts["qp"] is not None:
        codec = CodecConfig(backend="h264-external", base_qp=opts["qp"])
    else:
        codec = CodecConfig()
    manifest, report = bake_directory(
        opts["input_dir"],
        opts["output_dir"],
        group_size=opts["group_size"],
        codec=codec,
        prune_ratio=opts["prune_ratio"],
        target_count=opts["target_count"],
    )
    print(report.summary())
    return 0


def _load_or_default_camera(path) -> object:
    if path is None:
        return make_camera(eye=(0.0, 0.0, -3.0), target=(0.0, 0.0, 0.0))
    return load_camera(path)


def _print_timing_table(session: PlaySession) -> None:
    print(f"{'stage':<12}{'calls':>8}{'total_ms':>12}{'mean_ms':>10}")
    for name in ("download", "decode", "reconstruct"):
        st = session.stats[name]
        print(
            f"{name:<12}{st.count:>8}{st.total_seconds * 1e3:>12.1f}"
            f"{st.mean_seconds * 1e3:>10.2f}"
        )


def cmd_play(opts: dict) -> int:
    camera = _load_or_default_camera(opts["camera"])
    out_dir = opts["offline_out"]
    with PlaySession.open(opts["url"]) as session:
        session.play()
        if out_dir is not None:
            from PIL import Image

            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            written = 0
            while True:
                try:
                    frame = session.next_frame(timeout=60.0)
                except EndOfStream:
                    break
                img = render(frame, camera)
                data = np.clip(img.rgb * 255.0, 0, 255).round().astype(np.uint8)
                Image.fromarray(data).save(out / f"frame_{frame.frame_index:04d}.png")
                written += 1
            print(f"wrote {written} frames to {out}")
        else:
            period = 1.0 / opts["fps"] if opts["fps"] > 0 else 0.0
            delivered = 0
            while True:
                tick = time.monotonic()
                try:
                    frame, fresh = session.try_next_frame()
                except EndOfStream:
                    break
                if fresh:
                    delivered += 1
                sleep_for = period - (time.monotonic() - tick)
                if sleep_for > 0:
                    time.sleep(sleep_for)
            print(f"delivered {delivered} frames, {session.stalls} stalls")
        _print_timing_table(session)
    return 0


def cmd_rd_sweep(opts: dict) -> int:
    files = find_frame_files(opts["input_dir"])
    frames = [load_frame(p, frame_index=i) for i, p in enumerate(files)]
    camera = _load_or_default_camera(opts["camera"])
    rows = rate_distortion_sweep(
        frames,
        qps=tuple(opts["qps"]),
        cameras=[camera],
        group_size=opts["group_size"],
        sh_degree=opts["sh_degree"],
    )
    write_rd_csv(rows, opts["out"])
    for row in rows:
        print(f"qp={row.qp} {row.kb_per_frame:.3f} KiB/frame {row.psnr_db:.3f} dB")
    return 0


def cmd_serve(opts: dict) -> int:
    host, _, port_s = opts["addr"].rpartition(":")
    if not host or not port_s.isdigit():
        raise UsageError(f"--addr must be host:port, got {opts['addr']!r}")
    origins = tuple(s.strip() for s in str(opts["cors"]).split(",") if s.strip())
    cfg = ServeConfig(
        root=opts["root"],
        host=host,
        port=int(port_s),
        cache_seconds=opts["cache_seconds"],
        cors_origins=origins or ("*",),
    )
    with serve(cfg) as srv:
        print(f"serving {cfg.root} at {srv.url}")
        try:
            while True:
                time.sleep(3600.0)
        except KeyboardInterrupt:
            pass
    return 0


def cmd_fit_motion(opts: dict) -> int:
    prev = load_frame(opts["prev"])
    cur = load_frame(opts["cur"])
    cfg = motion_mod.HashGridConfig(
        levels=opts["levels"],
        features=opts["features"],
        table_size=opts["table_size"],
        base_resolution=opts["base_resolution"],
        max_resolution=opts["max_resolution"],
    )
    if prev.splat_count == cur.splat_count:
        objective = motion_mod.supervised_l2_objective(cur.positions)
        kind = "supervised-l2"
    else:
        objective = motion_mod.chamfer_objective(cur.positions)
        kind = "chamfer"
    started = time.perf_counter()
    field = motion_mod.fit_motion(
        prev.positions,
        objective,
        cfg=cfg,
        iters=opts["iters"],
        lr_tables=opts["lr_tables"],
        lr_mlp=opts["lr_mlp"],
        seed=opts["seed"],
    )
    elapsed = time.perf_counter() - started
    delta = motion_mod.predict_delta(prev.positions, field)
    warped = replace(prev, positions=prev.positions + delta, bbox=None)
    save_frame(warped, opts["out_cloud"])
    motion_mod.save_motion_field(field, opts["out_checkpoint"])
    residual = float(np.mean(np.linalg.norm(prev.positions + delta - cur.positions, axis=1))) if kind == "supervised-l2" else motion_mod.chamfer_distance(prev.positions + delta, cur.positions)
    print(
        f"{kind}: {opts['iters']} iterations in {elapsed:.2f} s, "
        f"mean residual {residual:.6f}"
    )
    print(f"warped cloud -> {opts['out_cloud']}")
    print(f"checkpoint   -> {opts['out_checkpoint']}")
    return 0


def _frame_values(frame) -> dict[str, np.ndarray]:
    """Per-splat attribute arrays, (N, C) each."""
    values = {
        "rotation": frame.rotations,
        "scale": frame.log_scales,
        "opacity": frame.opacities[:, None],
        "color": frame.colors,
    }
    if frame.sh.shape[1]:
        values["sh"] = frame.sh
    return values


def _frame_planes(frame) -> dict[str, np.ndarray]:
    """Attribute values arranged as (C, side, side) packed planes.

    Splats stay in file order (both frames share it), channels are padded
    with zeros out to the square plane — padding cancels in frame-to-frame
    differences."""
    from .packing import plane_side

    values = _frame_values(frame)
    side = plane_side(frame.splat_count)
    planes = {}
    for name, arr in values.items():
        flat = np.zeros((arr.shape[1], side * side))
        flat[:, : arr.shape[0]] = arr.T
        planes[name] = flat.reshape(arr.shape[1], side, side)
    return planes


def cmd_losses(opts: dict) -> int:
    prev = load_frame(opts["prev"])
    cur = load_frame(opts["cur"])
    if prev.splat_count != cur.splat_count:
        raise UsageError(
            f"frames hold {prev.splat_count} vs {cur.splat_count} splats; "
            "losses need per-splat correspondence"
        )
    planes_prev = _frame_planes(prev)
    planes_cur = _frame_planes(cur)
    t_value, t_grads = temporal_loss(planes_cur, planes_prev)

    raw_prev = _frame_values(prev)
    raw_cur = _frame_values(cur)
    mu = {name: 0.0 for name in raw_cur}
    sigma = {name: 1.0 for name in raw_cur}
    q = {}
    yhat = {}
    for name, y_t in raw_cur.items():
        delta = y_t - raw_prev[name]
        qrange = QuantRange([float(delta.min())], [float(delta.max())], bits=opts["bits"])
        batch = residual_quantize(
            y_t.reshape(-1, 1),
            raw_prev[name].reshape(-1, 1),
            qrange,
            noise=opts["noise"],
            seed=opts["noise_seed"],
        )
        yhat[name] = batch.yhat
        q[name] = qrange.levels
    model = EntropyModel(mu=mu, sigma=sigma, q=q)
    result = entropy_loss(yhat, model)

    report = {
        "temporal_l1": t_value,
        "entropy_bits": result.bits,
        "entropy_grad_mu": result.grad_mu,
        "entropy_grad_sigma": result.grad_sigma,
        "attributes": sorted(planes_cur),
        "elements": result.count,
        "noise": bool(opts["noise"]),
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    if opts["out"] is not None:
        arrays = {}
        for name in planes_cur:
            arrays[f"temporal_grad_{name}"] = t_grads[name]
            arrays[f"entropy_grad_yhat_{name}"] = result.grad_yhat[name]
        np.savez(opts["out"], **arrays)
        print(f"gradients -> {opts['out']}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------- main

def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        opts = _resolve(args)
        return args.func(opts)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # uniform runtime failure contract
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
