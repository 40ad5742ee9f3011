/** Shared test plumbing: fixture paths, a file-backed Source, and the
 * reference reconstructions exported by the Python toolchain.
 *
 * Fixtures are generated by `npm run fixtures` (which needs the Python
 * package installed); helpers fail with that hint when they are absent.
 */

import { readFileSync } from "node:fs";
import { readFile } from "node:fs/promises";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { decodeGroup, type DecodedGroup } from "../src/codec.js";
import { parseManifest, type GroupEntry, type Manifest } from "../src/manifest.js";
import {
  WorkerBackend,
  WorkerPipeline,
  type FromWorker,
  type ToWorker,
} from "../src/protocol.js";
import type { Source } from "../src/source.js";

export const FIXTURES = fileURLToPath(new URL("../fixtures/", import.meta.url));

export function fixturePath(...parts: string[]): string {
  return path.join(FIXTURES, ...parts);
}

function readBytes(file: string): Uint8Array {
  let buf: Buffer;
  try {
    buf = readFileSync(file);
  } catch {
    throw new Error(`missing fixture ${file}; run \`npm run fixtures\` first`);
  }
  // copy out of Node's buffer pool so typed-array views start at offset 0
  return new Uint8Array(buf);
}

export function readFixtureText(...parts: string[]): string {
  return new TextDecoder().decode(readBytes(fixturePath(...parts)));
}

export function loadManifest(asset: string): Manifest {
  return parseManifest(readFixtureText(asset, "manifest.json"));
}

/** A Source over a baked asset directory, with an optional per-segment
 * hook so tests can inject delays and failures. */
export class FileSource implements Source {
  constructor(
    readonly dir: string,
    readonly onSegment: ((file: string) => Promise<void>) | null = null,
  ) {}

  async manifest(): Promise<string> {
    return readFile(path.join(this.dir, "manifest.json"), "utf8");
  }

  async segment(file: string): Promise<Uint8Array> {
    if (this.onSegment !== null) await this.onSegment(file);
    return new Uint8Array(await readFile(path.join(this.dir, file)));
  }
}

export function assetSource(asset: string): FileSource {
  return new FileSource(fixturePath(asset));
}

export async function decodeFixtureGroup(asset: string, index: number): Promise<DecodedGroup> {
  const manifest = loadManifest(asset);
  const entry = manifest.groups[index];
  const source = assetSource(asset);
  const segments: Record<string, Uint8Array> = {};
  for (const [name, s] of Object.entries(entry.streams)) {
    segments[name] = await source.segment(s.file);
  }
  return decodeGroup(entry, segments);
}

export interface ExpectedFrame {
  count: number;
  shChannels: number;
  positions: Float64Array;
  rotations: Float64Array;
  logScales: Float64Array;
  opacities: Float64Array;
  colors: Float64Array;
  sh: Float64Array;
}

function f64(file: string): Float64Array {
  const bytes = readBytes(file);
  return new Float64Array(bytes.buffer, 0, bytes.byteLength / 8);
}

/** The toolchain-side reconstruction of one frame (little-endian f64). */
export function readExpectedFrame(asset: string, frame: number): ExpectedFrame {
  const dir = fixturePath("expected", asset, `frame_${String(frame).padStart(4, "0")}`);
  const meta = JSON.parse(new TextDecoder().decode(readBytes(path.join(dir, "meta.json")))) as {
    count: number;
    shChannels: number;
  };
  return {
    count: meta.count,
    shChannels: meta.shChannels,
    positions: f64(path.join(dir, "positions.f64")),
    rotations: f64(path.join(dir, "rotations.f64")),
    logScales: f64(path.join(dir, "log_scales.f64")),
    opacities: f64(path.join(dir, "opacities.f64")),
    colors: f64(path.join(dir, "colors.f64")),
    sh: f64(path.join(dir, "sh.f64")),
  };
}

export interface CodecCase {
  numFrames: number;
  side: number;
  encoded: Uint8Array;
  raw: Uint8Array;
}

export function readCodecCase(): CodecCase {
  const text = readFixtureText("codec_case.json");
  const json = JSON.parse(text) as {
    num_frames: number;
    side: number;
    encoded: string;
    raw: string;
  };
  return {
    numFrames: json.num_frames,
    side: json.side,
    encoded: new Uint8Array(Buffer.from(json.encoded, "base64")),
    raw: new Uint8Array(Buffer.from(json.raw, "base64")),
  };
}

/** Largest |a - b| over the arrays (lengths must match). */
export function maxAbsDiff(a: ArrayLike<number>, b: ArrayLike<number>): number {
  if (a.length !== b.length) {
    throw new Error(`length mismatch: ${a.length} vs ${b.length}`);
  }
  let worst = 0;
  for (let i = 0; i < a.length; i++) {
    const d = Math.abs(a[i] - b[i]);
    if (d > worst) worst = d;
  }
  return worst;
}

/** Largest |a - b| per interleaved channel. */
export function perChannelMaxDiff(
  a: ArrayLike<number>,
  b: ArrayLike<number>,
  channels: number,
): number[] {
  if (a.length !== b.length) {
    throw new Error(`length mismatch: ${a.length} vs ${b.length}`);
  }
  const worst = new Array<number>(channels).fill(0);
  for (let i = 0; i < a.length; i++) {
    const c = i % channels;
    const d = Math.abs(a[i] - b[i]);
    if (d > worst[c]) worst[c] = d;
  }
  return worst;
}

/** A group entry by absolute frame index (test-side convenience). */
export function entryForFrame(manifest: Manifest, frame: number): GroupEntry {
  const entry = manifest.groups.find(
    (g) => g.startFrame <= frame && frame < g.startFrame + g.numFrames,
  );
  if (entry === undefined) throw new Error(`no group covers frame ${frame}`);
  return entry;
}

export function sleep(ms: number): Promise<void> {
  return new Promise((r) => setTimeout(r, ms));
}

export interface LoopbackTaps {
  toWorker?: (msg: ToWorker) => void;
  fromWorker?: (msg: FromWorker) => void;
}

/** The worker protocol halves wired back-to-back over microtask hops —
 * the real message flow, no Worker construction required. */
export function loopback(
  makeSource: (url: string) => Source,
  taps: LoopbackTaps = {},
): WorkerPipeline {
  let backend: WorkerBackend | null = null;
  const client = new WorkerPipeline((msg) => {
    taps.toWorker?.(msg);
    queueMicrotask(() => void backend?.handle(msg));
  });
  backend = new WorkerBackend((msg) => {
    taps.fromWorker?.(msg);
    queueMicrotask(() => client.handleMessage(msg));
  }, makeSource);
  return client;
}

/** A manually resolvable gate for stall/failure injection. */
export class Gate {
  private open = false;
  private waiters: Array<() => void> = [];

  release(): void {
    this.open = true;
    for (const w of this.waiters.splice(0)) w();
  }

  wait(): Promise<void> {
    if (this.open) return Promise.resolve();
    return new Promise((r) => this.waiters.push(r));
  }
}
