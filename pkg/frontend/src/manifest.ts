/** Manifest schema for a baked Gaussian-video asset.
 *
 * The manifest is the only metadata the viewer ever sees; everything else
 * is raw segment bytes fetched by the relative paths it lists.
 */

export const MANIFEST_VERSION = "gvv/1";
export const MANIFEST_NAME = "manifest.json";

export interface QuantRange {
  bits: number;
  mins: number[];
  maxs: number[];
}

export interface StreamEntry {
  codec: string; // "deflate-delta" | "h264"
  qp: number | null;
  lossless: boolean;
  file: string; // path relative to the asset root, e.g. group_0000/color.bin
  byteLength: number;
  channelByteLengths: number[];
  channels: number;
}

export interface GroupEntry {
  index: number;
  startFrame: number;
  numFrames: number;
  splatCount: number;
  side: number;
  shDegree: number;
  quant: Record<string, QuantRange>;
  streams: Record<string, StreamEntry>;
}

export interface Manifest {
  version: string;
  frameCount: number;
  groupSize: number;
  groups: GroupEntry[];
}

export class ManifestError extends Error {}

function asObject(v: unknown, what: string): Record<string, unknown> {
  if (typeof v !== "object" || v === null || Array.isArray(v)) {
    throw new ManifestError(`${what} must be an object`);
  }
  return v as Record<string, unknown>;
}

function asInt(v: unknown, what: string): number {
  if (typeof v !== "number" || !Number.isInteger(v)) {
    throw new ManifestError(`${what} must be an integer, got ${JSON.stringify(v)}`);
  }
  return v;
}

function asNumberArray(v: unknown, what: string): number[] {
  if (!Array.isArray(v) || v.some((x) => typeof x !== "number" || !Number.isFinite(x))) {
    throw new ManifestError(`${what} must be an array of finite numbers`);
  }
  return v as number[];
}

function parseQuant(v: unknown, what: string): QuantRange {
  const o = asObject(v, what);
  const bits = asInt(o.bits, `${what}.bits`);
  if (bits !== 8 && bits !== 16) throw new ManifestError(`${what}.bits must be 8 or 16`);
  const mins = asNumberArray(o.mins, `${what}.mins`);
  const maxs = asNumberArray(o.maxs, `${what}.maxs`);
  if (mins.length !== maxs.length || mins.length === 0) {
    throw new ManifestError(`${what}: mins/maxs length mismatch`);
  }
  for (let i = 0; i < mins.length; i++) {
    if (maxs[i] < mins[i]) throw new ManifestError(`${what}: max < min on channel ${i}`);
  }
  return { bits, mins, maxs };
}

function parseStream(v: unknown, what: string): StreamEntry {
  const o = asObject(v, what);
  if (typeof o.codec !== "string") throw new ManifestError(`${what}.codec must be a string`);
  if (typeof o.file !== "string" || o.file.length === 0) {
    throw new ManifestError(`${what}.file must be a non-empty string`);
  }
  if (o.file.startsWith("/") || o.file.split("/").includes("..")) {
    throw new ManifestError(`${what}.file must be a relative path inside the asset`);
  }
  const byteLength = asInt(o.byte_length, `${what}.byte_length`);
  const channelByteLengths = asNumberArray(
    o.channel_byte_lengths,
    `${what}.channel_byte_lengths`,
  );
  const channels = asInt(o.channels, `${what}.channels`);
  if (channelByteLengths.length !== channels) {
    throw new ManifestError(`${what}: channel_byte_lengths length != channels`);
  }
  const sum = channelByteLengths.reduce((a, b) => a + b, 0);
  if (sum !== byteLength) {
    throw new ManifestError(`${what}: channel byte lengths sum to ${sum}, not ${byteLength}`);
  }
  return {
    codec: o.codec,
    qp: o.qp === null || o.qp === undefined ? null : asInt(o.qp, `${what}.qp`),
    lossless: Boolean(o.lossless),
    file: o.file,
    byteLength,
    channelByteLengths,
    channels,
  };
}

function parseGroup(v: unknown, what: string): GroupEntry {
  const o = asObject(v, what);
  const g: GroupEntry = {
    index: asInt(o.index, `${what}.index`),
    startFrame: asInt(o.start_frame, `${what}.start_frame`),
    numFrames: asInt(o.num_frames, `${what}.num_frames`),
    splatCount: asInt(o.splat_count, `${what}.splat_count`),
    side: asInt(o.side, `${what}.side`),
    shDegree: asInt(o.sh_degree, `${what}.sh_degree`),
    quant: {},
    streams: {},
  };
  if (g.numFrames < 1) throw new ManifestError(`${what}: num_frames must be >= 1`);
  if (g.splatCount < 1) throw new ManifestError(`${what}: splat_count must be >= 1`);
  if (g.side < 1 || g.side * g.side < g.splatCount) {
    throw new ManifestError(`${what}: side^2 must cover splat_count`);
  }
  const quant = asObject(o.quant, `${what}.quant`);
  for (const [name, q] of Object.entries(quant)) {
    g.quant[name] = parseQuant(q, `${what}.quant.${name}`);
  }
  const streams = asObject(o.streams, `${what}.streams`);
  for (const [name, s] of Object.entries(streams)) {
    g.streams[name] = parseStream(s, `${what}.streams.${name}`);
  }
  if (Object.keys(g.streams).length === 0) {
    throw new ManifestError(`${what}: group has no streams`);
  }
  return g;
}

/** Parse + validate manifest JSON. Throws ManifestError on anything off. */
export function parseManifest(text: string): Manifest {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (e) {
    throw new ManifestError(`manifest is not valid JSON: ${(e as Error).message}`);
  }
  const o = asObject(doc, "manifest");
  if (o.version !== MANIFEST_VERSION) {
    throw new ManifestError(
      `manifest version ${JSON.stringify(o.version)}, expected "${MANIFEST_VERSION}"`,
    );
  }
  const frameCount = asInt(o.frame_count, "frame_count");
  const groupSize = asInt(o.group_size, "group_size");
  if (frameCount < 1) throw new ManifestError(`frame_count must be >= 1, got ${frameCount}`);
  if (groupSize < 1) throw new ManifestError(`group_size must be >= 1, got ${groupSize}`);
  if (!Array.isArray(o.groups) || o.groups.length === 0) {
    throw new ManifestError("manifest has no groups");
  }
  const groups = o.groups.map((g, i) => parseGroup(g, `groups[${i}]`));
  groups.sort((a, b) => a.index - b.index);
  // groups must tile [0, frameCount) back to back
  let cursor = 0;
  for (const g of groups) {
    if (g.startFrame !== cursor) {
      throw new ManifestError(
        `group ${g.index} starts at frame ${g.startFrame}, expected ${cursor}`,
      );
    }
    cursor += g.numFrames;
  }
  if (cursor !== frameCount) {
    throw new ManifestError(`groups cover ${cursor} frames, manifest says ${frameCount}`);
  }
  return { version: MANIFEST_VERSION, frameCount, groupSize, groups };
}

/** The group whose frame range contains `frame`. */
export function groupForFrame(manifest: Manifest, frame: number): GroupEntry {
  if (frame < 0 || frame >= manifest.frameCount) {
    throw new RangeError(`frame ${frame} outside [0, ${manifest.frameCount})`);
  }
  for (const g of manifest.groups) {
    if (g.startFrame <= frame && frame < g.startFrame + g.numFrames) return g;
  }
  throw new ManifestError(`no group covers frame ${frame}`);
}

/** Half-step reconstruction bound per channel: (max - min) / (2 * (2^bits - 1)). */
export function stepBound(q: QuantRange): number[] {
  const levels = (1 << q.bits) - 1;
  return q.mins.map((lo, i) => (q.maxs[i] - lo) / (2 * levels));
}
