/** Bitstream decode for the lossless attribute codec ("deflate-delta").
 *
 * Each channel is an independent bitstream: zlib-deflated bytes that
 * expand to num_frames * side * side uint8s, where frame 0 is stored raw
 * and every later frame is the per-pixel wraparound delta to the frame
 * before it. Inflate prefers the engine's built-in DecompressionStream
 * and falls back to pako, so headless test runners without the Web API
 * still decode with pure script.
 */

import type { GroupEntry, StreamEntry } from "./manifest.js";

export class CodecError extends Error {}

export class UnsupportedCodecError extends CodecError {
  constructor(codec: string) {
    super(
      `codec "${codec}" is not decodable in this build; ` +
        `only "deflate-delta" segments are supported`,
    );
  }
}

export const CODEC_DEFLATE = "deflate-delta";

let forcePako = false;

/** Test hook: route inflate through the pure-script path. */
export function setPurescriptInflate(on: boolean): void {
  forcePako = on;
}

export function hasNativeInflate(): boolean {
  return !forcePako && typeof DecompressionStream === "function";
}

// loaded on demand so environments with DecompressionStream never fetch it
type PakoModule = { inflate(data: Uint8Array): Uint8Array };
let pakoModule: PakoModule | null = null;

/** zlib-format inflate. */
export async function inflate(data: Uint8Array): Promise<Uint8Array> {
  if (hasNativeInflate()) {
    // "deflate" in the Compression Streams API means zlib-wrapped deflate,
    // which is exactly what the encoder emits.
    try {
      const ds = new DecompressionStream("deflate");
      const stream = new Blob([data as BlobPart]).stream().pipeThrough(ds);
      const buf = await new Response(stream).arrayBuffer();
      return new Uint8Array(buf);
    } catch (e) {
      throw new CodecError(`inflate failed: ${String(e)}`);
    }
  }
  if (pakoModule === null) {
    pakoModule = (await import("pako")) as unknown as PakoModule;
  }
  try {
    return pakoModule.inflate(data);
  } catch (e) {
    throw new CodecError(`inflate failed: ${String(e)}`);
  }
}

/** Undo the temporal delta in place: frame 0 is raw, frame t adds onto
 * frame t-1 pixelwise mod 256. */
export function undelta(raw: Uint8Array, numFrames: number, area: number): Uint8Array {
  if (raw.length !== numFrames * area) {
    throw new CodecError(`bitstream decodes to ${raw.length} bytes, expected ${numFrames * area}`);
  }
  for (let t = 1; t < numFrames; t++) {
    const prev = (t - 1) * area;
    const cur = t * area;
    for (let i = 0; i < area; i++) {
      raw[cur + i] = (raw[cur + i] + raw[prev + i]) & 0xff;
    }
  }
  return raw;
}

/** One channel bitstream -> (numFrames * side * side) uint8 plane codes. */
export async function decodeChannel(
  data: Uint8Array,
  numFrames: number,
  side: number,
): Promise<Uint8Array> {
  return undelta(await inflate(data), numFrames, side * side);
}

/** Slice a segment blob into per-channel bitstreams. */
export function splitChannels(blob: Uint8Array, stream: StreamEntry): Uint8Array[] {
  if (blob.length !== stream.byteLength) {
    throw new CodecError(
      `segment ${stream.file}: ${blob.length} bytes on the wire, manifest says ${stream.byteLength}`,
    );
  }
  const out: Uint8Array[] = [];
  let offset = 0;
  for (const n of stream.channelByteLengths) {
    out.push(blob.subarray(offset, offset + n));
    offset += n;
  }
  return out;
}

/** A fully decoded group: per-attribute integer plane codes.
 *
 * codes[name] is indexed [(t * channels + c) * side^2 + slot]; position
 * carries merged 16-bit codes, everything else 8-bit.
 */
export interface DecodedGroup {
  entry: GroupEntry;
  codes: Record<string, Uint8Array | Uint16Array>;
}

/** Decode every stream of a group from its raw segment blobs. */
export async function decodeGroup(
  entry: GroupEntry,
  segments: Record<string, Uint8Array>,
): Promise<DecodedGroup> {
  const area = entry.side * entry.side;
  // fail on an unsupported codec before decoding anything else
  for (const stream of Object.values(entry.streams)) {
    if (stream.codec !== CODEC_DEFLATE) throw new UnsupportedCodecError(stream.codec);
  }
  const perStream: Record<string, Uint8Array[]> = {};
  for (const [name, stream] of Object.entries(entry.streams)) {
    const blob = segments[name];
    if (blob === undefined) throw new CodecError(`missing segment ${stream.file}`);
    const channels = splitChannels(blob, stream);
    perStream[name] = await Promise.all(
      channels.map((c) => decodeChannel(c, entry.numFrames, entry.side)),
    );
  }

  const codes: Record<string, Uint8Array | Uint16Array> = {};
  // positions travel as separate hi/lo byte planes; merge them back to u16
  const hi = perStream.pos_hi;
  const lo = perStream.pos_lo;
  if (hi !== undefined || lo !== undefined) {
    if (hi === undefined || lo === undefined || hi.length !== lo.length) {
      throw new CodecError("position needs matching pos_hi/pos_lo streams");
    }
    const nch = hi.length;
    const merged = new Uint16Array(entry.numFrames * nch * area);
    for (let t = 0; t < entry.numFrames; t++) {
      for (let c = 0; c < nch; c++) {
        const src = t * area;
        const dst = (t * nch + c) * area;
        const h = hi[c];
        const l = lo[c];
        for (let i = 0; i < area; i++) {
          merged[dst + i] = (h[src + i] << 8) | l[src + i];
        }
      }
    }
    codes.position = merged;
    delete perStream.pos_hi;
    delete perStream.pos_lo;
  }

  for (const [name, channels] of Object.entries(perStream)) {
    const nch = channels.length;
    const flat = new Uint8Array(entry.numFrames * nch * area);
    for (let t = 0; t < entry.numFrames; t++) {
      for (let c = 0; c < nch; c++) {
        flat.set(channels[c].subarray(t * area, (t + 1) * area), (t * nch + c) * area);
      }
    }
    codes[name] = flat;
  }
  return { entry, codes };
}
