import { afterEach, describe, expect, it } from "vitest";

import {
  CodecError,
  decodeChannel,
  decodeGroup,
  hasNativeInflate,
  inflate,
  setPurescriptInflate,
  splitChannels,
  undelta,
  UnsupportedCodecError,
} from "../src/codec.js";
import type { GroupEntry, StreamEntry } from "../src/manifest.js";
import { decodeFixtureGroup, loadManifest, readCodecCase } from "./helpers.js";

afterEach(() => setPurescriptInflate(false));

describe("inflate", () => {
  it("uses the engine's built-in decompressor when present", () => {
    expect(hasNativeInflate()).toBe(true);
  });

  it("decodes the reference bitstream natively", async () => {
    const c = readCodecCase();
    const out = await decodeChannel(c.encoded, c.numFrames, c.side);
    expect(out).toEqual(c.raw);
  });

  it("decodes the reference bitstream through the pure-script fallback", async () => {
    setPurescriptInflate(true);
    expect(hasNativeInflate()).toBe(false);
    const c = readCodecCase();
    const out = await decodeChannel(c.encoded, c.numFrames, c.side);
    expect(out).toEqual(c.raw);
  });

  it("rejects garbage bytes on the fallback path", async () => {
    setPurescriptInflate(true);
    await expect(inflate(new Uint8Array([1, 2, 3, 4]))).rejects.toThrow(CodecError);
  });
});

describe("undelta", () => {
  it("accumulates frames with wraparound", () => {
    // frame 0 raw, frame 1 = +delta, including a wrap past 255
    const raw = new Uint8Array([250, 10, 10, 250]);
    const out = undelta(raw, 2, 2);
    expect(Array.from(out)).toEqual([250, 10, (250 + 10) & 0xff, (10 + 250) & 0xff]);
  });

  it("rejects a bitstream of the wrong length", () => {
    expect(() => undelta(new Uint8Array(7), 2, 4)).toThrow(CodecError);
    expect(() => undelta(new Uint8Array(7), 2, 4)).toThrow(/7 bytes, expected 8/);
  });
});

describe("splitChannels", () => {
  const stream: StreamEntry = {
    codec: "deflate-delta",
    qp: null,
    lossless: true,
    file: "group_0000/x.bin",
    byteLength: 5,
    channelByteLengths: [2, 3],
    channels: 2,
  };

  it("slices a segment into per-channel bitstreams", () => {
    const blob = new Uint8Array([1, 2, 3, 4, 5]);
    const parts = splitChannels(blob, stream);
    expect(parts.map((p) => Array.from(p))).toEqual([
      [1, 2],
      [3, 4, 5],
    ]);
  });

  it("rejects a blob whose size disagrees with the manifest", () => {
    expect(() => splitChannels(new Uint8Array(4), stream)).toThrow(
      /4 bytes on the wire, manifest says 5/,
    );
  });
});

describe("decodeGroup", () => {
  it("decodes every stream of a baked group", async () => {
    const m = loadManifest("asset_small");
    const entry = m.groups[0];
    const group = await decodeFixtureGroup("asset_small", 0);
    const area = entry.side * entry.side;

    // merged 16-bit positions, 8-bit everything else, full plane stacks
    expect(group.codes.position).toBeInstanceOf(Uint16Array);
    expect(group.codes.position).toHaveLength(entry.numFrames * 3 * area);
    expect(group.codes.rotation).toBeInstanceOf(Uint8Array);
    expect(group.codes.rotation).toHaveLength(entry.numFrames * 4 * area);
    expect(group.codes.sh).toHaveLength(entry.numFrames * 9 * area);
    expect(group.codes.pos_hi).toBeUndefined();
    expect(group.codes.pos_lo).toBeUndefined();
  });

  it("refuses segments in a codec this build cannot decode", async () => {
    const m = loadManifest("asset_small");
    const entry: GroupEntry = structuredClone(m.groups[0]);
    entry.streams.color.codec = "h264";
    const segments: Record<string, Uint8Array> = {};
    for (const [name, s] of Object.entries(entry.streams)) {
      segments[name] = new Uint8Array(s.byteLength);
    }
    await expect(decodeGroup(entry, segments)).rejects.toThrow(UnsupportedCodecError);
    await expect(decodeGroup(entry, segments)).rejects.toThrow(/h264/);
  });

  it("reports a missing segment by file name", async () => {
    const m = loadManifest("asset_small");
    const entry = m.groups[0];
    await expect(decodeGroup(entry, {})).rejects.toThrow(/pos_hi\.bin|missing segment/);
  });
});
