import { describe, expect, it } from "vitest";

import {
  groupForFrame,
  ManifestError,
  parseManifest,
  stepBound,
  type QuantRange,
} from "../src/manifest.js";
import { loadManifest, readFixtureText } from "./helpers.js";

/** Re-serialize the fixture manifest after an in-place mutation. */
function mutated(mutate: (m: any) => void): string {
  const json = JSON.parse(readFixtureText("asset_small", "manifest.json"));
  mutate(json);
  return JSON.stringify(json);
}

describe("parseManifest", () => {
  it("parses a baked asset manifest", () => {
    const m = loadManifest("asset_small");
    expect(m.version).toBe("gvv/1");
    expect(m.frameCount).toBe(6);
    expect(m.groupSize).toBe(4);
    expect(m.groups).toHaveLength(2);

    const g0 = m.groups[0];
    expect(g0.index).toBe(0);
    expect(g0.startFrame).toBe(0);
    expect(g0.numFrames).toBe(4);
    expect(g0.splatCount).toBe(120);
    expect(g0.side * g0.side).toBeGreaterThanOrEqual(g0.splatCount);
    expect(g0.shDegree).toBe(1);

    // the full attribute set, 16-bit positions, 8-bit everything else
    expect(Object.keys(g0.quant).sort()).toEqual([
      "color",
      "opacity",
      "position",
      "rotation",
      "scale",
      "sh",
    ]);
    expect(g0.quant.position.bits).toBe(16);
    expect(g0.quant.color.bits).toBe(8);
    expect(g0.quant.sh.mins).toHaveLength(9);

    for (const name of ["pos_hi", "pos_lo", "rotation", "scale", "opacity", "color", "sh"]) {
      const s = g0.streams[name];
      expect(s, name).toBeDefined();
      expect(s.codec).toBe("deflate-delta");
      expect(s.channelByteLengths.reduce((a, b) => a + b, 0)).toBe(s.byteLength);
      expect(s.channelByteLengths).toHaveLength(s.channels);
    }

    const g1 = m.groups[1];
    expect(g1.startFrame).toBe(4);
    expect(g1.numFrames).toBe(2);
  });

  it("parses the large asset", () => {
    const m = loadManifest("asset_play");
    expect(m.frameCount).toBe(40);
    expect(m.groupSize).toBe(20);
    expect(m.groups).toHaveLength(2);
    expect(m.groups[0].splatCount).toBe(10000);
    expect(m.groups[0].shDegree).toBe(0);
    expect(m.groups[0].streams.sh).toBeUndefined();
  });

  it("rejects things that are not a manifest at all", () => {
    expect(() => parseManifest("not json {")).toThrow(ManifestError);
    expect(() => parseManifest("[]")).toThrow(ManifestError);
    expect(() => parseManifest('"gvv/1"')).toThrow(ManifestError);
  });

  it("rejects a wrong version string", () => {
    expect(() => parseManifest(mutated((m) => (m.version = "gvv/2")))).toThrow(ManifestError);
    expect(() => parseManifest(mutated((m) => delete m.version))).toThrow(ManifestError);
  });

  it("rejects missing or non-numeric counts", () => {
    expect(() => parseManifest(mutated((m) => delete m.frame_count))).toThrow(ManifestError);
    expect(() => parseManifest(mutated((m) => (m.frame_count = "six")))).toThrow(ManifestError);
    expect(() => parseManifest(mutated((m) => (m.group_size = 0)))).toThrow(ManifestError);
  });

  it("rejects groups that do not tile the frame range", () => {
    expect(() => parseManifest(mutated((m) => m.groups.pop()))).toThrow(ManifestError);
    expect(() => parseManifest(mutated((m) => (m.groups[1].start_frame = 5)))).toThrow(
      ManifestError,
    );
    expect(() => parseManifest(mutated((m) => (m.groups[1].num_frames = 9)))).toThrow(
      ManifestError,
    );
  });

  it("rejects unusable quantization ranges", () => {
    expect(() => parseManifest(mutated((m) => (m.groups[0].quant.color.bits = 12)))).toThrow(
      ManifestError,
    );
    expect(() =>
      parseManifest(mutated((m) => (m.groups[0].quant.color.maxs[0] = -99))),
    ).toThrow(ManifestError);
    expect(() => parseManifest(mutated((m) => m.groups[0].quant.color.mins.pop()))).toThrow(
      ManifestError,
    );
  });

  it("rejects segment byte-length inconsistencies", () => {
    expect(() =>
      parseManifest(mutated((m) => (m.groups[0].streams.color.byte_length += 1))),
    ).toThrow(ManifestError);
    expect(() =>
      parseManifest(mutated((m) => m.groups[0].streams.color.channel_byte_lengths.pop())),
    ).toThrow(ManifestError);
  });

  it("rejects segment paths that escape the asset root", () => {
    expect(() =>
      parseManifest(mutated((m) => (m.groups[0].streams.color.file = "../../etc/passwd"))),
    ).toThrow(ManifestError);
    expect(() =>
      parseManifest(mutated((m) => (m.groups[0].streams.color.file = "/abs/path.bin"))),
    ).toThrow(ManifestError);
  });

  it("rejects a plane grid too small for the splat count", () => {
    expect(() => parseManifest(mutated((m) => (m.groups[0].side = 2)))).toThrow(ManifestError);
  });
});

describe("groupForFrame", () => {
  it("maps frames to their group across boundaries", () => {
    const m = loadManifest("asset_small");
    expect(groupForFrame(m, 0).index).toBe(0);
    expect(groupForFrame(m, 3).index).toBe(0);
    expect(groupForFrame(m, 4).index).toBe(1);
    expect(groupForFrame(m, 5).index).toBe(1);
  });

  it("throws for frames outside the asset", () => {
    const m = loadManifest("asset_small");
    expect(() => groupForFrame(m, -1)).toThrow(RangeError);
    expect(() => groupForFrame(m, 6)).toThrow(RangeError);
  });
});

describe("stepBound", () => {
  it("is the half-step of the quantization lattice", () => {
    const q: QuantRange = { bits: 8, mins: [0, -1], maxs: [1, 1] };
    expect(stepBound(q)).toEqual([1 / (2 * 255), 2 / (2 * 255)]);
    const q16: QuantRange = { bits: 16, mins: [0], maxs: [655.35] };
    expect(stepBound(q16)[0]).toBeCloseTo(655.35 / (2 * 65535), 12);
  });
});
