/** Rebuild renderable splat frames from decoded plane codes.
 *
 * A splat's attributes live at the same raster slot of every plane, so a
 * frame reconstructs as a flat scan of the first splat_count slots.
 * Dequantization mirrors the packer: v = min + code / (2^bits - 1) * (max - min),
 * all in doubles; scales stay in log domain, opacity maps back through the
 * sigmoid from its clamped-logit coding.
 */

import type { DecodedGroup } from "./codec.js";
import type { GroupEntry, QuantRange } from "./manifest.js";

export interface SplatFrame {
  frameIndex: number;
  count: number;
  positions: Float64Array; // (N, 3) world units
  rotations: Float64Array; // (N, 4) wxyz, dequantized verbatim
  logScales: Float64Array; // (N, 3)
  opacities: Float64Array; // (N,) in [0, 1]
  colors: Float64Array; // (N, 3)
  sh: Float64Array; // (N, K) higher-order coefficients, channel-major
  shChannels: number;
}

function sigmoid(x: number): number {
  return 1 / (1 + Math.exp(-x));
}

/** Dequantize one attribute of frame t into an (N, C) row-major array. */
function dequantizeAttr(
  codes: Uint8Array | Uint16Array,
  quant: QuantRange,
  t: number,
  count: number,
  area: number,
): Float64Array {
  const channels = quant.mins.length;
  const levels = (1 << quant.bits) - 1;
  const out = new Float64Array(count * channels);
  for (let c = 0; c < channels; c++) {
    const lo = quant.mins[c];
    const range = quant.maxs[c] - lo;
    const base = (t * channels + c) * area;
    for (let i = 0; i < count; i++) {
      out[i * channels + c] = lo + (codes[base + i] / levels) * range;
    }
  }
  return out;
}

/** Reconstruct frame t (group-relative) of a decoded group. */
export function unpackFrame(group: DecodedGroup, t: number): SplatFrame {
  const entry: GroupEntry = group.entry;
  if (t < 0 || t >= entry.numFrames) {
    throw new RangeError(`frame ${t} outside group of ${entry.numFrames}`);
  }
  const n = entry.splatCount;
  const area = entry.side * entry.side;

  const need = (name: string): Float64Array => {
    const codes = group.codes[name];
    const quant = entry.quant[name];
    if (codes === undefined || quant === undefined) {
      throw new Error(`group ${entry.index} is missing attribute "${name}"`);
    }
    return dequantizeAttr(codes, quant, t, n, area);
  };

  const logits = need("opacity");
  const opacities = new Float64Array(n);
  for (let i = 0; i < n; i++) opacities[i] = sigmoid(logits[i]);

  let sh: Float64Array = new Float64Array(0);
  let shChannels = 0;
  if (group.codes.sh !== undefined) {
    sh = need("sh");
    shChannels = entry.quant.sh.mins.length;
  }

  return {
    frameIndex: entry.startFrame + t,
    count: n,
    positions: need("position"),
    rotations: need("rotation"),
    logScales: need("scale"),
    opacities,
    colors: need("color"),
    sh,
    shChannels,
  };
}

/** Every frame of a group in play order. */
export function unpackGroup(group: DecodedGroup): SplatFrame[] {
  const out: SplatFrame[] = [];
  for (let t = 0; t < group.entry.numFrames; t++) out.push(unpackFrame(group, t));
  return out;
}
