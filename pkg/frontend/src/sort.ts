/** Back-to-front splat ordering for alpha compositing.
 *
 * Single-pass 16-bit counting sort on view-space depth — O(N) per frame,
 * cheap enough to rerun on every camera move. Ties inside one bucket keep
 * their relative order, which is all the compositor needs.
 */

import type { Mat4 } from "./orbit.js";

const BUCKETS = 65536;

/** Indices of the splats sorted farthest-first under the given view.
 *
 * `positions` is (N, 3) row-major; only the first `count` rows are used.
 */
export function depthSort(
  positions: Float64Array | Float32Array,
  count: number,
  view: Mat4,
): Uint32Array {
  const order = new Uint32Array(count);
  if (count === 0) return order;

  // view-space z (third row of the column-major view matrix); the camera
  // looks down -z, so smaller z means farther away
  const zx = view[2];
  const zy = view[6];
  const zz = view[10];
  const depth = new Float64Array(count);
  let min = Infinity;
  let max = -Infinity;
  for (let i = 0; i < count; i++) {
    const d = zx * positions[i * 3] + zy * positions[i * 3 + 1] + zz * positions[i * 3 + 2];
    depth[i] = d;
    if (d < min) min = d;
    if (d > max) max = d;
  }
  if (!(max > min)) {
    for (let i = 0; i < count; i++) order[i] = i;
    return order;
  }

  const scale = (BUCKETS - 1) / (max - min);
  const keys = new Uint32Array(count);
  const counts = new Uint32Array(BUCKETS);
  for (let i = 0; i < count; i++) {
    const k = ((depth[i] - min) * scale) | 0;
    keys[i] = k;
    counts[k]++;
  }
  const starts = new Uint32Array(BUCKETS);
  for (let k = 1; k < BUCKETS; k++) starts[k] = starts[k - 1] + counts[k - 1];
  for (let i = 0; i < count; i++) order[starts[keys[i]]++] = i;
  return order;
}

/** Bucket width of the sort: depths closer than this may tie. */
export function depthResolution(
  positions: Float64Array | Float32Array,
  count: number,
  view: Mat4,
): number {
  let min = Infinity;
  let max = -Infinity;
  for (let i = 0; i < count; i++) {
    const d =
      view[2] * positions[i * 3] + view[6] * positions[i * 3 + 1] + view[10] * positions[i * 3 + 2];
    if (d < min) min = d;
    if (d > max) max = d;
  }
  return max > min ? (max - min) / (BUCKETS - 1) : 0;
}
