/** Orbit camera: azimuth/elevation/radius around a target point.
 *
 * Angles are radians; azimuth wraps, elevation stays shy of the poles so
 * the up vector never degenerates, radius stays strictly positive. All
 * state is plain numbers — the matrix helpers turn a pose into the
 * column-major view/projection pair the renderer uploads.
 */

export interface OrbitCamera {
  azimuth: number;
  elevation: number;
  radius: number;
  target: [number, number, number];
}

export const MIN_RADIUS = 1e-3;
const MAX_ELEVATION = Math.PI / 2 - 1e-3;
const TAU = 2 * Math.PI;

export function makeOrbit(
  radius = 3,
  azimuth = 0,
  elevation = 0,
  target: [number, number, number] = [0, 0, 0],
): OrbitCamera {
  if (!(radius > 0)) throw new RangeError("camera radius must be > 0");
  return { azimuth: wrapAngle(azimuth), elevation: clampElevation(elevation), radius, target };
}

function wrapAngle(a: number): number {
  return ((a % TAU) + TAU) % TAU;
}

function clampElevation(e: number): number {
  return Math.min(MAX_ELEVATION, Math.max(-MAX_ELEVATION, e));
}

/** Apply a relative orbit move; returns a new pose. */
export function orbit(cam: OrbitCamera, dAz: number, dEl: number, dR = 0): OrbitCamera {
  return {
    azimuth: wrapAngle(cam.azimuth + dAz),
    elevation: clampElevation(cam.elevation + dEl),
    radius: Math.max(MIN_RADIUS, cam.radius + dR),
    target: cam.target,
  };
}

/** Eye position on the orbit sphere; azimuth 0 / elevation 0 puts the eye
 * on the target's +z side looking back at it. */
export function eyePosition(cam: OrbitCamera): [number, number, number] {
  const ce = Math.cos(cam.elevation);
  return [
    cam.target[0] + cam.radius * ce * Math.sin(cam.azimuth),
    cam.target[1] + cam.radius * Math.sin(cam.elevation),
    cam.target[2] + cam.radius * ce * Math.cos(cam.azimuth),
  ];
}

// --- column-major 4x4 helpers (WebGL layout) ------------------------------

export type Mat4 = Float32Array;

function sub(a: number[], b: number[]): number[] {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: number[], b: number[]): number[] {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function normalize(v: number[]): number[] {
  const n = Math.hypot(v[0], v[1], v[2]);
  if (n < 1e-12) throw new RangeError("cannot normalize zero vector");
  return [v[0] / n, v[1] / n, v[2] / n];
}

function dot(a: number[], b: number[]): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

/** Right-handed world->camera view matrix (camera looks down its -z). */
export function lookAt(eye: number[], target: number[], up: number[] = [0, 1, 0]): Mat4 {
  const back = normalize(sub(eye, target)); // camera +z
  const right = normalize(cross(up, back));
  const trueUp = cross(back, right);
  // rows are the camera axes; translation brings the eye to the origin
  return new Float32Array([
    right[0], trueUp[0], back[0], 0,
    right[1], trueUp[1], back[1], 0,
    right[2], trueUp[2], back[2], 0,
    -dot(right, eye), -dot(trueUp, eye), -dot(back, eye), 1,
  ]);
}

export function viewMatrix(cam: OrbitCamera): Mat4 {
  return lookAt(eyePosition(cam), [...cam.target]);
}

/** Standard GL perspective projection (clip z in [-1, 1]). */
export function perspective(fovY: number, aspect: number, near: number, far: number): Mat4 {
  const f = 1 / Math.tan(fovY / 2);
  const inv = 1 / (near - far);
  return new Float32Array([
    f / aspect, 0, 0, 0,
    0, f, 0, 0,
    0, 0, (far + near) * inv, -1,
    0, 0, 2 * far * near * inv, 0,
  ]);
}

export function multiply(a: Mat4, b: Mat4): Mat4 {
  const out = new Float32Array(16);
  for (let col = 0; col < 4; col++) {
    for (let row = 0; row < 4; row++) {
      let s = 0;
      for (let k = 0; k < 4; k++) s += a[k * 4 + row] * b[col * 4 + k];
      out[col * 4 + row] = s;
    }
  }
  return out;
}
