/** WebGL2 splat compositor: screen-space Gaussians, back-to-front.
 *
 * Each splat is an instanced quad; the vertex shader projects the 3D
 * covariance to a screen-space ellipse and stretches the quad over its
 * 3-sigma extent, the fragment shader applies the Gaussian falloff, and
 * premultiplied alpha-over blending composites in the order produced by
 * the depth sort. Colors are the view-independent base term; higher-order
 * SH is decoded but not evaluated here.
 */

import type { Mat4 } from "./orbit.js";
import type { SplatFrame } from "./reconstruct.js";

const FLOATS_PER_SPLAT = 13; // center 3, cov 6, color 3, opacity 1

const VERTEX_SRC = `#version 300 es
precision highp float;
layout(location = 0) in vec2 aCorner;
layout(location = 1) in vec3 aCenter;
layout(location = 2) in vec3 aCovA;   // Sigma xx, xy, xz
layout(location = 3) in vec3 aCovB;   // Sigma yy, yz, zz
layout(location = 4) in vec3 aColor;
layout(location = 5) in float aOpacity;
uniform mat4 uView;
uniform mat4 uProj;
uniform vec2 uViewport;
out vec2 vOffset;   // quad position in sigma units
out vec3 vColor;
out float vOpacity;

void main() {
  vec4 cam = uView * vec4(aCenter, 1.0);
  if (cam.z > -1e-4) {            // behind the eye: emit a degenerate quad
    gl_Position = vec4(0.0, 0.0, 2.0, 1.0);
    vOffset = vec2(0.0);
    vColor = vec3(0.0);
    vOpacity = 0.0;
    return;
  }

  mat3 sigma = mat3(
    aCovA.x, aCovA.y, aCovA.z,
    aCovA.y, aCovB.x, aCovB.y,
    aCovA.z, aCovB.y, aCovB.z);
  mat3 w = mat3(uView);
  // pixel-unit focal lengths from the projection matrix
  float fx = uProj[0][0] * uViewport.x * 0.5;
  float fy = uProj[1][1] * uViewport.y * 0.5;
  float invZ = 1.0 / cam.z;
  mat3 jac = mat3(
    fx * invZ, 0.0, 0.0,
    0.0, fy * invZ, 0.0,
    -fx * cam.x * invZ * invZ, -fy * cam.y * invZ * invZ, 0.0);
  mat3 t = jac * w;
  mat3 cov2dFull = t * sigma * transpose(t);
  // 2x2 screen covariance with a half-pixel low-pass so thin splats survive
  float a = cov2dFull[0][0] + 0.3;
  float b = cov2dFull[1][0];
  float c = cov2dFull[1][1] + 0.3;

  // eigendecomposition of [[a, b], [b, c]]
  float mid = 0.5 * (a + c);
  float disc = sqrt(max(0.0, mid * mid - (a * c - b * b)));
  float l1 = mid + disc;
  float l2 = max(mid - disc, 0.01);
  vec2 e1 = normalize(vec2(b, l1 - a));
  if (abs(b) < 1e-9) e1 = (a >= c) ? vec2(1.0, 0.0) : vec2(0.0, 1.0);
  vec2 e2 = vec2(-e1.y, e1.x);
  vec2 axis1 = e1 * sqrt(l1);
  vec2 axis2 = e2 * sqrt(l2);

  vOffset = aCorner * 3.0;  // cover +-3 sigma
  vColor = aColor;
  vOpacity = aOpacity;

  vec4 clip = uProj * cam;
  vec2 ndcOffset = (aCorner.x * axis1 + aCorner.y * axis2) * 3.0 * 2.0 / uViewport;
  gl_Position = vec4(clip.xy / clip.w + ndcOffset, 0.0, 1.0);
}
`;

const FRAGMENT_SRC = `#version 300 es
precision highp float;
in vec2 vOffset;
in vec3 vColor;
in float vOpacity;
out vec4 outColor;

void main() {
  float r2 = dot(vOffset, vOffset);
  float alpha = vOpacity * exp(-0.5 * r2);
  if (alpha < 1.0 / 255.0) discard;
  alpha = min(alpha, 0.99);
  outColor = vec4(vColor * alpha, alpha);
}
`;

function compile(gl: WebGL2RenderingContext, type: number, src: string): WebGLShader {
  const shader = gl.createShader(type);
  if (shader === null) throw new Error("shader allocation failed");
  gl.shaderSource(shader, src);
  gl.compileShader(shader);
  if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
    throw new Error(`shader compile failed: ${gl.getShaderInfoLog(shader) ?? "?"}`);
  }
  return shader;
}

/** Pack a frame into interleaved per-splat floats (unsorted). */
export function packSplats(frame: SplatFrame): Float32Array {
  const n = frame.count;
  const out = new Float32Array(n * FLOATS_PER_SPLAT);
  for (let i = 0; i < n; i++) {
    const o = i * FLOATS_PER_SPLAT;
    out[o] = frame.positions[i * 3];
    out[o + 1] = frame.positions[i * 3 + 1];
    out[o + 2] = frame.positions[i * 3 + 2];

    // R S S^T R^T from the wxyz quaternion and log-domain scales
    const qw = frame.rotations[i * 4];
    const qx = frame.rotations[i * 4 + 1];
    const qy = frame.rotations[i * 4 + 2];
    const qz = frame.rotations[i * 4 + 3];
    const norm = Math.hypot(qw, qx, qy, qz) || 1;
    const w = qw / norm;
    const x = qx / norm;
    const y = qy / norm;
    const z = qz / norm;
    const r00 = 1 - 2 * (y * y + z * z);
    const r01 = 2 * (x * y - w * z);
    const r02 = 2 * (x * z + w * y);
    const r10 = 2 * (x * y + w * z);
    const r11 = 1 - 2 * (x * x + z * z);
    const r12 = 2 * (y * z - w * x);
    const r20 = 2 * (x * z - w * y);
    const r21 = 2 * (y * z + w * x);
    const r22 = 1 - 2 * (x * x + y * y);
    const s0 = Math.exp(frame.logScales[i * 3]);
    const s1 = Math.exp(frame.logScales[i * 3 + 1]);
    const s2 = Math.exp(frame.logScales[i * 3 + 2]);
    const v0 = s0 * s0;
    const v1 = s1 * s1;
    const v2 = s2 * s2;
    out[o + 3] = v0 * r00 * r00 + v1 * r01 * r01 + v2 * r02 * r02; // xx
    out[o + 4] = v0 * r00 * r10 + v1 * r01 * r11 + v2 * r02 * r12; // xy
    out[o + 5] = v0 * r00 * r20 + v1 * r01 * r21 + v2 * r02 * r22; // xz
    out[o + 6] = v0 * r10 * r10 + v1 * r11 * r11 + v2 * r12 * r12; // yy
    out[o + 7] = v0 * r10 * r20 + v1 * r11 * r21 + v2 * r12 * r22; // yz
    out[o + 8] = v0 * r20 * r20 + v1 * r21 * r21 + v2 * r22 * r22; // zz

    out[o + 9] = clamp01(frame.colors[i * 3]);
    out[o + 10] = clamp01(frame.colors[i * 3 + 1]);
    out[o + 11] = clamp01(frame.colors[i * 3 + 2]);
    out[o + 12] = clamp01(frame.opacities[i]);
  }
  return out;
}

function clamp01(v: number): number {
  return v < 0 ? 0 : v > 1 ? 1 : v;
}

export class SplatRenderer {
  private readonly gl: WebGL2RenderingContext;
  private readonly program: WebGLProgram;
  private readonly vao: WebGLVertexArrayObject;
  private readonly splatBuffer: WebGLBuffer;
  private readonly uView: WebGLUniformLocation;
  private readonly uProj: WebGLUniformLocation;
  private readonly uViewport: WebGLUniformLocation;

  private packed: Float32Array = new Float32Array(0);
  private sorted: Float32Array = new Float32Array(0);
  private count = 0;

  constructor(private readonly canvas: HTMLCanvasElement) {
    const gl = canvas.getContext("webgl2", { antialias: false, alpha: false });
    if (gl === null) throw new Error("WebGL2 is not available");
    this.gl = gl;

    const program = gl.createProgram();
    if (program === null) throw new Error("program allocation failed");
    gl.attachShader(program, compile(gl, gl.VERTEX_SHADER, VERTEX_SRC));
    gl.attachShader(program, compile(gl, gl.FRAGMENT_SHADER, FRAGMENT_SRC));
    gl.linkProgram(program);
    if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
      throw new Error(`program link failed: ${gl.getProgramInfoLog(program) ?? "?"}`);
    }
    this.program = program;
    this.uView = must(gl.getUniformLocation(program, "uView"), "uView");
    this.uProj = must(gl.getUniformLocation(program, "uProj"), "uProj");
    this.uViewport = must(gl.getUniformLocation(program, "uViewport"), "uViewport");

    const vao = gl.createVertexArray();
    if (vao === null) throw new Error("vao allocation failed");
    this.vao = vao;
    gl.bindVertexArray(vao);

    const corners = gl.createBuffer();
    gl.bindBuffer(gl.ARRAY_BUFFER, corners);
    gl.bufferData(
      gl.ARRAY_BUFFER,
      new Float32Array([-1, -1, 1, -1, -1, 1, 1, 1]),
      gl.STATIC_DRAW,
    );
    gl.enableVertexAttribArray(0);
    gl.vertexAttribPointer(0, 2, gl.FLOAT, false, 0, 0);

    const splats = gl.createBuffer();
    if (splats === null) throw new Error("buffer allocation failed");
    this.splatBuffer = splats;
    gl.bindBuffer(gl.ARRAY_BUFFER, splats);
    const stride = FLOATS_PER_SPLAT * 4;
    const attrs: Array<[number, number, number]> = [
      [1, 3, 0], // center
      [2, 3, 12], // cov A
      [3, 3, 24], // cov B
      [4, 3, 36], // color
      [5, 1, 48], // opacity
    ];
    for (const [loc, size, offset] of attrs) {
      gl.enableVertexAttribArray(loc);
      gl.vertexAttribPointer(loc, size, gl.FLOAT, false, stride, offset);
      gl.vertexAttribDivisor(loc, 1);
    }
    gl.bindVertexArray(null);

    gl.disable(gl.DEPTH_TEST);
    gl.enable(gl.BLEND);
    gl.blendFunc(gl.ONE, gl.ONE_MINUS_SRC_ALPHA);
  }

  /** Load a frame's splats (unsorted); draw order comes via setOrder. */
  setFrame(frame: SplatFrame): void {
    this.packed = packSplats(frame);
    this.count = frame.count;
    if (this.sorted.length !== this.packed.length) {
      this.sorted = new Float32Array(this.packed.length);
    }
    // until a fresh sort lands, draw in slot order
    this.sorted.set(this.packed);
    this.upload();
  }

  /** Positions copy for the sort worker (transferable). */
  positionsForSort(): Float32Array {
    const out = new Float32Array(this.count * 3);
    for (let i = 0; i < this.count; i++) {
      out[i * 3] = this.packed[i * FLOATS_PER_SPLAT];
      out[i * 3 + 1] = this.packed[i * FLOATS_PER_SPLAT + 1];
      out[i * 3 + 2] = this.packed[i * FLOATS_PER_SPLAT + 2];
    }
    return out;
  }

  /** Apply a back-to-front order over the current frame's splats. */
  setOrder(order: Uint32Array): void {
    if (order.length !== this.count) return; // stale reply for an older frame
    for (let j = 0; j < order.length; j++) {
      const src = order[j] * FLOATS_PER_SPLAT;
      const dst = j * FLOATS_PER_SPLAT;
      for (let k = 0; k < FLOATS_PER_SPLAT; k++) this.sorted[dst + k] = this.packed[src + k];
    }
    this.upload();
  }

  private upload(): void {
    const gl = this.gl;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.splatBuffer);
    gl.bufferData(gl.ARRAY_BUFFER, this.sorted.subarray(0, this.count * FLOATS_PER_SPLAT), gl.DYNAMIC_DRAW);
  }

  resize(width: number, height: number): void {
    this.canvas.width = width;
    this.canvas.height = height;
  }

  draw(view: Mat4, proj: Mat4): void {
    const gl = this.gl;
    gl.viewport(0, 0, this.canvas.width, this.canvas.height);
    gl.clearColor(0.06, 0.06, 0.08, 1);
    gl.clear(gl.COLOR_BUFFER_BIT);
    if (this.count === 0) return;
    gl.useProgram(this.program);
    gl.uniformMatrix4fv(this.uView, false, view);
    gl.uniformMatrix4fv(this.uProj, false, proj);
    gl.uniform2f(this.uViewport, this.canvas.width, this.canvas.height);
    gl.bindVertexArray(this.vao);
    gl.drawArraysInstanced(gl.TRIANGLE_STRIP, 0, 4, this.count);
    gl.bindVertexArray(null);
  }
}

function must<T>(v: T | null, what: string): T {
  if (v === null) throw new Error(`missing uniform ${what}`);
  return v;
}
