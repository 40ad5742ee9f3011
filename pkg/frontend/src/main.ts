/** Browser entry point: canvas, transport bar, overlay, input wiring.
 *
 * The pipeline lives in a dedicated worker (protocol.ts); this thread
 * only handles input, the WebGL draw call and the stats overlay. Depth
 * sorting runs in a second worker, throttled to one request in flight.
 */

import { perspective, viewMatrix } from "./orbit.js";
import { WorkerPipeline } from "./protocol.js";
import { SplatRenderer } from "./render.js";
import type { SortReply } from "./sort-worker.js";
import { Viewer, type Connect } from "./viewer.js";

const connectViaWorker: Connect = (url) =>
  new Promise((resolve, reject) => {
    const worker = new Worker(new URL("./worker.js", import.meta.url), { type: "module" });
    const pipeline = new WorkerPipeline(
      (msg, transfer) => worker.postMessage(msg, transfer ?? []),
      () => worker.terminate(),
    );
    worker.onmessage = (e) => pipeline.handleMessage(e.data);
    worker.onerror = (e) => reject(new Error(e.message || "pipeline worker failed"));
    pipeline.load(url).then(() => resolve(pipeline), reject);
  });

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("view");
const playButton = el<HTMLButtonElement>("play");
const timeline = el<HTMLInputElement>("timeline");
const counter = el<HTMLElement>("counter");
const overlay = el<HTMLElement>("overlay");
const banner = el<HTMLElement>("banner");

const renderer = new SplatRenderer(canvas);
const viewer = new Viewer();

const sortWorker = new Worker(new URL("./sort-worker.js", import.meta.url), { type: "module" });
let sortToken = 0;
let sortBusy = false;
let sortDirty = false;

function requestSort(): void {
  if (viewer.frame === null) return;
  if (sortBusy) {
    sortDirty = true;
    return;
  }
  sortBusy = true;
  sortDirty = false;
  sortToken += 1;
  const positions = renderer.positionsForSort();
  sortWorker.postMessage(
    { positions, count: viewer.frame.count, view: viewMatrix(viewer.state.camera), token: sortToken },
    [positions.buffer],
  );
}

sortWorker.onmessage = (e: MessageEvent<SortReply>) => {
  sortBusy = false;
  if (e.data.token === sortToken) renderer.setOrder(e.data.order);
  if (sortDirty) requestSort();
};

// --- frame delivery -------------------------------------------------------

let shownFrame = -1;
const targetFps = 30;
let lastAdvance = 0;
let drawnFps = 0;
let fpsCount = 0;
let fpsStart = performance.now();

function frameLoop(t: number): void {
  if (viewer.state.playing && t - lastAdvance >= 1000 / targetFps) {
    if (viewer.tick()) lastAdvance = t;
  }
  const frame = viewer.frame;
  if (frame !== null && frame.frameIndex !== shownFrame) {
    shownFrame = frame.frameIndex;
    renderer.setFrame(frame);
    requestSort();
  }
  const { camera } = viewer.state;
  const proj = perspective(
    Math.PI / 3,
    canvas.width / Math.max(1, canvas.height),
    0.01,
    100,
  );
  renderer.draw(viewMatrix(camera), proj);
  fpsCount += 1;
  if (t - fpsStart >= 1000) {
    drawnFps = (fpsCount * 1000) / (t - fpsStart);
    fpsCount = 0;
    fpsStart = t;
  }
  requestAnimationFrame(frameLoop);
}

// --- UI -------------------------------------------------------------------

function redraw(): void {
  const s = viewer.state;
  playButton.textContent = s.playing ? "pause" : "play";
  playButton.disabled = s.phase !== "ready";
  timeline.max = String(Math.max(0, s.frameCount - 1));
  if (document.activeElement !== timeline) timeline.value = String(s.frame);
  counter.textContent = s.frameCount > 0 ? `${s.frame + 1} / ${s.frameCount}` : "-";
  banner.textContent = s.phase === "error" ? (s.error ?? "error") : "";
  banner.style.display = s.phase === "error" ? "block" : "none";

  const lines = [
    `splats ${s.splatCount}`,
    `fps ${drawnFps.toFixed(1)}${s.stalled ? "  [stalled]" : ""}`,
    `buffered groups [${s.bufferedGroups.slice(-6).join(", ")}]`,
  ];
  if (s.timings !== null) {
    for (const name of ["fetch", "decode", "reconstruct"] as const) {
      const st = s.timings[name];
      lines.push(`${name.padEnd(11)} ${st.count}x  ${st.meanMs.toFixed(1)} ms`);
    }
  }
  overlay.textContent = lines.join("\n");
}

viewer.onchange = redraw;

playButton.onclick = () => {
  if (viewer.state.playing) viewer.pause();
  else viewer.play();
};

timeline.oninput = () => {
  void viewer.scrub(Number(timeline.value));
};

let dragging = false;
let lastX = 0;
let lastY = 0;
canvas.onpointerdown = (e) => {
  dragging = true;
  lastX = e.clientX;
  lastY = e.clientY;
  canvas.setPointerCapture(e.pointerId);
};
canvas.onpointermove = (e) => {
  if (!dragging) return;
  viewer.orbit((e.clientX - lastX) * 0.01, (e.clientY - lastY) * 0.01);
  lastX = e.clientX;
  lastY = e.clientY;
  requestSort();
};
canvas.onpointerup = () => {
  dragging = false;
};
canvas.onwheel = (e) => {
  e.preventDefault();
  viewer.orbit(0, 0, e.deltaY * 0.002);
  requestSort();
};

window.onkeydown = (e) => {
  if (e.key === " ") {
    e.preventDefault();
    playButton.click();
  }
};

function fit(): void {
  renderer.resize(canvas.clientWidth, canvas.clientHeight);
}
window.onresize = fit;
fit();

// --- boot -----------------------------------------------------------------

const params = new URLSearchParams(window.location.search);
const asset = params.get("asset") ?? "/";
void viewer.load(asset, connectViaWorker);

redraw();
requestAnimationFrame(frameLoop);
