/** Viewer state machine: asset loading, transport controls, orbit camera.
 *
 * Owns a pipeline and exposes the player-facing surface — play/pause,
 * scrub, orbit — while keeping every invariant the UI relies on: the
 * current frame always lies inside the asset range, the camera radius
 * stays positive, and errors land in the state instead of escaping to the
 * caller. tick() is synchronous (a non-blocking pull), so control calls
 * can never interleave with a half-finished frame advance.
 */

import { groupForFrame, parseManifest, type Manifest } from "./manifest.js";
import { makeOrbit, orbit, type OrbitCamera } from "./orbit.js";
import {
  EndOfStream,
  Pipeline,
  Stalled,
  type PipelineLike,
  type StageTimings,
} from "./pipeline.js";
import type { SplatFrame } from "./reconstruct.js";
import { HttpSource } from "./source.js";

export type ViewerPhase = "idle" | "loading" | "ready" | "error";

export interface ViewerState {
  url: string | null;
  phase: ViewerPhase;
  error: string | null;
  frame: number;
  frameCount: number;
  splatCount: number;
  playing: boolean;
  stalled: boolean;
  camera: OrbitCamera;
  bufferedGroups: number[];
  timings: Record<"fetch" | "decode" | "reconstruct", StageTimings> | null;
}

/** Opens a pipeline for an asset URL; resolves once the manifest is in. */
export type Connect = (url: string) => Promise<PipelineLike>;

/** Run the whole pipeline on the calling thread (tests, simple embeds). */
export const connectLocal: Connect = async (url) => {
  const source = new HttpSource(url);
  return new Pipeline(source, parseManifest(await source.manifest()));
};

const LOAD_TIMEOUT_MS = 10000;

export class Viewer {
  private manifest: Manifest | null = null;
  private pipeline: PipelineLike | null = null;
  private url: string | null = null;
  private phase: ViewerPhase = "idle";
  private error: string | null = null;
  private playing = false;
  private stalled = false;
  private camera: OrbitCamera = makeOrbit();
  private currentFrame: SplatFrame | null = null;
  private landingTarget = 0;
  private landingPromise: Promise<void> | null = null;

  /** Called after every state change; the UI hangs its redraw here. */
  onchange: (() => void) | null = null;

  get state(): ViewerState {
    return {
      url: this.url,
      phase: this.phase,
      error: this.error,
      frame: this.currentFrame?.frameIndex ?? 0,
      frameCount: this.manifest?.frameCount ?? 0,
      splatCount: this.currentFrame?.count ?? 0,
      playing: this.playing,
      stalled: this.stalled,
      camera: this.camera,
      bufferedGroups: this.pipeline ? [...this.pipeline.decodedGroups] : [],
      timings: this.pipeline?.timings ?? null,
    };
  }

  /** The frame currently on screen. */
  get frame(): SplatFrame | null {
    return this.currentFrame;
  }

  /** Load an asset; resolves once frame 0 is reconstructed and displayed
   * (paused). Failures surface in state.phase/state.error, not as throws. */
  async load(url: string, connect: Connect = connectLocal): Promise<void> {
    this.close();
    this.url = url;
    this.phase = "loading";
    this.error = null;
    this.changed();
    let pipeline: PipelineLike | null = null;
    try {
      pipeline = await connect(url);
      const first = await pipeline.nextFrame(LOAD_TIMEOUT_MS);
      this.manifest = pipeline.manifest;
      this.pipeline = pipeline;
      this.currentFrame = first;
      this.playing = false;
      this.stalled = false;
      this.phase = "ready";
    } catch (e) {
      pipeline?.close(); // never leak a half-opened pipeline
      this.phase = "error";
      this.error = e instanceof Error ? e.message : String(e);
    }
    this.changed();
  }

  play(): void {
    if (this.phase !== "ready") return;
    if (this.pipeline?.atEnd) {
      // restart from the top, like any media player at the end of the bar
      void this.scrub(0).then(() => {
        this.playing = true;
        this.changed();
      });
      return;
    }
    this.playing = true;
    this.changed();
  }

  pause(): void {
    this.playing = false;
    this.changed();
  }

  /** Advance one frame if playing and one is ready. Returns whether the
   * displayed frame changed. Safe to call at any cadence. */
  tick(): boolean {
    // while a scrub is landing, the landing loop owns the frame stream
    if (this.landingPromise !== null) return false;
    if (!this.playing || this.pipeline === null) return false;
    let pulled: { frame: SplatFrame | null; fresh: boolean };
    try {
      pulled = this.pipeline.tryNextFrame();
    } catch (e) {
      this.phase = "error";
      this.error = e instanceof Error ? e.message : String(e);
      this.playing = false;
      this.changed();
      return false;
    }
    if (pulled.fresh && pulled.frame !== null) {
      this.currentFrame = pulled.frame;
      this.stalled = false;
      this.changed();
      return true;
    }
    if (this.pipeline.atEnd) {
      this.playing = false;
      this.stalled = false;
    } else {
      this.stalled = true;
    }
    this.changed();
    return false;
  }

  /** Jump to a frame (clamped to the asset range). Decode restarts at the
   * containing group's keyframe; resolves once the latest target is up.
   * Overlapping scrubs share one landing loop, so only the newest target
   * wins and no frame is pulled by two consumers at once. */
  async scrub(frame: number): Promise<void> {
    if (this.pipeline === null || this.manifest === null) return;
    const clamped = Math.min(this.manifest.frameCount - 1, Math.max(0, Math.round(frame)));
    this.landingTarget = clamped;
    this.pipeline.seek(clamped);
    this.stalled = false;
    this.changed();
    if (this.landingPromise === null) {
      this.landingPromise = this.land(this.pipeline).finally(() => {
        this.landingPromise = null;
      });
    }
    return this.landingPromise;
  }

  /** Pull frames until the newest scrub target is on screen. */
  private async land(pipeline: PipelineLike): Promise<void> {
    try {
      for (;;) {
        const landed = await pipeline.nextFrame(LOAD_TIMEOUT_MS);
        if (this.pipeline !== pipeline) return; // reloaded or closed mid-landing
        this.currentFrame = landed;
        if (landed.frameIndex === this.landingTarget) break;
      }
    } catch (e) {
      if (this.pipeline !== pipeline) return;
      if (e instanceof Stalled) {
        this.stalled = true;
      } else if (!(e instanceof EndOfStream)) {
        this.phase = "error";
        this.error = e instanceof Error ? e.message : String(e);
        this.playing = false;
      }
    }
    this.changed();
  }

  /** Relative camera move; never touches the playback pipeline. */
  orbit(dAz: number, dEl: number, dR = 0): void {
    this.camera = orbit(this.camera, dAz, dEl, dR);
    this.changed();
  }

  /** The group that would serve a given frame (UI hover/diagnostics). */
  groupOf(frame: number): number | null {
    if (this.manifest === null) return null;
    try {
      return groupForFrame(this.manifest, frame).index;
    } catch {
      return null;
    }
  }

  close(): void {
    this.pipeline?.close();
    this.pipeline = null;
    this.manifest = null;
    this.currentFrame = null;
    this.playing = false;
    this.stalled = false;
    this.phase = "idle";
    this.error = null;
  }

  private changed(): void {
    this.onchange?.();
  }
}
