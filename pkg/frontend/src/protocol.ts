/** Message protocol between the UI thread and the pipeline worker.
 *
 * The worker owns the whole fetch/decode/reconstruct pipeline; the UI
 * thread holds only a small mailbox of ready frames. Flow control is
 * credit-based: the client grants the worker one push per consumed frame
 * (plus a full window after load/seek), so a paused viewer buffers a few
 * frames ahead and then stops pulling bytes entirely. Every push carries
 * the seek sequence number it was produced under; the client drops pushes
 * from before its latest seek the same way the pipeline drops stale
 * generations.
 *
 * Both ends are plain classes over a postMessage function, so tests wire
 * them back to back without a real Worker.
 */

import { groupForFrame, type Manifest } from "./manifest.js";
import {
  EndOfStream,
  FRAME_QUEUE_FRAMES,
  Pipeline,
  PipelineClosed,
  Stalled,
  StageTimings,
  type PipelineLike,
} from "./pipeline.js";
import { parseManifest } from "./manifest.js";
import type { SplatFrame } from "./reconstruct.js";
import { HttpSource, type Source } from "./source.js";

export type ToWorker =
  | { t: "load"; url: string }
  | { t: "seek"; frame: number; seq: number; grant: number }
  | { t: "want"; n: number }
  | { t: "close" };

export interface StageStats {
  count: number;
  totalMs: number;
}

export interface Status {
  decodedGroups: number[];
  stalls: number;
  timings: Record<"fetch" | "decode" | "reconstruct", StageStats>;
}

export type FromWorker =
  | { t: "loaded"; manifest: Manifest; status: Status }
  | { t: "loaderror"; message: string }
  | { t: "frame"; seq: number; frame: SplatFrame; status: Status }
  | { t: "eos"; seq: number; status: Status }
  | { t: "fail"; seq: number; message: string; status: Status };

export type PostFn<M> = (msg: M, transfer?: ArrayBuffer[]) => void;

const PUMP_TIMEOUT_MS = 60000;

function frameTransfers(frame: SplatFrame): ArrayBuffer[] {
  const buffers = [
    frame.positions.buffer,
    frame.rotations.buffer,
    frame.logScales.buffer,
    frame.opacities.buffer,
    frame.colors.buffer,
    frame.sh.buffer,
  ];
  // a zero-channel sh view may share a detached or duplicate buffer; keep
  // the transfer list unique and transferable
  return [...new Set(buffers)].filter((b): b is ArrayBuffer => b instanceof ArrayBuffer);
}

/** Worker-side half: drives a Pipeline and pushes frames on credit. */
export class WorkerBackend {
  private pipeline: Pipeline | null = null;
  private grants = 0;
  private seq = 0;
  private pumping = false;
  private closed = false;
  // a seek can land while the pump is suspended in nextFrame; it is
  // staged here and adopted at a safe point in the pump loop
  private pendingSeek: { seq: number; grant: number; frame: number } | null = null;
  // in-order contract: the only frame the current stream may post next
  private expectNext = 0;

  constructor(
    private readonly post: PostFn<FromWorker>,
    private readonly makeSource: (url: string) => Source = (u) => new HttpSource(u),
  ) {}

  async handle(msg: ToWorker): Promise<void> {
    switch (msg.t) {
      case "load": {
        try {
          const source = this.makeSource(msg.url);
          const manifest = parseManifest(await source.manifest());
          this.pipeline = new Pipeline(source, manifest);
          this.grants = FRAME_QUEUE_FRAMES;
          this.seq = 0;
          this.expectNext = 0;
          this.pendingSeek = null;
          this.post({ t: "loaded", manifest, status: this.status() });
          void this.pump();
        } catch (e) {
          this.post({ t: "loaderror", message: messageOf(e) });
        }
        break;
      }
      case "seek": {
        if (this.pipeline === null) break;
        this.pendingSeek = { seq: msg.seq, grant: msg.grant, frame: msg.frame };
        this.pipeline.seek(msg.frame);
        void this.pump();
        break;
      }
      case "want": {
        this.grants += msg.n;
        void this.pump();
        break;
      }
      case "close": {
        this.closed = true;
        this.pipeline?.close();
        break;
      }
    }
  }

  private status(): Status {
    const p = this.pipeline;
    const stats = (s: StageTimings): StageStats => ({ count: s.count, totalMs: s.totalMs });
    return {
      decodedGroups: p ? [...p.decodedGroups] : [],
      stalls: p?.stalls ?? 0,
      timings: {
        fetch: stats(p?.timings.fetch ?? new StageTimings("fetch")),
        decode: stats(p?.timings.decode ?? new StageTimings("decode")),
        reconstruct: stats(p?.timings.reconstruct ?? new StageTimings("reconstruct")),
      },
    };
  }

  /** Switch to the newest staged stream, if any. */
  private adoptSeek(): boolean {
    if (this.pendingSeek === null) return false;
    this.seq = this.pendingSeek.seq;
    this.grants = this.pendingSeek.grant;
    this.expectNext = this.pendingSeek.frame;
    this.pendingSeek = null;
    return true;
  }

  private async pump(): Promise<void> {
    if (this.pumping) return;
    this.pumping = true;
    try {
      for (;;) {
        this.adoptSeek();
        if (this.closed || this.pipeline === null || this.grants <= 0) return;
        let frame: SplatFrame;
        try {
          frame = await this.pipeline.nextFrame(PUMP_TIMEOUT_MS);
        } catch (e) {
          if (e instanceof Stalled) continue; // keep waiting on the pipeline
          if (e instanceof PipelineClosed) return;
          if (this.pendingSeek !== null) continue; // ending of a superseded stream
          if (e instanceof EndOfStream) {
            this.post({ t: "eos", seq: this.seq, status: this.status() });
          } else {
            this.post({ t: "fail", seq: this.seq, message: messageOf(e), status: this.status() });
          }
          return; // parked until the next seek restarts the pump
        }
        // a seek may have landed while this frame was in flight — and the
        // frame may already be the reseeked stream's first delivery, so
        // adopt the seek first and let the in-order check decide
        this.adoptSeek();
        if (frame.frameIndex !== this.expectNext) continue; // leftover, drop it
        this.grants -= 1;
        this.expectNext = frame.frameIndex + 1;
        this.post(
          { t: "frame", seq: this.seq, frame, status: this.status() },
          frameTransfers(frame),
        );
      }
    } finally {
      this.pumping = false;
    }
  }
}

/** UI-side half: a PipelineLike fed by worker pushes. */
export class WorkerPipeline implements PipelineLike {
  manifest!: Manifest;
  decodedGroups: number[] = [];
  readonly timings = {
    fetch: new StageTimings("fetch"),
    decode: new StageTimings("decode"),
    reconstruct: new StageTimings("reconstruct"),
  };
  stalls = 0;
  atEnd = false;

  private seq = 0;
  private mailbox: SplatFrame[] = [];
  private lastFrame: SplatFrame | null = null;
  private pendingError: Error | null = null;
  private closed = false;
  private arrivalWaiters: Array<() => void> = [];
  private loadWaiter: { resolve: () => void; reject: (e: Error) => void } | null = null;

  constructor(
    private readonly post: PostFn<ToWorker>,
    private readonly release: () => void = () => {},
  ) {}

  /** Feed every message from the worker here. */
  handleMessage(msg: FromWorker): void {
    switch (msg.t) {
      case "loaded": {
        this.manifest = msg.manifest;
        this.applyStatus(msg.status);
        this.loadWaiter?.resolve();
        this.loadWaiter = null;
        break;
      }
      case "loaderror": {
        const err = new Error(msg.message);
        if (this.loadWaiter !== null) {
          this.loadWaiter.reject(err);
          this.loadWaiter = null;
        } else {
          this.pendingError = err;
        }
        this.wakeArrivals();
        break;
      }
      case "frame": {
        this.applyStatus(msg.status);
        // a stale push always follows a seek, and the seek's grant reset
        // has already re-budgeted the window — no credit to return
        if (msg.seq !== this.seq) break;
        this.mailbox.push(msg.frame);
        this.wakeArrivals();
        break;
      }
      case "eos": {
        this.applyStatus(msg.status);
        if (msg.seq === this.seq) this.atEnd = true;
        this.wakeArrivals();
        break;
      }
      case "fail": {
        this.applyStatus(msg.status);
        if (msg.seq === this.seq) this.pendingError = new Error(msg.message);
        this.wakeArrivals();
        break;
      }
    }
  }

  /** Handshake: ask the worker to open the asset. */
  load(url: string): Promise<void> {
    return new Promise((resolve, reject) => {
      this.loadWaiter = { resolve, reject };
      this.post({ t: "load", url });
    });
  }

  async nextFrame(timeoutMs = 5000): Promise<SplatFrame> {
    const deadline = nowMs() + timeoutMs;
    for (;;) {
      if (this.closed) throw new PipelineClosed();
      if (this.pendingError !== null) {
        const e = this.pendingError;
        this.pendingError = null;
        throw e;
      }
      const frame = this.mailbox.shift();
      if (frame !== undefined) {
        this.lastFrame = frame;
        this.post({ t: "want", n: 1 });
        return frame;
      }
      if (this.atEnd) throw new EndOfStream();
      const remaining = deadline - nowMs();
      if (remaining <= 0) {
        this.stalls += 1;
        throw new Stalled(`no frame within ${timeoutMs} ms`);
      }
      await this.arrival(remaining);
    }
  }

  tryNextFrame(): { frame: SplatFrame | null; fresh: boolean } {
    if (this.pendingError !== null) {
      const e = this.pendingError;
      this.pendingError = null;
      throw e;
    }
    const frame = this.mailbox.shift();
    if (frame === undefined) {
      if (this.lastFrame !== null && !this.atEnd) this.stalls += 1;
      return { frame: this.lastFrame, fresh: false };
    }
    this.lastFrame = frame;
    this.post({ t: "want", n: 1 });
    return { frame, fresh: true };
  }

  seek(frame: number): void {
    if (this.closed) throw new PipelineClosed();
    groupForFrame(this.manifest, frame); // same range validation as in-thread
    this.seq += 1;
    this.mailbox = [];
    this.atEnd = false;
    this.pendingError = null;
    this.post({ t: "seek", frame, seq: this.seq, grant: FRAME_QUEUE_FRAMES });
  }

  close(): void {
    if (this.closed) return;
    this.closed = true;
    this.post({ t: "close" });
    this.wakeArrivals();
    this.release();
  }

  private applyStatus(status: Status): void {
    this.decodedGroups = status.decodedGroups;
    this.stalls = Math.max(this.stalls, status.stalls);
    for (const name of ["fetch", "decode", "reconstruct"] as const) {
      this.timings[name].count = status.timings[name].count;
      this.timings[name].totalMs = status.timings[name].totalMs;
    }
  }

  private arrival(timeoutMs: number): Promise<void> {
    return new Promise((resolve) => {
      let done = false;
      const timer = setTimeout(() => {
        if (!done) {
          done = true;
          resolve();
        }
      }, timeoutMs);
      this.arrivalWaiters.push(() => {
        if (!done) {
          done = true;
          clearTimeout(timer);
          resolve();
        }
      });
    });
  }

  private wakeArrivals(): void {
    const w = this.arrivalWaiters;
    this.arrivalWaiters = [];
    for (const wake of w) wake();
  }
}

function messageOf(e: unknown): string {
  return e instanceof Error ? e.message : String(e);
}

function nowMs(): number {
  return typeof performance !== "undefined" ? performance.now() : Date.now();
}
