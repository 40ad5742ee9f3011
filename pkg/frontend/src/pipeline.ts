/** Streaming pipeline: fetch -> decode -> reconstruct over bounded queues.
 *
 * Three async stages run concurrently, connected by small buffers (groups
 * in flight on the fetch and decode side, frames on the delivery side), so
 * steady-state throughput tracks the slowest stage instead of the sum.
 * Every queued item carries the generation counter it was produced under;
 * a seek bumps the generation, drains the queues and retargets the fetch
 * cursor at the group holding the requested frame, with leading frames of
 * that group decoded and dropped so delivery starts exactly on target.
 */

import { groupForFrame, type GroupEntry, type Manifest } from "./manifest.js";
import { decodeGroup, type DecodedGroup } from "./codec.js";
import { unpackFrame, type SplatFrame } from "./reconstruct.js";
import type { Source } from "./source.js";

export const FETCH_QUEUE_GROUPS = 3;
export const DECODE_QUEUE_GROUPS = 2;
export const FRAME_QUEUE_FRAMES = 4;

export class EndOfStream extends Error {
  constructor() {
    super("end of stream");
  }
}

export class Stalled extends Error {}

export class PipelineClosed extends Error {
  constructor() {
    super("pipeline is closed");
  }
}

const now = (): number =>
  typeof performance !== "undefined" ? performance.now() : Date.now();

export class StageTimings {
  count = 0;
  totalMs = 0;

  constructor(readonly name: string) {}

  add(ms: number): void {
    this.count += 1;
    this.totalMs += ms;
  }

  get meanMs(): number {
    return this.count === 0 ? 0 : this.totalMs / this.count;
  }
}

type Waiter = { resolve: (got: boolean) => void; timer?: ReturnType<typeof setTimeout> };

/** Bounded FIFO connecting two async stages. */
class Channel<T> {
  private items: T[] = [];
  private putters: Waiter[] = [];
  private getters: Waiter[] = [];
  closed = false;

  constructor(readonly capacity: number) {}

  private wake(list: Waiter[]): void {
    const w = list.shift();
    if (w !== undefined) {
      if (w.timer !== undefined) clearTimeout(w.timer);
      w.resolve(true);
    }
  }

  private wakeAll(list: Waiter[]): void {
    while (list.length > 0) this.wake(list);
  }

  async put(item: T): Promise<void> {
    while (this.items.length >= this.capacity && !this.closed) {
      await new Promise<boolean>((resolve) => this.putters.push({ resolve }));
    }
    if (this.closed) return; // writes to a closed channel vanish
    this.items.push(item);
    this.wake(this.getters);
  }

  /** Next item, or "closed" once drained, or "timeout". */
  async get(timeoutMs?: number): Promise<{ value: T } | "closed" | "timeout"> {
    while (this.items.length === 0) {
      if (this.closed) return "closed";
      const ok = await new Promise<boolean>((resolve) => {
        const waiter: Waiter = { resolve };
        if (timeoutMs !== undefined) {
          waiter.timer = setTimeout(() => {
            const at = this.getters.indexOf(waiter);
            if (at >= 0) this.getters.splice(at, 1);
            resolve(false);
          }, timeoutMs);
        }
        this.getters.push(waiter);
      });
      if (!ok) return "timeout";
    }
    const value = this.items.shift() as T;
    this.wake(this.putters);
    return { value };
  }

  /** Non-blocking get. */
  tryGet(): { value: T } | undefined {
    if (this.items.length === 0) return undefined;
    const value = this.items.shift() as T;
    this.wake(this.putters);
    return { value };
  }

  clear(): void {
    this.items = [];
    this.wakeAll(this.putters);
  }

  close(): void {
    this.closed = true;
    this.wakeAll(this.putters);
    this.wakeAll(this.getters);
  }
}

/** Wakes parked stages after a seek or close. */
class Signal {
  private waiters: Array<() => void> = [];

  wait(): Promise<void> {
    return new Promise((resolve) => this.waiters.push(resolve));
  }

  notifyAll(): void {
    const w = this.waiters;
    this.waiters = [];
    for (const resolve of w) resolve();
  }
}

type Item<T> =
  | { gen: number; kind: "data"; value: T }
  | { gen: number; kind: "error"; error: unknown }
  | { gen: number; kind: "eos" };

/** Consumer surface of a pipeline; satisfied by the in-thread Pipeline and
 * by the worker-backed proxy, so the viewer never cares which drives it. */
export interface PipelineLike {
  readonly manifest: Manifest;
  readonly decodedGroups: number[];
  readonly timings: Record<"fetch" | "decode" | "reconstruct", StageTimings>;
  stalls: number;
  atEnd: boolean;
  nextFrame(timeoutMs?: number): Promise<SplatFrame>;
  tryNextFrame(): { frame: SplatFrame | null; fresh: boolean };
  seek(frame: number): void;
  close(): void;
}

interface FetchedGroup {
  entry: GroupEntry;
  segments: Record<string, Uint8Array>;
  deliverFrom: number;
}

interface DecodedItem {
  group: DecodedGroup;
  deliverFrom: number;
}

export class Pipeline {
  readonly timings = {
    fetch: new StageTimings("fetch"),
    decode: new StageTimings("decode"),
    reconstruct: new StageTimings("reconstruct"),
  };

  /** Group indices decoded so far, in decode order. */
  readonly decodedGroups: number[] = [];
  stalls = 0;
  /** True once the consumer has drained the final frame; seek clears it. */
  atEnd = false;

  private gen = 0;
  private nextGroup = 0;
  private deliverFrom = 0;
  private closed = false;
  private readonly wakeup = new Signal();
  private readonly fetchQ = new Channel<Item<FetchedGroup>>(FETCH_QUEUE_GROUPS);
  private readonly decodeQ = new Channel<Item<DecodedItem>>(DECODE_QUEUE_GROUPS);
  private readonly frameQ = new Channel<Item<SplatFrame>>(FRAME_QUEUE_FRAMES);
  private lastFrame: SplatFrame | null = null;

  constructor(
    private readonly source: Source,
    readonly manifest: Manifest,
    startFrame = 0,
  ) {
    const entry = groupForFrame(manifest, startFrame);
    this.nextGroup = entry.index;
    this.deliverFrom = startFrame;
    void this.fetchLoop();
    void this.decodeLoop();
    void this.reconstructLoop();
  }

  // --- stages -------------------------------------------------------------

  private async fetchLoop(): Promise<void> {
    while (!this.closed) {
      const gen = this.gen;
      const g = this.nextGroup;
      if (g >= this.manifest.groups.length) {
        // past the last group; sleep until a seek rewinds or close
        await this.wakeup.wait();
        continue;
      }
      const entry = this.manifest.groups[g];
      const deliverFrom = this.deliverFrom;
      let fetched: FetchedGroup;
      try {
        const t0 = now();
        const segments: Record<string, Uint8Array> = {};
        await Promise.all(
          Object.entries(entry.streams).map(async ([name, s]) => {
            segments[name] = await this.source.segment(s.file);
          }),
        );
        // a seek does not abort an in-flight fetch; the result is discarded
        if (this.gen !== gen || this.closed) continue;
        this.timings.fetch.add(now() - t0);
        fetched = { entry, segments, deliverFrom };
      } catch (error) {
        if (this.gen !== gen || this.closed) continue;
        await this.fetchQ.put({ gen, kind: "error", error });
        // park; only a seek (new generation) or close recovers
        while (!this.closed && this.gen === gen) await this.wakeup.wait();
        continue;
      }
      await this.fetchQ.put({ gen, kind: "data", value: fetched });
      if (this.gen === gen && !this.closed) {
        this.nextGroup = g + 1;
        // later groups deliver every frame; only the seek target skips
        this.deliverFrom = entry.startFrame + entry.numFrames;
      }
    }
  }

  private async decodeLoop(): Promise<void> {
    while (!this.closed) {
      const got = await this.fetchQ.get();
      if (got === "closed" || got === "timeout") break;
      const item = got.value;
      if (item.gen !== this.gen) continue;
      if (item.kind !== "data") {
        await this.decodeQ.put(item as Item<DecodedItem>);
        continue;
      }
      let decoded: DecodedItem;
      try {
        const t0 = now();
        const group = await decodeGroup(item.value.entry, item.value.segments);
        if (item.gen !== this.gen || this.closed) continue;
        this.timings.decode.add(now() - t0);
        decoded = { group, deliverFrom: item.value.deliverFrom };
      } catch (error) {
        await this.decodeQ.put({ gen: item.gen, kind: "error", error });
        continue;
      }
      await this.decodeQ.put({ gen: item.gen, kind: "data", value: decoded });
      if (item.gen === this.gen && !this.closed) {
        this.decodedGroups.push(item.value.entry.index);
      }
    }
  }

  private async reconstructLoop(): Promise<void> {
    while (!this.closed) {
      const got = await this.decodeQ.get();
      if (got === "closed" || got === "timeout") break;
      const item = got.value;
      if (item.gen !== this.gen) continue;
      if (item.kind !== "data") {
        await this.frameQ.put(item as Item<SplatFrame>);
        continue;
      }
      const { group, deliverFrom } = item.value;
      const entry = group.entry;
      for (let t = 0; t < entry.numFrames; t++) {
        if (item.gen !== this.gen || this.closed) break;
        if (entry.startFrame + t < deliverFrom) continue; // seek landing: drop
        const t0 = now();
        const frame = unpackFrame(group, t);
        this.timings.reconstruct.add(now() - t0);
        await this.frameQ.put({ gen: item.gen, kind: "data", value: frame });
      }
      if (
        item.gen === this.gen &&
        !this.closed &&
        entry.index === this.manifest.groups.length - 1
      ) {
        await this.frameQ.put({ gen: item.gen, kind: "eos" });
      }
    }
  }

  // --- consumer side ------------------------------------------------------

  /** Next frame in play order. Throws EndOfStream past the last frame,
   * Stalled when the pipeline cannot deliver within the timeout, and
   * re-raises fetch/decode failures. */
  async nextFrame(timeoutMs = 5000): Promise<SplatFrame> {
    const deadline = now() + timeoutMs;
    for (;;) {
      if (this.closed) throw new PipelineClosed();
      if (this.atEnd) throw new EndOfStream(); // repeatable until a seek rewinds
      const remaining = deadline - now();
      if (remaining <= 0) {
        this.stalls += 1;
        throw new Stalled(`no frame within ${timeoutMs} ms`);
      }
      const got = await this.frameQ.get(remaining);
      if (got === "closed") throw new PipelineClosed();
      if (got === "timeout") {
        this.stalls += 1;
        throw new Stalled(`no frame within ${timeoutMs} ms`);
      }
      const item = got.value;
      if (item.gen !== this.gen) continue;
      if (item.kind === "error") throw wrapError(item.error);
      if (item.kind === "eos") {
        this.atEnd = true;
        throw new EndOfStream();
      }
      this.lastFrame = item.value;
      return item.value;
    }
  }

  /** Non-blocking pull for render loops: fresh frame when one is ready,
   * otherwise the previous frame again with fresh=false (a stall). */
  tryNextFrame(): { frame: SplatFrame | null; fresh: boolean } {
    for (;;) {
      if (this.closed) return { frame: this.lastFrame, fresh: false };
      const got = this.frameQ.tryGet();
      if (got === undefined) {
        if (this.lastFrame !== null && !this.atEnd) this.stalls += 1;
        return { frame: this.lastFrame, fresh: false };
      }
      const item = got.value;
      if (item.gen !== this.gen) continue;
      if (item.kind === "error") throw wrapError(item.error);
      if (item.kind === "eos") {
        this.atEnd = true;
        return { frame: this.lastFrame, fresh: false };
      }
      this.lastFrame = item.value;
      return { frame: item.value, fresh: true };
    }
  }

  /** Retarget playback at `frame`: decode restarts at its group's first
   * frame, delivery at the frame itself. */
  seek(frame: number): void {
    if (this.closed) throw new PipelineClosed();
    const entry = groupForFrame(this.manifest, frame); // validates range
    this.gen += 1;
    this.nextGroup = entry.index;
    this.deliverFrom = frame;
    this.atEnd = false;
    this.fetchQ.clear();
    this.decodeQ.clear();
    this.frameQ.clear();
    this.wakeup.notifyAll();
  }

  close(): void {
    if (this.closed) return;
    this.closed = true;
    this.gen += 1;
    this.fetchQ.close();
    this.decodeQ.close();
    this.frameQ.close();
    this.wakeup.notifyAll();
  }
}

function wrapError(error: unknown): Error {
  return error instanceof Error ? error : new Error(String(error));
}
