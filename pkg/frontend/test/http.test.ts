import { spawn, type ChildProcess } from "node:child_process";
import { readFile } from "node:fs/promises";
import { createServer, type Server } from "node:http";
import type { AddressInfo } from "node:net";
import * as path from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { parseManifest, stepBound } from "../src/manifest.js";
import { EndOfStream, Pipeline } from "../src/pipeline.js";
import type { SplatFrame } from "../src/reconstruct.js";
import { HttpSource, SourceError } from "../src/source.js";
import { Viewer } from "../src/viewer.js";
import { FIXTURES, maxAbsDiff, readExpectedFrame } from "./helpers.js";

/** A bare static file server over the fixtures directory. */
function serveStatic(): Promise<{ server: Server; base: string }> {
  const root = path.resolve(FIXTURES);
  const server = createServer((req, res) => {
    void (async () => {
      const url = new URL(req.url ?? "/", "http://localhost");
      const file = path.normalize(path.join(root, decodeURIComponent(url.pathname)));
      if (!file.startsWith(root)) {
        res.writeHead(403);
        res.end();
        return;
      }
      try {
        const data = await readFile(file);
        res.writeHead(200, {
          "content-type": file.endsWith(".json")
            ? "application/json"
            : "application/octet-stream",
        });
        res.end(data);
      } catch {
        res.writeHead(404);
        res.end("not found");
      }
    })();
  });
  return new Promise((resolve) => {
    server.listen(0, "127.0.0.1", () => {
      const { port } = server.address() as AddressInfo;
      resolve({ server, base: `http://127.0.0.1:${port}/` });
    });
  });
}

async function collectToEnd(pipeline: Pipeline): Promise<SplatFrame[]> {
  const frames: SplatFrame[] = [];
  for (;;) {
    try {
      frames.push(await pipeline.nextFrame());
    } catch (e) {
      if (e instanceof EndOfStream) return frames;
      throw e;
    }
  }
}

describe("HTTP transport", () => {
  let server: Server;
  let base: string;

  beforeAll(async () => {
    ({ server, base } = await serveStatic());
  });

  afterAll(() => new Promise<void>((r) => server.close(() => r())));

  it("streams a served asset through the full pipeline", async () => {
    const source = new HttpSource(base + "asset_small");
    const manifest = parseManifest(await source.manifest());
    const pipeline = new Pipeline(source, manifest);
    try {
      const frames = await collectToEnd(pipeline);
      expect(frames.map((f) => f.frameIndex)).toEqual([0, 1, 2, 3, 4, 5]);

      // the bytes that crossed HTTP reconstruct to the reference frame
      const expected = readExpectedFrame("asset_small", 0);
      const bound = Math.max(...stepBound(manifest.groups[0].quant.position));
      expect(maxAbsDiff(frames[0].positions, expected.positions)).toBeLessThanOrEqual(bound);
    } finally {
      pipeline.close();
    }
  });

  it("loads through the viewer's default connector", async () => {
    const viewer = new Viewer();
    try {
      await viewer.load(base + "asset_play");
      expect(viewer.state.phase).toBe("ready");
      expect(viewer.state.splatCount).toBe(10000);

      const t0 = performance.now();
      await viewer.scrub(25);
      expect(performance.now() - t0).toBeLessThan(500);
      expect(viewer.state.frame).toBe(25);
      expect(viewer.state.bufferedGroups).toContain(1);
    } finally {
      viewer.close();
    }
  });

  it("reports missing assets as source errors with the status code", async () => {
    const source = new HttpSource(base + "no_such_asset");
    await expect(source.manifest()).rejects.toThrow(SourceError);
    await expect(source.manifest()).rejects.toThrow(/HTTP 404/);

    const viewer = new Viewer();
    await viewer.load(base + "no_such_asset");
    expect(viewer.state.phase).toBe("error");
    expect(viewer.state.error).toMatch(/HTTP 404/);
    viewer.close();
  });
});

describe("against the real stream server", () => {
  let child: ChildProcess | null = null;
  let base = "";

  beforeAll(async () => {
    const root = path.join(path.resolve(FIXTURES), "asset_small");
    child = spawn("splatstream", ["serve", "--root", root, "--addr", "127.0.0.1:0"], {
      env: { ...process.env, PYTHONUNBUFFERED: "1" },
      stdio: ["ignore", "pipe", "pipe"],
    });
    base = await new Promise<string>((resolve, reject) => {
      let out = "";
      const timer = setTimeout(() => reject(new Error(`server never came up: ${out}`)), 20000);
      child!.stdout!.on("data", (chunk: Buffer) => {
        out += chunk.toString();
        const m = out.match(/at (http:\/\/[0-9.:]+)/);
        if (m) {
          clearTimeout(timer);
          resolve(m[1] + "/");
        }
      });
      child!.stderr!.on("data", (chunk: Buffer) => {
        out += chunk.toString();
      });
      child!.on("error", (e) => {
        clearTimeout(timer);
        reject(e);
      });
    });
  }, 30000);

  afterAll(() => {
    child?.kill("SIGTERM");
  });

  it("plays an asset served by the stream server", async () => {
    const source = new HttpSource(base);
    const manifest = parseManifest(await source.manifest());
    const pipeline = new Pipeline(source, manifest);
    try {
      const frames = await collectToEnd(pipeline);
      expect(frames.map((f) => f.frameIndex)).toEqual([0, 1, 2, 3, 4, 5]);
      const expected = readExpectedFrame("asset_small", 5);
      expect(maxAbsDiff(frames[5].colors, expected.colors)).toBeLessThanOrEqual(1e-9);
    } finally {
      pipeline.close();
    }
  }, 20000);

  it("loads in the viewer straight off the server URL", async () => {
    const viewer = new Viewer();
    try {
      await viewer.load(base);
      expect(viewer.state.phase).toBe("ready");
      expect(viewer.state.frame).toBe(0);
      expect(viewer.state.splatCount).toBe(120);
    } finally {
      viewer.close();
    }
  }, 20000);
});
