/** Asset transport: the manifest + segment interface and its HTTP form.
 *
 * Segment paths come straight from the manifest (relative to the asset
 * root), so the viewer works against anything that serves the baked
 * directory — the bundled stream server or any static file host.
 */

export interface Source {
  manifest(): Promise<string>;
  segment(file: string): Promise<Uint8Array>;
}

export class SourceError extends Error {}

export class HttpSource implements Source {
  readonly base: string;

  constructor(url: string) {
    // normalize so relative segment paths resolve under the asset root
    this.base = url.endsWith("/") ? url : url + "/";
  }

  private async get(path: string): Promise<Response> {
    let res: Response;
    try {
      res = await fetch(this.base + path);
    } catch (e) {
      throw new SourceError(`fetch ${path}: ${(e as Error).message}`);
    }
    if (!res.ok) {
      throw new SourceError(`fetch ${path}: HTTP ${res.status}`);
    }
    return res;
  }

  async manifest(): Promise<string> {
    return (await this.get("manifest.json")).text();
  }

  async segment(file: string): Promise<Uint8Array> {
    return new Uint8Array(await (await this.get(file)).arrayBuffer());
  }
}
