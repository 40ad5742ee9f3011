/** Depth-sort worker: positions + view matrix in, draw order out. */

import { depthSort } from "./sort.js";
import type { Mat4 } from "./orbit.js";

export interface SortRequest {
  /** (N, 3) row-major positions; transferred, returned with the reply. */
  positions: Float32Array;
  count: number;
  view: Mat4;
  /** Echoed so the requester can drop superseded replies. */
  token: number;
}

export interface SortReply {
  order: Uint32Array;
  positions: Float32Array;
  token: number;
}

const scope = self as unknown as {
  postMessage(msg: unknown, transfer?: ArrayBufferLike[]): void;
  onmessage: ((e: MessageEvent<SortRequest>) => void) | null;
};

scope.onmessage = (e) => {
  const { positions, count, view, token } = e.data;
  const order = depthSort(positions, count, view);
  const reply: SortReply = { order, positions, token };
  scope.postMessage(reply, [order.buffer, positions.buffer]);
};
