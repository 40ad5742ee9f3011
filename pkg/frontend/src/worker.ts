/** Pipeline worker entry: one WorkerBackend wired to postMessage. */

import { WorkerBackend, type ToWorker } from "./protocol.js";

const scope = self as unknown as {
  postMessage(msg: unknown, transfer?: ArrayBuffer[]): void;
  onmessage: ((e: MessageEvent<ToWorker>) => void) | null;
};

const backend = new WorkerBackend((msg, transfer) => scope.postMessage(msg, transfer ?? []));

scope.onmessage = (e) => {
  void backend.handle(e.data);
};
