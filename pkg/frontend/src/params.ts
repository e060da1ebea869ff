import { Store, mergePatch } from "./store.js";
import { Transport } from "./transport.js";
import { LiveParams, ParamPatch } from "./types.js";

// Debounced writer for POST /api/params.  Edits merge into one queued
// patch and go out at most once per `intervalMs`, so a slider drag that
// fires every frame still lands on the wire at <= 5 requests a second.
// A control stays in `pending` from the moment it is edited until the
// server echo that covers that exact edit comes back; if the user edits
// again while a request is in flight, the echo of the older request must
// not release the key.

export interface ParamClient {
  edit(patch: ParamPatch): void;
  reset(): Promise<void>;
  /** True while a flush is scheduled or a request is in flight. */
  busy(): boolean;
}

export function createParamClient(
  base: string,
  transport: Transport,
  store: Store,
  intervalMs = 200,
): ParamClient {
  let queue: ParamPatch = {};
  let timer: number | null = null;
  let lastPostAt = -Infinity;
  let seq = 0;
  let inFlight = 0;
  const editGen = new Map<keyof LiveParams, number>();
  let gen = 0;

  function schedule() {
    if (timer !== null) return;
    const delay = Math.max(0, lastPostAt + intervalMs - transport.now());
    timer = transport.setTimer(flush, delay);
  }

  function flush() {
    timer = null;
    const sent = queue;
    const keys = Object.keys(sent) as (keyof LiveParams)[];
    if (keys.length === 0) return;
    queue = {};
    const sentGen = new Map<keyof LiveParams, number>();
    for (const k of keys) sentGen.set(k, editGen.get(k)!);
    const mySeq = ++seq;
    lastPostAt = transport.now();
    inFlight += 1;
    transport
      .postJson(base + "/api/params", sent)
      .then((resp) => {
        // only keys the user has not touched again are settled by this echo
        const acked = keys.filter((k) => editGen.get(k) === sentGen.get(k));
        if (resp.ok) {
          if (mySeq === seq) {
            store.applyEcho(resp.body as LiveParams, acked);
          } else {
            // a newer request is in flight; its echo will carry the params
            store.clearPending(acked);
          }
        } else {
          const body = (resp.body ?? {}) as { error?: string };
          store.setError(body.error ?? `request failed (${resp.status})`);
          store.clearPending(acked);
        }
      })
      .catch(() => {
        store.setError("server unreachable");
        store.clearPending(keys.filter((k) => editGen.get(k) === sentGen.get(k)));
      })
      .finally(() => {
        inFlight -= 1;
      });
  }

  return {
    edit(patch) {
      gen += 1;
      const keys = Object.keys(patch) as (keyof LiveParams)[];
      for (const k of keys) editGen.set(k, gen);
      queue = mergePatch(queue, patch);
      store.markPending(keys);
      schedule();
    },
    async reset() {
      const resp = await transport.postJson(base + "/api/reset", {});
      if (!resp.ok) {
        const body = (resp.body ?? {}) as { error?: string };
        store.setError(body.error ?? `reset failed (${resp.status})`);
      }
    },
    busy: () => timer !== null || inFlight > 0,
  };
}
