import { ConnectionStatus, LiveParams, ParamPatch, ServerState } from "./types.js";

// Single source of truth for the panel.  The one rule that matters:
// `params` is only ever written from data the server sent back (a state
// message or a POST echo).  Local edits live in `pending` until the echo
// lands, so the controls can never show a value the server never accepted.

export interface UiState {
  status: ConnectionStatus;
  state: ServerState | null;
  params: LiveParams | null;
  pending: ReadonlySet<keyof LiveParams>;
  error: string | null;
}

export type Listener = (s: UiState) => void;

export interface Store {
  get(): UiState;
  subscribe(fn: Listener): () => void;
  setStatus(status: ConnectionStatus): void;
  /** Adopt a full state message from the stream. */
  applyServerState(state: ServerState): void;
  /** Adopt the params echoed by a POST /api/params response. */
  applyEcho(params: LiveParams, acked: (keyof LiveParams)[]): void;
  markPending(keys: (keyof LiveParams)[]): void;
  clearPending(keys: (keyof LiveParams)[]): void;
  setError(msg: string | null): void;
}

export function createStore(): Store {
  let current: UiState = {
    status: "connecting",
    state: null,
    params: null,
    pending: new Set(),
    error: null,
  };
  const listeners: Listener[] = [];

  function commit(next: UiState) {
    current = next;
    for (const fn of listeners.slice()) fn(current);
  }

  return {
    get: () => current,
    subscribe(fn) {
      listeners.push(fn);
      fn(current);
      return () => {
        const i = listeners.indexOf(fn);
        if (i >= 0) listeners.splice(i, 1);
      };
    },
    setStatus(status) {
      if (status !== current.status) commit({ ...current, status });
    },
    applyServerState(state) {
      commit({ ...current, state, params: state.params });
    },
    applyEcho(params, acked) {
      const pending = new Set(current.pending);
      for (const k of acked) pending.delete(k);
      commit({ ...current, params, pending, error: null });
    },
    markPending(keys) {
      const pending = new Set(current.pending);
      for (const k of keys) pending.add(k);
      commit({ ...current, pending });
    },
    clearPending(keys) {
      const pending = new Set(current.pending);
      for (const k of keys) pending.delete(k);
      commit({ ...current, pending });
    },
    setError(msg) {
      if (msg !== current.error) commit({ ...current, error: msg });
    },
  };
}

/** Merge a later patch over an earlier one (last write per key wins). */
export function mergePatch(base: ParamPatch, next: ParamPatch): ParamPatch {
  return { ...base, ...next };
}
