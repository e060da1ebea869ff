import { Store } from "./store.js";
import { SocketLike, Transport, wsUrl } from "./transport.js";
import { isServerState } from "./types.js";

// Stream connection with reconnect.  The contract the rest of the panel
// relies on: once the server stops answering, the store status flips to
// "down" within 2 seconds (a refused socket errors immediately, a black
// hole is cut off by the connect timeout), and attempts keep going with
// exponential backoff until the server returns.

export interface SessionOptions {
  connectTimeoutMs?: number;
  backoffBaseMs?: number;
  backoffCapMs?: number;
  onFrame?: (bytes: ArrayBuffer) => void;
}

export interface Session {
  start(): void;
  stop(): void;
}

export function createSession(
  base: string,
  transport: Transport,
  store: Store,
  opts: SessionOptions = {},
): Session {
  const connectTimeoutMs = opts.connectTimeoutMs ?? 1500;
  const backoffBaseMs = opts.backoffBaseMs ?? 500;
  const backoffCapMs = opts.backoffCapMs ?? 10000;

  let socket: SocketLike | null = null;
  let connectTimer: number | null = null;
  let retryTimer: number | null = null;
  let failures = 0;
  let stopped = true;

  function clearTimers() {
    if (connectTimer !== null) {
      transport.clearTimer(connectTimer);
      connectTimer = null;
    }
    if (retryTimer !== null) {
      transport.clearTimer(retryTimer);
      retryTimer = null;
    }
  }

  function scheduleRetry() {
    if (stopped || retryTimer !== null) return;
    const delay = Math.min(backoffBaseMs * 2 ** failures, backoffCapMs);
    failures += 1;
    retryTimer = transport.setTimer(() => {
      retryTimer = null;
      open();
    }, delay);
  }

  function drop(sock: SocketLike) {
    // each attempt settles once; late close-after-error must not
    // schedule a second retry
    if (sock !== socket) return;
    socket = null;
    if (connectTimer !== null) {
      transport.clearTimer(connectTimer);
      connectTimer = null;
    }
    sock.onopen = sock.onmessage = sock.onclose = sock.onerror = null;
    store.setStatus("down");
    scheduleRetry();
  }

  function open() {
    if (stopped) return;
    const sock = transport.openSocket(wsUrl(base, "/api/stream"));
    socket = sock;
    connectTimer = transport.setTimer(() => {
      connectTimer = null;
      try {
        sock.close();
      } catch {
        // already dead
      }
      drop(sock);
    }, connectTimeoutMs);
    sock.onopen = () => {
      if (sock !== socket) return;
      if (connectTimer !== null) {
        transport.clearTimer(connectTimer);
        connectTimer = null;
      }
      failures = 0;
      store.setStatus("live");
      store.setError(null);
    };
    sock.onmessage = (ev) => {
      if (sock !== socket) return;
      if (typeof ev.data === "string") {
        let parsed: unknown;
        try {
          parsed = JSON.parse(ev.data);
        } catch {
          return;
        }
        if (isServerState(parsed)) store.applyServerState(parsed);
      } else if (ev.data instanceof ArrayBuffer) {
        opts.onFrame?.(ev.data);
      }
    };
    sock.onclose = () => drop(sock);
    sock.onerror = () => drop(sock);
  }

  return {
    start() {
      if (!stopped) return;
      stopped = false;
      failures = 0;
      store.setStatus("connecting");
      open();
    },
    stop() {
      stopped = true;
      clearTimers();
      if (socket !== null) {
        const s = socket;
        socket = null;
        s.onopen = s.onmessage = s.onclose = s.onerror = null;
        try {
          s.close();
        } catch {
          // already dead
        }
      }
    },
  };
}
