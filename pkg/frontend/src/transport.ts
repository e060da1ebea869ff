// Thin seams around the browser APIs the panel touches.  Everything that
// talks to the network or the clock goes through a Transport so the tests
// can substitute scripted fakes and drive time by hand.

export interface SocketLike {
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  close(): void;
}

export interface JsonResponse {
  ok: boolean;
  status: number;
  body: unknown;
}

export interface Transport {
  openSocket(url: string): SocketLike;
  postJson(url: string, payload: unknown): Promise<JsonResponse>;
  setTimer(fn: () => void, ms: number): number;
  clearTimer(id: number): void;
  now(): number;
}

export function browserTransport(): Transport {
  return {
    openSocket(url) {
      const ws = new WebSocket(url);
      ws.binaryType = "arraybuffer";
      return ws as unknown as SocketLike;
    },
    async postJson(url, payload) {
      const resp = await fetch(url, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(payload),
      });
      let body: unknown = null;
      try {
        body = await resp.json();
      } catch {
        // non-JSON error bodies fall through as null
      }
      return { ok: resp.ok, status: resp.status, body };
    },
    setTimer(fn, ms) {
      return window.setTimeout(fn, ms);
    },
    clearTimer(id) {
      window.clearTimeout(id);
    },
    now() {
      return performance.now();
    },
  };
}

export function wsUrl(base: string, path: string): string {
  const u = new URL(path, base);
  u.protocol = u.protocol === "https:" ? "wss:" : "ws:";
  return u.toString();
}
