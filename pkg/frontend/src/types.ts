// Wire types for the control service.  Field names match the JSON the
// server emits; keep them snake_case.

export interface LiveParams {
  rain_intensity: number;
  wind: [number, number];
  water_level_offset: number;
  paused: boolean;
  view: string | null;
}

export type ParamPatch = Partial<LiveParams>;

export interface ServerState {
  time: number;
  fps: number;
  params: LiveParams;
  sum_h: number;
  drops_alive: number;
}

export type ConnectionStatus = "connecting" | "live" | "down";

export function isServerState(v: unknown): v is ServerState {
  if (typeof v !== "object" || v === null) return false;
  const o = v as Record<string, unknown>;
  return (
    typeof o.time === "number" &&
    typeof o.fps === "number" &&
    typeof o.params === "object" &&
    o.params !== null &&
    typeof o.sum_h === "number" &&
    typeof o.drops_alive === "number"
  );
}
