import { createParamClient } from "./params.js";
import { createSession } from "./session.js";
import { createStore, UiState } from "./store.js";
import { browserTransport } from "./transport.js";
import { LiveParams } from "./types.js";

// DOM glue only.  All behaviour worth testing lives in store/params/session;
// this file builds the widgets and forwards events.

const WIND_MAX = 20; // m/s, slider range only

interface SliderSpec {
  label: string;
  min: number;
  max: number;
  step: number;
  format(v: number): string;
}

interface Slider {
  root: HTMLElement;
  input: HTMLInputElement;
  set(v: number): void;
  setPending(on: boolean): void;
}

function createSlider(spec: SliderSpec, onInput: (v: number) => void): Slider {
  const root = document.createElement("label");
  root.className = "control";
  const name = document.createElement("span");
  name.textContent = spec.label;
  const input = document.createElement("input");
  input.type = "range";
  input.min = String(spec.min);
  input.max = String(spec.max);
  input.step = String(spec.step);
  const value = document.createElement("output");
  root.append(name, input, value);

  let active = false;
  input.addEventListener("pointerdown", () => {
    active = true;
  });
  window.addEventListener("pointerup", () => {
    active = false;
  });
  input.addEventListener("input", () => {
    value.value = spec.format(Number(input.value));
    onInput(Number(input.value));
  });

  return {
    root,
    input,
    set(v) {
      // never yank the thumb out from under a drag; the echo is re-applied
      // on the next state message after release
      if (active) return;
      input.value = String(v);
      value.value = spec.format(v);
    },
    setPending(on) {
      root.classList.toggle("pending", on);
    },
  };
}

function windToSliders(wind: [number, number]): { dir: number; speed: number } {
  const speed = Math.hypot(wind[0], wind[1]);
  let dir = (Math.atan2(wind[1], wind[0]) * 180) / Math.PI;
  if (dir < 0) dir += 360;
  return { dir, speed };
}

function slidersToWind(dir: number, speed: number): [number, number] {
  const rad = (dir * Math.PI) / 180;
  return [speed * Math.cos(rad), speed * Math.sin(rad)];
}

function main() {
  // ?server=http://host:port points the panel at a service on another
  // origin (the API allows cross-origin requests)
  const base = new URLSearchParams(window.location.search).get("server") ?? window.location.origin;
  const store = createStore();
  const transport = browserTransport();
  const client = createParamClient(base, transport, store);

  const page = document.createElement("div");
  page.className = "page";

  const banner = document.createElement("div");
  banner.className = "banner";
  page.append(banner);

  const canvas = document.createElement("canvas");
  canvas.className = "frame";
  canvas.width = 640;
  canvas.height = 480;
  page.append(canvas);
  const ctx = canvas.getContext("2d")!;

  const readouts = document.createElement("div");
  readouts.className = "readouts";
  const roTime = document.createElement("span");
  const roFps = document.createElement("span");
  const roWater = document.createElement("span");
  const roDrops = document.createElement("span");
  readouts.append(roTime, roFps, roWater, roDrops);
  page.append(readouts);

  const panel = document.createElement("div");
  panel.className = "panel";
  page.append(panel);

  const intensity = createSlider(
    { label: "rain intensity", min: 0, max: 10, step: 0.1, format: (v) => v.toFixed(1) },
    (v) => client.edit({ rain_intensity: v }),
  );
  const windDir = createSlider(
    { label: "wind direction", min: 0, max: 359, step: 1, format: (v) => `${v.toFixed(0)}°` },
    (v) => client.edit({ wind: slidersToWind(v, Number(windSpeed.input.value)) }),
  );
  const windSpeed = createSlider(
    { label: "wind speed", min: 0, max: WIND_MAX, step: 0.1, format: (v) => `${v.toFixed(1)} m/s` },
    (v) => client.edit({ wind: slidersToWind(Number(windDir.input.value), v) }),
  );
  const level = createSlider(
    { label: "water level", min: 0, max: 0.2, step: 0.005, format: (v) => `${(v * 1000).toFixed(0)} mm` },
    (v) => client.edit({ water_level_offset: v }),
  );
  panel.append(intensity.root, windDir.root, windSpeed.root, level.root);

  const buttons = document.createElement("div");
  buttons.className = "buttons";
  const pauseBtn = document.createElement("button");
  pauseBtn.textContent = "pause";
  pauseBtn.addEventListener("click", () => {
    const p = store.get().params;
    client.edit({ paused: !(p?.paused ?? false) });
  });
  const resetBtn = document.createElement("button");
  resetBtn.textContent = "reset";
  resetBtn.addEventListener("click", () => {
    void client.reset();
  });
  buttons.append(pauseBtn, resetBtn);
  panel.append(buttons);

  const viewRow = document.createElement("div");
  viewRow.className = "view-row";
  const viewInput = document.createElement("input");
  viewInput.type = "text";
  viewInput.placeholder = "view name";
  const viewBtn = document.createElement("button");
  viewBtn.textContent = "switch view";
  viewBtn.addEventListener("click", () => {
    if (viewInput.value.trim()) client.edit({ view: viewInput.value.trim() });
  });
  viewRow.append(viewInput, viewBtn);
  panel.append(viewRow);

  const errorLine = document.createElement("div");
  errorLine.className = "error";
  panel.append(errorLine);

  // latest-wins frame decode; a slow decode skips intermediate frames
  let nextFrame: ArrayBuffer | null = null;
  let decoding = false;
  function presentFrames() {
    if (decoding || nextFrame === null) return;
    const bytes = nextFrame;
    nextFrame = null;
    decoding = true;
    createImageBitmap(new Blob([bytes], { type: "image/png" }))
      .then((bmp) => {
        if (canvas.width !== bmp.width || canvas.height !== bmp.height) {
          canvas.width = bmp.width;
          canvas.height = bmp.height;
        }
        ctx.drawImage(bmp, 0, 0);
        bmp.close();
      })
      .catch(() => {})
      .finally(() => {
        decoding = false;
        if (nextFrame !== null) requestAnimationFrame(presentFrames);
      });
  }

  const session = createSession(base, transport, store, {
    onFrame: (bytes) => {
      nextFrame = bytes;
      requestAnimationFrame(presentFrames);
    },
  });

  function render(s: UiState) {
    banner.textContent =
      s.status === "live" ? "" : s.status === "connecting" ? "connecting…" : "connection lost, retrying…";
    banner.classList.toggle("down", s.status === "down");
    banner.classList.toggle("hidden", s.status === "live");

    if (s.state !== null) {
      roTime.textContent = `t = ${s.state.time.toFixed(2)} s`;
      roFps.textContent = `${s.state.fps.toFixed(1)} fps`;
      roWater.textContent = `Σh = ${s.state.sum_h.toExponential(3)} m`;
      roDrops.textContent = `${s.state.drops_alive} drops`;
    }

    const p: LiveParams | null = s.params;
    if (p !== null) {
      intensity.set(p.rain_intensity);
      const w = windToSliders(p.wind);
      windDir.set(w.dir);
      windSpeed.set(w.speed);
      level.set(p.water_level_offset);
      pauseBtn.textContent = p.paused ? "resume" : "pause";
    }
    intensity.setPending(s.pending.has("rain_intensity"));
    windDir.setPending(s.pending.has("wind"));
    windSpeed.setPending(s.pending.has("wind"));
    level.setPending(s.pending.has("water_level_offset"));
    pauseBtn.disabled = s.pending.has("paused");

    errorLine.textContent = s.error ?? "";
  }

  store.subscribe(render);
  document.body.append(page);
  session.start();
}

main();
