"""Live control service: one simulation thread, HTTP/WS front-ends.

The simulation loop owns all mutable state.  Handlers only read immutable
snapshots or queue parameter updates, which the loop merges at the next
frame boundary, so no emitted frame ever mixes two parameter sets.  The
frame slot holds just the latest snapshot: slow consumers drop frames and
never stall the simulation.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
from dataclasses import asdict, dataclass, replace

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .io import png_bytes_srgb
from .pipeline import SimConfig, active_view, init_state, run_frame
from .scene import SceneBundle


@dataclass
class LiveParams:
    """Parameters adjustable while the simulation runs."""

    rain_intensity: float = 1.0     # multiplier on spawn_rate, clamped to [0, 10]
    wind: tuple = (0.0, 0.0)        # m/s added to drop velocity
    water_level_offset: float = 0.0  # m of standing water applied on reset
    paused: bool = False
    view: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["wind"] = list(d["wind"])
        return d


class UnknownFieldError(ValueError):
    def __init__(self, field: str, why: str):
        super().__init__(why)
        self.field = field


class UnknownViewError(KeyError):
    pass


def _validated_params(current: LiveParams, body: dict, scene: SceneBundle) -> LiveParams:
    """Merge a partial update into `current`, clamping and type-checking."""
    out = replace(current)
    for key, val in body.items():
        if key == "rain_intensity":
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise UnknownFieldError(key, "rain_intensity must be a number")
            out = replace(out, rain_intensity=min(max(float(val), 0.0), 10.0))
        elif key == "wind":
            ok = (
                isinstance(val, (list, tuple)) and len(val) == 2
                and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in val)
            )
            if not ok:
                raise UnknownFieldError(key, "wind must be a list of two numbers")
            out = replace(out, wind=(float(val[0]), float(val[1])))
        elif key == "water_level_offset":
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise UnknownFieldError(key, "water_level_offset must be a number")
            out = replace(out, water_level_offset=max(float(val), 0.0))
        elif key == "paused":
            if not isinstance(val, bool):
                raise UnknownFieldError(key, "paused must be a boolean")
            out = replace(out, paused=val)
        elif key == "view":
            if not isinstance(val, str):
                raise UnknownFieldError(key, "view must be a string")
            if val not in scene.views:
                raise UnknownViewError(val)
            out = replace(out, view=val)
        else:
            raise UnknownFieldError(key, f"unknown parameter: {key}")
    return out


@dataclass
class _Snapshot:
    version: int
    png: bytes
    state: dict


class SimServer:
    """Owns the simulation; thread-safe pending-parameter handoff."""

    def __init__(self, scene: SceneBundle, config: SimConfig, target_fps: float = 30.0):
        self.scene = scene
        self.base_config = config
        self.target_fps = target_fps
        self._lock = threading.Lock()
        self._pending: dict = {}
        self._params = LiveParams(view=config.view)
        self._fps = 0.0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._last_step_wall: float | None = None
        self._snapshot: _Snapshot | None = None
        self._reset_requested = False
        self._init_sim()
        self.step_once()  # so /api/frame has content immediately

    # -- simulation side ----------------------------------------------------

    def _init_sim(self) -> None:
        params = self._params
        self._config = self._config_for(params)
        _, self._view = active_view(self.scene, self._config)
        self._state = init_state(self.scene, self._config, h0=params.water_level_offset)

    def _config_for(self, params: LiveParams) -> SimConfig:
        base = self.base_config
        rain = replace(
            base.rain,
            spawn_rate=base.rain.spawn_rate * params.rain_intensity,
            fall_velocity=(
                base.rain.fall_velocity[0] + params.wind[0],
                base.rain.fall_velocity[1] + params.wind[1],
                base.rain.fall_velocity[2],
            ),
        )
        return replace(base, rain=rain, view=params.view)

    def step_once(self) -> None:
        """One frame boundary: merge pending params, advance, publish."""
        with self._lock:
            pending = self._pending
            self._pending = {}
            reset = self._reset_requested
            self._reset_requested = False
        if pending:
            old_view = self._params.view
            self._params = _validated_params(self._params, pending, self.scene)
            self._config = self._config_for(self._params)
            if self._params.view != old_view:
                _, self._view = active_view(self.scene, self._config)
        if reset:
            self._init_sim()

        if self._params.paused and self._snapshot is not None:
            with self._lock:
                snap = self._snapshot
                self._snapshot = _Snapshot(snap.version + 1, snap.png, snap.state)
            return

        self._state, out = run_frame(self.scene, self._state, self._config, view=self._view)
        now = time.monotonic()
        if self._last_step_wall is not None:
            dt_wall = max(now - self._last_step_wall, 1e-6)
            inst = 1.0 / dt_wall
            self._fps = inst if self._fps == 0.0 else 0.9 * self._fps + 0.1 * inst
        self._last_step_wall = now

        state_dict = {
            "time": self._state.time,
            "fps": self._fps,
            "params": self._params.to_dict(),
            "sum_h": out.sum_h,
            "drops_alive": out.drops_alive,
        }
        png = png_bytes_srgb(out.image)
        with self._lock:
            ver = self._snapshot.version + 1 if self._snapshot else 1
            self._snapshot = _Snapshot(ver, png, state_dict)

    def run_loop(self) -> None:
        interval = 1.0 / self.target_fps
        while not self._stop.is_set():
            t0 = time.monotonic()
            self.step_once()
            budget = interval - (time.monotonic() - t0)
            if budget > 0:
                self._stop.wait(budget)

    def start(self) -> None:
        self._thread = threading.Thread(target=self.run_loop, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    # -- handler side ---------------------------------------------------------

    def snapshot(self) -> _Snapshot:
        with self._lock:
            return self._snapshot

    def state_dict(self) -> dict:
        return self.snapshot().state

    def queue_params(self, body: dict) -> LiveParams:
        """Validate now (for the echo), apply at the next frame boundary."""
        with self._lock:
            merged_pending = {**self._pending, **body}
            effective = _validated_params(self._params, merged_pending, self.scene)
            self._pending = merged_pending
        return effective

    def request_reset(self) -> None:
        with self._lock:
            self._reset_requested = True


def create_app(server: SimServer) -> FastAPI:
    app = FastAPI(title="rainsim control service")
    # the control panel is usually served by a separate static server
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/api/state")
    def get_state():
        return JSONResponse(server.state_dict())

    @app.post("/api/params")
    async def post_params(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "body is not valid JSON"}, status_code=400)
        if not isinstance(body, dict):
            return JSONResponse({"error": "body must be a JSON object"}, status_code=400)
        try:
            effective = server.queue_params(body)
        except UnknownViewError as e:
            return JSONResponse({"error": f"unknown view: {e.args[0]}"}, status_code=404)
        except UnknownFieldError as e:
            return JSONResponse({"error": str(e), "field": e.field}, status_code=400)
        return JSONResponse(effective.to_dict())

    @app.post("/api/reset")
    def post_reset():
        server.request_reset()
        return JSONResponse({"ok": True})

    @app.get("/api/frame")
    def get_frame():
        return Response(content=server.snapshot().png, media_type="image/png")

    @app.websocket("/api/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        seen = 0
        try:
            while True:
                snap = server.snapshot()
                if snap.version != seen:
                    seen = snap.version
                    await ws.send_text(json.dumps(snap.state))
                    await ws.send_bytes(snap.png)
                else:
                    await asyncio.sleep(0.005)
        except WebSocketDisconnect:
            pass

    return app


def serve(scene: SceneBundle, config: SimConfig, port: int = 8000, host: str = "127.0.0.1"):
    """Run the control service until interrupted."""
    import uvicorn

    server = SimServer(scene, config)
    server.start()
    try:
        uvicorn.run(create_app(server), host=host, port=port, log_level="info")
    finally:
        server.stop()
