"""Per-frame orchestration: simulate, rasterize, shade, rain pass, blend.

One frame = spawn drops -> advance drops -> SWE step with deposits ->
water G-buffer -> water pass I0 -> rain pass I1 -> depth-select blend ->
sRGB encode.  A single RNG stream drawn in fixed order makes every output
byte a function of (scene, config, seed).
"""

from __future__ import annotations

import json
import time as _time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .fields import StaggeredVelocityField, normal_from_height
from .io import linear_to_srgb_u8, write_pfm, write_png_srgb
from .rain import DropArray, Impact, RainParams, advance_raindrops, spawn_ceiling, spawn_raindrops
from .rain_render import (
    RainRenderParams,
    SplatBatch,
    composite_rain_pass,
    over_composite,
    splat_splashes,
    splat_streaks,
)
from .raster import rasterize_water
from .scene import AuxView, Camera, SceneBundle, sample_image_bilinear
from .shading import RenderParams, blend_passes, compose_water_pass
from .swe import SweState, step as swe_step


@dataclass
class SimConfig:
    """Everything one run needs besides the scene itself."""

    dt: float = 1.0 / 30.0
    frame_count: int = 30
    seed: int = 0
    view: str | None = None        # None: first view name in sorted order
    width: int | None = None       # optional camera override
    height: int | None = None
    debug_layers: bool = False
    rain: RainParams = field(default_factory=RainParams)
    render: RenderParams = field(default_factory=RenderParams)
    rain_render: RainRenderParams = field(default_factory=RainRenderParams)

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.frame_count < 0:
            raise ValueError("frame_count must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("sun_dir", "sun_color"):
            val = d["render"].get(key)
            if isinstance(val, np.ndarray):
                d["render"][key] = [float(x) for x in val]
        return d


_NESTED = {"rain": RainParams, "render": RenderParams, "rain_render": RainRenderParams}


def config_from_dict(d: dict) -> SimConfig:
    """Build a SimConfig from plain JSON data; unknown keys are errors."""
    kwargs = {}
    top_fields = {f for f in SimConfig.__dataclass_fields__}
    for key, val in d.items():
        if key not in top_fields:
            raise ValueError(f"unknown config key: {key}")
        if key in _NESTED:
            cls = _NESTED[key]
            sub_fields = set(cls.__dataclass_fields__)
            unknown = set(val) - sub_fields
            if unknown:
                raise ValueError(f"unknown config key: {key}.{sorted(unknown)[0]}")
            val = cls(**{k: _coerce(v) for k, v in val.items()})
        kwargs[key] = val
    return SimConfig(**kwargs)


def _coerce(v):
    if isinstance(v, list):
        return tuple(v)
    return v


def apply_overrides(config: SimConfig, pairs: list[str]) -> SimConfig:
    """Apply `a.b=value` override strings; values parse as JSON, else raw text."""
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"override must look like key=value, got {pair!r}")
        path, _, raw = pair.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        value = _coerce(value)
        parts = path.strip().split(".")
        try:
            if len(parts) == 1:
                key = parts[0]
                if key not in SimConfig.__dataclass_fields__ or key in _NESTED:
                    raise ValueError(f"unknown config key: {key}")
                config = replace(config, **{key: value})
            elif len(parts) == 2 and parts[0] in _NESTED:
                group, key = parts
                sub = getattr(config, group)
                if key not in type(sub).__dataclass_fields__:
                    raise ValueError(f"unknown config key: {path}")
                config = replace(config, **{group: replace(sub, **{key: value})})
            else:
                raise ValueError(f"unknown config key: {path}")
        except TypeError as e:
            # dataclass validation comparing a str against numbers, usually
            raise ValueError(f"bad value for {path}: {e}") from e
    return config


def load_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as f:
        return config_from_dict(json.load(f))


# ---------------------------------------------------------------------------
# Views
# ---------------------------------------------------------------------------

def resize_view(view: AuxView, width: int, height: int) -> AuxView:
    """Rescale a view to a new resolution.

    RGB resamples bilinearly in linear space; depth and normals use nearest
    so the +inf sky sentinel and unit lengths survive.
    """
    cam = view.camera
    sx = width / cam.width
    sy = height / cam.height
    new_cam = Camera(
        width, height, cam.fx * sx, cam.fy * sy, cam.cx * sx, cam.cy * sy,
        R=cam.R.copy(), t=cam.t.copy(),
    )
    us = (np.arange(width, dtype=np.float64) + 0.5) / sx
    vs = (np.arange(height, dtype=np.float64) + 0.5) / sy
    gu, gv = np.meshgrid(us, vs)
    rgb = sample_image_bilinear(view.rgb, gu, gv)
    ci = np.clip(np.floor(gu).astype(np.int64), 0, cam.width - 1)
    ri = np.clip(np.floor(gv).astype(np.int64), 0, cam.height - 1)
    return AuxView(
        camera=new_cam,
        rgb=rgb,
        depth=view.depth[ri, ci],
        normal=view.normal[ri, ci],
    )


def active_view(scene: SceneBundle, config: SimConfig) -> tuple[str, AuxView]:
    """Resolve the configured view name, applying any resolution override."""
    if not scene.views:
        raise ValueError("scene has no views; cannot render")
    name = config.view if config.view is not None else sorted(scene.views)[0]
    if name not in scene.views:
        raise KeyError(f"unknown view: {name}")
    view = scene.views[name]
    if config.width is not None or config.height is not None:
        w = config.width if config.width is not None else view.camera.width
        h = config.height if config.height is not None else view.camera.height
        view = resize_view(view, w, h)
    return name, view


# ---------------------------------------------------------------------------
# State and frames
# ---------------------------------------------------------------------------

@dataclass
class SimState:
    swe: SweState
    drops: DropArray
    splashes: list        # (Impact, birth time) pairs
    rng: np.random.Generator
    frame: int = 0
    time: float = 0.0


@dataclass
class FrameOutputs:
    image: np.ndarray | None       # linear RGB, None for headless frames
    srgb: np.ndarray | None        # uint8 encoding of `image`
    sum_h: float
    drops_alive: int
    layers: dict | None = None
    ms_sim: float = 0.0
    ms_render: float = 0.0


def init_state(scene: SceneBundle, config: SimConfig, h0: float = 0.0) -> SimState:
    """Fresh state: dry (or uniformly `h0`-deep) water at rest, seeded RNG."""
    h = scene.H.like(np.full_like(scene.H.data, max(h0, 0.0)))
    vel = StaggeredVelocityField.zeros_like(scene.H)
    swe = SweState(H=scene.H.copy(), h=h, vel=vel, Hocc=scene.Hocc.copy())
    return SimState(
        swe=swe,
        drops=DropArray(),
        splashes=[],
        rng=np.random.default_rng(config.seed),
    )


def _effective_render_params(scene: SceneBundle, params: RenderParams) -> RenderParams:
    if params.sun_dir is not None and params.sun_color is not None:
        return params
    sun_dir, sun_color = scene.sun()
    return replace(
        params,
        sun_dir=params.sun_dir if params.sun_dir is not None else sun_dir,
        sun_color=params.sun_color if params.sun_color is not None else sun_color,
    )


def run_frame(
    scene: SceneBundle,
    state: SimState,
    config: SimConfig,
    view: AuxView | None = None,
    render: bool = True,
) -> tuple[SimState, FrameOutputs]:
    """Advance the simulation one dt and (optionally) render the frame."""
    t_start = _time.perf_counter()
    dt = config.dt
    eta = state.swe.eta()

    new_drops = spawn_raindrops(
        config.rain,
        state.swe.H.domain_rect(),
        spawn_ceiling(eta, state.swe.Hocc, config.rain),
        dt,
        state.rng,
    )
    drops = DropArray.concat(state.drops, new_drops)
    survivors, deposits, impacts = advance_raindrops(drops, eta, state.swe.Hocc, dt)
    swe, _stats = swe_step(state.swe, dt, deposits)

    now = state.time + dt
    splashes = [
        (imp, t0)
        for imp, t0 in state.splashes
        if now - t0 < config.rain_render.splash_lifetime
    ]
    splashes.extend((imp, now) for imp in impacts)

    next_state = SimState(
        swe=swe,
        drops=survivors,
        splashes=splashes,
        rng=state.rng,
        frame=state.frame + 1,
        time=now,
    )
    sum_h = float(swe.h.data.sum())
    t_sim = _time.perf_counter()

    if not render:
        return next_state, FrameOutputs(
            None, None, sum_h, len(survivors), ms_sim=(t_sim - t_start) * 1e3
        )

    if view is None:
        _, view = active_view(scene, config)
    cam = view.camera
    rparams = _effective_render_params(scene, config.render)

    eta_after = swe.eta()
    gbuf = rasterize_water(eta_after, swe.h, cam, rparams.h_render_min)
    composed = compose_water_pass(
        view.rgb, gbuf, view, scene.env, rparams, return_layers=config.debug_layers
    )
    if config.debug_layers:
        I0, d0, layers = composed
    else:
        I0, d0 = composed
        layers = None

    streaks = splat_streaks(survivors, cam, view.rgb, config.rain_render)
    if splashes:
        surf_normals = normal_from_height(eta_after)
        imps = [imp for imp, _ in splashes]
        ages = np.array([now - t0 for _, t0 in splashes])
        ni = np.empty((len(imps), 3))
        for k, imp in enumerate(imps):
            ix, iy = eta_after.cell_index(imp.pos[0], imp.pos[1])
            ix = min(max(int(ix), 0), eta_after.nx - 1)
            iy = min(max(int(iy), 0), eta_after.ny - 1)
            ni[k] = surf_normals[iy, ix]
        splash_batch = splat_splashes(imps, ni, cam, config.rain_render, ages=ages)
    else:
        splash_batch = SplatBatch()

    batch = SplatBatch.concat([streaks, splash_batch])
    I1, d1 = composite_rain_pass(
        batch, cam.width, cam.height, alpha_min=config.rain_render.alpha_min
    )
    I1_over = over_composite(I1, I0)
    final = blend_passes(I0, d0, I1_over, d1)
    srgb = linear_to_srgb_u8(final)

    if layers is not None:
        layers.update({
            "I0": I0, "d0": d0, "I1": I1, "d1": d1,
            "h": swe.h.data.copy(), "eta": eta_after.data.copy(),
        })
    t_render = _time.perf_counter()
    return next_state, FrameOutputs(
        final, srgb, sum_h, len(survivors), layers,
        ms_sim=(t_sim - t_start) * 1e3,
        ms_render=(t_render - t_sim) * 1e3,
    )


# ---------------------------------------------------------------------------
# Sequences
# ---------------------------------------------------------------------------

def run_sequence(scene: SceneBundle, config: SimConfig, out_dir) -> dict:
    """Render frame_000000.png .. and write manifest.json; returns the manifest.

    A failure mid-run still leaves a manifest with complete=false and the
    index of the last frame that made it to disk.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _, view = active_view(scene, config)

    manifest = {"config": config.to_dict(), "frames": [], "complete": False}
    state = init_state(scene, config)
    try:
        for idx in range(config.frame_count):
            state, out = run_frame(scene, state, config, view=view)
            write_png_srgb(out_dir / f"frame_{idx:06d}.png", out.image)
            if config.debug_layers:
                _write_layers(out_dir / "layers" / f"frame_{idx:06d}", out.layers)
            manifest["frames"].append({
                "index": idx,
                "sum_h": out.sum_h,
                "drops_alive": out.drops_alive,
                "ms_sim": out.ms_sim,
                "ms_render": out.ms_render,
            })
        manifest["complete"] = True
    except Exception:
        manifest["last_good_frame"] = len(manifest["frames"]) - 1
        _write_manifest(out_dir, manifest)
        raise
    _write_manifest(out_dir, manifest)
    return manifest


def _write_manifest(out_dir: Path, manifest: dict) -> None:
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def _write_layers(layer_dir: Path, layers: dict) -> None:
    layer_dir.mkdir(parents=True, exist_ok=True)
    for name, data in layers.items():
        if data.ndim == 3 and data.shape[2] == 3:
            write_png_srgb(layer_dir / f"{name}.png", np.clip(data, 0.0, 1.0))
        elif data.ndim == 3 and data.shape[2] == 4:
            write_png_srgb(layer_dir / f"{name}.png", np.clip(data[..., :3], 0.0, 1.0))
        else:
            write_pfm(layer_dir / f"{name}.pfm", data)
