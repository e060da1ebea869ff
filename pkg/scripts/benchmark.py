#!/usr/bin/env python3
"""Steady-state frame timing: 256x256 simulation step + 640x480 render.

Prints the per-frame median plus a coarse stage breakdown.  The reflection
trace parallelizes across cores, so single-core containers report several
times the number a desktop machine gives.
"""

import argparse
import os
import statistics
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import rainsim.pipeline as pl
from rainsim import raster, shading, swe
from rainsim.scene import load_scene
from rainsim.swe import construct_eta
from rainsim.synthetic import make_synthetic_scene


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=256, help="sim grid cells per side")
    ap.add_argument("--width", type=int, default=640)
    ap.add_argument("--height", type=int, default=480)
    ap.add_argument("--frames", type=int, default=9, help="timed frames")
    ap.add_argument("--warmup", type=int, default=3)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as td:
        make_synthetic_scene(
            Path(td), n=args.n, width=args.width, height=args.height
        )
        scene = load_scene(Path(td))

    cfg = pl.SimConfig(seed=9)
    state = pl.init_state(scene, cfg, h0=0.02)
    for _ in range(args.warmup):
        state, _ = pl.run_frame(scene, state, cfg)

    times = []
    for _ in range(args.frames):
        t0 = time.perf_counter()
        state, _ = pl.run_frame(scene, state, cfg)
        times.append(time.perf_counter() - t0)
    median_ms = statistics.median(times) * 1e3

    # stage breakdown on one extra frame, timed piecewise
    view = scene.views[sorted(scene.views)[0]]
    t0 = time.perf_counter()
    sim_state, _ = swe.step(state.swe, cfg.dt)
    t_sim = time.perf_counter() - t0
    eta = construct_eta(sim_state.H, sim_state.h)
    t0 = time.perf_counter()
    gbuf = raster.rasterize_water(eta, sim_state.h, view.camera)
    t_raster = time.perf_counter() - t0
    sun_dir, sun_color = scene.sun()
    params = replace(cfg.render, sun_dir=sun_dir, sun_color=sun_color)
    t0 = time.perf_counter()
    shading.compose_water_pass(view.rgb, gbuf, view, scene.env, params)
    t_compose = time.perf_counter() - t0

    cores = os.cpu_count() or 1
    print(f"cores: {cores}")
    print(f"frames timed: {args.frames} (after {args.warmup} warmup)")
    print(f"median frame: {median_ms:.1f} ms")
    print(f"  swe step:        {t_sim * 1e3:7.1f} ms")
    print(f"  rasterize:       {t_raster * 1e3:7.1f} ms")
    print(f"  water compose:   {t_compose * 1e3:7.1f} ms (reflection trace inside)")
    print("budget check (< 100 ms median): " + ("OK" if median_ms < 100.0 else "over"))


if __name__ == "__main__":
    main()
