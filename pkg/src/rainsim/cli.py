"""Command line entry points: render, simulate, serve, inspect.

Exit codes: 0 success, 1 usage error, 2 scene/config validation error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .io import SceneLoadError, SceneValidationError, write_pfm
from .pipeline import (
    SimConfig,
    apply_overrides,
    init_state,
    load_config,
    run_frame,
    run_sequence,
)
from .scene import load_scene


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rainsim", description="Interactive rain simulator and renderer.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required: bool):
        p.add_argument("--scene", required=True, help="scene directory")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="config override, repeatable")
        if out_required:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--frames", type=int, help="number of frames")
        p.add_argument("--seed", type=int, help="RNG seed")

    p_render = sub.add_parser("render", parents=[], help="render a frame sequence")
    common(p_render, out_required=True)
    p_render.add_argument("--view", help="view name (default: first)")
    p_render.add_argument("--width", type=int, help="camera width override")
    p_render.add_argument("--height", type=int, help="camera height override")
    p_render.add_argument("--debug-layers", action="store_true",
                          help="write per-frame intermediate layers")

    p_sim = sub.add_parser("simulate", help="run the water simulation headless")
    common(p_sim, out_required=True)
    p_sim.add_argument("--every", type=int, default=10,
                       help="write an eta snapshot every N frames")

    p_serve = sub.add_parser("serve", help="start the live control service")
    common(p_serve, out_required=False)
    p_serve.add_argument("--view", help="view name (default: first)")
    p_serve.add_argument("--port", type=int, default=8000)

    p_inspect = sub.add_parser("inspect", help="validate a scene directory")
    p_inspect.add_argument("--scene", required=True, help="scene directory")
    return parser


def _merge_config(args) -> SimConfig:
    config = load_config(args.config) if args.config else SimConfig()
    if args.overrides:
        config = apply_overrides(config, args.overrides)
    updates = {}
    if getattr(args, "frames", None) is not None:
        updates["frame_count"] = args.frames
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "view", None) is not None:
        updates["view"] = args.view
    if getattr(args, "width", None) is not None:
        updates["width"] = args.width
    if getattr(args, "height", None) is not None:
        updates["height"] = args.height
    if getattr(args, "debug_layers", False):
        updates["debug_layers"] = True
    return replace(config, **updates) if updates else config


def cmd_render(args) -> int:
    scene = load_scene(args.scene)
    config = _merge_config(args)
    manifest = run_sequence(scene, config, args.out)
    print(f"wrote {len(manifest['frames'])} frames to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    if args.every < 1:
        raise ValueError("--every must be at least 1")
    scene = load_scene(args.scene)
    config = _merge_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    state = init_state(scene, config)
    manifest = {"config": config.to_dict(), "frames": [], "complete": False}
    try:
        for idx in range(config.frame_count):
            state, out = run_frame(scene, state, config, render=False)
            if idx % args.every == 0:
                write_pfm(out_dir / f"eta_{idx:06d}.pfm", state.swe.eta().data)
            manifest["frames"].append(
                {"index": idx, "sum_h": out.sum_h, "drops_alive": out.drops_alive}
            )
        manifest["complete"] = True
    finally:
        with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2)
            f.write("\n")
    print(f"simulated {config.frame_count} frames; ledger in {out_dir / 'manifest.json'}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    scene = load_scene(args.scene)
    config = _merge_config(args)
    serve(scene, config, port=args.port)
    return 0


def cmd_inspect(args) -> int:
    scene = load_scene(args.scene)
    H = scene.H
    occ_cells = int(np.count_nonzero(scene.Hocc.data > H.data))
    sun_dir, sun_color = scene.sun()
    lines = [
        f"scene: {args.scene}",
        f"grid: {H.nx} x {H.ny}, dx = {H.dx} m, origin = {H.origin}",
        f"ground height: min {H.data.min():.4f} m, max {H.data.max():.4f} m",
        f"occluder cells above ground: {occ_cells}",
        f"env map: {scene.env.data.shape[1]} x {scene.env.data.shape[0]}",
        f"sun: dir = ({sun_dir[0]:.4f}, {sun_dir[1]:.4f}, {sun_dir[2]:.4f}), "
        f"color = ({sun_color[0]:.3f}, {sun_color[1]:.3f}, {sun_color[2]:.3f})",
        f"views: {len(scene.views)}",
    ]
    for name, view in sorted(scene.views.items()):
        cam = view.camera
        lines.append(f"  {name}: {cam.width} x {cam.height}, fx = {cam.fx:.2f}")
    print("\n".join(lines))
    return 0


_COMMANDS = {
    "render": cmd_render,
    "simulate": cmd_simulate,
    "serve": cmd_serve,
    "inspect": cmd_inspect,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (SceneLoadError, SceneValidationError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
