#!/usr/bin/env python3
"""Generate a synthetic test scene directory (height, occlusion, env, views)."""

import argparse
from pathlib import Path

from rainsim.synthetic import make_synthetic_scene


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", type=Path, help="scene directory to create")
    ap.add_argument("--n", type=int, default=96, help="grid cells per side")
    ap.add_argument("--dx", type=float, default=0.05, help="cell size in meters")
    ap.add_argument("--width", type=int, default=320)
    ap.add_argument("--height", type=int, default=240)
    ap.add_argument(
        "--no-occluder", action="store_true", help="skip the canopy slab"
    )
    args = ap.parse_args()

    make_synthetic_scene(
        args.out,
        n=args.n,
        dx=args.dx,
        width=args.width,
        height=args.height,
        with_occluder=not args.no_occluder,
    )
    print(f"wrote scene to {args.out}")


if __name__ == "__main__":
    main()
