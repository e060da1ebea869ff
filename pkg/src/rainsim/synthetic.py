"""Synthetic scenes: a self-consistent bundled demo scene and test fixtures.

The demo scene's view images are produced by rasterizing the ground height
field itself, so depth, normals, and RGB agree exactly with the geometry the
simulator runs on.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .fields import ScalarField2D
from .io import write_pfm, write_png_srgb
from .raster import rasterize_water
from .scene import (
    AuxView,
    Camera,
    EnvironmentMap,
    SceneBundle,
    SceneMeta,
    look_at_camera,
    sample_env,
    sun_from_envmap,
)


def write_camera_txt(path, cam: Camera) -> None:
    head = [cam.width, cam.height] + [repr(float(x)) for x in (cam.fx, cam.fy, cam.cx, cam.cy)]
    lines = [" ".join(str(x) for x in head)]
    for i in range(3):
        row = [cam.R[i, 0], cam.R[i, 1], cam.R[i, 2], cam.t[i]]
        lines.append(" ".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def make_env_map(height: int = 16) -> np.ndarray:
    """Sky gradient with one very bright texel acting as the sun."""
    width = 2 * height
    rows = np.linspace(0.0, 1.0, height)[:, None, None]  # 0 at +Z pole
    sky_top = np.array([0.45, 0.65, 0.95])
    sky_bottom = np.array([0.18, 0.16, 0.14])
    data = (1.0 - rows) * sky_top + rows * sky_bottom
    data = np.broadcast_to(data, (height, width, 3)).copy()
    data[height // 4, int(width * 0.7)] = (12.0, 11.0, 9.0)
    return data


def ground_height(n: int, dx: float, bump: bool = True) -> ScalarField2D:
    """A shallow bowl (plus a soft ridge) so rainwater pools in the middle."""
    xs = (np.arange(n) + 0.5) * dx
    gx, gy = np.meshgrid(xs, xs)
    side = n * dx
    cx = cy = 0.5 * side
    r2 = ((gx - cx) ** 2 + (gy - cy) ** 2) / (0.5 * side) ** 2
    data = 0.25 * r2
    if bump:
        data += 0.03 * np.sin(2.0 * np.pi * gx / side) * np.sin(2.0 * np.pi * gy / side)
    return ScalarField2D.from_array(data, dx=dx, origin=(0.0, 0.0))


def render_ground_view(
    H: ScalarField2D, env_data: np.ndarray, cam: Camera
) -> AuxView:
    """Synthesize rgb/depth/normal for the static ground under `cam`."""
    ones = H.like(np.ones_like(H.data))
    gbuf = rasterize_water(H, ones, cam, h_render_min=0.0)
    depth = gbuf.d0.copy()
    normal = gbuf.normal.copy()
    env = EnvironmentMap(env_data)

    covered = np.isfinite(depth)
    us, vs = cam.pixel_grid()
    pts = cam.unproject(us, vs, np.where(covered, depth, 1.0))
    checker = (np.floor(pts[..., 0] / 0.4) + np.floor(pts[..., 1] / 0.4)) % 2
    albedo = np.where(checker[..., None] > 0.5, (0.55, 0.52, 0.48), (0.32, 0.30, 0.34))

    sun_dir, _ = sun_from_envmap(env)
    lambert = np.clip(np.einsum("hwc,c->hw", normal, sun_dir), 0.0, 1.0)
    rgb = albedo * (0.35 + 0.65 * lambert[..., None])

    sky = sample_env(env, cam.ray_dirs_world(us, vs))
    rgb = np.where(covered[..., None], rgb, np.clip(sky, 0.0, 1.0))
    normal = np.where(covered[..., None], normal, (0.0, 0.0, 1.0))
    return AuxView(camera=cam, rgb=np.clip(rgb, 0.0, 1.0), depth=depth, normal=normal)


def make_synthetic_scene(
    out_dir,
    n: int = 96,
    dx: float = 0.05,
    width: int = 320,
    height: int = 240,
    with_occluder: bool = True,
) -> Path:
    """Write a complete scene directory; returns its path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    H = ground_height(n, dx)
    side = n * dx

    write_pfm(out_dir / "height.pfm", H.data)
    if with_occluder:
        occ = H.data.copy()
        xs = (np.arange(n) + 0.5) * dx
        gx, gy = np.meshgrid(xs, xs)
        slab = (gx > 0.58 * side) & (gx < 0.85 * side) & (gy > 0.15 * side) & (gy < 0.42 * side)
        occ[slab] = 1.2
        write_pfm(out_dir / "occlusion.pfm", occ)

    env_data = make_env_map()
    write_pfm(out_dir / "env.pfm", env_data)

    (out_dir / "meta.cfg").write_text(
        f"# generated demo scene\ndx_meters = {dx}\norigin_x = 0.0\norigin_y = 0.0\n"
        "floor_height = 0.0\n",
        encoding="utf-8",
    )

    cam = look_at_camera(
        eye=(-0.35 * side, -0.45 * side, 0.6 * side),
        target=(0.5 * side, 0.5 * side, 0.0),
        width=width,
        height=height,
        fov_x_deg=55.0,
    )
    view = render_ground_view(H, env_data, cam)
    vdir = out_dir / "views" / "main"
    vdir.mkdir(parents=True, exist_ok=True)
    write_png_srgb(vdir / "rgb.png", view.rgb)
    write_pfm(vdir / "depth.pfm", view.depth)
    write_pfm(vdir / "normal.pfm", view.normal)
    write_camera_txt(vdir / "camera.txt", cam)
    return out_dir


# ---------------------------------------------------------------------------
# Mirror + red wall fixture (analytic geometry, used by reflection tests)
# ---------------------------------------------------------------------------

WALL_COLOR = np.array([0.9, 0.05, 0.05])
GROUND_COLOR = np.array([0.25, 0.25, 0.25])


def mirror_wall_fixture(size: int = 64, water_depth: float = 0.05):
    """A flat water sheet facing a red wall, with analytic depth and normals.

    Returns (scene_bundle_like dict) with: eta/h fields, AuxView whose depth
    buffer holds ground plane z=0 and the wall plane y=y_wall, and a green-ish
    env map so fallback samples are distinguishable from wall hits.
    """
    n = 64
    dx = 0.1
    side = n * dx
    H = ScalarField2D.from_array(np.zeros((n, n)), dx=dx, origin=(0.0, 0.0))
    h = H.like(np.full((n, n), water_depth))

    y_wall = side - 0.6
    wall_top = 3.0
    cam = look_at_camera(
        eye=(0.5 * side, -1.6, 1.1),
        target=(0.5 * side, 0.6 * side, 0.0),
        width=size,
        height=size,
        fov_x_deg=55.0,
    )

    us, vs = cam.pixel_grid()
    dirs = cam.ray_dirs_world(us, vs)
    origin = cam.position()

    depth = np.full((size, size), np.inf)
    rgb = np.zeros((size, size, 3))
    normal = np.zeros((size, size, 3))
    normal[..., 2] = 1.0

    # ground plane z = 0
    dz = dirs[..., 2]
    t_ground = np.where(dz < -1e-12, -origin[2] / dz, np.inf)
    # wall plane y = y_wall, finite extent
    dy = dirs[..., 1]
    t_wall = np.where(np.abs(dy) > 1e-12, (y_wall - origin[1]) / dy, np.inf)
    hit_w = origin[None, None, :] + t_wall[..., None] * dirs
    wall_ok = (
        (t_wall > 0)
        & (hit_w[..., 2] >= 0.0)
        & (hit_w[..., 2] <= wall_top)
        & (hit_w[..., 0] >= -2.0)
        & (hit_w[..., 0] <= side + 2.0)
    )
    t_wall = np.where(wall_ok, t_wall, np.inf)

    t = np.minimum(t_ground, t_wall)
    hit = np.isfinite(t)
    pts = origin[None, :] + t[hit, None] * dirs[hit]
    depth[hit] = cam.world_to_cam(pts)[:, 2]

    wall_front = wall_ok & (t_wall <= t_ground)
    rgb[wall_front] = WALL_COLOR
    rgb[hit & ~wall_front] = GROUND_COLOR
    normal[wall_front] = (0.0, -1.0, 0.0)

    env = EnvironmentMap.uniform((0.1, 0.7, 0.2), height=8)
    view = AuxView(camera=cam, rgb=rgb, depth=depth, normal=normal)
    meta = SceneMeta(dx=dx)
    scene = SceneBundle(H=H, Hocc=H.copy(), env=env, views={"main": view}, meta=meta)
    return scene, h
