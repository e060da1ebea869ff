"""Scene assets: cameras, auxiliary views, environment map, bundle loading.

A scene directory holds float maps (PFM), per-view images, and a small
`meta.cfg`.  Everything loaded here is immutable afterwards and safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit, prange

from .fields import ScalarField2D, _bilinear_on_array, normalize
from .io import (
    SceneLoadError,
    SceneValidationError,
    read_kv_config,
    read_pfm,
    read_png_linear,
)

LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722])


class DegenerateInputError(ValueError):
    """Input point cloud has no usable principal frame."""


# ---------------------------------------------------------------------------
# Camera
# ---------------------------------------------------------------------------

@dataclass
class Camera:
    """Pinhole camera, looking along +z in camera space.

    Pixel (row r, col c) covers [c, c+1) x [r, r+1) in continuous image
    coordinates, so its center sits at (c + 0.5, r + 0.5).  World points map
    to camera space as Xc = R @ Xw + t and depth is camera-space z.
    """

    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        self.t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if self.width < 1 or self.height < 1:
            raise ValueError("camera resolution must be positive")
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise ValueError("focal lengths must be positive")
        if np.abs(self.R @ self.R.T - np.eye(3)).max() > 1e-6:
            raise ValueError("camera rotation is not orthonormal")

    def position(self) -> np.ndarray:
        """Camera center in world space."""
        return -self.R.T @ self.t

    def world_to_cam(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ self.R.T + self.t

    def cam_to_world(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return (pts - self.t) @ self.R

    def project_cam(self, pts_cam: np.ndarray):
        """Camera-space points -> (u, v, z) continuous pixel coords + depth."""
        pts_cam = np.asarray(pts_cam, dtype=np.float64)
        z = pts_cam[..., 2]
        u = self.fx * pts_cam[..., 0] / z + self.cx
        v = self.fy * pts_cam[..., 1] / z + self.cy
        return u, v, z

    def project(self, pts_world: np.ndarray):
        return self.project_cam(self.world_to_cam(pts_world))

    def unproject(self, u, v, z) -> np.ndarray:
        """Continuous pixel coords + depth -> world points."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        x = (u - self.cx) / self.fx * z
        y = (v - self.cy) / self.fy * z
        cam = np.stack(np.broadcast_arrays(x, y, z), axis=-1)
        return self.cam_to_world(cam)

    def ray_dirs_world(self, u, v) -> np.ndarray:
        """Unit world-space directions of the rays through pixels (u, v)."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        x = (u - self.cx) / self.fx
        y = (v - self.cy) / self.fy
        d = np.stack(np.broadcast_arrays(x, y, np.ones_like(x)), axis=-1)
        d = d @ self.R  # R^T applied to rows
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def pixel_grid(self):
        """(u, v) center coordinates for every pixel, each (height, width)."""
        us = np.arange(self.width, dtype=np.float64) + 0.5
        vs = np.arange(self.height, dtype=np.float64) + 0.5
        return np.meshgrid(us, vs)


def read_camera_txt(path) -> Camera:
    """Parse `width height fx fy cx cy` plus three rows of [R|t]."""
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if len(lines) < 4:
        raise SceneLoadError(f"{path}: expected 4 lines, found {len(lines)}")
    head = lines[0].split()
    if len(head) != 6:
        raise SceneLoadError(f"{path}: line 1 needs 6 fields, found {len(head)}")
    try:
        width, height = int(head[0]), int(head[1])
        fx, fy, cx, cy = (float(x) for x in head[2:])
        rows = [[float(x) for x in lines[1 + i].split()] for i in range(3)]
    except ValueError as e:
        raise SceneLoadError(f"{path}: bad number: {e}") from e
    if any(len(r) != 4 for r in rows):
        raise SceneLoadError(f"{path}: extrinsic rows need 4 floats each")
    Rt = np.array(rows)
    try:
        return Camera(width, height, fx, fy, cx, cy, R=Rt[:, :3], t=Rt[:, 3])
    except ValueError as e:
        raise SceneLoadError(f"{path}: {e}") from e


def look_at_camera(
    eye, target, up=(0.0, 0.0, 1.0), width: int = 640, height: int = 480,
    fov_x_deg: float = 60.0,
) -> Camera:
    """Convenience constructor: camera at `eye` looking at `target`."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = normalize(np.asarray(target, dtype=np.float64) - eye)
    right = normalize(np.cross(fwd, np.asarray(up, dtype=np.float64)))
    down = np.cross(fwd, right)  # +y in image space points down
    R = np.stack([right, down, fwd])
    fx = 0.5 * width / np.tan(np.deg2rad(fov_x_deg) / 2.0)
    return Camera(width, height, fx, fx, width / 2.0, height / 2.0, R=R, t=-R @ eye)


# ---------------------------------------------------------------------------
# Auxiliary views
# ---------------------------------------------------------------------------

@dataclass
class AuxView:
    """One calibrated view: linear RGB, camera-space depth, world normals.

    Depth uses +inf for sky pixels; finite depths must be positive.
    """

    camera: Camera
    rgb: np.ndarray
    depth: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        hw = (self.camera.height, self.camera.width)
        if self.rgb.shape != hw + (3,):
            raise SceneValidationError(f"rgb shape {self.rgb.shape}, camera says {hw}")
        if self.depth.shape != hw:
            raise SceneValidationError(f"depth shape {self.depth.shape}, camera says {hw}")
        if self.normal.shape != hw + (3,):
            raise SceneValidationError(f"normal shape {self.normal.shape}, camera says {hw}")
        finite = np.isfinite(self.depth)
        if np.any(self.depth[finite] <= 0.0):
            raise SceneValidationError("finite depth values must be positive")


# ---------------------------------------------------------------------------
# Environment map
# ---------------------------------------------------------------------------

@dataclass
class EnvironmentMap:
    """Equirectangular RGB map, z-up: row 0 is the +Z pole, columns wrap in
    longitude with phi = atan2(y, x)."""

    data: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.eye(3))
    validate_aspect: bool = True

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise SceneValidationError(f"env map must be (H, W, 3), got {self.data.shape}")
        h, w = self.data.shape[:2]
        if self.validate_aspect and w != 2 * h:
            raise SceneValidationError(f"env map width {w} != 2 x height {h}")
        self.orientation = np.asarray(self.orientation, dtype=np.float64).reshape(3, 3)

    @classmethod
    def uniform(cls, color=(0.5, 0.5, 0.5), height: int = 4) -> "EnvironmentMap":
        data = np.broadcast_to(
            np.asarray(color, dtype=np.float64), (height, 2 * height, 3)
        ).copy()
        return cls(data)


@njit(cache=True)
def _frac_indices_kernel(dirs, orient, h, w, fr, fc):
    # numpy's SIMD arctan2/arcsin round differently from libm on some
    # inputs; every sampler goes through this one compiled loop so per-ray
    # traces and batch lookups agree bitwise
    for i in range(dirs.shape[0]):
        dx = dirs[i, 0]
        dy = dirs[i, 1]
        dz = dirs[i, 2]
        mx = orient[0, 0] * dx + orient[1, 0] * dy + orient[2, 0] * dz
        my = orient[0, 1] * dx + orient[1, 1] * dy + orient[2, 1] * dz
        mz = orient[0, 2] * dx + orient[1, 2] * dy + orient[2, 2] * dz
        norm = np.sqrt(mx * mx + my * my + mz * mz)
        mx /= norm
        my /= norm
        mz /= norm
        phi = np.arctan2(my, mx)
        s = mz
        if s > 1.0:
            s = 1.0
        elif s < -1.0:
            s = -1.0
        theta = np.arcsin(s)
        fc[i] = (phi + np.pi) / (2.0 * np.pi) * w - 0.5
        fr[i] = (np.pi / 2.0 - theta) / np.pi * h - 0.5


def _envmap_frac_indices(env: EnvironmentMap, dirs: np.ndarray):
    d = np.asarray(dirs, dtype=np.float64)
    lead = d.shape[:-1]
    flat = np.ascontiguousarray(d.reshape(-1, 3))
    h, w = env.data.shape[:2]
    fr = np.empty(flat.shape[0])
    fc = np.empty(flat.shape[0])
    # rotation into map frame, longitude wrap, pole clamp all live in the kernel
    _frac_indices_kernel(flat, env.orientation, h, w, fr, fc)
    return fr.reshape(lead), fc.reshape(lead)


def sample_env(env: EnvironmentMap, dirs: np.ndarray) -> np.ndarray:
    """Bilinear lat-long lookup for unit direction(s); returns matching RGB."""
    dirs = np.asarray(dirs, dtype=np.float64)
    single = dirs.ndim == 1
    fr, fc = _envmap_frac_indices(env, dirs.reshape(-1, 3))
    h, w = env.data.shape[:2]
    r0 = np.floor(fr).astype(np.int64)
    c0 = np.floor(fc).astype(np.int64)
    tr = fr - r0
    tc = fc - c0
    r0c = np.clip(r0, 0, h - 1)
    r1c = np.clip(r0 + 1, 0, h - 1)
    c0w = np.mod(c0, w)
    c1w = np.mod(c0 + 1, w)
    tr = np.clip(np.where(r0 < 0, 0.0, np.where(r0 + 1 > h - 1, 1.0, tr)), 0.0, 1.0)
    out = (
        env.data[r0c, c0w] * ((1 - tr) * (1 - tc))[..., None]
        + env.data[r0c, c1w] * ((1 - tr) * tc)[..., None]
        + env.data[r1c, c0w] * (tr * (1 - tc))[..., None]
        + env.data[r1c, c1w] * (tr * tc)[..., None]
    )
    return out[0] if single else out.reshape(dirs.shape)


def envmap_texel_direction(env: EnvironmentMap, row: int, col: int) -> np.ndarray:
    """World-space direction of a texel center (inverse of the lat-long map)."""
    h, w = env.data.shape[:2]
    theta = np.pi / 2.0 - (row + 0.5) / h * np.pi
    phi = (col + 0.5) / w * 2.0 * np.pi - np.pi
    d = np.array([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), np.sin(theta)])
    return env.orientation @ d


def sun_from_envmap(env: EnvironmentMap):
    """(direction, color) of the brightest texel; ties go to lowest (row, col)."""
    lum = env.data @ LUMA_WEIGHTS
    r, c = np.unravel_index(int(np.argmax(lum)), lum.shape)  # first hit in C order
    return envmap_texel_direction(env, r, c), env.data[r, c].copy()


# ---------------------------------------------------------------------------
# Ground frame from camera positions
# ---------------------------------------------------------------------------

@dataclass
class GroundFrame:
    """Rigid motion p -> rotation @ (p + translation); translation = -centroid."""

    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return (pts + self.translation) @ self.rotation.T


def estimate_ground_frame(positions) -> GroundFrame:
    """Principal frame of a point cloud, mapping it to centered XY-major axes.

    The covariance eigenvector of smallest eigenvalue becomes +Z (sign chosen
    so it has nonnegative world-Z component); the largest becomes +X (sign:
    first component of magnitude > 1e-12 made positive); +Y completes a
    right-handed frame.  Collinear or undersized input raises
    :class:`DegenerateInputError`.
    """
    pts = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] < 3:
        raise DegenerateInputError(f"need at least 3 positions, got {pts.shape[0]}")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / pts.shape[0]
    evals, evecs = np.linalg.eigh(cov)  # ascending
    if evals[2] <= 0.0 or evals[1] <= 1e-12 * evals[2]:
        raise DegenerateInputError("positions are collinear or coincident")

    e_z = evecs[:, 0]
    if e_z[2] < 0.0:
        e_z = -e_z
    e_x = evecs[:, 2]
    for comp in e_x:
        if abs(comp) > 1e-12:
            if comp < 0.0:
                e_x = -e_x
            break
    e_y = np.cross(e_z, e_x)
    R = np.stack([e_x, e_y, e_z])
    return GroundFrame(rotation=R, translation=-centroid)


def height_from_ortho_depth(
    depth: ScalarField2D, cam_height: float, floor_height: float = 0.0
) -> ScalarField2D:
    """Ground height from an orthographic top-down depth map.

    H = cam_height - depth; +inf sky sentinels become `floor_height`.
    """
    if cam_height <= 0.0:
        raise ValueError("camera must sit above the ground plane")
    data = np.where(np.isinf(depth.data), floor_height, cam_height - depth.data)
    return ScalarField2D.from_array(data, dx=depth.dx, origin=depth.origin)


# ---------------------------------------------------------------------------
# Scene bundle
# ---------------------------------------------------------------------------

@dataclass
class SceneMeta:
    dx: float = 0.05
    origin: tuple = (0.0, 0.0)
    floor_height: float = 0.0
    sun_dir: np.ndarray | None = None     # unit vector toward the sun; overrides env map
    sun_color: np.ndarray | None = None


@dataclass
class SceneBundle:
    """Everything a simulation and renderer need from one scene directory."""

    H: ScalarField2D
    Hocc: ScalarField2D
    env: EnvironmentMap
    views: dict[str, AuxView]
    meta: SceneMeta

    def sun(self):
        """(direction, linear RGB color), meta override winning over the env map."""
        if self.meta.sun_dir is not None:
            color = self.meta.sun_color
            if color is None:
                color = sample_env(self.env, self.meta.sun_dir)
            return self.meta.sun_dir.copy(), np.asarray(color, dtype=np.float64)
        return sun_from_envmap(self.env)


_META_KEYS = {
    "dx_meters", "origin_x", "origin_y", "floor_height", "sun_dir", "sun_color",
}


def _parse_meta(path: Path) -> SceneMeta:
    kv = read_kv_config(path)
    unknown = set(kv) - _META_KEYS
    if unknown:
        raise SceneLoadError(f"{path}: unknown keys {sorted(unknown)}")
    meta = SceneMeta()

    def fval(key: str, default: float) -> float:
        if key not in kv:
            return default
        try:
            return float(kv[key])
        except ValueError:
            raise SceneLoadError(f"{path}: key {key} is not a number: {kv[key]!r}")

    meta.dx = fval("dx_meters", meta.dx)
    if meta.dx <= 0.0:
        raise SceneLoadError(f"{path}: dx_meters must be positive")
    meta.origin = (fval("origin_x", 0.0), fval("origin_y", 0.0))
    meta.floor_height = fval("floor_height", 0.0)
    for key, attr in (("sun_dir", "sun_dir"), ("sun_color", "sun_color")):
        if key in kv:
            parts = kv[key].split()
            if len(parts) != 3:
                raise SceneLoadError(f"{path}: key {key} needs 3 floats")
            try:
                vec = np.array([float(p) for p in parts])
            except ValueError:
                raise SceneLoadError(f"{path}: key {key} is not numeric")
            setattr(meta, attr, vec)
    if meta.sun_dir is not None:
        n = np.linalg.norm(meta.sun_dir)
        if n < 1e-12:
            raise SceneLoadError(f"{path}: sun_dir must be nonzero")
        meta.sun_dir = meta.sun_dir / n
    return meta


def _load_height_map(path: Path, meta: SceneMeta, what: str) -> ScalarField2D:
    data = read_pfm(path)
    if data.ndim != 2:
        raise SceneLoadError(f"{path}: {what} must be single-channel ('Pf')")
    if not np.all(np.isfinite(data)):
        raise SceneValidationError(f"{path}: {what} contains non-finite samples")
    return ScalarField2D.from_array(data, dx=meta.dx, origin=meta.origin)


def load_scene(scene_dir) -> SceneBundle:
    """Load and cross-validate a scene directory.

    Layout: height.pfm (required), occlusion.pfm / env.pfm / meta.cfg
    (optional), views/<name>/{rgb.png, depth.pfm, normal.pfm, camera.txt}.
    """
    scene_dir = Path(scene_dir)
    if not scene_dir.is_dir():
        raise SceneLoadError(f"{scene_dir}: not a directory")

    meta_path = scene_dir / "meta.cfg"
    meta = _parse_meta(meta_path) if meta_path.exists() else SceneMeta()

    height_path = scene_dir / "height.pfm"
    if not height_path.exists():
        raise SceneLoadError(f"{height_path}: required file missing")
    H = _load_height_map(height_path, meta, "ground height")

    occ_path = scene_dir / "occlusion.pfm"
    if occ_path.exists():
        Hocc = _load_height_map(occ_path, meta, "occlusion height")
        if Hocc.data.shape != H.data.shape:
            raise SceneValidationError(
                f"{occ_path}: dims {Hocc.data.shape} do not match height.pfm {H.data.shape}"
            )
        bad = np.argwhere(Hocc.data < H.data)
        if bad.size:
            j, i = bad[0]
            raise SceneValidationError(
                f"{occ_path}: occlusion below ground at cell (i={i}, j={j})"
            )
    else:
        Hocc = H.copy()

    env_path = scene_dir / "env.pfm"
    if env_path.exists():
        env_data = read_pfm(env_path)
        if env_data.ndim != 3:
            raise SceneLoadError(f"{env_path}: env map must be 3-channel ('PF')")
        env = EnvironmentMap(env_data)
    else:
        env = EnvironmentMap.uniform()

    views: dict[str, AuxView] = {}
    views_dir = scene_dir / "views"
    if views_dir.is_dir():
        for view_dir in sorted(p for p in views_dir.iterdir() if p.is_dir()):
            for fname in ("rgb.png", "depth.pfm", "normal.pfm", "camera.txt"):
                if not (view_dir / fname).exists():
                    raise SceneLoadError(f"{view_dir / fname}: required file missing")
            cam = read_camera_txt(view_dir / "camera.txt")
            rgb = read_png_linear(view_dir / "rgb.png")
            depth = read_pfm(view_dir / "depth.pfm")
            if depth.ndim != 2:
                raise SceneLoadError(f"{view_dir / 'depth.pfm'}: depth must be single-channel ('Pf')")
            normal = read_pfm(view_dir / "normal.pfm")
            if normal.ndim != 3:
                raise SceneLoadError(f"{view_dir / 'normal.pfm'}: normals must be 3-channel ('PF')")
            norms = np.linalg.norm(normal, axis=-1, keepdims=True)
            normal = np.where(norms > 1e-6, normal / np.maximum(norms, 1e-30), (0.0, 0.0, 1.0))
            try:
                views[view_dir.name] = AuxView(camera=cam, rgb=rgb, depth=depth, normal=normal)
            except SceneValidationError as e:
                raise SceneValidationError(f"{view_dir}: {e}") from e

    return SceneBundle(H=H, Hocc=Hocc, env=env, views=views, meta=meta)


@njit(cache=True, parallel=True)
def _bilinear_image_kernel(data, fx, fy, out):
    # same clamped lookup as fields._bilinear_on_array, one fused pass over
    # all channels; arithmetic kept operation for operation so outputs match
    # the vectorized path bitwise
    ny = data.shape[0]
    nx = data.shape[1]
    n_chan = data.shape[2]
    for i in prange(fx.shape[0]):
        x = fx[i]
        y = fy[i]
        if x < 0.0:
            x = 0.0
        elif x > nx - 1.0:
            x = nx - 1.0
        if y < 0.0:
            y = 0.0
        elif y > ny - 1.0:
            y = ny - 1.0
        i0 = int(np.floor(x))
        if i0 < 0:
            i0 = 0
        elif i0 > nx - 2:
            i0 = nx - 2
        j0 = int(np.floor(y))
        if j0 < 0:
            j0 = 0
        elif j0 > ny - 2:
            j0 = ny - 2
        tx = x - i0
        ty = y - j0
        for k in range(n_chan):
            v00 = data[j0, i0, k]
            v10 = data[j0, i0 + 1, k]
            v01 = data[j0 + 1, i0, k]
            v11 = data[j0 + 1, i0 + 1, k]
            out[i, k] = (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (
                v01 * (1 - tx) + v11 * tx
            ) * ty


def sample_image_bilinear(img: np.ndarray, u, v) -> np.ndarray:
    """Clamped bilinear image lookup at continuous pixel coords (u, v).

    Texel (r, c) is centered at (c + 0.5, r + 0.5), matching Camera.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    ub, vb = np.broadcast_arrays(u, v)
    img3 = img[..., None] if img.ndim == 2 else img
    out = np.empty((ub.size, img3.shape[2]))
    _bilinear_image_kernel(
        np.ascontiguousarray(img3, dtype=np.float64),
        np.ascontiguousarray(ub.ravel() - 0.5),
        np.ascontiguousarray(vb.ravel() - 0.5),
        out,
    )
    if img.ndim == 2:
        return out[:, 0].reshape(ub.shape)
    return out.reshape(ub.shape + (img3.shape[2],))
