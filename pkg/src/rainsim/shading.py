"""Water-surface shading: screen-space reflection, Fresnel mix, refraction.

All color math here runs in linear RGB.  The water pass composes, per water
pixel,

    I0 = (1 - F) * I_refra + F * (I_spec + I_highl)

and the final image picks between the water pass and the rain pass by depth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .raster import WaterGBuffer
from .scene import AuxView, Camera, EnvironmentMap, sample_env, sample_image_bilinear

FRESNEL_MODES = ("normal_view", "half_vector")


@dataclass
class RenderParams:
    """Knobs of the water pass.

    fresnel_mode picks the cosine fed to the Schlick curve: the angle between
    normal and view ("normal_view", default) or between the sun-view half
    vector and view ("half_vector").
    """

    F0: float = 0.02
    p: float = 64.0
    eps_ssr: float = 3e-2
    ssr_max_steps: int = 256
    kappa: float = 40.0          # refraction offset, screen px per meter of depth
    h_render_min: float = 1e-4
    fresnel_mode: str = "normal_view"
    sun_dir: np.ndarray | None = None
    sun_color: np.ndarray | None = None

    def __post_init__(self):
        if not (0.0 <= self.F0 < 1.0):
            raise ValueError("F0 must lie in [0, 1)")
        if self.p <= 0.0:
            raise ValueError("shininess must be positive")
        if self.eps_ssr <= 0.0:
            raise ValueError("eps_ssr must be positive")
        if self.ssr_max_steps < 1:
            raise ValueError("ssr_max_steps must be at least 1")
        if self.kappa < 0.0:
            raise ValueError("kappa must be nonnegative")
        if self.fresnel_mode not in FRESNEL_MODES:
            raise ValueError(f"fresnel_mode must be one of {FRESNEL_MODES}")


def reflect_dir(n: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Mirror v about n: R = 2(n.v)n - v.  Unit in, unit out."""
    n = np.asarray(n, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    ndv = np.sum(n * v, axis=-1, keepdims=True)
    return 2.0 * ndv * n - v


def fresnel_schlick(h_dot_v, F0: float):
    """Schlick reflectance F0 + (1 - F0)(1 - x)^5, input clamped to [0, 1]."""
    x = np.clip(h_dot_v, 0.0, 1.0)
    return F0 + (1.0 - F0) * (1.0 - x) ** 5


def highlight(n: np.ndarray, sun_dir: np.ndarray, view: np.ndarray, p: float):
    """Blinn-Phong lobe max(0, n.h)^p with h = normalize(sun_dir + view).

    Exactly opposed sun and view directions yield 0.
    """
    n = np.asarray(n, dtype=np.float64)
    h = np.asarray(sun_dir, dtype=np.float64) + np.asarray(view, dtype=np.float64)
    norm = np.linalg.norm(h, axis=-1, keepdims=True)
    safe = np.maximum(norm, 1e-30)
    ndh = np.clip(np.sum(n * (h / safe), axis=-1), 0.0, 1.0)
    out = ndh ** p
    return np.where(norm[..., 0] < 1e-12, 0.0, out)


# ---------------------------------------------------------------------------
# Screen-space reflection
# ---------------------------------------------------------------------------

@njit(cache=True)
def _env_lookup(env_data, orient, dx, dy, dz):
    """Bilinear lat-long env sample for one world direction (matches sample_env)."""
    mx = orient[0, 0] * dx + orient[1, 0] * dy + orient[2, 0] * dz
    my = orient[0, 1] * dx + orient[1, 1] * dy + orient[2, 1] * dz
    mz = orient[0, 2] * dx + orient[1, 2] * dy + orient[2, 2] * dz
    norm = np.sqrt(mx * mx + my * my + mz * mz)
    mx /= norm
    my /= norm
    mz /= norm
    h, w = env_data.shape[0], env_data.shape[1]
    phi = np.arctan2(my, mx)
    s = mz
    if s > 1.0:
        s = 1.0
    elif s < -1.0:
        s = -1.0
    theta = np.arcsin(s)
    fc = (phi + np.pi) / (2.0 * np.pi) * w - 0.5
    fr = (np.pi / 2.0 - theta) / np.pi * h - 0.5
    r0 = int(np.floor(fr))
    c0 = int(np.floor(fc))
    tr = fr - r0
    tc = fc - c0
    r0c = min(max(r0, 0), h - 1)
    r1c = min(max(r0 + 1, 0), h - 1)
    c0w = c0 % w
    c1w = (c0 + 1) % w
    # pole rows collapse tr to an exact 0/1, same as the vectorized sampler
    if r0 < 0:
        tr = 0.0
    elif r0 + 1 > h - 1:
        tr = 1.0
    if tr < 0.0:
        tr = 0.0
    elif tr > 1.0:
        tr = 1.0
    w00 = (1.0 - tr) * (1.0 - tc)
    w01 = (1.0 - tr) * tc
    w10 = tr * (1.0 - tc)
    w11 = tr * tc
    out = np.empty(3)
    for k in range(3):
        out[k] = (
            env_data[r0c, c0w, k] * w00
            + env_data[r0c, c1w, k] * w01
            + env_data[r1c, c0w, k] * w10
            + env_data[r1c, c1w, k] * w11
        )
    return out


@njit(cache=True, parallel=True)
def _ssr_kernel(
    rows, cols, d0, normals, depth, rgb, env_data, env_orient,
    fx, fy, cx, cy, Rwc, tvec, cam_pos, eps, max_steps, out,
):
    """One DDA reflection trace per listed water pixel; writes out[r, c]."""
    height, width = depth.shape
    for idx in prange(rows.shape[0]):
        r = rows[idx]
        c = cols[idx]
        u0 = c + 0.5
        v0 = r + 0.5
        z0 = d0[r, c]

        # water-surface point in world space
        pcx = (u0 - cx) / fx * z0
        pcy = (v0 - cy) / fy * z0
        pcz = z0
        wx = Rwc[0, 0] * (pcx - tvec[0]) + Rwc[1, 0] * (pcy - tvec[1]) + Rwc[2, 0] * (pcz - tvec[2])
        wy = Rwc[0, 1] * (pcx - tvec[0]) + Rwc[1, 1] * (pcy - tvec[1]) + Rwc[2, 1] * (pcz - tvec[2])
        wz = Rwc[0, 2] * (pcx - tvec[0]) + Rwc[1, 2] * (pcy - tvec[1]) + Rwc[2, 2] * (pcz - tvec[2])

        vx = cam_pos[0] - wx
        vy = cam_pos[1] - wy
        vz = cam_pos[2] - wz
        vn = np.sqrt(vx * vx + vy * vy + vz * vz)
        vx /= vn
        vy /= vn
        vz /= vn

        nx = normals[r, c, 0]
        ny = normals[r, c, 1]
        nz = normals[r, c, 2]
        ndv = nx * vx + ny * vy + nz * vz
        rx = 2.0 * ndv * nx - vx
        ry = 2.0 * ndv * ny - vy
        rz = 2.0 * ndv * nz - vz

        # camera-space direction of the reflected ray
        rcz = Rwc[2, 0] * rx + Rwc[2, 1] * ry + Rwc[2, 2] * rz
        if rcz <= 1e-12:
            # heading toward the camera plane: no screen-space march possible
            col = _env_lookup(env_data, env_orient, rx, ry, rz)
            out[r, c, 0] = col[0]
            out[r, c, 1] = col[1]
            out[r, c, 2] = col[2]
            continue

        rcx = Rwc[0, 0] * rx + Rwc[0, 1] * ry + Rwc[0, 2] * rz
        rcy = Rwc[1, 0] * rx + Rwc[1, 1] * ry + Rwc[1, 2] * rz
        z1 = z0 + rcz
        u1 = fx * (pcx + rcx) / z1 + cx
        v1 = fy * (pcy + rcy) / z1 + cy

        du = u1 - u0
        dv = v1 - v0
        major = max(abs(du), abs(dv))
        if major < 1e-9:
            col = _env_lookup(env_data, env_orient, rx, ry, rz)
            out[r, c, 0] = col[0]
            out[r, c, 1] = col[1]
            out[r, c, 2] = col[2]
            continue
        su = du / major   # one-pixel steps along the major axis
        sv = dv / major
        ds = 1.0 / major  # interpolation parameter advance per step
        inv_z0 = 1.0 / z0
        inv_z1 = 1.0 / z1
        inv_dz = inv_z1 - inv_z0

        hit = False
        z_prev = z0
        for k in range(1, max_steps + 1):
            pu = u0 + su * k
            pv = v0 + sv * k
            # float bounds test first: truncation only equals floor for
            # nonnegative values
            if pu < 0.0 or pu >= width or pv < 0.0 or pv >= height:
                break
            col_i = int(pu)
            row_i = int(pv)
            inv_z = inv_z0 + inv_dz * (ds * k)
            if inv_z <= 1e-12:
                break  # passed the vanishing point; ray left all geometry
            z = 1.0 / inv_z
            dscene = depth[row_i, col_i]
            # the ray sweeps (z_prev, z] during this step; hit iff that
            # interval reaches the surface slab [D, D+eps).  Comparing only
            # the endpoint would skip the slab wherever the per-pixel depth
            # advance exceeds eps.
            if z >= dscene and z_prev < dscene + eps:
                out[r, c, 0] = rgb[row_i, col_i, 0]
                out[r, c, 1] = rgb[row_i, col_i, 1]
                out[r, c, 2] = rgb[row_i, col_i, 2]
                hit = True
                break
            # z < D: not reached geometry yet; z_prev >= D+eps: entered this
            # pixel already behind the slab (thin occluder), march past
            z_prev = z
        if not hit:
            col = _env_lookup(env_data, env_orient, rx, ry, rz)
            out[r, c, 0] = col[0]
            out[r, c, 1] = col[1]
            out[r, c, 2] = col[2]
    return out


def ssr_image(
    gbuf: WaterGBuffer,
    scene_view: AuxView,
    env: EnvironmentMap,
    params: RenderParams,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """I_spec for every masked water pixel (others stay 0), shape (H, W, 3)."""
    cam = scene_view.camera
    if mask is None:
        mask = gbuf.water_mask()
    rows, cols = np.nonzero(mask)
    out = np.zeros((cam.height, cam.width, 3))
    if rows.size == 0:
        return out
    _ssr_kernel(
        rows.astype(np.int64),
        cols.astype(np.int64),
        np.ascontiguousarray(gbuf.d0),
        np.ascontiguousarray(gbuf.normal),
        np.ascontiguousarray(scene_view.depth),
        np.ascontiguousarray(scene_view.rgb),
        np.ascontiguousarray(env.data),
        np.ascontiguousarray(env.orientation),
        cam.fx, cam.fy, cam.cx, cam.cy,
        np.ascontiguousarray(cam.R),
        np.ascontiguousarray(cam.t),
        np.ascontiguousarray(cam.position()),
        params.eps_ssr,
        params.ssr_max_steps,
        out,
    )
    return out


def ssr_trace(
    pixel: tuple[int, int],
    gbuf: WaterGBuffer,
    scene_view: AuxView,
    env: EnvironmentMap,
    params: RenderParams,
) -> np.ndarray:
    """Reflected color for one water pixel (row, col); env fallback on miss."""
    r, c = pixel
    if not np.isfinite(gbuf.d0[r, c]):
        raise ValueError(f"pixel ({r}, {c}) has no water")
    mask = np.zeros_like(gbuf.d0, dtype=bool)
    mask[r, c] = True
    return ssr_image(gbuf, scene_view, env, params, mask=mask)[r, c]


# ---------------------------------------------------------------------------
# Refraction and composition
# ---------------------------------------------------------------------------

def refract_warp(
    I_src: np.ndarray, n_screen: np.ndarray, thickness: np.ndarray, kappa: float
) -> np.ndarray:
    """Depth-scaled image-space refraction.

    Each pixel resamples I_src at (u + n_u*k, v + n_v*k) with k =
    kappa * thickness in pixels, bilinear and clamped to the image bounds.
    Zero thickness reproduces I_src bitwise.
    """
    if I_src.shape[:2] != thickness.shape or n_screen.shape[:2] != thickness.shape:
        raise ValueError("image, offsets, and thickness must share dimensions")
    height, width = thickness.shape
    us, vs = np.meshgrid(
        np.arange(width, dtype=np.float64) + 0.5,
        np.arange(height, dtype=np.float64) + 0.5,
    )
    k = kappa * thickness
    return sample_image_bilinear(I_src, us + n_screen[..., 0] * k, vs + n_screen[..., 1] * k)


def _view_geometry(cam: Camera, d0: np.ndarray):
    """Per-pixel world positions of the surface and unit view vectors."""
    us, vs = cam.pixel_grid()
    z = np.where(np.isfinite(d0), d0, 1.0)
    pts = cam.unproject(us, vs, z)
    view = cam.position() - pts
    view /= np.linalg.norm(view, axis=-1, keepdims=True)
    return pts, view


def compose_water_pass(
    I_src: np.ndarray,
    gbuf: WaterGBuffer,
    scene_view: AuxView,
    env: EnvironmentMap,
    params: RenderParams,
    return_layers: bool = False,
):
    """The water pass: Fresnel-weighted mix of refraction and reflection.

    Water pixels hidden behind nearer scene geometry are treated as dry.
    Returns (I0, d0) where d0 falls back to the scene depth off-water;
    with return_layers=True a dict of intermediate images is added.
    """
    cam = scene_view.camera
    if I_src.shape[:2] != (cam.height, cam.width):
        raise ValueError("I_src does not match the camera resolution")
    sun_dir = params.sun_dir
    sun_color = params.sun_color
    if sun_dir is None or sun_color is None:
        raise ValueError("params must carry sun_dir and sun_color here")

    water = gbuf.water_mask() & (gbuf.d0 <= scene_view.depth)
    rows, cols = np.nonzero(water)

    # all per-pixel shading below runs on the gathered water pixels only;
    # off-water output is I_src / scene depth by definition
    us = cols + 0.5
    vs = rows + 0.5
    z = gbuf.d0[rows, cols]
    pts = cam.unproject(us, vs, z)
    view = cam.position() - pts
    view /= np.linalg.norm(view, axis=-1, keepdims=True)
    n = gbuf.normal[rows, cols]

    # screen-space normal components drive the refraction offset; zero
    # thickness resamples the exact texel center, so dry pixels keep I_src
    R = cam.R
    ncx = n[:, 0] * R[0, 0] + n[:, 1] * R[0, 1] + n[:, 2] * R[0, 2]
    ncy = n[:, 0] * R[1, 0] + n[:, 1] * R[1, 1] + n[:, 2] * R[1, 2]
    k = params.kappa * gbuf.thickness[rows, cols]
    I_refra = sample_image_bilinear(I_src, us + ncx * k, vs + ncy * k)

    I_spec = ssr_image(gbuf, scene_view, env, params, mask=water)
    I_spec_w = I_spec[rows, cols]

    hl = highlight(n, sun_dir, view, params.p)
    I_highl = hl[..., None] * np.asarray(sun_color, dtype=np.float64)

    if params.fresnel_mode == "half_vector":
        h = sun_dir + view
        h /= np.maximum(np.linalg.norm(h, axis=-1, keepdims=True), 1e-30)
        cosang = np.sum(h * view, axis=-1)
    else:
        cosang = np.sum(n * view, axis=-1)
    F = fresnel_schlick(cosang, params.F0)

    I0 = I_src.copy()
    I0[rows, cols] = (1.0 - F)[..., None] * I_refra + F[..., None] * (I_spec_w + I_highl)
    d0 = np.where(water, gbuf.d0, scene_view.depth)

    if return_layers:
        refra_full = np.zeros_like(I_spec)
        refra_full[rows, cols] = I_refra
        highl_full = np.zeros_like(I_spec)
        highl_full[rows, cols] = I_highl
        fres_full = np.zeros(water.shape)
        fres_full[rows, cols] = F
        layers = {
            "water_mask": water.astype(np.float64),
            "I_refra": refra_full,
            "I_spec": I_spec,
            "I_highl": highl_full,
            "fresnel": fres_full,
        }
        return I0, d0, layers
    return I0, d0


def blend_passes(
    I0: np.ndarray, d0: np.ndarray, I1: np.ndarray, d1: np.ndarray
) -> np.ndarray:
    """Per-pixel depth select between the two passes; ties keep I0."""
    if I0.shape != I1.shape or d0.shape != d1.shape or I0.shape[:2] != d0.shape:
        raise ValueError("pass images and depth maps must share dimensions")
    return np.where((d1 < d0)[..., None], I1, I0)
