"""Software rasterization of the water surface into a per-pixel G-buffer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .fields import ScalarField2D, normal_from_height
from .scene import Camera

# Camera-space z below which a triangle is dropped rather than clipped.
NEAR_PLANE = 1e-4


@dataclass
class WaterGBuffer:
    """Per-pixel water surface data for one camera.

    d0: camera-space depth of the water surface, +inf where no water covers
    the pixel.  normal: world-space unit normal (garbage-free: (0,0,1) where
    dry).  thickness: water depth in meters, 0 where dry.  The buffer keeps
    d0 finite exactly where thickness > 0.
    """

    d0: np.ndarray
    normal: np.ndarray
    thickness: np.ndarray

    @classmethod
    def empty(cls, width: int, height: int) -> "WaterGBuffer":
        d0 = np.full((height, width), np.inf)
        normal = np.zeros((height, width, 3))
        normal[..., 2] = 1.0
        return cls(d0=d0, normal=normal, thickness=np.zeros((height, width)))

    def water_mask(self) -> np.ndarray:
        return np.isfinite(self.d0)


@njit(cache=True)
def _raster_kernel(
    tris, cam_pts, us_v, vs_v, normals, thick,
    h_render_min, near, width, height, d0, attr_out,
):
    """Z-buffered triangle fill with perspective-correct attributes.

    tris: (M, 3) vertex indices; per-vertex arrays carry camera-space
    points, screen coords, normals and thickness.  Thin, near-plane and
    back-face culls run per triangle in here so the caller never has to
    gather per-triangle arrays.  Serial over triangles so the result is
    deterministic.
    """
    scratch = np.empty((3, 4))
    for m in range(tris.shape[0]):
        i0 = tris[m, 0]
        i1 = tris[m, 1]
        i2 = tris[m, 2]

        tmax = thick[i0]
        if thick[i1] > tmax:
            tmax = thick[i1]
        if thick[i2] > tmax:
            tmax = thick[i2]
        if tmax <= h_render_min:
            continue

        az = cam_pts[i0, 2]
        bz = cam_pts[i1, 2]
        cz = cam_pts[i2, 2]
        zmin = az
        if bz < zmin:
            zmin = bz
        if cz < zmin:
            zmin = cz
        if zmin <= near:
            continue

        # det[A,B,C] >= 0 means the camera sees the underside
        ax = cam_pts[i0, 0]
        ay = cam_pts[i0, 1]
        bx = cam_pts[i1, 0]
        by = cam_pts[i1, 1]
        ccx = cam_pts[i2, 0]
        ccy = cam_pts[i2, 1]
        det = (
            ax * (by * cz - bz * ccy)
            + ay * (bz * ccx - bx * cz)
            + az * (bx * ccy - by * ccx)
        )
        if det >= 0.0:
            continue

        u0, u1, u2 = us_v[i0], us_v[i1], us_v[i2]
        v0, v1, v2 = vs_v[i0], vs_v[i1], vs_v[i2]
        area = (u1 - u0) * (v2 - v0) - (v1 - v0) * (u2 - u0)
        if area == 0.0:
            continue
        sign = 1.0 if area > 0.0 else -1.0
        inv_z0 = 1.0 / az
        inv_z1 = 1.0 / bz
        inv_z2 = 1.0 / cz

        for j in range(3):
            idx = tris[m, j]
            scratch[j, 0] = normals[idx, 0]
            scratch[j, 1] = normals[idx, 1]
            scratch[j, 2] = normals[idx, 2]
            scratch[j, 3] = thick[idx]

        lo_c = int(np.floor(min(u0, u1, u2) - 0.5))
        hi_c = int(np.ceil(max(u0, u1, u2) - 0.5))
        lo_r = int(np.floor(min(v0, v1, v2) - 0.5))
        hi_r = int(np.ceil(max(v0, v1, v2) - 0.5))
        if lo_c < 0:
            lo_c = 0
        if lo_r < 0:
            lo_r = 0
        if hi_c > width - 1:
            hi_c = width - 1
        if hi_r > height - 1:
            hi_r = height - 1

        inv_area = sign / area
        for r in range(lo_r, hi_r + 1):
            py = r + 0.5
            for c in range(lo_c, hi_c + 1):
                px = c + 0.5
                w0 = ((u2 - u1) * (py - v1) - (v2 - v1) * (px - u1)) * sign
                w1 = ((u0 - u2) * (py - v2) - (v0 - v2) * (px - u2)) * sign
                w2 = ((u1 - u0) * (py - v0) - (v1 - v0) * (px - u0)) * sign
                if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                    continue
                # inv_area = sign/area = 1/|area|, so these weights sum to 1
                l0 = w0 * inv_area
                l1 = w1 * inv_area
                l2 = w2 * inv_area
                inv_z = l0 * inv_z0 + l1 * inv_z1 + l2 * inv_z2
                z = 1.0 / inv_z
                if z >= d0[r, c]:
                    continue
                d0[r, c] = z
                for k in range(4):
                    num = (
                        l0 * scratch[0, k] * inv_z0
                        + l1 * scratch[1, k] * inv_z1
                        + l2 * scratch[2, k] * inv_z2
                    )
                    attr_out[r, c, k] = num * z


_TRI_CACHE: dict = {}


def _grid_triangles(nx: int, ny: int) -> np.ndarray:
    """Vertex index triples (2 per cell quad, consistent winding), (M, 3).

    Cached per grid shape; the returned array is shared and read-only.
    """
    key = (nx, ny)
    tris = _TRI_CACHE.get(key)
    if tris is None:
        i, j = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1))
        v00 = (j * nx + i).ravel()
        v10 = v00 + 1
        v01 = v00 + nx
        v11 = v01 + 1
        tri_a = np.stack([v00, v10, v11], axis=1)
        tri_b = np.stack([v00, v11, v01], axis=1)
        tris = np.ascontiguousarray(np.concatenate([tri_a, tri_b], axis=0))
        tris.setflags(write=False)
        _TRI_CACHE[key] = tris
    return tris


def rasterize_water(
    eta: ScalarField2D,
    h: ScalarField2D,
    cam: Camera,
    h_render_min: float = 1e-4,
) -> WaterGBuffer:
    """Project the water surface z = eta into the camera, z-buffered.

    The grid is triangulated with vertices at cell centers; triangles whose
    three vertices all carry h <= h_render_min are skipped, as are triangles
    behind the near plane or facing away from the camera.  Depth and vertex
    attributes (surface normal, thickness) interpolate perspective-correct.
    """
    if eta.data.shape != h.data.shape or eta.dx != h.dx:
        raise ValueError("eta and h must share a grid")
    if h_render_min < 0.0:
        raise ValueError("h_render_min must be nonnegative")

    gbuf = WaterGBuffer.empty(cam.width, cam.height)
    xs, ys = eta.cell_centers()
    gx, gy = np.meshgrid(xs, ys)
    verts = np.stack([gx.ravel(), gy.ravel(), eta.data.ravel()], axis=1)
    normals = np.ascontiguousarray(normal_from_height(eta).reshape(-1, 3))
    thick = np.ascontiguousarray(h.data.ravel())

    tris = _grid_triangles(eta.nx, eta.ny)
    cam_pts = np.ascontiguousarray(cam.world_to_cam(verts))
    # projections of vertices behind the camera are garbage; every triangle
    # touching one fails the near-plane test before its coords are read
    with np.errstate(divide="ignore", invalid="ignore"):
        u, v, _ = cam.project_cam(cam_pts)

    attr_out = np.zeros((cam.height, cam.width, 4))
    _raster_kernel(
        tris,
        cam_pts,
        np.ascontiguousarray(u),
        np.ascontiguousarray(v),
        normals,
        thick,
        h_render_min,
        NEAR_PLANE,
        cam.width,
        cam.height,
        gbuf.d0,
        attr_out,
    )

    rr, cc = np.nonzero(np.isfinite(gbuf.d0))
    tv = attr_out[rr, cc, 3]
    # A pixel interpolating to zero thickness (edge-exact hit on a dry
    # vertex) would break the d0-finite <=> thickness-positive pairing.
    good = tv > 0.0
    if not good.all():
        gbuf.d0[rr[~good], cc[~good]] = np.inf
        rr, cc, tv = rr[good], cc[good], tv[good]

    nx = attr_out[rr, cc, 0]
    ny = attr_out[rr, cc, 1]
    nz = attr_out[rr, cc, 2]
    norm = np.sqrt(nx * nx + ny * ny + nz * nz)
    ok = norm > 1e-12
    den = np.maximum(norm, 1e-30)
    # dry pixels keep the (0,0,1) fill from WaterGBuffer.empty
    gbuf.normal[rr, cc, 0] = np.where(ok, nx / den, 0.0)
    gbuf.normal[rr, cc, 1] = np.where(ok, ny / den, 0.0)
    gbuf.normal[rr, cc, 2] = np.where(ok, nz / den, 1.0)
    gbuf.thickness[rr, cc] = tv
    return gbuf
