"""Rain pass: falling drops as Gaussian streak splats, impacts as splashes.

Both primitive kinds reduce to 2D screen-space Gaussians with a depth; the
compositor alpha-blends them front to back into an RGBA image I1 plus a
per-pixel depth d1 used by the final depth select.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .fields import normalize
from .rain import DropArray, Impact
from .raster import NEAR_PLANE
from .scene import LUMA_WEIGHTS, Camera, sample_image_bilinear

STREAK_BASE_COLOR = np.array([200.0, 200.0, 200.0]) / 255.0


@dataclass
class RainRenderParams:
    """Free parameters of the rain pass (counts, widths, lifetimes)."""

    streak_subsplats: int = 5
    exposure_time: float = 0.008      # s of simulated shutter per streak
    streak_width_factor: float = 1.0  # world streak radius = drop radius * this
    streak_opacity: float = 0.3
    lum_clamp: tuple = (0.3, 1.5)     # bounds on the brightness modulation
    splash_aspect: float = 3.0        # major : minor axis ratio a
    splash_lifetime: float = 0.15     # s until a splash fades out
    splash_opacity: float = 0.5       # opacity of a fresh splash
    alpha_min: float = 0.05           # accumulated alpha needed to own d1

    def __post_init__(self):
        if self.streak_subsplats < 1:
            raise ValueError("need at least one sub-splat per streak")
        if not (0.0 < self.streak_opacity <= 1.0 and 0.0 < self.splash_opacity <= 1.0):
            raise ValueError("opacities must lie in (0, 1]")
        if self.splash_aspect < 1.0:
            raise ValueError("splash aspect ratio must be >= 1")
        if self.splash_lifetime <= 0.0 or self.exposure_time < 0.0:
            raise ValueError("nonpositive time parameter")


@dataclass
class Splat2D:
    """One screen-space Gaussian: center (px), SPD covariance, depth, color."""

    center: np.ndarray
    cov: np.ndarray
    depth: float
    color: np.ndarray
    opacity: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(2)
        self.cov = np.asarray(self.cov, dtype=np.float64).reshape(2, 2)
        if abs(self.cov[0, 1] - self.cov[1, 0]) > 1e-9:
            raise ValueError("covariance must be symmetric")
        if self.cov[0, 0] <= 0.0 or np.linalg.det(self.cov) <= 0.0:
            raise ValueError("covariance must be positive definite")
        if not (0.0 < self.opacity <= 1.0):
            raise ValueError("opacity must lie in (0, 1]")
        if self.depth <= 0.0:
            raise ValueError("depth must be positive (in front of the camera)")


@dataclass
class SplatBatch:
    """Struct-of-arrays splat set; rows are individual splats."""

    centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    covs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2, 2)))
    depths: np.ndarray = field(default_factory=lambda: np.zeros(0))
    colors: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    opacities: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return self.depths.shape[0]

    def __getitem__(self, i: int) -> Splat2D:
        return Splat2D(
            center=self.centers[i].copy(),
            cov=self.covs[i].copy(),
            depth=float(self.depths[i]),
            color=self.colors[i].copy(),
            opacity=float(self.opacities[i]),
        )

    @classmethod
    def concat(cls, batches) -> "SplatBatch":
        batches = [b for b in batches if len(b)]
        if not batches:
            return cls()
        return cls(
            centers=np.concatenate([b.centers for b in batches]),
            covs=np.concatenate([b.covs for b in batches]),
            depths=np.concatenate([b.depths for b in batches]),
            colors=np.concatenate([b.colors for b in batches]),
            opacities=np.concatenate([b.opacities for b in batches]),
        )

    @classmethod
    def from_splats(cls, splats) -> "SplatBatch":
        splats = list(splats)
        if not splats:
            return cls()
        return cls(
            centers=np.stack([s.center for s in splats]),
            covs=np.stack([s.cov for s in splats]),
            depths=np.array([s.depth for s in splats]),
            colors=np.stack([s.color for s in splats]),
            opacities=np.array([s.opacity for s in splats]),
        )


# ---------------------------------------------------------------------------
# Streaks
# ---------------------------------------------------------------------------

def splat_streaks(
    drops: DropArray, cam: Camera, base_image: np.ndarray, params: RainRenderParams
) -> SplatBatch:
    """Sub-splats trailing each drop along -vel * exposure_time.

    Screen sigma follows the pinhole scaling r_world * fx / z.  Color is the
    near-white streak constant modulated by the local base-image luminance
    over the image mean, clamped to params.lum_clamp; a black base image
    leaves the modulation at 1.
    """
    n_drops = len(drops)
    S = params.streak_subsplats
    if n_drops == 0:
        return SplatBatch()

    # sub-splat world positions: head at the drop, tail exposure_time behind
    if S == 1:
        fractions = np.zeros(1)
    else:
        fractions = np.arange(S, dtype=np.float64) / (S - 1)
    offsets = -drops.vel[:, None, :] * (params.exposure_time * fractions)[None, :, None]
    pos = (drops.pos[:, None, :] + offsets).reshape(-1, 3)
    radii = np.repeat(drops.radius, S) * params.streak_width_factor

    cam_pts = cam.world_to_cam(pos)
    z = cam_pts[:, 2]
    keep = z > NEAR_PLANE
    if not np.any(keep):
        return SplatBatch()
    cam_pts = cam_pts[keep]
    z = z[keep]
    radii = radii[keep]

    u, v, _ = cam.project_cam(cam_pts)
    sigma = radii * cam.fx / z
    covs = np.zeros((sigma.shape[0], 2, 2))
    covs[:, 0, 0] = sigma ** 2
    covs[:, 1, 1] = sigma ** 2

    lum_mean = float(np.mean(base_image @ LUMA_WEIGHTS))
    if lum_mean <= 1e-12:
        factor = np.ones_like(z)
    else:
        local = sample_image_bilinear(base_image @ LUMA_WEIGHTS, u, v)
        lo, hi = params.lum_clamp
        factor = np.clip(local / lum_mean, lo, hi)
    colors = STREAK_BASE_COLOR[None, :] * factor[:, None]

    return SplatBatch(
        centers=np.stack([u, v], axis=1),
        covs=covs,
        depths=z,
        colors=colors,
        opacities=np.full(z.shape, params.streak_opacity),
    )


# ---------------------------------------------------------------------------
# Splashes
# ---------------------------------------------------------------------------

def splash_world_covariance(
    vel: np.ndarray, n: np.ndarray, radius: float, aspect: float
) -> np.ndarray:
    """3x3 world covariance: major axis along v - (v.n)n, det = V^2.

    V = 4 pi r^3 / 3; axis standard deviations (a*s, s, s) with s = (V/a)^(1/3)
    give det = a^2 s^6 = V^2.  A vertical hit (v parallel to n) degenerates to
    an arbitrary tangent direction.
    """
    n = normalize(np.asarray(n, dtype=np.float64))
    vel = np.asarray(vel, dtype=np.float64)
    tangential = vel - np.dot(vel, n) * n
    tnorm = np.linalg.norm(tangential)
    if tnorm < 1e-12:
        e1 = np.cross(n, np.array([1.0, 0.0, 0.0]))
        if np.linalg.norm(e1) < 1e-6:
            e1 = np.cross(n, np.array([0.0, 1.0, 0.0]))
        e1 = normalize(e1)
    else:
        e1 = tangential / tnorm
    e2 = normalize(np.cross(n, e1))
    volume = 4.0 / 3.0 * np.pi * radius ** 3
    s = (volume / aspect) ** (1.0 / 3.0)
    Q = np.stack([e1, e2, n], axis=1)
    return Q @ np.diag([(aspect * s) ** 2, s ** 2, s ** 2]) @ Q.T


def project_covariance(cov_world: np.ndarray, cam: Camera, p_world: np.ndarray) -> np.ndarray:
    """EWA-style 2x2 screen covariance via the camera Jacobian at p_world."""
    p_cam = cam.world_to_cam(p_world)
    x, y, z = p_cam
    J = np.array([
        [cam.fx / z, 0.0, -cam.fx * x / z ** 2],
        [0.0, cam.fy / z, -cam.fy * y / z ** 2],
    ])
    cov_cam = cam.R @ cov_world @ cam.R.T
    return J @ cov_cam @ J.T


def splat_splashes(
    impacts: list[Impact],
    n,
    cam: Camera,
    params: RainRenderParams,
    ages=None,
) -> SplatBatch:
    """Anisotropic splash splats at impact points.

    `n` is the ground normal (one Vec3 or one per impact); `ages` are seconds
    since each impact (default 0): opacity decays linearly over the lifetime
    and expired splashes are dropped.
    """
    if not impacts:
        return SplatBatch()
    n = np.asarray(n, dtype=np.float64)
    if n.ndim == 1:
        n = np.broadcast_to(n, (len(impacts), 3))
    if ages is None:
        ages = np.zeros(len(impacts))
    ages = np.asarray(ages, dtype=np.float64)

    splats = []
    for k, imp in enumerate(impacts):
        fade = 1.0 - ages[k] / params.splash_lifetime
        if fade <= 0.0:
            continue
        p_cam = cam.world_to_cam(imp.pos)
        if p_cam[2] <= NEAR_PLANE:
            continue
        cov_w = splash_world_covariance(imp.vel, n[k], imp.radius, params.splash_aspect)
        cov_s = project_covariance(cov_w, cam, imp.pos)
        u, v, z = cam.project_cam(p_cam)
        splats.append(
            Splat2D(
                center=np.array([u, v]),
                cov=cov_s,
                depth=float(z),
                color=STREAK_BASE_COLOR.copy(),
                opacity=params.splash_opacity * fade,
            )
        )
    return SplatBatch.from_splats(splats)


# ---------------------------------------------------------------------------
# Compositor
# ---------------------------------------------------------------------------

@njit(cache=True)
def _composite_kernel(centers, inv_covs, extents, depths, colors, opacities,
                      alpha_min, rgba, d1):
    """Front-to-back over-compositing of depth-sorted splats (premultiplied).

    d1[r, c] locks to the depth of the splat whose contribution first pushes
    the accumulated alpha past alpha_min.  Serial: order is the algorithm.
    """
    height, width = d1.shape
    for m in range(centers.shape[0]):
        cu = centers[m, 0]
        cv = centers[m, 1]
        eu = extents[m, 0]
        ev = extents[m, 1]
        lo_c = max(int(np.floor(cu - eu - 0.5)), 0)
        hi_c = min(int(np.ceil(cu + eu - 0.5)), width - 1)
        lo_r = max(int(np.floor(cv - ev - 0.5)), 0)
        hi_r = min(int(np.ceil(cv + ev - 0.5)), height - 1)
        if lo_c > hi_c or lo_r > hi_r:
            continue
        a = inv_covs[m, 0, 0]
        b = inv_covs[m, 0, 1]
        d = inv_covs[m, 1, 1]
        op = opacities[m]
        for r in range(lo_r, hi_r + 1):
            dy = (r + 0.5) - cv
            for c in range(lo_c, hi_c + 1):
                dx = (c + 0.5) - cu
                q = a * dx * dx + 2.0 * b * dx * dy + d * dy * dy
                if q > 9.0:  # beyond 3 sigma
                    continue
                w = op * np.exp(-0.5 * q)
                if w < 1e-6:
                    continue
                acc = rgba[r, c, 3]
                if acc >= 0.9999:
                    continue
                t = 1.0 - acc
                contrib = t * w
                rgba[r, c, 0] += contrib * colors[m, 0]
                rgba[r, c, 1] += contrib * colors[m, 1]
                rgba[r, c, 2] += contrib * colors[m, 2]
                new_acc = acc + contrib
                rgba[r, c, 3] = new_acc
                if not np.isfinite(d1[r, c]) and new_acc > alpha_min:
                    d1[r, c] = depths[m]


def composite_rain_pass(
    contributions: SplatBatch,
    width: int,
    height: int,
    alpha_min: float = 0.05,
):
    """Blend splats nearest-first into (I1 premultiplied RGBA, d1).

    Pixels no splat touches keep I1 = transparent black and d1 = +inf, so the
    final depth select always prefers the water pass there.
    """
    rgba = np.zeros((height, width, 4))
    d1 = np.full((height, width), np.inf)
    if len(contributions) == 0:
        return rgba, d1

    order = np.argsort(contributions.depths, kind="stable")
    covs = contributions.covs[order]
    det = covs[:, 0, 0] * covs[:, 1, 1] - covs[:, 0, 1] * covs[:, 1, 0]
    inv_covs = np.empty_like(covs)
    inv_covs[:, 0, 0] = covs[:, 1, 1] / det
    inv_covs[:, 1, 1] = covs[:, 0, 0] / det
    inv_covs[:, 0, 1] = -covs[:, 0, 1] / det
    inv_covs[:, 1, 0] = -covs[:, 1, 0] / det
    extents = 3.0 * np.sqrt(np.stack([covs[:, 0, 0], covs[:, 1, 1]], axis=1))

    _composite_kernel(
        np.ascontiguousarray(contributions.centers[order]),
        np.ascontiguousarray(inv_covs),
        np.ascontiguousarray(extents),
        np.ascontiguousarray(contributions.depths[order]),
        np.ascontiguousarray(contributions.colors[order]),
        np.ascontiguousarray(contributions.opacities[order]),
        alpha_min,
        rgba,
        d1,
    )
    return rgba, d1


def over_composite(rgba: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Premultiplied RGBA over an opaque base image."""
    alpha = rgba[..., 3:4]
    return rgba[..., :3] + (1.0 - alpha) * base
