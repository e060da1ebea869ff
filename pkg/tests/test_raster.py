import numpy as np
import pytest

from rainsim.fields import ScalarField2D, normal_from_height
from rainsim.raster import NEAR_PLANE, WaterGBuffer, rasterize_water
from rainsim.scene import look_at_camera


def flat_pool(n=16, dx=0.5, level=1.25):
    H = ScalarField2D(nx=n, ny=n, dx=dx)
    h = ScalarField2D(nx=n, ny=n, dx=dx, data=np.full((n, n), level))
    return H.like(H.data + h.data), h  # (eta, h)


def down_camera(center, height, width=320, height_px=240, fov=40.0):
    eye = (center[0], center[1], height)
    return look_at_camera(eye, (center[0], center[1], 0.0), up=(0.0, 1.0, 0.0),
                          width=width, height=height_px, fov_x_deg=fov)


def test_empty_grid_renders_nothing():
    eta, h = flat_pool()
    h.data[:] = 0.0
    cam = down_camera((3.75, 3.75), 10.0)
    gbuf = rasterize_water(eta, h, cam)
    assert np.all(np.isinf(gbuf.d0))
    assert np.all(gbuf.thickness == 0.0)


def test_flat_plane_straight_down_depth():
    # camera 10 m up, water surface at z=1.25: every pixel sees depth 8.75
    eta, h = flat_pool(level=1.25)
    cam = down_camera((3.75, 3.75), 10.0)
    gbuf = rasterize_water(eta, h, cam)
    assert np.all(np.isfinite(gbuf.d0))  # frustum fully inside the pool
    assert np.allclose(gbuf.d0, 8.75, atol=1e-5)
    assert np.allclose(gbuf.normal, [0.0, 0.0, 1.0], atol=1e-5)
    assert np.allclose(gbuf.thickness, 1.25, atol=1e-5)


def test_underside_is_culled():
    eta, h = flat_pool(level=1.25)
    eye = (3.75, 3.75, -8.0)
    cam = look_at_camera(eye, (3.75, 3.75, 1.25), up=(0.0, 1.0, 0.0),
                         width=64, height=48, fov_x_deg=40.0)
    gbuf = rasterize_water(eta, h, cam)
    assert np.all(np.isinf(gbuf.d0))


def test_behind_camera_dropped():
    eta, h = flat_pool(level=1.25)
    cam = look_at_camera((3.75, 3.75, 10.0), (3.75, 3.75, 20.0),
                         up=(0.0, 1.0, 0.0), width=64, height=48)
    gbuf = rasterize_water(eta, h, cam)  # looking up, water behind
    assert np.all(np.isinf(gbuf.d0))


def test_near_plane_constant():
    assert NEAR_PLANE == 1e-4


def test_water_mask_and_invariant_on_partial_pool():
    n = 12
    H = ScalarField2D(nx=n, ny=n, dx=0.5)
    h = ScalarField2D(nx=n, ny=n, dx=0.5)
    h.data[3:8, 4:9] = 0.2
    eta = H.like(H.data + h.data)
    cam = look_at_camera((2.75, -2.0, 4.0), (2.75, 2.75, 0.0),
                         width=96, height=72, fov_x_deg=55.0)
    gbuf = rasterize_water(eta, h, cam)
    mask = gbuf.water_mask()
    assert mask.any() and not mask.all()
    # d0 finite exactly where thickness > 0
    assert np.array_equal(mask, gbuf.thickness > 0.0)
    norms = np.linalg.norm(gbuf.normal, axis=-1)
    assert np.allclose(norms[mask], 1.0, atol=1e-9)
    assert np.all(gbuf.d0[mask] > 0.0)


def test_grid_mismatch_rejected():
    eta, _ = flat_pool(n=8)
    _, h = flat_pool(n=10)
    cam = down_camera((2.0, 2.0), 5.0)
    with pytest.raises(ValueError):
        rasterize_water(eta, h, cam)


def test_two_plateaus_read_their_own_depths():
    n = 10
    H = ScalarField2D(nx=n, ny=n, dx=0.5)
    h = ScalarField2D(nx=n, ny=n, dx=0.5, data=np.full((n, n), 0.1))
    h.data[:, 5:] = 3.0   # tall water column on the right half
    eta = H.like(H.data + h.data)
    cam = down_camera((2.25, 2.25), 10.0, width=64, height_px=64, fov=50.0)
    gbuf = rasterize_water(eta, h, cam)

    def depth_at(p):
        u, v, _ = cam.project(np.asarray([p]))
        return gbuf.d0[int(v[0]), int(u[0])]

    assert depth_at((3.75, 2.25, 3.0)) == pytest.approx(7.0, abs=1e-6)
    assert depth_at((1.00, 2.25, 0.1)) == pytest.approx(9.9, abs=1e-6)


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

def rasterize_oracle(eta, h, cam, h_render_min=1e-4):
    """Per-pixel point-in-triangle reference rasterizer (slow, tiny images)."""
    xs, ys = eta.cell_centers()
    gx, gy = np.meshgrid(xs, ys)
    verts = np.stack([gx.ravel(), gy.ravel(), eta.data.ravel()], axis=1)
    thick = h.data.ravel()

    tris = []
    for j in range(eta.ny - 1):
        for i in range(eta.nx - 1):
            v00 = j * eta.nx + i
            tris.append((v00, v00 + 1, v00 + eta.nx + 1))
            tris.append((v00, v00 + eta.nx + 1, v00 + eta.nx))

    d0 = np.full((cam.height, cam.width), np.inf)
    th = np.zeros((cam.height, cam.width))
    covers = np.zeros((cam.height, cam.width), dtype=int)
    for tri in tris:
        tv = [verts[k] for k in tri]
        if max(thick[k] for k in tri) <= h_render_min:
            continue
        pc = [cam.world_to_cam(p) for p in tv]
        if min(p[2] for p in pc) <= NEAR_PLANE:
            continue
        if np.linalg.det(np.stack(pc)) >= 0.0:
            continue
        uvz = [cam.project_cam(p) for p in pc]
        (u0, v0, z0), (u1, v1, z1), (u2, v2, z2) = uvz
        area = (u1 - u0) * (v2 - v0) - (v1 - v0) * (u2 - u0)
        if area == 0.0:
            continue
        sign = 1.0 if area > 0.0 else -1.0
        for r in range(cam.height):
            for c in range(cam.width):
                px, py = c + 0.5, r + 0.5
                w0 = ((u2 - u1) * (py - v1) - (v2 - v1) * (px - u1)) * sign
                w1 = ((u0 - u2) * (py - v2) - (v0 - v2) * (px - u2)) * sign
                w2 = ((u1 - u0) * (py - v0) - (v1 - v0) * (px - u0)) * sign
                if w0 < 0 or w1 < 0 or w2 < 0:
                    continue
                l0, l1, l2 = (w * sign / area for w in (w0, w1, w2))
                inv_z = l0 / z0 + l1 / z1 + l2 / z2
                z = 1.0 / inv_z
                covers[r, c] = max(covers[r, c], 1)
                if np.isfinite(d0[r, c]) and abs(z - d0[r, c]) > 0.05:
                    covers[r, c] = 2   # genuine occlusion at this pixel
                if z >= d0[r, c]:
                    continue
                d0[r, c] = z
                num = (l0 * thick[tri[0]] / z0 + l1 * thick[tri[1]] / z1
                       + l2 * thick[tri[2]] / z2)
                th[r, c] = num * z
    th[~np.isfinite(d0)] = 0.0
    bad = np.isfinite(d0) & (th <= 0.0)
    d0[bad] = np.inf
    th[bad] = 0.0
    return d0, th, covers


def test_matches_oracle_on_bumpy_surface():
    n = 8
    H = ScalarField2D(nx=n, ny=n, dx=0.5)
    xs, ys = H.cell_centers()
    X, Y = np.meshgrid(xs, ys)
    H.data[:] = 0.6 * np.abs(np.sin(X * 2.3) * np.cos(Y * 1.9))
    rng = np.random.default_rng(0)
    h = H.like(0.05 + 0.3 * rng.random((n, n)))
    h.data[0:2, 0:3] = 0.0   # leave a dry patch
    eta = H.like(H.data + h.data)
    # grazing view so near bumps occlude far ones
    cam = look_at_camera((1.75, -1.6, 1.1), (1.75, 1.75, 0.4),
                         width=16, height=12, fov_x_deg=60.0)

    gbuf = rasterize_water(eta, h, cam)
    d0_ref, th_ref, covers = rasterize_oracle(eta, h, cam)
    assert covers.max() >= 2   # z-buffer actually had to pick a winner
    assert np.array_equal(np.isfinite(gbuf.d0), np.isfinite(d0_ref))
    fin = np.isfinite(d0_ref)
    assert np.allclose(gbuf.d0[fin], d0_ref[fin], rtol=1e-9)
    assert np.allclose(gbuf.thickness, th_ref, atol=1e-9)


def test_quad_diagonal_is_watertight():
    # the two triangles sharing a cell diagonal must leave no pixel gap
    eta, h = flat_pool(n=2, dx=2.0, level=1.0)
    cam = down_camera((1.0, 1.0), 6.0, width=32, height_px=32, fov=30.0)
    gbuf = rasterize_water(eta, h, cam)
    u, v, _ = cam.project(np.array([
        [0.0, 0.0, 1.0], [2.0, 0.0, 1.0], [2.0, 2.0, 1.0], [0.0, 2.0, 1.0]]))
    # pixels strictly inside the projected quad are all covered
    inner_c = range(int(np.ceil(u.min() + 0.5)), int(np.floor(u.max() - 0.5)))
    inner_r = range(int(np.ceil(v.min() + 0.5)), int(np.floor(v.max() - 0.5)))
    block = gbuf.water_mask()[np.ix_(list(inner_r), list(inner_c))]
    assert block.all()


def test_gbuffer_empty_constructor():
    g = WaterGBuffer.empty(7, 5)
    assert g.d0.shape == (5, 7)
    assert np.all(np.isinf(g.d0))
    assert np.all(g.normal[..., 2] == 1.0)
    assert not g.water_mask().any()
