import numpy as np
import pytest

from rainsim.rain import DropArray, Impact
from rainsim.rain_render import (
    STREAK_BASE_COLOR,
    RainRenderParams,
    Splat2D,
    SplatBatch,
    composite_rain_pass,
    over_composite,
    project_covariance,
    splash_world_covariance,
    splat_splashes,
    splat_streaks,
)
from rainsim.scene import Camera


def identity_cam(size=64, f=100.0):
    return Camera(width=size, height=size, fx=f, fy=f, cx=size / 2, cy=size / 2,
                  R=np.eye(3), t=np.zeros(3))


def test_params_validation():
    RainRenderParams()
    for kw in ({"streak_subsplats": 0}, {"streak_opacity": 0.0},
               {"splash_opacity": 1.5}, {"splash_aspect": 0.5},
               {"splash_lifetime": 0.0}, {"exposure_time": -1.0}):
        with pytest.raises(ValueError):
            RainRenderParams(**kw)


def test_splat_validation():
    ok = dict(center=(1.0, 2.0), cov=np.eye(2), depth=1.0,
              color=np.ones(3), opacity=0.5)
    Splat2D(**ok)
    with pytest.raises(ValueError):
        Splat2D(**{**ok, "cov": np.array([[1.0, 0.5], [0.0, 1.0]])})
    with pytest.raises(ValueError):
        Splat2D(**{**ok, "cov": np.array([[1.0, 2.0], [2.0, 1.0]])})
    with pytest.raises(ValueError):
        Splat2D(**{**ok, "opacity": 0.0})
    with pytest.raises(ValueError):
        Splat2D(**{**ok, "depth": -1.0})


def test_batch_concat_and_getitem():
    s = Splat2D(center=(3.0, 4.0), cov=2.0 * np.eye(2), depth=1.5,
                color=np.array([0.1, 0.2, 0.3]), opacity=0.4)
    b = SplatBatch.from_splats([s, s])
    assert len(b) == 2
    back = b[1]
    assert np.array_equal(back.center, s.center)
    assert np.array_equal(back.cov, s.cov)
    assert back.depth == s.depth and back.opacity == s.opacity
    both = SplatBatch.concat([b, SplatBatch(), b])
    assert len(both) == 4
    assert len(SplatBatch.concat([])) == 0


# ---------------------------------------------------------------------------
# splash covariance
# ---------------------------------------------------------------------------

def test_splash_cov_determinant_is_volume_squared():
    r = 0.01
    vol = 4.0 / 3.0 * np.pi * r ** 3
    cov = splash_world_covariance(np.array([1.0, 0.0, -2.0]),
                                  np.array([0.0, 0.0, 1.0]), r, aspect=3.0)
    assert np.linalg.det(cov) == pytest.approx(vol ** 2, rel=1e-9)
    assert np.linalg.det(cov) == pytest.approx(1.7546e-11, rel=1e-4)


def test_splash_cov_major_axis_along_tangential_velocity():
    n = np.array([0.0, 0.0, 1.0])
    v = np.array([1.0, 0.0, -1.0]) / np.sqrt(2.0)
    cov = splash_world_covariance(v, n, 0.002, aspect=3.0)
    vol = 4.0 / 3.0 * np.pi * 0.002 ** 3
    s = (vol / 3.0) ** (1.0 / 3.0)
    # (1,0,0), (0,1,0), n are eigenvectors with known variances
    assert np.allclose(cov @ [1.0, 0.0, 0.0], (3.0 * s) ** 2 * np.array([1.0, 0.0, 0.0]), atol=1e-18)
    assert np.allclose(cov @ [0.0, 1.0, 0.0], s ** 2 * np.array([0.0, 1.0, 0.0]), atol=1e-18)
    assert np.allclose(cov @ n, s ** 2 * n, atol=1e-18)
    # eigenvector direction is within 1e-6 rad of the tangential velocity
    evals, evecs = np.linalg.eigh(cov)
    major = evecs[:, np.argmax(evals)]
    angle = np.arccos(min(1.0, abs(np.dot(major, [1.0, 0.0, 0.0]))))
    assert angle < 1e-6


def test_splash_cov_vertical_hit_degenerates_cleanly():
    n = np.array([0.0, 0.0, 1.0])
    cov = splash_world_covariance(np.array([0.0, 0.0, -5.0]), n, 0.003, aspect=3.0)
    vol = 4.0 / 3.0 * np.pi * 0.003 ** 3
    assert np.linalg.det(cov) == pytest.approx(vol ** 2, rel=1e-9)
    s = (vol / 3.0) ** (1.0 / 3.0)
    assert np.allclose(cov @ n, s ** 2 * n, atol=1e-18)  # normal axis stays minor


def test_splash_cov_unit_aspect_is_isotropic():
    cov = splash_world_covariance(np.array([1.0, 2.0, -3.0]),
                                  np.array([0.0, 0.0, 1.0]), 0.005, aspect=1.0)
    vol = 4.0 / 3.0 * np.pi * 0.005 ** 3
    assert np.allclose(cov, vol ** (2.0 / 3.0) * np.eye(3), atol=1e-15)


def test_project_covariance_fronto_parallel():
    cam = identity_cam(f=200.0)
    z = 4.0
    cov_w = np.diag([0.01, 0.04, 0.09])
    cov_s = project_covariance(cov_w, cam, np.array([0.0, 0.0, z]))
    # on the optical axis the Jacobian is diag(f/z, f/z): plain pinhole scaling
    want = np.diag([(200.0 / z) ** 2 * 0.01, (200.0 / z) ** 2 * 0.04])
    assert np.allclose(cov_s, want, atol=1e-12)


# ---------------------------------------------------------------------------
# streak splats
# ---------------------------------------------------------------------------

def black_image(size=64):
    return np.zeros((size, size, 3))


def test_streaks_empty_input():
    assert len(splat_streaks(DropArray(), identity_cam(), black_image(),
                             RainRenderParams())) == 0


def test_streak_subsplat_layout():
    cam = identity_cam()
    params = RainRenderParams(streak_subsplats=5, exposure_time=0.008)
    drops = DropArray(pos=np.array([[0.1, 0.05, 2.0]]),
                      vel=np.array([[0.0, 0.0, -8.0]]),
                      radius=np.array([0.002]))
    batch = splat_streaks(drops, cam, black_image(), params)
    assert len(batch) == 5

    # head sits at the drop, tail exposure_time upstream of the velocity
    u0, v0, z0 = (float(a[0]) for a in cam.project(drops.pos[:1]))
    assert np.allclose(batch.centers[0], [u0, v0], atol=1e-12)
    assert batch.depths[0] == pytest.approx(z0, abs=1e-15)
    tail_pos = drops.pos[0] - drops.vel[0] * 0.008
    ut, vt, zt = (float(a[0]) for a in cam.project(tail_pos[None, :]))
    assert np.allclose(batch.centers[4], [ut, vt], atol=1e-12)
    assert batch.depths[4] == pytest.approx(zt, abs=1e-15)

    # screen sigma is the pinhole scaling of the drop radius
    for k in range(5):
        sig2 = (0.002 * cam.fx / batch.depths[k]) ** 2
        assert np.allclose(batch.covs[k], sig2 * np.eye(2), atol=1e-18)
    assert np.all(batch.opacities == params.streak_opacity)


def test_streak_color_on_black_base_is_the_constant():
    drops = DropArray(pos=np.array([[0.0, 0.0, 2.0]]),
                      vel=np.array([[0.0, 0.0, -8.0]]),
                      radius=np.array([0.002]))
    batch = splat_streaks(drops, identity_cam(), black_image(), RainRenderParams())
    assert np.array_equal(batch.colors,
                          np.repeat(STREAK_BASE_COLOR[None, :], len(batch), axis=0))


def test_streak_color_on_uniform_gray_base():
    drops = DropArray(pos=np.array([[0.0, 0.0, 2.0]]),
                      vel=np.array([[0.0, 0.0, -8.0]]),
                      radius=np.array([0.002]))
    base = np.full((64, 64, 3), 0.5)
    batch = splat_streaks(drops, identity_cam(), base, RainRenderParams())
    assert np.allclose(batch.colors, STREAK_BASE_COLOR[None, :], atol=1e-12)


def test_streak_luminance_clamp():
    cam = identity_cam()
    params = RainRenderParams(streak_subsplats=1)
    base = np.full((64, 64, 3), 0.5)
    base[:, 32:] = 5.0   # bright right half lifts the mean above 0.5
    drops = DropArray(
        pos=np.array([[-0.3, 0.0, 2.0], [0.3, 0.0, 2.0]]),  # left, right
        vel=np.zeros((2, 3)),
        radius=np.array([0.002, 0.002]),
    )
    batch = splat_streaks(drops, cam, base, params)
    lo, hi = params.lum_clamp
    assert np.allclose(batch.colors[0], STREAK_BASE_COLOR * lo, atol=1e-12)
    assert np.allclose(batch.colors[1], STREAK_BASE_COLOR * hi, atol=1e-12)


def test_streak_drops_behind_camera_are_skipped():
    drops = DropArray(pos=np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 2.0]]),
                      vel=np.zeros((2, 3)),
                      radius=np.array([0.002, 0.002]))
    params = RainRenderParams(streak_subsplats=2)
    batch = splat_streaks(drops, identity_cam(), black_image(), params)
    assert len(batch) == 2   # only the drop in front contributes


# ---------------------------------------------------------------------------
# splash splats
# ---------------------------------------------------------------------------

def one_impact(z=2.0):
    return Impact(pos=np.array([0.0, 0.0, z]),
                  vel=np.array([1.0, 0.0, -4.0]),
                  radius=0.003)


def test_splash_fresh_impact():
    cam = identity_cam()
    params = RainRenderParams()
    imp = one_impact()
    batch = splat_splashes([imp], np.array([0.0, 0.0, 1.0]), cam, params)
    assert len(batch) == 1
    u, v, z = (float(a[0]) for a in cam.project(imp.pos[None, :]))
    assert np.allclose(batch.centers[0], [u, v], atol=1e-12)
    assert batch.depths[0] == pytest.approx(z, abs=1e-15)
    assert batch.opacities[0] == params.splash_opacity
    assert np.array_equal(batch.colors[0], STREAK_BASE_COLOR)


def test_splash_fade_and_expiry():
    cam = identity_cam()
    params = RainRenderParams(splash_lifetime=0.15, splash_opacity=0.5)
    imps = [one_impact(), one_impact(), one_impact()]
    ages = np.array([0.0, 0.075, 0.15])
    batch = splat_splashes(imps, np.array([0.0, 0.0, 1.0]), cam, params, ages=ages)
    assert len(batch) == 2   # the expired one is gone
    assert batch.opacities[0] == pytest.approx(0.5)
    assert batch.opacities[1] == pytest.approx(0.25)


def test_splash_behind_camera_skipped():
    cam = identity_cam()
    batch = splat_splashes([one_impact(z=-1.0)], np.array([0.0, 0.0, 1.0]),
                           cam, RainRenderParams())
    assert len(batch) == 0


def test_splash_per_impact_normals():
    cam = identity_cam()
    imps = [one_impact(), one_impact()]
    normals = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    batch = splat_splashes(imps, normals, cam, RainRenderParams())
    assert len(batch) == 2
    assert not np.allclose(batch.covs[0], batch.covs[1])


# ---------------------------------------------------------------------------
# compositor
# ---------------------------------------------------------------------------

def center_splat(op, depth=2.0, color=(1.0, 0.0, 0.0), sigma=1.0, size=16):
    return Splat2D(center=(size / 2 + 0.5, size / 2 + 0.5),
                   cov=sigma ** 2 * np.eye(2), depth=depth,
                   color=np.asarray(color, dtype=np.float64), opacity=op)


def test_composite_no_splats():
    rgba, d1 = composite_rain_pass(SplatBatch(), 8, 6)
    assert rgba.shape == (6, 8, 4)
    assert np.all(rgba == 0.0)
    assert np.all(np.isinf(d1))


def test_composite_weight_at_center_is_opacity():
    s = center_splat(op=0.3)
    rgba, d1 = composite_rain_pass(SplatBatch.from_splats([s]), 16, 16)
    r = c = 8
    assert rgba[r, c, 3] == 0.3          # exp(0) term, exactly the opacity
    assert rgba[r, c, 0] == 0.3          # premultiplied red
    assert d1[r, c] == 2.0               # 0.3 > alpha_min locks the depth
    assert np.isinf(d1[0, 0])


def test_composite_three_sigma_cutoff():
    s = center_splat(op=1.0, sigma=1.0)
    rgba, _ = composite_rain_pass(SplatBatch.from_splats([s]), 16, 16)
    assert rgba[8, 8 + 2, 3] == pytest.approx(np.exp(-2.0))  # q = 4
    assert rgba[8, 8 + 4, 3] == 0.0                          # q = 16 > 9


def test_composite_two_splats_front_to_back():
    front = center_splat(op=0.5, depth=1.0, color=(1.0, 0.0, 0.0))
    back = center_splat(op=0.5, depth=3.0, color=(0.0, 0.0, 1.0))
    # feed them back-first: the compositor must sort by depth itself
    rgba, d1 = composite_rain_pass(SplatBatch.from_splats([back, front]), 16, 16)
    r = c = 8
    assert rgba[r, c, 3] == pytest.approx(0.75)          # 0.5 + 0.5*0.5
    assert rgba[r, c, 0] == pytest.approx(0.5)           # front red first
    assert rgba[r, c, 2] == pytest.approx(0.25)          # back blue attenuated
    assert d1[r, c] == 1.0


def test_composite_d1_threshold_rule():
    # each splat adds alpha 0.04; the second pushes past alpha_min = 0.05
    a = center_splat(op=0.04, depth=1.0)
    b = center_splat(op=0.04, depth=2.0)
    rgba, d1 = composite_rain_pass(SplatBatch.from_splats([a, b]), 16, 16)
    assert rgba[8, 8, 3] == pytest.approx(0.04 + 0.96 * 0.04)
    assert d1[8, 8] == 2.0

    # exactly alpha_min does not own d1 (strict inequality)
    c = center_splat(op=0.05, depth=1.0)
    _, d1 = composite_rain_pass(SplatBatch.from_splats([c]), 16, 16)
    assert np.isinf(d1[8, 8])


def test_composite_saturation_short_circuit():
    first = center_splat(op=1.0, depth=1.0, color=(1.0, 0.0, 0.0))
    second = center_splat(op=1.0, depth=2.0, color=(0.0, 1.0, 0.0))
    rgba, d1 = composite_rain_pass(SplatBatch.from_splats([first, second]), 16, 16)
    assert rgba[8, 8, 3] == 1.0
    assert rgba[8, 8, 0] == 1.0
    assert rgba[8, 8, 1] == 0.0
    assert d1[8, 8] == 1.0


def test_over_composite_limits():
    base = np.full((4, 4, 3), 0.25)
    rgba = np.zeros((4, 4, 4))
    assert np.array_equal(over_composite(rgba, base), base)
    rgba[..., :3] = 0.8
    rgba[..., 3] = 1.0
    assert np.allclose(over_composite(rgba, base), 0.8)
    # half-alpha premultiplied gray over the base
    rgba[..., :3] = 0.3
    rgba[..., 3] = 0.5
    assert np.allclose(over_composite(rgba, base), 0.3 + 0.5 * 0.25)
