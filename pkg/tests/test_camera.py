import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kioplan.camera import (FORWARD_R_BC, BodyPose, Camera, CameraExtrinsics, DepthImage, Intrinsics, back_project,
                            bilinear_weights, pixel_rays, project, project_points, read_pfm, render_depth,
                            sample_depth_bilinear, sample_depth_nearest, world_to_camera_transform, write_depth_dump,
                            write_pfm)
from kioplan.world import Wall, World, ray_hit
from oracles import pinhole_project

INTR = Intrinsics.from_fov()
EXTR = CameraExtrinsics()


def frontal_wall_world(dist: float = 2.0) -> World:
    # camera at the origin facing +x; wall face at x = dist
    return World((20.0, 20.0, 20.0), [Wall((dist + 0.25, 0.0, 0.0), (0.25, 5.0, 5.0))])


def pose_strategy():
    return st.builds(lambda x, y, z, yaw: BodyPose.from_yaw([x, y, z], yaw),
                     st.floats(-5, 5), st.floats(-5, 5), st.floats(-2, 2), st.floats(-math.pi, math.pi))


def test_intrinsics_defaults():
    assert (INTR.width, INTR.height) == (96, 72)
    assert INTR.fx == pytest.approx(48.0 / math.tan(math.radians(43.5)))
    assert INTR.fy == INTR.fx
    assert (INTR.cx, INTR.cy) == (48.0, 36.0)


def test_forward_rotation_is_proper():
    assert np.linalg.det(FORWARD_R_BC) == pytest.approx(1.0)
    # body forward maps to camera +z, body left to camera -x, body up to camera -y
    np.testing.assert_array_equal(FORWARD_R_BC.T @ [1, 0, 0], [0, 0, 1])
    np.testing.assert_array_equal(FORWARD_R_BC.T @ [0, 1, 0], [-1, 0, 0])
    np.testing.assert_array_equal(FORWARD_R_BC.T @ [0, 0, 1], [0, -1, 0])


def test_optical_axis_projects_to_principal_point():
    u, v, z = project([2.0, 0.0, 0.0], BodyPose.identity(), INTR, EXTR)
    assert (u, v, z) == pytest.approx((INTR.cx, INTR.cy, 2.0))


def test_point_behind_camera_is_absent():
    assert project([-1.0, 0.0, 0.0], BodyPose.identity(), INTR, EXTR) is None


def test_back_project_principal_point():
    p = back_project(INTR.cx, INTR.cy, 3.0, BodyPose.identity(), INTR, EXTR)
    np.testing.assert_allclose(p, [3.0, 0.0, 0.0], atol=1e-15)


def test_corner_pixel_on_corner_ray():
    p = back_project(0.0, 0.0, 1.0, BodyPose.identity(), INTR, EXTR)
    C, o = world_to_camera_transform(BodyPose.identity(), EXTR)
    ray = pixel_rays(INTR)[0, 0]
    np.testing.assert_allclose(C @ (p - o), ray, atol=1e-12)


def test_projection_matches_pinhole_formula():
    pose = BodyPose.from_yaw([1.0, 2.0, 0.5], 0.3)
    pt = np.array([4.0, 3.0, 1.0])
    C, o = world_to_camera_transform(pose, EXTR)
    ref = pinhole_project(C @ (pt - o), INTR.fx, INTR.fy, INTR.cx, INTR.cy)
    u, v, _ = project(pt, pose, INTR, EXTR)
    assert (u, v) == pytest.approx(ref, abs=1e-12)


@given(pose_strategy(), st.floats(1e-3, 95.99), st.floats(1e-3, 71.99), st.floats(0.2, 20.0))
def test_round_trip_in_frustum(pose, u, v, depth):
    p = back_project(u, v, depth, pose, INTR, EXTR)
    got = project(p, pose, INTR, EXTR)
    assert got is not None
    assert got == pytest.approx((u, v, depth), abs=1e-9)
    q = back_project(*got, pose, INTR, EXTR)
    assert np.linalg.norm(q - p) < 1e-9


def test_frontal_wall_center_depth():
    img = render_depth(frontal_wall_world(2.0), BodyPose.identity(), INTR, EXTR)
    # [DERIVED] ray_hit along the optical axis
    assert ray_hit(frontal_wall_world(2.0), [0, 0, 0], [1, 0, 0], 5.0) == pytest.approx(2.0)
    assert img.values[36, 48] == pytest.approx(2.0, abs=1e-6)
    # z-depth of a plane is constant across the image
    np.testing.assert_allclose(img.values, 2.0, atol=1e-12)


def test_empty_world_renders_max_range():
    img = render_depth(World((5.0, 5.0, 5.0), []), BodyPose.identity(), INTR, EXTR)
    assert img.values.shape == (72, 96)
    assert np.all(img.values == 5.0)


def test_render_is_deterministic():
    w = frontal_wall_world(3.0)
    pose = BodyPose.from_yaw([0.0, 0.5, 0.2], 0.4)
    np.testing.assert_array_equal(render_depth(w, pose, INTR).values, render_depth(w, pose, INTR).values)


def random_scene(seed):
    rng = np.random.default_rng(seed)
    walls = [Wall((rng.uniform(1.5, 5), rng.uniform(-3, 3), rng.uniform(-1, 1)), tuple(rng.uniform(0.1, 1.0, 3)))
             for _ in range(3)]
    return World((20.0, 20.0, 20.0), walls), BodyPose.from_yaw([0.0, 0.0, 0.0], rng.uniform(-0.5, 0.5)), rng


@given(st.integers(0, 5000))
def test_rendered_depth_matches_projected_hit(seed):
    world, pose, rng = random_scene(seed)
    img = render_depth(world, pose, INTR, EXTR)
    rays = pixel_rays(INTR)
    R = pose.rotation @ EXTR.rotation
    for _ in range(10):
        iv, iu = int(rng.integers(0, 72)), int(rng.integers(0, 96))
        d = R @ rays[iv, iu]
        n = np.linalg.norm(d)
        t = ray_hit(world, pose.translation, d / n, 5.0 * n)
        if t is None or t / n > 5.0:
            assert img.values[iv, iu] == 5.0
            continue
        hit = pose.translation + t * d / n
        # border pixels may land a rounding error outside the image, so skip the validity mask
        u, v, z, _ = project_points(hit[None], pose, INTR, EXTR)
        assert (u[0], v[0]) == pytest.approx((iu, iv), abs=1e-6)
        assert img.values[iv, iu] == pytest.approx(z[0], abs=1e-6)


@given(st.integers(0, 5000))
def test_adding_a_wall_never_increases_depth(seed):
    world, pose, rng = random_scene(seed)
    extra = Wall((rng.uniform(1.5, 4), rng.uniform(-2, 2), 0.0), tuple(rng.uniform(0.1, 1.0, 3)))
    before = render_depth(world, pose, INTR, EXTR).values
    after = render_depth(World(world.extent, world.walls + [extra]), pose, INTR, EXTR).values
    assert np.all(after <= before)


def test_frustum_culling_is_exact():
    import kioplan.camera as cam

    world, pose, _ = random_scene(3)
    world = World(world.extent, world.walls + [Wall((-3.0, 0.0, 0.0), (0.5, 0.5, 0.5)),
                                               Wall((0.0, 4.0, 0.0), (0.5, 0.5, 0.5))])
    culled = render_depth(world, pose, INTR, EXTR).values
    keep = cam._in_frustum
    try:
        cam._in_frustum = lambda w, idx, *a: np.ones(len(idx), bool)
        full = render_depth(world, pose, INTR, EXTR).values
    finally:
        cam._in_frustum = keep
    np.testing.assert_array_equal(culled, full)


def test_bilinear_identities():
    rng = np.random.default_rng(0)
    img = DepthImage(rng.uniform(0.5, 5.0, (72, 96)))
    for iu, iv in [(0, 0), (95, 71), (10, 20), (95, 0)]:
        assert sample_depth_bilinear(img, iu, iv) == img.values[iv, iu]
    assert sample_depth_bilinear(img, 10.5, 20) == pytest.approx(0.5 * (img.values[20, 10] + img.values[20, 11]))
    const = DepthImage(np.full((72, 96), 3.25))
    assert sample_depth_bilinear(const, 17.3, 44.9) == pytest.approx(3.25, abs=1e-15)


@given(st.floats(0.01, 94.99), st.floats(0.01, 70.99))
def test_bilinear_derivatives_match_finite_differences(u, v):
    img = DepthImage(np.random.default_rng(1).uniform(0.5, 5.0, (72, 96)))
    fu, fv = u - math.floor(u), v - math.floor(v)
    # stay off the pixel grid where the interpolant has kinks
    if min(fu, 1 - fu, fv, 1 - fv) < 1e-3:
        return
    _, du, dv = bilinear_weights(img, u, v)
    h = 1e-6
    nu = (sample_depth_bilinear(img, u + h, v) - sample_depth_bilinear(img, u - h, v)) / (2 * h)
    nv = (sample_depth_bilinear(img, u, v + h) - sample_depth_bilinear(img, u, v - h)) / (2 * h)
    assert du == pytest.approx(nu, rel=1e-5, abs=1e-6)
    assert dv == pytest.approx(nv, rel=1e-5, abs=1e-6)


def test_nearest_sampling_rounds_and_clamps():
    img = DepthImage(np.arange(72 * 96, dtype=float).reshape(72, 96))
    assert sample_depth_nearest(img, 3.4, 2.6) == img.values[3, 3]
    assert sample_depth_nearest(img, -5.0, 100.0) == img.values[71, 0]


def test_pfm_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    img = DepthImage(rng.uniform(0.1, 5.0, (72, 96)).astype(np.float32).astype(float))
    write_pfm(tmp_path / "d.pfm", img)
    raw = (tmp_path / "d.pfm").read_bytes()
    assert raw.startswith(b"Pf\n96 72\n-1.0\n")
    np.testing.assert_array_equal(read_pfm(tmp_path / "d.pfm").values, img.values)
    pfm, side = write_depth_dump(tmp_path / "frame", img, BodyPose.identity(), INTR)
    assert pfm.exists() and side.exists()


def test_project_points_vectorised_matches_scalar():
    rng = np.random.default_rng(3)
    pose = BodyPose.from_yaw([0.5, -0.2, 1.0], -0.7)
    pts = rng.uniform(-4, 4, (50, 3))
    u, v, z, valid = project_points(pts, pose, INTR, EXTR)
    for i, p in enumerate(pts):
        got = project(p, pose, INTR, EXTR)
        assert (got is not None) == bool(valid[i])
        if got is not None:
            assert got == pytest.approx((u[i], v[i], z[i]))


def test_camera_bundle_defaults():
    cam = Camera()
    assert cam.intrinsics == INTR
    np.testing.assert_array_equal(cam.extrinsics.rotation, FORWARD_R_BC)
