import math

import numpy as np
import pytest

from qslice.body import (BodyError, Hole, SweepError, Trajectory, depth_field, interior_mask, line, segment,
                         site_positions, swept_cells, two_plates)
from qslice.grid_field import Grid


def test_static_screen_positions():
    b = line("s", 0.0, 0.5, 1.0)
    for t in (0.0, 3.0, 10.0):
        kin = site_positions(b, t)
        np.testing.assert_array_equal(kin.positions, [[0.0]])
        np.testing.assert_array_equal(kin.velocities, [[0.0]])
        np.testing.assert_array_equal(kin.normals, [[-1.0]])


def test_impulse_kinematics():
    b = line("s", 0.0, 0.5, 1.0, trajectory=Trajectory(((0.0, (0.0,)), (4.0, (3.0,)))))
    assert site_positions(b, 6.0).positions[0, 0] == pytest.approx(6.0)
    assert site_positions(b, 3.99).velocities[0, 0] == 0.0
    # the boundary belongs to the later segment
    assert site_positions(b, 4.0).velocities[0, 0] == 3.0


def test_rotated_plate_stays_rigid():
    b = segment("p", (0.0, 0.0), 4.0, 0.5, 1.0, angle=math.pi / 2)
    kin = site_positions(b, 0.0)
    tangent = kin.positions[-1] - kin.positions[0]
    tangent /= np.linalg.norm(tangent)
    for n in kin.normals:
        assert abs(np.dot(n, tangent)) < 1e-12
        assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-12)


def test_rotation_rate_velocity():
    traj = Trajectory(((0.0, (0.0, 0.0)),), rotation_rate=0.5, pivot=(0.0, 0.0))
    b = segment("p", (0.0, 0.0), 4.0, 1.0, 1.0, trajectory=traj)
    kin = site_positions(b, 0.0)
    for p, v in zip(kin.positions, kin.velocities):
        np.testing.assert_allclose(v, 0.5 * np.array([-p[1], p[0]]), atol=1e-12)


def test_time_outside_script():
    b = line("s", 0.0, 0.5, 1.0, trajectory=Trajectory(((1.0, (0.0,)),)))
    with pytest.raises(BodyError, match="outside"):
        site_positions(b, 0.5)


def test_stationary_body_sweeps_nothing():
    g = Grid((-4.0,), (4.0,), (200,))
    b = line("s", 0.0, 0.5, 1.0)
    assert len(swept_cells(b, g, 0.0, 0.01).indices) == 0


def test_sweep_rate_matches_geometry():
    g = Grid((-4.0,), (4.0,), (200,))
    b = line("s", 0.01, 0.5, 1.0, trajectory=Trajectory(((0.0, (-2.0,)),)))
    counts = [len(swept_cells(b, g, i * 0.01, (i + 1) * 0.01).indices) for i in range(100)]
    assert set(counts) <= {0, 1}
    assert np.mean(counts) == pytest.approx(0.5, abs=0.02)


def test_sweep_more_than_a_cell():
    g = Grid((-4.0,), (4.0,), (200,))
    b = line("s", 0.0, 0.5, 1.0, trajectory=Trajectory(((0.0, (-10.0,)),)))
    with pytest.raises(SweepError):
        swept_cells(b, g, 0.0, 0.01)


def test_sweep_skips_holes():
    g = Grid((-8.0, -8.0), (8.0, 8.0), (64, 64))
    traj = Trajectory(((0.0, (-10.0, 0.0)),))
    b = line("p", (0.05, 0.0), 0.5, 1.0, thickness=1.0, site_span=(-8.0, 8.0), holes=[Hole(-1.0, 1.0)],
             trajectory=traj)
    sw = swept_cells(b, g, 0.0, 0.02)
    assert len(sw.indices) > 0
    ys = g.mesh[1].ravel()[sw.indices]
    assert not np.any(np.abs(ys) < 1.0)
    inside = interior_mask(b, g, 0.0)
    assert not np.any(inside[np.abs(g.mesh[1]) < 1.0])


def test_hole_timing():
    h = Hole(-1.0, 1.0, t_open=2.0, t_close=5.0)
    assert not h.active(1.0) and h.active(2.0) and not h.active(5.0)
    with pytest.raises(BodyError):
        Hole(1.0, -1.0)


def test_depth_field_half_space():
    g = Grid((-4.0,), (4.0,), (80,))
    b = line("s", 0.0, 0.5, 1.0)
    depth = depth_field(b, g, 0.0)
    x = g.axes[0]
    np.testing.assert_allclose(depth[x > 0], x[x > 0])
    assert np.all(depth[x < 0] <= 0)


def test_two_plates_layout():
    first, second = two_plates("pp", 0.0, 4.0, 1.0, 0.5, 1.0, eta_first=0.5, second_skin=2.0,
                               second_absorption=9.0)
    assert first.name == "pp.1" and second.name == "pp.2"
    assert first.eta == 0.5 and second.eta == 1.0
    # separation runs face to face
    assert site_positions(second, 0.0).positions[0, 0] == pytest.approx(4.0)
    assert second.skin == 2.0 and second.absorption == 9.0


@pytest.mark.parametrize("kw", [dict(d=0.0), dict(eta=1.5), dict(angle=0.3)])
def test_invalid_bodies(kw):
    args = dict(d=0.5, v_s=1.0)
    args.update({k: v for k, v in kw.items() if k in ("d", "v_s")})
    extra = {k: v for k, v in kw.items() if k not in ("d", "v_s")}
    with pytest.raises(BodyError):
        line("s", 0.0, args["d"], args["v_s"], **extra)
