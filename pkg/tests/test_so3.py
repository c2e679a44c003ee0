import numpy as np
import pytest

from growthlab.so3 import (SpherePoint3, TracelessHermitian, antipodal_frame, axis_angle_matrix,
                           conjugation_action, cover_pi, preimages, property_battery, random_sphere_points,
                           rotation_residuals, z4_lift)


def quaternion_rotation(w, x, y, z):
    """Textbook rotation matrix of a unit quaternion, used as an independent oracle."""
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def test_identity_is_exact():
    assert np.array_equal(cover_pi(SpherePoint3(1, 0)), np.eye(3))


def test_cover_is_a_rotation_for_random_points():
    rng = np.random.default_rng(1)
    for x in random_sphere_points(200, rng):
        orth, det = rotation_residuals(cover_pi(x))
        assert orth < 1e-13 and det < 1e-13


def test_matches_quaternion_formula_up_to_convention():
    # the cover is a right action, so it agrees with the quaternion formula of the conjugate
    rng = np.random.default_rng(2)
    hits = 0
    for x in random_sphere_points(50, rng):
        R = cover_pi(x)
        candidates = [quaternion_rotation(*q) for q in (
            (x.z1.real, -x.z2.imag, -x.z2.real, -x.z1.imag),
            (x.z1.real, x.z2.imag, x.z2.real, x.z1.imag))]
        hits += min(np.abs(R - C).max() for C in candidates) < 1e-12
    assert hits == 50


def test_half_turns_and_preimages():
    for axis in np.eye(3):
        R = axis_angle_matrix(axis, np.pi)
        z, mz = preimages(R)
        assert np.abs(cover_pi(z) - R).max() < 1e-13
        assert np.allclose(mz.as_array(), -z.as_array())


def test_two_to_one_and_homomorphism():
    rng = np.random.default_rng(3)
    xs = random_sphere_points(100, rng)
    ys = random_sphere_points(100, rng)
    for x, y in zip(xs, ys):
        assert np.abs(cover_pi(-x) - cover_pi(x)).max() < 1e-14
        assert np.abs(cover_pi(x * y) - cover_pi(y) @ cover_pi(x)).max() < 1e-13


def test_conjugation_preserves_norm():
    rng = np.random.default_rng(4)
    x = random_sphere_points(1, rng)[0]
    m = TracelessHermitian(0.3, -1.2, 0.7)
    out = conjugation_action(x, m)
    assert out.norm() == pytest.approx(m.norm(), rel=1e-14)
    assert np.allclose(out.as_array(), cover_pi(x) @ m.as_array(), atol=1e-14)


def test_z4_lift_negates_first_two_columns():
    rng = np.random.default_rng(5)
    for x in random_sphere_points(50, rng):
        assert np.abs(cover_pi(z4_lift(x)) - antipodal_frame(cover_pi(x))).max() < 1e-13
        twice = z4_lift(z4_lift(x))
        assert np.allclose(twice.as_array(), -x.as_array())


def test_non_sphere_point_rejected():
    with pytest.raises(ValueError):
        SpherePoint3(0, 0)


def test_battery_is_seeded():
    assert property_battery(20, 7) == property_battery(20, 7)
