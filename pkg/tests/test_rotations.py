import numpy as np
import pytest

from gesturegen.errors import InvalidInputError
from gesturegen.rotations import (
    ROTATION_ORDERS,
    euler_to_expmap,
    euler_to_matrix,
    expmap_continuity_fix,
    expmap_to_euler,
    expmap_to_matrix,
)

from oracles import euler_matrix, rodrigues


class TestEulerToExpmap:
    @pytest.mark.parametrize("order", ROTATION_ORDERS)
    def test_identity(self, order):
        np.testing.assert_allclose(euler_to_expmap([0, 0, 0], order), 0.0)

    def test_single_axis_quarter_turn(self):
        m = euler_to_expmap([90.0, 0.0, 0.0], "XYZ", degrees=True)
        np.testing.assert_allclose(m, [np.pi / 2, 0, 0], atol=1e-12)

    def test_random_round_trips_match_matrix_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            order = ROTATION_ORDERS[rng.integers(len(ROTATION_ORDERS))]
            angles = rng.uniform(-np.pi, np.pi, 3)
            m = euler_to_expmap(angles, order)
            R_in = euler_matrix(angles, order)
            err = np.linalg.norm(rodrigues(m) - R_in)
            assert err < 1e-9

    def test_canonical_magnitude(self):
        rng = np.random.default_rng(0)
        angles = rng.uniform(-2 * np.pi, 2 * np.pi, (500, 3))
        m = euler_to_expmap(angles, "ZXY")
        assert np.all(np.linalg.norm(m, axis=1) <= np.pi + 1e-12)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            euler_to_expmap([np.nan, 0, 0], "XYZ")
        with pytest.raises(InvalidInputError):
            euler_to_expmap([0, 0, 0], "XXY")


class TestExpmapToEuler:
    def test_identity(self):
        np.testing.assert_allclose(expmap_to_euler([0, 0, 0], "XYZ", degrees=True), 0.0)

    def test_half_turn_first_axis(self):
        e = expmap_to_euler([np.pi, 0, 0], "XYZ", degrees=True)
        np.testing.assert_allclose(e, [180.0, 0.0, 0.0], atol=1e-9)

    def test_round_trip_preserves_matrix(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            order = ROTATION_ORDERS[rng.integers(len(ROTATION_ORDERS))]
            angles = rng.uniform(-np.pi, np.pi, 3)
            e2 = expmap_to_euler(euler_to_expmap(angles, order), order)
            err = np.linalg.norm(euler_matrix(e2, order) - euler_matrix(angles, order))
            assert err < 1e-9

    def test_gimbal_lock_middle_angle(self):
        # middle angle exactly +-90 deg: the convention zeroes the third
        # angle but must keep the rotation itself
        for order in ROTATION_ORDERS:
            for middle in (90.0, -90.0):
                angles = np.radians([37.0, middle, -21.0])
                m = euler_to_expmap(angles, order)
                back = expmap_to_euler(m, order)
                assert abs(back[2]) < 1e-9
                err = np.linalg.norm(
                    euler_matrix(back, order) - euler_matrix(angles, order)
                )
                assert err < 1e-9


class TestMatrices:
    def test_euler_to_matrix_matches_composition(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            order = ROTATION_ORDERS[rng.integers(len(ROTATION_ORDERS))]
            angles = rng.uniform(-np.pi, np.pi, 3)
            np.testing.assert_allclose(
                euler_to_matrix(angles, order), euler_matrix(angles, order), atol=1e-12
            )

    def test_expmap_to_matrix_matches_rodrigues(self):
        rng = np.random.default_rng(4)
        vs = rng.uniform(-np.pi, np.pi, (200, 3))
        for v in vs:
            np.testing.assert_allclose(expmap_to_matrix(v), rodrigues(v), atol=1e-12)

    def test_batched_shapes(self):
        rng = np.random.default_rng(5)
        angles = rng.uniform(-1, 1, (10, 4, 3))
        assert euler_to_matrix(angles, "ZXY").shape == (10, 4, 3, 3)
        assert euler_to_expmap(angles, "ZXY").shape == (10, 4, 3)


class TestContinuityFix:
    def test_constant_sequence_unchanged(self):
        seq = np.tile([0.3, 0.2, -0.1], (20, 1))
        np.testing.assert_allclose(expmap_continuity_fix(seq), seq)

    def test_single_element_unchanged(self):
        seq = np.array([[0.5, 0.0, 0.0]])
        np.testing.assert_allclose(expmap_continuity_fix(seq), seq)

    def test_crossing_pi_reduces_jumps(self):
        # slow rotation about x from 170 to 181 degrees: canonical output
        # flips sign past 180, the fixed output must not
        degs = np.linspace(170.0, 181.0, 23)
        raw = np.stack([euler_to_expmap([d, 0, 0], "XYZ", degrees=True) for d in degs])
        fixed = expmap_continuity_fix(raw)
        raw_jumps = np.linalg.norm(np.diff(raw, axis=0), axis=1)
        fixed_jumps = np.linalg.norm(np.diff(fixed, axis=0), axis=1)
        assert fixed_jumps.max() < raw_jumps.max()
        assert fixed_jumps.max() < 0.05

    def test_rotation_preserved(self):
        rng = np.random.default_rng(6)
        seq = np.cumsum(rng.uniform(-0.4, 0.4, (50, 3)), axis=0)
        canonical = np.stack(
            [euler_to_expmap(np.degrees(v), "XYZ", degrees=True) for v in seq]
        )
        fixed = expmap_continuity_fix(canonical)
        for before, after in zip(canonical, fixed):
            err = np.linalg.norm(rodrigues(before) - rodrigues(after))
            assert err < 1e-9

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            expmap_continuity_fix(np.zeros((0, 3)))
