import numpy as np
import pytest

from traybot.dynamics import LIMB_NAMES, PlanarQuadruped, TwoLinkArm

from _oracles import finite_difference_gradient

MODEL = TwoLinkArm()


def random_state(rng):
    q = rng.uniform(-2.5, 2.5, 2)
    qd = rng.uniform(-2.0, 2.0, 2)
    return q, qd


class TestMassMatrix:
    def test_symmetry_and_positive_definiteness(self, rng):
        for _ in range(100):
            q, _ = random_state(rng)
            d = MODEL.mass_matrix(q)
            assert np.abs(d - d.T).max() <= 1e-12
            np.linalg.cholesky(d)

    def test_matches_kinetic_energy_hessian(self, rng):
        # oracle: D_ij = d^2 T / dqd_i dqd_j with T computed from link
        # velocities, independent of the closed-form matrix
        h = 1e-5
        for _ in range(20):
            q, qd = random_state(rng)
            d = MODEL.mass_matrix(q)
            for i in range(2):
                for j in range(2):
                    e_i = np.zeros(2); e_i[i] = h
                    e_j = np.zeros(2); e_j[j] = h
                    tpp = MODEL.kinetic_energy(q, qd + e_i + e_j)
                    tpm = MODEL.kinetic_energy(q, qd + e_i - e_j)
                    tmp = MODEL.kinetic_energy(q, qd - e_i + e_j)
                    tmm = MODEL.kinetic_energy(q, qd - e_i - e_j)
                    oracle = (tpp - tpm - tmp + tmm) / (4 * h * h)
                    assert d[i, j] == pytest.approx(oracle, rel=1e-5, abs=1e-7)


class TestBiasForces:
    def test_matches_lagrangian_identity(self, rng):
        # H = Ddot qd - dT/dq + dV/dq, all from finite differences
        h = 1e-6
        g = MODEL.gravity

        def potential(q):
            z1 = MODEL.lc1 * np.sin(q[0])
            z2 = MODEL.l1 * np.sin(q[0]) + MODEL.lc2 * np.sin(q[0] + q[1])
            return MODEL.m1 * g * z1 + MODEL.m2 * g * z2

        for _ in range(20):
            q, qd = random_state(rng)
            ddot = (MODEL.mass_matrix(q + h * qd) - MODEL.mass_matrix(q - h * qd)) / (2 * h)
            dt_dq = finite_difference_gradient(lambda x: MODEL.kinetic_energy(x, qd), q)
            dv_dq = finite_difference_gradient(potential, q)
            oracle = ddot @ qd - dt_dq + dv_dq
            ours = MODEL.bias_forces(q, qd)
            assert np.linalg.norm(ours - oracle) <= 1e-4 * max(1.0, np.linalg.norm(oracle))

    def test_gravity_horizontal_pose(self):
        tau = MODEL.gravity_torque(np.zeros(2))
        g = MODEL.gravity
        expected_1 = (MODEL.m1 * MODEL.lc1 + MODEL.m2 * MODEL.l1 + MODEL.m2 * MODEL.lc2) * g
        expected_2 = MODEL.m2 * MODEL.lc2 * g
        assert tau[0] == pytest.approx(expected_1, abs=1e-12)
        assert tau[1] == pytest.approx(expected_2, abs=1e-12)

    def test_no_velocity_terms_at_rest(self, rng):
        q, _ = random_state(rng)
        assert np.allclose(MODEL.bias_forces(q, np.zeros(2)), MODEL.gravity_torque(q))


class TestContactJacobian:
    def test_matches_tip_finite_differences(self, rng):
        h = 1e-7
        for _ in range(30):
            q, _ = random_state(rng)
            j = MODEL.contact_jacobian(q)
            for k in range(2):
                e = np.zeros(2); e[k] = h
                col = (MODEL.tip_position(q + e) - MODEL.tip_position(q - e)) / (2 * h)
                assert np.allclose(j[:, k], col, atol=1e-6)

    def test_jdot_qd_matches_finite_differences(self, rng):
        h = 1e-6
        for _ in range(30):
            q, qd = random_state(rng)
            jdot = (MODEL.contact_jacobian(q + h * qd) - MODEL.contact_jacobian(q - h * qd)) / (2 * h)
            assert np.allclose(MODEL.contact_jacobian_dot_qd(q, qd), jdot @ qd, atol=1e-5)


class TestPlanarQuadruped:
    def test_selection_matrices_disjoint_and_covering(self):
        m = PlanarQuadruped()
        stacked = np.vstack([m.selection_matrix(i) for i in range(5)])
        assert stacked.shape == (10, 10)
        assert np.allclose(stacked @ stacked.T, np.eye(10))
        assert np.allclose(stacked.sum(axis=0), np.ones(10))

    def test_limb_names_order(self):
        assert LIMB_NAMES == ("wheel", "FL", "FR", "BL", "BR")

    def test_com_of_symmetric_configuration(self):
        m = PlanarQuadruped()
        # mirror-symmetric legs about the x axis, arm straight along +x
        q = np.array([0.0, 0.0, 1.0, -0.5, -1.0, 0.5, 2.0, -0.5, -2.0, 0.5])
        com = m.com(q, (0.0, 0.0), 0.0)
        assert com[1] == pytest.approx(0.0, abs=1e-12)

    def test_com_transforms_rigidly(self, rng):
        m = PlanarQuadruped()
        q = rng.uniform(-1.5, 1.5, 10)
        base = rng.uniform(-1, 1, 2)
        yaw = rng.uniform(-np.pi, np.pi)
        from traybot.geometry import rot2

        com_local = m.com(q, (0, 0), 0.0)
        com_world = m.com(q, base, yaw)
        assert np.allclose(com_world, base + rot2(yaw) @ com_local, atol=1e-12)

    def test_foot_positions_move_with_joints(self):
        m = PlanarQuadruped()
        q = np.zeros(10)
        q2 = q.copy()
        q2[2] = 0.5  # FL shoulder
        f_before = m.foot_position(q, 1, (0, 0), 0.0)
        f_after = m.foot_position(q2, 1, (0, 0), 0.0)
        assert np.linalg.norm(f_after - f_before) > 0.01
        # other limbs unaffected
        for limb in (0, 2, 3, 4):
            assert np.allclose(
                m.foot_position(q, limb, (0, 0), 0.0),
                m.foot_position(q2, limb, (0, 0), 0.0),
            )

    def test_total_mass(self):
        m = PlanarQuadruped()
        assert m.total_mass() == pytest.approx(9.0 + 0.6 + 0.4 + 4 * 0.5)
