import numpy as np
import pytest
from conftest import liouville

from mjspectra.errors import TooFewSamples
from mjspectra.flow import (Section, integrate, linearized_return_map, orbit_distance, poincare,
                            rotation_number, time_reversed)
from mjspectra.katok import predicted_period
from mjspectra.models import KatokRanders, liouville_integral_array

GOLDEN = (np.sqrt(5) - 1) / 2


class TestIntegrate:
    def test_flat_straight_line(self, flat):
        y0 = np.array([0.0, 0.0, 0.6, 0.8])
        traj = integrate(flat, y0, 10.0, tol=1e-10)
        assert np.allclose(traj.y[:, 0], 1.2 * traj.t, atol=1e-9)
        assert np.allclose(traj.y[:, 1], 1.6 * traj.t, atol=1e-9)
        assert traj.stats["energy_drift"] <= 1e-10

    def test_times_increase_and_budget(self, perturbed, mechanical, katok):
        for model, y0 in ((perturbed, [0.1, 0.2, 0.9, 0.3]), (mechanical, [0.1, 0.2, 0.9, 0.3]),
                          (katok, [0.0, 0.1, 0.6, 0.05])):
            traj = integrate(model, np.array(y0), 50.0, tol=1e-10)
            assert np.all(np.diff(traj.t) > 0)
            assert traj.within_budget

    def test_dense_output(self, perturbed):
        traj = integrate(perturbed, np.array([0.1, 0.2, 0.9, 0.3]), 5.0, tol=1e-12)
        fine = integrate(perturbed, np.array([0.1, 0.2, 0.9, 0.3]), 3.3, tol=1e-12)
        assert np.allclose(traj.sample(3.3)[0], fine.y[-1], atol=1e-9)

    def test_katok_equator_speed(self):
        m = KatokRanders(0.5)
        traj = integrate(m, np.array([0.0, 0.0, 1 / 1.5, 0.0]), 2 * np.pi / 1.5, tol=1e-12)
        assert np.allclose(traj.y[:, 0], 1.5 * traj.t, atol=1e-10)
        assert traj.y[-1, 0] == pytest.approx(2 * np.pi, abs=1e-10)

    def test_liouville_integral_conserved(self, perturbed):
        traj = integrate(perturbed, np.array([2.0, 0.5, 0.5, 0.8]), 100.0, tol=1e-10)
        F = liouville_integral_array(perturbed, traj.y)
        assert np.max(np.abs(F - F[0])) <= 1e-8

    @pytest.mark.parametrize("name", ["perturbed", "mechanical"])
    def test_time_reversal(self, name, request):
        model = request.getfixturevalue(name)
        y0 = np.array([0.3, 1.0, 0.7, -0.4])
        T = 20.0
        fwd = integrate(model, y0, T, tol=1e-12)
        back = integrate(model, time_reversed(fwd.y[-1]), T, tol=1e-12)
        s = np.linspace(0, T, 200)
        assert np.max(np.abs(back.sample(s) - np.array([time_reversed(y) for y in fwd.sample(T - s)]))) <= 1e-8


class TestOrbitDistance:
    def test_identical(self, perturbed):
        A = integrate(perturbed, np.array([0.1, 0.2, 0.9, 0.3]), 10.0)
        assert orbit_distance(A, A) == 0.0

    def test_symmetric_and_triangle(self, perturbed):
        trajs = [integrate(perturbed, np.array([0.1, 0.2, 0.9 + d, 0.3]), 10.0) for d in (0.0, 0.01, 0.03)]
        A, B, C = trajs
        assert orbit_distance(A, B) == pytest.approx(orbit_distance(B, A), rel=1e-12)
        assert orbit_distance(A, C) <= orbit_distance(A, B) + orbit_distance(B, C) + 1e-12

    def test_distinct_tori_separated(self, flat):
        A = integrate(flat, np.array([0.0, 0.0, 0.6, 0.8]), 30.0)
        B = integrate(flat, np.array([0.0, 0.0, 0.8, 0.6]), 30.0)
        assert orbit_distance(A, B, projection="phase") >= 0.2 - 1e-9


class TestPoincare:
    def test_flat_rigid_rotation(self, flat):
        sm = poincare(flat, Section(1, 0.0, 1), np.array([0.1, 0.5, 0.6, 0.8]), 8)
        adv = np.diff(sm.states[:, 0])
        assert np.allclose(adv, 2 * np.pi * 0.6 / 0.8, atol=1e-9)
        assert sm.residual <= 1e-10

    def test_points_on_section(self, perturbed):
        sm = poincare(perturbed, Section(1, 0.0, 1), np.array([0.1, 0.5, 0.6, 0.8]), 30)
        assert np.max(np.abs(np.mod(sm.states[:, 1] + np.pi, 2 * np.pi) - np.pi)) <= 1e-10

    def test_returns_on_smooth_circle(self, perturbed):
        sm = poincare(perturbed, Section(1, 0.0, 1), np.array([0.1, 0.5, 0.6, 0.8]), 200)
        # separable torus: p1² is a smooth function of x1 alone (covers librating cycles too)
        x, p = np.mod(sm.points[:, 0], 2 * np.pi), sm.points[:, 1] ** 2
        n = np.arange(9)
        A = np.column_stack([np.cos(np.outer(x, n)), np.sin(np.outer(x, n[1:]))])
        coef, *_ = np.linalg.lstsq(A, p, rcond=None)
        assert np.max(np.abs(A @ coef - p)) <= 1e-4

    def test_katok_equator_fixed_point(self):
        m = KatokRanders(0.5)
        rm = linearized_return_map(m, np.array([0.0, 0.0, 1 / 1.5, 0.0]), Section(0, 0.0, 1), energy=1.0)
        assert np.allclose(rm.fixed_point[[1, 3]], 0.0, atol=1e-10)
        assert rm.period == pytest.approx(predicted_period(0.5, 1), rel=1e-9)
        assert rm.det == pytest.approx(1.0, abs=1e-6)

    def test_flat_closed_orbit_shear(self):
        m = liouville()
        rm = linearized_return_map(m, np.array([0.0, 0.0, 0.6, 0.8]), Section(1, 0.0, 1), n_returns=4)
        assert rm.det == pytest.approx(1.0, abs=1e-6)
        assert rm.matrix[0, 0] == pytest.approx(1.0, abs=1e-6) and rm.matrix[1, 0] == pytest.approx(0.0, abs=1e-6)
        assert rm.matrix[1, 1] == pytest.approx(1.0, abs=1e-6)


class TestRotationNumber:
    def test_rigid(self):
        rho, _ = rotation_number(2 * np.pi * 0.3 * np.arange(1000))
        assert rho == pytest.approx(0.3, abs=1e-12)

    def test_golden(self):
        for method in ("lsq", "weighted"):
            rho, _ = rotation_number(2 * np.pi * GOLDEN * np.arange(1000), method=method)
            assert rho == pytest.approx(GOLDEN, abs=1e-10)

    def test_unlifted(self):
        rho, _ = rotation_number(np.mod(2 * np.pi * GOLDEN * np.arange(1000), 2 * np.pi), lifted=False)
        assert rho == pytest.approx(GOLDEN, abs=1e-10)

    def test_too_few(self):
        with pytest.raises(TooFewSamples):
            rotation_number(np.arange(10.0))
