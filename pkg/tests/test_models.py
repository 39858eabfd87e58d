import math

import mpmath
import numpy as np
import pytest
from conftest import central_gradient, liouville

from mjspectra.errors import ChartViolation, EnergyTooLow, OutOfRange
from mjspectra.flow import integrate
from mjspectra.models import (KatokRanders, Liouville, Mechanical, MetricDepth, PhasePoint, WaterWave,
                              depth_to_metric, eval, grad, liouville_integral, liouville_integral_array,
                              metric_to_depth, model_from_config, waterwave_radius)
from mjspectra.trig import Field2D, TrigSeries


def _random_states(rng, n, chart="torus"):
    x = rng.uniform(0, 2 * np.pi, (n, 2))
    if chart == "sphere":
        x[:, 1] = rng.uniform(-1.2, 1.2, n)
    p = rng.normal(size=(n, 2))
    return np.column_stack([x, p])


class TestEval:
    def test_flat(self, flat):
        assert eval(flat, PhasePoint((0.0, 0.0), (0.6, 0.8))) == pytest.approx(1.0, abs=1e-15)

    def test_katok_equator(self):
        assert eval(KatokRanders(0.5), np.array([0.0, 0.0, 1 / 1.5, 0.0])) == pytest.approx(1.0, abs=1e-15)

    def test_waterwave_constant_depth(self):
        ww = WaterWave(Field2D.constant(0.7))
        exact = float(mpmath.mpf("1.2") * mpmath.tanh(mpmath.mpf("0.84")))
        assert eval(ww, np.array([0.3, 1.1, 1.2, 0.0])) == pytest.approx(exact, rel=1e-14)

    def test_katok_equator_section_exact(self, rng):
        for a in (0.5, -0.3, 0.0):
            m = KatokRanders(a)
            for p1 in rng.normal(size=20):
                assert eval(m, np.array([rng.uniform(0, 6), 0.0, p1, 0.0])) == abs(p1) + a * p1

    def test_katok_chart_guard(self):
        with pytest.raises(ChartViolation):
            eval(KatokRanders(0.5), np.array([0.0, 1.6, 1.0, 0.0]))

    def test_katok_not_reversible(self, rng):
        m = KatokRanders(0.5)
        for y in _random_states(rng, 10, "sphere"):
            if abs(y[2]) < 1e-3:
                continue
            yr = y.copy()
            yr[2:] *= -1
            assert abs(m.energy(y) - m.energy(yr)) > 1e-6

    def test_vectorised_matches_scalar(self, perturbed, rng):
        ys = _random_states(rng, 50)
        assert np.allclose(perturbed.energies(ys), [perturbed.energy(y) for y in ys], rtol=1e-14)


class TestGradient:
    def test_flat(self, flat):
        dx, dp = grad(flat, np.array([0.0, 0.0, 0.6, 0.8]))
        assert np.allclose(dx, 0.0) and np.allclose(dp, [1.2, 1.6])

    def test_mechanical_potential(self):
        m = Mechanical(V=Field2D(TrigSeries((0.0, 0.3)), TrigSeries((0.0,))))
        dx, _ = grad(m, np.array([np.pi / 2, 0.0, 0.1, 0.2]))
        assert np.allclose(dx, [-0.3, 0.0], atol=1e-15)

    @pytest.mark.parametrize("name", ["perturbed", "mechanical", "jacobi", "waterwave", "katok"])
    def test_finite_differences(self, name, request, rng):
        model = request.getfixturevalue(name)
        chart = "sphere" if name == "katok" else "torus"
        worst = 0.0
        for y in _random_states(rng, 100, chart):
            gx, gp = grad(model, y)
            fx, fp = central_gradient(model, y)
            scale = max(1.0, np.max(np.abs(np.concatenate([gx, gp]))))
            worst = max(worst, np.max(np.abs(np.concatenate([gx - fx, gp - fp]))) / scale)
        assert worst <= 1e-6


class TestLiouvilleIntegral:
    def test_flat(self, flat):
        assert liouville_integral(flat, np.array([0.0, 0.0, 0.6, 0.8])) == pytest.approx(-0.64)

    def test_equal_weights(self):
        assert liouville_integral(liouville((1.0,), (1.0,)), np.array([0.0, 0.0, 1.0, 0.0])) == pytest.approx(0.5)

    def test_conserved(self, perturbed):
        y0 = np.array([0.4, 1.3, 0.7, -0.5])
        traj = integrate(perturbed, y0, 100.0, tol=1e-10)
        F = liouville_integral_array(perturbed, traj.y)
        assert np.max(np.abs(F - F[0])) <= 1e-8


class TestWaterWave:
    def test_deep_water(self):
        ww = WaterWave(Field2D.constant(1e3))
        assert waterwave_radius(ww, (0.0, 0.0), 0.75) == pytest.approx(0.75, abs=1e-12)

    def test_inverse_of_eval(self):
        ww = WaterWave(Field2D.constant(0.7))
        assert waterwave_radius(ww, (0.0, 0.0), 1.2 * math.tanh(0.84)) == pytest.approx(1.2, abs=1e-12)

    def test_dispersive_bisection(self):
        ww = WaterWave(Field2D.constant(1.0), Field2D.constant(0.1))
        f = lambda r: r * (1 + 0.1 * r * r) * mpmath.tanh(r) - 1  # noqa: E731
        exact = float(mpmath.findroot(f, 0.9))
        assert waterwave_radius(ww, (0.0, 0.0), 1.0) == pytest.approx(exact, abs=1e-12)

    def test_radius_monotone_in_energy(self, waterwave):
        r = [waterwave_radius(waterwave, (0.5, 2.0), E) for E in np.linspace(0.1, 3.0, 40)]
        assert np.all(np.diff(r) > 0)

    def test_deep_water_metric(self):
        g = depth_to_metric(WaterWave(Field2D.constant(1e3)), 2.0, 8)
        assert np.allclose(g, 0.25, atol=1e-14)

    def test_metric_from_eval_example(self):
        g = depth_to_metric(WaterWave(Field2D.constant(0.7)), 1.2 * math.tanh(0.84), 8)
        assert np.allclose(g, 1 / 1.44, atol=1e-12)

    def test_metric_to_depth_closed_form(self):
        assert metric_to_depth(np.array([1.0]), 0.0, 0.5)[0] == pytest.approx(math.atanh(0.5), abs=1e-15)

    def test_metric_to_depth_out_of_range(self):
        with pytest.raises(OutOfRange):
            metric_to_depth(np.array([1.0]), 0.0, 1.0)

    def test_round_trip(self, waterwave):
        E, n = 0.8, 32
        g = depth_to_metric(waterwave, E, n)
        x = np.linspace(0, 2 * np.pi, n, endpoint=False)
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        D = metric_to_depth(g, waterwave.mu(X1, X2), E)
        assert np.max(np.abs(D - waterwave.depth_at(X1, X2))) <= 1e-10

    def test_metric_depth_model(self, perturbed):
        ww = WaterWave(MetricDepth(liouville((2.0, 0.3), (0.0, 0.2)), 0.5))
        x = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        g = depth_to_metric(ww, 0.5, 16)
        u_plus_v = 2.0 + 0.3 * np.cos(x)[:, None] + 0.2 * np.cos(x)[None, :]
        assert np.allclose(g, 1.0 / u_plus_v, rtol=1e-10)


class TestMechanical:
    def test_jacobi_of_free_particle(self):
        from mjspectra.models import JacobiMetric
        j = JacobiMetric(Mechanical(), 1.0)
        y = np.array([0.2, 0.3, 0.6, 0.8])
        assert j.energy(y) == pytest.approx(0.5 * 1.0)

    def test_jacobi_accepted(self, jacobi):
        assert jacobi.E == 1.0

    def test_energy_too_low(self, mechanical):
        from mjspectra.models import JacobiMetric
        with pytest.raises(EnergyTooLow):
            JacobiMetric(mechanical, 0.4)

    def test_liouville_form(self, jacobi, rng):
        L = jacobi.as_liouville()
        ys = _random_states(rng, 20)
        assert np.allclose(L.energies(ys), jacobi.energies(ys), rtol=1e-13)


class TestConfig:
    def test_round_trip(self, perturbed, mechanical, waterwave, katok):
        for m in (perturbed, mechanical, waterwave, katok):
            assert model_from_config(m.to_config()) == m

    def test_liouville_positivity(self):
        with pytest.raises(Exception):
            Liouville(TrigSeries((0.1, 0.3)), TrigSeries((0.0,)))
