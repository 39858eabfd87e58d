import numpy as np
import pytest
from conftest import liouville

from mjspectra.action_angle import golden_ratio, torus_chart
from mjspectra.errors import NotOnSurface, NotParallel, SmallDivisor
from mjspectra.katok import breaking_point
from mjspectra.mj import (angle_grid, average_G, conjugacy_on_chart, ergodic_average_G, orbit_coincidence,
                          random_points_on_level, solve_conjugacy, time_factor, time_factors, verify_det_identity,
                          verify_frequency_rescale)
from mjspectra.models import KatokRanders, MetricDepth, WaterWave


@pytest.fixture
def jacobi_chart(jacobi):
    return torus_chart(jacobi.as_liouville(), 1.0, 0.1)


def band_limited_G(rng, n=64, modes=4, amp=0.05):
    P1, P2 = angle_grid(n)
    G = np.ones_like(P1)
    for k1 in range(-modes, modes + 1):
        for k2 in range(-modes, modes + 1):
            if k1 or k2:
                G += amp * rng.normal() / (1 + k1 * k1 + k2 * k2) * np.cos(k1 * P1 + k2 * P2 + rng.uniform(0, 6))
    assert G.min() > 0
    return G


class TestTimeFactor:
    def test_mechanical_jacobi(self, mechanical, jacobi, rng):
        for y in random_points_on_level(mechanical, 1.0, 10, rng):
            G = time_factor(mechanical, jacobi, y, E=1.0, calE=1.0)
            assert G == pytest.approx(1.0 / (1.0 - mechanical.V(y[0], y[1])), rel=1e-12)

    def test_same_model(self, perturbed, rng):
        ys = np.column_stack([rng.uniform(0, 6, (20, 2)), rng.normal(size=(20, 2))])
        G, defect = time_factors(perturbed, perturbed, ys)
        assert np.allclose(G, 1.0, atol=1e-14) and np.max(defect) <= 1e-14

    def test_off_surface(self, mechanical, jacobi):
        with pytest.raises(NotOnSurface):
            time_factor(mechanical, jacobi, np.array([0.0, 0.0, 0.1, 0.1]), E=1.0)

    def test_katok_off_equator(self):
        y = breaking_point(0.5, 0.5)
        with pytest.raises(NotParallel):
            time_factor(KatokRanders(0.5), KatokRanders(0.0), y)

    def test_katok_equator(self):
        y = breaking_point(0.5, 0.0)
        assert time_factor(KatokRanders(0.5), KatokRanders(0.0), y) > 0


class TestAverage:
    def test_trivial(self, perturbed):
        ch = torus_chart(perturbed, 1.0, -0.45)
        assert average_G(perturbed, perturbed, ch) == pytest.approx(1.0, abs=1e-14)

    def test_synthetic_cosine(self):
        P1, _ = angle_grid(64)
        assert np.mean(1 + 0.2 * np.cos(P1)) == pytest.approx(1.0, abs=1e-15)

    def test_positive_on_torus(self, mechanical, jacobi, jacobi_chart):
        from mjspectra.mj import G_on_chart
        assert G_on_chart(mechanical, jacobi, jacobi_chart, *angle_grid(32)).min() > 0

    def test_ergodic_average(self, mechanical, jacobi, jacobi_chart):
        grid = average_G(mechanical, jacobi, jacobi_chart)
        assert ergodic_average_G(mechanical, jacobi, jacobi_chart, T=1000.0) == pytest.approx(grid, abs=1e-5)


class TestConjugacy:
    def test_trivial(self):
        d = solve_conjugacy(np.ones((32, 32)), (1.0, golden_ratio()))
        assert np.max(np.abs(d.f)) == 0.0 and verify_det_identity(d) == 0.0

    def test_single_mode(self):
        eps, w = 0.1, np.array([1.3, 1.3 * golden_ratio()])
        P1, P2 = angle_grid(32)
        d = solve_conjugacy(1.0 / (1.0 + eps * np.cos(P1)), w)
        assert d.average == pytest.approx(1.0, abs=1e-15)
        assert np.max(np.abs(d.f - eps / w[0] * np.sin(P1))) <= 1e-14
        assert verify_det_identity(d) <= 1e-12

    def test_band_limited(self, rng):
        d = solve_conjugacy(band_limited_G(rng), (1.0, golden_ratio()), K_max=64)
        det = verify_det_identity(d)
        assert d.residual <= 1e-8 and det <= 1e-8
        assert abs(det - d.residual) <= 1e-12

    def test_coefficient_symmetry(self, rng):
        d = solve_conjugacy(band_limited_G(rng), (1.0, golden_ratio()))
        assert d.fhat[0, 0] == 0
        flipped = np.roll(np.flip(d.fhat, (0, 1)), 1, (0, 1))       # f̂_{-k}
        assert np.allclose(flipped, np.conj(d.fhat), atol=1e-15)
        assert abs(np.mean(d.f)) <= 1e-15

    def test_refinement_decreases_residual(self, rng):
        G = band_limited_G(rng, modes=12, amp=0.1)
        res = [solve_conjugacy(G, (1.0, golden_ratio()), K_max=k, max_residual=None).residual for k in (2, 4, 8, 16)]
        assert all(b < a for a, b in zip(res, res[1:]))

    def test_small_divisor(self):
        P1, P2 = angle_grid(16)
        with pytest.raises(SmallDivisor):
            solve_conjugacy(1.0 / (1.0 + 0.1 * np.cos(P1 - P2)), (1.0, 1.0))

    def test_on_chart(self, mechanical, jacobi, jacobi_chart):
        conj = conjugacy_on_chart(mechanical, jacobi, jacobi_chart, grid=64, K_max=64)
        assert verify_det_identity(conj.data) <= 1e-8
        assert conj.inversion_residual <= 1e-12


class TestRescale:
    def test_identity(self):
        L = liouville((2.0, 0.3), (0.0, 0.2))
        ch = torus_chart(L, 1.0, -0.8, method="quadrature")
        assert verify_frequency_rescale(L, L, ch, T=1000.0, tol=1e-13)[2] <= 1e-10

    def test_mechanical_pair(self, mechanical, jacobi, jacobi_chart):
        assert verify_frequency_rescale(mechanical, jacobi, jacobi_chart, T=1000.0)[2] <= 1e-4

    def test_waterwave_pair(self):
        L = liouville((2.0, 0.3), (0.0, 0.2))
        ww = WaterWave(MetricDepth(L, 0.5))
        ch = torus_chart(L, 1.0, -0.8)
        assert verify_frequency_rescale(ww, L, ch, T=1000.0)[2] <= 1e-4


def test_orbit_coincidence_single(mechanical, jacobi, rng):
    y = random_points_on_level(mechanical, 1.0, 1, rng)[0]
    r = orbit_coincidence(mechanical, jacobi, y, 10.0)
    assert r.distance <= 1e-5 and r.tau_span > 0
