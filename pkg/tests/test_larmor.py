from fractions import Fraction

import numpy as np
import pytest

from mjspectra.action_angle import golden_ratio, torus_chart
from mjspectra.cli import _resonant_c
from mjspectra.errors import DegenerateCritical, NotRational
from mjspectra.flow import Section, poincare
from mjspectra.larmor import (ReducedModel, default_k1, fiber_frequency, fiber_profile, fiber_start,
                              harmonic_spacing, level_components, rational_ratio, reduced_spectrum,
                              reduction_matrix, reeb_components)
from mjspectra.oracle import larmor_spectrum
from mjspectra.trig import TrigSeries

SINGLE = TrigSeries((1.0, 1.0))
DOUBLE = TrigSeries((1.0, 1.0, 0.3))


@pytest.fixture(scope="module")
def resonant():
    from mjspectra.models import JacobiMetric, Mechanical
    from mjspectra.trig import Field2D
    mech = Mechanical(V=Field2D(TrigSeries((0.0, 0.3)), TrigSeries((0.0, 0.2))))
    jac = JacobiMetric(mech, 1.0)
    L = jac.as_liouville()
    c = _resonant_c(L, 1.0, 0.04, Fraction(1, 1))
    chart = torus_chart(L, 1.0, c, method="quadrature")
    return mech, jac, chart


class TestReduction:
    @pytest.mark.parametrize("ratio", [Fraction(1), Fraction(0), Fraction(2, 3), Fraction(-1, 2), Fraction(5, 8)])
    def test_matrix(self, ratio):
        T = reduction_matrix(ratio)
        assert round(np.linalg.det(T)) == 1
        omega = np.array([1.0, float(ratio)])
        assert abs(T[1] @ omega) <= 1e-15

    def test_rational_ratio(self):
        assert rational_ratio((1.5, 1.0)) == Fraction(2, 3)

    def test_irrational(self):
        with pytest.raises(NotRational):
            rational_ratio((1.0, golden_ratio()))


class TestFiberProfile:
    def test_trivial(self):
        red = fiber_profile(lambda a, b: np.ones_like(a), (1.3, 0.0))
        assert np.allclose(red.omega1(np.linspace(0, 6, 50)), 1.3, atol=1e-14)

    def test_psi1_independent(self):
        red = fiber_profile(lambda a, b: 1 + 0.2 * np.cos(b), (1.3, 0.0))
        x = np.linspace(0, 6, 50)
        assert np.allclose(red.omega1(x), 1.3 / (1 + 0.2 * np.cos(x)), atol=1e-12)

    def test_positivity(self):
        red = fiber_profile(lambda a, b: 1 + 0.3 * np.cos(a - b) + 0.2 * np.sin(b), (1.0, 1.0))
        assert red.omega1.grid_min() > 0

    def test_declared_ratio_mismatch(self):
        with pytest.raises(NotRational):
            fiber_profile(lambda a, b: np.ones_like(a), (1.0, 1.001), Fraction(1))

    def test_refinement(self, resonant):
        mech, jac, chart = resonant
        a = fiber_frequency(mech, jac, chart, Fraction(1), grid=32, n_psi1=64)
        b = fiber_frequency(mech, jac, chart, Fraction(1), grid=64, n_psi1=128)
        x = np.linspace(0, 2 * np.pi, 97)
        assert np.max(np.abs(a.omega1(x) - b.omega1(x))) <= 1e-8

    def test_closed_orbit_periods(self, resonant):
        mech, jac, chart = resonant
        red = fiber_frequency(mech, jac, chart, Fraction(1))
        for psi2 in (0.0, 1.1, 2.5, 4.0):
            y0 = fiber_start(chart, red.transform, psi2)
            direction = 1 if mech.vector_field(y0)[0] > 0 else -1
            sm = poincare(mech, Section(0, y0[0], direction), y0, 1, tol=1e-12)
            assert np.max(np.abs(np.mod(sm.states[-1, :2] - y0[:2] + np.pi, 2 * np.pi) - np.pi)) <= 1e-6
            assert 2 * np.pi / sm.times[-1] == pytest.approx(float(red.omega1(psi2)), abs=1e-6)


class TestReeb:
    def test_constant(self):
        g = reeb_components(TrigSeries((1.0,)))
        assert g.trivial and g.components(2.0) == 2 and g.components(0.5) == 0

    def test_single_well(self):
        g = reeb_components(SINGLE)
        kinds = sorted((k, round(p, 10), round(v, 10)) for p, v, k in g.critical_points)
        assert kinds == [("max", 0.0, 2.0), ("min", round(np.pi, 10), 0.0)]
        assert [g.components(c) for c in (-1.0, 1.0, 3.0)] == [0, 1, 2]

    def test_double_well_dense_scan(self):
        g = reeb_components(DOUBLE)
        samples = DOUBLE(2 * np.pi * np.arange(20000) / 20000)
        for lo, hi, n in g.intervals:
            lo = max(lo, samples.min() - 1.0)
            hi = min(hi, samples.max() + 1.0)
            for c in np.linspace(lo, hi, 9)[1:-1]:
                assert level_components(samples, c) == n
        assert len(g.critical_values) >= 3

    def test_degenerate(self):
        with pytest.raises(DegenerateCritical):
            reeb_components(TrigSeries((0.0, 1.0, -0.25)))


class TestSpectrum:
    def test_default_k1(self):
        ks = default_k1(0.01, 0.5)
        assert all(abs(k) <= 0.1 + 1e-12 for k in ks) and len(ks) == 3
        assert np.allclose(np.diff(ks), 2 * np.pi * 0.01)

    def test_constant_profile(self):
        red = ReducedModel(0.25, TrigSeries((1.2,)))
        lad = reduced_spectrum(red, 0.1, k1_list=[0.5], M=64, count=5)[0.5]
        assert np.allclose(lad, 0.25 + 0.6 + np.array([0, 0.005, 0.005, 0.02, 0.02]), atol=1e-13)

    def test_monotone_in_k1(self):
        lad = reduced_spectrum(ReducedModel(0.0, TrigSeries((1.5, 1.0))), 0.02,
                               k1_list=[0.1, 0.3, 0.9], M=128, count=10)
        ks = sorted(lad)
        for a, b in zip(ks, ks[1:]):
            assert np.all(lad[b] >= lad[a] - 1e-12)

    def test_harmonic_ladder(self):
        h, k1 = 0.01, 1.0
        lam = larmor_spectrum(SINGLE, k1, h, M=256, count=6)
        spacing = np.diff(lam[:4]).mean()
        assert spacing == pytest.approx(harmonic_spacing(SINGLE, k1, h), rel=0.05)
