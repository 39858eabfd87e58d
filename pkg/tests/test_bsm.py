import numpy as np
import pytest

from mjspectra.action_angle import actions, frequencies
from mjspectra.bsm import QuantizeParams, center_params, enumerate_lattice, invert_actions, predict_spectrum
from mjspectra.errors import ConfigError, NoConvergence, WindowEmpty


class TestLattice:
    def test_exact_hit(self):
        pts = enumerate_lattice(QuantizeParams(0.1, 0.5, 0.1, (0, 0), (0.6, 0.8)))
        assert (6, 8) in pts

    def test_enumeration(self):
        pts = enumerate_lattice(QuantizeParams(0.1, 1.0, 2.0, (0, 0), (0.6, 0.8)))
        assert len(pts) == 25
        assert {k[0] for k in pts} == set(range(4, 9)) and {k[1] for k in pts} == set(range(6, 11))

    def test_empty(self):
        with pytest.raises(WindowEmpty):
            enumerate_lattice(QuantizeParams(0.5, 0.5, 0.1, (0, 0), (0.6, 0.8)))

    def test_refinement_ratio(self):
        # nearly fixed window: the count grows like h^(2 delta - 2)
        n = [len(enumerate_lattice(QuantizeParams(h, 0.1, 0.2, (0, 0), (0.63, 0.71)))) for h in (0.02, 0.01, 0.005)]
        assert all(3 <= b / a <= 5 for a, b in zip(n, n[1:]))

    def test_delta_one_count_bounded(self):
        # delta = 1 keeps the window a fixed number of lattice spacings wide
        n = [len(enumerate_lattice(QuantizeParams(h, 1.0, 1.0, (0, 0), (0.63, 0.71)))) for h in (0.04, 0.02, 0.01)]
        assert all(1 <= k <= 9 for k in n)

    @pytest.mark.parametrize("bad", [dict(h=0.6), dict(h=0.1, delta=1.5), dict(h=0.1, C0=0.0)])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            QuantizeParams(**bad)


class TestInvert:
    def test_flat(self, flat):
        E, c = invert_actions(flat, (0.6, 0.8), (0.9, -0.6))
        assert E == pytest.approx(1.0, abs=1e-12) and c == pytest.approx(-0.64, abs=1e-12)

    def test_round_trip(self, perturbed):
        J = actions(perturbed, 1.07, -0.41)
        E, c = invert_actions(perturbed, J, (1.0, -0.45))
        assert E == pytest.approx(1.07, abs=1e-10) and c == pytest.approx(-0.41, abs=1e-10)

    def test_outside_image(self, flat):
        with pytest.raises(NoConvergence):
            invert_actions(flat, (-0.1, 0.8), (1.0, -0.64))


class TestPredict:
    def test_flat_exact(self, flat):
        params = QuantizeParams(0.1, 0.5, 0.35, (0, 0), (0.6, 0.8))
        pred = predict_spectrum(flat, params, (1.0, -0.64))
        assert not pred.dropped
        for p in pred.points:
            assert p.E == pytest.approx(0.01 * (p.k[0] ** 2 + p.k[1] ** 2), abs=1e-14)
        assert any(p.k == (6, 8) and p.E == pytest.approx(1.0, abs=1e-14) for p in pred.points)

    def test_window_and_residual(self, perturbed):
        params = center_params(perturbed, 1.0, -0.45, 0.05, 0.5, 0.35, (0, 0))
        pred = predict_spectrum(perturbed, params, (1.0, -0.45))
        assert pred.points and pred.success_rate == 1.0
        for p in pred.points:
            J = params.h * np.asarray(p.k, float)
            assert np.max(np.abs(J - np.asarray(params.center))) <= params.width + 1e-12
            assert p.residual <= 1e-10
            assert np.allclose(actions(perturbed, p.E, p.sep_const), J, atol=1e-10)

    def test_monotone_along_frequency(self, perturbed):
        params = center_params(perturbed, 1.0, -0.45, 0.025, 0.5, 0.35, (0, 0))
        pred = predict_spectrum(perturbed, params, (1.0, -0.45))
        E = {p.k: p.E for p in pred.points}
        w = frequencies(perturbed, 1.0, -0.45)
        assert np.all(w > 0)
        for (k1, k2), e in E.items():
            for nb in ((k1 + 1, k2), (k1, k2 + 1)):
                if nb in E:
                    assert E[nb] > e

    def test_maslov_shift(self, perturbed):
        a = predict_spectrum(perturbed, QuantizeParams(0.05, 0.5, 0.1, (0, 0), (0.73, 0.66)), (1.0, -0.45))
        b = predict_spectrum(perturbed, QuantizeParams(0.05, 0.5, 0.1, (2, 0), (0.73, 0.66)), (1.0, -0.45))
        ka = {p.k: p for p in a.points}
        for p in b.points:
            assert p.J[0] == pytest.approx(0.05 * (p.k[0] + 0.5))
            if p.k in ka:
                assert p.E > ka[p.k].E
