"""Acceptance suite A1-A8.

Each test prints one ``PASS A#`` or ``FAIL A#`` line (visible under
``pytest -v``) before asserting, so the console log doubles as a summary.
"""
import math
import time

import numpy as np
import pytest
from conftest import central_gradient, liouville

from mjspectra.action_angle import DiophantineParams, ikam_det, kam_membership, torus_chart
from mjspectra.cli import _compare_one, slope_fit
from mjspectra.flow import integrate
from mjspectra.katok import energy_drift, equator_orbits, poincare_angles
from mjspectra.larmor import harmonic_spacing
from mjspectra.mj import (conjugacy_on_chart, orbit_coincidence, random_points_on_level, verify_det_identity,
                          verify_frequency_rescale)
from mjspectra.models import depth_to_metric, grad, liouville_integral_array, metric_to_depth
from mjspectra.oracle import assemble, gap_statistics, larmor_spectrum
from mjspectra.trig import TrigSeries

H_LIST = (0.05, 0.025, 0.0125)


@pytest.fixture
def report(capsys):
    def emit(tag, ok, detail=""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {tag} {detail}".rstrip())
        assert ok, f"{tag}: {detail}"
    return emit


def test_A1_orbit_coincidence(mechanical, jacobi, report):
    t0 = time.perf_counter()
    pts = random_points_on_level(mechanical, 1.0, 20, np.random.default_rng(7))
    dist = max(orbit_coincidence(mechanical, jacobi, y, 20.0, tol=1e-11).distance for y in pts)
    dt = time.perf_counter() - t0
    report("A1", dist <= 1e-5 and dt <= 60, f"max distance {dist:.2e}, {dt:.1f} s")


def test_A2_frequency_rescale(mechanical, jacobi, report):
    t0 = time.perf_counter()
    chart = torus_chart(jacobi.as_liouville(), 1.0, 0.1)
    rel = verify_frequency_rescale(mechanical, jacobi, chart, T=1000.0)[2]
    conj = conjugacy_on_chart(mechanical, jacobi, chart, grid=128, K_max=64)
    det = verify_det_identity(conj.data)
    dt = time.perf_counter() - t0
    report("A2", rel <= 1e-4 and det <= 1e-8 and dt <= 60,
           f"rescale {rel:.2e}, det defect {det:.2e}, {dt:.1f} s")


@pytest.fixture(scope="module")
def compare_runs():
    L = liouville((1.0, 0.3), (0.0, 0.2))
    q = {"delta": 0.5, "C0": 0.35, "maslov_index": [0, 0], "E": 1.0, "c": -0.45}
    o = {"E": 1.0, "delta": 0.5, "C1": 0.2, "M": None, "pad": 24, "method": "auto"}
    t0 = time.perf_counter()
    runs = {h: _compare_one(L, h, q, o, 0.05) for h in H_LIST}
    return runs, time.perf_counter() - t0


def test_A3_eigenvalue_accuracy(compare_runs, report):
    runs, dt = compare_runs
    errs, all_matched = [], True
    for pred, _, _, rep in runs.values():
        all_matched &= len(pred.energies) > 0 and rep.unmatched_predicted == 0
        errs.append(rep.max_error)
    slope = slope_fit(H_LIST, errs)
    report("A3", all_matched and slope >= 1.8 and dt <= 900,
           f"errors {[f'{e:.2e}' for e in errs]}, slope {slope:.3f}, {dt:.0f} s")


def test_A4_degeneracy_trend(compare_runs, report):
    runs, _ = compare_runs
    frac = [gap_statistics(runs[h][1], h ** 3).fraction for h in H_LIST]
    ok = all(b >= a for a, b in zip(frac, frac[1:])) and frac[-1] > 0.5
    report("A4", ok, f"fractions {frac}")


def test_A5_katok(report):
    t0 = time.perf_counter()
    alpha = 0.5
    Tp, Tm = equator_orbits(alpha)
    per = max(abs(Tp / (2 * math.pi / 1.5) - 1), abs(Tm / (2 * math.pi / 0.5) - 1))
    angles = poincare_angles(alpha)
    phase = max(a.defect for a in angles)
    det = max(abs(a.det - 1) for a in angles)
    dt = time.perf_counter() - t0
    report("A5", per <= 1e-6 and phase <= 1e-4 and det <= 1e-6 and dt <= 30,
           f"period {per:.1e}, phase {phase:.1e}, det {det:.1e}, {dt:.1f} s")


def _brute_force_kam(omega, c, sigma, K):
    k1, k2 = np.meshgrid(np.arange(-K, K + 1), np.arange(-K, K + 1), indexing="ij")
    keep = (k1 != 0) | (k2 != 0)
    k1, k2 = k1[keep], k2[keep]
    score = np.abs(k1 * omega[0] + k2 * omega[1]) * (np.abs(k1) + np.abs(k2)) ** sigma
    return bool(score.min() >= c)


def test_A6_ikam_kam(flat, report):
    t0 = time.perf_counter()
    ikam = 0.0
    for E, c in [(1.0, -0.64), (1.0, -0.2), (2.0, -1.5), (0.5, -0.1)]:
        J1, J2 = math.sqrt(E + c), math.sqrt(-c)
        ikam = max(ikam, abs(ikam_det(flat, E, c) + 8 * (J1 ** 2 + J2 ** 2)))
    rng = np.random.default_rng(2024)
    params = DiophantineParams(0.05, 1.5, 50)
    agree, outcomes = 0, set()
    for w in rng.uniform(0.2, 2.0, (1000, 2)):
        got = kam_membership(tuple(w), params).passed
        agree += got == _brute_force_kam(w, params.dioph_c, params.sigma, params.K_max)
        outcomes.add(got)
    dt = time.perf_counter() - t0
    report("A6", ikam <= 1e-6 and agree == 1000 and outcomes == {True, False} and dt <= 30,
           f"ikam defect {ikam:.1e}, kam agreement {agree}/1000, {dt:.1f} s")


def test_A7_larmor(report):
    t0 = time.perf_counter()
    w, k1, h, M = 1.3, 0.7, 0.05, 80
    lam = larmor_spectrum(TrigSeries((w,)), k1, h, M=M)
    ref = np.sort(0.5 * (h * np.arange(-M, M + 1)) ** 2 + w * k1)[:M]
    const = float(np.max(np.abs(lam - ref)))
    well = TrigSeries((1.0, 1.0))
    lad = larmor_spectrum(well, 1.0, 0.01, M=256, count=6)
    spacing = abs(np.diff(lad[:4]).mean() / harmonic_spacing(well, 1.0, 0.01) - 1)
    dt = time.perf_counter() - t0
    report("A7", const <= 1e-12 and spacing <= 0.05 and dt <= 30,
           f"constant case {const:.1e}, ladder spacing off by {spacing:.2%}, {dt:.1f} s")


def test_A8_invariants(perturbed, mechanical, jacobi, waterwave, katok, rng, report):
    t0 = time.perf_counter()
    checks = {}
    y0 = np.array([0.4, 1.3, 0.7, -0.5])
    tr = integrate(perturbed, y0, 100.0, tol=1e-10)
    checks["energy"] = np.max(np.abs(perturbed.energies(tr.y) - perturbed.energy(y0))) <= 1e-8
    F = liouville_integral_array(perturbed, tr.y)
    checks["F"] = np.max(np.abs(F - F[0])) <= 1e-8
    checks["katok energy"] = energy_drift(0.5) <= 1e-9
    worst = 0.0
    for model in (perturbed, mechanical, jacobi, waterwave, katok):
        for _ in range(50):
            x = rng.uniform(0, 2 * np.pi, 2)
            if model is katok:
                x[1] = rng.uniform(-1.2, 1.2)
            y = np.concatenate([x, rng.normal(size=2) * 0.5])
            g = np.concatenate(grad(model, y))
            fd = np.concatenate(central_gradient(model, y))
            worst = max(worst, np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(g))))
    checks["gradient"] = worst <= 1e-6
    _, B = assemble(perturbed, 0.2, 10).full_matrices()
    checks["B positive"] = np.linalg.eigvalsh(B)[0] > 0
    n, E = 32, 0.8
    x = np.linspace(0, 2 * np.pi, n, endpoint=False)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    D = metric_to_depth(depth_to_metric(waterwave, E, n), waterwave.mu(X1, X2), E)
    checks["depth round trip"] = np.max(np.abs(D - waterwave.depth_at(X1, X2))) <= 1e-10
    conj = conjugacy_on_chart(mechanical, jacobi, torus_chart(jacobi.as_liouville(), 1.0, 0.1), grid=64, K_max=64)
    checks["det = residual"] = abs(verify_det_identity(conj.data) - conj.data.residual) <= 1e-12
    dt = time.perf_counter() - t0
    failed = [k for k, v in checks.items() if not v]
    report("A8", not failed and dt <= 300, f"{len(checks)} invariants, failed {failed}, {dt:.1f} s")
