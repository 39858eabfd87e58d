"""Rational tori: fiberwise frequencies, Reeb structure and reduced ladders.

On a resonant torus the chart angles are rotated by an ``SL2(Z)`` matrix so
that the frequency becomes ``(ω̃1', 0)``. The time factor averaged over each
closed ``ψ1``-orbit gives the fiber frequency ``ω1(ψ2) = ω̃1'/<𝒢>_{ψ2}``,
and the reduced operator ``½(hD)² + k1 ω1(x2)`` describes the spectrum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateCritical, NotRational
from .oracle import larmor_spectrum
from .trig import TrigSeries

TWO_PI = 2.0 * math.pi
RATIONAL_TOL = 1e-10


@dataclass
class ReducedModel:
    """``H0 + ω1(x2) ξ1 (+ ½ ξ2²)`` with the profile on a recorded grid."""

    H0: float
    omega1: TrigSeries
    kinetic: bool = True
    grid: int = 0
    omega_reduced: float = float("nan")
    transform: tuple = ((1, 0), (0, 1))

    def profile_rows(self, n: int | None = None):
        n = n or max(self.grid, 64)
        psi = TWO_PI * np.arange(n) / n
        return [[p, w] for p, w in zip(psi, self.omega1(psi))]


# --- SL2(Z) reduction -----------------------------------------------------------

def rational_ratio(omega, max_den: int = 1000, tol: float = RATIONAL_TOL) -> Fraction:
    """``ω2/ω1`` as a fraction with denominator ``<= max_den``, within ``tol``.

    Raises
    ------
    NotRational
    """
    if omega[0] == 0.0:
        raise NotRational("ω1 = 0: rotate the chart so that the first frequency is nonzero")
    x = omega[1] / omega[0]
    fr = Fraction(x).limit_denominator(max_den)
    if abs(float(fr) - x) > tol:
        raise NotRational(f"ω2/ω1 = {x!r} is not within {tol:g} of a rational with denominator <= {max_den}")
    return fr


def reduction_matrix(ratio: Fraction) -> np.ndarray:
    """``T ∈ SL2(Z)`` with ``T (1, p/q) ∝ (1/q·…, 0)``: rows ``(a, b)`` and ``(-p, q)``.

    ``a q + b p = 1`` is solved by the continued-fraction (extended Euclid)
    recursion.
    """
    p, q = ratio.numerator, ratio.denominator

    def egcd(x, y):
        if y == 0:
            return x, 1, 0
        g, s, t = egcd(y, x % y)
        return g, t, s - (x // y) * t

    g, a, b = egcd(q, p)      # a q + b p = g
    if abs(g) != 1:
        raise NotRational(f"{ratio} is not in lowest terms")
    a, b = a * g, b * g
    T = np.array([[a, b], [-p, q]], dtype=np.int64)
    assert round(np.linalg.det(T)) == 1
    return T


def _inverse(T: np.ndarray) -> np.ndarray:
    (a, b), (c, d) = T
    return np.array([[d, -b], [-c, a]], dtype=np.int64)


# --- fiber frequencies --------------------------------------------------------------

def fiber_profile(G, omega, ratio: Fraction | None = None, grid: int = 64, n_psi1: int = 128,
                  degree: int | None = None) -> ReducedModel:
    """Fiber frequency from a time factor ``G(φ1, φ2)`` on the chart angles.

    ``G`` is averaged over each closed orbit ``ψ1 ∈ [0, 2π)`` at fixed
    ``ψ2`` (periodic trapezoid rule, spectrally accurate) and the profile
    ``ω̃1'/<𝒢>`` is fitted by a trig series on the ``ψ2`` grid.

    Raises
    ------
    NotRational
    """
    omega = np.asarray(omega, dtype=float)
    if ratio is None:
        ratio = rational_ratio(omega)
    elif abs(omega[1] / omega[0] - float(ratio)) > RATIONAL_TOL:
        raise NotRational(f"ω2/ω1 = {omega[1] / omega[0]!r} differs from the declared {ratio} "
                          f"by more than {RATIONAL_TOL:g}")
    T = reduction_matrix(Fraction(ratio))
    w1 = float(T[0] @ omega)
    Ti = _inverse(T)
    psi1 = TWO_PI * np.arange(n_psi1) / n_psi1
    psi2 = TWO_PI * np.arange(grid) / grid
    P1, P2 = np.meshgrid(psi1, psi2, indexing="ij")
    phi1 = Ti[0, 0] * P1 + Ti[0, 1] * P2
    phi2 = Ti[1, 0] * P1 + Ti[1, 1] * P2
    avg = np.asarray(G(phi1, phi2)).mean(axis=0)
    prof = w1 / avg
    series = TrigSeries.from_samples(prof, degree=degree, tol=1e-15)
    return ReducedModel(0.0, series, True, grid, w1, tuple(map(tuple, T.tolist())))


def fiber_frequency(modelH, modelG, chart, ratio: Fraction | None = None, grid: int = 64,
                    n_psi1: int = 128) -> ReducedModel:
    """Fiber frequency ``ω1(ψ2)`` of the ``H``-flow on a resonant torus of ``𝓗``.

    ``chart`` is a torus chart of ``modelG`` whose frequency ratio is
    rational; ``H0`` is set to the ``H`` energy of the torus.
    """
    from .mj import G_on_chart

    red = fiber_profile(lambda a, b: G_on_chart(modelH, modelG, chart, a, b), chart.omega, ratio, grid, n_psi1)
    y = chart.states(np.array(0.0), np.array(0.0)).reshape(4)
    red.H0 = float(modelH.energy(y))
    return red


def fiber_start(chart, transform, psi2: float) -> np.ndarray:
    """State at ``ψ = (0, ψ2)`` on the chart's torus."""
    Ti = _inverse(np.asarray(transform, dtype=np.int64))
    phi = Ti @ np.array([0.0, psi2])
    return chart.states(np.array(phi[0]), np.array(phi[1])).reshape(4)


# --- Reeb graph ---------------------------------------------------------------

@dataclass
class ReebGraph:
    """Level structure of ``½ξ² + ω1(x)`` on ``T*S¹``.

    For a regular value ``c`` the level set is a union of closed curves:
    one per arc of ``{ω1 < c}``, or two rotational curves when ``{ω1 < c}``
    is the whole circle.
    """

    critical_points: list[tuple[float, float, str]]
    critical_values: list[float]
    intervals: list[tuple[float, float, int]]
    wells: list[dict] = field(default_factory=list)
    trivial: bool = False

    def components(self, c: float) -> int:
        for lo, hi, n in self.intervals:
            if lo < c < hi:
                return n
        raise ValueError(f"{c} is a critical value")

    def to_dict(self) -> dict:
        return {"trivial": self.trivial, "critical_points": [list(p) for p in self.critical_points],
                "critical_values": self.critical_values,
                "intervals": [{"lo": lo, "hi": hi, "components": n} for lo, hi, n in self.intervals],
                "wells": self.wells}


def level_components(values: np.ndarray, c: float) -> int:
    """Components of ``½ξ² + w = c`` from periodic samples ``w`` (brute force)."""
    below = values < c
    if below.all():
        return 2
    if not below.any():
        return 0
    # arcs = number of rising edges of the indicator around the circle
    return int(np.sum(below & ~np.roll(below, 1)))


def reeb_components(profile: TrigSeries, n_scan: int = 4096, min_curvature: float = 1e-10) -> ReebGraph:
    """Critical points of ``ω1`` and component counts between critical values.

    Raises
    ------
    DegenerateCritical
        A critical point with ``|ω1''| < min_curvature``.
    """
    if profile.degree == 0 or max(abs(profile.fourier(m)) for m in range(1, profile.degree + 1)) < 1e-14:
        c = float(profile(0.0))
        return ReebGraph([], [c], [(-math.inf, c, 0), (c, math.inf, 2)], [], trivial=True)
    x = TWO_PI * np.arange(n_scan + 1) / n_scan
    d = profile.deriv(x)
    crit = []
    for i in range(n_scan):
        a, b = d[i], d[i + 1]
        if a == 0.0:
            r = x[i]
        elif a * b < 0.0:
            r = brentq(lambda t: float(profile.deriv(t)), x[i], x[i + 1], xtol=1e-14)
        else:
            continue
        curv = float(profile.deriv(r, 2))
        if abs(curv) < min_curvature:
            raise DegenerateCritical(f"critical point at ψ={r:.6g} has ω1''={curv:.3g}")
        crit.append((float(r % TWO_PI), float(profile(r)), "min" if curv > 0 else "max"))
    crit = sorted({round(p[0], 12): p for p in crit}.values())
    values = sorted({round(v, 14) for _, v, _ in crit})
    samples = profile(TWO_PI * np.arange(n_scan) / n_scan)
    edges = [-math.inf] + values + [math.inf]
    intervals = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if math.isinf(lo):
            mid = hi - 1.0
        elif math.isinf(hi):
            mid = lo + 1.0
        else:
            mid = 0.5 * (lo + hi)
        intervals.append((lo, hi, level_components(samples, mid)))
    wells = []
    maxima = [p for p in crit if p[2] == "max"]
    for pos, val, typ in crit:
        if typ != "min":
            continue
        if maxima:
            left = max((m for m in maxima if m[0] < pos), default=maxima[-1], key=lambda m: m[0])
            right = min((m for m in maxima if m[0] > pos), default=maxima[0], key=lambda m: m[0])
            basin = (left[0], right[0])
        else:
            basin = (0.0, TWO_PI)
        wells.append({"psi": pos, "value": val, "basin": list(basin)})
    return ReebGraph(crit, values, intervals, wells)


# --- reduced spectrum ------------------------------------------------------------

def default_k1(h: float, delta: float) -> list[float]:
    """``k1 ∈ 2πh Z`` with ``|k1| <= h^δ``."""
    n = int(math.floor(h ** delta / (TWO_PI * h) + 1e-12))
    return [TWO_PI * h * j for j in range(-n, n + 1)]


def reduced_spectrum(model: ReducedModel, h: float, delta: float = 0.5, k1_list=None, M: int = 128,
                     count: int | None = None) -> dict[float, np.ndarray]:
    """Eigenvalue ladders of ``½(hD)² + k1 ω1`` for each ``k1`` (shifted by ``H0``)."""
    ks = default_k1(h, delta) if k1_list is None else list(k1_list)
    return {float(k): model.H0 + larmor_spectrum(model.omega1, k, h, M, count=count) for k in ks}


def harmonic_spacing(profile: TrigSeries, k1: float, h: float) -> float:
    """Ladder spacing ``h sqrt(k1 ω1''(ψ_min))`` at the global minimum of ``k1 ω1``."""
    g = reeb_components(profile if k1 > 0 else -profile)
    mins = [p for p in g.critical_points if p[2] == "min"]
    psi = min(mins, key=lambda p: p[1])[0]
    return h * math.sqrt(abs(k1) * abs(float(profile.deriv(psi, 2))))
