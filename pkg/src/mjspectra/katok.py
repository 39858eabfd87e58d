"""Katok-Randers metrics on the sphere: equatorial geodesics and their return maps.

In the equatorial chart ``(q1, q2)`` (longitude, latitude) the symbol is
``sqrt(p2² + sec² q2 p1²) + α p1``. The equator carries two closed orbits
``γ±`` with longitude speeds ``±(1 ± α)`` at energy 1.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .errors import NotClosed
from .flow import Section, integrate, linearized_return_map, poincare
from .mj import time_factors
from .models import KatokRanders

TWO_PI = 2.0 * math.pi
POLE_MARGIN = 0.1


def _equator_state(model: KatokRanders, branch: int, energy: float = 1.0) -> np.ndarray:
    return np.array([0.0, 0.0, model.equator_momentum(branch, energy), 0.0])


def predicted_period(katok_alpha: float, branch: int) -> float:
    return TWO_PI / (1.0 + branch * katok_alpha)


def equator_orbits(katok_alpha: float, energy: float = 1.0, tol: float = 1e-12,
                   close_tol: float = 1e-6) -> tuple[float, float]:
    """Measured periods ``(T+, T-)`` of the equatorial orbits at ``H = energy``.

    Each period is the first return to the starting meridian; the state
    there must agree with the initial state (longitude mod 2π).

    Raises
    ------
    NotClosed
        Return defect above ``close_tol``.
    """
    model = KatokRanders(katok_alpha)
    out = []
    for branch in (1, -1):
        y0 = _equator_state(model, branch, energy)
        direction = 1 if model.vector_field(y0)[0] > 0 else -1
        sm = poincare(model, Section(0, 0.0, direction), y0, 1, tol=tol)
        y1 = sm.states[-1].copy()
        y1[0] -= direction * TWO_PI
        defect = float(np.max(np.abs(y1 - y0)))
        if defect > close_tol:
            raise NotClosed(f"equatorial orbit (branch {branch:+d}) misses its start by {defect:.3g}")
        out.append(float(sm.times[-1]))
    return out[0], out[1]


def convergents(x: float, n: int = 8) -> list[Fraction]:
    """Continued-fraction convergents of ``x``."""
    out, a = [], []
    r = x
    for _ in range(n):
        ai = math.floor(r)
        a.append(ai)
        frac = Fraction(a[-1])
        for aj in reversed(a[:-1]):
            frac = aj + 1 / frac
        out.append(frac)
        if abs(r - ai) < 1e-12:
            break
        r = 1.0 / (r - ai)
    return out


@dataclass
class AngleReport:
    branch: int
    raw_phase: float          # phase of the upper-half-plane eigenvalue, in [0, 2π)
    phases: tuple[float, float]
    predicted_raw: float      # 2π/(1 ± α) before reduction
    predicted: float          # reduced mod 2π
    defect: float
    moduli: tuple[float, float]
    det: float
    period: float
    convergents: list[str] = field(default_factory=list)


def poincare_angles(katok_alpha: float, energy: float = 1.0, tol: float = 1e-13,
                    step: float = 1e-6) -> tuple[AngleReport, AngleReport]:
    """Rotation angles of the linearized return maps of ``γ±`` on ``q1 = 0``.

    Eigenvalues of an elliptic map come as ``e^{±iθ}``; the defect is taken
    against the nearer of ``θ`` and ``2π - θ`` since the orientation of the
    section coordinates fixes only the pair.
    """
    model = KatokRanders(katok_alpha)
    out = []
    for branch in (1, -1):
        y0 = _equator_state(model, branch, energy)
        direction = 1 if model.vector_field(y0)[0] > 0 else -1
        rm = linearized_return_map(model, y0, Section(0, 0.0, direction), energy=energy, step=step, tol=tol)
        ev = rm.eigenvalues
        ph = np.sort(np.mod(np.angle(ev), TWO_PI))
        raw = rm.rotation_angle
        pred_raw = predicted_period(katok_alpha, branch)
        pred = pred_raw % TWO_PI
        d = min(abs(raw - pred), abs((TWO_PI - raw) - pred))
        d = min(d, TWO_PI - d)
        conv = [f"{c.numerator}/{c.denominator}" for c in convergents(raw / TWO_PI)]
        out.append(AngleReport(branch, raw, (float(ph[0]), float(ph[1])), pred_raw, pred, float(d),
                               tuple(float(a) for a in np.abs(ev)), rm.det, rm.period, conv))
    return out[0], out[1]


def breaking_point(katok_alpha: float, q2: float) -> np.ndarray:
    """Eastward-moving point on latitude ``q2`` with ``p2 = 0`` and Katok energy 1."""
    return np.array([0.0, q2, 1.0 / (1.0 / math.cos(q2) + katok_alpha), 0.0])


def mj_breaking_scan(katok_alpha: float, latitudes) -> np.ndarray:
    """Parallelism defect between the Katok and round-sphere flows along latitudes.

    Rows ``(q2, defect)``; the defect is ``|X_round - 𝒢 X_katok| / |X_round|``
    at :func:`breaking_point`, which lies on a level of both symbols.
    """
    q = np.asarray(latitudes, dtype=float)
    if np.any(np.abs(q) > 0.5 * math.pi - POLE_MARGIN):
        raise ValueError(f"latitudes must satisfy |q2| <= π/2 - {POLE_MARGIN}")
    ys = np.array([breaking_point(katok_alpha, a) for a in q])
    _, defect = time_factors(KatokRanders(katok_alpha), KatokRanders(0.0), ys)
    return np.column_stack([q, defect])


def energy_drift(katok_alpha: float, n_periods: int = 10, tol: float = 1e-12) -> float:
    """Relative energy drift over ``n_periods`` of a slightly inclined orbit near ``γ+``."""
    model = KatokRanders(katok_alpha)
    y0 = _equator_state(model, 1)
    y0[3] = 0.05
    traj = integrate(model, y0, n_periods * predicted_period(katok_alpha, 1), tol)
    return traj.stats["energy_drift"]


@dataclass
class KatokReport:
    katok_alpha: float
    periods: tuple[float, float]
    period_defects: tuple[float, float]
    angles: tuple[float, float]
    angles_reduced_pred: tuple[float, float]
    angle_defects: tuple[float, float]
    det_defects: tuple[float, float]
    moduli_defect: float
    mj_defects: list[tuple[float, float]]
    tolerances: dict
    convergents: tuple[list[str], list[str]] = ([], [])
    energy_drift: float = float("nan")

    @property
    def passed(self) -> dict:
        tol = self.tolerances
        return {"periods": max(self.period_defects) <= tol["period"],
                "angles": max(self.angle_defects) <= tol["angle"],
                "det": max(self.det_defects) <= tol["det"],
                "moduli": self.moduli_defect <= tol["det"]}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def katok_report(katok_alpha: float, latitudes=None, period_tol: float = 1e-6, angle_tol: float = 1e-4,
                 det_tol: float = 1e-6) -> KatokReport:
    """Periods, rotation angles and the off-equator parallelism profile for one ``α``."""
    if latitudes is None:
        latitudes = np.linspace(-1.2, 1.2, 25)
    Tp, Tm = equator_orbits(katok_alpha)
    pd = tuple(abs(T - predicted_period(katok_alpha, b)) / predicted_period(katok_alpha, b)
               for T, b in ((Tp, 1), (Tm, -1)))
    ap, am = poincare_angles(katok_alpha)
    moduli = max(abs(m - 1.0) for r in (ap, am) for m in r.moduli)
    scan = mj_breaking_scan(katok_alpha, latitudes)
    return KatokReport(
        float(katok_alpha), (Tp, Tm), pd, (ap.raw_phase, am.raw_phase), (ap.predicted, am.predicted),
        (ap.defect, am.defect), (abs(ap.det - 1.0), abs(am.det - 1.0)), float(moduli),
        [(float(a), float(b)) for a, b in scan],
        {"period": period_tol, "angle": angle_tol, "det": det_tol},
        (ap.convergents, am.convergents), energy_drift(katok_alpha))
