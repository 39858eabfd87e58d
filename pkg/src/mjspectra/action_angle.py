"""Separable action-angle charts for Liouville metrics.

On ``{H = E, F = c}`` the momenta separate as

    p1² = E u(x1) + c,        p2² = E v(x2) - c,

and along the flow the auxiliary time ``s`` with ``dτ = (u + v) ds``
moves each coordinate independently (``dx_i/ds = 2 p_i``). Everything
below (actions, periods, frequencies, angle maps) is built from those two
one-dimensional problems.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .errors import ChartViolation, ClassificationChange, Degenerate, EmptyTorus, SingularJacobian
from .models import Liouville
from .trig import POSITIVITY_GRID, TrigSeries

TWO_PI = 2.0 * np.pi
ROTATIONAL = "rotational"
LIBRATIONAL = "librational"


# --- separation ---------------------------------------------------------------

@dataclass(frozen=True)
class Cycle:
    """One separated degree of freedom: ``p² = f(x)`` on the circle."""

    index: int
    f: TrigSeries
    weight: TrigSeries
    kind: str
    turning: tuple[float, ...] = ()

    @property
    def interval(self) -> tuple[float, float]:
        """Lifted ``(a, b)`` with ``f > 0`` on ``(a, b)`` for a librational cycle."""
        a, b = self.turning
        return (a, b if b > a else b + TWO_PI)

    def p_sq(self, x):
        return self.f(x)


@dataclass(frozen=True)
class Separation:
    E: float
    sep_const: float
    cycles: tuple[Cycle, Cycle]

    @property
    def classes(self) -> tuple[str, str]:
        return tuple(c.kind for c in self.cycles)


def _classify(index: int, f: TrigSeries, weight: TrigSeries) -> Cycle:
    x = np.linspace(0.0, TWO_PI, POSITIVITY_GRID, endpoint=False)
    vals = f(x)
    if vals.min() > 0.0:
        return Cycle(index, f, weight, ROTATIONAL)
    if vals.max() <= 0.0:
        raise EmptyTorus(f"p{index + 1}² <= 0 on the whole circle")
    pos = vals > 0.0
    ups = np.nonzero(~pos & np.roll(pos, -1))[0]      # sign change - -> + between j and j+1
    downs = np.nonzero(pos & ~np.roll(pos, -1))[0]
    if len(ups) != 1 or len(downs) != 1:
        raise Degenerate(f"p{index + 1}² has {len(ups) + len(downs)} zeros; expected two simple turning points")
    step = x[1]
    roots = []
    for j in (ups[0], downs[0]):
        lo, hi = x[j], x[j] + step
        r = brentq(lambda t: float(f(t)), lo, hi, xtol=1e-15, rtol=1e-15) if f(lo) * f(hi) < 0 else lo
        if abs(float(f.deriv(r))) < 1e-10:
            raise Degenerate(f"turning point of cycle {index + 1} at x={r:.6g} is not simple")
        roots.append(r % TWO_PI)
    return Cycle(index, f, weight, LIBRATIONAL, tuple(roots))


def separate(model: Liouville, E: float, sep_const: float) -> Separation:
    """Split the torus ``{H = E, F = sep_const}`` into its two 1-D cycles.

    Raises
    ------
    EmptyTorus
        If ``p_i²`` is nowhere positive for some ``i``.
    Degenerate
        If a zero of ``p_i²`` is not simple, or there are more than two.
    """
    if not isinstance(model, Liouville):
        raise TypeError("separation requires a Liouville model")
    f1 = model.u.scale(E) + float(sep_const)
    f2 = model.v.scale(E) - float(sep_const)
    return Separation(float(E), float(sep_const), (_classify(0, f1, model.u), _classify(1, f2, model.v)))


# --- actions -----------------------------------------------------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def cycle_action(cycle: Cycle, nodes: int = 128) -> float:
    """``(1/2π)∮|p|dx`` for one cycle.

    Rotational cycles use the periodic trapezoid rule (doubled until the
    change is below 1e-13); librational cycles use ``x = m + w sin θ`` and
    Gauss-Legendre with ``nodes`` points.
    """
    if cycle.kind == ROTATIONAL:
        n, prev = 256, None
        while True:
            x = np.linspace(0.0, TWO_PI, n, endpoint=False)
            val = float(np.mean(np.sqrt(cycle.f(x))))
            if prev is not None and abs(val - prev) <= 1e-13 * max(1.0, val):
                return val
            if n >= 1 << 16:
                return val
            prev, n = val, 2 * n
    a, b = cycle.interval
    m, w = 0.5 * (a + b), 0.5 * (b - a)
    t, wt = _gauss(nodes)
    th = 0.5 * np.pi * t
    x = m + w * np.sin(th)
    integrand = np.sqrt(np.maximum(cycle.f(x), 0.0)) * w * np.cos(th)
    return float(0.5 * np.pi * np.dot(wt, integrand) / np.pi)


def actions(model: Liouville, E: float, sep_const: float, nodes: int = 128) -> np.ndarray:
    """Action pair ``(J1, J2)`` of the torus ``(E, sep_const)``."""
    sep = separate(model, E, sep_const)
    return np.array([cycle_action(c, nodes) for c in sep.cycles])


# --- cycle tables: periods, averages and angle maps --------------------------

class _Fourier:
    """Real periodic function stored by its one-sided complex coefficients."""

    def __init__(self, coef: np.ndarray):
        mag = np.abs(coef)
        keep = np.nonzero(mag > 1e-16 * max(mag.max(), 1e-300))[0]
        n = keep[-1] + 1 if keep.size else 1
        self.k = np.arange(n)
        self.c = coef[:n].copy()
        self.c[1:] *= 2.0

    @classmethod
    def from_samples(cls, values: np.ndarray, offset: float = 0.0) -> "_Fourier":
        n = len(values)
        c = np.fft.rfft(values) / n
        if n % 2 == 0:
            c = c[:-1]
        c = c * np.exp(-1j * np.arange(len(c)) * offset)
        return cls(c)

    @property
    def mean(self) -> float:
        return float(self.c[0].real)

    def antiderivative(self) -> "_Fourier":
        """Zero-mean periodic antiderivative (the mean term is dropped)."""
        out = _Fourier.__new__(_Fourier)
        out.k = self.k
        c = np.zeros_like(self.c)
        c[1:] = self.c[1:] / (1j * self.k[1:])
        out.c = c
        return out

    def __call__(self, x, deriv: int = 0):
        x = np.asarray(x, dtype=float)
        flat = np.ascontiguousarray(x.ravel())
        c = np.ascontiguousarray(self.c)
        return K.fourier_eval(c.real.copy(), c.imag.copy(), flat, int(deriv)).reshape(x.shape)


@dataclass
class CycleTable:
    """Periodic data of one cycle in its uniformizing angle ``θ = 2π s/T``.

    ``T`` is the period in the separated time ``s``, ``mean_w`` the
    ``s``-average of the cycle's metric weight (``u`` or ``v``) and ``P`` the
    periodic part ``∫(w - mean_w) ds`` as a function of ``θ``.
    """

    cycle: Cycle
    sign: int
    T: float
    mean_w: float
    chi: _Fourier      # χ(θ) - θ
    P: _Fourier
    nodes: int

    def chi_of(self, theta):
        return theta + self.chi(theta)

    def position(self, chi):
        if self.cycle.kind == ROTATIONAL:
            return self.sign * chi
        a, b = self.cycle.interval
        return 0.5 * (a + b) - 0.5 * (b - a) * np.cos(chi)

    def momentum(self, chi, x):
        mag = np.sqrt(np.maximum(self.cycle.f(x), 0.0))
        if self.cycle.kind == ROTATIONAL:
            return self.sign * mag
        return np.sign(np.sin(chi)) * mag


def _cycle_samples(cycle: Cycle, sign: int, n: int):
    if cycle.kind == ROTATIONAL:
        offset = 0.0
        chi = offset + TWO_PI * np.arange(n) / n
        x = sign * chi
        q = 0.5 / np.sqrt(cycle.f(x))
    else:
        offset = np.pi / n
        chi = offset + TWO_PI * np.arange(n) / n
        a, b = cycle.interval
        w = 0.5 * (b - a)
        x = 0.5 * (a + b) - w * np.cos(chi)
        q = w * np.abs(np.sin(chi)) / (2.0 * np.sqrt(np.maximum(cycle.f(x), 1e-300)))
    return offset, chi, x, q


def cycle_table(cycle: Cycle, sign: int = 1, n: int = 256, max_nodes: int = 1 << 15) -> CycleTable:
    """Period, weight average and angle map of one cycle, spectrally resolved."""
    prev = np.inf
    while True:
        offset, chi, x, q = _cycle_samples(cycle, sign, n)
        mag = np.abs(np.fft.rfft(q))
        tail = mag[n // 3:].max() / mag.max()
        # stop when resolved, or on a roundoff plateau (turning-point cancellation)
        if tail < 1e-13 or (tail < 1e-10 and tail > 0.5 * prev) or n >= max_nodes:
            Q = _Fourier.from_samples(q, offset)
            break
        prev = tail
        n *= 2
    T = TWO_PI * Q.mean
    wq = cycle.weight(x) * q
    mean_w = float(np.mean(wq) / np.mean(q))
    # θ(χ) = χ + R(χ) - R(0) with R' = 2πq/T - 1
    R = _Fourier.from_samples(TWO_PI * q / T - 1.0, offset).antiderivative()
    R0 = float(R(0.0))
    Pc = _Fourier.from_samples((cycle.weight(x) - mean_w) * q, offset).antiderivative()
    Pc0 = float(Pc(0.0))
    # invert θ(χ) on uniform θ nodes: monotone interpolation seed, then Newton
    theta_nodes = TWO_PI * np.arange(n) / n
    fine = np.linspace(0.0, TWO_PI, 4 * n + 1)
    theta_fine = fine + R(fine) - R0
    c = np.interp(theta_nodes, theta_fine, fine)
    for _ in range(30):
        F = c + R(c) - R0 - theta_nodes
        d = F / (1.0 + R(c, 1))
        c -= d
        if np.max(np.abs(d)) < 1e-15:
            break
    chi_per = _Fourier.from_samples(c - theta_nodes)
    P = _Fourier.from_samples(Pc(c) - Pc0)
    return CycleTable(cycle, sign, T, mean_w, chi_per, P, n)


# --- frequencies -------------------------------------------------------------

def action_jacobian(model: Liouville, E: float, sep_const: float, method: str = "fd",
                    step: float = 1e-5) -> np.ndarray:
    """``∂(J1, J2)/∂(E, c)``.

    ``method="fd"`` differentiates the action integrals by central
    differences (step ``step`` scaled by ``max(1, |E|)``), halving the
    step up to four times if the stencil crosses a separatrix;
    ``"quadrature"`` uses the period integrals directly.
    """
    sep = separate(model, E, sep_const)
    if method == "quadrature":
        t1, t2 = (cycle_table(c) for c in sep.cycles)
        return np.array([[t1.T * t1.mean_w, t1.T], [t2.T * t2.mean_w, -t2.T]]) / TWO_PI
    if method != "fd":
        raise ValueError(f"unknown frequency method {method!r}")
    h = step * max(1.0, abs(E))
    for _ in range(5):
        try:
            cols = []
            for dE, dc in ((h, 0.0), (0.0, h)):
                plus = separate(model, E + dE, sep_const + dc)
                minus = separate(model, E - dE, sep_const - dc)
                if plus.classes != sep.classes or minus.classes != sep.classes:
                    raise ClassificationChange("cycle classification changes inside the difference stencil")
                jp = np.array([cycle_action(c) for c in plus.cycles])
                jm = np.array([cycle_action(c) for c in minus.cycles])
                cols.append((jp - jm) / (2 * h))
            return np.column_stack(cols)
        except (ClassificationChange, EmptyTorus, Degenerate):
            h *= 0.5
    raise ClassificationChange(f"no separatrix-free stencil around (E, c)=({E}, {sep_const})")


def frequencies(model: Liouville, E: float, sep_const: float, method: str = "fd", step: float = 1e-5) -> np.ndarray:
    """Frequency vector ``ω̃ = ∂H/∂J``: first row of the inverse action Jacobian.

    Raises
    ------
    SingularJacobian
        If ``|det ∂J/∂(E, c)| < 1e-12``.
    """
    jac = action_jacobian(model, E, sep_const, method, step)
    det = float(np.linalg.det(jac))
    if abs(det) < 1e-12:
        raise SingularJacobian(f"action Jacobian determinant {det:.3g}")
    return np.linalg.inv(jac)[0]


def ikam_det(model: Liouville, E: float, sep_const: float, step: float = 1e-3, method: str = "fd") -> float:
    """Bordered determinant ``det [[∂ω̃/∂J, ω̃], [ω̃ᵀ, 0]]``.

    ``∂ω̃/∂J`` is taken by central differences of size ``step`` in action
    space; the neighbouring tori are found by inverting the action map.
    """
    from .bsm import invert_actions

    J0 = actions(model, E, sep_const)
    w0 = frequencies(model, E, sep_const, method)
    dw = np.empty((2, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        wp = frequencies(model, *invert_actions(model, J0 + e, (E, sep_const)), method)
        wm = frequencies(model, *invert_actions(model, J0 - e, (E, sep_const)), method)
        dw[:, k] = (wp - wm) / (2 * step)
    B = np.zeros((3, 3))
    B[:2, :2] = dw
    B[:2, 2] = w0
    B[2, :2] = w0
    return float(np.linalg.det(B))


def bordered_det(hessian: np.ndarray, omega: np.ndarray) -> float:
    """``det [[A, ω], [ωᵀ, 0]]`` for a given 2x2 matrix ``A``."""
    B = np.zeros((3, 3))
    B[:2, :2] = hessian
    B[:2, 2] = omega
    B[2, :2] = omega
    return float(np.linalg.det(B))


# --- Diophantine filter ------------------------------------------------------

@dataclass(frozen=True)
class DiophantineParams:
    """Constants of the truncated condition ``|<k,ω>| >= dioph_c |k|^-sigma``."""

    dioph_c: float = 0.1
    sigma: float = 1.5
    K_max: int = 50

    def __post_init__(self):
        if not self.dioph_c > 0:
            raise ValueError("dioph_c must be positive")
        if not self.sigma > 1:
            raise ValueError("sigma must exceed d - 1 = 1")
        if int(self.K_max) < 8:
            raise ValueError("K_max must be at least 8")


@dataclass(frozen=True)
class KamReport:
    passed: bool
    k_star: tuple[int, int]
    score: float
    params: DiophantineParams

    def to_dict(self):
        return {"passed": self.passed, "k_star": list(self.k_star), "score": self.score,
                "dioph_c": self.params.dioph_c, "sigma": self.params.sigma, "K_max": self.params.K_max}


def kam_membership(omega, params: DiophantineParams = DiophantineParams()) -> KamReport:
    """Exhaustive Diophantine check over ``0 < |k|_inf <= K_max``.

    ``|k|`` in the weight is the l1 norm. The worst resonance ``k*``
    minimises ``|<k,ω>| |k|^sigma``; ``k`` and ``-k`` are identified and the
    representative has ``k1 > 0`` or ``k1 = 0, k2 > 0``.
    """
    w = np.asarray(omega, dtype=float)
    if not np.any(w):
        raise ValueError("frequency vector must be nonzero")
    score, k1, k2 = K.kam_scan(float(w[0]), float(w[1]), int(params.K_max), float(params.sigma))
    return KamReport(bool(score >= params.dioph_c), (int(k1), int(k2)), float(score), params)


# --- torus charts ------------------------------------------------------------

def maslov_index(chart) -> tuple[int, int]:
    """0 for a rotational cycle, 2 for a librational one (two simple turning points)."""
    classes = chart.classes if hasattr(chart, "classes") else chart
    return tuple(0 if c == ROTATIONAL else 2 for c in classes)


@dataclass
class TorusChart:
    """Invariant torus ``(E, sep_const)`` with its action-angle data.

    ``phase_point`` maps angles ``φ`` (in which the flow of ``H`` is
    linear with frequency ``omega``) to phase space. ``signs`` fixes the
    direction of motion on rotational cycles.
    """

    model: Liouville
    E: float
    sep_const: float
    J: np.ndarray
    omega: np.ndarray
    classes: tuple[str, str]
    turning_points: tuple[tuple[float, ...], tuple[float, ...]]
    maslov: tuple[int, int]
    signs: tuple[int, int]
    tables: tuple[CycleTable, CycleTable] = field(repr=False)

    @property
    def periods(self) -> np.ndarray:
        """Periods of the separated cycles in the auxiliary time ``s``."""
        return np.array([t.T for t in self.tables])

    @property
    def omega_map(self) -> np.ndarray:
        """Frequencies implied by the period integrals (used by the angle map)."""
        m = self.tables[0].mean_w + self.tables[1].mean_w
        return TWO_PI / (self.periods * m)

    def _g(self, th1, th2, deriv=False):
        t1, t2 = self.tables
        if deriv:
            return t1.P(th1, 1), t2.P(th2, 1)
        return t1.P(th1) + t2.P(th2)

    def theta_of_phi(self, phi1, phi2):
        """Uniformizing angles from flow angles: ``φ = θ + ω g(θ)``."""
        w = self.omega_map
        phi1, phi2 = np.broadcast_arrays(np.asarray(phi1, float), np.asarray(phi2, float))
        eta = np.zeros(phi1.shape)
        for _ in range(50):
            th1, th2 = phi1 - w[0] * eta, phi2 - w[1] * eta
            F = eta - self._g(th1, th2)
            d1, d2 = self._g(th1, th2, deriv=True)
            step = F / (1.0 + w[0] * d1 + w[1] * d2)
            eta = eta - step
            if np.max(np.abs(step), initial=0.0) < 1e-15:
                break
        return phi1 - w[0] * eta, phi2 - w[1] * eta

    def phi_of_theta(self, th1, th2):
        w = self.omega_map
        g = self._g(np.asarray(th1, float), np.asarray(th2, float))
        return th1 + w[0] * g, th2 + w[1] * g

    def states(self, phi1, phi2) -> np.ndarray:
        """Phase-space states (``[..., 4]``, lifted positions) at angles ``φ``."""
        th1, th2 = self.theta_of_phi(phi1, phi2)
        out = np.empty(th1.shape + (4,))
        for i, th in enumerate((th1, th2)):
            tab = self.tables[i]
            chi = tab.chi_of(th)
            x = tab.position(chi)
            out[..., i] = x
            out[..., i + 2] = tab.momentum(chi, x)
        return out

    def phase_point(self, phi):
        from .models import PhasePoint
        return PhasePoint.from_array(self.states(phi[0], phi[1]))

    def measure_density(self, th1, th2):
        """Density of the invariant measure in ``θ``, normalized to mean 1."""
        t1, t2 = self.tables
        x1 = t1.position(t1.chi_of(th1))
        x2 = t2.position(t2.chi_of(th2))
        return (self.model.u(x1) + self.model.v(x2)) / (t1.mean_w + t2.mean_w)

    def row(self, ikam: float | None = None, kam: KamReport | None = None) -> list:
        return [self.E, self.sep_const, self.J[0], self.J[1], self.omega[0], self.omega[1],
                self.classes[0], self.classes[1], self.maslov[0], self.maslov[1],
                ikam if ikam is not None else float("nan"), "" if kam is None else int(kam.passed)]


ATLAS_COLUMNS = ["E", "c", "J1", "J2", "w1", "w2", "class1", "class2", "maslov1", "maslov2", "ikam_det", "kam_pass"]


def torus_chart(model: Liouville, E: float, sep_const: float, signs=(1, 1), method: str = "fd") -> TorusChart:
    """Build the chart of the torus ``(E, sep_const)``."""
    sep = separate(model, E, sep_const)
    signs = tuple(int(np.sign(s)) or 1 for s in signs)
    tables = tuple(cycle_table(c, s) for c, s in zip(sep.cycles, signs))
    J = np.array([cycle_action(c) for c in sep.cycles])
    if method == "quadrature":
        m = tables[0].mean_w + tables[1].mean_w
        omega = TWO_PI / (np.array([t.T for t in tables]) * m)
    else:
        omega = frequencies(model, E, sep_const, method)
    return TorusChart(model, float(E), float(sep_const), J, omega, sep.classes,
                      tuple(c.turning for c in sep.cycles), maslov_index(sep.classes), signs, tables)


def atlas(model: Liouville, E_values, c_values, params: DiophantineParams | None = None,
          with_ikam: bool = True) -> list[list]:
    """Rows of a torus atlas over an ``(E, c)`` grid; tori that do not exist are skipped."""
    rows = []
    for E in E_values:
        for c in c_values:
            try:
                chart = torus_chart(model, E, c)
            except (EmptyTorus, Degenerate, ClassificationChange, SingularJacobian, ChartViolation):
                continue
            ik = ikam_det(model, E, c) if with_ikam else None
            kam = kam_membership(chart.omega, params) if params is not None else None
            rows.append(chart.row(ik, kam))
    return rows


def golden_ratio() -> float:
    return 0.5 * (1.0 + math.sqrt(5.0))
