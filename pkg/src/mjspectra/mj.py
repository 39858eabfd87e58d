"""Maupertuis-Jacobi pairs: time factor, frequency rescaling and conjugacy.

Two symbols ``H`` and ``𝓗`` with a common regular level set
``{H = E} = {𝓗 = 𝓔}`` have parallel Hamiltonian fields there,
``X_𝓗 = 𝒢 X_H``. On an invariant torus with linear ``𝓗``-angles ``φ``
(frequency ``ω̃``) the ``H``-flow is linear in angles ``φ0 = Φ^{-1}(φ)``
with frequency ``ω̃/<𝒢>``, and ``Φ(φ0) = φ0 + ω̃ f(φ0)`` solves

    ω̃·∇f = <𝒢>/𝒢∘Φ - 1,

so that ``det ∂Φ/∂φ0 = <𝒢>/𝒢``. The right-hand side has zero mean over
``φ0`` exactly when ``<𝒢>`` is the harmonic mean of ``𝒢∘Φ`` over ``φ0``,
which equals the arithmetic mean of ``𝒢`` over ``φ``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .action_angle import TorusChart
from .errors import Degenerate, NotOnSurface, NotParallel, ResidualTooLarge, SmallDivisor
from .flow import integrate, orbit_distance, truncate_at, weighted_mean
from .models import HamiltonianModel, _state

TWO_PI = 2.0 * np.pi
SURFACE_TOL = 1e-10
PARALLEL_TOL = 1e-6


# --- time factor -------------------------------------------------------------

def time_factors(modelH: HamiltonianModel, modelG: HamiltonianModel, ys: np.ndarray):
    """Vectorised ``(𝒢, parallelism defect)`` at the rows of ``ys``."""
    ys = np.ascontiguousarray(ys, dtype=float).reshape(-1, 4)
    XH = modelH.vector_fields(ys)
    XG = modelG.vector_fields(ys)
    nH = np.einsum("ij,ij->i", XH, XH)
    if np.any(nH < 1e-20):
        raise Degenerate("X_H vanishes at a sample point")
    G = np.einsum("ij,ij->i", XG, XH) / nH
    defect = np.linalg.norm(XG - G[:, None] * XH, axis=1) / np.linalg.norm(XG, axis=1)
    return G, defect


def time_factor(modelH: HamiltonianModel, modelG: HamiltonianModel, pt, E: float | None = None,
                calE: float | None = None, max_defect: float = PARALLEL_TOL) -> float:
    """Scalar ``𝒢`` with ``X_𝓗 = 𝒢 X_H`` at a point of the common level set.

    Parameters
    ----------
    E, calE : float, optional
        Levels of ``H`` and ``𝓗``; when given, the point must lie on both
        to 1e-10.

    Raises
    ------
    NotOnSurface
    NotParallel
        Parallelism defect ``|X_𝓗 - 𝒢 X_H| / |X_𝓗|`` above ``max_defect``.
    """
    y = _state(pt)
    for model, level, name in ((modelH, E, "H"), (modelG, calE, "𝓗")):
        if level is not None:
            val = model.energy(y)
            if abs(val - level) > SURFACE_TOL:
                raise NotOnSurface(f"{name}(pt) - level = {val - level:.3g}")
    modelH.check_point(y, need_grad=True)
    modelG.check_point(y, need_grad=True)
    G, defect = time_factors(modelH, modelG, y)
    if defect[0] > max_defect:
        raise NotParallel(f"parallelism defect {defect[0]:.3g} exceeds {max_defect:g}")
    return float(G[0])


def _grid_shape(grid) -> tuple[int, int]:
    if isinstance(grid, (int, np.integer)):
        return int(grid), int(grid)
    n1, n2 = grid
    return int(n1), int(n2)


def angle_grid(grid):
    n1, n2 = _grid_shape(grid)
    g1 = TWO_PI * np.arange(n1) / n1
    g2 = TWO_PI * np.arange(n2) / n2
    return np.meshgrid(g1, g2, indexing="ij")


def G_on_chart(modelH, modelG, chart: TorusChart, phi1, phi2, max_defect: float = PARALLEL_TOL):
    """``𝒢`` at chart angles ``φ`` (arrays of equal shape)."""
    ys = chart.states(phi1, phi2)
    G, defect = time_factors(modelH, modelG, ys.reshape(-1, 4))
    if defect.max() > max_defect:
        raise NotParallel(f"parallelism defect {defect.max():.3g} on the torus")
    return G.reshape(np.shape(phi1))


def average_G(modelH, modelG, chart: TorusChart, grid=64) -> float:
    """Mean of ``𝒢`` over a uniform grid in the ``𝓗``-angles of the chart.

    The ``𝓗``-flow is linear in these angles, so this is the ergodic
    time average of ``𝒢`` along ``𝓗``-orbits (periodic trapezoid rule).
    """
    P1, P2 = angle_grid(grid)
    return float(np.mean(G_on_chart(modelH, modelG, chart, P1, P2)))


# --- cohomological equation --------------------------------------------------

@dataclass
class ConjugacyData:
    """Spectral solution of ``ω̃·∇f = <𝒢>/𝒢 - 1`` on an angle grid."""

    shape: tuple[int, int]
    G: np.ndarray
    average: float
    omega: np.ndarray
    K_max: int
    fhat: np.ndarray          # full FFT-layout array, zero outside the retained modes
    residual: float

    @property
    def rho(self) -> np.ndarray:
        return self.average / self.G - 1.0

    def _wavenumbers(self):
        n1, n2 = self.shape
        return np.meshgrid(np.fft.fftfreq(n1, 1.0 / n1), np.fft.fftfreq(n2, 1.0 / n2), indexing="ij")

    @property
    def f(self) -> np.ndarray:
        return np.fft.ifft2(self.fhat).real * (self.shape[0] * self.shape[1])

    def gradient(self) -> tuple[np.ndarray, np.ndarray]:
        k1, k2 = self._wavenumbers()
        n = self.shape[0] * self.shape[1]
        return (np.fft.ifft2(1j * k1 * self.fhat).real * n, np.fft.ifft2(1j * k2 * self.fhat).real * n)

    def evaluate(self, phi1, phi2, fhat: np.ndarray | None = None) -> np.ndarray:
        """``f`` (or the series with coefficients ``fhat``) at arbitrary angles."""
        fhat = self.fhat if fhat is None else fhat
        n1, n2 = self.shape
        mag = np.abs(fhat)
        sig = mag > 1e-15 * max(mag.max(), 1e-300)
        if not sig.any():
            return np.zeros(np.broadcast(phi1, phi2).shape)
        k1, k2 = self._wavenumbers()
        m1 = int(np.abs(k1[sig]).max())
        m2 = int(np.abs(k2[sig]).max())
        r1 = np.arange(-m1, m1 + 1)
        r2 = np.arange(-m2, m2 + 1)
        C = fhat[np.ix_(r1 % n1, r2 % n2)]
        phi1, phi2 = np.broadcast_arrays(np.asarray(phi1, float), np.asarray(phi2, float))
        flat1, flat2 = phi1.ravel(), phi2.ravel()
        out = np.empty(flat1.size)
        for s in range(0, flat1.size, 4096):
            E1 = np.exp(1j * np.multiply.outer(flat1[s:s + 4096], r1))
            E2 = np.exp(1j * np.multiply.outer(flat2[s:s + 4096], r2))
            out[s:s + 4096] = np.einsum("ij,ij->i", E1 @ C, E2).real
        return out.reshape(phi1.shape)

    def coefficients(self):
        """Rows ``(k1, k2, Re f̂, Im f̂)`` for the retained modes."""
        k1, k2 = self._wavenumbers()
        sel = np.nonzero(self.fhat)
        rows = sorted(zip(k1[sel].astype(int), k2[sel].astype(int), self.fhat[sel].real, self.fhat[sel].imag))
        return [(int(a), int(b), float(c), float(d)) for a, b, c, d in rows]

    def to_dict(self, config_hash: str | None = None) -> dict:
        out = {"grid": list(self.shape), "average_G": self.average, "omega": self.omega.tolist(),
               "K_max": self.K_max, "residual": self.residual,
               "coefficients": [{"k1": a, "k2": b, "re": c, "im": d} for a, b, c, d in self.coefficients()]}
        if config_hash is not None:
            out["config_hash"] = config_hash
        return out

    def to_json(self, path, config_hash: str | None = None) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(config_hash), fh, indent=1)


def solve_conjugacy(G: np.ndarray, omega, K_max: int = 64, max_residual: float | None = 1e-8) -> ConjugacyData:
    """Zero-mean solution of ``ω̃·∇f = <𝒢>/𝒢 - 1`` from grid samples of ``𝒢``.

    ``<𝒢>`` is the harmonic mean of the samples, the unique value for which
    the right-hand side has zero mean on the grid. Modes with
    ``0 < |k|_inf <= K_max`` are retained.

    Raises
    ------
    SmallDivisor
        ``|<k, ω̃>| < 1e-12`` for a retained ``k``.
    ResidualTooLarge
        Reconstruction residual above ``max_residual`` (``None`` disables the check).
    """
    G = np.asarray(G, dtype=float)
    if np.any(G <= 0):
        raise Degenerate("time factor must be positive on the grid")
    omega = np.asarray(omega, dtype=float)
    n1, n2 = G.shape
    avg = 1.0 / float(np.mean(1.0 / G))
    rho = avg / G - 1.0
    rhat = np.fft.fft2(rho) / (n1 * n2)
    k1, k2 = np.meshgrid(np.fft.fftfreq(n1, 1.0 / n1), np.fft.fftfreq(n2, 1.0 / n2), indexing="ij")
    keep = (np.maximum(np.abs(k1), np.abs(k2)) <= K_max) & ((k1 != 0) | (k2 != 0))
    # drop Nyquist rows so that the retained set is symmetric under k -> -k
    if n1 % 2 == 0:
        keep &= np.abs(k1) < n1 // 2
    if n2 % 2 == 0:
        keep &= np.abs(k2) < n2 // 2
    div = k1 * omega[0] + k2 * omega[1]
    small = keep & (np.abs(div) < 1e-12)
    if small.any():
        i = tuple(np.argwhere(small)[0])
        raise SmallDivisor(f"|<k, ω̃>| = {abs(div[i]):.3g} at k=({int(k1[i])}, {int(k2[i])})")
    fhat = np.zeros_like(rhat)
    fhat[keep] = rhat[keep] / (1j * div[keep])
    data = ConjugacyData((n1, n2), G, avg, omega, int(K_max), fhat, 0.0)
    d1, d2 = data.gradient()
    data.residual = float(np.max(np.abs(omega[0] * d1 + omega[1] * d2 - rho)))
    if max_residual is not None and data.residual > max_residual:
        raise ResidualTooLarge(f"cohomological residual {data.residual:.3g} > {max_residual:g} at K_max={K_max}")
    return data


def verify_det_identity(data: ConjugacyData) -> float:
    """``max |det(I + ω̃ ⊗ ∇f) - <𝒢>/𝒢|`` on the grid."""
    d1, d2 = data.gradient()
    w = data.omega
    # full 2x2 determinant of ∂Φ/∂φ0 = I + ω̃ ∇fᵀ
    det = (1 + w[0] * d1) * (1 + w[1] * d2) - (w[0] * d2) * (w[1] * d1)
    return float(np.max(np.abs(det - data.average / data.G)))


@dataclass
class TorusConjugacy:
    """``Φ`` on a chart: ``𝒢`` sampled at ``Φ(φ0)`` and the solved ``f``."""

    data: ConjugacyData
    inverse: ConjugacyData      # ``k`` with ``Φ^{-1}(φ) = φ + ω̃ k(φ)``
    average_arithmetic: float   # mean of 𝒢 over the uniform φ grid
    inversion_residual: float


def _invert_shift(k: ConjugacyData, omega, phi0_1, phi0_2, iters: int = 60):
    """Solve ``φ + ω̃ k(φ) = φ0`` for ``φ`` (scalar Newton in ``η = k(φ)``)."""
    k1w, k2w = k._wavenumbers()
    dk = 1j * (omega[0] * k1w + omega[1] * k2w) * k.fhat   # coefficients of ω̃·∇k
    eta = np.zeros(phi0_1.shape)
    for _ in range(iters):
        p1, p2 = phi0_1 - omega[0] * eta, phi0_2 - omega[1] * eta
        F = eta - k.evaluate(p1, p2)
        step = F / (1.0 + k.evaluate(p1, p2, dk))
        eta -= step
        if np.max(np.abs(step)) < 1e-15:
            break
    p1, p2 = phi0_1 - omega[0] * eta, phi0_2 - omega[1] * eta
    res = float(np.max(np.abs(p1 + omega[0] * k.evaluate(p1, p2) - phi0_1)))
    return p1, p2, res


def conjugacy_on_chart(modelH, modelG, chart: TorusChart, grid=256, K_max: int = 64,
                       max_residual: float | None = 1e-8) -> TorusConjugacy:
    """Build ``Φ`` for the pair on ``chart`` and solve for ``f``.

    ``Φ^{-1}(φ) = φ + ω̃ k(φ)`` has an explicit equation on the ``φ`` grid
    (``ω̃·∇k = 𝒢/<𝒢> - 1``); inverting it places ``Φ(φ0)`` at uniform ``φ0``
    nodes, where ``𝒢`` is resampled and the equation for ``f`` solved.
    """
    w = chart.omega_map
    P1, P2 = angle_grid(grid)
    G_phi = G_on_chart(modelH, modelG, chart, P1, P2)
    inv = solve_conjugacy(1.0 / G_phi, w, K_max, max_residual=None)
    Q1, Q2, res = _invert_shift(inv, w, P1, P2)
    G_phi0 = G_on_chart(modelH, modelG, chart, Q1, Q2)
    data = solve_conjugacy(G_phi0, w, K_max, max_residual)
    return TorusConjugacy(data, inv, float(np.mean(G_phi)), res)


# --- dynamical checks ----------------------------------------------------------

def lifted_angles(chart: TorusChart, ys: np.ndarray) -> np.ndarray:
    """Continuous angle per cycle along a densely sampled orbit on the chart's torus.

    Rotational cycles use the lifted position (times the sign of motion);
    librational cycles the winding angle of ``(x - m, p)`` about the loop centre.
    """
    out = np.empty((len(ys), 2))
    for i, tab in enumerate(chart.tables):
        if tab.cycle.kind == "rotational":
            out[:, i] = tab.sign * ys[:, i]
        else:
            a, b = tab.cycle.interval
            m = 0.5 * (a + b)
            x = (ys[:, i] - m + np.pi) % TWO_PI - np.pi
            out[:, i] = np.unwrap(-np.arctan2(ys[:, i + 2], x))
    return out


def measured_frequencies(model, chart: TorusChart, pt0, T: float, tol: float = 1e-11, dt: float = 0.02):
    """Frequency vector of the ``model``-flow on the torus, by weighted Birkhoff averages."""
    traj = integrate(model, pt0, T, tol)
    times = np.arange(0.0, traj.t[-1], dt)
    ang = lifted_angles(chart, traj.sample(times))
    inc = np.diff(ang, axis=0) / dt
    return np.array([weighted_mean(inc[:, 0]), weighted_mean(inc[:, 1])])


def verify_frequency_rescale(modelH, modelG, chart: TorusChart, T: float = 2000.0, tol: float = 1e-11,
                             grid=64, phi0=(0.3, 0.7)):
    """``(ω_measured, ω̃/<𝒢>, relative error)`` for the ``H``-flow on the chart's torus."""
    avg = average_G(modelH, modelG, chart, grid)
    pt0 = chart.states(np.array(phi0[0]), np.array(phi0[1]))
    meas = measured_frequencies(modelH, chart, pt0, T, tol)
    pred = chart.omega / avg
    rel = float(np.linalg.norm(meas - pred) / np.linalg.norm(chart.omega))
    return meas, pred, rel


def ergodic_average_G(modelH, modelG, chart: TorusChart, T: float = 2000.0, tol: float = 1e-11,
                      dt: float = 0.02, phi0=(0.3, 0.7)) -> float:
    """Time average of ``𝒢`` along an ``𝓗``-orbit (weighted Birkhoff)."""
    pt0 = chart.states(np.array(phi0[0]), np.array(phi0[1]))
    traj = integrate(modelG, pt0, T, tol)
    times = np.arange(0.0, traj.t[-1], dt)
    G, _ = time_factors(modelH, modelG, traj.sample(times))
    return weighted_mean(G)


@dataclass
class CoincidenceResult:
    distance: float
    t_span: float
    tau_span: float
    energy_drift: tuple[float, float]


def orbit_coincidence(modelH, modelG, pt0, T: float, tol: float = 1e-11, max_segment: float = 2e-3,
                      overshoot: float = 0.05) -> CoincidenceResult:
    """Hausdorff distance between an ``H``-orbit arc and the matching ``𝓗``-arc.

    The ``𝓗``-run covers the reparametrized time ``∫ dt/𝒢`` plus a margin and
    is cut at the point closest to the end of the ``H``-arc.
    """
    A = integrate(modelH, pt0, T, tol)
    ts, ys = A.refined(16)
    G, _ = time_factors(modelH, modelG, ys)
    tau = float(np.trapezoid(1.0 / G, ts)) if hasattr(np, "trapezoid") else float(np.trapz(1.0 / G, ts))
    B = integrate(modelG, pt0, tau * (1 + overshoot) + 0.1, tol)
    B = truncate_at(B, A.y[-1])
    d = orbit_distance(A, B, "position", refine=_refine_for(A, B, max_segment))
    return CoincidenceResult(d, A.duration, B.duration,
                             (A.stats["energy_drift"], B.stats["energy_drift"]))


def _refine_for(A, B, max_segment: float) -> int:
    seg = max(np.max(np.linalg.norm(np.diff(t.y[:, :2], axis=0), axis=1), initial=0.0) for t in (A, B))
    return int(min(max(np.ceil(seg / max_segment), 1), 256))


def random_points_on_level(model: HamiltonianModel, E: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Random states with ``H = E``: uniform position and direction, radius by Newton."""
    out = np.empty((n, 4))
    from .flow import solve_momentum
    for j in range(n):
        x = rng.uniform(0, TWO_PI, 2)
        a = rng.uniform(0, TWO_PI)
        r = 1.0
        y = np.array([x[0], x[1], r * np.cos(a), r * np.sin(a)])
        # scale the momentum until H = E (bisection on the radius, then polish)
        lo, hi = 0.0, 1.0
        while model.energy(np.array([x[0], x[1], hi * np.cos(a), hi * np.sin(a)])) < E:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if model.energy(np.array([x[0], x[1], mid * np.cos(a), mid * np.sin(a)])) < E:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        y = np.array([x[0], x[1], 0.5 * (lo + hi) * np.cos(a), 0.5 * (lo + hi) * np.sin(a)])
        comp = 2 if abs(y[2]) > abs(y[3]) else 3
        out[j] = solve_momentum(model, y, comp, E)
    return out
