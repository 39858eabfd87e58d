"""Hamiltonian flows: adaptive integration, orbit comparison, Poincaré sections.

Angles are never reduced during integration, so a trajectory is a curve in
the universal cover and two orbits started at the same point can be
compared without seam handling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from . import _kernels as K
from .errors import (EmptyTrajectory, IllConditioned, NoCrossing, NotPeriodic, StepUnderflow, Tangency,
                     TooFewSamples)
from .models import HamiltonianModel, _state

TWO_PI = 2.0 * np.pi
TRANSVERSE_MIN = 1e-8
SECTION_RESIDUAL = 1e-10


@dataclass
class Trajectory:
    """Accepted DOPRI5 steps with their dense-output coefficients.

    ``y`` rows are ``[x1, x2, p1, p2]`` with lifted angles; ``cont`` holds
    the five Hairer interpolation vectors of each step.
    """

    model: HamiltonianModel
    t: np.ndarray
    y: np.ndarray
    cont: np.ndarray
    H: np.ndarray
    tol: float
    rejected: int = 0
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        e0 = self.H[0]
        drift = float(np.max(np.abs(self.H - e0))) / max(1.0, abs(e0))
        self.stats.update(steps=len(self.t) - 1, rejected=int(self.rejected), energy_drift=drift,
                          drift_budget=100.0 * self.tol * max(self.duration, 1.0))

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def within_budget(self) -> bool:
        return self.stats["energy_drift"] <= self.stats["drift_budget"]

    def sample(self, times) -> np.ndarray:
        """States at arbitrary times inside the run (dense output, 4th order)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if len(self.t) < 2:
            return np.repeat(self.y[:1], len(times), axis=0)
        idx = np.clip(np.searchsorted(self.t, times, side="right") - 1, 0, len(self.t) - 2)
        h = self.t[idx + 1] - self.t[idx]
        th = ((times - self.t[idx]) / h)[:, None]
        r = self.cont[idx]
        return r[:, 0] + th * (r[:, 1] + (1 - th) * (r[:, 2] + th * (r[:, 3] + (1 - th) * r[:, 4])))

    def refined(self, per_step: int) -> tuple[np.ndarray, np.ndarray]:
        """Times and states with ``per_step`` interpolated points inside every step."""
        if per_step <= 1 or len(self.t) < 2:
            return self.t, self.y
        frac = np.arange(per_step) / per_step
        times = (self.t[:-1, None] + frac[None, :] * np.diff(self.t)[:, None]).ravel()
        times = np.append(times, self.t[-1])
        return times, self.sample(times)

    def rows(self):
        return np.column_stack([self.t, self.y, self.H])

    def to_csv(self, path, config_hash: str | None = None) -> None:
        from .io import write_csv
        write_csv(path, ["t", "x1", "x2", "p1", "p2", "H"], self.rows(), config_hash)


def integrate(model: HamiltonianModel, pt0, T: float, tol: float = 1e-10, max_steps: int = 5_000_000,
              h_init: float | None = None) -> Trajectory:
    """Integrate ``X_H`` from ``pt0`` over ``[0, T]`` with DOPRI5 5(4).

    Parameters
    ----------
    model : HamiltonianModel
    pt0 : PhasePoint or array_like of 4
    T : float
        Final time (> 0).
    tol : float
        Local error tolerance, in ``[1e-13, 1e-6]``.

    Raises
    ------
    StepUnderflow
        If the step size collapses (symbol singularity) or the orbit leaves the chart.
    """
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError(f"tol={tol} outside [1e-13, 1e-6]")
    if not T > 0:
        raise ValueError("T must be positive")
    y0 = _state(pt0).copy()
    model.check_point(y0, need_grad=True)
    C, S = model.packed
    if h_init is None:
        h_init = 0.05 * tol ** 0.2
    ts, ys, cont, nrej, status = K.dopri5(model.kind, C, S, y0, float(T), float(tol), float(h_init),
                                          int(max_steps), float(model.guard))
    if status == K.UNDERFLOW:
        raise StepUnderflow(f"step size underflow at t={ts[-1]:.6g}")
    if status == K.CHART:
        raise StepUnderflow(f"orbit reached the chart guard |q2| > {model.guard:.4f} at t={ts[-1]:.6g}")
    if status == K.MAX_STEPS:
        raise StepUnderflow(f"step budget {max_steps} exhausted at t={ts[-1]:.6g}")
    return Trajectory(model, ts, ys, cont, model.energies(ys), tol, nrej)


# --- orbit comparison --------------------------------------------------------

def _point_segment(P, A, B):
    d = B - A
    L2 = np.einsum("ij,ij->i", d, d)
    s = np.einsum("ij,ij->i", P - A, d) / np.where(L2 > 0, L2, 1.0)
    s = np.clip(s, 0.0, 1.0)
    return np.linalg.norm(P - (A + s[:, None] * d), axis=1)


def _directed_hausdorff(P: np.ndarray, Q: np.ndarray) -> float:
    """max over points of P of the distance to the polyline through Q (exact)."""
    tree = cKDTree(Q)
    dv, _ = tree.query(P)
    if len(Q) == 1:
        return float(dv.max())
    seg_len = np.linalg.norm(np.diff(Q, axis=0), axis=1)
    # the nearest segment has an endpoint within dv + L/2 of the point
    radius = dv + 0.5 * seg_len.max() * (1 + 1e-12) + 1e-15
    lists = tree.query_ball_point(P, radius, return_sorted=False)
    counts = np.fromiter((len(c) for c in lists), dtype=np.int64, count=len(P))
    owner = np.repeat(np.arange(len(P)), counts)
    verts = np.fromiter((v for c in lists for v in c), dtype=np.int64, count=int(counts.sum()))
    nseg = len(Q) - 1
    best = dv.copy()
    for seg in (np.clip(verts - 1, 0, nseg - 1), np.clip(verts, 0, nseg - 1)):
        d = _point_segment(P[owner], Q[seg], Q[seg + 1])
        np.minimum.at(best, owner, d)
    return float(best.max())


def orbit_distance(A: Trajectory, B: Trajectory, projection: str = "position", refine: int = 8) -> float:
    """Symmetric Hausdorff distance between two sampled orbits.

    Both sample sets are densified with ``refine`` dense-output points per
    step and compared as polylines, in positions (``"position"``) or full
    phase space (``"phase"``).
    """
    if len(A.t) == 0 or len(B.t) == 0:
        raise EmptyTrajectory("cannot compare an empty trajectory")
    cols = slice(0, 2) if projection == "position" else slice(0, 4)
    if projection not in ("position", "phase"):
        raise ValueError(f"unknown projection {projection!r}")
    P = A.refined(refine)[1][:, cols]
    Q = B.refined(refine)[1][:, cols]
    return max(_directed_hausdorff(P, Q), _directed_hausdorff(Q, P))


def truncate_at(traj: Trajectory, target: np.ndarray, refine: int = 8) -> Trajectory:
    """Cut ``traj`` at the sample nearest (in positions) to ``target``.

    Used to compare arcs of two parametrizations of the same orbit: the
    second run overshoots slightly and is trimmed where the first one ended.
    """
    ts, ys = traj.refined(refine)
    j = int(np.argmin(np.linalg.norm(ys[:, :2] - target[:2], axis=1)))
    # refine the cut on the dense output with a golden search around node j
    lo, hi = ts[max(j - 1, 0)], ts[min(j + 1, len(ts) - 1)]
    from scipy.optimize import minimize_scalar
    res = minimize_scalar(lambda s: float(np.linalg.norm(traj.sample(s)[0, :2] - target[:2])),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    tcut = float(res.x)
    keep = traj.t < tcut
    t = np.append(traj.t[keep], tcut)
    y = np.vstack([traj.y[keep], traj.sample(tcut)])
    cont = traj.cont[: keep.sum()].copy()
    if len(cont):
        # rescale the last step's interpolant onto the shortened interval
        k = len(cont) - 1
        t0, t1 = traj.t[k], traj.t[k + 1]
        nodes = t0 + (tcut - t0) * np.linspace(0, 1, 5)
        cont[k] = _fit_cont(traj.sample(nodes))
    return Trajectory(traj.model, t, y, cont, traj.model.energies(y), traj.tol, traj.rejected)


def _fit_cont(samples: np.ndarray) -> np.ndarray:
    """Hairer-form coefficients of the quartic through 5 equispaced samples."""
    th = np.linspace(0, 1, 5)
    # basis: 1, th, th(1-th), th²(1-th), th²(1-th)²
    V = np.column_stack([np.ones(5), th, th * (1 - th), th ** 2 * (1 - th), th ** 2 * (1 - th) ** 2])
    coef = np.linalg.solve(V, samples)
    # Hairer layout: r1 + th(r2 + (1-th)(r3 + th(r4 + (1-th) r5)))
    r1 = coef[0]
    r2 = coef[1]
    r3 = coef[2]
    r4 = coef[3]
    r5 = coef[4]
    return np.stack([r1, r2, r3, r4, r5])


# --- Poincaré sections ------------------------------------------------------

@dataclass(frozen=True)
class Section:
    """Hypersurface ``y[index] = level`` (mod 2π when ``periodic``).

    ``direction`` is +1 / -1 to keep only crossings with increasing /
    decreasing coordinate, or 0 for both.
    """

    index: int
    level: float = 0.0
    direction: int = 1
    periodic: bool = True

    @property
    def partner(self) -> int:
        """Position index kept as the in-section coordinate (with its momentum)."""
        return 1 - self.index if self.index < 2 else 1 - (self.index - 2)

    def coords(self, y: np.ndarray) -> np.ndarray:
        j = self.partner
        return np.column_stack([y[..., j], y[..., j + 2]]) if y.ndim == 2 else np.array([y[j], y[j + 2]])


@dataclass
class SectionMap:
    section: Section
    points: np.ndarray
    times: np.ndarray
    states: np.ndarray
    residual: float

    def to_csv(self, path, config_hash: str | None = None) -> None:
        from .io import write_csv
        idx = np.arange(len(self.times))
        write_csv(path, ["return", "u", "pu", "t"], np.column_stack([idx, self.points, self.times]), config_hash)


def _crossings_in_step(sec: Section, sa: float, sb: float):
    """Section targets crossed inside one step (values of y[index])."""
    if sec.periodic:
        lo, hi = min(sa, sb), max(sa, sb)
        m0 = math.floor((lo - sec.level) / TWO_PI) + 1
        m1 = math.floor((hi - sec.level) / TWO_PI)
        targets = [sec.level + TWO_PI * m for m in range(m0, m1 + 1)]
        return targets if sb >= sa else targets[::-1]
    if (sa - sec.level) * (sb - sec.level) < 0 or sb == sec.level:
        return [sec.level]
    return []


def _refine_crossing(model, C, S, traj: Trajectory, k: int, target: float, idx: int):
    """Crossing time and state inside step ``k``: dense root, then Newton with direct RK steps."""
    t0, t1 = traj.t[k], traj.t[k + 1]
    f = lambda s: traj.sample(s)[0, idx] - target
    fa, fb = f(t0), f(t1)
    if fa == 0.0:
        tc = t0
    elif fa * fb > 0:
        tc = t0 + (t1 - t0) * (target - traj.y[k, idx]) / (traj.y[k + 1, idx] - traj.y[k, idx])
    else:
        tc = brentq(f, t0, t1, xtol=1e-15, rtol=1e-15)
    ya = traj.y[k]
    dt = tc - t0
    yc = K.rk_step(model.kind, C, S, ya, dt) if dt != 0 else ya.copy()
    for _ in range(4):
        vf = K.vector_field(model.kind, C, S, yc)
        s = yc[idx] - target
        if abs(s) <= 1e-15 * max(1.0, abs(target)):
            break
        dt -= s / vf[idx]
        yc = K.rk_step(model.kind, C, S, ya, dt)
    vf = K.vector_field(model.kind, C, S, yc)
    return t0 + dt, yc, vf[idx]


def poincare(model: HamiltonianModel, section: Section, pt0, n_returns: int, tol: float = 1e-11,
             t_max: float = 1e5, chunk: float = 200.0, t_min: float = 1e-9) -> SectionMap:
    """First ``n_returns`` crossings of ``section`` along the orbit of ``pt0``.

    Raises
    ------
    NoCrossing
        Fewer than ``n_returns`` crossings before ``t_max``.
    Tangency
        The transverse velocity at a crossing is below 1e-8.
    """
    C, S = model.packed
    y = _state(pt0).copy()
    idx = section.index
    t_off = 0.0
    times, states = [], []
    while len(times) < n_returns:
        if t_off >= t_max:
            raise NoCrossing(f"only {len(times)} of {n_returns} crossings within t_max={t_max}")
        traj = integrate(model, y, min(chunk, t_max - t_off), tol)
        for k in range(len(traj.t) - 1):
            for target in _crossings_in_step(section, traj.y[k, idx], traj.y[k + 1, idx]):
                tc, yc, vel = _refine_crossing(model, C, S, traj, k, target, idx)
                if t_off + tc <= t_min:
                    continue
                if abs(vel) < TRANSVERSE_MIN:
                    raise Tangency(f"transverse velocity {vel:.3g} at t={t_off + tc:.6g}")
                if section.direction and np.sign(vel) != section.direction:
                    continue
                times.append(t_off + tc)
                states.append(yc)
                if len(times) == n_returns:
                    break
            if len(times) == n_returns:
                break
        t_off += traj.t[-1]
        y = traj.y[-1].copy()
    states = np.array(states)
    level_res = states[:, idx] - section.level
    if section.periodic:
        level_res = (level_res + np.pi) % TWO_PI - np.pi
    return SectionMap(section, section.coords(states), np.array(times), states, float(np.max(np.abs(level_res))))


# --- rotation numbers -------------------------------------------------------

def _bump_weights(n: int) -> np.ndarray:
    s = (np.arange(n) + 0.5) / n
    w = np.exp(-1.0 / (s * (1.0 - s)))
    return w / w.sum()


def weighted_mean(samples) -> float:
    """Weighted Birkhoff average with the ``exp(-1/(s(1-s)))`` bump.

    For quasi-periodic sequences with Diophantine frequencies it converges
    faster than any power of the sample count.
    """
    samples = np.asarray(samples, dtype=float)
    return float(np.dot(_bump_weights(len(samples)), samples))


def rotation_number(angles, lifted: bool = True, method: str = "lsq") -> tuple[float, float]:
    """Mean advance per iterate, in turns, with a standard-error estimate.

    Parameters
    ----------
    angles : sequence of float
        Angle after each return, radians. If ``lifted`` is false the
        sequence is taken mod 2π and increments are reduced to ``[0, 2π)``.
    method : {"lsq", "weighted"}
        Least-squares slope of the lifted sequence, or the weighted Birkhoff
        average of its increments.
    """
    a = np.asarray(angles, dtype=float)
    if a.size < 100:
        raise TooFewSamples(f"need at least 100 returns, got {a.size}")
    d = np.diff(a)
    if not lifted:
        d = np.mod(d, TWO_PI)
    lift = np.concatenate([[0.0], np.cumsum(d)])
    if method == "weighted":
        rho = weighted_mean(d) / TWO_PI
        # spread of the estimate between the two halves of the run
        half = len(d) // 2
        err = abs(weighted_mean(d[:half]) - weighted_mean(d[half:])) / TWO_PI
        return rho, err
    n = np.arange(a.size, dtype=float)
    A = np.column_stack([n, np.ones_like(n)])
    coef, *_ = np.linalg.lstsq(A, lift, rcond=None)
    resid = lift - A @ coef
    dof = max(a.size - 2, 1)
    s2 = float(resid @ resid) / dof
    se = math.sqrt(s2 / float(((n - n.mean()) ** 2).sum()))
    return float(coef[0] / TWO_PI), se / TWO_PI


# --- return maps -------------------------------------------------------------

def solve_momentum(model: HamiltonianModel, y: np.ndarray, comp: int, E: float, iters: int = 50) -> np.ndarray:
    """Adjust ``y[comp]`` (a momentum) by Newton so that ``H(y) = E``."""
    C, S = model.packed
    y = y.copy()
    g = np.empty(4)
    for _ in range(iters):
        r = K.energy(model.kind, y, C, S) - E
        K.grad(model.kind, y, C, S, g)
        if g[comp] == 0.0:
            raise IllConditioned("energy is stationary in the eliminated momentum")
        step = r / g[comp]
        y[comp] -= step
        if abs(step) <= 1e-15 * max(1.0, abs(y[comp])):
            break
    if abs(K.energy(model.kind, y, C, S) - E) > 1e-12 * max(1.0, abs(E)):
        raise IllConditioned("could not put the section point on the energy surface")
    return y


@dataclass
class ReturnMap:
    """First-return data around a periodic orbit."""

    matrix: np.ndarray
    fixed_point: np.ndarray
    period: float
    residual: float

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix)

    @property
    def rotation_angle(self) -> float:
        """Phase of the upper-half-plane eigenvalue, in ``[0, 2π)``."""
        ev = self.eigenvalues
        return float(np.mod(np.angle(ev[np.argmax(ev.imag)]), TWO_PI))


class _ReturnMap:
    """In-section return map evaluated on a frozen step sequence.

    Perturbed returns reuse the accepted steps of a reference orbit and only
    adjust the final partial step, so the numerical map is a smooth function
    of the section point and finite differences do not pick up step-size
    selection noise.
    """

    def __init__(self, model, seed, section: Section, E, tol, n_returns):
        self.model = model
        self.section = section
        self.seed = seed.copy()
        self.E = E
        self.tol = tol
        self.n = n_returns
        self.comp = section.index + 2  # momentum eliminated by the energy constraint
        self.C, self.S = model.packed

    def lift(self, z):
        y = self.seed.copy()
        j = self.section.partner
        y[j], y[j + 2] = z
        return solve_momentum(self.model, y, self.comp, self.E)

    def set_reference(self, z, probe: float = 1e-3):
        y = self.lift(z)
        sm = poincare(self.model, self.section, y, self.n, self.tol, t_max=1e4, chunk=1e4)
        tc = sm.times[-1]
        # the reference orbit alone can be too simple for error control (e.g. an
        # equator), so size the uniform steps from nearby probe orbits as well
        counts = [len(integrate(self.model, y, tc, self.tol).t)]
        for c in range(2):
            for sgn in (-1.0, 1.0):
                e = np.zeros(2)
                e[c] = sgn * probe
                try:
                    counts.append(len(integrate(self.model, self.lift(z + e), tc, self.tol).t))
                except Exception:
                    pass
        n = 2 * max(counts)
        self.steps = np.full(n - 1, tc / n)
        self.last = tc / n
        self.target = sm.states[-1, self.section.index]
        self.period = tc

    def __call__(self, z):
        kind, C, S = self.model.kind, self.C, self.S
        idx = self.section.index
        y = self.lift(z)
        for h in self.steps:
            y = K.rk_step(kind, C, S, y, h)
        ya, dt = y, self.last
        y = K.rk_step(kind, C, S, ya, dt)
        for _ in range(8):
            vf = K.vector_field(kind, C, S, y)
            ddt = (y[idx] - self.target) / vf[idx]
            dt -= ddt
            y = K.rk_step(kind, C, S, ya, dt)
            if abs(ddt) <= 1e-16:
                break
        return self.section.coords(y), self.period - self.last + dt


def linearized_return_map(model: HamiltonianModel, seed, section: Section, energy: float | None = None,
                          step: float = 1e-6, tol: float = 1e-13, n_returns: int = 1,
                          refine: bool = True) -> ReturnMap:
    """Monodromy of the in-section return map at a periodic orbit.

    The section point is ``(y[j], p_j)`` for the other position index ``j``;
    the momentum conjugate to the section coordinate is eliminated through
    ``H = energy``. The seed is refined by Newton on the return map, then
    the 2x2 Jacobian is taken by central differences of size ``step``.

    Raises
    ------
    NotPeriodic
        Newton fails to close the orbit to 1e-10.
    IllConditioned
        The monodromy matrix is not finite.
    """
    y0 = _state(seed).copy()
    E = model.energy(y0) if energy is None else float(energy)
    rm = _ReturnMap(model, y0, section, E, tol, n_returns)
    j = section.partner
    periodic_j = section.periodic and model.chart == "torus"
    z = np.array([y0[j], y0[j + 2]])

    def defect(z):
        pz, _ = rm(z)
        d = pz - z
        if periodic_j:
            d[0] = (d[0] + np.pi) % TWO_PI - np.pi
        return d

    def jac(z):
        M = np.empty((2, 2))
        for c in range(2):
            e = np.zeros(2)
            e[c] = step
            M[:, c] = (rm(z + e)[0] - rm(z - e)[0]) / (2 * step)
        return M

    rm.set_reference(z)
    r = defect(z)
    if refine and np.max(np.abs(r)) > 1e-11:
        for _ in range(20):
            A = jac(z) - np.eye(2)
            dz, *_ = np.linalg.lstsq(A, -r, rcond=1e-10)
            z = z + dz
            rm.set_reference(z)
            r = defect(z)
            if np.max(np.abs(dz)) <= 1e-12 or np.max(np.abs(r)) <= 1e-12:
                break
    if np.max(np.abs(r)) > 1e-10:
        raise NotPeriodic(f"return-map defect {np.max(np.abs(r)):.3g} after refinement")
    M = jac(z)
    if not np.all(np.isfinite(M)):
        raise IllConditioned("non-finite monodromy entries")
    _, period = rm(z)
    return ReturnMap(M, rm.lift(z), float(period), float(np.max(np.abs(r))))


def time_reversed(pt) -> np.ndarray:
    """``Γ(x, p) = (x, -p)``."""
    y = _state(pt).copy()
    y[2:] *= -1.0
    return y
