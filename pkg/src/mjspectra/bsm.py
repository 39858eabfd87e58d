"""Bohr-Sommerfeld-Maslov eigenvalue lattices for Liouville metrics.

For an integrable model the quantized actions ``J' = h (k + m/4)`` are
mapped back to tori exactly, by Newton on ``(E, c) -> (J1, J2)``, so the
predicted eigenvalue is simply the energy of the quantized torus.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .action_angle import action_jacobian, actions, maslov_index, separate
from .errors import (ClassificationChange, ConfigError, Degenerate, EmptyTorus, NoConvergence, SingularJacobian,
                     WindowEmpty)
from .models import Liouville

WINDOW_SLACK = 1e-9


@dataclass(frozen=True)
class QuantizeParams:
    """Lattice window ``|h k - I|_inf <= C0 h^delta`` and Maslov offsets."""

    h: float
    delta: float = 0.5
    C0: float = 1.0
    maslov_index: tuple[int, int] = (0, 0)
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not 0.0 < self.h <= 0.5:
            raise ConfigError(f"quantize.h: {self.h} must lie in (0, 0.5]")
        if not 0.0 < self.delta <= 1.0:
            raise ConfigError(f"quantize.delta: {self.delta} must lie in (0, 1]")
        if not self.C0 > 0.0:
            raise ConfigError(f"quantize.C0: {self.C0} must be positive")

    @property
    def width(self) -> float:
        return self.C0 * self.h ** self.delta


@dataclass
class BSMLatticePoint:
    k: tuple[int, int]
    J: np.ndarray
    E: float = float("nan")
    sep_const: float = float("nan")
    residual: float = float("nan")
    status: str = "ok"

    @property
    def E_k(self) -> float:
        return self.E

    def row(self):
        return [self.k[0], self.k[1], self.J[0], self.J[1], self.E, self.sep_const, self.E, self.residual,
                self.status]


CSV_COLUMNS = ["k1", "k2", "J1p", "J2p", "E", "c", "E_k", "residual", "status"]


@dataclass
class Prediction:
    """Result of :func:`predict_spectrum`; failed points are kept with their status."""

    params: QuantizeParams
    E_center: float
    points: list[BSMLatticePoint]
    dropped: list[BSMLatticePoint] = field(default_factory=list)

    @property
    def energies(self) -> np.ndarray:
        return np.array([p.E for p in self.points])

    @property
    def C1(self) -> float:
        """Effective window constant ``max |E_k - E_center| / h^delta``."""
        if not self.points:
            return float("nan")
        return float(np.max(np.abs(self.energies - self.E_center)) / self.params.h ** self.params.delta)

    @property
    def success_rate(self) -> float:
        n = len(self.points) + len(self.dropped)
        return len(self.points) / n if n else 0.0

    def rows(self):
        return [p.row() for p in sorted(self.points + self.dropped, key=lambda p: (p.status != "ok", p.E, p.k))]

    def to_csv(self, path, config_hash=None):
        from .io import write_csv
        write_csv(path, CSV_COLUMNS, self.rows(), config_hash)


def enumerate_lattice(params: QuantizeParams) -> list[tuple[int, int]]:
    """Integer points ``k`` with ``|h k - I|_inf <= C0 h^delta``, lexicographic.

    Raises
    ------
    WindowEmpty
    """
    h, W = params.h, params.width
    ranges = []
    for I in params.center:
        lo = math.ceil((I - W) / h - WINDOW_SLACK)
        hi = math.floor((I + W) / h + WINDOW_SLACK)
        ranges.append(range(lo, hi + 1))
    pts = [(k1, k2) for k1 in ranges[0] for k2 in ranges[1]]
    if not pts:
        raise WindowEmpty(f"no lattice point within {W:.3g} of I={tuple(params.center)} at h={h}")
    return pts


def invert_actions(model: Liouville, J_target, seed, max_iter: int = 50, step_tol: float = 1e-12,
                   res_tol: float = 1e-10) -> tuple[float, float]:
    """``(E, c)`` of the torus with actions ``J_target``, by Newton from ``seed``.

    Raises
    ------
    SingularJacobian
        Action Jacobian with ``|det| < 1e-12``.
    NoConvergence
        No convergence in ``max_iter`` iterations, or a target outside the image.
    ClassificationChange
        An iterate changes the cycle types of the seed torus.
    """
    J_target = np.asarray(J_target, dtype=float)
    if np.any(J_target <= 0.0):
        raise NoConvergence(f"target actions {J_target} lie outside the image of the action map")
    x = np.asarray(seed, dtype=float).copy()
    classes = separate(model, *x).classes
    r = actions(model, *x) - J_target
    for _ in range(max_iter):
        jac = action_jacobian(model, *x)
        if abs(np.linalg.det(jac)) < 1e-12:
            raise SingularJacobian(f"action Jacobian is singular at (E, c)={tuple(x)}")
        dx = np.linalg.solve(jac, -r)
        lam = 1.0
        while True:
            trial = x + lam * dx
            try:
                if separate(model, *trial).classes != classes:
                    raise ClassificationChange(f"cycle types change at (E, c)={tuple(trial)}")
                r_new = actions(model, *trial) - J_target
            except (EmptyTorus, Degenerate):
                r_new = None
            if r_new is not None and (np.max(np.abs(r_new)) < np.max(np.abs(r)) or lam < 1e-3):
                break
            lam *= 0.5
            if lam < 1e-6:
                raise NoConvergence(f"line search failed near (E, c)={tuple(x)}")
        x, r = trial, r_new
        if np.max(np.abs(lam * dx)) <= step_tol or np.max(np.abs(r)) <= 1e-15:
            break
    else:
        raise NoConvergence(f"no convergence in {max_iter} iterations, residual {np.max(np.abs(r)):.3g}")
    if np.max(np.abs(r)) > res_tol:
        raise NoConvergence(f"action residual {np.max(np.abs(r)):.3g} above {res_tol}")
    return float(x[0]), float(x[1])


def center_params(model: Liouville, E: float, sep_const: float, h: float, delta: float = 0.5, C0: float = 1.0,
                  maslov: tuple[int, int] | None = None) -> QuantizeParams:
    """Parameters centred on the actions of the torus ``(E, sep_const)``."""
    I = actions(model, E, sep_const)
    if maslov is None:
        maslov = maslov_index(separate(model, E, sep_const).classes)
    return QuantizeParams(h, delta, C0, tuple(int(m) for m in maslov), (float(I[0]), float(I[1])))


def predict_spectrum(model: Liouville, params: QuantizeParams, seed: tuple[float, float]) -> Prediction:
    """Predicted eigenvalues ``E_k(h)`` for every lattice point in the window.

    ``seed`` is the ``(E, c)`` of the centre torus; each inversion starts
    from its linear extrapolation. Points whose inversion fails (separatrix
    crossing, no convergence) are kept in ``dropped`` with a status string.
    """
    ks = enumerate_lattice(params)
    seed = np.asarray(seed, dtype=float)
    I0 = actions(model, *seed)
    jinv = np.linalg.inv(action_jacobian(model, *seed))
    m = np.asarray(params.maslov_index, dtype=float)
    good, bad = [], []
    for k in ks:
        Jp = params.h * (np.asarray(k, dtype=float) + m / 4.0)
        pt = BSMLatticePoint(k, Jp)
        guess = seed + jinv @ (Jp - I0)
        try:
            try:
                E, c = invert_actions(model, Jp, guess)
            except (NoConvergence, ClassificationChange, EmptyTorus, Degenerate):
                E, c = invert_actions(model, Jp, seed)
            pt.E, pt.sep_const = E, c
            pt.residual = float(np.max(np.abs(actions(model, E, c) - Jp)))
            good.append(pt)
        except (NoConvergence, ClassificationChange, SingularJacobian, EmptyTorus, Degenerate) as exc:
            pt.status = type(exc).__name__
            bad.append(pt)
    good.sort(key=lambda p: (p.E, p.k))
    return Prediction(params, float(seed[0]), good, bad)
