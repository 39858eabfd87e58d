"""Concrete 2-D Hamiltonian symbols and the Maupertuis-Jacobi pairing constructions.

Variants
--------
``Liouville``      (p1² + p2²) / (u(x1) + v(x2))
``Mechanical``     ½ g^{ij}(x) p_i p_j + V(x)
``JacobiMetric``   g^{ij}(x) p_i p_j / (2 (E - V(x)))
``WaterWave``      |p| (1 + μ(x) |p|²) tanh(D(x) |p|)
``KatokRanders``   sqrt(p2² + p1²/cos² q2) + katok_alpha p1   (equatorial chart of S²)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np

from . import _kernels as K
from .errors import ChartViolation, ConfigError, Degenerate, EnergyTooLow, NoConvergence, OutOfRange
from .trig import Field2D, TrigSeries

TWO_PI = 2.0 * np.pi
KATOK_GUARD = 0.5 * np.pi - 0.05


@dataclass(frozen=True)
class PhasePoint:
    """Position ``x`` (radians) and momentum ``p``.

    On the torus both angles are reduced to [0, 2π); on the sphere chart
    only the longitude q1 is, and |q2| < π/2 is required.
    """

    x: tuple[float, float]
    p: tuple[float, float]
    chart: str = "torus"

    def __post_init__(self):
        x1, x2 = (float(v) for v in self.x)
        p = tuple(float(v) for v in self.p)
        if self.chart == "sphere":
            if not abs(x2) < 0.5 * np.pi:
                raise ChartViolation(f"latitude q2={x2} outside the equatorial chart")
            x = (x1 % TWO_PI, x2)
        else:
            x = (x1 % TWO_PI, x2 % TWO_PI)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    def as_array(self) -> np.ndarray:
        return np.array([*self.x, *self.p])

    @classmethod
    def from_array(cls, y, chart: str = "torus") -> "PhasePoint":
        return cls((y[0], y[1]), (y[2], y[3]), chart)


def _state(pt) -> np.ndarray:
    if isinstance(pt, PhasePoint):
        return pt.as_array()
    y = np.asarray(pt, dtype=float).reshape(4)
    return y


class HamiltonianModel:
    """Common evaluation machinery; subclasses supply the packed kernel data."""

    variant = "abstract"
    kind = -1
    guard = 0.0
    chart = "torus"
    even_in_p = True

    @cached_property
    def packed(self) -> tuple[np.ndarray, np.ndarray]:
        return self._pack()

    def _pack(self):  # pragma: no cover - abstract
        raise NotImplementedError

    def check_point(self, y: np.ndarray, need_grad: bool = False) -> None:
        pass

    def energy(self, pt) -> float:
        y = _state(pt)
        self.check_point(y)
        C, S = self.packed
        return float(K.energy(self.kind, y, C, S))

    def gradient(self, pt) -> tuple[np.ndarray, np.ndarray]:
        y = _state(pt)
        self.check_point(y, need_grad=True)
        C, S = self.packed
        out = np.empty(4)
        K.grad(self.kind, y, C, S, out)
        return out[:2].copy(), out[2:].copy()

    def vector_field(self, pt) -> np.ndarray:
        """Hamiltonian vector field ``(dH/dp, -dH/dx)``."""
        dx, dp = self.gradient(pt)
        return np.concatenate([dp, -dx])

    def energies(self, ys: np.ndarray) -> np.ndarray:
        C, S = self.packed
        return K.energies(self.kind, C, S, np.ascontiguousarray(ys, dtype=float))

    def vector_fields(self, ys: np.ndarray) -> np.ndarray:
        """``X_H`` at each row of an ``(n, 4)`` state array (no chart checks)."""
        C, S = self.packed
        return K.vector_fields(self.kind, C, S, np.ascontiguousarray(ys, dtype=float).reshape(-1, 4))

    def to_config(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError


def _pack_series(series: list[TrigSeries]) -> np.ndarray:
    deg = max(s.degree for s in series)
    return np.ascontiguousarray(np.vstack([s.packed(deg) for s in series]))


@dataclass(frozen=True)
class Liouville(HamiltonianModel):
    u: TrigSeries
    v: TrigSeries = TrigSeries()

    variant = "liouville"
    kind = K.LIOUVILLE

    def __post_init__(self):
        if self.u.grid_min() + self.v.grid_min() <= 0.0:
            raise Degenerate("Liouville metric requires u + v > 0 on the grid")

    def _pack(self):
        return _pack_series([self.u, self.v]), np.zeros(1)

    def check_point(self, y, need_grad=False):
        if self.u(y[0]) + self.v(y[1]) <= 0.0:
            raise Degenerate("u + v <= 0 at the evaluation point")

    def conformal(self, x1, x2):
        """Conformal factor 1/(u+v)."""
        return 1.0 / (self.u(x1) + self.v(x2))

    def swapped(self) -> "Liouville":
        return Liouville(self.v, self.u)

    def to_config(self):
        return {"variant": self.variant, "u": self.u.to_dict(), "v": self.v.to_dict()}


@dataclass(frozen=True)
class Mechanical(HamiltonianModel):
    V: Field2D = Field2D()
    g11: Field2D = Field2D.constant(1.0)
    g12: Field2D = Field2D()
    g22: Field2D = Field2D.constant(1.0)

    variant = "mechanical"
    kind = K.MECHANICAL

    def __post_init__(self):
        g = np.linspace(0, TWO_PI, 128, endpoint=False)
        a, b, c = (f(g[:, None], g[None, :]) for f in (self.g11, self.g12, self.g22))
        if np.any(a <= 0) or np.any(a * c - b * b <= 0):
            raise Degenerate("inverse metric g^{ij} must be positive definite")

    def _pack(self):
        fields = [self.g11, self.g12, self.g22, self.V]
        return _pack_series([s for f in fields for s in (f.f1, f.f2)]), np.zeros(1)

    @property
    def flat_metric(self) -> bool:
        return (self.g11 == Field2D.constant(1.0) and self.g22 == Field2D.constant(1.0)
                and not any(self.g12.f1.a + self.g12.f1.b + self.g12.f2.a + self.g12.f2.b))

    def to_config(self):
        return {"variant": self.variant, "V": self.V.to_dict(),
                "metric": {"g11": self.g11.to_dict(), "g12": self.g12.to_dict(), "g22": self.g22.to_dict()}}


@dataclass(frozen=True)
class JacobiMetric(HamiltonianModel):
    base: Mechanical
    E: float

    variant = "jacobi"
    kind = K.JACOBI

    def __post_init__(self):
        vmax = self.base.V.grid_max()
        if not self.E > vmax + 1e-6:
            raise EnergyTooLow(f"E={self.E} must exceed max V={vmax:.6g} by 1e-6")

    def _pack(self):
        C, _ = self.base.packed
        return C, np.array([float(self.E)])

    def check_point(self, y, need_grad=False):
        if self.E - self.base.V(y[0], y[1]) <= 0.0:
            raise Degenerate("E - V <= 0 at the evaluation point")

    def as_liouville(self) -> Liouville:
        """Same symbol written as a Liouville metric (flat base metric only)."""
        if not self.base.flat_metric:
            raise ValueError("only a flat base metric yields a Liouville form")
        V = self.base.V
        u = TrigSeries.constant(self.E) - V.f1.scale(2.0)
        v = TrigSeries.constant(self.E) - V.f2.scale(2.0)
        return Liouville(u, v)

    def to_config(self):
        return {"variant": self.variant, "base": self.base.to_config(), "E": self.E}


@dataclass(frozen=True)
class MetricDepth:
    """Depth profile realizing the Liouville metric ``metric`` at energy ``E``.

    ``D = artanh(E / (r (1 + μ r²))) / r`` with ``r = sqrt(u + v)``.
    """

    metric: Liouville
    E: float

    def to_dict(self):
        return {"from_metric": self.metric.to_config(), "E": self.E}


@dataclass(frozen=True)
class WaterWave(HamiltonianModel):
    depth: Union[Field2D, MetricDepth]
    mu: Field2D = Field2D()

    variant = "waterwave"

    def __post_init__(self):
        if self.mu.grid_min() < 0.0:
            raise Degenerate("dispersion parameter mu must be nonnegative")
        if isinstance(self.depth, MetricDepth):
            g = np.linspace(0, TWO_PI, 256, endpoint=False)
            w = self.depth.metric.u(g)[:, None] + self.depth.metric.v(g)[None, :]
            r = np.sqrt(w)
            arg = self.depth.E / (r * (1.0 + self.mu(g[:, None], g[None, :]) * r * r))
            if np.any(arg >= 1.0) or np.any(arg <= 0.0):
                raise OutOfRange("no depth realizes this metric at the requested energy")
        elif self.depth.grid_min() <= 0.0:
            raise Degenerate("depth must be positive")

    @property
    def kind(self):
        return K.WATERWAVE_METRIC if isinstance(self.depth, MetricDepth) else K.WATERWAVE

    def _pack(self):
        if isinstance(self.depth, MetricDepth):
            m = self.depth.metric
            return _pack_series([m.u, m.v, self.mu.f1, self.mu.f2]), np.array([float(self.depth.E)])
        return _pack_series([self.depth.f1, self.depth.f2, self.mu.f1, self.mu.f2]), np.zeros(1)

    def depth_at(self, x1, x2):
        if isinstance(self.depth, MetricDepth):
            r = np.sqrt(self.depth.metric.u(x1) + self.depth.metric.v(x2))
            return np.arctanh(self.depth.E / (r * (1.0 + self.mu(x1, x2) * r * r))) / r
        return self.depth(x1, x2)

    def check_point(self, y, need_grad=False):
        if need_grad and math.hypot(y[2], y[3]) == 0.0:
            raise Degenerate("water-wave symbol is not differentiable at p = 0")

    def to_config(self):
        return {"variant": self.variant, "depth": self.depth.to_dict(), "mu": self.mu.to_dict()}


@dataclass(frozen=True)
class KatokRanders(HamiltonianModel):
    katok_alpha: float

    variant = "katok"
    kind = K.KATOK
    guard = KATOK_GUARD
    chart = "sphere"
    even_in_p = False

    def __post_init__(self):
        if not abs(self.katok_alpha) < 1.0:
            raise ValueError("katok_alpha must lie in (-1, 1)")

    def _pack(self):
        return np.zeros((1, 1)), np.array([float(self.katok_alpha)])

    def check_point(self, y, need_grad=False):
        if not abs(y[1]) < 0.5 * np.pi:
            raise ChartViolation(f"latitude q2={y[1]} outside the equatorial chart")
        if need_grad and y[2] == 0.0 and y[3] == 0.0:
            raise Degenerate("Randers symbol is not differentiable at p = 0")

    def equator_momentum(self, branch: int, energy: float = 1.0) -> float:
        """p1 of the equatorial orbit γ± at the given energy (branch +1 or -1)."""
        return energy / (1.0 + self.katok_alpha) if branch > 0 else -energy / (1.0 - self.katok_alpha)

    def to_config(self):
        return {"variant": self.variant, "katok_alpha": self.katok_alpha}


# --- module-level operations -------------------------------------------------

def eval(model: HamiltonianModel, pt) -> float:  # noqa: A001 - mirrors the symbol-evaluation name
    return model.energy(pt)


def grad(model: HamiltonianModel, pt) -> tuple[np.ndarray, np.ndarray]:
    return model.gradient(pt)


def liouville_integral(model: Liouville, pt) -> float:
    """Second integral ``F = (v p1² - u p2²) / (u + v)``."""
    y = _state(pt)
    model.check_point(y)
    u, v = model.u(y[0]), model.v(y[1])
    return float((v * y[2] ** 2 - u * y[3] ** 2) / (u + v))


def liouville_integral_array(model: Liouville, ys: np.ndarray) -> np.ndarray:
    u, v = model.u(ys[:, 0]), model.v(ys[:, 1])
    return (v * ys[:, 2] ** 2 - u * ys[:, 3] ** 2) / (u + v)


def _dispersion(r, D, mu):
    return r * (1.0 + mu * r * r) * np.tanh(D * r)


def _radius(D, mu, E, max_doublings: int = 200):
    """Vectorised positive root of ``r (1 + μ r²) tanh(D r) = E``."""
    D, mu, E = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (D, mu, E)))
    lo = np.zeros(D.shape)
    hi = np.maximum(E, 1.0).astype(float)
    for _ in range(max_doublings):
        short = _dispersion(hi, D, mu) < E
        if not short.any():
            break
        hi = np.where(short, 2.0 * hi, hi)
    else:
        raise NoConvergence("bracket expansion for the water-wave radius did not terminate")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = _dispersion(mid, D, mu) < E
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 1e-12 * np.maximum(1.0, hi)):
            break
    r = 0.5 * (lo + hi)
    for _ in range(3):
        th = np.tanh(D * r)
        f = r * (1.0 + mu * r * r) * th - E
        df = (1.0 + 3.0 * mu * r * r) * th + r * (1.0 + mu * r * r) * D * (1.0 - th * th)
        r = r - f / df
    return r


def waterwave_radius(model: WaterWave, x, E: float) -> float:
    """Fiber radius |p| of the energy surface {H = E} above position ``x``."""
    if not E > 0:
        raise ValueError("energy must be positive")
    x1, x2 = x
    return float(_radius(model.depth_at(x1, x2), model.mu(x1, x2), E))


def _grid(grid) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(grid, int):
        g = np.linspace(0.0, TWO_PI, grid, endpoint=False)
        return np.meshgrid(g, g, indexing="ij")
    if isinstance(grid, tuple) and len(grid) == 2 and np.ndim(grid[0]) == 2:
        return grid
    g1, g2 = grid
    return np.meshgrid(np.asarray(g1, float), np.asarray(g2, float), indexing="ij")


def depth_to_metric(model: WaterWave, E: float, grid) -> np.ndarray:
    """Conformal factor ``g(x, E) = 1 / r(x, E)²`` on the grid (int N or node arrays)."""
    X1, X2 = _grid(grid)
    D = model.depth_at(X1, X2)
    mu = model.mu(X1, X2) * np.ones_like(X1)
    try:
        r = _radius(D, mu, E)
    except NoConvergence as exc:
        bad = np.unravel_index(np.argmax(D), D.shape)
        raise NoConvergence(f"{exc} (grid node {bad})") from exc
    return 1.0 / (r * r)


def metric_to_depth(g, mu, E: float) -> np.ndarray:
    """Depth ``D = artanh(E / (r (1 + μ r²))) / r`` with ``r = 1/sqrt(g)``."""
    g = np.asarray(g, dtype=float)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), g.shape)
    r = 1.0 / np.sqrt(g)
    arg = E / (r * (1.0 + mu * r * r))
    bad = ~((arg > 0.0) & (arg < 1.0))
    if bad.any():
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise OutOfRange(f"artanh argument {arg[node]:.6g} outside (0, 1) at node {node}", node=node)
    return np.arctanh(arg) / r


def jacobi_from_mechanical(base: Mechanical, E: float) -> JacobiMetric:
    return JacobiMetric(base, float(E))


# --- configuration -----------------------------------------------------------

def model_from_config(cfg: dict) -> HamiltonianModel:
    """Build a model from its structured-config mapping (see README for the schema)."""
    if not isinstance(cfg, dict) or "variant" not in cfg:
        raise ConfigError("model: missing 'variant'")
    kind = str(cfg["variant"]).lower()
    try:
        if kind == "liouville":
            return Liouville(TrigSeries.from_dict(cfg.get("u", 1.0)), TrigSeries.from_dict(cfg.get("v", 0.0)))
        if kind == "mechanical":
            metric = cfg.get("metric", {})
            return Mechanical(
                Field2D.from_dict(cfg.get("V", 0.0)),
                Field2D.from_dict(metric.get("g11", 1.0)),
                Field2D.from_dict(metric.get("g12", 0.0)),
                Field2D.from_dict(metric.get("g22", 1.0)),
            )
        if kind == "jacobi":
            base = model_from_config({**cfg["base"], "variant": "mechanical"})
            return JacobiMetric(base, float(cfg["E"]))
        if kind == "waterwave":
            depth = cfg["depth"]
            if isinstance(depth, dict) and "from_metric" in depth:
                metric = model_from_config({**depth["from_metric"], "variant": "liouville"})
                depth = MetricDepth(metric, float(depth["E"]))
            else:
                depth = Field2D.from_dict(depth)
            return WaterWave(depth, Field2D.from_dict(cfg.get("mu", 0.0)))
        if kind in ("katok", "katokranders", "katok_randers"):
            return KatokRanders(float(cfg["katok_alpha"]))
    except ConfigError:
        raise
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"model: malformed {kind} definition ({exc})") from exc
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc
    raise ConfigError(f"model.variant: unknown variant {cfg['variant']!r}")
