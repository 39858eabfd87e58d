"""Truncated trigonometric series on the circle and additive fields on the torus."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

POSITIVITY_GRID = 4096


def _as_tuple(values) -> tuple[float, ...]:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class TrigSeries:
    """``f(x) = a[0] + sum_n a[n] cos(n x) + b[n-1] sin(n x)``, period 2π.

    ``a`` has length N+1 and ``b`` length N (padded with zeros if shorter).
    """

    a: tuple[float, ...] = (0.0,)
    b: tuple[float, ...] = ()
    positive: bool = field(init=False, compare=False)

    def __post_init__(self):
        a = _as_tuple(self.a) or (0.0,)
        b = _as_tuple(self.b) if len(self.b) else ()
        n = max(len(a) - 1, len(b))
        a = a + (0.0,) * (n + 1 - len(a))
        b = b + (0.0,) * (n - len(b))
        if not all(np.isfinite(a)) or not all(np.isfinite(b)):
            raise ValueError("TrigSeries coefficients must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "positive", bool(self.grid_min() > 0.0))

    @classmethod
    def constant(cls, value: float) -> "TrigSeries":
        return cls((value,))

    @classmethod
    def from_samples(cls, values: np.ndarray, degree: int | None = None, tol: float = 0.0) -> "TrigSeries":
        """Interpolate samples on the uniform grid ``2πj/n`` (coefficients below ``tol`` dropped)."""
        values = np.asarray(values, dtype=float)
        n = values.size
        c = np.fft.rfft(values) / n
        nmax = (n - 1) // 2 if degree is None else min(degree, (n - 1) // 2)
        a = np.empty(nmax + 1)
        b = np.empty(nmax)
        a[0] = c[0].real
        a[1:] = 2.0 * c[1 : nmax + 1].real
        b[:] = -2.0 * c[1 : nmax + 1].imag
        if tol > 0.0:
            big = np.nonzero((np.abs(a[1:]) > tol) | (np.abs(b) > tol))[0]
            last = big[-1] + 1 if big.size else 0
            a, b = a[: last + 1], b[:last]
        return cls(tuple(a), tuple(b))

    @property
    def degree(self) -> int:
        return len(self.b)

    def __call__(self, x):
        return self.deriv(x, 0)

    def deriv(self, x, order: int = 1):
        x = np.asarray(x, dtype=float)
        n = np.arange(1, self.degree + 1)
        out = np.zeros_like(x) + (self.a[0] if order == 0 else 0.0)
        if self.degree == 0:
            return out
        nx = np.multiply.outer(x, n)
        c, s = np.cos(nx), np.sin(nx)
        a, b = np.asarray(self.a[1:]), np.asarray(self.b)
        # d^k/dx^k of (a cos + b sin) cycles with period 4
        r = order % 4
        if r == 0:
            terms = a * c + b * s
        elif r == 1:
            terms = -a * s + b * c
        elif r == 2:
            terms = -(a * c + b * s)
        else:
            terms = a * s - b * c
        return out + terms @ (n.astype(float) ** order)

    def grid_min(self, npts: int = POSITIVITY_GRID) -> float:
        return float(np.min(self(np.linspace(0.0, 2 * np.pi, npts, endpoint=False))))

    def grid_max(self, npts: int = POSITIVITY_GRID) -> float:
        return float(np.max(self(np.linspace(0.0, 2 * np.pi, npts, endpoint=False))))

    def fourier(self, m: int) -> complex:
        """Complex Fourier coefficient ``f̂_m`` with ``f = Σ f̂_m e^{imx}``."""
        k = abs(m)
        if k == 0:
            return complex(self.a[0])
        if k > self.degree:
            return 0j
        a, b = self.a[k], self.b[k - 1]
        return complex(0.5 * a, -0.5 * b) if m > 0 else complex(0.5 * a, 0.5 * b)

    def is_even(self) -> bool:
        return not any(self.b)

    def packed(self, degree: int) -> np.ndarray:
        """Row ``[a0, a1..aN, b1..bN]`` zero-padded to ``degree``."""
        row = np.zeros(2 * degree + 1)
        n = self.degree
        row[: n + 1] = self.a
        row[degree + 1 : degree + 1 + n] = self.b
        return row

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return TrigSeries((self.a[0] + other,) + self.a[1:], self.b)
        n = max(self.degree, other.degree)
        pa = self.packed(n) + other.packed(n)
        return TrigSeries(tuple(pa[: n + 1]), tuple(pa[n + 1 :]))

    __radd__ = __add__

    def scale(self, factor: float) -> "TrigSeries":
        return TrigSeries(tuple(factor * v for v in self.a), tuple(factor * v for v in self.b))

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other if not isinstance(other, (int, float)) else -float(other))

    def to_dict(self) -> dict:
        return {"a": list(self.a), "b": list(self.b)}

    @classmethod
    def from_dict(cls, d) -> "TrigSeries":
        if isinstance(d, (int, float)):
            return cls.constant(float(d))
        if not isinstance(d, dict) or set(d) - {"a", "b"}:
            raise ValueError(f"trig series must be a number or a mapping with keys a, b; got {d!r}")
        return cls(tuple(d.get("a", (0.0,))), tuple(d.get("b", ())))


@dataclass(frozen=True)
class Field2D:
    """Additive torus field ``F(x1, x2) = f1(x1) + f2(x2)``."""

    f1: TrigSeries = TrigSeries()
    f2: TrigSeries = TrigSeries()

    @classmethod
    def constant(cls, value: float) -> "Field2D":
        return cls(TrigSeries.constant(value), TrigSeries())

    def __call__(self, x1, x2):
        return self.f1(x1) + self.f2(x2)

    def gradient(self, x1, x2):
        return self.f1.deriv(x1), self.f2.deriv(x2)

    @property
    def degree(self) -> int:
        return max(self.f1.degree, self.f2.degree)

    def grid_values(self, npts: int = 256) -> np.ndarray:
        g = np.linspace(0.0, 2 * np.pi, npts, endpoint=False)
        return self.f1(g)[:, None] + self.f2(g)[None, :]

    def grid_min(self) -> float:
        return self.f1.grid_min() + self.f2.grid_min()

    def grid_max(self) -> float:
        return self.f1.grid_max() + self.f2.grid_max()

    def is_even(self) -> bool:
        return self.f1.is_even() and self.f2.is_even()

    def to_dict(self) -> dict:
        return {"x1": self.f1.to_dict(), "x2": self.f2.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "Field2D":
        if isinstance(d, (int, float)):
            return cls.constant(float(d))
        if not isinstance(d, dict) or set(d) - {"x1", "x2"}:
            raise ValueError(f"torus field must be a number or a mapping with keys x1, x2; got {d!r}")
        return cls(TrigSeries.from_dict(d.get("x1", 0.0)), TrigSeries.from_dict(d.get("x2", 0.0)))
