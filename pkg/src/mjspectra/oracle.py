"""Direct spectral oracles.

The Liouville operator is discretized as the generalized eigenproblem
``-h² Δψ = λ (u + v) ψ`` in the Fourier basis ``e^{i k·x}``, ``|k_i| <= M``.
Both the stiffness ``A = h²|k|²`` and the mass ``B = U ⊗ I + I ⊗ V`` are
Kronecker sums of one-dimensional matrices, so for any shift ``σ`` the
inertia of ``A - σB`` follows from two small symmetric eigenproblems. That
count certifies that a window was solved completely.

When ``u`` and ``v`` are even the basis splits into four parity sectors
(cos/sin in each angle); sectors are solved separately so that exact
symmetry degeneracies never meet inside one Krylov space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import NotConverged, NotPositive, TooFewEigenvalues
from .models import Liouville
from .trig import TrigSeries

DENSE_MAX = 4000
SLICE_MAX = 60
RESIDUAL_TOL = 1e-8
CLUSTER_RTOL = 1e-10
EDGE_PAD = 1e-9          # window padding for the solve and the inertia count


# --- one-dimensional building blocks ----------------------------------------

@dataclass(frozen=True)
class Block1D:
    """Basis of one angle: labels, wavenumbers, weight matrix, map to ``e^{ikx}`` coefficients."""

    label: str
    k: np.ndarray
    W: np.ndarray
    to_exp: np.ndarray        # (2M+1, n) complex

    @property
    def size(self) -> int:
        return len(self.k)


def _quad_matrix(series: TrigSeries, basis: np.ndarray, M: int) -> np.ndarray:
    """Gram-type matrix ``mean_x φ_j(x) w(x) φ_k(x)`` (exact on a fine enough grid)."""
    n = 2 * (2 * M + series.degree) + 8
    x = 2 * np.pi * np.arange(n) / n
    Phi = basis(x)                     # (n, m)
    return (Phi * series(x)[:, None]).T @ Phi / n


def blocks_1d(series: TrigSeries, M: int, split: bool) -> list[Block1D]:
    """Parity blocks (cos, sin) for an even weight, or the full exponential block."""
    full = np.arange(-M, M + 1)
    if split:
        kc = np.arange(0, M + 1)
        ks = np.arange(1, M + 1)

        def cos_basis(x):
            out = np.cos(np.multiply.outer(x, kc)) * math.sqrt(2.0)
            out[:, 0] = 1.0
            return out

        def sin_basis(x):
            return np.sin(np.multiply.outer(x, ks)) * math.sqrt(2.0)

        Tc = np.zeros((2 * M + 1, len(kc)), complex)
        Tc[M, 0] = 1.0
        Ts = np.zeros((2 * M + 1, len(ks)), complex)
        for j, k in enumerate(kc[1:], start=1):
            Tc[M + k, j] = Tc[M - k, j] = 1 / math.sqrt(2.0)
        for j, k in enumerate(ks):
            Ts[M + k, j] = -1j / math.sqrt(2.0)
            Ts[M - k, j] = 1j / math.sqrt(2.0)
        return [Block1D("c", kc, _quad_matrix(series, cos_basis, M), Tc),
                Block1D("s", ks, _quad_matrix(series, sin_basis, M), Ts)]
    hat = np.array([series.fourier(m) for m in range(-2 * M, 2 * M + 1)])
    W = hat[(full[:, None] - full[None, :]) + 2 * M]
    return [Block1D("e", full, W, np.eye(2 * M + 1, dtype=complex))]


# --- problem ----------------------------------------------------------------

@dataclass
class Sector:
    """One parity sector: ``A = h²(K1² ⊕ K2²)``, ``B = U ⊕ V`` (Kronecker sums)."""

    name: str
    b1: Block1D
    b2: Block1D
    h: float

    @property
    def size(self) -> int:
        return self.b1.size * self.b2.size

    @property
    def real(self) -> bool:
        return self.b1.label != "e" and self.b2.label != "e"

    def matrices(self, sparse: bool):
        h2 = self.h ** 2
        a = h2 * (np.add.outer(self.b1.k.astype(float) ** 2, self.b2.k.astype(float) ** 2)).ravel()
        n1, n2 = self.b1.size, self.b2.size
        U, V = self.b1.W, self.b2.W
        if not self.real:
            U, V = U.astype(complex), V.astype(complex)
        if sparse:
            Us = sp.csr_matrix(np.where(np.abs(U) > 1e-15, U, 0))
            Vs = sp.csr_matrix(np.where(np.abs(V) > 1e-15, V, 0))
            B = (sp.kron(Us, sp.identity(n2)) + sp.kron(sp.identity(n1), Vs)).tocsc()
            return sp.diags(a).tocsc(), B
        B = np.kron(U, np.eye(n2)) + np.kron(np.eye(n1), V)
        return np.diag(a), B

    def count_below(self, sigma: float) -> int:
        """Number of eigenvalues ``< sigma`` (inertia of ``A - σB`` via its Kronecker sum)."""
        h2 = self.h ** 2
        e1 = np.linalg.eigvalsh(np.diag(h2 * self.b1.k.astype(float) ** 2) - sigma * self.b1.W)
        e2 = np.sort(np.linalg.eigvalsh(np.diag(h2 * self.b2.k.astype(float) ** 2) - sigma * self.b2.W))
        return int(sum(np.searchsorted(e2, -a, side="left") for a in e1))

    def shifted_inverse(self, sigma: float) -> LinearOperator:
        """``(A - σB)^{-1}`` applied through the eigenbases of the two 1-D factors."""
        h2 = self.h ** 2
        d1, Q1 = np.linalg.eigh(np.diag(h2 * self.b1.k.astype(float) ** 2) - sigma * self.b1.W)
        d2, Q2 = np.linalg.eigh(np.diag(h2 * self.b2.k.astype(float) ** 2) - sigma * self.b2.W)
        inv = 1.0 / np.add.outer(d1, d2)
        n1, n2 = len(d1), len(d2)
        Q2h = Q2.conj()

        def apply(x):
            X = np.asarray(x).reshape(n1, n2)
            Y = Q1.conj().T @ X @ Q2h
            return (Q1 @ (Y * inv) @ Q2.T).ravel()

        dtype = float if self.real else complex
        return LinearOperator((n1 * n2, n1 * n2), matvec=apply, dtype=dtype)

    def to_exp(self, vecs: np.ndarray) -> np.ndarray:
        """Sector coefficient vectors -> flattened ``(2M+1)²`` exponential coefficients."""
        n1, n2 = self.b1.size, self.b2.size
        out = []
        for v in vecs.T:
            c = self.b1.to_exp @ v.reshape(n1, n2) @ self.b2.to_exp.T
            out.append(c.ravel())
        return np.array(out).T


@dataclass
class GalerkinProblem:
    model: Liouville
    h: float
    M: int
    sectors: list[Sector]

    @property
    def dim(self) -> int:
        return sum(s.size for s in self.sectors)

    def min_mass_eigenvalue(self) -> float:
        """Smallest eigenvalue of ``B`` (the sum of the 1-D minima)."""
        return min(float(np.linalg.eigvalsh(s.b1.W)[0] + np.linalg.eigvalsh(s.b2.W)[0]) for s in self.sectors)

    def full_matrices(self):
        """Dense ``A`` and ``B`` in the full exponential basis (small ``M`` only)."""
        b1 = blocks_1d(self.model.u, self.M, False)[0]
        b2 = blocks_1d(self.model.v, self.M, False)[0]
        return Sector("full", b1, b2, self.h).matrices(sparse=False)


def assemble(model: Liouville, h: float, M: int, split: bool | None = None) -> GalerkinProblem:
    """Fourier-Galerkin discretization of ``-h²Δψ = λ(u+v)ψ`` with ``|k_i| <= M``.

    Raises
    ------
    NotPositive
        If the mass matrix is not positive definite.
    """
    if M < model.u.degree + model.v.degree + 8:
        raise ValueError(f"mode cutoff M={M} below degree(u)+degree(v)+8")
    if split is None:
        split = model.u.is_even() and model.v.is_even()
    if split and not (model.u.is_even() and model.v.is_even()):
        raise ValueError("parity sectors need even u and v")
    bl1 = blocks_1d(model.u, M, split)
    bl2 = blocks_1d(model.v, M, split)
    sectors = [Sector(a.label + b.label, a, b, h) for a in bl1 for b in bl2]
    prob = GalerkinProblem(model, float(h), int(M), sectors)
    if prob.min_mass_eigenvalue() <= 0.0:
        raise NotPositive("mass matrix B is not positive definite")
    return prob


def auto_cutoff(model: Liouville, h: float, lam_max: float, pad: int = 24) -> int:
    """Mode cutoff: classical momentum bound ``sqrt(λ max(u+v))/h`` plus a decay pad."""
    wmax = model.u.grid_max() + model.v.grid_max()
    return int(math.ceil(math.sqrt(max(lam_max, 0.0) * wmax) / h)) + pad + 2 * (model.u.degree + model.v.degree)


# --- window solves -----------------------------------------------------------

@dataclass
class SpectrumWindow:
    h: float
    delta: float
    center: float
    halfwidth: float
    eigenvalues: np.ndarray
    sectors: list[str] = field(default_factory=list)
    residual: float = 0.0
    vectors: np.ndarray | None = None
    method: str = ""

    @property
    def lo(self) -> float:
        return self.center - self.halfwidth

    @property
    def hi(self) -> float:
        return self.center + self.halfwidth

    @property
    def count(self) -> int:
        return len(self.eigenvalues)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.eigenvalues)

    def nearest_gaps(self) -> np.ndarray:
        lam = self.eigenvalues
        prev = np.concatenate([[np.inf], np.diff(lam)])
        nxt = np.concatenate([np.diff(lam), [np.inf]])
        return np.minimum(prev, nxt)

    def multiplicities(self, rtol: float = CLUSTER_RTOL) -> list[tuple[float, int]]:
        out: list[tuple[float, int]] = []
        for lam in self.eigenvalues:
            if out and abs(lam - out[-1][0]) <= rtol * max(1.0, abs(lam)):
                out[-1] = (out[-1][0], out[-1][1] + 1)
            else:
                out.append((float(lam), 1))
        return out

    def rows(self):
        lam = self.eigenvalues
        prev = np.concatenate([[np.nan], np.diff(lam)])
        nxt = np.concatenate([np.diff(lam), [np.nan]])
        return [[j, lam[j], prev[j], nxt[j]] for j in range(len(lam))]

    def to_csv(self, path, config_hash=None):
        from .io import write_csv
        write_csv(path, ["j", "lambda", "gap_prev", "gap_next"], self.rows(), config_hash)


def _residuals(A, B, lam, vecs) -> float:
    if len(lam) == 0:
        return 0.0
    AV = A @ vecs
    BV = B @ vecs
    r = np.linalg.norm(AV - BV * lam[None, :], axis=0) / np.linalg.norm(BV, axis=0)
    return float(r.max())


def _solve_dense(sec: Sector, lo: float, hi: float, keep: bool):
    A, B = sec.matrices(sparse=False)
    lam, vec = sla.eigh(A, B, subset_by_value=(lo, hi))
    return lam, vec, _residuals(A, B, lam, vec)


def _slices(sec: Sector, lo: float, hi: float, total: int) -> list[tuple[float, float, int]]:
    """Split ``[lo, hi)`` into pieces holding at most ``SLICE_MAX`` eigenvalues each."""
    out = []
    stack = [(lo, hi, total)]
    while stack:
        a, b, n = stack.pop()
        if n <= SLICE_MAX or b - a < 1e-12:
            if n:
                out.append((a, b, n))
            continue
        m = 0.5 * (a + b)
        nl = sec.count_below(m) - sec.count_below(a)
        stack.append((m, b, n - nl))
        stack.append((a, m, nl))
    return sorted(out)


def _solve_shift_invert(sec: Sector, lo: float, hi: float, keep: bool):
    A, B = sec.matrices(sparse=True)
    n_lo = sec.count_below(lo)
    total = sec.count_below(hi) - n_lo
    lams, vecs, res = [], [], 0.0
    for a, b, n in _slices(sec, lo, hi, total):
        sigma = 0.5 * (a + b)
        nev = min(n + max(8, n // 5), sec.size - 2)
        opinv = sec.shifted_inverse(sigma)
        for _attempt in range(4):
            lam, vec = eigsh(A, k=nev, M=B, sigma=sigma, which="LM", tol=1e-13, OPinv=opinv)
            inside = (lam >= a) & (lam < b)
            if inside.sum() >= n:
                break
            nev = min(int(nev * 1.5) + 8, sec.size - 2)
        else:
            raise NotConverged(f"sector {sec.name}: found {inside.sum()} of {n} eigenvalues in [{a:.6g}, {b:.6g})")
        lam, vec = lam[inside], vec[:, inside]
        res = max(res, _residuals(A, B, lam, vec))
        lams.append(lam)
        if keep:
            vecs.append(vec)
    lam = np.concatenate(lams) if lams else np.empty(0)
    vec = np.concatenate(vecs, axis=1) if keep and vecs else None
    order = np.argsort(lam)
    return lam[order], (vec[:, order] if vec is not None else None), res


def solve_window(problem: GalerkinProblem, E: float, halfwidth: float, method: str = "auto",
                 keep_vectors: bool = False, delta: float = float("nan")) -> SpectrumWindow:
    """All generalized eigenvalues in ``[E - halfwidth, E + halfwidth]``, with multiplicity.

    ``method`` is ``"dense"``, ``"shift-invert"`` or ``"auto"`` (dense when the
    sector dimension is at most 4000). Every sector's count is checked
    against the inertia of ``A - σB`` and every pair against the residual
    bound 1e-8.

    Raises
    ------
    NotConverged
    """
    lo, hi = E - halfwidth, E + halfwidth
    # solve on a slightly padded interval so that eigenvalues sitting on an edge
    # are counted the same way by the solver and by the inertia check
    pad = EDGE_PAD * max(1.0, abs(lo), abs(hi))
    lams, names, vecs, res = [], [], [], 0.0
    methods = set()
    for sec in problem.sectors:
        use = method if method != "auto" else ("dense" if sec.size <= DENSE_MAX else "shift-invert")
        methods.add(use)
        if use == "dense":
            lam, vec, r = _solve_dense(sec, lo - pad, hi + pad, keep_vectors)
        elif use == "shift-invert":
            lam, vec, r = _solve_shift_invert(sec, lo - pad, hi + pad, keep_vectors)
        else:
            raise ValueError(f"unknown method {method!r}")
        expected = sec.count_below(hi + pad) - sec.count_below(lo - pad)
        if len(lam) != expected:
            raise NotConverged(f"sector {sec.name}: {len(lam)} eigenvalues found, inertia count {expected}")
        if r > RESIDUAL_TOL:
            raise NotConverged(f"sector {sec.name}: eigenpair residual {r:.3g} above {RESIDUAL_TOL:g}")
        tiny = 1e-12 * max(1.0, abs(lo), abs(hi))
        inside = (lam >= lo - tiny) & (lam <= hi + tiny)
        lam = lam[inside]
        vec = vec[:, inside] if vec is not None else None
        res = max(res, r)
        lams.append(lam)
        names += [sec.name] * len(lam)
        if keep_vectors and len(lam):
            vecs.append(sec.to_exp(vec))
    lam = np.concatenate(lams) if lams else np.empty(0)
    order = np.argsort(lam, kind="stable")
    vectors = None
    if keep_vectors:
        vectors = np.concatenate(vecs, axis=1)[:, order] if vecs else np.empty(((2 * problem.M + 1) ** 2, 0))
    return SpectrumWindow(problem.h, delta, float(E), float(halfwidth), lam[order],
                          [names[i] for i in order], res, vectors, "+".join(sorted(methods)))


# --- comparisons and statistics ----------------------------------------------

@dataclass
class MatchReport:
    pairs: list[tuple[int, int, float]]       # (predicted index, computed index, |difference|)
    unmatched_predicted: int
    unmatched_computed: int

    @property
    def max_error(self) -> float:
        return max((p[2] for p in self.pairs), default=float("nan"))

    @property
    def errors(self) -> np.ndarray:
        return np.array([p[2] for p in self.pairs])

    def to_dict(self, predicted=None, computed=None, config_hash=None) -> dict:
        recs = []
        for i, j, d in self.pairs:
            rec = {"predicted_index": i, "computed_index": j, "error": d}
            if predicted is not None:
                rec["predicted"] = float(predicted[i])
            if computed is not None:
                rec["computed"] = float(computed[j])
            recs.append(rec)
        out = {"max_error": self.max_error, "n_pairs": len(self.pairs),
               "unmatched_predicted": self.unmatched_predicted, "unmatched_computed": self.unmatched_computed,
               "pairs": recs}
        if config_hash is not None:
            out["config_hash"] = config_hash
        return out


def match_spectra(predicted, computed, tol: float | None = None, candidates: int = 8) -> MatchReport:
    """Greedy nearest-neighbour pairing without replacement.

    All candidate pairs (each prediction with its ``candidates`` nearest
    computed values) are taken in order of increasing distance; a pair is
    accepted if neither side is used yet and the distance is within ``tol``.
    """
    p = np.asarray(predicted, dtype=float)
    c = np.asarray(computed.eigenvalues if isinstance(computed, SpectrumWindow) else computed, dtype=float)
    if len(p) == 0 or len(c) == 0:
        return MatchReport([], len(p), len(c))
    order = np.argsort(c)
    cs = c[order]
    cand = []
    for i, val in enumerate(p):
        j = np.searchsorted(cs, val)
        for jj in range(max(0, j - candidates), min(len(cs), j + candidates)):
            cand.append((abs(cs[jj] - val), i, int(order[jj])))
    cand.sort()
    used_p, used_c, pairs = set(), set(), []
    for d, i, j in cand:
        if i in used_p or j in used_c or (tol is not None and d > tol):
            continue
        used_p.add(i)
        used_c.add(j)
        pairs.append((i, j, float(d)))
    pairs.sort()
    return MatchReport(pairs, len(p) - len(pairs), len(c) - len(pairs))


@dataclass
class GapStatistics:
    fraction: float
    threshold: float
    count: int
    near_degenerate: np.ndarray
    bin_edges: np.ndarray
    histogram: np.ndarray

    def to_dict(self, config_hash=None) -> dict:
        out = {"fraction": self.fraction, "threshold": self.threshold, "count": self.count,
               "bin_edges": self.bin_edges.tolist(), "histogram": self.histogram.tolist()}
        if config_hash is not None:
            out["config_hash"] = config_hash
        return out


def gap_statistics(window, threshold: float, bins_per_decade: int = 2) -> GapStatistics:
    """Fraction of eigenvalues whose nearest neighbour lies within ``threshold``.

    The histogram counts consecutive gaps on log-spaced bins from 1e-16 up
    to the largest gap (zero gaps fall in the first bin).

    Raises
    ------
    TooFewEigenvalues
    """
    lam = np.sort(np.asarray(window.eigenvalues if isinstance(window, SpectrumWindow) else window, dtype=float))
    if len(lam) < 2:
        raise TooFewEigenvalues(f"need at least 2 eigenvalues, got {len(lam)}")
    gaps = np.diff(lam)
    nearest = np.minimum(np.concatenate([[np.inf], gaps]), np.concatenate([gaps, [np.inf]]))
    near = nearest <= threshold
    top = max(float(gaps.max()), 1e-15)
    decades = math.ceil(math.log10(top) + 16)
    edges = np.logspace(-16, -16 + decades, decades * bins_per_decade + 1)
    hist, _ = np.histogram(np.clip(gaps, 1e-16, None), bins=edges)
    return GapStatistics(float(near.mean()), float(threshold), len(lam), np.nonzero(near)[0], edges, hist)


# --- one-dimensional Larmor operator -----------------------------------------

def larmor_spectrum(omega1: TrigSeries, k1: float, h: float, M: int = 128, cutoff: float | None = None,
                    count: int | None = None) -> np.ndarray:
    """Eigenvalues of ``½(hD)² + k1 ω1(x)`` on the circle, Fourier basis ``|m| <= M``.

    Returns all eigenvalues below ``cutoff`` (default: the lowest ``M``, the
    part of the spectrum resolved by the basis).
    """
    if M < 64:
        raise ValueError("M must be at least 64")

    def solve(MM):
        m = np.arange(-MM, MM + 1)
        hat = np.array([omega1.fourier(j) for j in range(-2 * MM, 2 * MM + 1)])
        H = k1 * hat[(m[:, None] - m[None, :]) + 2 * MM] + np.diag(0.5 * (h * m) ** 2)
        return sla.eigvalsh(H)

    lam = solve(M)
    lam = lam[lam < cutoff] if cutoff is not None else lam[: (count if count is not None else M)]
    fine = solve(M + 16)[: len(lam)]
    drift = float(np.max(np.abs(fine - lam) / np.maximum(1.0, np.abs(lam)), initial=0.0))
    if drift > 1e-9:
        raise NotConverged(f"Larmor eigenvalues move by {drift:.3g} under M -> M+16; raise M")
    return lam


# --- time reversal -------------------------------------------------------------

def reversal_matrix(M: int) -> np.ndarray:
    """Index permutation of ``k -> -k`` on the flattened ``(2M+1)²`` exponential basis."""
    n = 2 * M + 1
    idx = np.arange(n * n).reshape(n, n)
    return idx[::-1, ::-1].ravel()


def apply_reversal(vecs: np.ndarray, M: int) -> np.ndarray:
    """``Γψ = conj(ψ)``: coefficient ``c_k -> conj(c_{-k})``."""
    return np.conj(vecs[reversal_matrix(M)])


@dataclass
class ReversalReport:
    pairs: list[tuple[int, int, float, float]]   # (i, j, splitting, overlap)
    unpaired: list[int]

    @property
    def splittings(self) -> np.ndarray:
        return np.array([p[2] for p in self.pairs])


def _canonical_clusters(window: SpectrumWindow, Vn: np.ndarray, Pn: np.ndarray):
    """Rotate exactly degenerate clusters into the 2-planes of the polarization.

    The solver returns an arbitrary basis of a degenerate eigenspace. For real
    eigenfunctions the compressed polarization ``Vᴴ P V`` is real
    antisymmetric; its real Schur form is block diagonal with 2x2 blocks,
    whose columns are the reversal partners.
    """
    Vn, Pn = Vn.copy(), Pn.copy()
    lam = window.eigenvalues
    start = 0
    for j in range(1, len(lam) + 1):
        if j < len(lam) and abs(lam[j] - lam[start]) <= CLUSTER_RTOL * max(1.0, abs(lam[j])):
            continue
        if j - start > 2:
            idx = slice(start, j)
            Q = Vn[:, idx].conj().T @ Pn[:, idx]
            Q = 0.5 * (Q.real - Q.real.T)
            _, Z = sla.schur(Q, output="real")
            Vn[:, idx] = Vn[:, idx] @ Z
            Pn[:, idx] = Pn[:, idx] @ Z
        start = j
    return Vn, Pn


def reversal_pairing(window: SpectrumWindow, M: int, min_overlap: float = 0.5) -> ReversalReport:
    """Pair eigenstates related by time reversal and report their splittings.

    Real eigenvectors are invariant under ``Γ``; the state carried by the
    reversed torus is recovered with the polarization ``e_k -> -i sgn(k·n) e_k``
    (``n = (1, √2)``), which swaps the cos- and sin-type members of a
    ``Γ``-pair. Each state is paired with the other eigenvector of largest
    overlap with its polarized image (greedy, without replacement).
    """
    if window.vectors is None:
        raise ValueError("reversal pairing needs eigenvectors (solve_window(keep_vectors=True))")
    V = window.vectors
    n = 2 * M + 1
    k1, k2 = np.meshgrid(np.arange(-M, M + 1), np.arange(-M, M + 1), indexing="ij")
    sgn = np.sign(k1 + math.sqrt(2.0) * k2).ravel()
    P = -1j * sgn[:, None] * V
    Vn = V / np.linalg.norm(V, axis=0)
    Pn = P / np.maximum(np.linalg.norm(P, axis=0), 1e-300)
    Vn, Pn = _canonical_clusters(window, Vn, Pn)
    O = np.abs(Vn.conj().T @ Pn)
    np.fill_diagonal(O, 0.0)
    lam = window.eigenvalues
    cand = sorted(((-O[i, j], i, j) for i in range(len(lam)) for j in range(i + 1, len(lam))
                   if max(O[i, j], O[j, i]) >= min_overlap), key=lambda t: t[0])
    used, pairs = set(), []
    for negov, i, j in cand:
        if i in used or j in used:
            continue
        used.update((i, j))
        pairs.append((i, j, float(abs(lam[i] - lam[j])), float(-negov)))
    unpaired = [i for i in range(len(lam)) if i not in used]
    return ReversalReport(sorted(pairs), unpaired)
