"""SL(2,R) cocycles: products, Lyapunov exponents, Oseledets splittings.

Finite bases are the exact regime: every cycle is a periodic orbit, so the
upper exponent is (1/p) log of the spectral radius of the cycle product and
the splitting consists of its eigen-directions.  All long products are
accumulated with periodic renormalization (norm factored out, logs summed),
which keeps n far beyond the dynamic range of float64.

Circle bases get the standard windowed singular-vector estimators, with
seeds recorded wherever sampling enters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import linalg2
from .base import CircleBase, FiniteBase
from .errors import (
    InternalContractError,
    InvalidInputError,
    NoSplittingError,
)
from .linalg2 import Dir, det2, direction_of, inv2, op_norm

__all__ = [
    "Cocycle",
    "TabulatedCocycle",
    "FunctionCocycle",
    "GridCocycle",
    "PerturbedCocycle",
    "Splitting",
    "ExponentReport",
    "product",
    "scaled_product",
    "finite_time_le",
    "integrated_le_exact",
    "integrated_le_subadditive",
    "oseledets",
    "delta_ratio",
    "mixing_set",
    "residual_hyperbolicity",
    "finite_analysis",
]

RENORM_CADENCE = 32
TRACE_GUARD = 1e-12            # |tr| vs 2 classification band on finite bases
LAMBDA_MIN = 1e-3              # estimated-exponent threshold for splittings
DEFAULT_WINDOW_GAP = 1e6       # singular gap targeted by the automatic window
WINDOW_CAP = 10_000


# ---------------------------------------------------------------------------
# cocycle value maps


class Cocycle:
    """Base interface: a map from base points into SL(2,R)."""

    def matrix(self, x) -> np.ndarray:
        raise NotImplementedError

    @property
    def sup_norm(self) -> float:
        raise NotImplementedError


def _check_sl2_block(mats: np.ndarray, tol: float = linalg2.UNIMODULAR_TOL) -> None:
    if not np.all(np.isfinite(mats)):
        raise InvalidInputError("cocycle contains non-finite entries")
    dets = mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0]
    worst = float(np.abs(dets - 1.0).max())
    if worst > tol:
        raise InvalidInputError(f"cocycle determinant drifts from 1 by {worst:.3e}")


def _block_op_norms(mats: np.ndarray) -> np.ndarray:
    """Spectral norms of a stack of 2x2 matrices, closed form, vectorized."""
    a, b = mats[:, 0, 0], mats[:, 0, 1]
    c, d = mats[:, 1, 0], mats[:, 1, 1]
    frob2 = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = np.maximum(frob2 * frob2 - 4.0 * det * det, 0.0)
    return np.sqrt(0.5 * (frob2 + np.sqrt(disc)))


class TabulatedCocycle(Cocycle):
    """One matrix per point of a finite base."""

    def __init__(self, base: FiniteBase, mats) -> None:
        mats = np.asarray(mats, dtype=float)
        if mats.shape != (base.n_points, 2, 2):
            raise InvalidInputError(f"expected ({base.n_points}, 2, 2) matrices")
        _check_sl2_block(mats)
        self.base = base
        self.mats = mats
        self._sup = float(_block_op_norms(mats).max())

    def matrix(self, x) -> np.ndarray:
        return self.mats[int(x)]

    @property
    def sup_norm(self) -> float:
        return self._sup

    def to_json_dict(self) -> dict:
        return {
            "base": self.base.to_json_dict(),
            "matrices": [m.reshape(4).tolist() for m in self.mats],
        }

    @staticmethod
    def from_json_dict(d: dict) -> "TabulatedCocycle":
        base = FiniteBase.from_json_dict(d["base"])
        mats = np.array([np.reshape(row, (2, 2)) for row in d["matrices"]], dtype=float)
        return TabulatedCocycle(base, mats)


class FunctionCocycle(Cocycle):
    """Cocycle given by a formula; used over circle bases."""

    def __init__(self, fn: Callable[[float], np.ndarray], sup_norm: float | None = None,
                 seed: int = 0, probe: int = 4096) -> None:
        self.fn = fn
        if sup_norm is None:
            rng = np.random.default_rng(seed)
            xs = np.concatenate([np.linspace(0.0, 1.0, probe, endpoint=False),
                                 rng.random(probe)])
            sup_norm = max(op_norm(np.asarray(fn(float(x)), dtype=float)) for x in xs)
        self._sup = float(sup_norm)

    def matrix(self, x) -> np.ndarray:
        m = np.asarray(self.fn(float(x)), dtype=float)
        if not np.all(np.isfinite(m)):
            raise InvalidInputError("cocycle value has non-finite entries")
        return m

    @property
    def sup_norm(self) -> float:
        return self._sup


class GridCocycle(Cocycle):
    """Continuous circle cocycle from values at K equispaced nodes.

    Evaluation interpolates entries linearly between nodes and rescales by
    1/sqrt(det), so every returned value is exactly unimodular while nodal
    values are preserved up to the nodal determinant tolerance.
    """

    def __init__(self, values) -> None:
        values = np.asarray(values, dtype=float)
        if values.ndim != 3 or values.shape[1:] != (2, 2) or values.shape[0] < 2:
            raise InvalidInputError("grid cocycle needs (K, 2, 2) node values, K >= 2")
        _check_sl2_block(values)
        self.values = values
        self.k_nodes = values.shape[0]
        mids = 0.5 * (values + np.roll(values, -1, axis=0))
        mids /= np.sqrt(np.maximum(
            mids[:, 0, 0] * mids[:, 1, 1] - mids[:, 0, 1] * mids[:, 1, 0], 1e-300,
        ))[:, None, None]
        self._sup = float(max(_block_op_norms(values).max(), _block_op_norms(mids).max()))

    def node_x(self, i: int) -> float:
        return i / self.k_nodes

    def matrix(self, x) -> np.ndarray:
        pos = (float(x) % 1.0) * self.k_nodes
        i = int(pos) % self.k_nodes
        frac = pos - int(pos)
        m = (1.0 - frac) * self.values[i] + frac * self.values[(i + 1) % self.k_nodes]
        d = det2(m)
        if d <= 0.0:
            raise InternalContractError("interpolated cocycle value lost positivity")
        return m / math.sqrt(d)

    @property
    def sup_norm(self) -> float:
        return self._sup


class PerturbedCocycle(Cocycle):
    """Sparse overrides on top of an existing cocycle; the original is kept."""

    def __init__(self, original: Cocycle, overrides: dict, provenance=None) -> None:
        self.original = original
        self.overrides = {int(k): np.asarray(v, dtype=float) for k, v in overrides.items()}
        self.provenance = provenance
        for v in self.overrides.values():
            if abs(det2(v) - 1.0) > linalg2.UNIMODULAR_TOL:
                raise InvalidInputError("override determinant drifts from 1")
        sup = original.sup_norm
        if self.overrides:
            sup = max(sup, max(op_norm(v) for v in self.overrides.values()))
        self._sup = sup

    def matrix(self, x) -> np.ndarray:
        key = int(x)
        if key in self.overrides:
            return self.overrides[key]
        return self.original.matrix(x)

    @property
    def sup_norm(self) -> float:
        return self._sup

    def to_tabulated(self) -> TabulatedCocycle:
        orig = self.original
        if isinstance(orig, PerturbedCocycle):
            orig = orig.to_tabulated()
        if not isinstance(orig, TabulatedCocycle):
            raise InvalidInputError("only finite-base cocycles can be tabulated")
        mats = orig.mats.copy()
        for k, v in self.overrides.items():
            mats[k] = v
        return TabulatedCocycle(orig.base, mats)


def tabulate(a: Cocycle, base: FiniteBase) -> TabulatedCocycle:
    """Materialize any finite-base cocycle into one matrix per point."""
    if isinstance(a, TabulatedCocycle):
        if a.base.n_points != base.n_points:
            raise InvalidInputError("cocycle tabulated over a different base size")
        return a
    if isinstance(a, PerturbedCocycle):
        return a.to_tabulated()
    mats = np.stack([a.matrix(x) for x in range(base.n_points)])
    return TabulatedCocycle(base, mats)


# ---------------------------------------------------------------------------
# products


def _entries_list(a: Cocycle, base: FiniteBase) -> list:
    """Per-point matrix entries as python float tuples, for tight loops."""
    cached = getattr(a, "_entries_cache", None)
    if cached is not None and len(cached) == base.n_points:
        return cached
    tab = tabulate(a, base)
    entries = [tuple(row) for row in tab.mats.reshape(base.n_points, 4).tolist()]
    a._entries_cache = entries
    return entries


def scaled_product(a: Cocycle, base, x, n: int, cadence: int = RENORM_CADENCE):
    """(M, logscale) with A^n(x) = exp(logscale) * M and ||M|| kept near 1.

    The norm is factored out every ``cadence`` multiplications and its log
    accumulated, so arbitrarily long products never overflow.
    """
    if n == 0:
        return np.eye(2), 0.0
    fast = isinstance(base, FiniteBase) and isinstance(a, (TabulatedCocycle, PerturbedCocycle))
    if fast:
        ent = _entries_list(a, base)
        sig = base.sigma_list if n > 0 else base.sigma_inv_list
        m00, m01, m10, m11 = 1.0, 0.0, 0.0, 1.0
        logscale = 0.0
        y = int(x)
        if n > 0:
            for k in range(n):
                e00, e01, e10, e11 = ent[y]
                m00, m01, m10, m11 = (
                    e00 * m00 + e01 * m10, e00 * m01 + e01 * m11,
                    e10 * m00 + e11 * m10, e10 * m01 + e11 * m11,
                )
                y = sig[y]
                if (k + 1) % cadence == 0:
                    s = max(abs(m00), abs(m01), abs(m10), abs(m11))
                    m00, m01, m10, m11 = m00 / s, m01 / s, m10 / s, m11 / s
                    logscale += math.log(s)
        else:
            for k in range(-n):
                y = int(sig[y])
                e00, e01, e10, e11 = ent[y]
                det = e00 * e11 - e01 * e10
                i00, i01, i10, i11 = e11 / det, -e01 / det, -e10 / det, e00 / det
                m00, m01, m10, m11 = (
                    i00 * m00 + i01 * m10, i00 * m01 + i01 * m11,
                    i10 * m00 + i11 * m10, i10 * m01 + i11 * m11,
                )
                if (k + 1) % cadence == 0:
                    s = max(abs(m00), abs(m01), abs(m10), abs(m11))
                    m00, m01, m10, m11 = m00 / s, m01 / s, m10 / s, m11 / s
                    logscale += math.log(s)
        m = np.array([[m00, m01], [m10, m11]])
    else:
        m = np.eye(2)
        logscale = 0.0
        y = x
        if n > 0:
            for k in range(n):
                m = a.matrix(y) @ m
                y = base.step(y)
                if (k + 1) % cadence == 0:
                    s = float(np.abs(m).max())
                    m /= s
                    logscale += math.log(s)
        else:
            for k in range(-n):
                y = base.step_back(y)
                m = inv2(a.matrix(y)) @ m
                if (k + 1) % cadence == 0:
                    s = float(np.abs(m).max())
                    m /= s
                    logscale += math.log(s)
    if not np.all(np.isfinite(m)) or not math.isfinite(logscale):
        raise InternalContractError("renormalized product overflowed")
    return m, logscale


def product(a: Cocycle, base, x, n: int) -> np.ndarray:
    """A^n(x): the matrix moving vectors over n steps of the orbit.

    Convention: A(T^{n-1}x) ... A(x) for n > 0, the identity for n = 0, and
    inverses along the backward orbit for n < 0.  Returned as a plain matrix,
    so it is only usable while e^(n * exponent) fits in float64; use
    :func:`scaled_product` beyond that.
    """
    m, logscale = scaled_product(a, base, x, n)
    return m * math.exp(logscale)


def finite_time_le(a: Cocycle, base, x, n: int, cadence: int = RENORM_CADENCE) -> float:
    """(1/n) log ||A^n(x)||, renormalized accumulation."""
    if n < 1:
        raise InvalidInputError("finite_time_le needs n >= 1")
    m, logscale = scaled_product(a, base, x, n, cadence=cadence)
    return (logscale + math.log(op_norm(m))) / n


# ---------------------------------------------------------------------------
# exact finite-base analysis


@dataclass(frozen=True)
class Splitting:
    """Expanding/contracting direction pair at a point."""

    eu: Dir
    es: Dir

    def __post_init__(self):
        if linalg2.angle_between(self.eu, self.es) <= 0.0:
            raise NoSplittingError("degenerate splitting: directions coincide")


@dataclass(frozen=True)
class ExponentReport:
    """A Lyapunov exponent value together with how it was produced."""

    le: float
    method: str  # exact-cycle | inf-subadditive | monte-carlo
    n_used: int
    samples: int
    seed: int | None = None

    def __post_init__(self):
        if self.le < 0.0:
            raise InternalContractError("negative Lyapunov exponent reported")

    def to_json_dict(self) -> dict:
        return {
            "le": self.le,
            "method": self.method,
            "n_used": self.n_used,
            "samples": self.samples,
            "seed": self.seed,
        }


def _log_spectral_radius(scaled_trace: float, logscale: float) -> tuple[float, bool]:
    """(log rho, hyperbolic) for an SL(2,R) matrix given its scaled trace.

    The true trace is exp(logscale) * scaled_trace; rho is the larger
    eigenvalue modulus, 1 for the elliptic/parabolic band |tr| <= 2 (with a
    guard band for roundoff).
    """
    t = abs(scaled_trace)
    if t == 0.0:
        return 0.0, False
    log_tr = logscale + math.log(t)
    band = math.log(2.0)
    if log_tr <= band + TRACE_GUARD:
        tr = math.exp(log_tr) if log_tr < 700 else math.inf
        if tr <= 2.0 * (1.0 + TRACE_GUARD):
            return 0.0, False
    if log_tr > 40.0:  # correction below double precision
        return log_tr, True
    tr = math.exp(log_tr)
    rho = 0.5 * (tr + math.sqrt(tr * tr - 4.0))
    return math.log(rho), True


class FiniteCocycleAnalysis:
    """Exact per-cycle exponents and splittings over a finite base.

    For every cycle: the renormalized cycle product, its exponent, and (when
    the product is hyperbolic) the eigen-directions propagated around the
    cycle -- the expanding one forward, the contracting one backward, which
    are the numerically stable directions of propagation.
    """

    def __init__(self, a: Cocycle, base: FiniteBase) -> None:
        self.base = base
        self.cocycle = tabulate(a, base)
        n = base.n_points
        self.entries = _entries_list(self.cocycle, base)
        self.lam = np.zeros(n)
        self.has_split = np.zeros(n, dtype=bool)
        self.eu_theta = np.full(n, np.nan)
        self.es_theta = np.full(n, np.nan)
        self.cycle_lam = []
        for cyc in base.cycles:
            lam, split = self._analyze_cycle(cyc)
            self.cycle_lam.append(lam)
            self.lam[cyc] = lam
            self.has_split[cyc] = split

    # -- per-cycle work ----------------------------------------------------

    def _cycle_scaled_product(self, cyc: np.ndarray, start: int = 0):
        ent = self.entries
        m00, m01, m10, m11 = 1.0, 0.0, 0.0, 1.0
        logscale = 0.0
        p = cyc.shape[0]
        for k in range(p):
            e00, e01, e10, e11 = ent[int(cyc[(start + k) % p])]
            m00, m01, m10, m11 = (
                e00 * m00 + e01 * m10, e00 * m01 + e01 * m11,
                e10 * m00 + e11 * m10, e10 * m01 + e11 * m11,
            )
            if (k + 1) % RENORM_CADENCE == 0:
                s = max(abs(m00), abs(m01), abs(m10), abs(m11))
                m00, m01, m10, m11 = m00 / s, m01 / s, m10 / s, m11 / s
                logscale += math.log(s)
        return (m00, m01, m10, m11), logscale

    def _analyze_cycle(self, cyc: np.ndarray) -> tuple[float, bool]:
        p = cyc.shape[0]
        (m00, m01, m10, m11), logscale = self._cycle_scaled_product(cyc)
        log_rho, hyperbolic = _log_spectral_radius(m00 + m11, logscale)
        lam = log_rho / p
        if not hyperbolic:
            return 0.0, False
        self._propagate_directions(cyc, np.array([[m00, m01], [m10, m11]]))
        return lam, True

    def _eigendirections(self, m: np.ndarray) -> tuple[Dir, Dir]:
        """(expanding, contracting) eigen-directions of a hyperbolic matrix."""
        a, b = float(m[0, 0]), float(m[0, 1])
        c, d = float(m[1, 0]), float(m[1, 1])
        tr = a + d
        det = a * d - b * c
        disc = tr * tr - 4.0 * det
        if disc <= 0.0:
            raise InternalContractError("eigendirections of a non-hyperbolic matrix")
        root = math.sqrt(disc)
        mu1 = 0.5 * (tr + root)
        mu2 = 0.5 * (tr - root)
        if abs(mu2) > abs(mu1):
            mu1, mu2 = mu2, mu1

        def eigvec(mu):
            v1 = np.array([b, mu - a])
            v2 = np.array([mu - d, c])
            return v1 if np.dot(v1, v1) >= np.dot(v2, v2) else v2

        return direction_of(eigvec(mu1)), direction_of(eigvec(mu2))

    def _propagate_directions(self, cyc: np.ndarray, scaled_cycle_mat: np.ndarray) -> None:
        p = cyc.shape[0]
        eu0, es0 = self._eigendirections(scaled_cycle_mat)
        ent = self.entries
        eu = np.empty(p)
        es = np.empty(p)
        eu[0] = eu0.theta
        es[0] = es0.theta
        # expanding direction forward (attracting under forward iteration)
        cx, sx = math.cos(eu0.theta), math.sin(eu0.theta)
        for i in range(p - 1):
            e00, e01, e10, e11 = ent[int(cyc[i])]
            cx, sx = e00 * cx + e01 * sx, e10 * cx + e11 * sx
            nrm = math.hypot(cx, sx)
            cx, sx = cx / nrm, sx / nrm
            eu[i + 1] = math.atan2(sx, cx) % math.pi
        # contracting direction backward (attracting under backward iteration)
        cx, sx = math.cos(es0.theta), math.sin(es0.theta)
        for i in range(p - 1, 0, -1):
            e00, e01, e10, e11 = ent[int(cyc[i])]
            det = e00 * e11 - e01 * e10
            cx, sx = (e11 * cx - e01 * sx) / det, (-e10 * cx + e00 * sx) / det
            nrm = math.hypot(cx, sx)
            cx, sx = cx / nrm, sx / nrm
            es[i] = math.atan2(sx, cx) % math.pi
        self.eu_theta[cyc] = eu
        self.es_theta[cyc] = es

    # -- point queries -----------------------------------------------------

    def splitting(self, x: int) -> Splitting:
        x = int(x)
        if not self.has_split[x]:
            raise NoSplittingError(
                f"no expanding/contracting splitting at point {x} (zero exponent)"
            )
        return Splitting(Dir(float(self.eu_theta[x])), Dir(float(self.es_theta[x])))

    def integrated_exponent(self) -> float:
        total = 0.0
        for cyc, lam in zip(self.base.cycles, self.cycle_lam):
            total += cyc.shape[0] * lam
        return total / self.base.n_points


def finite_analysis(a: Cocycle, base: FiniteBase) -> FiniteCocycleAnalysis:
    """Exact analysis, cached on the cocycle object (both sides immutable)."""
    cached = getattr(a, "_analysis_cache", None)
    if cached is not None and cached.base is base:
        return cached
    an = FiniteCocycleAnalysis(a, base)
    a._analysis_cache = an
    return an


# ---------------------------------------------------------------------------
# integrated exponents


def integrated_le_exact(a: Cocycle, base: FiniteBase) -> ExponentReport:
    """Integrated upper exponent, exact on a finite base.

    Each cycle of length p contributes (1/p) log rho(A^p) weighted by its
    measure; elliptic/parabolic cycle products contribute zero.
    """
    if not isinstance(base, FiniteBase):
        raise InvalidInputError("exact integration requires a finite base")
    an = finite_analysis(a, base)
    le = max(an.integrated_exponent(), 0.0)
    return ExponentReport(
        le=le,
        method="exact-cycle",
        n_used=max(int(c.shape[0]) for c in base.cycles),
        samples=base.n_points,
        seed=None,
    )


def subadditive_averages(a: Cocycle, base, n_max: int, seed: int = 0,
                         samples: int = 512) -> np.ndarray:
    """a_n / n for n = 1..n_max, with a_n the mean of log ||A^n(x)||.

    Exact mean over all points on a finite base; seeded Monte Carlo mean on a
    circle base.  The sequence a_n is subadditive, so every value is an upper
    bound for the integrated exponent.
    """
    if n_max < 1:
        raise InvalidInputError("n_max must be >= 1")
    if isinstance(base, FiniteBase):
        tab = tabulate(a, base)
        mats = tab.mats
        n_pts = base.n_points
        prod = np.broadcast_to(np.eye(2), (n_pts, 2, 2)).copy()
        logs = np.zeros(n_pts)
        idx = np.arange(n_pts)
        out = np.empty(n_max)
        for n in range(1, n_max + 1):
            prod = np.einsum("nij,njk->nik", mats[idx], prod)
            idx = base.sigma[idx]
            if n % 8 == 0:
                scale = np.abs(prod).max(axis=(1, 2))
                prod /= scale[:, None, None]
                logs += np.log(scale)
            norms = _block_op_norms(prod)
            out[n - 1] = float(np.mean(logs + np.log(norms))) / n
        return out
    rng = np.random.default_rng(seed)
    xs = rng.random(samples)
    out = np.empty(n_max)
    prod = np.broadcast_to(np.eye(2), (samples, 2, 2)).copy()
    logs = np.zeros(samples)
    pts = xs.copy()
    for n in range(1, n_max + 1):
        cur = np.stack([a.matrix(x) for x in pts])
        prod = np.einsum("nij,njk->nik", cur, prod)
        pts = (pts + base.alpha) % 1.0
        if n % 8 == 0:
            scale = np.abs(prod).max(axis=(1, 2))
            prod /= scale[:, None, None]
            logs += np.log(scale)
        norms = _block_op_norms(prod)
        out[n - 1] = float(np.mean(logs + np.log(norms))) / n
    return out


def integrated_le_subadditive(a: Cocycle, base, n_max: int, seed: int = 0,
                              samples: int = 512) -> ExponentReport:
    """Upper bound on the integrated exponent: min over n <= n_max of a_n/n."""
    avgs = subadditive_averages(a, base, n_max, seed=seed, samples=samples)
    n_best = int(np.argmin(avgs)) + 1
    le = max(float(avgs[n_best - 1]), 0.0)
    finite = isinstance(base, FiniteBase)
    return ExponentReport(
        le=le,
        method="inf-subadditive",
        n_used=n_best,
        samples=base.n_points if finite else samples,
        seed=None if finite else seed,
    )


# ---------------------------------------------------------------------------
# splittings and the non-uniformity diagnostics


def _auto_window(a: Cocycle, base, x) -> int:
    window = 32
    while window < WINDOW_CAP:
        m, _ = scaled_product(a, base, x, window)
        # the scaled matrix shares the singular gap of the true product
        smax = op_norm(m)
        det = abs(det2(m))
        gap = math.inf if det == 0.0 else smax * smax / det
        if gap >= DEFAULT_WINDOW_GAP:
            break
        window *= 2
    return min(window, WINDOW_CAP)


def oseledets(a: Cocycle, base, x, window: int | None = None) -> Splitting:
    """The splitting at x: exact eigen-directions on a finite base, windowed
    singular directions on a circle base.

    Raises NoSplittingError at zero-exponent points; callers branch on it.
    """
    if isinstance(base, FiniteBase):
        return finite_analysis(a, base).splitting(x)
    if window is None:
        window = _auto_window(a, base, x)
    if finite_time_le(a, base, x, window) <= LAMBDA_MIN:
        raise NoSplittingError(
            f"estimated exponent at window {window} below {LAMBDA_MIN}"
        )
    fwd, _ = scaled_product(a, base, x, window)
    es = linalg2.singular_data(fwd).v_min
    past_start = x
    for _ in range(window):
        past_start = base.step_back(past_start)
    back, _ = scaled_product(a, base, past_start, window)
    sd = linalg2.singular_data(back)
    eu = direction_of(back @ sd.v_max.vector())
    return Splitting(eu, es)


def delta_ratio(a: Cocycle, base, x, m: int) -> float:
    """Contraction-to-expansion ratio ||A^m(x)|Es|| / ||A^m(x)|Eu||."""
    if m < 1:
        raise InvalidInputError("delta_ratio needs m >= 1")
    split = oseledets(a, base, x)
    mat, _ = scaled_product(a, base, x, m)  # common scale cancels in the ratio
    num = float(np.linalg.norm(mat @ split.es.vector()))
    den = float(np.linalg.norm(mat @ split.eu.vector()))
    if den == 0.0:
        raise InternalContractError("expanding direction annihilated by the window")
    return num / den


def _window_log_restriction(mats: np.ndarray, sigma: np.ndarray, thetas: np.ndarray,
                            m: int, active: np.ndarray) -> np.ndarray:
    """log ||A^m(x) v(x)|| for unit v at angle thetas[x], vectorized over x."""
    pts = np.flatnonzero(active)
    vec = np.stack([np.cos(thetas[pts]), np.sin(thetas[pts])], axis=1)
    logs = np.zeros(pts.shape[0])
    idx = pts.copy()
    for j in range(m):
        vec = np.einsum("nij,nj->ni", mats[idx], vec)
        idx = sigma[idx]
        if (j + 1) % 8 == 0:
            nrm = np.linalg.norm(vec, axis=1)
            logs += np.log(nrm)
            vec /= nrm[:, None]
    nrm = np.linalg.norm(vec, axis=1)
    out = np.full(thetas.shape[0], np.nan)
    out[pts] = logs + np.log(nrm)
    return out


def log_delta_all(a: Cocycle, base: FiniteBase, m: int) -> np.ndarray:
    """log Delta(x, m) for every point with a splitting (NaN elsewhere)."""
    an = finite_analysis(a, base)
    mats = an.cocycle.mats
    log_s = _window_log_restriction(mats, base.sigma, an.es_theta, m, an.has_split)
    log_u = _window_log_restriction(mats, base.sigma, an.eu_theta, m, an.has_split)
    return log_s - log_u


def mixing_set(a: Cocycle, base, m: int, seed: int = 0, samples: int = 512):
    """Points with positive exponent where the window ratio stays >= 1/2.

    On a finite base: the exact indicator mask.  On a circle base: a seeded
    sample of witnesses, returned as (points, delta_values, seed).
    """
    if m < 1:
        raise InvalidInputError("mixing_set needs m >= 1")
    if isinstance(base, FiniteBase):
        an = finite_analysis(a, base)
        mask = np.zeros(base.n_points, dtype=bool)
        if not an.has_split.any():
            return mask
        logd = log_delta_all(a, base, m)
        with np.errstate(invalid="ignore"):
            mask = an.has_split & (logd >= math.log(0.5))
        return mask
    rng = np.random.default_rng(seed)
    pts = rng.random(samples)
    found = []
    deltas = []
    for x in pts:
        try:
            d = delta_ratio(a, base, float(x), m)
        except NoSplittingError:
            continue
        if d >= 0.5:
            found.append(float(x))
            deltas.append(d)
    return np.array(found), np.array(deltas), seed


def residual_hyperbolicity(a: Cocycle, base: FiniteBase, m: int) -> dict:
    """Diagnostics on the orbit-saturated complement of the mixing set.

    H = (positive-exponent points) minus (cycles meeting the mixing set).
    On H the window ratio halves every m steps, which yields an exponential
    envelope Delta(x, n) <= K tau^n, a positive angle floor between the two
    directions, and verified uniform contraction/expansion bounds
    K1 tau1^n on both Oseledets directions.
    """
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    an = finite_analysis(a, base)
    n = base.n_points
    gamma_mask = mixing_set(a, base, m)
    saturated = np.zeros(n, dtype=bool)
    for cyc in base.cycles:
        if gamma_mask[cyc].any():
            saturated[cyc] = True
    h_mask = an.has_split & ~saturated
    report = {
        "m": m,
        "h_measure": base.measure(h_mask),
        "empty": not bool(h_mask.any()),
        "gamma_measure": base.measure(gamma_mask),
    }
    if report["empty"]:
        return report

    pts = np.flatnonzero(h_mask)
    p_max = max(base.cycle_length(int(x)) for x in pts)
    mats = an.cocycle.mats
    # log Delta(x, n) for n = 1..p_max over the residual set
    vec_s = np.stack([np.cos(an.es_theta[pts]), np.sin(an.es_theta[pts])], axis=1)
    vec_u = np.stack([np.cos(an.eu_theta[pts]), np.sin(an.eu_theta[pts])], axis=1)
    logs_s = np.zeros(pts.shape[0])
    logs_u = np.zeros(pts.shape[0])
    idx = pts.copy()
    log_delta = np.empty((p_max, pts.shape[0]))
    log_restr_s = np.empty((p_max, pts.shape[0]))
    for j in range(p_max):
        vec_s = np.einsum("nij,nj->ni", mats[idx], vec_s)
        vec_u = np.einsum("nij,nj->ni", mats[idx], vec_u)
        idx = base.sigma[idx]
        ns = np.linalg.norm(vec_s, axis=1)
        nu = np.linalg.norm(vec_u, axis=1)
        logs_s += np.log(ns)
        logs_u += np.log(nu)
        vec_s /= ns[:, None]
        vec_u /= nu[:, None]
        log_delta[j] = logs_s - logs_u
        log_restr_s[j] = logs_s

    # halving checks at multiples of m
    halving_ok = True
    for i in range(1, p_max // m + 1):
        if not np.all(log_delta[i * m - 1] <= i * math.log(0.5) + 1e-9):
            halving_ok = False
            break
    report["halving_ok"] = halving_ok

    # envelope Delta(x, n) <= K tau^n with tau = 2^(-1/m)
    log_tau = math.log(0.5) / m
    ns_range = np.arange(1, p_max + 1)[:, None]
    log_k_needed = (log_delta - ns_range * log_tau).max()
    tau = math.exp(log_tau)
    k_env = math.exp(max(log_k_needed, 0.0)) * (1.0 + 1e-12)
    report["tau"] = tau
    report["k_envelope"] = k_env

    angles = np.array([
        linalg2.angle_between(Dir(float(an.eu_theta[x])), Dir(float(an.es_theta[x])))
        for x in pts
    ])
    angle_floor = float(angles.min())
    report["angle_floor"] = angle_floor

    # verified contraction of Es forward and of Eu backward: K1 tau1^n
    tau1 = math.sqrt(tau)
    k1 = math.sqrt(k_env / math.sin(angle_floor)) * (1.0 + 1e-9)
    bound = math.log(k1) + ns_range * math.log(tau1)
    contraction_ok = bool(np.all(log_restr_s <= bound + 1e-9))
    # backward expansion check via Delta: ||A^-n | Eu(x)|| equals the forward
    # Es-restriction at the pulled-back point within the same envelope
    logs_back = np.empty((p_max, pts.shape[0]))
    vec_b = np.stack([np.cos(an.eu_theta[pts]), np.sin(an.eu_theta[pts])], axis=1)
    logs_acc = np.zeros(pts.shape[0])
    idx = pts.copy()
    inv_mats = np.empty_like(mats)
    inv_mats[:, 0, 0] = mats[:, 1, 1]
    inv_mats[:, 0, 1] = -mats[:, 0, 1]
    inv_mats[:, 1, 0] = -mats[:, 1, 0]
    inv_mats[:, 1, 1] = mats[:, 0, 0]
    dets = (mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0])
    inv_mats /= dets[:, None, None]
    for j in range(p_max):
        idx = base.sigma_inv[idx]
        vec_b = np.einsum("nij,nj->ni", inv_mats[idx], vec_b)
        nb = np.linalg.norm(vec_b, axis=1)
        logs_acc += np.log(nb)
        vec_b /= nb[:, None]
        logs_back[j] = logs_acc
    expansion_ok = bool(np.all(logs_back <= bound + 1e-9))
    report["k1"] = k1
    report["tau1"] = tau1
    report["contraction_verified"] = contraction_ok
    report["expansion_verified"] = expansion_ok
    report["points_checked"] = int(pts.shape[0])
    report["max_n_checked"] = int(p_max)
    return report
