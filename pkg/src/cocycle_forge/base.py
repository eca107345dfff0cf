"""Ergodic base systems at desk scale.

Two models: a permutation of {0..N-1} with uniform measure (everything about
it is exactly computable) and a circle rotation with Lebesgue measure
(measures are sampled, estimates carry their seed).  On top of them: orbits,
Birkhoff averages, and a quantitative Poincare recurrence locator that
returns, for a prescribed window, an orbit time landing in a target set.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InternalContractError,
    InvalidBaseError,
    InvalidInputError,
    NotInOmegaError,
)

__all__ = [
    "FiniteBase",
    "CircleBase",
    "IntervalSet",
    "indicator_contains",
    "orbit",
    "birkhoff_average",
    "recurrence_threshold",
    "recurrence_locate",
]

ORBIT_GUARD = 10**9


@dataclass(frozen=True)
class FiniteBase:
    """Invertible dynamics on {0..N-1}: a permutation with uniform measure."""

    sigma: np.ndarray
    sigma_inv: np.ndarray = field(repr=False)
    cycles: tuple = field(repr=False)
    cycle_id: np.ndarray = field(repr=False)
    cycle_pos: np.ndarray = field(repr=False)
    # plain-list mirrors of sigma / sigma_inv for tight product loops
    sigma_list: list = field(repr=False, compare=False, default=None)
    sigma_inv_list: list = field(repr=False, compare=False, default=None)

    @staticmethod
    def from_permutation(perm) -> "FiniteBase":
        sigma = np.asarray(perm, dtype=np.int64)
        n = sigma.shape[0]
        if n == 0:
            raise InvalidInputError("empty permutation")
        if sigma.ndim != 1 or not np.array_equal(np.sort(sigma), np.arange(n)):
            raise InvalidInputError("sigma is not a permutation of 0..N-1")
        sigma_inv = np.empty(n, dtype=np.int64)
        sigma_inv[sigma] = np.arange(n)
        cycles = []
        cycle_id = np.full(n, -1, dtype=np.int64)
        cycle_pos = np.zeros(n, dtype=np.int64)
        for start in range(n):
            if cycle_id[start] >= 0:
                continue
            cyc = [start]
            cycle_id[start] = len(cycles)
            x = int(sigma[start])
            while x != start:
                cycle_id[x] = len(cycles)
                cycle_pos[x] = len(cyc)
                cyc.append(x)
                x = int(sigma[x])
            cycles.append(np.array(cyc, dtype=np.int64))
        return FiniteBase(sigma, sigma_inv, tuple(cycles), cycle_id, cycle_pos,
                          sigma.tolist(), sigma_inv.tolist())

    @staticmethod
    def cyclic(n: int) -> "FiniteBase":
        """The cyclic shift x -> x+1 mod n."""
        if n < 1:
            raise InvalidInputError("cyclic base needs n >= 1")
        return FiniteBase.from_permutation(np.roll(np.arange(n), -1))

    @property
    def n_points(self) -> int:
        return int(self.sigma.shape[0])

    def step(self, x: int) -> int:
        return int(self.sigma[x])

    def step_back(self, x: int) -> int:
        return int(self.sigma_inv[x])

    def cycle_of(self, x: int) -> np.ndarray:
        return self.cycles[int(self.cycle_id[x])]

    def point_at(self, x: int, n: int) -> int:
        """T^n x in O(1) via the cycle decomposition (n may be negative)."""
        cyc = self.cycle_of(x)
        p = cyc.shape[0]
        return int(cyc[(int(self.cycle_pos[x]) + n) % p])

    def cycle_length(self, x: int) -> int:
        return int(self.cycle_of(x).shape[0])

    def min_cycle_length(self) -> int:
        return min(int(c.shape[0]) for c in self.cycles)

    def measure(self, mask: np.ndarray) -> float:
        """Uniform measure of an indicator mask, exact as a ratio of ints."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.n_points,):
            raise InvalidInputError("indicator mask has wrong length")
        return int(mask.sum()) / self.n_points

    def require_aperiodic(self, horizon: int) -> None:
        """Effective aperiodicity: every cycle longer than 3 * horizon."""
        if self.min_cycle_length() <= 3 * horizon:
            raise InvalidBaseError(
                f"cycle of length {self.min_cycle_length()} <= 3*{horizon}; "
                "base is not effectively aperiodic at this horizon"
            )

    def to_json_dict(self) -> dict:
        return {"n_points": self.n_points, "sigma": self.sigma.tolist()}

    @staticmethod
    def from_json_dict(d: dict) -> "FiniteBase":
        sigma = d["sigma"]
        if d.get("n_points") != len(sigma):
            raise InvalidInputError("n_points disagrees with sigma length")
        return FiniteBase.from_permutation(sigma)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "FiniteBase":
        return FiniteBase.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class CircleBase:
    """Rotation x -> x + alpha mod 1 with Lebesgue measure.

    Measures are estimated by seeded sampling; only FiniteBase results are
    claimed exact.
    """

    alpha: float
    sample_size: int = 100_000

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0) or not math.isfinite(self.alpha):
            raise InvalidInputError("alpha must lie in (0, 1)")

    def step(self, x: float) -> float:
        return (x + self.alpha) % 1.0

    def step_back(self, x: float) -> float:
        return (x - self.alpha) % 1.0

    def sample_points(self, seed: int, k: int | None = None) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return rng.random(k or self.sample_size)

    def measure(self, indicator, seed: int = 0) -> float:
        """Sampled measure of a membership test (exact for IntervalSet)."""
        if isinstance(indicator, IntervalSet):
            return indicator.measure
        pts = self.sample_points(seed)
        hits = sum(1 for p in pts if indicator(p))
        return hits / pts.shape[0]


class IntervalSet:
    """Finite union of half-open arcs of the circle [0, 1).

    Each arc is (start, width) with start in [0,1) and 0 < width <= 1;
    the arc may wrap past 1.  Lebesgue measure is exact.
    """

    def __init__(self, intervals):
        cleaned = []
        for lo, hi in intervals:
            width = float(hi) - float(lo)
            if not (0.0 < width <= 1.0):
                raise InvalidInputError(f"interval ({lo}, {hi}) must have width in (0, 1]")
            cleaned.append((float(lo) % 1.0, width))
        self.arcs = tuple(cleaned)

    @property
    def measure(self) -> float:
        return min(sum(w for _, w in self.arcs), 1.0)

    def __call__(self, x: float) -> bool:
        x = x % 1.0
        for lo, width in self.arcs:
            if (x - lo) % 1.0 < width:
                return True
        return False


def indicator_contains(gamma, x) -> bool:
    """Membership in an indicator: bool mask over points, or a predicate."""
    if isinstance(gamma, np.ndarray):
        return bool(gamma[int(x)])
    return bool(gamma(x))


def orbit(base, x, n: int) -> list:
    """Orbit segment x, Tx, ..., T^{n-1}x (backward via the inverse if n < 0)."""
    if abs(n) > ORBIT_GUARD:
        raise InvalidInputError(f"|n| exceeds the orbit guard {ORBIT_GUARD}")
    pts = []
    if n > 0:
        for _ in range(n):
            pts.append(x)
            x = base.step(x)
    elif n < 0:
        for _ in range(-n):
            pts.append(x)
            x = base.step_back(x)
    return pts


def birkhoff_average(base, f, x, n: int) -> float:
    """Average of f along the forward orbit segment of length n."""
    if n < 1:
        raise InvalidInputError("birkhoff_average needs n >= 1")
    total = 0.0
    for _ in range(n):
        total += float(f(x))
        x = base.step(x)
    return total / n


def _finite_hit_positions(base: FiniteBase, gamma: np.ndarray, x: int) -> tuple[np.ndarray, int]:
    """Offsets j in [0, p) with T^j x in Gamma, along x's cycle of length p."""
    cyc = base.cycle_of(x)
    p = cyc.shape[0]
    start = int(base.cycle_pos[x])
    ordered = np.concatenate([cyc[start:], cyc[:start]])
    mask = np.asarray(gamma, dtype=bool)[ordered]
    return np.flatnonzero(mask), p


def recurrence_threshold(base, gamma, x, gamma_tol: float, horizon: int = 200_000) -> int:
    """Smallest usable scale for the recurrence locator.

    Follows the constructive recipe: a = orbit density of the target set
    (exact on FiniteBase), eps = half the largest value admissible in
    (a+eps)/(a-eps) < 1 + gamma_tol/2, n0 = last time |s_n/n - a| >= eps
    plus one, and N0 = ceil(max(2 n0 / (gamma_tol (a-eps)), 4/gamma_tol)) + 1.
    """
    if not (0.0 < gamma_tol < 1.0):
        raise InvalidInputError(f"gamma must lie in (0,1), got {gamma_tol}")
    if isinstance(base, FiniteBase):
        hits, p = _finite_hit_positions(base, gamma, x)
        if hits.shape[0] == 0:
            raise NotInOmegaError("orbit of x never meets the target set")
        a = hits.shape[0] / p
        counts = np.zeros(p + 1)
        hit_mask = np.zeros(p)
        hit_mask[hits] = 1.0
        counts[1:] = np.cumsum(hit_mask)

        def s_of(n: int) -> float:
            q, r = divmod(n, p)
            return q * counts[p] + counts[r]
    else:
        # sampled orbit on the circle; density from the exact interval measure
        # when available, else from the sampled orbit itself
        pts = orbit(base, x, horizon)
        flags = np.array([1.0 if indicator_contains(gamma, pt) else 0.0 for pt in pts])
        csum = np.concatenate([[0.0], np.cumsum(flags)])
        a = float(csum[-1]) / horizon
        if isinstance(gamma, IntervalSet) and gamma.measure > 0:
            a = gamma.measure
        if a <= 0.0:
            raise NotInOmegaError("sampled orbit never meets the target set")

        def s_of(n: int) -> float:
            if n > horizon:
                return a * n  # beyond the scan horizon the estimate is the density
            return float(csum[n])

    eps = 0.5 * (a * gamma_tol / (4.0 + gamma_tol))
    # deviations s_n - n a are p-periodic on a finite cycle, so the last
    # violation sits below D/eps with D the one-period max deviation
    if isinstance(base, FiniteBase):
        dev = np.abs(counts[: p + 1] - np.arange(p + 1) * a)
        d_max = float(dev.max())
        scan_to = int(math.ceil(d_max / eps)) + 1
    else:
        scan_to = horizon
    n0 = 1
    for n in range(scan_to, 0, -1):
        if abs(s_of(n) / n - a) >= eps:
            n0 = n + 1
            break
    n_low = max(2.0 * n0 / (gamma_tol * (a - eps)), 4.0 / gamma_tol)
    return int(math.ceil(n_low)) + 1


def recurrence_candidates(base, gamma, x, n: int, t: float, gamma_tol: float) -> list[int]:
    """All l in [0, n] with T^l x in the set and |l/n - t| < gamma_tol,
    ordered by |l/n - t| then by l."""
    lo = max(0, int(math.floor(n * (t - gamma_tol))) )
    hi = min(n, int(math.ceil(n * (t + gamma_tol))))
    if isinstance(base, FiniteBase):
        hits, p = _finite_hit_positions(base, gamma, x)
        if hits.shape[0] == 0:
            return []
        out = []
        q_lo, q_hi = lo // p, hi // p
        for q in range(q_lo, q_hi + 1):
            for h in hits:
                ell = q * p + int(h)
                if lo <= ell <= hi and abs(ell / n - t) < gamma_tol:
                    out.append(ell)
    else:
        out = []
        pt = x
        step = base.step
        for ell in range(0, hi + 1):
            if ell >= lo and abs(ell / n - t) < gamma_tol and indicator_contains(gamma, pt):
                out.append(ell)
            pt = step(pt)
    out.sort(key=lambda ell: (abs(ell / n - t), ell))
    return out


def recurrence_locate(base, gamma, x, n: int, t: float, gamma_tol: float) -> int:
    """Orbit time l <= n with T^l x in the set and l/n within gamma of t.

    Among the valid times, returns the one closest to t*n (ties toward the
    smaller l).  Callers must supply n at or above recurrence_threshold;
    then a valid time always exists and failure is a broken contract.
    """
    if not (0.0 <= t <= 1.0):
        raise InvalidInputError(f"target fraction t={t} outside [0,1]")
    cands = recurrence_candidates(base, gamma, x, n, t, gamma_tol)
    if not cands:
        raise InternalContractError(
            f"no valid recurrence time at n={n}, t={t}, gamma={gamma_tol}"
        )
    ell = cands[0]
    if isinstance(base, FiniteBase):
        landing = base.point_at(x, ell)
    else:
        landing = orbit(base, x, ell + 1)[-1] if ell > 0 else x
    if not (abs(ell / n - t) < gamma_tol and indicator_contains(gamma, landing)):
        raise InternalContractError("recurrence output failed its own contract")
    return ell
