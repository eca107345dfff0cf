"""Tower and castle combinatorics over finite bases.

A tower is a set of base points together with a height h such that the
first h iterates of the base are pairwise disjoint; a castle is a disjoint
union of towers.  The Kakutani castle of a set B decomposes the orbit
saturation of B into towers by first-return time.  Everything here is exact
integer combinatorics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import FiniteBase
from .errors import InternalContractError, InvalidBaseError, InvalidInputError

__all__ = [
    "Tower",
    "Castle",
    "maximal_disjoint_base",
    "kakutani_castle",
    "truncate_castle",
    "check_truncation_bound",
]


@dataclass(frozen=True)
class Tower:
    """Base points and height; floor j is sigma^j applied to the base."""

    base_points: np.ndarray
    height: int

    def __post_init__(self):
        pts = np.asarray(self.base_points, dtype=np.int64)
        object.__setattr__(self, "base_points", np.sort(pts))
        if self.height < 1:
            raise InvalidInputError("tower height must be >= 1")

    def floors(self, base: FiniteBase) -> np.ndarray:
        """All floor points, stacked level by level: shape (height, |base|)."""
        out = np.empty((self.height, self.base_points.shape[0]), dtype=np.int64)
        cur = self.base_points.copy()
        for j in range(self.height):
            out[j] = cur
            cur = base.sigma[cur]
        return out

    def n_floors(self) -> int:
        return self.height * int(self.base_points.shape[0])


@dataclass(frozen=True)
class Castle:
    """Disjoint towers; construction always re-verifies the disjointness."""

    towers: tuple
    n_points: int

    def __post_init__(self):
        object.__setattr__(
            self, "towers",
            tuple(sorted(self.towers,
                         key=lambda t: (t.height, int(t.base_points[0])
                                        if t.base_points.shape[0] else -1))),
        )

    @property
    def measure(self) -> float:
        return self.floor_count() / self.n_points

    def floor_count(self) -> int:
        return sum(t.n_floors() for t in self.towers)

    def floor_mask(self, base: FiniteBase) -> np.ndarray:
        mask = np.zeros(base.n_points, dtype=bool)
        for t in self.towers:
            for row in t.floors(base):
                if mask[row].any():
                    raise InternalContractError("castle floors are not disjoint")
                mask[row] = True
        return mask

    def base_mask(self, base: FiniteBase) -> np.ndarray:
        mask = np.zeros(base.n_points, dtype=bool)
        for t in self.towers:
            mask[t.base_points] = True
        return mask

    def verify_disjoint(self, base: FiniteBase) -> bool:
        self.floor_mask(base)
        return True

    def height_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for t in self.towers:
            hist[t.height] = hist.get(t.height, 0) + int(t.base_points.shape[0])
        return hist

    def to_json_dict(self) -> dict:
        return {
            "n_points": self.n_points,
            "towers": [
                {"height": t.height, "base_points": t.base_points.tolist()}
                for t in self.towers
            ],
            "measure": self.measure,
        }


def maximal_disjoint_base(base: FiniteBase, s_mask: np.ndarray, h: int) -> np.ndarray:
    """Greedy maximal B inside S whose first h iterates stay pairwise disjoint.

    Ascending point order realizes maximality deterministically: a point
    rejected once stays rejected, because the occupied set only grows.  The
    result is inclusion-maximal: no point of S can be added.
    """
    if h < 1:
        raise InvalidInputError("disjointness horizon must be >= 1")
    if base.min_cycle_length() <= h:
        raise InvalidBaseError(
            f"a cycle of length {base.min_cycle_length()} cannot carry "
            f"h={h} disjoint iterates"
        )
    s_mask = np.asarray(s_mask, dtype=bool)
    n = base.n_points
    occupied = np.zeros(n, dtype=bool)
    out = np.zeros(n, dtype=bool)
    sig = base.sigma_list
    for x in range(n):
        if not s_mask[x] or occupied[x]:
            continue
        y = x
        free = True
        for _ in range(h):
            if occupied[y]:
                free = False
                break
            y = sig[y]
        if not free:
            continue
        out[x] = True
        y = x
        for _ in range(h):
            occupied[y] = True
            y = sig[y]
    return out


def verify_maximality(base: FiniteBase, s_mask: np.ndarray, b_mask: np.ndarray,
                      h: int) -> bool:
    """Exhaustive check that no point of S can be added to B."""
    occupied = np.zeros(base.n_points, dtype=bool)
    sig = base.sigma_list
    for x in np.flatnonzero(b_mask):
        y = int(x)
        for _ in range(h):
            if occupied[y]:
                raise InternalContractError("claimed disjoint base overlaps itself")
            occupied[y] = True
            y = sig[y]
    for x in np.flatnonzero(np.asarray(s_mask, dtype=bool) & ~b_mask):
        y = int(x)
        clear = True
        for _ in range(h):
            if occupied[y]:
                clear = False
                break
            y = sig[y]
        if clear:
            return False
    return True


def kakutani_castle(base: FiniteBase, b_mask: np.ndarray) -> tuple[Castle, dict]:
    """Return-time tower decomposition of the orbit saturation of B.

    Returns the castle plus coverage info: the castle covers exactly the
    cycles B meets; any uncovered measure is surfaced, not hidden.
    """
    b_mask = np.asarray(b_mask, dtype=bool)
    if not b_mask.any():
        raise InvalidInputError("kakutani_castle needs a nonempty base set")
    sig = base.sigma_list
    by_height: dict[int, list[int]] = {}
    covered = 0
    for x in np.flatnonzero(b_mask):
        y = sig[int(x)]
        tau = 1
        while not b_mask[y]:
            y = sig[y]
            tau += 1
        by_height.setdefault(tau, []).append(int(x))
        covered += tau
    towers = tuple(
        Tower(np.array(pts, dtype=np.int64), height)
        for height, pts in sorted(by_height.items())
    )
    castle = Castle(towers, base.n_points)
    castle.verify_disjoint(base)
    saturation = sum(
        int(c.shape[0]) for c in base.cycles if b_mask[c].any()
    )
    if castle.floor_count() != saturation:
        raise InternalContractError(
            "castle floors do not fill the saturation of the base set"
        )
    info = {
        "saturation_measure": saturation / base.n_points,
        "uncovered_measure": 1.0 - saturation / base.n_points,
        "n_towers": len(towers),
    }
    return castle, info


def truncate_castle(castle: Castle, max_height: int) -> Castle:
    """Keep exactly the towers of height at most max_height."""
    if max_height < 0:
        raise InvalidInputError("max_height must be >= 0")
    kept = tuple(t for t in castle.towers if t.height <= max_height)
    return Castle(kept, castle.n_points)


def check_truncation_bound(base: FiniteBase, p_h_complement, q_hat: Castle,
                           q: Castle, h: int) -> dict:
    """The truncation loss is at most three times the bad-set measure.

    For Q = the towers of Q-hat of height <= 3h built over a maximal base
    inside P_h, mu(Q-hat - Q) <= 3 mu(complement of P_h); exact integer
    comparison when the complement is given as a mask.  A violation means
    the maximality machinery is broken, hence the hard error.
    """
    lost_floors = q_hat.floor_count() - q.floor_count()
    if lost_floors < 0:
        raise InvalidInputError("Q is not a sub-castle of Q-hat")
    if isinstance(p_h_complement, np.ndarray):
        bad_count = int(np.asarray(p_h_complement, dtype=bool).sum())
        ok = lost_floors <= 3 * bad_count
        rhs = 3 * bad_count / base.n_points
    else:
        rhs = 3.0 * float(p_h_complement)
        ok = lost_floors / base.n_points <= rhs + 1e-15
    lhs = lost_floors / base.n_points
    if not ok:
        raise InternalContractError(
            f"truncation bound violated: mu(Qhat - Q) = {lhs} > {rhs}; "
            "the maximal-base construction is broken"
        )
    return {"truncation_loss": lhs, "bound": rhs, "ok": True, "h": h}
