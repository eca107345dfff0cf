"""Closed-form 2x2 real linear algebra.

Everything here is exact arithmetic on the four entries: spectral norms via
the characteristic polynomial of A^T A, singular pairs, rotations, projective
directions, and the two direction-mixing bounds used by the perturbation
planners.  No iterative solver is involved anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InternalContractError, InvalidInputError, PreconditionError

__all__ = [
    "Dir",
    "SingularData",
    "mat2",
    "identity",
    "rotation",
    "det2",
    "inv2",
    "is_unimodular",
    "op_norm",
    "singular_data",
    "angle_between",
    "direction_of",
    "apply_to_dir",
    "mix_direction",
    "norm_bound_from_angles",
]

#: determinant tolerance for matrices treated as SL(2,R) values
UNIMODULAR_TOL = 1e-12

#: below this relative singular gap a matrix is treated as conformal
ISOTROPY_TOL = 1e-12


def mat2(a: float, b: float, c: float, d: float) -> np.ndarray:
    """Row-major 2x2 matrix [[a, b], [c, d]] as a float64 array."""
    m = np.array([[a, b], [c, d]], dtype=float)
    _require_finite(m)
    return m


def identity() -> np.ndarray:
    return np.eye(2)


def _require_finite(m: np.ndarray) -> None:
    if not np.all(np.isfinite(m)):
        raise InvalidInputError(f"non-finite matrix entries: {m.tolist()}")


def det2(m: np.ndarray) -> float:
    return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


def inv2(m: np.ndarray) -> np.ndarray:
    """Inverse via the adjugate; exact up to one division."""
    d = det2(m)
    if d == 0.0:
        raise InvalidInputError("singular matrix has no inverse")
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]], dtype=float) / d


def is_unimodular(m: np.ndarray, tol: float = UNIMODULAR_TOL) -> bool:
    return abs(det2(m) - 1.0) <= tol


def rotation(theta: float) -> np.ndarray:
    """Counterclockwise rotation by ``theta`` radians."""
    if not math.isfinite(theta):
        raise InvalidInputError("rotation angle must be finite")
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=float)


def op_norm(m: np.ndarray) -> float:
    """Spectral norm (largest singular value), in closed form.

    The singular values squared are the roots of
    t^2 - tr(A^T A) t + det(A)^2, so
    sigma_max^2 = (F + sqrt(F^2 - 4 D^2)) / 2 with F = sum of squared entries.
    """
    _require_finite(m)
    a, b, c, d = float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1])
    frob2 = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = frob2 * frob2 - 4.0 * det * det
    if disc < 0.0:  # roundoff on conformal matrices
        disc = 0.0
    return math.sqrt(0.5 * (frob2 + math.sqrt(disc)))


@dataclass(frozen=True)
class Dir:
    """A projective direction: the line through the origin at angle theta.

    The representation is canonical, theta in [0, pi).
    """

    theta: float

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise InvalidInputError("direction angle must be finite")
        t = math.fmod(self.theta, math.pi)
        if t < 0.0:
            t += math.pi
        if t >= math.pi:  # fmod boundary
            t -= math.pi
        object.__setattr__(self, "theta", t)

    def vector(self) -> np.ndarray:
        """Unit representative (cos theta, sin theta)."""
        return np.array([math.cos(self.theta), math.sin(self.theta)])


def direction_of(v: np.ndarray) -> Dir:
    """Direction spanned by a nonzero 2-vector."""
    x, y = float(v[0]), float(v[1])
    if x == 0.0 and y == 0.0:
        raise InvalidInputError("zero vector spans no direction")
    if not (math.isfinite(x) and math.isfinite(y)):
        raise InvalidInputError("non-finite vector")
    return Dir(math.atan2(y, x))


def angle_between(d1: Dir, d2: Dir) -> float:
    """Angle between two lines, in [0, pi/2]."""
    diff = abs(d1.theta - d2.theta)
    return min(diff, math.pi - diff)


def apply_to_dir(m: np.ndarray, d: Dir) -> Dir:
    """Image line of ``d`` under an invertible matrix."""
    return direction_of(m @ d.vector())


@dataclass(frozen=True)
class SingularData:
    """Closed-form SVD data: largest singular value and right singular pair.

    ``v_max``/``v_min`` are the most-expanded / most-contracted input
    directions.  For conformal input they are arbitrary and ``isotropic``
    is set instead.
    """

    sigma_max: float
    v_max: Dir
    v_min: Dir
    isotropic: bool = False


def singular_data(m: np.ndarray) -> SingularData:
    """Singular value and right singular directions of an invertible matrix.

    Right singular directions are the eigen-directions of A^T A, computed
    from the quadratic formula on its characteristic polynomial.
    """
    _require_finite(m)
    det = det2(m)
    if det == 0.0:
        raise InvalidInputError("singular_data requires det != 0")
    a, b, c, d = float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1])
    # A^T A = [[p, q], [q, r]]
    p = a * a + c * c
    q = a * b + c * d
    r = b * b + d * d
    mean = 0.5 * (p + r)
    half_gap = math.hypot(0.5 * (p - r), q)
    lam_max = mean + half_gap
    lam_min = mean - half_gap
    if lam_min <= 0.0:  # cancellation guard; det != 0 keeps it positive
        lam_min = det * det / lam_max
    sigma_max = math.sqrt(lam_max)
    sigma_min = math.sqrt(lam_min)
    if sigma_max <= sigma_min * (1.0 + ISOTROPY_TOL):
        return SingularData(sigma_max, Dir(0.0), Dir(math.pi / 2), isotropic=True)
    # eigenvector of [[p, q], [q, r]] for lam_max; pick the better-conditioned row
    if abs(q) > 0.0:
        v = np.array([q, lam_max - p]) if abs(lam_max - r) >= abs(lam_max - p) \
            else np.array([lam_max - r, q])
    else:
        v = np.array([1.0, 0.0]) if p >= r else np.array([0.0, 1.0])
    v_max = direction_of(v)
    v_min = Dir(v_max.theta + math.pi / 2)
    _check_reconstruction(m, sigma_max, sigma_min, v_max, v_min)
    return SingularData(sigma_max, v_max, v_min, isotropic=False)


def _check_reconstruction(m, s_max, s_min, v_max, v_min) -> None:
    # ||A - U S V^T|| <= 1e-10 ||A||, with U read off from the images.
    u1 = m @ v_max.vector() / s_max
    if s_min > 1e-13 * s_max:
        u2 = m @ v_min.vector() / s_min
    else:
        # numerically rank one: the second left direction is the orthogonal
        # complement of the first (sign immaterial at this magnitude)
        u2 = np.array([-u1[1], u1[0]])
    rec = s_max * np.outer(u1, v_max.vector()) + s_min * np.outer(u2, v_min.vector())
    err = op_norm(rec - m)
    if err > 1e-10 * max(s_max, 1.0):
        raise InvalidInputError(f"singular decomposition failed to reconstruct: err={err}")


def mix_direction(m: np.ndarray, s: Dir, u: Dir, alpha2: float) -> Dir:
    """A direction close to ``u`` whose image is close to the image of ``s``.

    Requires dominance ||A s|| / ||A u|| > c with c = a^-2, a = sin(alpha2).
    Returns the line of xi = u + a*s, which then satisfies both
    angle(xi, u) <= alpha2 and angle(A xi, A s) <= alpha2; both bounds are
    re-verified on the output before returning.
    """
    _require_finite(m)
    if not (0.0 < alpha2 < math.pi / 2):
        raise InvalidInputError(f"alpha2 must lie in (0, pi/2), got {alpha2}")
    a = math.sin(alpha2)
    c = 1.0 / (a * a)
    norm_as = float(np.linalg.norm(m @ s.vector()))
    norm_au = float(np.linalg.norm(m @ u.vector()))
    if norm_au == 0.0 or norm_as / norm_au <= c:
        ratio = math.inf if norm_au == 0.0 else norm_as / norm_au
        raise PreconditionError(
            f"image-norm ratio {ratio:.6g} does not exceed c={c:.6g}",
            ratio=ratio, c=c,
        )
    xi = direction_of(u.vector() + a * s.vector())
    ang_in = angle_between(xi, u)
    ang_out = angle_between(apply_to_dir(m, xi), apply_to_dir(m, s))
    if ang_in > alpha2 or ang_out > alpha2:  # pragma: no cover - excluded by the ratio test
        raise InternalContractError(
            f"mixed direction violated its angle bounds: "
            f"in={ang_in:.3g} out={ang_out:.3g} alpha2={alpha2:.3g}"
        )
    return xi


def norm_bound_from_angles(alpha1: float, c_hat: float) -> float:
    """A norm bound for unimodular maps with a well-spread vector pair.

    If an SL(2,R) matrix admits unit vectors s, u with angle(u, s) >= alpha1,
    angle(Au, As) >= alpha1 and image-norm ratio within [1/c_hat, c_hat],
    then ||A|| <= E = 2 sqrt(c_hat / sin alpha1) / sin alpha1.

    The bound comes from the area identity
    ||As|| ||Au|| sin angle(As, Au) = sin angle(s, u): it forces
    ||Au||, ||As|| <= sqrt(c_hat / sin alpha1), and any unit vector
    decomposes over {u, s} with coefficients at most 1/sin alpha1 each.
    Valid but not tight.
    """
    if not (0.0 < alpha1 <= math.pi / 2):
        raise InvalidInputError(f"alpha1 must lie in (0, pi/2], got {alpha1}")
    if not c_hat >= 1.0:
        raise InvalidInputError(f"c_hat must be >= 1, got {c_hat}")
    s = math.sin(alpha1)
    return 2.0 * math.sqrt(c_hat / s) / s
