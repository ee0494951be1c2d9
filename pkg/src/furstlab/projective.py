"""Projective-metric and subspace kernel shared by all other modules.

Lines in V are represented by sign-normalized unit vectors, linear
subspaces by orthonormal basis matrices.  Everything here is pure and
stateless; double precision throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DegenerateProjection, EmptyTarget

# Cutoff below which a projected representative counts as lying in the
# removed projective subspace.
DEGENERACY_TOL = 1e-10


def _sign_normalize(v: np.ndarray) -> np.ndarray:
    """Flip sign so the first exactly-nonzero coordinate is positive."""
    for c in v:
        if c != 0.0:
            return -v if c < 0.0 else v
    raise ValueError("zero vector has no projective class")


@dataclass(frozen=True)
class ProjectivePoint:
    """A line in V: unit vector with the first nonzero coordinate positive."""

    direction: np.ndarray

    @classmethod
    def from_vector(cls, v) -> "ProjectivePoint":
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v)
        if n <= DEGENERACY_TOL:
            raise ValueError("cannot normalize a (near-)zero vector")
        # Skip the division when already unit to the last few bits; this
        # makes normalization exactly idempotent.
        if abs(n - 1.0) > 1e-13:
            v = v / n
        u = _sign_normalize(v)
        u = u.copy()
        u.flags.writeable = False
        return cls(u)

    @property
    def dim(self) -> int:
        return self.direction.shape[0]


@dataclass(frozen=True)
class Subspace:
    """Linear subspace given by an orthonormal dimV x k basis (k may be 0)."""

    basis: np.ndarray

    @classmethod
    def from_spanning(cls, columns) -> "Subspace":
        """Orthonormalize spanning columns (rank decided at 1e-10)."""
        m = np.atleast_2d(np.asarray(columns, dtype=float))
        if m.ndim != 2:
            raise ValueError("expected a dimV x k matrix of columns")
        if m.shape[1] == 0:
            return cls(m.reshape(m.shape[0], 0))
        u, s, _ = np.linalg.svd(m, full_matrices=False)
        rank = int(np.sum(s > 1e-10 * max(1.0, s[0])))
        b = u[:, :rank].copy()
        b.flags.writeable = False
        return cls(b)

    @classmethod
    def trivial(cls, dim_v: int) -> "Subspace":
        return cls(np.zeros((dim_v, 0)))

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def complement(self) -> "Subspace":
        """Orthogonal complement, from the full SVD of the basis."""
        if self.dim == 0:
            return Subspace(np.eye(self.ambient_dim))
        u, _, _ = np.linalg.svd(self.basis, full_matrices=True)
        b = u[:, self.dim:].copy()
        b.flags.writeable = False
        return Subspace(b)

    def project(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection of a raw vector onto the subspace."""
        return self.basis @ (self.basis.T @ v)


def proj_distance(x: ProjectivePoint, y: ProjectivePoint) -> float:
    """d(x, y) = sqrt(1 - <x,y>^2) for unit representatives; in [0, 1].

    Values below the cancellation floor of the inner-product form are
    recomputed from explicit exterior coordinates, which stay accurate
    down to machine level (identical lines give exactly 0).
    """
    c = float(np.dot(x.direction, y.direction))
    val = float(np.sqrt(max(0.0, 1.0 - c * c)))
    if val < 1e-7:
        return proj_distance_accurate(x, y)
    return val


def wedge_norm(x, y) -> float:
    """Norm of x wedge y via the 2x2 Gram determinant, clamped at 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    g = np.dot(x, x) * np.dot(y, y) - np.dot(x, y) ** 2
    return float(np.sqrt(max(0.0, g)))


def proj_distance_accurate(x: ProjectivePoint, y: ProjectivePoint) -> float:
    """Same metric, but accurate for nearly parallel lines.

    The Gram form of the distance cancels catastrophically near 0 and
    floors out around sqrt(machine eps); summing the explicit exterior
    coordinates keeps absolute accuracy at machine level instead.
    """
    u, v = x.direction, y.direction
    m = np.outer(u, v)
    m -= m.T
    return min(1.0, float(np.sqrt(0.5) * np.linalg.norm(m)))


def project_point(w: Subspace, x: ProjectivePoint) -> ProjectivePoint:
    """Image of the line x under orthogonal projection onto w.

    Raises DegenerateProjection when x lies (numerically) in the removed
    set, i.e. the projection of a unit representative is shorter than
    DEGENERACY_TOL.
    """
    p = w.project(x.direction)
    if np.linalg.norm(p) <= DEGENERACY_TOL:
        raise DegenerateProjection(
            "point lies in the projective space of the orthocomplement"
        )
    return ProjectivePoint.from_vector(p)


def dist_to_proj_subspace(x: ProjectivePoint, w: Subspace) -> float:
    """d(x, P(w)) = sqrt(1 - |P_w x|^2); requires dim w >= 1."""
    if w.dim == 0:
        raise EmptyTarget("P({0}) is empty; distance undefined")
    p = w.basis.T @ x.direction
    return float(np.sqrt(max(0.0, 1.0 - float(np.dot(p, p)))))


def principal_angle_min_sin(w1: Subspace, w2: Subspace) -> float:
    """Sine of the smallest principal angle between two subspaces.

    Equals min d(x, y) over nonzero x in w1 and y in w2.
    """
    if w1.dim == 0 or w2.dim == 0:
        raise EmptyTarget("principal angles need nonempty subspaces")
    s = np.linalg.svd(w1.basis.T @ w2.basis, compute_uv=False)
    c = min(1.0, float(s[0]))
    return float(np.sqrt(max(0.0, 1.0 - c * c)))


def subspace_gap(w1: Subspace, w2: Subspace) -> float:
    """Largest principal-angle sine between equal-dimension subspaces.

    Zero iff the subspaces coincide; used for flag/splitting consistency
    checks.
    """
    if w1.dim != w2.dim:
        raise ValueError("subspace_gap compares equal-dimension subspaces")
    if w1.dim == 0:
        return 0.0
    s = np.linalg.svd(w1.basis.T @ w2.basis, compute_uv=False)
    c = min(1.0, float(s[-1]))
    return float(np.sqrt(max(0.0, 1.0 - c * c)))


def splitting_min_sin(blocks: list[Subspace]) -> float:
    """Minimal sine-angle between complementary groups of splitting blocks.

    The minimum over disjoint nonempty index sets I, J of the smallest
    principal-angle sine between the spans of the I- and J-blocks.  Since
    enlarging either group can only lower the minimum, it is attained on
    complementary pairs, so only those are scanned.
    """
    k = len(blocks)
    if k < 2:
        return 1.0
    best = 1.0
    idx = range(k)
    for r in range(1, k // 2 + 1):
        for left in combinations(idx, r):
            if r == k - r and 0 not in left:
                continue  # complement already visited
            right = tuple(i for i in idx if i not in left)
            a = Subspace.from_spanning(
                np.hstack([blocks[i].basis for i in left]))
            b = Subspace.from_spanning(
                np.hstack([blocks[j].basis for j in right]))
            best = min(best, principal_angle_min_sin(a, b))
    return best
