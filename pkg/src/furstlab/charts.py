"""Coordinate charts adapted to a splitting of V.

Given a direct-sum decomposition with a one-dimensional leading block,
points of P(V) away from the projective span of the trailing blocks get
affine coordinates: the oblique components of a representative scaled to
unit leading coefficient.  These charts linearize the backward dynamics
block by block and satisfy two-sided distance bounds in terms of the
minimal splitting angle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cocycle import OseledetsFrame, TwoSidedWord
from .ensemble import EnsembleSpec
from .errors import DegenerateProjection
from .projective import (ProjectivePoint, Subspace, dist_to_proj_subspace,
                         splitting_min_sin)


@dataclass(frozen=True)
class SplittingChart:
    """Oblique-projection coordinates for a splitting E^0 + ... + E^s."""

    blocks: tuple[Subspace, ...]
    u0: np.ndarray  # sign-normalized unit vector spanning E^0
    binv: np.ndarray  # inverse of the stacked block basis
    kappa: float

    @classmethod
    def from_blocks(cls, blocks, kappa: float | None = None) -> "SplittingChart":
        blocks = tuple(blocks)
        if blocks[0].dim != 1:
            raise ValueError("leading block must be one-dimensional")
        u0 = ProjectivePoint.from_vector(blocks[0].basis[:, 0]).direction
        cols = [u0[:, None]] + [b.basis for b in blocks[1:]]
        b = np.hstack(cols)
        if b.shape[0] != b.shape[1]:
            raise ValueError("blocks do not fill the ambient space")
        if kappa is None:
            kappa = splitting_min_sin(list(blocks))
        return cls(blocks=blocks, u0=u0, binv=np.linalg.inv(b), kappa=kappa)

    @classmethod
    def from_frame(cls, frame: OseledetsFrame) -> "SplittingChart":
        return cls.from_blocks(frame.splitting, kappa=frame.kappa)

    @property
    def s(self) -> int:
        return len(self.blocks) - 1

    @property
    def dim_v(self) -> int:
        return self.blocks[0].ambient_dim

    def _slices(self):
        off = 0
        for b in self.blocks:
            yield slice(off, off + b.dim)
            off += b.dim

    def components(self, x: np.ndarray) -> list[np.ndarray]:
        """Oblique components of a raw vector along the splitting."""
        c = self.binv @ x
        out = []
        for b, sl in zip(self.blocks, self._slices()):
            if b.dim == 1 and sl.start == 0:
                out.append(c[0] * self.u0)
            else:
                out.append(b.basis @ c[sl])
        return out

    def component_sup_norm(self, x: np.ndarray) -> float:
        return max(float(np.linalg.norm(v)) for v in self.components(x))

    def leading_coefficient(self, x: np.ndarray) -> float:
        """Coefficient of the leading block; zero iff x lies in V^0."""
        return float((self.binv @ x)[0])

    def trailing_span(self) -> Subspace:
        """V^0: the span of the trailing blocks (codimension 1)."""
        return Subspace.from_spanning(
            np.hstack([b.basis for b in self.blocks[1:]]))

    def coords(self, point: ProjectivePoint) -> list[np.ndarray]:
        """Chart coordinates: components of the unit-leading representative."""
        f = self.leading_coefficient(point.direction)
        if abs(f) <= 1e-10:
            raise DegenerateProjection("point lies in the chart's removed set")
        comps = self.components(point.direction)
        return [v / f for v in comps]

    def sup_norm(self, point: ProjectivePoint) -> float:
        """Max block norm of the chart coordinates; always >= 1."""
        return max(float(np.linalg.norm(v)) for v in self.coords(point))

    def synthesize(self, coords: list[np.ndarray]) -> ProjectivePoint:
        """Point with the given trailing coordinates (leading block fixed)."""
        x = self.u0.copy()
        for v in coords[1:]:
            x = x + v
        return ProjectivePoint.from_vector(x)

    def dist_to_removed_set(self, point: ProjectivePoint) -> float:
        return dist_to_proj_subspace(point, self.trailing_span())


def backward_contraction_slope(spec: EnsembleSpec, word: TwoSidedWord,
                               x: ProjectivePoint, y: ProjectivePoint,
                               skip: int = 5, dist_floor: float = 1e-12,
                               dist_cap: float = 0.2) -> tuple[float, int]:
    """Decay rate of d(B_n x, B_n y) along the backward products B_n.

    B_n is the product of the n most recent negative-side matrices.  The
    slope of log-distance against n is fitted after dropping the first
    `skip` steps, the initial transient above dist_cap, and everything
    below dist_floor (the computed distance bottoms out near machine
    precision once the iterates coalesce).  Returns (slope, points).
    """
    u = x.direction.copy()
    v = y.direction.copy()
    logs = []
    for lab in word.negative[::-1]:
        a = spec.matrices[lab]
        u = a @ u
        u /= np.linalg.norm(u)
        v = a @ v
        v /= np.linalg.norm(v)
        m = np.outer(u, v)
        m -= m.T
        dist = min(1.0, float(np.sqrt(0.5) * np.linalg.norm(m)))
        logs.append(np.log(max(dist, 1e-310)))
    logs = np.array(logs)
    n = np.arange(1, len(logs) + 1)
    ok = (n > skip) & (logs > np.log(dist_floor)) & (logs < np.log(dist_cap))
    if ok.sum() < 3:
        raise ValueError("not enough resolvable steps to fit a slope")
    slope = np.polyfit(n[ok], logs[ok], 1)[0]
    return float(slope), int(ok.sum())


def chart_perturbed_pair(chart: SplittingChart, base: ProjectivePoint,
                         level: int, rng, scale: float = 0.3
                         ) -> tuple[ProjectivePoint, ProjectivePoint]:
    """Pair agreeing in chart coordinates through block level-1.

    The second point keeps the coordinates of `base` up to block
    level - 1, perturbs block `level`, and re-randomizes everything
    beyond it.
    """
    if not 1 <= level <= chart.s:
        raise ValueError("level must be in 1..s")
    g = chart.coords(base)
    g2 = [v.copy() for v in g]
    for j in range(level, chart.s + 1):
        bump = chart.blocks[j].basis @ rng.standard_normal(chart.blocks[j].dim)
        if j == level:
            # guarantee a genuine difference at the target block
            bump += chart.blocks[j].basis[:, 0]
        g2[j] = g[j] + scale * bump
    return base, chart.synthesize(g2)
