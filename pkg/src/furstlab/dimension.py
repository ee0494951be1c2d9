"""Local dimension, slab-conditioned measures, and conservation checks.

Limits over shrinking radii become least-squares slopes over a geometric
radii grid, conditioning on measure-zero fibers becomes rejection
sampling into width-delta slabs, and dimension conservation is checked
by comparing projected, sliced, and total estimates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import (EmpiricalProjectiveMeasure, _measure_block,
                       _sign_normalize_rows, boundary_point)
from .cocycle import OseledetsFrame
from .ensemble import EnsembleSpec
from .errors import InsufficientMass, SlabTooThin
from .projective import ProjectivePoint, Subspace

_PROBE_STREAM = 668813
_SLAB_STREAM = 410229

MIN_BALL_ATOMS = 30
MIN_ACCEPT_RATE = 1e-5


@dataclass(frozen=True)
class RadiiGrid:
    """Decreasing geometric grid r0 * ratio^k for k = 0..k_max."""

    r0: float
    ratio: float
    k_max: int

    def __post_init__(self):
        if not 0.0 < self.r0 <= 1.0:
            raise ValueError("r0 must lie in (0, 1]")
        if not 0.5 <= self.ratio <= 0.95:
            raise ValueError("ratio must lie in [0.5, 0.95]")
        if self.k_max < 2:
            raise ValueError("k_max must be >= 2")

    @property
    def radii(self) -> np.ndarray:
        return self.r0 * self.ratio ** np.arange(self.k_max + 1)


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    stderr: float
    radii_used: RadiiGrid
    fit_r2: float
    kind: str
    flagged_non_exact: bool = False


@dataclass(frozen=True)
class SlabCondition:
    """Width-delta surrogate for conditioning on a projection fiber.

    Points are kept when the image of their boundary point under the
    projection onto the orthocomplement of target_subspace falls within
    `width` of `anchor` (which must lie in that orthocomplement).
    """

    kind: str  # "slice" or "partition"
    target_subspace: Subspace
    anchor: ProjectivePoint
    width: float

    def __post_init__(self):
        if self.kind not in ("slice", "partition"):
            raise ValueError("kind must be 'slice' or 'partition'")
        if not 0.0 < self.width <= 0.2:
            raise ValueError("width must lie in (0, 0.2]")
        perp = self.target_subspace.complement()
        inside = np.linalg.norm(perp.basis.T @ self.anchor.direction)
        if abs(inside - 1.0) > 1e-6:
            raise ValueError("anchor must lie in P(target^perp)")


def _metric_dists(dirs: np.ndarray, center: np.ndarray) -> np.ndarray:
    cos = np.clip(np.abs(dirs @ center), 0.0, 1.0)
    return np.sqrt(1.0 - cos * cos)


def _fit_loglog(radii, masses, counts, min_atoms=MIN_BALL_ATOMS):
    usable = (counts >= min_atoms) & (masses > 0.0)
    if usable.sum() < 3:
        raise InsufficientMass(
            f"only {int(usable.sum())} usable radii (need >= 3)")
    lx = np.log(radii[usable])
    ly = np.log(masses[usable])
    n = len(lx)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    if n > 2 and sxx > 0.0:
        se = float(np.sqrt(np.sum(resid**2) / (n - 2) / sxx))
    else:
        se = 0.0
    sst = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if sst == 0.0 else 1.0 - float(np.sum(resid**2)) / sst
    return float(slope), se, r2


def ball_masses(nu: EmpiricalProjectiveMeasure, center: np.ndarray,
                radii: np.ndarray):
    """Weights and atom counts of metric balls around a unit direction."""
    dists = _metric_dists(nu.directions, center)
    order = np.argsort(dists)
    sorted_d = dists[order]
    cum_w = np.cumsum(nu.weights[order])
    idx = np.searchsorted(sorted_d, radii, side="right")
    masses = np.where(idx > 0, cum_w[np.maximum(idx - 1, 0)], 0.0)
    return masses, idx


def local_dimension(nu: EmpiricalProjectiveMeasure, x: ProjectivePoint,
                    grid: RadiiGrid) -> DimensionEstimate:
    """Slope of log ball mass against log radius at one point.

    Only radii whose ball holds at least MIN_BALL_ATOMS atoms enter the
    fit; fewer than three usable radii raise InsufficientMass.
    """
    radii = grid.radii
    masses, counts = ball_masses(nu, x.direction, radii)
    slope, se, r2 = _fit_loglog(radii, masses, counts)
    return DimensionEstimate(value=max(0.0, slope), stderr=se,
                             radii_used=grid, fit_r2=r2,
                             kind="local_at_point")


def measure_dimension(nu: EmpiricalProjectiveMeasure, grid: RadiiGrid,
                      probes: int, seed: int,
                      kind: str = "measure_average") -> DimensionEstimate:
    """Median local dimension over probe atoms drawn from the measure.

    stderr is the median absolute deviation across probes; the estimate
    is flagged when that spread exceeds three times the pooled per-probe
    regression error (evidence against exact dimensionality).
    """
    if probes < 30:
        raise ValueError("measure_dimension needs probes >= 30")
    rng = np.random.default_rng([_PROBE_STREAM, seed])
    idx = rng.choice(nu.n_atoms, size=probes, p=nu.weights)
    values, ses, r2s = [], [], []
    for k in idx:
        try:
            est = local_dimension(nu, nu.point(int(k)), grid)
        except InsufficientMass:
            continue
        values.append(est.value)
        ses.append(est.stderr)
        r2s.append(est.fit_r2)
    if len(values) < max(3, probes // 2):
        raise InsufficientMass(
            f"only {len(values)}/{probes} probes produced fits")
    values = np.array(values)
    med = float(np.median(values))
    mad = float(np.median(np.abs(values - med)))
    pooled = float(np.median(ses))
    return DimensionEstimate(value=med, stderr=mad, radii_used=grid,
                             fit_r2=float(np.median(r2s)), kind=kind,
                             flagged_non_exact=bool(mad > 3.0 * pooled
                                                    and pooled > 0.0))


@dataclass
class BoundarySampler:
    """Draws fresh boundary directions in deterministic seed-keyed blocks."""

    spec: EnsembleSpec
    prefix_len: int
    seed: int
    accept_tol: float = 1e-9
    max_prefix: int = 10_000
    block_size: int = 4096

    def draw_block(self, block_idx: int) -> np.ndarray:
        return _measure_block(self.spec, [_SLAB_STREAM, self.seed], block_idx,
                              self.block_size, self.prefix_len,
                              self.accept_tol, self.max_prefix)

    def plain_measure(self, n_samples: int) -> EmpiricalProjectiveMeasure:
        blocks = []
        total = 0
        idx = 0
        while total < n_samples:
            b = self.draw_block(idx)
            blocks.append(b)
            total += len(b)
            idx += 1
        dirs = np.vstack(blocks)[:n_samples]
        return EmpiricalProjectiveMeasure(
            directions=dirs, weights=np.full(n_samples, 1.0 / n_samples),
            ambient=Subspace(np.eye(self.spec.dim_v)),
            provenance={"seed": self.seed, "n_samples": n_samples,
                        "prefix_len": self.prefix_len,
                        "ensemble": self.spec.name})


def condition_measure(sampler: BoundarySampler, cond: SlabCondition,
                      n_keep: int, max_draws: int = 4_000_000
                      ) -> EmpiricalProjectiveMeasure:
    """Rejection-sample boundary points into the slab of the condition.

    Keeps drawing blocks until n_keep atoms land within width of the
    anchor (measured after projecting onto the orthocomplement of the
    target subspace).  Raises SlabTooThin when the acceptance rate drops
    below MIN_ACCEPT_RATE or the draw budget runs out.
    """
    perp = cond.target_subspace.complement()
    anchor = perp.basis.T @ cond.anchor.direction
    anchor = anchor / np.linalg.norm(anchor)
    kept = []
    kept_n = 0
    draws = 0
    block_idx = 0
    while kept_n < n_keep:
        if draws >= max_draws:
            rate = kept_n / max(draws, 1)
            raise SlabTooThin(
                f"acceptance rate {rate:.2e} with {kept_n}/{n_keep} kept "
                f"after {draws} draws; widen the slab or raise the budget")
        dirs = sampler.draw_block(block_idx)
        block_idx += 1
        draws += len(dirs)
        proj = dirs @ perp.basis
        norms = np.linalg.norm(proj, axis=1)
        ok = norms > 1e-10
        cos = np.zeros(len(dirs))
        cos[ok] = np.clip(np.abs(proj[ok] @ anchor) / norms[ok], 0.0, 1.0)
        dist = np.sqrt(1.0 - cos * cos)
        sel = ok & (dist <= cond.width)
        if np.any(sel):
            kept.append(dirs[sel])
            kept_n += int(sel.sum())
        if (kept_n < n_keep and draws >= 500_000
                and kept_n / draws < MIN_ACCEPT_RATE):
            raise SlabTooThin(
                f"acceptance rate {kept_n / draws:.2e} below "
                f"{MIN_ACCEPT_RATE}; widen the slab")
    dirs = np.vstack(kept)[:n_keep]
    rate = kept_n / draws
    return EmpiricalProjectiveMeasure(
        directions=dirs, weights=np.full(n_keep, 1.0 / n_keep),
        ambient=Subspace(np.eye(sampler.spec.dim_v)),
        provenance={"seed": sampler.seed, "n_samples": n_keep,
                    "prefix_len": sampler.prefix_len,
                    "acceptance_rate": rate, "slab_width": cond.width,
                    "condition_kind": cond.kind,
                    "ensemble": sampler.spec.name})


def project_measure(nu: EmpiricalProjectiveMeasure,
                    target: Subspace) -> EmpiricalProjectiveMeasure:
    """Pushforward of the cloud under orthogonal projection onto target.

    Atoms whose projection degenerates are dropped (their weight is
    renormalized away); directions stay expressed in ambient coordinates.
    """
    proj = nu.directions @ target.basis @ target.basis.T
    norms = np.linalg.norm(proj, axis=1)
    ok = norms > 1e-10
    if not np.any(ok):
        raise InsufficientMass("entire cloud degenerates under projection")
    dirs = _sign_normalize_rows(proj[ok] / norms[ok][:, None])
    w = nu.weights[ok]
    return EmpiricalProjectiveMeasure(
        directions=dirs, weights=w / w.sum(), ambient=target,
        provenance=dict(nu.provenance, projected_dim=target.dim))


def _frame_anchor(spec: EnsembleSpec, frame: OseledetsFrame):
    """Boundary point of the frame's own word."""
    return boundary_point(spec, frame.word.nonnegative).point


def transverse_dimension(spec: EnsembleSpec, frame: OseledetsFrame, i: int,
                         grid: RadiiGrid, budget: int,
                         n_keep: int | None = None) -> DimensionEstimate:
    """Slope of conditional slab mass in shrinking projected balls.

    Conditions on the level-(i-1) partition: the negative word is fixed
    by the frame, and (for i >= 2) fresh boundary points are kept only
    when their projection orthogonal to V^(i-1) lies within
    0.1 * min(radii) of the frame's own projected boundary point.  Ball
    membership at level i uses the projection orthogonal to V^i.
    """
    if not 1 <= i <= frame.s:
        raise ValueError("level i must be in 1..s")
    anchor_pt = _frame_anchor(spec, frame)
    sampler = BoundarySampler(spec, prefix_len=max(100, frame.word.n_fwd),
                              seed=frame.word.seed)
    radii = grid.radii
    if n_keep is None:
        n_keep = min(20_000, budget)
    if i == 1:
        cloud = sampler.plain_measure(min(budget, max(n_keep, 50_000)))
    else:
        perp_prev = frame.flag(i - 1).complement()
        anchor_prev = perp_prev.basis @ (perp_prev.basis.T @ anchor_pt.direction)
        cond = SlabCondition(kind="partition",
                             target_subspace=frame.flag(i - 1),
                             anchor=ProjectivePoint.from_vector(anchor_prev),
                             width=0.1 * float(radii.min()))
        cloud = condition_measure(sampler, cond, n_keep, max_draws=budget)

    perp_i = frame.flag(i).complement()
    proj = cloud.directions @ perp_i.basis
    norms = np.linalg.norm(proj, axis=1)
    ok = norms > 1e-10
    proj = proj[ok] / norms[ok][:, None]
    w = cloud.weights[ok]
    w = w / w.sum()
    a = perp_i.basis.T @ anchor_pt.direction
    a /= np.linalg.norm(a)
    cos = np.clip(np.abs(proj @ a), 0.0, 1.0)
    dists = np.sqrt(1.0 - cos * cos)
    order = np.argsort(dists)
    cum_w = np.cumsum(w[order])
    idx = np.searchsorted(dists[order], radii, side="right")
    masses = np.where(idx > 0, cum_w[np.maximum(idx - 1, 0)], 0.0)
    slope, se, r2 = _fit_loglog(radii, masses, idx)
    return DimensionEstimate(value=max(0.0, slope), stderr=se,
                             radii_used=grid, fit_r2=r2, kind="transverse")


@dataclass(frozen=True)
class ConservationReport:
    dim_proj: DimensionEstimate
    dim_slice: DimensionEstimate
    dim_total: DimensionEstimate
    defect: float


@dataclass(frozen=True)
class ConservationBudgets:
    n_samples: int = 100_000
    prefix_len: int = 100
    grid: RadiiGrid = field(default_factory=lambda: RadiiGrid(0.25, 0.5, 7))
    slab_keep: int = 20_000
    slab_draws: int = 4_000_000
    probes: int = 40
    delta: float | None = None  # default: 0.1 * smallest radius


def conservation_check(spec: EnsembleSpec, frame: OseledetsFrame, i: int,
                       budgets: ConservationBudgets) -> ConservationReport:
    """Projected + sliced dimension against the total, at flag level i."""
    if not 0 <= i <= frame.s:
        raise ValueError("level i must be in 0..s")
    grid = budgets.grid
    sampler = BoundarySampler(spec, prefix_len=budgets.prefix_len,
                              seed=frame.word.seed)
    cloud = sampler.plain_measure(budgets.n_samples)
    dim_total = measure_dimension(cloud, grid, budgets.probes,
                                  seed=frame.word.seed, kind="measure_average")

    perp = frame.flag(i).complement()
    projected = project_measure(cloud, perp)
    dim_proj = measure_dimension(projected, grid, budgets.probes,
                                 seed=frame.word.seed + 1, kind="projected")

    anchor_pt = _frame_anchor(spec, frame)
    anchor_dir = perp.basis @ (perp.basis.T @ anchor_pt.direction)
    delta = budgets.delta if budgets.delta is not None else \
        0.1 * float(grid.radii.min())
    cond = SlabCondition(kind="slice", target_subspace=frame.flag(i),
                         anchor=ProjectivePoint.from_vector(anchor_dir),
                         width=delta)
    slab = condition_measure(sampler, cond, budgets.slab_keep,
                             max_draws=budgets.slab_draws)
    dim_slice = measure_dimension(slab, grid, budgets.probes,
                                  seed=frame.word.seed + 2, kind="sliced")

    defect = abs(dim_proj.value + dim_slice.value - dim_total.value)
    return ConservationReport(dim_proj=dim_proj, dim_slice=dim_slice,
                              dim_total=dim_total, defect=defect)
