"""Boundary map estimates and the empirical stationary measure.

The attracting direction of a long forward product estimates the boundary
point of the driving word; i.i.d. words give an empirical version of the
stationary measure on projective space.  Sampling is blocked, with one
RNG stream per block, so results are identical for any worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ensemble import EnsembleSpec
from .errors import InsufficientMass, NonProximalError
from .projective import ProjectivePoint, Subspace

_MEASURE_STREAM = 733100
_HYPERPLANE_STREAM = 550211
_ENERGY_STREAM = 102987

BLOCK_SIZE = 4096
MIN_ATTRACT_RATIO = 10.0


@dataclass(frozen=True)
class BoundarySample:
    """Estimated boundary point with its self-consistency gap."""

    point: ProjectivePoint
    word_prefix_len: int
    convergence_gap: float


@dataclass(frozen=True)
class EmpiricalProjectiveMeasure:
    """Weighted point cloud on P(V) (directions live in the ambient space)."""

    directions: np.ndarray  # (n, dim) unit rows, sign-normalized
    weights: np.ndarray  # (n,), positive, sums to 1
    ambient: Subspace
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise ValueError("atom weights must sum to 1")
        if np.any(self.weights <= 0.0):
            raise ValueError("atom weights must be positive")

    @property
    def n_atoms(self) -> int:
        return len(self.weights)

    def point(self, k: int) -> ProjectivePoint:
        return ProjectivePoint.from_vector(self.directions[k])

    def save_table(self, path) -> None:
        """Flat table: provenance header, then one row per atom."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# provenance " + json.dumps(self.provenance,
                                                  sort_keys=True) + "\n")
            fh.write("# ambient_dim %d subspace_dim %d\n"
                     % (self.ambient.ambient_dim, self.ambient.dim))
            for row in self.ambient.basis.T:
                fh.write("# basis " + "\t".join(format(v, ".17g")
                                                for v in row) + "\n")
            cols = [f"x{i}" for i in range(self.directions.shape[1])]
            fh.write("\t".join(cols + ["weight"]) + "\n")
            for d_row, w in zip(self.directions, self.weights):
                fh.write("\t".join(format(v, ".17g") for v in d_row)
                         + "\t" + format(w, ".17g") + "\n")

    @classmethod
    def load_table(cls, path) -> "EmpiricalProjectiveMeasure":
        provenance: dict = {}
        basis_rows = []
        data = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("# provenance "):
                    provenance = json.loads(line[len("# provenance "):])
                elif line.startswith("# basis "):
                    basis_rows.append(
                        [float(v) for v in line[len("# basis "):].split("\t")])
                elif line.startswith("#") or line.startswith("x0\t"):
                    continue
                else:
                    data.append([float(v) for v in line.split("\t")])
        arr = np.array(data)
        dirs, w = arr[:, :-1], arr[:, -1]
        ambient = Subspace(np.array(basis_rows).T) if basis_rows else \
            Subspace(np.eye(dirs.shape[1]))
        return cls(directions=dirs, weights=w, ambient=ambient,
                   provenance=provenance)


def _sign_normalize_rows(dirs: np.ndarray) -> np.ndarray:
    first = np.argmax(dirs != 0.0, axis=1)
    signs = np.sign(dirs[np.arange(len(dirs)), first])
    signs[signs == 0.0] = 1.0
    return dirs * signs[:, None]


def _row_wedge_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Projective distance between unit rows of a and b, accurate near 0."""
    m = a[:, :, None] * b[:, None, :]
    m -= np.swapaxes(m, 1, 2)
    return np.minimum(1.0, np.sqrt(0.5 * np.sum(m * m, axis=(1, 2))))


def boundary_point(spec: EnsembleSpec, forward_labels,
                   accept_tol: float = 1e-9) -> BoundarySample:
    """Top left-singular direction of the forward product of one word.

    The convergence gap is the projective distance between the estimates
    at full and half word length.  Raises NonProximalError when the
    product's top two singular values stay within MIN_ATTRACT_RATIO.
    """
    labels = np.asarray(forward_labels, dtype=np.int64)
    n = len(labels)
    if n < 8:
        raise ValueError("boundary_point needs a word of length >= 8")
    if accept_tol <= 0.0:
        raise ValueError("accept_tol must be positive")
    half = n // 2
    m = np.eye(spec.dim_v)
    u_half = None
    for t in range(n):
        m = m @ spec.matrices[labels[t]]
        m /= np.max(np.abs(m))
        if t + 1 == half:
            u_half = np.linalg.svd(m)[0][:, 0]
    u, s, _ = np.linalg.svd(m)
    ratio = float(s[0] / s[1]) if s[1] > 0.0 else np.inf
    if ratio < MIN_ATTRACT_RATIO:
        raise NonProximalError(
            f"sigma1/sigma2 = {ratio:.3g} < {MIN_ATTRACT_RATIO}; "
            "no attracting direction")
    gap = float(_row_wedge_dist(u[:, 0][None, :], u_half[None, :])[0])
    return BoundarySample(point=ProjectivePoint.from_vector(u[:, 0]),
                          word_prefix_len=n, convergence_gap=gap)


def _attracting_directions(spec: EnsembleSpec, labels: np.ndarray):
    """Batched top directions, gaps, and sigma ratios for words (rows)."""
    nb, steps = labels.shape
    d = spec.dim_v
    m = np.broadcast_to(np.eye(d), (nb, d, d)).copy()
    half = steps // 2
    u_half = None
    for t in range(steps):
        m = np.matmul(m, spec.matrices[labels[:, t]])
        if (t + 1) % 25 == 0 or t + 1 in (half, steps):
            m /= np.max(np.abs(m), axis=(1, 2))[:, None, None]
        if t + 1 == half:
            u_half = np.linalg.svd(m)[0][:, :, 0]
    u, s, _ = np.linalg.svd(m)
    dirs = u[:, :, 0]
    with np.errstate(divide="ignore"):
        ratios = np.where(s[:, 1] > 0.0, s[:, 0] / np.maximum(s[:, 1], 1e-300),
                          np.inf)
    gaps = _row_wedge_dist(dirs, u_half)
    return dirs, gaps, ratios


def _measure_block(spec: EnsembleSpec, key: list, block_idx: int, count: int,
                   prefix_len: int, accept_tol: float, max_prefix: int):
    rng = np.random.default_rng(key + [block_idx])
    labels = rng.choice(spec.n_labels, size=(count, prefix_len), p=spec.probs)
    dirs, gaps, ratios = _attracting_directions(spec, labels)
    bad = np.flatnonzero((gaps > accept_tol) | (ratios < MIN_ATTRACT_RATIO))
    for i in bad:
        length = prefix_len
        sub = np.random.default_rng(key + [block_idx, int(i)])
        while True:
            length *= 2
            if length > max_prefix:
                raise NonProximalError(
                    "boundary sample failed to converge at the prefix cap")
            word = sub.choice(spec.n_labels, size=(1, length), p=spec.probs)
            d1, g1, r1 = _attracting_directions(spec, word)
            if g1[0] <= accept_tol and r1[0] >= MIN_ATTRACT_RATIO:
                dirs[i], gaps[i], ratios[i] = d1[0], g1[0], r1[0]
                break
    return _sign_normalize_rows(dirs / np.linalg.norm(dirs, axis=1)[:, None])


def sample_measure(spec: EnsembleSpec, n_samples: int, prefix_len: int,
                   seed: int, accept_tol: float = 1e-9,
                   max_prefix: int = 10_000, workers: int = 1
                   ) -> EmpiricalProjectiveMeasure:
    """n_samples i.i.d. boundary points with equal weights.

    Deterministic per seed: blocks of fixed size own independent RNG
    streams and are concatenated in block order, so the result does not
    depend on the worker count.  Samples whose convergence gap misses
    accept_tol are retried at doubled prefix length, up to max_prefix.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    counts = [min(BLOCK_SIZE, n_samples - k * BLOCK_SIZE)
              for k in range((n_samples + BLOCK_SIZE - 1) // BLOCK_SIZE)]

    def job(args):
        idx, cnt = args
        return _measure_block(spec, [_MEASURE_STREAM, seed], idx, cnt,
                              prefix_len, accept_tol, max_prefix)

    jobs = list(enumerate(counts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(job, jobs))
    else:
        blocks = [job(j) for j in jobs]
    dirs = np.vstack(blocks)
    weights = np.full(n_samples, 1.0 / n_samples)
    return EmpiricalProjectiveMeasure(
        directions=dirs, weights=weights, ambient=Subspace(np.eye(spec.dim_v)),
        provenance={"seed": seed, "n_samples": n_samples,
                    "prefix_len": prefix_len, "accept_tol": accept_tol,
                    "ensemble": spec.name})


def _angles(dirs: np.ndarray) -> np.ndarray:
    """Angle in [0, pi) of each 2-d direction row."""
    th = np.arctan2(dirs[:, 1], dirs[:, 0])
    return np.mod(th, np.pi)


def _weighted_ks(x1, w1, x2, w2) -> float:
    o1, o2 = np.argsort(x1), np.argsort(x2)
    x1s, c1 = x1[o1], np.cumsum(w1[o1])
    x2s, c2 = x2[o2], np.cumsum(w2[o2])
    grid = np.concatenate([x1s, x2s])
    grid.sort()
    f1 = np.where(np.searchsorted(x1s, grid, side="right") > 0,
                  c1[np.searchsorted(x1s, grid, side="right") - 1], 0.0)
    f2 = np.where(np.searchsorted(x2s, grid, side="right") > 0,
                  c2[np.searchsorted(x2s, grid, side="right") - 1], 0.0)
    return float(np.max(np.abs(f1 / c1[-1] - f2 / c2[-1])))


def _pairwise_proj_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    cos = np.clip(np.abs(a @ b.T), 0.0, 1.0)
    return np.sqrt(1.0 - cos * cos)


def stationarity_discrepancy(spec: EnsembleSpec,
                             nu: EmpiricalProjectiveMeasure) -> float:
    """Discrepancy between nu and the average of its matrix pushforwards.

    Kolmogorov distance of angular CDFs in 2-d; an energy-distance
    statistic under the projective metric in higher dimension (subsampled
    beyond 1500 atoms per side, deterministically).
    """
    if nu.ambient.dim != spec.dim_v:
        raise ValueError("stationarity check expects a measure on all of P(V)")
    dirs, w = nu.directions, nu.weights
    push_dirs = []
    push_w = []
    for k in range(spec.n_labels):
        img = dirs @ spec.matrices[k].T
        img /= np.linalg.norm(img, axis=1)[:, None]
        push_dirs.append(_sign_normalize_rows(img))
        push_w.append(float(spec.probs[k]) * w)
    pd = np.vstack(push_dirs)
    pw = np.concatenate(push_w)

    if spec.dim_v == 2:
        return _weighted_ks(_angles(dirs), w, _angles(pd), pw)

    cap = 1500
    rng = np.random.default_rng(
        [_ENERGY_STREAM, int(nu.provenance.get("seed", 0))])
    if len(w) > cap:
        idx = rng.choice(len(w), size=cap, replace=False, p=w)
        a, wa = dirs[idx], np.full(cap, 1.0 / cap)
    else:
        a, wa = dirs, w
    if len(pw) > cap:
        idx = rng.choice(len(pw), size=cap, replace=False, p=pw / pw.sum())
        b, wb = pd[idx], np.full(cap, 1.0 / cap)
    else:
        b, wb = pd, pw / pw.sum()
    dxy = float(wa @ _pairwise_proj_dist(a, b) @ wb)
    dxx = float(wa @ _pairwise_proj_dist(a, a) @ wa)
    dyy = float(wb @ _pairwise_proj_dist(b, b) @ wb)
    return max(0.0, 2.0 * dxy - dxx - dyy)


@dataclass(frozen=True)
class GuivarchBound:
    """Fitted power-law bound on hyperplane-neighborhood masses."""

    alpha_fit: float
    c_fit: float
    violations: int
    n_hyperplanes: int
    radii: np.ndarray


def guivarch_mass_bound(nu: EmpiricalProjectiveMeasure, trials: int,
                        radii, seed: int = 0,
                        normals: np.ndarray | None = None) -> GuivarchBound:
    """Power-law regularity of hyperplane-neighborhood masses.

    For each sampled hyperplane (unit normal y) and radius r the mass of
    {x : |<x, y>| <= r} is measured; per-hyperplane log-log fits give a
    slope floor alpha_fit and prefactor ceiling c_fit, and every (W, r)
    pair is then scanned against mass <= 1.1 * c_fit * r^alpha_fit.
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0.0) or np.any(radii >= 1.0):
        raise ValueError("radii must lie in (0, 1)")
    if np.any(np.diff(radii) >= 0.0):
        raise ValueError("radii must be strictly decreasing")
    d = nu.directions.shape[1]
    if normals is None:
        rng = np.random.default_rng([_HYPERPLANE_STREAM, seed])
        normals = rng.standard_normal((trials, d))
        normals /= np.linalg.norm(normals, axis=1)[:, None]
    else:
        normals = np.asarray(normals, dtype=float)

    slopes, prefs = [], []
    masses = np.empty((len(normals), len(radii)))
    for j, y in enumerate(normals):
        dist = np.abs(nu.directions @ y)
        for k, r in enumerate(radii):
            masses[j, k] = float(nu.weights[dist <= r].sum())
        usable = masses[j] > 0.0
        if usable.sum() >= 3:
            lx = np.log(radii[usable])
            ly = np.log(masses[j][usable])
            slope, intercept = np.polyfit(lx, ly, 1)
            slopes.append(float(slope))
            prefs.append(float(np.exp(intercept)))
    if not slopes:
        raise InsufficientMass("no hyperplane produced a fittable mass decay")

    alpha = min(slopes)
    c = max(prefs)
    bound = 1.1 * c * radii[None, :] ** alpha
    violations = int(np.sum(masses > bound))
    return GuivarchBound(alpha_fit=alpha, c_fit=c, violations=violations,
                         n_hyperplanes=len(normals), radii=radii)
