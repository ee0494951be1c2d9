"""Random words, matrix products, Lyapunov spectra, and Oseledets data.

Long products are never formed densely: they are accumulated either as
QR-reorthonormalized frames (for exponents and singular subspaces) or in
an orthogonal x log-scaled-triangular factored form (for explicit
products), so norms up to e^(+-700) and far beyond never overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateSpectrumError, IntersectionError, RangeError,
                     ResolutionError)
from .ensemble import EnsembleSpec
from .projective import ProjectivePoint, Subspace, splitting_min_sin, subspace_gap

_WORD_STREAM = 462201
_SPECTRUM_STREAM = 915533

# A flag level is considered resolved when the corresponding singular-value
# ratio of the finite product exceeds this.
MIN_RESOLVED_RATIO = 1e3


@dataclass(frozen=True)
class TwoSidedWord:
    """Finite two-sided word: negative part (w_-n..w_-1) and forward part."""

    negative: np.ndarray  # label indices, index 0 holds w_{-n_back}
    nonnegative: np.ndarray  # label indices, index 0 holds w_0
    seed: int

    def __post_init__(self):
        if len(self.negative) < 1 or len(self.nonnegative) < 1:
            raise ValueError("both word sides need length >= 1")

    @property
    def n_back(self) -> int:
        return len(self.negative)

    @property
    def n_fwd(self) -> int:
        return len(self.nonnegative)

    def label_index(self, pos: int) -> int:
        """Label index at signed position pos in [-n_back, n_fwd)."""
        if pos < -self.n_back or pos >= self.n_fwd:
            raise RangeError(f"position {pos} outside word bounds")
        if pos < 0:
            return int(self.negative[self.n_back + pos])
        return int(self.nonnegative[pos])

    def shift_back(self) -> "TwoSidedWord":
        """The word of sigma^(-1) omega: w_-1 moves to position 0."""
        if self.n_back < 2:
            raise RangeError("shift_back needs n_back >= 2")
        return TwoSidedWord(
            negative=self.negative[:-1],
            nonnegative=np.concatenate([self.negative[-1:], self.nonnegative]),
            seed=self.seed,
        )

    def shift_fwd(self) -> "TwoSidedWord":
        """The word of sigma omega: w_0 moves to position -1."""
        if self.n_fwd < 2:
            raise RangeError("shift_fwd needs n_fwd >= 2")
        return TwoSidedWord(
            negative=np.concatenate([self.negative, self.nonnegative[:1]]),
            nonnegative=self.nonnegative[1:],
            seed=self.seed,
        )


def sample_word(spec: EnsembleSpec, n_back: int, n_fwd: int,
                seed: int) -> TwoSidedWord:
    """I.i.d. labels with law p; deterministic given seed."""
    if n_back < 1 or n_fwd < 1:
        raise ValueError("n_back and n_fwd must be >= 1")
    rng = np.random.default_rng([_WORD_STREAM, seed])
    labels = rng.choice(spec.n_labels, size=n_back + n_fwd, p=spec.probs)
    w = TwoSidedWord(negative=labels[:n_back], nonnegative=labels[n_back:],
                     seed=seed)
    w.negative.flags.writeable = False
    w.nonnegative.flags.writeable = False
    return w


def _qr_pos(z: np.ndarray):
    """QR with positive diagonal of R."""
    q, r = np.linalg.qr(z)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs, r * signs[:, None]


@dataclass
class FactoredProduct:
    """Matrix product in the form Q * diag(exp(log_diag)) * upper.

    Q is orthogonal, upper is unit-diagonal upper triangular.  Exact for
    short words; for long words the log-diagonal carries the growth.
    """

    q: np.ndarray
    log_diag: np.ndarray
    upper: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "FactoredProduct":
        return cls(np.eye(dim), np.zeros(dim), np.eye(dim))

    def prepend(self, a: np.ndarray) -> None:
        """Replace the held product P by a @ P."""
        qn, r = _qr_pos(a @ self.q)
        rd = np.diag(r).copy()
        # (scaled R) entries: (R_ij / R_ii) * exp(ld_j - ld_i); the log
        # diagonal is sorted downward in practice so the exponent is <= 0.
        ld = self.log_diag
        expo = np.clip(ld[None, :] - ld[:, None], -745.0, 700.0)
        scaled = (r / rd[:, None]) * np.exp(expo)
        self.upper = np.triu(scaled @ self.upper)
        np.fill_diagonal(self.upper, 1.0)
        self.q = qn
        self.log_diag = ld + np.log(rd)

    def matrix(self) -> np.ndarray:
        """Dense product; overflows only if exp(log_diag) does."""
        return self.q @ (np.exp(self.log_diag)[:, None] * self.upper)

    def top_direction(self) -> tuple[ProjectivePoint, float]:
        """Dominant left-singular direction and the sigma1/sigma2 ratio."""
        scale = np.exp(self.log_diag - self.log_diag.max())
        u, s, _ = np.linalg.svd(scale[:, None] * self.upper)
        ratio = float(s[0] / s[1]) if s[1] > 0.0 else np.inf
        return ProjectivePoint.from_vector(self.q @ u[:, 0]), ratio


def forward_product(spec: EnsembleSpec, word: TwoSidedWord, start: int,
                    stop: int) -> FactoredProduct:
    """Factored product of A at positions start..stop-1, left to right."""
    if start > stop:
        raise RangeError("need start <= stop")
    if start < -word.n_back or stop > word.n_fwd:
        raise RangeError("product range outside word bounds")
    prod = FactoredProduct.identity(spec.dim_v)
    for pos in range(stop - 1, start - 1, -1):
        prod.prepend(spec.matrices[word.label_index(pos)])
    return prod


@dataclass(frozen=True)
class LyapunovSpectrum:
    """Grouped exponents (nats/step) with multiplicities and raw QR rates."""

    exponents: np.ndarray  # strictly decreasing, length s+1
    multiplicities: np.ndarray  # positive ints summing to dim_v
    raw_exponents: np.ndarray  # length dim_v, ungrouped, sorted decreasing
    raw_stderr: np.ndarray  # per raw coordinate, across seeds
    stderr: np.ndarray  # per grouped exponent
    steps: int
    n_seeds: int
    grouping_tol: float

    @property
    def s(self) -> int:
        return len(self.exponents) - 1

    @property
    def dim_v(self) -> int:
        return int(self.multiplicities.sum())

    def q(self, i: int) -> int:
        """Cumulative multiplicity d_0 + ... + d_i (q(-1) = 0)."""
        return int(self.multiplicities[: i + 1].sum())

    def lam_tilde(self, i: int) -> float:
        """Normalized gap lambda_i - lambda_0 (negative for i >= 1)."""
        return float(self.exponents[i] - self.exponents[0])


def _batched_benettin(spec: EnsembleSpec, labels: np.ndarray) -> np.ndarray:
    """Per-coordinate QR rates for a batch of label trajectories.

    labels has shape (n_traj, steps); reorthonormalization happens every
    step via modified Gram-Schmidt vectorized over the batch.
    """
    n, steps = labels.shape
    d = spec.dim_v
    q = np.broadcast_to(np.eye(d), (n, d, d)).copy()
    acc = np.zeros((n, d))
    z = np.empty_like(q)
    for t in range(steps):
        np.matmul(spec.matrices[labels[:, t]], q, out=z)
        for j in range(d):
            v = z[:, :, j]
            for k in range(j):
                v -= np.sum(q[:, :, k] * v, axis=1)[:, None] * q[:, :, k]
            norm = np.linalg.norm(v, axis=1)
            q[:, :, j] = v / norm[:, None]
            acc[:, j] += np.log(norm)
    return acc / steps


def lyapunov_spectrum(spec: EnsembleSpec, steps: int, seeds,
                      grouping_tol: float | None = None) -> LyapunovSpectrum:
    """QR-reorthonormalized Monte Carlo estimate of the Lyapunov spectrum.

    Raw per-coordinate rates are averaged over seeds, then merged into
    (lambda_i, d_i) groups wherever adjacent rates are closer than the
    grouping tolerance (default 10x the pooled standard error).  Raises
    DegenerateSpectrumError when a gap sits within one standard error of
    the tolerance, i.e. the grouping is order-ambiguous.
    """
    if steps < 10**3:
        raise ValueError("lyapunov_spectrum needs steps >= 1e3")
    seeds = list(seeds)
    labels = np.empty((len(seeds), steps), dtype=np.int64)
    for k, seed in enumerate(seeds):
        rng = np.random.default_rng([_SPECTRUM_STREAM, int(seed)])
        labels[k] = rng.choice(spec.n_labels, size=steps, p=spec.probs)
    per_seed = -np.sort(-_batched_benettin(spec, labels), axis=1)
    raw = per_seed.mean(axis=0)
    if len(seeds) > 1:
        raw_se = per_seed.std(axis=0, ddof=1) / np.sqrt(len(seeds))
    else:
        raw_se = np.zeros(spec.dim_v)
    pooled = float(raw_se.mean())

    tol = float(grouping_tol) if grouping_tol is not None else max(
        10.0 * pooled, 1e-12)
    gaps = raw[:-1] - raw[1:]
    if np.any(np.abs(gaps - tol) <= pooled):
        raise DegenerateSpectrumError(
            "exponent gap straddles the grouping tolerance within stderr; "
            "raise steps or adjust grouping_tol")
    exps, mults, ses = [], [], []
    start = 0
    for k in range(spec.dim_v):
        if k == spec.dim_v - 1 or gaps[k] >= tol:
            block = slice(start, k + 1)
            exps.append(float(raw[block].mean()))
            mults.append(k + 1 - start)
            ses.append(float(np.sqrt(np.sum(raw_se[block] ** 2))
                             / (k + 1 - start)))
            start = k + 1
    return LyapunovSpectrum(
        exponents=np.array(exps), multiplicities=np.array(mults, dtype=int),
        raw_exponents=raw, raw_stderr=raw_se, stderr=np.array(ses),
        steps=steps, n_seeds=len(seeds), grouping_tol=tol)


def _sweep_all(mats, labels) -> tuple[np.ndarray, np.ndarray]:
    """Accumulated QR frame and log rates of mats[labels] applied in order.

    Columns come back sorted by decreasing accumulated rate, so the
    leading columns span the dominant left-singular subspaces of the full
    product.  (The sort matters when the initial frame is exactly aligned
    with the singular directions, e.g. diagonal ensembles, where the QR
    iteration never reorders on its own.)
    """
    d = mats.shape[1]
    q = np.eye(d)
    acc = np.zeros(d)
    for lab in labels:
        q, r = _qr_pos(mats[lab] @ q)
        acc += np.log(np.diag(r))
    order = np.argsort(-acc, kind="stable")
    return q[:, order], acc[order]


def backward_flag(spec: EnsembleSpec, word: TwoSidedWord,
                  spectrum: LyapunovSpectrum) -> list[Subspace]:
    """Oseledets flag V^0 > ... > V^(s-1) from the backward product.

    V^i is the span of the right-singular directions of
    A_{w_-n} ... A_{w_-1} carrying the dim - (d_0+...+d_i) smallest
    singular values, i.e. the orthocomplement of the dominant
    right-singular subspace.  Raises ResolutionError when the singular
    gap at a group boundary is below MIN_RESOLVED_RATIO.
    """
    # right-singular data of B equals left-singular data of B^T, which the
    # sweep accumulates from transposes applied oldest-first
    qb, acc = _sweep_all(np.swapaxes(spec.matrices, 1, 2), word.negative)
    flags = []
    for i in range(spectrum.s):
        qi = spectrum.q(i)
        if acc[qi - 1] - acc[qi] < np.log(MIN_RESOLVED_RATIO):
            raise ResolutionError(
                f"backward product does not resolve flag level {i}; "
                "increase n_back")
        flags.append(Subspace(qb[:, qi:].copy()))
    return flags


@dataclass(frozen=True)
class OseledetsFrame:
    """Per-trajectory flags, splitting, and minimal splitting angle."""

    word: TwoSidedWord
    flags: tuple[Subspace, ...]  # V^0 .. V^(s-1)
    splitting: tuple[Subspace, ...]  # E^0 .. E^s
    kappa: float

    @property
    def s(self) -> int:
        return len(self.splitting) - 1

    @property
    def dim_v(self) -> int:
        return self.splitting[0].ambient_dim

    def flag(self, i: int) -> Subspace:
        """V^i with the conventions V^(-1) = V and V^s = {0}."""
        if i == -1:
            return Subspace(np.eye(self.dim_v))
        if i == self.s:
            return Subspace.trivial(self.dim_v)
        return self.flags[i]


def oseledets_splitting(spec: EnsembleSpec, word: TwoSidedWord,
                        spectrum: LyapunovSpectrum) -> OseledetsFrame:
    """Splitting E^0,...,E^s from backward flags and forward-inverse data.

    The fast subspaces W^i (right-singular spans of the forward-inverse
    product for its smallest d_0+...+d_i singular values) are intersected
    with the backward flags: E^i = V^(i-1) cap W^i.
    """
    d = spec.dim_v
    flags = backward_flag(spec, word, spectrum)

    inv_t = np.stack([np.linalg.inv(m).T for m in spec.matrices])
    qf, acc_f = _sweep_all(inv_t, word.nonnegative[::-1])
    for i in range(spectrum.s):
        cut = d - spectrum.q(i)
        if acc_f[cut - 1] - acc_f[cut] < np.log(MIN_RESOLVED_RATIO):
            raise ResolutionError(
                f"forward product does not resolve fast subspace {i}; "
                "increase n_fwd")

    blocks: list[Subspace] = []
    for i in range(spectrum.s + 1):
        di = int(spectrum.multiplicities[i])
        # x lies in the intersection iff it is orthogonal to both
        # complements; stack their bases and take the null space.
        parts = []
        if i >= 1:
            qb_lead = flags[i - 1].complement().basis
            parts.append(qb_lead)
        # complement of W^i: leading dim - q(i) columns of the forward frame
        cut = d - spectrum.q(i)
        if cut > 0:
            parts.append(qf[:, :cut])
        if not parts:
            raise IntersectionError("degenerate intersection request")
        n = np.hstack(parts)
        u, sv, _ = np.linalg.svd(n, full_matrices=True)
        rank = int(np.sum(sv > 1e-6))
        if d - rank != di:
            raise IntersectionError(
                f"dim(V^{i - 1} cap W^{i}) = {d - rank}, expected {di}")
        blocks.append(Subspace(u[:, rank:].copy()))

    kappa = splitting_min_sin(blocks)

    # splitting consistency: V^i must agree with E^(i+1) + ... + E^s
    for i in range(spectrum.s):
        tail = Subspace.from_spanning(
            np.hstack([b.basis for b in blocks[i + 1:]]))
        if subspace_gap(flags[i], tail) > 1e-6:
            raise IntersectionError(
                f"flag V^{i} inconsistent with splitting tail")
    stacked = np.hstack([b.basis for b in blocks])
    smin = float(np.linalg.svd(stacked, compute_uv=False)[-1])
    if smin < kappa / 2.0:
        raise IntersectionError(
            "splitting direct-sum check failed against kappa")

    return OseledetsFrame(word=word, flags=tuple(flags),
                          splitting=tuple(blocks), kappa=kappa)
