"""Conditional entropies, Furstenberg entropy in 2-d, and the Lyapunov
dimension with its waterfilling cross-check.

The ladder entry at level i is the entropy of the first symbol given the
boundary point's projection orthogonal to the level-i flag subspace,
averaged over the past.  Conditioning on a continuum is discretized by a
greedy metric net of cells, with a Miller-Madow correction for the
plug-in bias.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import _attracting_directions
from .cocycle import LyapunovSpectrum, TwoSidedWord, backward_flag
from .ensemble import EnsembleSpec, shannon_entropy
from .errors import DimensionUnsupported

_OUTER_STREAM = 149377
_INNER_STREAM = 662919


@dataclass(frozen=True)
class EntropyLadder:
    """H_0 >= H_1 >= ... >= H_s (nats) with per-level standard errors."""

    values: np.ndarray
    stderr: np.ndarray
    bin_width: float
    n_outer: int
    n_inner: int
    mm_correction: np.ndarray  # mean bias correction applied per level

    @property
    def s(self) -> int:
        return len(self.values) - 1


def _leader_cells(points: np.ndarray, radius: float) -> np.ndarray:
    """Leader clustering under the projective metric; cell diameter <= 2r.

    Points are unit rows; each point joins the first existing center
    within `radius`, else becomes a center.  Vectorized wave form: the
    first unassigned point claims every unassigned point within radius.
    """
    n = len(points)
    cells = np.full(n, -1, dtype=np.int64)
    remaining = np.arange(n)
    cid = 0
    while len(remaining):
        center = points[remaining[0]]
        cos = np.clip(np.abs(points[remaining] @ center), 0.0, 1.0)
        near = np.sqrt(1.0 - cos * cos) <= radius
        cells[remaining[near]] = cid
        remaining = remaining[~near]
        cid += 1
    return cells


def _plugin_conditional_entropy(symbols: np.ndarray, cells: np.ndarray,
                                n_symbols: int) -> tuple[float, float]:
    """Plug-in H(symbol | cell) with the Miller-Madow correction.

    Returns (estimate, correction magnitude); the correction is
    (K_joint - K_cell) / 2N, the difference of the per-entropy bias
    terms for H(symbol, cell) - H(cell).
    """
    n = len(symbols)
    joint = cells * n_symbols + symbols
    _, joint_counts = np.unique(joint, return_counts=True)
    _, cell_counts = np.unique(cells, return_counts=True)
    pj = joint_counts / n
    pc = cell_counts / n
    h_joint = -float(np.sum(pj * np.log(pj)))
    h_cell = -float(np.sum(pc * np.log(pc)))
    corr = (len(joint_counts) - len(cell_counts)) / (2.0 * n)
    return h_joint - h_cell + corr, corr


def conditional_entropy_ladder(spec: EnsembleSpec,
                               spectrum: LyapunovSpectrum, n_outer: int,
                               n_inner: int, bin_width: float, seed: int,
                               n_back: int = 200,
                               prefix_len: int = 100) -> EntropyLadder:
    """Monte Carlo ladder of symbol entropies conditioned on projections.

    Outer loop: negative words fixing the flag subspaces.  Inner loop:
    fresh forward words; each contributes its first symbol and the
    projection of its boundary point orthogonal to the level-i flag,
    binned into cells of diameter <= bin_width.  Level 0 is exactly the
    symbol entropy (that projection carries no information).
    """
    if n_outer < 8:
        raise ValueError("need n_outer >= 8 negative words")
    if n_inner < 10**4:
        raise ValueError("need n_inner >= 1e4 forward words per outer word")
    if not 0.0 < bin_width <= 0.2:
        raise ValueError("bin_width must lie in (0, 0.2]")
    s = spectrum.s
    per_outer = np.zeros((n_outer, s + 1))
    corrs = np.zeros((n_outer, s + 1))
    hp = shannon_entropy(spec)
    per_outer[:, 0] = hp

    for j in range(n_outer):
        rng_o = np.random.default_rng([_OUTER_STREAM, seed, j])
        word = TwoSidedWord(
            negative=rng_o.choice(spec.n_labels, size=n_back, p=spec.probs),
            nonnegative=np.zeros(1, dtype=np.int64), seed=seed)
        flags = backward_flag(spec, word, spectrum)

        rng_i = np.random.default_rng([_INNER_STREAM, seed, j])
        labels = rng_i.choice(spec.n_labels, size=(n_inner, prefix_len),
                              p=spec.probs)
        dirs, _, _ = _attracting_directions(spec, labels)
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        symbols = labels[:, 0]

        for i in range(1, s + 1):
            if i < s:
                basis = flags[i].complement().basis
                proj = dirs @ basis
            else:
                proj = dirs  # V^s = {0}: the projection is the identity
            norms = np.linalg.norm(proj, axis=1)
            ok = norms > 1e-10
            pts = proj[ok] / norms[ok][:, None]
            cells = _leader_cells(pts, bin_width / 2.0)
            h, c = _plugin_conditional_entropy(symbols[ok], cells,
                                               spec.n_labels)
            per_outer[j, i] = h
            corrs[j, i] = c

    values = per_outer.mean(axis=0)
    stderr = np.zeros(s + 1)
    if n_outer > 1:
        stderr[1:] = per_outer[:, 1:].std(axis=0, ddof=1) / np.sqrt(n_outer)
    return EntropyLadder(values=values, stderr=stderr, bin_width=bin_width,
                         n_outer=n_outer, n_inner=n_inner,
                         mm_correction=corrs.mean(axis=0))


@dataclass(frozen=True)
class LyapunovDimensionResult:
    levels: np.ndarray  # L_0, ..., L_s
    m: int
    dim_ly: float
    delta_max_crosscheck: float


def waterfill_max(lam_tilde: np.ndarray, mult: np.ndarray, hp: float) -> float:
    """max of sum x_i / |lam_tilde_i| over 0 <= x_i <= |lam_tilde_i| d_i,
    sum x_i <= hp.  Greedy front-to-back is optimal because the value
    rates 1/|lam_tilde_i| decrease in i."""
    value = 0.0
    rem = hp
    for lt, d in zip(lam_tilde, mult):
        cap = -lt * d
        take = min(rem, cap)
        value += take / (-lt)
        rem -= take
    return value


def lyapunov_dimension(spectrum: LyapunovSpectrum,
                       hp: float) -> LyapunovDimensionResult:
    """Entropy-vs-contraction upper bound for the measure dimension.

    Computes both the piecewise formula and the waterfilling maximum and
    insists they agree to 1e-9.
    """
    if hp < 0.0:
        raise ValueError("entropy must be nonnegative")
    s = spectrum.s
    if s < 1:
        raise ValueError("Lyapunov dimension needs at least two exponent "
                         "groups (proximal case)")
    if spectrum.multiplicities[0] != 1:
        raise ValueError("Lyapunov dimension presumes a simple top "
                         "exponent (d_0 = 1)")
    lam_tilde = np.array([spectrum.lam_tilde(i) for i in range(1, s + 1)])
    mult = spectrum.multiplicities[1:].astype(float)
    levels = np.concatenate([[0.0], np.cumsum(-lam_tilde * mult)])
    m = int(np.max(np.nonzero(hp >= levels - 1e-15)[0]))
    if m < s:
        dim_ly = float(mult[:m].sum() + (hp - levels[m]) / (-lam_tilde[m]))
    else:
        dim_ly = float(spectrum.dim_v - 1)
    cross = waterfill_max(lam_tilde, mult, hp)
    if abs(dim_ly - cross) > 1e-9:
        raise RuntimeError(
            f"piecewise value {dim_ly} disagrees with waterfilling {cross}")
    return LyapunovDimensionResult(levels=levels, m=m, dim_ly=dim_ly,
                                   delta_max_crosscheck=cross)


def ly_formula_dimension(ladder: EntropyLadder, spectrum: LyapunovSpectrum,
                         i: int, k: int) -> float:
    """Partial sum of entropy increments over normalized gaps.

    With (i, k) = (0, s) this is the predicted measure dimension; other
    index pairs predict the dimensions of projected and sliced measures.
    """
    if not 0 <= i < k <= spectrum.s:
        raise IndexError("need 0 <= i < k <= s")
    total = 0.0
    for j in range(i, k):
        total += (ladder.values[j + 1] - ladder.values[j]) \
            / spectrum.lam_tilde(j + 1)
    return total


def _angles_mod_pi(dirs: np.ndarray) -> np.ndarray:
    return np.mod(np.arctan2(dirs[:, 1], dirs[:, 0]), np.pi)


def _circular_kde(angles: np.ndarray, weights: np.ndarray, bandwidth: float,
                  nbins: int = 4096) -> np.ndarray:
    """Binned Gaussian KDE on the circle of circumference pi (FFT conv)."""
    hist, _ = np.histogram(angles, bins=nbins, range=(0.0, np.pi),
                           weights=weights)
    dx = np.pi / nbins
    offs = np.arange(nbins) * dx
    offs = np.minimum(offs, np.pi - offs)  # wrapped offset magnitude
    kern = np.exp(-0.5 * (offs / bandwidth) ** 2)
    kern /= kern.sum() * dx
    f = np.fft.irfft(np.fft.rfft(hist) * np.fft.rfft(kern), n=nbins)
    return np.maximum(f, 1e-300)


def furstenberg_entropy_2d(spec: EnsembleSpec,
                           nu, kde_bandwidth: float = 0.05) -> float:
    """Plug-in estimate of the average log density ratio under pushforward.

    Angular kernel densities of the measure and of each matrix
    pushforward are compared on [0, pi) with wraparound; the estimate is
    the probability-weighted mean of log(f_push / f) over pushforward
    samples.  2-d only.
    """
    if spec.dim_v != 2:
        raise DimensionUnsupported("Furstenberg entropy implemented in 2-d")
    if nu.n_atoms < 10**4:
        raise ValueError("need at least 1e4 atoms")
    nbins = 4096
    dx = np.pi / nbins
    base_angles = _angles_mod_pi(nu.directions)
    f_base = _circular_kde(base_angles, nu.weights, kde_bandwidth, nbins)
    total = 0.0
    for k in range(spec.n_labels):
        img = nu.directions @ spec.matrices[k].T
        img /= np.linalg.norm(img, axis=1)[:, None]
        ang = _angles_mod_pi(img)
        f_push = _circular_kde(ang, nu.weights, kde_bandwidth, nbins)
        bins = np.minimum((ang / dx).astype(np.int64), nbins - 1)
        ratio = np.log(f_push[bins]) - np.log(f_base[bins])
        total += float(spec.probs[k]) * float(np.sum(nu.weights * ratio))
    return total
