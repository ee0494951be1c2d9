"""End-to-end verification battery: one row per acceptance predicate.

Each row carries the measured value, the target and tolerance it is held
to, and a verdict.  Verdicts are standard-error aware: a miss within
three standard errors is reported as inconclusive rather than fail, and
budgets below an estimator's minimum short-circuit to inconclusive.
Deterministic (single-matrix) ensembles skip measure-based rows with
status not-applicable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .boundary import (_attracting_directions, _row_wedge_dist,
                       boundary_point, guivarch_mass_bound, sample_measure,
                       stationarity_discrepancy)
from .charts import (SplittingChart, backward_contraction_slope,
                     chart_perturbed_pair)
from .cocycle import (backward_flag, lyapunov_spectrum, oseledets_splitting,
                      sample_word)
from .dimension import (ConservationBudgets, RadiiGrid, conservation_check,
                        measure_dimension, transverse_dimension)
from .ensemble import EnsembleSpec, diagnose, shannon_entropy
from .entropy import (conditional_entropy_ladder, furstenberg_entropy_2d,
                      lyapunov_dimension, ly_formula_dimension)
from .errors import FurstlabError
from .projective import Subspace, subspace_gap
from .report import ReportRow

_EQ_STREAM = 337751
_RATE_STREAM = 925003
_FRAME_STREAM = 481917


@dataclass(frozen=True)
class Budgets:
    """Run budgets; the defaults back the shipped acceptance targets."""

    steps: int = 100_000
    spectrum_seeds: int = 8
    samples: int = 100_000
    prefix_len: int = 100
    n_back: int = 200
    r0: float = 0.125
    ratio: float = 0.5
    k_max: int = 14
    bin_width: float = 0.05
    delta: float | None = None
    probes: int = 40
    n_outer: int = 8
    n_inner: int = 20_000
    hyperplanes: int = 50
    eq_words: int = 1000
    rate_words: int = 10
    transverse_draws: int = 4_000_000
    transverse_keep: int = 5_000
    accept_tol: float = 1e-9

    def grid(self) -> RadiiGrid:
        return RadiiGrid(self.r0, self.ratio, self.k_max)

    def coarse_grid(self) -> RadiiGrid:
        return RadiiGrid(0.25, 0.5, 7)

    def scaled(self, factor: float) -> "Budgets":
        return replace(
            self,
            steps=max(1, int(self.steps * factor)),
            samples=max(1, int(self.samples * factor)),
            n_inner=max(1, int(self.n_inner * factor)),
            eq_words=max(1, int(self.eq_words * factor)),
            transverse_draws=max(1, int(self.transverse_draws * factor)),
            transverse_keep=max(1, int(self.transverse_keep * factor)),
        )


def verdict_close(value, target, tol, stderr=0.0) -> str:
    gap = abs(value - target)
    if gap <= tol:
        return "pass"
    if gap <= tol + 3.0 * stderr:
        return "inconclusive"
    return "fail"


def verdict_below(value, bound, stderr=0.0) -> str:
    if value <= bound:
        return "pass"
    if value <= bound + 3.0 * stderr:
        return "inconclusive"
    return "fail"


def verdict_above(value, bound, stderr=0.0) -> str:
    if value >= bound:
        return "pass"
    if value >= bound - 3.0 * stderr:
        return "inconclusive"
    return "fail"


def _row(run_id, quantity, value, stderr=None, **meta) -> ReportRow:
    return ReportRow(run_id=run_id, command="verify", quantity=quantity,
                     value=value, stderr=stderr, metadata=meta)


def boundary_equivariance_fraction(spec: EnsembleSpec, seed: int,
                                   n_words: int, prefix_len: int,
                                   accept_tol: float) -> float:
    """Fraction of words with d(pi(w), A_{w_0} pi(sigma w)) <= 2*tol."""
    rng = np.random.default_rng([_EQ_STREAM, seed])
    labels = rng.choice(spec.n_labels, size=(n_words, prefix_len + 1),
                        p=spec.probs)
    full, _, _ = _attracting_directions(spec, labels[:, :prefix_len])
    shifted, _, _ = _attracting_directions(spec, labels[:, 1:])
    mapped = np.einsum("nij,nj->ni", spec.matrices[labels[:, 0]], shifted)
    mapped /= np.linalg.norm(mapped, axis=1)[:, None]
    dist = _row_wedge_dist(full, mapped)
    return float(np.mean(dist <= 2.0 * accept_tol))


def flag_equivariance_fraction(spec: EnsembleSpec, spectrum, seed: int,
                               n_words: int, n_back: int,
                               tol: float = 1e-4) -> float:
    """Fraction of words whose flags map correctly under one back-shift."""
    rng = np.random.default_rng([_EQ_STREAM, seed, 2])
    hits = 0
    for _ in range(n_words):
        neg = rng.choice(spec.n_labels, size=n_back + 1, p=spec.probs)
        word = sample_word(spec, 2, 2, seed=0)
        w_full = replace(word, negative=neg)
        w_shift = replace(word, negative=neg[:-1])
        flags_full = backward_flag(spec, w_full, spectrum)
        flags_shift = backward_flag(spec, w_shift, spectrum)
        a = spec.matrices[neg[-1]]
        ok = True
        for vf, vs in zip(flags_full, flags_shift):
            mapped = Subspace.from_spanning(a @ vf.basis)
            if subspace_gap(vs, mapped) > tol:
                ok = False
                break
        hits += ok
    return hits / n_words


def _frames(spec, spectrum, seed, count, n_back=400, n_fwd=200):
    frames = []
    for k in range(count):
        w = sample_word(spec, n_back, n_fwd, seed=int(
            np.random.default_rng([_FRAME_STREAM, seed, k]).integers(2**31)))
        frames.append(oseledets_splitting(spec, w, spectrum))
    return frames


def run_verify(spec: EnsembleSpec, seed: int, budgets: Budgets,
               run_id: str, workers: int = 1,
               targets: dict | None = None) -> list[ReportRow]:
    rows: list[ReportRow] = []
    hp = shannon_entropy(spec)
    rows.append(_row(run_id, "shannon_entropy", hp))

    diag = diagnose(spec, seed=seed, budget=1000)
    rows.append(_row(run_id, "diagnostics_proximality",
                     min(diag.proximality_evidence.best_gap_ratio, 1e300),
                     verdict=diag.proximality_evidence.verdict))
    rows.append(_row(run_id, "diagnostics_irreducibility",
                     diag.irreducibility_evidence.orbit_spread,
                     verdict=diag.irreducibility_evidence.verdict))

    sp = lyapunov_spectrum(spec, budgets.steps,
                           range(budgets.spectrum_seeds))
    s = sp.s
    for i in range(s + 1):
        rows.append(_row(run_id, f"lambda_{i}", float(sp.exponents[i]),
                         float(sp.stderr[i]),
                         multiplicity=int(sp.multiplicities[i])))
    if diag.passed:
        rows.append(_row(run_id, "top_multiplicity_is_1",
                         float(sp.multiplicities[0]),
                         verdict="pass" if sp.multiplicities[0] == 1
                         else "fail", target=1.0))
    if spec.unimodular():
        total = float(np.sum(sp.exponents * sp.multiplicities))
        se = float(np.sqrt(np.sum((sp.stderr * sp.multiplicities) ** 2)))
        rows.append(_row(run_id, "sum_lambda_times_mult", total, se,
                         verdict=verdict_close(total, 0.0, 3.0 * se),
                         target=0.0, tol=3.0 * se))

    # splitting consistency on one sampled trajectory
    frame = _frames(spec, sp, seed, 1)[0]
    rows.append(_row(run_id, "splitting_kappa", frame.kappa,
                     verdict="pass" if frame.kappa > 0.0 else "fail"))

    deterministic = spec.n_labels == 1
    if deterministic:
        for q in ("stationarity_discrepancy", "dim_nu", "alpha_guivarch",
                  "entropy_ladder", "dim_ly", "dim_upper_bound",
                  "ly_assembly", "conservation_defect"):
            rows.append(_row(run_id, q, None, verdict="not-applicable",
                             reason="deterministic ensemble"))
        return rows

    # --- boundary measure and its regularity ---
    nu = sample_measure(spec, budgets.samples, budgets.prefix_len, seed,
                        accept_tol=budgets.accept_tol, workers=workers)
    disc = stationarity_discrepancy(spec, nu)
    disc_se = 1.0 / np.sqrt(nu.n_atoms)
    rows.append(_row(run_id, "stationarity_discrepancy", disc, disc_se,
                     verdict=verdict_below(disc, 0.02, disc_se),
                     target=0.02))

    d = spec.dim_v
    normals = [np.eye(d)[k] for k in range(d)]
    rng = np.random.default_rng([_EQ_STREAM, seed, 5])
    for _ in range(3):
        y = rng.standard_normal(d)
        normals.append(y / np.linalg.norm(y))
    frac = max(float(nu.weights[np.abs(nu.directions @ y) <= 1e-6].sum())
               for y in normals)
    rows.append(_row(run_id, "hyperplane_mass_1e-6", frac,
                     verdict=verdict_below(frac, 1e-3), target=1e-3))

    try:
        gb = guivarch_mass_bound(nu, budgets.hyperplanes,
                                 2.0 ** -np.arange(2, 11), seed=seed)
        rows.append(_row(run_id, "alpha_guivarch", gb.alpha_fit,
                         verdict="pass" if gb.alpha_fit > 0.0 else "fail",
                         c_fit=gb.c_fit))
        rows.append(_row(run_id, "guivarch_violations",
                         float(gb.violations),
                         verdict="pass" if gb.violations == 0 else "fail",
                         n_hyperplanes=gb.n_hyperplanes))
    except FurstlabError as exc:
        rows.append(_row(run_id, "alpha_guivarch", None,
                         verdict="inconclusive", reason=str(exc)))

    # --- dimension of the measure ---
    try:
        est = measure_dimension(nu, budgets.grid(), budgets.probes, seed)
    except FurstlabError as exc:
        for q in ("dim_nu", "dim_upper_bound", "ly_assembly",
                  "dim_formula_2d"):
            rows.append(_row(run_id, q, None, verdict="inconclusive",
                             reason=str(exc)))
        est = None
    if est is not None:
        rows.append(_row(run_id, "dim_nu", est.value, est.stderr,
                         fit_r2=est.fit_r2,
                         flagged_non_exact=est.flagged_non_exact))

    # --- equivariance ---
    bf = boundary_equivariance_fraction(spec, seed, budgets.eq_words,
                                        budgets.prefix_len,
                                        budgets.accept_tol)
    se_b = np.sqrt(max(bf * (1 - bf), 1e-12) / budgets.eq_words)
    rows.append(_row(run_id, "boundary_equivariance_fraction", bf, se_b,
                     verdict=verdict_above(bf, 0.95, se_b), target=0.95))
    ff = flag_equivariance_fraction(spec, sp, seed, budgets.eq_words,
                                    budgets.n_back)
    se_f = np.sqrt(max(ff * (1 - ff), 1e-12) / budgets.eq_words)
    rows.append(_row(run_id, "flag_equivariance_fraction", ff, se_f,
                     verdict=verdict_above(ff, 0.95, se_f), target=0.95))

    # --- chart contraction rates ---
    rate_frames = _frames(spec, sp, seed + 1, budgets.rate_words)
    for level in range(1, s + 1):
        slopes = []
        for k, fr in enumerate(rate_frames):
            chart = SplittingChart.from_frame(fr)
            base = boundary_point(spec, fr.word.nonnegative).point
            rng_k = np.random.default_rng([_RATE_STREAM, seed, level, k])
            _, other = chart_perturbed_pair(chart, base, level, rng_k)
            slope, _ = backward_contraction_slope(spec, fr.word, base, other)
            slopes.append(slope)
        med = float(np.median(slopes))
        tgt = sp.lam_tilde(level)
        rows.append(_row(run_id, f"chart_rate_level_{level}", med,
                         float(np.std(slopes)),
                         verdict=verdict_close(med, tgt, 0.1),
                         target=tgt, tol=0.1))

    # --- entropy ladder, Lyapunov dimension, assembly ---
    if budgets.n_inner < 10**4 or budgets.n_outer < 8:
        skipped = (["entropy_ladder", "dim_ly", "dim_upper_bound",
                    "ly_assembly", "conservation_defect"]
                   + [f"theta_{i}" for i in range(s)])
        if d == 2:
            skipped += ["dim_formula_2d", "furstenberg_entropy"]
        for q in skipped:
            rows.append(_row(run_id, q, None, verdict="inconclusive",
                             reason="budget below estimator minimum"))
        return rows
    lad = conditional_entropy_ladder(spec, sp, budgets.n_outer,
                                     budgets.n_inner, budgets.bin_width,
                                     seed, n_back=budgets.n_back,
                                     prefix_len=budgets.prefix_len)
    for i in range(s + 1):
        rows.append(_row(run_id, f"H_{i}", float(lad.values[i]),
                         float(lad.stderr[i]),
                         mm_correction=float(lad.mm_correction[i])))
    rows.append(_row(run_id, "H0_equals_Hp",
                     abs(float(lad.values[0]) - hp),
                     verdict="pass" if lad.values[0] == hp else "fail",
                     target=0.0))
    pooled = float(lad.stderr.mean())
    worst_increase = float(np.max(np.diff(lad.values)))
    rows.append(_row(run_id, "ladder_nonincreasing", worst_increase,
                     verdict=verdict_below(worst_increase, 2.0 * pooled),
                     target=0.0, tol=2.0 * pooled))
    for i in range(s):
        drop = float(lad.values[i] - lad.values[i + 1])
        cap = -sp.lam_tilde(i + 1) * float(sp.multiplicities[i + 1])
        se2 = 2.0 * float(lad.stderr[i] + lad.stderr[i + 1])
        ok = (drop >= -se2) and (drop <= cap + se2)
        rows.append(_row(run_id, f"entropy_band_{i}", drop,
                         verdict="pass" if ok else "fail",
                         lower=0.0, upper=cap, slack=se2))

    ly = lyapunov_dimension(sp, hp)
    rows.append(_row(run_id, "dim_ly", ly.dim_ly, m=ly.m))
    rows.append(_row(run_id, "waterfilling_crosscheck",
                     abs(ly.dim_ly - ly.delta_max_crosscheck),
                     verdict="pass", target=0.0, tol=1e-9))
    predicted = ly_formula_dimension(lad, sp, 0, s)
    pred_se = float(np.sqrt(np.sum(
        (2.0 * lad.stderr[1:] / np.abs(
            [sp.lam_tilde(j + 1) for j in range(s)])) ** 2)))
    rows.append(_row(run_id, "dim_predicted_ly_formula", predicted, pred_se))
    if est is not None:
        rows.append(_row(run_id, "dim_upper_bound", est.value, est.stderr,
                         verdict=verdict_below(est.value, ly.dim_ly + 0.05,
                                               est.stderr),
                         target=ly.dim_ly, tol=0.05))
        rows.append(_row(run_id, "ly_assembly", abs(est.value - predicted),
                         verdict=verdict_close(est.value, predicted, 0.15,
                                               est.stderr + pred_se),
                         target=0.15))

    if d == 2:
        if est is not None:
            if targets and spec.name in targets:
                lam = targets[spec.name]["lambda"]
                formula = hp / (lam[0] - lam[1])
                source = "oracle"
            else:
                formula = hp / (sp.exponents[0] - sp.exponents[-1])
                source = "in-run"
            rows.append(_row(run_id, "dim_formula_2d", est.value,
                             est.stderr,
                             verdict=verdict_close(est.value, formula, 0.05,
                                                   est.stderr),
                             target=formula, tol=0.05,
                             lambda_source=source))
        hf = furstenberg_entropy_2d(spec, nu, budgets.bin_width)
        hf_half = furstenberg_entropy_2d(spec, nu, budgets.bin_width / 2)
        rows.append(_row(run_id, "furstenberg_entropy", hf,
                         abs(hf - hf_half),
                         verdict=verdict_close(hf, hp, 0.1,
                                               abs(hf - hf_half)),
                         target=hp, tol=0.1, value_half_bandwidth=hf_half))
        rows.append(_row(run_id, "furstenberg_entropy_upper", hf,
                         verdict=verdict_below(hf, hp + 0.05), target=hp,
                         tol=0.05))

    # --- transverse dimensions ---
    coarse = budgets.coarse_grid()
    tr_frames = _frames(spec, sp, seed + 2, 5)
    for i in range(1, s + 1):
        vals, ses = [], []
        for fr in tr_frames:
            try:
                t = transverse_dimension(spec, fr, i, coarse,
                                         budgets.transverse_draws,
                                         n_keep=budgets.transverse_keep)
            except FurstlabError:
                continue
            vals.append(t.value)
            ses.append(t.stderr)
        if not vals:
            rows.append(_row(run_id, f"theta_{i - 1}", None,
                             verdict="inconclusive",
                             reason="no frame produced a transverse fit"))
            continue
        med = float(np.median(vals))
        se = float(np.median(ses))
        bound = (lad.values[i] - lad.values[i - 1]) / sp.lam_tilde(i) - 0.1
        rows.append(_row(run_id, f"theta_{i - 1}", med, se,
                         verdict=verdict_above(med, bound, se),
                         target=bound, n_frames=len(vals)))

    # --- dimension conservation at level min(1, s) ---
    level = 1 if s >= 1 else 0
    try:
        cons = conservation_check(
            spec, tr_frames[0], level,
            ConservationBudgets(n_samples=budgets.samples,
                                prefix_len=budgets.prefix_len,
                                grid=coarse,
                                slab_keep=budgets.transverse_keep,
                                slab_draws=budgets.transverse_draws,
                                probes=budgets.probes, delta=budgets.delta))
        cons_se = (cons.dim_proj.stderr + cons.dim_slice.stderr
                   + cons.dim_total.stderr)
        rows.append(_row(run_id, "conservation_defect", cons.defect,
                         cons_se,
                         verdict=verdict_below(cons.defect, 0.15, cons_se),
                         target=0.15, dim_proj=cons.dim_proj.value,
                         dim_slice=cons.dim_slice.value,
                         dim_total=cons.dim_total.value, level=level))
    except FurstlabError as exc:
        rows.append(_row(run_id, "conservation_defect", None,
                         verdict="inconclusive", reason=str(exc)))

    # --- slab-width stability (delta halving) ---
    if s >= 2:
        fr = tr_frames[0]
        t1 = transverse_dimension(spec, fr, s, coarse,
                                  budgets.transverse_draws,
                                  n_keep=budgets.transverse_keep)
        half = RadiiGrid(coarse.r0, coarse.ratio, coarse.k_max + 1)
        t2 = transverse_dimension(spec, fr, s, half,
                                  budgets.transverse_draws,
                                  n_keep=budgets.transverse_keep)
        gap = abs(t1.value - t2.value)
        tol = t1.stderr + t2.stderr
        rows.append(_row(run_id, "slab_halving_stability", gap,
                         verdict="pass" if gap <= max(tol, 0.05)
                         else "flagged", tol=max(tol, 0.05)))
    return rows
