"""Acceptance battery: every shipped criterion at its stated tolerance.

Each test prints one line: the criterion number, PASS/FAIL, the measured
numbers, and the elapsed time against the criterion's runtime cap.
Shared Monte Carlo inputs (spectra, measures, ladders) come from session
fixtures, so each test's clock covers its own marginal work.
"""

import os
import time

import numpy as np
import pytest

from furstlab.boundary import (_attracting_directions, boundary_point,
                               guivarch_mass_bound, sample_measure)
from furstlab.charts import (SplittingChart, backward_contraction_slope,
                             chart_perturbed_pair)
from furstlab.cli import main as cli_main
from furstlab.cocycle import (lyapunov_spectrum, oseledets_splitting,
                              sample_word)
from furstlab.dimension import (ConservationBudgets, RadiiGrid,
                                conservation_check, measure_dimension,
                                transverse_dimension)
from furstlab.ensemble import shannon_entropy
from furstlab.entropy import (conditional_entropy_ladder,
                              ly_formula_dimension, lyapunov_dimension)
from furstlab.fixtures import fixture_path
from furstlab.projective import (ProjectivePoint, Subspace,
                                 dist_to_proj_subspace, proj_distance,
                                 project_point)
from furstlab.verify import (boundary_equivariance_fraction,
                             flag_equivariance_fraction)
from tests.test_charts import random_splitting

DEEP = RadiiGrid(0.125, 0.5, 14)
COARSE = RadiiGrid(0.25, 0.5, 7)

LINE = "ACCEPTANCE {k:>2} [{status}] {detail}  ({dt:.1f}s < {cap:.0f}s)"


def report(k, ok, detail, dt, cap):
    print(LINE.format(k=k, status="PASS" if ok else "FAIL", detail=detail,
                      dt=dt, cap=cap))
    assert ok, f"criterion {k}: {detail}"
    assert dt < cap, f"criterion {k} exceeded its runtime cap"


@pytest.fixture(scope="module")
def lad2(e2, sp2):
    return conditional_entropy_ladder(e2, sp2, 8, 20_000, 0.05, seed=7)


@pytest.fixture(scope="module")
def lad3(e3, sp3):
    return conditional_entropy_ladder(e3, sp3, 8, 20_000, 0.05, seed=7)


def test_criterion_01_deterministic_spectrum(e1):
    t0 = time.time()
    sp = lyapunov_spectrum(e1, 1000, [0])
    lam_ok = (abs(sp.exponents[0] - np.log(2)) < 1e-9
              and abs(sp.exponents[1] + np.log(2)) < 1e-9)
    fr = oseledets_splitting(e1, sample_word(e1, 200, 200, seed=1), sp)
    ax_ok = (abs(abs(fr.splitting[0].basis[0, 0]) - 1.0) < 1e-9
             and abs(abs(fr.splitting[1].basis[1, 0]) - 1.0) < 1e-9
             and abs(fr.kappa - 1.0) < 1e-9)
    report(1, lam_ok and ax_ok,
           f"E1 spectrum exact, splitting axes, kappa={fr.kappa:.12f}",
           time.time() - t0, 1.0)


def test_criterion_02_analytic_spectrum(e4):
    t0 = time.time()
    sp = lyapunov_spectrum(e4, 100_000, range(16))
    target = (np.log(3) + np.log(2)) / 2
    err = abs(float(sp.exponents[0]) - target)
    report(2, err < 1e-3,
           f"E4 lambda_0 err={err:.2e} at 1e5 steps x 16 seeds",
           time.time() - t0, 10.0)


def test_criterion_03_exact_inequalities(rng):
    t0 = time.time()
    trials = 10_000

    contraction_bad = 0
    done = 0
    while done < trials:
        d = int(rng.integers(2, 7))
        k = int(rng.integers(1, d))
        w = Subspace.from_spanning(rng.standard_normal((d, k)))
        wp = w.complement()
        x = ProjectivePoint.from_vector(rng.standard_normal(d))
        y = ProjectivePoint.from_vector(rng.standard_normal(d))
        dx = dist_to_proj_subspace(x, wp) if wp.dim else 1.0
        dy = dist_to_proj_subspace(y, wp) if wp.dim else 1.0
        if dx < 1e-3 or dy < 1e-3:
            continue
        done += 1
        if proj_distance(project_point(w, x), project_point(w, y)) > \
                proj_distance(x, y) / (dx * dy) + 1e-9:
            contraction_bad += 1

    norm_bad = 0
    sandwich_bad = 0
    for _ in range(trials):
        d = int(rng.integers(2, 7))
        chart = SplittingChart.from_blocks(random_splitting(rng, d))
        s, kappa = chart.s, chart.kappa
        v = rng.standard_normal(d)
        if np.linalg.norm(v) < 2.0 ** (-s / 2) * kappa ** s \
                * chart.component_sup_norm(v) - 1e-9:
            norm_bad += 1
        p = ProjectivePoint.from_vector(rng.standard_normal(d))
        try:
            sup = chart.sup_norm(p)
        except Exception:
            continue
        dist = dist_to_proj_subspace(p, chart.trailing_span())
        if dist < kappa / (2 * s) / sup - 1e-9 \
                or dist > s * 2.0 ** s * kappa ** (-2 * s) / sup + 1e-9:
            sandwich_bad += 1

    total = contraction_bad + norm_bad + sandwich_bad
    report(3, total == 0,
           f"violations: contraction={contraction_bad} "
           f"norm={norm_bad} sandwich={sandwich_bad} over 1e4 trials each",
           time.time() - t0, 30.0)


def test_criterion_04_equivariance(e2, e3, sp2, sp3):
    t0 = time.time()
    fracs = {}
    for name, spec, sp in (("E2", e2, sp2), ("E3", e3, sp3)):
        fracs[f"{name}/boundary"] = boundary_equivariance_fraction(
            spec, seed=7, n_words=1000, prefix_len=100, accept_tol=1e-9)
        fracs[f"{name}/flag"] = flag_equivariance_fraction(
            spec, sp, seed=7, n_words=1000, n_back=200)
    ok = all(v >= 0.95 for v in fracs.values())
    detail = " ".join(f"{k}={v:.3f}" for k, v in fracs.items())
    report(4, ok, detail, time.time() - t0, 120.0)


def test_criterion_05_chart_rates(e2, e3, sp2, sp3):
    t0 = time.time()
    results = {}
    for name, spec, sp in (("E2", e2, sp2), ("E3", e3, sp3)):
        for level in range(1, sp.s + 1):
            slopes = []
            for k in range(10):
                w = sample_word(spec, 400, 200, seed=1000 + k)
                fr = oseledets_splitting(spec, w, sp)
                chart = SplittingChart.from_frame(fr)
                base = boundary_point(spec, w.nonnegative).point
                rng_k = np.random.default_rng([41, level, k])
                _, other = chart_perturbed_pair(chart, base, level, rng_k)
                slope, _ = backward_contraction_slope(spec, w, base, other)
                slopes.append(slope)
            results[f"{name}/lvl{level}"] = \
                float(np.median(slopes)) - sp.lam_tilde(level)
    ok = all(abs(v) <= 0.1 for v in results.values())
    detail = " ".join(f"{k}:{v:+.3f}" for k, v in results.items())
    report(5, ok, "slope errors " + detail, time.time() - t0, 120.0)


def test_criterion_06_dimension_formula_2d(e2, nu2, targets):
    t0 = time.time()
    lam = targets["E2"]["lambda"]
    target = np.log(2) / (lam[0] - lam[1])
    est = measure_dimension(nu2, DEEP, 40, seed=3)
    err = abs(est.value - target)

    rng = np.random.default_rng([99, 6])
    labels = rng.choice(e2.n_labels, size=(100_000, 60), p=e2.probs)
    dirs, _, _ = _attracting_directions(e2, labels)
    predicted = np.where(np.abs(dirs[:, 0]) > np.abs(dirs[:, 1]), 0, 1)
    mis = float(np.mean(predicted != labels[:, 0]))

    ok = err <= 0.05 and mis < 1e-3
    report(6, ok,
           f"E2 dim={est.value:.4f} vs formula {target:.4f} "
           f"(err={err:.4f}); cone misclassification={mis:.2e}",
           time.time() - t0, 300.0)


def test_criterion_07_entropy_ladder(e2, e3, sp2, sp3, lad2, lad3):
    t0 = time.time()
    checks = []
    for name, spec, sp, lad in (("E2", e2, sp2, lad2),
                                ("E3", e3, sp3, lad3)):
        checks.append(lad.values[0] == shannon_entropy(spec))
        pooled = float(lad.stderr.mean())
        checks.append(float(np.max(np.diff(lad.values))) <= 2 * pooled
                      + 1e-12)
        for i in range(sp.s):
            drop = float(lad.values[i] - lad.values[i + 1])
            cap = -sp.lam_tilde(i + 1) * float(sp.multiplicities[i + 1])
            slack = 2 * float(lad.stderr[i] + lad.stderr[i + 1])
            checks.append(-slack <= drop <= cap + slack)
    report(7, all(checks),
           f"E2 ladder={np.round(lad2.values, 5).tolist()} "
           f"E3 ladder={np.round(lad3.values, 5).tolist()}",
           time.time() - t0, 300.0)


def test_criterion_08_upper_bound_and_waterfilling(e1, e2, e3, sp2, sp3,
                                                   nu2, nu3, rng):
    t0 = time.time()
    results = {}
    sp1 = lyapunov_spectrum(e1, 1000, [0])
    nu1 = sample_measure(e1, 20_000, 100, seed=2)
    est1 = measure_dimension(nu1, COARSE, 30, seed=2)
    results["E1"] = (est1.value, lyapunov_dimension(
        sp1, shannon_entropy(e1)).dim_ly)
    results["E2"] = (measure_dimension(nu2, DEEP, 40, seed=3).value,
                     lyapunov_dimension(sp2, shannon_entropy(e2)).dim_ly)
    results["E3"] = (measure_dimension(nu3, DEEP, 40, seed=5).value,
                     lyapunov_dimension(sp3, shannon_entropy(e3)).dim_ly)
    bound_ok = all(d <= ly + 0.05 for d, ly in results.values())

    from tests.test_entropy import synthetic_spectrum
    wf_bad = 0
    for _ in range(1000):
        s = int(rng.integers(1, 6))
        mults = rng.integers(1, 4, size=s + 1)
        mults[0] = 1
        gaps = np.cumsum(rng.uniform(0.05, 2.0, size=s))
        sp = synthetic_spectrum(np.concatenate([[0.0], -gaps]), mults)
        hp = float(rng.uniform(0.0, 1.2) * np.sum(gaps * mults[1:]))
        res = lyapunov_dimension(sp, hp)
        if abs(res.dim_ly - res.delta_max_crosscheck) > 1e-9:
            wf_bad += 1

    detail = " ".join(f"{k}: dim={d:.3f}<=LY={ly:.3f}+0.05"
                      for k, (d, ly) in results.items())
    report(8, bound_ok and wf_bad == 0,
           detail + f"; waterfilling mismatches={wf_bad}/1000",
           time.time() - t0, 30.0)


def test_criterion_09_ledrappier_young_assembly(e3, sp3, nu3, lad3):
    t0 = time.time()
    predicted = ly_formula_dimension(lad3, sp3, 0, sp3.s)
    est = measure_dimension(nu3, DEEP, 40, seed=5)
    gap = abs(est.value - predicted)

    w = sample_word(e3, 300, 200, seed=4)
    fr = oseledets_splitting(e3, w, sp3)
    rep = conservation_check(
        e3, fr, 1, ConservationBudgets(n_samples=100_000, grid=COARSE,
                                       slab_keep=5000, probes=40))
    ok = gap <= 0.15 and rep.defect <= 0.15
    report(9, ok,
           f"E3 predicted={predicted:.4f} measured={est.value:.4f} "
           f"(gap={gap:.4f}); conservation defect={rep.defect:.4f} "
           f"(proj={rep.dim_proj.value:.3f} slice={rep.dim_slice.value:.3f}"
           f" total={rep.dim_total.value:.3f})",
           time.time() - t0, 900.0)


def test_criterion_10_guivarch_regularity(nu2, nu3):
    t0 = time.time()
    radii = 2.0 ** -np.arange(2, 11)
    g2 = guivarch_mass_bound(nu2, 50, radii, seed=3)
    g3 = guivarch_mass_bound(nu3, 50, radii, seed=3)
    ok = (g2.alpha_fit > 0 and g2.violations == 0
          and g3.alpha_fit > 0 and g3.violations == 0)
    report(10, ok,
           f"E2 alpha={g2.alpha_fit:.3f} viol={g2.violations}; "
           f"E3 alpha={g3.alpha_fit:.3f} viol={g3.violations}",
           time.time() - t0, 300.0)


def test_criterion_11_transverse_inequality(e2, e3, sp2, sp3, lad2, lad3):
    t0 = time.time()
    details = []
    ok = True
    for name, spec, sp, lad, levels in (
            ("E2", e2, sp2, lad2, (1,)), ("E3", e3, sp3, lad3, (1, 2))):
        for i in levels:
            vals = []
            for k in range(3):
                w = sample_word(spec, 400, 200, seed=3000 + k)
                fr = oseledets_splitting(spec, w, sp)
                t = transverse_dimension(spec, fr, i, COARSE,
                                         budget=4_000_000, n_keep=5000)
                vals.append(t.value)
            med = float(np.median(vals))
            bound = (lad.values[i] - lad.values[i - 1]) / sp.lam_tilde(i) \
                - 0.1
            ok = ok and med >= bound
            details.append(f"{name}/theta_{i - 1}={med:.3f}>="
                           f"{bound:.3f}")
    report(11, ok, " ".join(details), time.time() - t0, 900.0)


def test_criterion_12_reproducibility(tmp_path):
    t0 = time.time()
    args = ["verify", "--config", fixture_path("E2"), "--seed", "5",
            "--steps", "10000", "--spectrum-seeds", "4",
            "--samples", "20000", "--eq-words", "100",
            "--n-inner", "10000", "--hyperplanes", "20",
            "--probes", "30"]
    outs = [str(tmp_path / n) for n in ("a", "b", "c")]
    assert cli_main(args + ["--out", outs[0], "--workers", "1"]) == 0
    t_mid = time.time()
    assert cli_main(args + ["--out", outs[1], "--workers", "1"]) == 0
    assert cli_main(args + ["--out", outs[2], "--workers", "4"]) == 0
    texts = [open(os.path.join(o, "report.jsonl")).read() for o in outs]
    ok = texts[0] == texts[1] == texts[2]
    overhead = time.time() - t_mid
    report(12, ok and overhead < 60.0,
           f"verify reports bit-identical across rerun and worker counts "
           f"(rerun overhead {overhead:.1f}s)",
           time.time() - t0, 300.0)
