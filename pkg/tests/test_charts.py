import numpy as np
import pytest

from furstlab.boundary import boundary_point
from furstlab.charts import (SplittingChart, backward_contraction_slope,
                             chart_perturbed_pair)
from furstlab.cocycle import oseledets_splitting, sample_word
from furstlab.errors import DegenerateProjection
from furstlab.projective import (ProjectivePoint, Subspace,
                                 dist_to_proj_subspace, splitting_min_sin)


def axis_chart():
    blocks = [Subspace.from_spanning(np.eye(3)[:, [k]]) for k in range(3)]
    return SplittingChart.from_blocks(blocks)


def random_splitting(rng, d):
    """Random direct-sum decomposition with a 1-dim leading block."""
    while True:
        b = rng.standard_normal((d, d))
        if abs(np.linalg.det(b)) > 1e-3:
            break
    dims = [1]
    rest = d - 1
    while rest > 0:
        take = int(rng.integers(1, rest + 1))
        dims.append(take)
        rest -= take
    blocks, off = [], 0
    for k in dims:
        blocks.append(Subspace.from_spanning(b[:, off:off + k]))
        off += k
    return blocks


def test_axis_chart_coords():
    chart = axis_chart()
    assert chart.s == 2
    p = ProjectivePoint.from_vector([2.0, 1.0, -3.0])
    g = chart.coords(p)
    assert np.allclose(g[0], [1, 0, 0])
    assert np.allclose(g[1], [0, 0.5, 0])
    assert np.allclose(g[2], [0, 0, -1.5])
    assert abs(chart.sup_norm(p) - 1.5) < 1e-12
    assert chart.kappa == 1.0

    # points on the trailing span have no chart coordinates
    with pytest.raises(DegenerateProjection):
        chart.coords(ProjectivePoint.from_vector([0.0, 1.0, 1.0]))


def test_chart_synthesize_roundtrip(rng):
    for _ in range(20):
        d = int(rng.integers(2, 6))
        chart = SplittingChart.from_blocks(random_splitting(rng, d))
        p = ProjectivePoint.from_vector(rng.standard_normal(d))
        try:
            g = chart.coords(p)
        except DegenerateProjection:
            continue
        q = chart.synthesize(g)
        assert min(np.linalg.norm(p.direction - q.direction),
                   np.linalg.norm(p.direction + q.direction)) < 1e-9


def test_sup_norm_at_least_one(rng):
    for _ in range(200):
        d = int(rng.integers(2, 7))
        chart = SplittingChart.from_blocks(random_splitting(rng, d))
        p = ProjectivePoint.from_vector(rng.standard_normal(d))
        try:
            assert chart.sup_norm(p) >= 1.0 - 1e-12
        except DegenerateProjection:
            pass


def kappa_sandwich_violations(rng, trials):
    """Count violations of the three splitting-angle inequalities."""
    bad = 0
    for _ in range(trials):
        d = int(rng.integers(2, 7))
        blocks = random_splitting(rng, d)
        chart = SplittingChart.from_blocks(blocks)
        s = chart.s
        kappa = chart.kappa
        x = rng.standard_normal(d)

        # norm lower bound against the sup of oblique components
        if np.linalg.norm(x) < 2.0 ** (-s / 2.0) * kappa ** s \
                * chart.component_sup_norm(x) - 1e-9:
            bad += 1

        p = ProjectivePoint.from_vector(x)
        try:
            sup = chart.sup_norm(p)
        except DegenerateProjection:
            continue
        dist = dist_to_proj_subspace(p, chart.trailing_span())
        lo = kappa / (2.0 * s) / sup
        hi = s * 2.0 ** s * kappa ** (-2.0 * s) / sup
        if dist < lo - 1e-9 or dist > hi + 1e-9:
            bad += 1
    return bad


def test_kappa_sandwich_random(rng):
    assert kappa_sandwich_violations(rng, 1000) == 0


def test_perturbed_pair_structure(e3, sp3, rng):
    w = sample_word(e3, 300, 200, seed=2)
    fr = oseledets_splitting(e3, w, sp3)
    chart = SplittingChart.from_frame(fr)
    base = boundary_point(e3, w.nonnegative).point
    for level in (1, 2):
        _, other = chart_perturbed_pair(chart, base, level, rng)
        g0 = chart.coords(base)
        g1 = chart.coords(other)
        for k in range(level):
            assert np.allclose(g0[k], g1[k], atol=1e-9)
        assert np.linalg.norm(g0[level] - g1[level]) > 1e-3


def test_contraction_rate_e2(e2, sp2, rng):
    errs = []
    for seed in (0, 1, 2):
        w = sample_word(e2, 400, 200, seed=seed)
        fr = oseledets_splitting(e2, w, sp2)
        chart = SplittingChart.from_frame(fr)
        base = boundary_point(e2, w.nonnegative).point
        _, other = chart_perturbed_pair(chart, base, 1, rng)
        slope, npts = backward_contraction_slope(e2, w, base, other)
        assert npts >= 3
        errs.append(abs(slope - sp2.lam_tilde(1)))
    assert np.median(errs) <= 0.1


def test_splitting_min_sin_orthogonal():
    blocks = [Subspace.from_spanning(np.eye(4)[:, [0]]),
              Subspace.from_spanning(np.eye(4)[:, [1, 2]]),
              Subspace.from_spanning(np.eye(4)[:, [3]])]
    assert abs(splitting_min_sin(blocks) - 1.0) < 1e-12
