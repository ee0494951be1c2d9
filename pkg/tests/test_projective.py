import numpy as np
import pytest

from furstlab.errors import DegenerateProjection, EmptyTarget
from furstlab.projective import (ProjectivePoint, Subspace,
                                 dist_to_proj_subspace,
                                 principal_angle_min_sin, proj_distance,
                                 proj_distance_accurate, project_point,
                                 wedge_norm)

E1 = ProjectivePoint.from_vector([1.0, 0.0])
E2 = ProjectivePoint.from_vector([0.0, 1.0])
DIAG = ProjectivePoint.from_vector([1.0, 1.0])
SQ2 = 0.70710678118654752  # hand value of (1 - cos^2 45deg)^(1/2)


def random_point(rng, d):
    return ProjectivePoint.from_vector(rng.standard_normal(d))


def test_distance_examples():
    assert proj_distance(E1, E1) == 0.0
    assert proj_distance(E1, E2) == 1.0
    assert abs(proj_distance(E1, DIAG) - SQ2) < 1e-12


def test_wedge_examples():
    assert wedge_norm([1, 0], [0, 1]) == 1.0
    assert wedge_norm([3, 1, 4], [3, 1, 4]) == 0.0
    assert abs(wedge_norm([2, 0], [0, 3]) - 6.0) < 1e-12


def test_sign_normalization_idempotent(rng):
    for d in (2, 3, 5):
        for _ in range(50):
            p = random_point(rng, d)
            again = ProjectivePoint.from_vector(p.direction)
            assert np.array_equal(p.direction, again.direction)
            assert abs(np.linalg.norm(p.direction) - 1.0) <= 1e-12
    neg = ProjectivePoint.from_vector([-2.0, 1.0])
    assert neg.direction[0] > 0.0
    lead_zero = ProjectivePoint.from_vector([0.0, -3.0])
    assert lead_zero.direction[1] > 0.0


def test_project_point_examples():
    w12 = Subspace.from_spanning(np.eye(3)[:, :2])
    x = ProjectivePoint.from_vector([1.0, 0.0, 0.0])
    assert np.allclose(project_point(w12, x).direction, [1, 0, 0])

    w1 = Subspace.from_spanning(np.eye(2)[:, :1])
    assert np.allclose(project_point(w1, DIAG).direction, [1, 0])

    with pytest.raises(DegenerateProjection):
        project_point(w1, E2)


def test_dist_to_proj_subspace_examples():
    w1 = Subspace.from_spanning(np.eye(2)[:, :1])
    w2 = Subspace.from_spanning(np.eye(2)[:, 1:])
    assert dist_to_proj_subspace(E1, w1) == 0.0
    assert dist_to_proj_subspace(E1, w2) == 1.0
    w23 = Subspace.from_spanning(np.eye(3)[:, 1:])
    x = ProjectivePoint.from_vector([1.0, 1.0, 0.0])
    assert abs(dist_to_proj_subspace(x, w23) - SQ2) < 1e-12
    with pytest.raises(EmptyTarget):
        dist_to_proj_subspace(E1, Subspace.trivial(2))


def test_principal_angle_examples():
    s1 = Subspace.from_spanning([[1.0], [0.0]])
    s2 = Subspace.from_spanning([[0.0], [1.0]])
    sd = Subspace.from_spanning([[1.0], [1.0]])
    assert principal_angle_min_sin(s1, s2) == 1.0
    assert principal_angle_min_sin(s1, s1) == 0.0
    assert abs(principal_angle_min_sin(s1, sd) - SQ2) < 1e-12


def test_metric_axioms_random(rng):
    for _ in range(300):
        d = int(rng.integers(2, 7))
        x, y, z = (random_point(rng, d) for _ in range(3))
        assert proj_distance(x, y) == proj_distance(y, x)
        assert proj_distance(x, y) <= (proj_distance(x, z)
                                       + proj_distance(z, y) + 1e-9)
        assert proj_distance(x, x) <= 1e-9


def test_distance_equals_wedge_formula(rng):
    for _ in range(300):
        d = int(rng.integers(2, 7))
        u = rng.standard_normal(d) * rng.uniform(0.1, 5)
        v = rng.standard_normal(d) * rng.uniform(0.1, 5)
        lhs = proj_distance(ProjectivePoint.from_vector(u),
                            ProjectivePoint.from_vector(v))
        rhs = wedge_norm(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
        assert abs(lhs - rhs) < 1e-10


def test_accurate_distance_matches_and_resolves_tiny(rng):
    for _ in range(100):
        d = int(rng.integers(2, 7))
        x, y = random_point(rng, d), random_point(rng, d)
        assert abs(proj_distance(x, y)
                   - proj_distance_accurate(x, y)) < 1e-8
    base = rng.standard_normal(4)
    base /= np.linalg.norm(base)
    shift = rng.standard_normal(4) * 1e-11
    near = ProjectivePoint.from_vector(base + shift)
    tiny = proj_distance_accurate(ProjectivePoint.from_vector(base), near)
    assert 0.0 < tiny < 1e-9  # below the naive formula's precision floor


def test_projection_contraction_lemma(rng):
    # distances of projected points against the product of inverse
    # distances to the removed projective subspace
    trials = 0
    while trials < 1000:
        d = int(rng.integers(2, 7))
        k = int(rng.integers(1, d))
        w = Subspace.from_spanning(rng.standard_normal((d, k)))
        wp = w.complement()
        x, y = random_point(rng, d), random_point(rng, d)
        dx = dist_to_proj_subspace(x, wp) if wp.dim else 1.0
        dy = dist_to_proj_subspace(y, wp) if wp.dim else 1.0
        if dx < 1e-3 or dy < 1e-3:
            continue
        trials += 1
        px, py = project_point(w, x), project_point(w, y)
        assert proj_distance(px, py) <= \
            proj_distance(x, y) / (dx * dy) + 1e-9


def test_projected_wedge_never_grows(rng):
    for _ in range(1000):
        d = int(rng.integers(2, 7))
        k = int(rng.integers(1, d + 1))
        w = Subspace.from_spanning(rng.standard_normal((d, k)))
        u = rng.standard_normal(d)
        v = rng.standard_normal(d)
        assert wedge_norm(w.project(u), w.project(v)) \
            <= wedge_norm(u, v) + 1e-10


def test_subspace_basics(rng):
    for _ in range(50):
        d = int(rng.integers(2, 7))
        k = int(rng.integers(1, d + 1))
        w = Subspace.from_spanning(rng.standard_normal((d, k)))
        assert w.dim == k
        assert np.allclose(w.basis.T @ w.basis, np.eye(k), atol=1e-10)
        c = w.complement()
        assert c.dim == d - k
        if c.dim:
            assert np.max(np.abs(w.basis.T @ c.basis)) < 1e-10
    assert Subspace.trivial(3).dim == 0
