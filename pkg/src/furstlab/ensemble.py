"""Ingest, validate, and diagnose finitely supported matrix ensembles.

An ensemble is a finite list of labeled invertible matrices together with
a strictly positive probability vector.  Configs are JSON documents whose
numeric entries are decimal strings, so fixtures re-serialize bit-exactly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ValidationError

_SCHEMA_FIELDS = {"name", "dim", "labels", "matrices", "probs"}

# Heuristic diagnostics thresholds: a singular-value ratio beyond
# PROXIMAL_PASS_RATIO counts as an attracting direction, orbits that stay
# within CLUSTER_TOL of a candidate invariant union count as concentrated.
PROXIMAL_PASS_RATIO = 1e6
PROXIMAL_FAIL_RATIO = 10.0
CLUSTER_TOL = 1e-3


@dataclass(frozen=True)
class EnsembleSpec:
    """Validated ensemble: labels, stacked matrices, probability vector."""

    name: str
    dim_v: int
    labels: tuple[str, ...]
    matrices: np.ndarray  # shape (L, dim_v, dim_v)
    probs: np.ndarray  # shape (L,)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def matrix(self, label: str) -> np.ndarray:
        return self.matrices[self.labels.index(label)]

    def unimodular(self, tol: float = 1e-9) -> bool:
        """True when every matrix has |det| = 1 within tol."""
        dets = np.abs(np.linalg.det(self.matrices))
        return bool(np.all(np.abs(dets - 1.0) <= tol))


@dataclass(frozen=True)
class ProximalityEvidence:
    best_gap_ratio: float
    steps: int
    verdict: str  # pass | fail | inconclusive


@dataclass(frozen=True)
class IrreducibilityEvidence:
    orbit_spread: float
    verdict: str


@dataclass(frozen=True)
class EnsembleDiagnostics:
    proximality_evidence: ProximalityEvidence
    irreducibility_evidence: IrreducibilityEvidence
    shannon_entropy: float

    @property
    def passed(self) -> bool:
        return (self.proximality_evidence.verdict == "pass"
                and self.irreducibility_evidence.verdict == "pass")


def _parse_decimal(value, where: str) -> float:
    if not isinstance(value, str):
        raise ValidationError(f"{where}: numeric values must be decimal strings")
    try:
        x = float(value)
    except ValueError as exc:
        raise ValidationError(f"{where}: bad decimal string {value!r}") from exc
    if not np.isfinite(x):
        raise ValidationError(f"{where}: non-finite value {value!r}")
    return x


def parse_spec(text: str) -> EnsembleSpec:
    """Parse and validate a JSON config document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("config root must be a JSON object")

    unknown = set(doc) - _SCHEMA_FIELDS
    if unknown:
        raise ValidationError(f"unknown config fields: {sorted(unknown)}")
    missing = _SCHEMA_FIELDS - set(doc)
    if missing:
        raise ValidationError(f"missing config fields: {sorted(missing)}")

    name = doc["name"]
    if not isinstance(name, str):
        raise ValidationError("name must be a string")
    dim = doc["dim"]
    if not isinstance(dim, int) or dim < 2:
        raise ValidationError("dim must be an integer >= 2")
    labels = doc["labels"]
    if (not isinstance(labels, list) or not labels
            or any(not isinstance(l, str) for l in labels)):
        raise ValidationError("labels must be a nonempty list of strings")
    if len(set(labels)) != len(labels):
        raise ValidationError("labels must be distinct")

    mats_doc = doc["matrices"]
    probs_doc = doc["probs"]
    if set(mats_doc) != set(labels) or set(probs_doc) != set(labels):
        raise ValidationError("matrices/probs keys must match labels exactly")

    mats = np.empty((len(labels), dim, dim))
    for k, lab in enumerate(labels):
        entries = mats_doc[lab]
        if not isinstance(entries, list) or len(entries) != dim * dim:
            raise ValidationError(
                f"matrix {lab!r} must be a row-major list of {dim * dim} entries")
        vals = [_parse_decimal(e, f"matrix {lab!r}") for e in entries]
        mats[k] = np.array(vals).reshape(dim, dim)

    probs = np.array([_parse_decimal(probs_doc[lab], f"prob {lab!r}")
                      for lab in labels])
    if np.any(probs <= 0.0):
        raise ValidationError("probabilities must be strictly positive")
    if abs(float(probs.sum()) - 1.0) > 1e-12:
        raise ValidationError("probabilities sum != 1")

    dets = np.linalg.det(mats)
    if np.any(np.abs(dets) <= 1e-12):
        raise ValidationError("singular matrix in ensemble")

    for a in range(len(labels)):
        for b in range(a + 1, len(labels)):
            if np.max(np.abs(mats[a] - mats[b])) <= 1e-12:
                raise ValidationError(
                    f"matrices {labels[a]!r} and {labels[b]!r} are not distinct")

    mats.flags.writeable = False
    probs.flags.writeable = False
    return EnsembleSpec(name=name, dim_v=dim, labels=tuple(labels),
                        matrices=mats, probs=probs)


def load_spec(source) -> EnsembleSpec:
    """Load a config from a path, or directly from JSON text."""
    text = None
    if isinstance(source, (str, os.PathLike)):
        s = os.fspath(source)
        if s.lstrip().startswith("{"):
            text = s
        else:
            try:
                with open(s, "r", encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ParseError(f"cannot read config {s!r}: {exc}") from exc
    else:
        text = source.read()
    return parse_spec(text)


def emit_spec(spec: EnsembleSpec, indent: int | None = 2) -> str:
    """Serialize back to the config schema at 17 significant digits."""
    doc = {
        "name": spec.name,
        "dim": spec.dim_v,
        "labels": list(spec.labels),
        "matrices": {
            lab: [format(v, ".17g") for v in spec.matrices[k].ravel()]
            for k, lab in enumerate(spec.labels)
        },
        "probs": {lab: format(float(spec.probs[k]), ".17g")
                  for k, lab in enumerate(spec.labels)},
    }
    return json.dumps(doc, indent=indent)


def shannon_entropy(spec: EnsembleSpec) -> float:
    """H(p) = -sum p_l log p_l, in nats."""
    p = spec.probs
    return float(-np.sum(p * np.log(p)))


def _greedy_net(points: np.ndarray, radius: float) -> list[np.ndarray]:
    """Greedy metric net on projective points (rows are unit vectors)."""
    centers: list[np.ndarray] = []
    for v in points:
        hit = False
        for c in centers:
            cos = abs(float(np.dot(v, c)))
            if np.sqrt(max(0.0, 1.0 - cos * cos)) <= radius:
                hit = True
                break
        if not hit:
            centers.append(v)
    return centers


def _near_center_set(v: np.ndarray, centers: list[np.ndarray], tol: float) -> bool:
    for c in centers:
        cos = abs(float(np.dot(v, c)))
        if np.sqrt(max(0.0, 1.0 - cos * cos)) <= tol:
            return True
    return False


def diagnose(spec: EnsembleSpec, seed: int, budget: int) -> EnsembleDiagnostics:
    """Heuristic proximality/irreducibility evidence; never a proof.

    Proximality: track the top-two singular-value ratio along random
    products of length <= budget.  Irreducibility: push random lines
    through independent random words and test whether the depth-budget
    orbit concentrates near an (approximately invariant) finite union of
    <= dim_v candidate subspaces.
    """
    if budget < 10**3:
        raise ValueError("diagnose needs budget >= 1e3")
    d = spec.dim_v
    rng = np.random.default_rng([878271, seed])

    # --- proximality evidence ---
    best_ratio = 0.0
    steps_used = 0
    for _ in range(8):
        word = rng.choice(spec.n_labels, size=budget, p=spec.probs)
        m = np.eye(d)
        for t in range(budget):
            m = spec.matrices[word[t]] @ m
            m /= np.max(np.abs(m))
            s = np.linalg.svd(m, compute_uv=False)
            ratio = float(s[0] / s[1]) if s[1] > 0.0 else np.inf
            if ratio > best_ratio:
                best_ratio = ratio
                steps_used = t + 1
            if ratio > 1e9:
                break
    if best_ratio > PROXIMAL_PASS_RATIO:
        prox_verdict = "pass"
    elif best_ratio <= PROXIMAL_FAIL_RATIO:
        prox_verdict = "fail"
    else:
        prox_verdict = "inconclusive"
    prox = ProximalityEvidence(best_gap_ratio=min(best_ratio, 1e300),
                               steps=steps_used, verdict=prox_verdict)

    # --- irreducibility evidence ---
    n_orbit = 64
    dirs = np.empty((n_orbit, d))
    for k in range(n_orbit):
        word = rng.choice(spec.n_labels, size=budget, p=spec.probs)
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        for t in range(budget):
            v = spec.matrices[word[t]] @ v
            v /= np.linalg.norm(v)
        dirs[k] = v

    sv = np.linalg.svd(dirs / np.sqrt(n_orbit), compute_uv=False)
    orbit_spread = float(sv[-1])

    centers = _greedy_net(dirs, CLUSTER_TOL)
    if len(centers) <= d:
        # candidate invariant union of <= dim_v lines
        invariant = True
        for a in spec.matrices:
            for c in centers:
                img = a @ c
                img /= np.linalg.norm(img)
                if not _near_center_set(img, centers, CLUSTER_TOL):
                    invariant = False
                    break
            if not invariant:
                break
        irr_verdict = "fail" if invariant else "inconclusive"
    elif orbit_spread < CLUSTER_TOL:
        # orbit hugs one proper subspace; test its invariance
        rank = int(np.sum(sv >= CLUSTER_TOL))
        _, _, vt = np.linalg.svd(dirs, full_matrices=False)
        w = vt[:rank].T  # orthonormal basis of the hugged subspace
        invariant = True
        for a in spec.matrices:
            img = a @ w
            q, _ = np.linalg.qr(img)
            gap = np.linalg.svd(q.T @ w, compute_uv=False)
            if np.sqrt(max(0.0, 1.0 - min(1.0, gap[-1]) ** 2)) > CLUSTER_TOL:
                invariant = False
                break
        irr_verdict = "fail" if invariant else "inconclusive"
    else:
        irr_verdict = "pass"
    irr = IrreducibilityEvidence(orbit_spread=orbit_spread, verdict=irr_verdict)

    return EnsembleDiagnostics(proximality_evidence=prox,
                               irreducibility_evidence=irr,
                               shannon_entropy=shannon_entropy(spec))
