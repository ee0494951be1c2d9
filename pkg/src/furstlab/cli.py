"""Experiment harness: configs in, deterministic runs, report tables out.

Subcommands: spectrum | measure | dimension | entropy | verify | report.
Every run is keyed by a content hash of (ensemble document, command,
seed, budgets); rows land in report.tsv / report.jsonl under --out.

Exit codes: 0 success, 1 config error, 2 diagnostics block,
3 estimator error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from .boundary import guivarch_mass_bound, sample_measure, \
    stationarity_discrepancy
from .cocycle import lyapunov_spectrum
from .dimension import measure_dimension
from .ensemble import EnsembleSpec, diagnose, emit_spec, load_spec, \
    shannon_entropy
from .entropy import (conditional_entropy_ladder, furstenberg_entropy_2d,
                      lyapunov_dimension, ly_formula_dimension)
from .errors import DimensionUnsupported, FurstlabError, ParseError, \
    ValidationError
from .report import ReportRow, ReportWriter, config_hash, read_report
from .verify import Budgets, run_verify

WORKERS_ENV = "FURSTLAB_WORKERS"
COMMANDS = ("spectrum", "measure", "dimension", "entropy", "verify",
            "report")


def _load_targets() -> dict:
    try:
        from .fixtures import load_targets
        return load_targets()
    except (FileNotFoundError, json.JSONDecodeError):
        return {}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="furstlab",
        description="Numerical laboratory for random matrix products")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        q = sub.add_parser(name)
        if name == "report":
            q.add_argument("--out", required=True,
                           help="report directory to read")
            continue
        q.add_argument("--config", required=True,
                       help="ensemble config (JSON path)")
        q.add_argument("--seed", type=int, required=True,
                       help="root seed (mandatory; no wall-clock default)")
        q.add_argument("--out", default="runs",
                       help="output directory for report tables")
        q.add_argument("--workers", type=int, default=None,
                       help=f"worker threads (default ${WORKERS_ENV} or 1)")
        q.add_argument("--assume-irreducible-proximal", action="store_true",
                       help="run even when heuristic diagnostics fail")
        q.add_argument("--steps", type=int, default=Budgets.steps)
        q.add_argument("--spectrum-seeds", type=int,
                       default=Budgets.spectrum_seeds)
        q.add_argument("--samples", type=int, default=Budgets.samples)
        q.add_argument("--prefix-len", type=int, default=Budgets.prefix_len)
        q.add_argument("--n-back", type=int, default=Budgets.n_back)
        q.add_argument("--r0", type=float, default=Budgets.r0)
        q.add_argument("--ratio", type=float, default=Budgets.ratio)
        q.add_argument("--k-max", type=int, default=Budgets.k_max)
        q.add_argument("--bin-width", type=float, default=Budgets.bin_width)
        q.add_argument("--delta", type=float, default=None)
        q.add_argument("--probes", type=int, default=Budgets.probes)
        q.add_argument("--n-outer", type=int, default=Budgets.n_outer)
        q.add_argument("--n-inner", type=int, default=Budgets.n_inner)
        q.add_argument("--hyperplanes", type=int,
                       default=Budgets.hyperplanes)
        q.add_argument("--eq-words", type=int, default=Budgets.eq_words)
        q.add_argument("--budget-scale", type=float, default=1.0,
                       help="scale the main Monte Carlo budgets")
    return p


def _budgets_from_args(args) -> Budgets:
    b = Budgets(steps=args.steps, spectrum_seeds=args.spectrum_seeds,
                samples=args.samples, prefix_len=args.prefix_len,
                n_back=args.n_back, r0=args.r0, ratio=args.ratio,
                k_max=args.k_max, bin_width=args.bin_width,
                delta=args.delta, probes=args.probes,
                n_outer=args.n_outer, n_inner=args.n_inner,
                hyperplanes=args.hyperplanes, eq_words=args.eq_words)
    if args.budget_scale != 1.0:
        b = b.scaled(args.budget_scale)
    return b


def _resolve_workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"bad {WORKERS_ENV} value {env!r}")
    return 1


def _cmd_spectrum(spec, seed, budgets, run_id, workers) -> list[ReportRow]:
    sp = lyapunov_spectrum(spec, budgets.steps,
                           range(budgets.spectrum_seeds))
    rows = []
    for i in range(sp.s + 1):
        rows.append(ReportRow(run_id, "spectrum", f"lambda_{i}",
                              float(sp.exponents[i]), float(sp.stderr[i]),
                              {"multiplicity": int(sp.multiplicities[i])}))
    for k in range(spec.dim_v):
        rows.append(ReportRow(run_id, "spectrum", f"raw_exponent_{k}",
                              float(sp.raw_exponents[k]),
                              float(sp.raw_stderr[k]), {}))
    return rows


def _cmd_measure(spec, seed, budgets, run_id, workers,
                 out_dir) -> list[ReportRow]:
    nu = sample_measure(spec, budgets.samples, budgets.prefix_len, seed,
                        accept_tol=budgets.accept_tol, workers=workers)
    atoms_path = os.path.join(out_dir, f"atoms_{run_id}.tsv")
    nu.save_table(atoms_path)
    disc = stationarity_discrepancy(spec, nu)
    return [
        ReportRow(run_id, "measure", "n_atoms", float(nu.n_atoms), None,
                  {"atoms_table": os.path.basename(atoms_path)}),
        ReportRow(run_id, "measure", "stationarity_discrepancy", disc,
                  1.0 / np.sqrt(nu.n_atoms), {}),
    ]


def _cmd_dimension(spec, seed, budgets, run_id, workers) -> list[ReportRow]:
    nu = sample_measure(spec, budgets.samples, budgets.prefix_len, seed,
                        accept_tol=budgets.accept_tol, workers=workers)
    est = measure_dimension(nu, budgets.grid(), budgets.probes, seed)
    gb = guivarch_mass_bound(nu, budgets.hyperplanes,
                             2.0 ** -np.arange(2, 11), seed=seed)
    return [
        ReportRow(run_id, "dimension", "dim_nu", est.value, est.stderr,
                  {"fit_r2": est.fit_r2,
                   "flagged_non_exact": est.flagged_non_exact}),
        ReportRow(run_id, "dimension", "alpha_guivarch", gb.alpha_fit, None,
                  {"c_fit": gb.c_fit, "violations": gb.violations}),
    ]


def _cmd_entropy(spec, seed, budgets, run_id, workers) -> list[ReportRow]:
    sp = lyapunov_spectrum(spec, budgets.steps,
                           range(budgets.spectrum_seeds))
    lad = conditional_entropy_ladder(spec, sp, budgets.n_outer,
                                     budgets.n_inner, budgets.bin_width,
                                     seed, n_back=budgets.n_back,
                                     prefix_len=budgets.prefix_len)
    rows = []
    for i in range(sp.s + 1):
        rows.append(ReportRow(run_id, "entropy", f"H_{i}",
                              float(lad.values[i]), float(lad.stderr[i]),
                              {"mm_correction":
                               float(lad.mm_correction[i])}))
    hp = shannon_entropy(spec)
    ly = lyapunov_dimension(sp, hp)
    rows.append(ReportRow(run_id, "entropy", "dim_ly", ly.dim_ly, None,
                          {"m": ly.m}))
    rows.append(ReportRow(run_id, "entropy", "dim_predicted_ly_formula",
                          ly_formula_dimension(lad, sp, 0, sp.s), None, {}))
    if spec.dim_v == 2:
        nu = sample_measure(spec, budgets.samples, budgets.prefix_len, seed,
                            accept_tol=budgets.accept_tol, workers=workers)
        try:
            hf = furstenberg_entropy_2d(spec, nu, budgets.bin_width)
            hf2 = furstenberg_entropy_2d(spec, nu, budgets.bin_width / 2)
            rows.append(ReportRow(run_id, "entropy", "furstenberg_entropy",
                                  hf, abs(hf - hf2),
                                  {"bandwidth": budgets.bin_width,
                                   "value_half_bandwidth": hf2}))
        except DimensionUnsupported:
            pass
    return rows


def _print_rows(rows) -> None:
    width = max((len(r.quantity) for r in rows), default=10)
    for r in rows:
        val = "" if r.value is None else f"{r.value:.10g}"
        se = "" if r.stderr is None else f" +- {r.stderr:.3g}"
        verdict = r.metadata.get("verdict", "")
        tail = f"  [{verdict}]" if verdict else ""
        print(f"{r.quantity:<{width}}  {val}{se}{tail}")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for the
        # diagnostics block, so map config errors to 1
        return 0 if exc.code in (0, None) else 1

    if args.command == "report":
        try:
            rows = read_report(args.out)
        except OSError as exc:
            print(f"error: cannot read report: {exc}", file=sys.stderr)
            return 1
        by_run: dict = {}
        for rec in rows:
            by_run.setdefault(rec["run_id"], []).append(rec)
        for run_id, recs in by_run.items():
            cmds = sorted({r["command"] for r in recs})
            print(f"run {run_id} ({', '.join(cmds)}): {len(recs)} rows")
            for rec in recs:
                verdict = rec["metadata"].get("verdict", "")
                tail = f"  [{verdict}]" if verdict else ""
                print(f"  {rec['quantity']:<32} {rec['value']}{tail}")
        return 0

    try:
        spec = load_spec(args.config)
        budgets = _budgets_from_args(args)
        workers = _resolve_workers(args)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    payload = {"ensemble": emit_spec(spec, indent=None),
               "command": args.command, "seed": args.seed,
               "budgets": asdict(budgets)}
    run_id = config_hash(payload)[:12]

    diag = diagnose(spec, seed=args.seed, budget=1000)
    overridden = bool(args.assume_irreducible_proximal)
    if not diag.passed and not overridden:
        record = {"error": "diagnostics_block",
                  "proximality": diag.proximality_evidence.verdict,
                  "irreducibility": diag.irreducibility_evidence.verdict,
                  "hint": "pass --assume-irreducible-proximal to override"}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 2

    meta_common = {"config_hash": config_hash(payload),
                   "ensemble": spec.name, "seed": args.seed,
                   "assume_irreducible_proximal": overridden,
                   "budgets": asdict(budgets)}
    try:
        if args.command == "spectrum":
            rows = _cmd_spectrum(spec, args.seed, budgets, run_id, workers)
        elif args.command == "measure":
            os.makedirs(args.out, exist_ok=True)
            rows = _cmd_measure(spec, args.seed, budgets, run_id, workers,
                                args.out)
        elif args.command == "dimension":
            rows = _cmd_dimension(spec, args.seed, budgets, run_id, workers)
        elif args.command == "entropy":
            rows = _cmd_entropy(spec, args.seed, budgets, run_id, workers)
        else:
            rows = run_verify(spec, args.seed, budgets, run_id,
                              workers=workers, targets=_load_targets())
    except FurstlabError as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 3

    rows = [ReportRow(r.run_id, r.command, r.quantity, r.value, r.stderr,
                      {**meta_common, **r.metadata}) for r in rows]
    ReportWriter(args.out).write_rows(rows)
    _print_rows(rows)
    if args.command == "verify":
        verdicts = [r.metadata.get("verdict") for r in rows
                    if "verdict" in r.metadata]
        n_pass = sum(v == "pass" for v in verdicts)
        n_fail = sum(v == "fail" for v in verdicts)
        print(f"verify: {n_pass} pass, {n_fail} fail, "
              f"{len(verdicts) - n_pass - n_fail} other")
    return 0


if __name__ == "__main__":
    sys.exit(main())
