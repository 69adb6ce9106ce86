"""``genfam`` command line: solve, classify and verify a problem file.

Exit codes: 0 when every verification passes, 2 when a verification fails
(the report is still written), 1 for input or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import catalog
from . import hessian as hs
from . import problem as pb
from . import verify as vf
from .family import kappa
from .solver import _map, default_threads, track

log = logging.getLogger("genfam")

REPORT_VERSION = 1


def _floats(a):
    return [float(x) for x in np.asarray(a).reshape(-1)]


def _analyze_sample(prob, cp):
    fam = prob.family
    tol = prob.tolerances
    report = hs.family_hessian(fam, cp.q, cp.lam, tol=tol["critical_tol"], cfg=prob.solve, rank_tol=tol["rank_tol"])
    f = kappa(fam, cp.q, cp.lam, tol=tol["critical_tol"]).f
    return report, f


def _oracle_status(prob, rows):
    """Compare generated covectors with the catalog closed form, per base point."""
    if prob.catalog_id is None:
        return None
    tol = prob.tolerances["oracle_tol"]
    mismatches = []
    incomplete = []
    checked = 0
    for bp in rows:
        q = np.asarray(bp["q"])
        try:
            expected = catalog.oracle_constitutive(prob.catalog_id, prob.catalog_params, q, tol=prob.tolerances["critical_tol"])
        except catalog.CatalogError:
            continue  # excluded region of the closed form
        hit = [False] * len(expected)
        for cp in bp["critical_points"]:
            # kappa is attached at the critical point's own base point in joint mode
            if prob.solve.mode == "joint":
                expected_here = catalog.oracle_constitutive(
                    prob.catalog_id, prob.catalog_params, np.asarray(cp["q"]), tol=prob.tolerances["critical_tol"]
                )
            else:
                expected_here = expected
            errs = [float(np.linalg.norm(np.asarray(cp["f"]) - e)) for e in expected_here]
            checked += 1
            if not errs or min(errs) > tol:
                mismatches.append({"base_index": bp["index"], "branch_id": cp["branch_id"], "error": min(errs) if errs else None})
            elif prob.solve.mode != "joint":
                hit[int(np.argmin(errs))] = True
        if prob.solve.mode != "joint" and bp["critical_points"] and not all(hit):
            incomplete.append(bp["index"])
    return {
        "checked": checked,
        "tolerance": tol,
        "mismatches": mismatches,
        "incomplete_base_points": incomplete,
        "match": not mismatches,
        "complete": not incomplete,
    }


def analyze(prob):
    """Run the full pipeline and return the report as a plain dict."""
    fam = prob.family
    per_base = track(fam, prob.base_points, prob.solve)
    samples = [cp for pts in per_base for cp in pts]
    analyses = _map(lambda cp: _analyze_sample(prob, cp), samples, prob.solve.threads)
    reports = [a[0] for a in analyses]

    rows = []
    it = iter(zip(samples, analyses))
    for i, (q, pts) in enumerate(zip(prob.base_points, per_base)):
        cps = []
        for _ in pts:
            cp, (rep, f) = next(it)
            cps.append(
                {
                    "q": _floats(cp.q),
                    "lambda": _floats(cp.lam),
                    "f": _floats(f),
                    "residual_norm": float(cp.residual_norm),
                    "branch_id": int(cp.branch_id),
                    "rank": int(rep.rank),
                }
            )
        rows.append({"index": i, "q": _floats(q), "critical_points": cps})

    notes = []
    if samples:
        cls = hs.classify_family(fam, samples, reports, prob.solve)
        ver = vf.verify_family(fam, samples, reports, cls, prob.tolerances["isotropy_tol"])
        verdicts = ver.verdicts
        checks = [asdict(c) for c in ver.samples]
        classification = {"verdict": cls.verdict, **cls.evidence}
        dims = verdicts["generated_dim"]
        if cls.verdict not in (hs.MORSE, hs.REGULAR):
            iso = "isotropic" if verdicts["generated_isotropic"] else "not isotropic"
            notes.append(f"generated set {iso}, dim {max(dims)} < n" if max(dims) < fam.n else f"generated set {iso}")
        else:
            notes.append("generated set is an immersed Lagrangian submanifold at all samples"
                         if verdicts["lagrangian_immersed"] else "Lagrangian check failed at some samples")
    else:
        verdicts = {"passed": True}
        checks = []
        classification = {"verdict": None}
        notes.append("no critical points found over the given base points")

    oracle = _oracle_status(prob, rows)
    passed = bool(verdicts["passed"]) and (oracle is None or oracle["match"])
    return {
        "version": REPORT_VERSION,
        "family": {
            "name": fam.name,
            "n": fam.n,
            "k": fam.k,
            "catalog_params": _jsonable(prob.catalog_params),
            "expression": getattr(fam.energy, "src", None),
        },
        "solve": _jsonable(asdict(replace(prob.solve, threads=1))),
        "tolerances": prob.tolerances,
        "base_points": rows,
        "classification": classification,
        "hessian": {"ranks": sorted({r.rank for r in reports}), "codims": sorted({r.cr_codim_estimate for r in reports})},
        "verification": {"verdicts": verdicts, "samples": checks},
        "oracle": oracle,
        "notes": notes,
        "passed": passed,
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_report(report, path):
    # json writes floats with repr: the shortest string that round-trips
    Path(path).write_text(json.dumps(_jsonable(report), indent=1, sort_keys=True) + "\n")


def read_report(path):
    return json.loads(Path(path).read_text())


def recompute_verdicts(report):
    """Verdict flags recomputed from the per-sample checks stored in ``report``."""
    fam_info = report["family"]
    checks = [vf.SampleVerification(**c) for c in report["verification"]["samples"]]
    if not checks:
        return {"passed": True}

    class _Dims:
        n = fam_info["n"]
        k = fam_info["k"]

    return vf.summarize(_Dims, checks, report["classification"]["verdict"], report["tolerances"]["isotropy_tol"]).verdicts


def emit_samples(report, path):
    """One CSV row per (base point, branch), sorted by base index then branch."""
    n, k = report["family"]["n"], report["family"]["k"]
    header = [f"q_{i + 1}" for i in range(n)] + [f"lambda_{i + 1}" for i in range(k)]
    header += [f"f_{i + 1}" for i in range(n)] + ["residual_norm", "branch_id", "rank"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for bp in sorted(report["base_points"], key=lambda b: b["index"]):
            for cp in sorted(bp["critical_points"], key=lambda c: c["branch_id"]):
                nums = cp["q"] + cp["lambda"] + cp["f"] + [cp["residual_norm"]]
                w.writerow([f"{x:.17g}" for x in nums] + [cp["branch_id"], cp["rank"]])


def run(problem_path, seed=None, samples_path=None, report_path=None, threads=None):
    """Execute a problem file; returns the exit code."""
    try:
        prob = pb.load(problem_path)
    except pb.ProblemError as err:
        print(f"genfam: {err}", file=sys.stderr)
        return 1
    cfg = prob.solve
    cfg = replace(cfg, threads=threads or default_threads())
    if seed is not None:
        cfg = replace(cfg, rng_seed=seed)
    prob.solve = cfg
    report_path = report_path or prob.report_path
    samples_path = samples_path or prob.samples_path
    try:
        report = analyze(prob)
    except ValueError as err:
        print(f"genfam: {err}", file=sys.stderr)
        return 1
    if report_path:
        write_report(report, report_path)
    if samples_path:
        emit_samples(report, samples_path)
    v = report["classification"]["verdict"]
    print(f"classification: {v}")
    for note in report["notes"]:
        print(f"note: {note}")
    if not report["passed"]:
        print("verification FAILED", file=sys.stderr)
        return 2
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="genfam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="solve, classify and verify a problem file")
    p_run.add_argument("problem")
    p_run.add_argument("--seed", type=int, default=None, help="override solve.rng_seed")
    p_run.add_argument("--samples", default=None, help="write the sample table (CSV) here")
    p_run.add_argument("--report", default=None, help="write the JSON report here")
    p_ver = sub.add_parser("verdicts", help="recompute verdict flags from a saved report")
    p_ver.add_argument("report")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    if args.command == "run":
        return run(args.problem, args.seed, args.samples, args.report)
    try:
        report = read_report(args.report)
        flags = recompute_verdicts(report)
    except (OSError, ValueError, KeyError, TypeError) as err:
        print(f"genfam: cannot read report: {err}", file=sys.stderr)
        return 1
    stored = report["verification"]["verdicts"]
    print(json.dumps(flags, sort_keys=True))
    return 0 if flags == stored else 2


if __name__ == "__main__":
    sys.exit(main())
