"""Acceptance criteria, one test each.

Every test appends a PASS/FAIL line to the shared log, printed in the pytest
terminal summary, and fails normally when its criterion is not met.
"""

import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

from genfam import cli
from genfam.catalog import instantiate, oracle_constitutive
from genfam.autodiff import jet2_eval
from genfam.expr import parse
from genfam.family import FamilySpec, kappa
from genfam.hessian import classify_family, family_hessian, function_hessian
from genfam.solver import SolveConfig, multistart
from genfam.symplin import SubspaceBasis, SymplecticSpace, classify, graph, polar
from genfam.verify import verify_family
from helpers import fd_hessian, mp_function, random_expression


@contextmanager
def criterion(log, number, title):
    """Record one PASS/FAIL line; the body sets ``state['ok']`` and ``state['detail']``."""
    state = {"ok": False, "detail": ""}
    try:
        yield state
    except Exception as err:
        state["ok"] = False
        state["detail"] = f"{type(err).__name__}: {err}"
        raise
    finally:
        line = f"{'PASS' if state['ok'] else 'FAIL'} [{number}] {title}: {state['detail']}"
        log.append(line)
        print(line)


def run_family(fam, base_points, cfg):
    """Multistart at each base point, then Hessians, classification and verification."""
    t0 = time.perf_counter()
    samples, per_point = [], []
    for i, q in enumerate(base_points):
        found = multistart(fam, q, cfg)
        for cp in found:
            cp.base_index = i
        per_point.append(found)
        samples.extend(found)
    reports = [family_hessian(fam, s.q, s.lam, cfg=cfg) for s in samples]
    cls = classify_family(fam, samples, reports, cfg)
    ver = verify_family(fam, samples, reports, cls)
    elapsed = time.perf_counter() - t0
    return {"per_point": per_point, "samples": samples, "reports": reports, "cls": cls, "ver": ver, "elapsed": elapsed}


@pytest.fixture(scope="module")
def two_springs_run():
    fam = instantiate("two_springs", {"k1": 2.0, "k2": 5.0})
    rng = np.random.default_rng(20240601)
    points = rng.uniform(-2, 2, size=(20, 2))
    return fam, points, run_family(fam, points, SolveConfig())


@pytest.fixture(scope="module")
def rod_spring_run():
    fam = instantiate("rod_spring")
    rng = np.random.default_rng(20240602)
    radius = rng.uniform(0.5, 3.0, size=20)
    angle = rng.uniform(-np.pi, np.pi, size=20)
    points = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    return fam, points, run_family(fam, points, SolveConfig())


@pytest.fixture(scope="module")
def lambda_x2_run():
    fam = instantiate("lambda_x2")
    cfg = SolveConfig(mode="joint", seeds=8)
    rng = np.random.default_rng(20240603)
    points = rng.uniform(-1, 1, size=(5, 1))
    return fam, points, run_family(fam, points, cfg)


def test_criterion_1_two_springs(acceptance_log, two_springs_run):
    fam, points, run = two_springs_run
    with criterion(acceptance_log, 1, "two springs: f = k1 (q - q0), regular of rank 1, < 5 s") as st:
        errs = [np.linalg.norm(kappa(fam, cp.q, cp.lam).f - 2.0 * cp.q) for cp in run["samples"]]
        every_point_solved = all(run["per_point"])
        cls = run["cls"]
        st["ok"] = (
            every_point_solved
            and max(errs) <= 1e-8
            and cls.verdict == "regular"
            and cls.evidence["ranks"] == [1]
            and run["elapsed"] < 5.0
        )
        st["detail"] = (
            f"{len(errs)} samples, max |f - k1 q| = {max(errs):.2e}, verdict {cls.verdict}, "
            f"ranks {cls.evidence['ranks']}, {run['elapsed']:.2f} s"
        )
    assert st["ok"]


def test_criterion_2_rod_spring(acceptance_log, rod_spring_run):
    fam, points, run = rod_spring_run
    with criterion(acceptance_log, 2, "rod + spring: two branches matching the closed form, morse, < 5 s") as st:
        counts = [len(pts) for pts in run["per_point"]]
        worst = 0.0
        both_found = True
        for q, pts in zip(points, run["per_point"]):
            expected = oracle_constitutive("rod_spring", {}, q)
            fs = [kappa(fam, cp.q, cp.lam).f for cp in pts]
            for f in fs:
                worst = max(worst, min(np.linalg.norm(f - e) for e in expected))
            both_found &= all(min(np.linalg.norm(f - e) for f in fs) <= 1e-8 for e in expected)
        cls = run["cls"]
        st["ok"] = set(counts) == {2} and worst <= 1e-8 and both_found and cls.verdict == "morse" and run["elapsed"] < 5.0
        st["detail"] = (
            f"branches per point {sorted(set(counts))}, max oracle error {worst:.2e}, "
            f"verdict {cls.verdict}, {run['elapsed']:.2f} s"
        )
    assert st["ok"]


def test_criterion_3_generated_set_lagrangian(acceptance_log, two_springs_run, rod_spring_run):
    with criterion(acceptance_log, 3, "generated set: dim im T kappa = n and isotropic at every sample") as st:
        dims, worst, total = set(), 0.0, 0
        ok = True
        for fam, _, run in (two_springs_run, rod_spring_run):
            for s in run["ver"].samples:
                dims.add(s.dim_im_Tkappa)
                worst = max(worst, s.isotropy_max_violation)
                ok &= s.dim_im_Tkappa == fam.n and s.isotropy_max_violation <= 1e-6
                total += 1
        st["ok"] = ok and total > 0
        st["detail"] = f"{total} samples, image dims {sorted(dims)}, max isotropy violation {worst:.2e}"
    assert st["ok"]


def test_criterion_4_degenerate_family(acceptance_log, lambda_x2_run):
    fam, points, run = lambda_x2_run
    with criterion(acceptance_log, 4, "l x^2: Cr = {x = 0}, rank 0 < codim 1, degenerate, isotropic, not clean") as st:
        xs = [abs(cp.q[0]) for cp in run["samples"]]
        off = [multistart(fam, [x], SolveConfig(seeds=8)) for x in (0.3, -0.7, 1.5)]
        on = multistart(fam, [0.0], SolveConfig(seeds=8))
        ranks = {r.rank for r in run["reports"]}
        codims = {r.cr_codim_estimate for r in run["reports"]}
        v = run["ver"].verdicts
        samples = run["ver"].samples
        st["ok"] = (
            len(xs) > 0
            and max(xs) <= 1e-6
            and not any(off)
            and len(on) > 0
            and ranks == {0}
            and codims == {1}
            and run["cls"].verdict == "degenerate"
            and all(s.dim_im_Tkappa == 0 for s in samples)
            and v["generated_isotropic"]
            and not any(s.clean_flag for s in samples)
        )
        st["detail"] = (
            f"{len(xs)} joint samples with max |x| = {max(xs):.1e}, off-set solves {[len(o) for o in off]}, "
            f"rank {sorted(ranks)} vs codim {sorted(codims)}, verdict {run['cls'].verdict}, "
            f"image dims {sorted({s.dim_im_Tkappa for s in samples})}, clean flags {sorted({s.clean_flag for s in samples})}"
        )
    assert st["ok"]


def _all_runs(*runs):
    for fam, _, run in runs:
        yield fam, run


def test_criterion_5_clean_transverse_equivalences(acceptance_log, two_springs_run, rod_spring_run, lambda_x2_run):
    with criterion(acceptance_log, 5, "clean <=> regular rank, transverse <=> rank k, dim(TS cap TV) = n + k - rank") as st:
        total, bad = 0, []
        for fam, run in _all_runs(two_springs_run, rod_spring_run, lambda_x2_run):
            by_branch = {}
            for s in run["ver"].samples:
                by_branch.setdefault(s.branch_id, set()).add(s.rank)
            for s, rep in zip(run["ver"].samples, run["reports"]):
                constant = len(by_branch[s.branch_id]) == 1
                ok = (
                    s.clean_flag == (constant and rep.rank == rep.cr_codim_estimate)
                    and s.transverse_flag == (rep.rank == fam.k)
                    and s.dim_TS_cap_TV == fam.n + fam.k - rep.rank
                )
                total += 1
                if not ok:
                    bad.append((fam.name, s.branch_id))
        st["ok"] = total > 0 and not bad
        st["detail"] = f"{total} samples over 3 families, {len(bad)} violations"
    assert st["ok"]


def test_criterion_6_kernel_bookkeeping(acceptance_log, two_springs_run, rod_spring_run, lambda_x2_run):
    with criterion(acceptance_log, 6, "dim(ker T reduction cap TS) = k - rank at every sample") as st:
        total, bad = 0, 0
        for fam, run in _all_runs(two_springs_run, rod_spring_run, lambda_x2_run):
            for s, rep in zip(run["ver"].samples, run["reports"]):
                total += 1
                bad += not (s.dim_ker_reduction_cap_TS == fam.k - rep.rank == rep.kernel_dim)
        st["ok"] = total > 0 and bad == 0
        st["detail"] = f"{total} samples, {bad} mismatches"
    assert st["ok"]


CATALOG_POINTS = {
    "two_springs": ([0.5, 0.0], [1.5, 0.0]),
    "rod_spring": ([2.0, 0.0], [0.0]),
    "lambda_x2": ([0.0], [7.0]),
}


def test_criterion_7_hessian_correctness(acceptance_log):
    with criterion(acceptance_log, 7, "AD Hessians vs finite differences, symmetry, reference-function independence") as st:
        rng = np.random.default_rng(777)
        worst_fd, worst_sym = 0.0, 0.0
        for _ in range(50):
            n = int(rng.integers(1, 4))
            k = int(rng.integers(0, 3))
            expr = parse(random_expression(rng, n, k, depth=3), n, k)
            x = rng.uniform(-1.5, 1.5, size=n + k)
            h = jet2_eval(expr, x).hess
            fd = fd_hessian(mp_function(expr), x, h=1e-5)
            scale = np.abs(fd).max()
            worst_fd = max(worst_fd, np.abs(h - fd).max() / scale if scale > 0 else np.abs(h).max())
            worst_sym = max(worst_sym, np.abs(h - h.T).max() / max(np.abs(h).max(), 1e-300))
        exact = 0
        for name, (q, lam) in CATALOG_POINTS.items():
            fam = instantiate(name)
            base = family_hessian(fam, q, lam, estimate_codim=False).M
            f0 = kappa(fam, q, lam).f
            for _ in range(5):
                g = parse(random_expression(rng, fam.n, 0, depth=3), fam.n)
                g0 = g.evaluate(q, [], jet=True).grad

                def F(qs, g=g, g0=g0):
                    out = g(qs, [])
                    for i in range(fam.n):
                        out = out + (f0[i] - g0[i]) * (qs[i] - q[i])
                    return out

                shifted = FamilySpec(fam.fibration, lambda qs, ls, F=F: fam.energy(qs, ls) - F(qs), metric=fam.metric)
                rel = function_hessian(shifted.jet_function(), list(q) + list(lam))
                exact += np.array_equal(rel[fam.n :], base)
        st["ok"] = worst_fd <= 1e-6 and worst_sym <= 1e-12 and exact == 15
        st["detail"] = (
            f"50 cases, max relative FD error {worst_fd:.2e}, max asymmetry {worst_sym:.1e}, "
            f"{exact}/15 reference functions give identical blocks"
        )
    assert st["ok"]


def test_criterion_8_symplin_properties(acceptance_log):
    with criterion(acceptance_log, 8, "double polar, dim V + dim polar V = 2m, symmetric graphs Lagrangian") as st:
        rng = np.random.default_rng(888)
        double = dims = lagr = 0
        for _ in range(200):
            m = int(rng.integers(1, 6))
            space = SymplecticSpace(m)
            r = int(rng.integers(0, 2 * m + 1))
            v = SubspaceBasis(2 * m, rng.normal(size=(r, 2 * m)) if r else np.zeros((0, 2 * m)))
            p = polar(space, v)
            double += polar(space, p).equals(v)
            dims += v.dim + p.dim == 2 * m
            a = rng.normal(size=(m, m))
            lagr += classify(space, graph(a + a.T)) == "lagrangian"
        st["ok"] = double == dims == lagr == 200
        st["detail"] = f"double polar {double}/200, dimension sum {dims}/200, symmetric graphs {lagr}/200"
    assert st["ok"]


def test_criterion_9_determinism(acceptance_log, tmp_path):
    with criterion(acceptance_log, 9, "repeated CLI runs with a fixed seed give byte-identical sample tables") as st:
        doc = {
            "catalog": {"id": "two_springs", "params": {"k1": 2.0, "k2": 5.0}},
            "base_points": {"grid": {"from": [-2, -2], "to": [2, 2], "steps": 3}},
            "solve": {"seeds": 16},
        }
        problem = tmp_path / "p.json"
        problem.write_text(json.dumps(doc))
        tables, codes = [], []
        for i in range(3):
            out = tmp_path / f"samples{i}.csv"
            codes.append(cli.main(["run", str(problem), "--seed", "42", "--samples", str(out), "--report", str(tmp_path / f"r{i}.json")]))
            tables.append(out.read_bytes())
        rows = tables[0].count(b"\n") - 1
        st["ok"] = codes == [0, 0, 0] and rows > 0 and tables[0] == tables[1] == tables[2]
        st["detail"] = f"3 runs, exit codes {codes}, {rows} rows, identical: {tables[0] == tables[1] == tables[2]}"
    assert st["ok"]
