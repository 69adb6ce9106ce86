"""Family Hessians at critical points and the Morse/regular classification."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .autodiff import jet2_eval
from .family import NotCriticalError, _check_dims
from .solver import SolveConfig, critical_tangent
from .symplin import ABS_TOL, RANK_TOL, SubspaceBasis, numerical_rank

CRITICAL_TOL = 1e-8

MORSE = "morse"
REGULAR = "regular"
DEGENERATE = "degenerate"
IRREGULAR = "irregular-nonconstant-rank"


@dataclass
class HessianReport:
    full: np.ndarray
    M: np.ndarray
    rank: int
    kernel_dim: int
    cr_codim_estimate: Optional[int] = None
    classification: Optional[str] = None
    tangent_cr: Optional[np.ndarray] = None  # rows spanning the estimated T Cr
    grad: Optional[np.ndarray] = None

    @property
    def n(self):
        return self.full.shape[0] - self.M.shape[0]

    @property
    def k(self):
        return self.M.shape[0]


def hessian_rank(full, block, grad=None, rank_tol=RANK_TOL, abs_tol=ABS_TOL):
    """Rank of ``block`` measured against the scale of the full Hessian.

    An absolute floor keeps blocks that vanish up to rounding at rank 0 even
    when the whole Hessian is tiny.
    """
    scale = float(np.linalg.norm(full, 2)) if full.size else 0.0
    if grad is not None and grad.size:
        scale = max(scale, float(np.linalg.norm(grad)))
    return numerical_rank(block, rank_tol, abs_tol, ref_scale=scale)


def family_hessian(fam, q, lam, tol=CRITICAL_TOL, estimate_codim=True, cfg=SolveConfig(), rank_tol=RANK_TOL):
    """Coordinate form of the family Hessian at a critical point.

    ``M`` is the vertical row block of the full Hessian: ``M @ v`` pairs a
    vertical direction (rows) with any tangent direction ``v``.
    """
    q, lam = _check_dims(fam, q, lam)
    jet = fam.jet(q, lam)
    n, k = fam.n, fam.k
    r = float(np.linalg.norm(jet.grad[n:]))
    if r > tol:
        raise NotCriticalError(f"not a critical point: residual norm {r:.3e} > {tol:.1e}")
    full = jet.hess.copy()
    m = full[n:].copy()
    rank = hessian_rank(full, m, jet.grad, rank_tol) if k else 0
    report = HessianReport(full, m, rank, k - rank, grad=jet.grad.copy())
    if estimate_codim:
        tangent = critical_tangent(fam, q, lam, cfg)
        report.tangent_cr = tangent
        report.cr_codim_estimate = n + k - tangent.shape[0]
    return report


def hessian_kernel(report):
    """Vertical vectors ``(0, dl)`` with ``dl^T M = 0``."""
    n, k = report.n, report.k
    d = n + k
    if k == 0:
        return SubspaceBasis.zero(d)
    _, _, vh = np.linalg.svd(report.M.T, full_matrices=True)
    null = vh[report.rank :]
    rows = np.zeros((null.shape[0], d))
    rows[:, n:] = null
    return SubspaceBasis(d, rows)


def function_hessian(f, x, reference=None, tol=CRITICAL_TOL):
    """Hessian matrix of ``f`` at a critical point ``x``.

    With ``reference`` (a function whose differential at ``x`` matches that of
    ``f``) the relative Hessian of ``f - reference`` is returned instead and
    ``x`` need not be critical for ``f``.
    """
    jet = jet2_eval(f, x)
    if reference is None:
        g = jet.grad
        if np.linalg.norm(g) > tol:
            raise NotCriticalError(f"gradient norm {np.linalg.norm(g):.3e} > {tol:.1e}; supply a reference function")
        return jet.hess
    ref = jet2_eval(reference, x)
    if np.linalg.norm(jet.grad - ref.grad) > tol:
        raise NotCriticalError("reference function differential does not match at x")
    return jet.hess - ref.hess


@dataclass
class Classification:
    verdict: str
    evidence: dict = field(default_factory=dict)


def classify_family(fam, samples, reports=None, cfg=SolveConfig()):
    """Classify from critical samples grouped by ``branch_id``.

    ``reports`` (parallel to ``samples``) saves recomputing Hessians.
    Per branch: morse when every rank equals ``k``; regular when the rank is
    constant and equals the estimated codimension of the critical set;
    degenerate when constant but short of the codimension; otherwise
    irregular.  The family verdict needs all branches to agree.
    """
    if not samples:
        raise ValueError("cannot classify from an empty sample set")
    if reports is None:
        reports = [family_hessian(fam, s.q, s.lam, cfg=cfg) for s in samples]
    by_branch = {}
    for s, rep in zip(samples, reports):
        by_branch.setdefault(s.branch_id, []).append(rep)
    branch_verdicts = {}
    for bid, reps in sorted(by_branch.items()):
        ranks = {r.rank for r in reps}
        codims = {r.cr_codim_estimate for r in reps}
        if ranks == {fam.k}:
            v = MORSE
        elif len(ranks) == 1 and len(codims) == 1 and ranks == codims:
            v = REGULAR
        elif len(ranks) == 1 and len(codims) == 1:
            v = DEGENERATE
        else:
            v = IRREGULAR
        branch_verdicts[bid] = v
    verdicts = set(branch_verdicts.values())
    if len(verdicts) == 1:
        verdict = verdicts.pop()
    else:
        # a family that is Morse on some branches and regular on others is still regular
        verdict = REGULAR if verdicts <= {MORSE, REGULAR} and _uniform(reports) else IRREGULAR
    ranks = sorted({r.rank for r in reports})
    codims = sorted({r.cr_codim_estimate for r in reports if r.cr_codim_estimate is not None})
    for r in reports:
        r.classification = verdict
    return Classification(
        verdict,
        {
            "ranks": ranks,
            "codims": codims,
            "k": fam.k,
            "samples": len(samples),
            "branches": {int(b): v for b, v in branch_verdicts.items()},
        },
    )


def _uniform(reports):
    return all(r.rank == r.cr_codim_estimate for r in reports)
