"""Tangent-level checks of the geometry generated by a family.

At each sampled critical point the tangent space of the image of dU is the
graph of the full Hessian; the vertical polar has tangent space
``{(dq, df) : fiber part of df = 0}``.  Intersections, sums and the image of
the tangent map of kappa are computed with :mod:`genfam.symplin`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import hessian as hs
from .symplin import RANK_TOL, SubspaceBasis, SymplecticSpace, classify, graph, intersect_sum, is_clean, omega_matrix

ISOTROPY_TOL = 1e-6


@dataclass
class SampleVerification:
    branch_id: int
    rank: int
    dim_TCr: int
    dim_im_Tkappa: int
    isotropy_max_violation: float
    dim_TS_cap_TV: int
    dim_TS_plus_TV: int
    dim_ker_reduction_cap_TS: int
    TS_lagrangian: bool
    clean_flag: bool
    transverse_flag: bool
    regular_flag: bool
    morse_flag: bool


@dataclass
class VerifyReport:
    samples: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)

    def to_dict(self):
        return {"samples": [asdict(s) for s in self.samples], "verdicts": dict(self.verdicts)}


def tangent_S_bar(fam, q, lam, report=None):
    """Tangent space of the image of dU at ``(q, lam)``: the graph of the Hessian."""
    if report is None:
        report = hs.family_hessian(fam, q, lam, estimate_codim=False)
    return graph(report.full)


def tangent_vertical_polar(n, k):
    d = n + k
    rows = np.eye(2 * d)[: d + n]  # all dq-bar directions, base part of df
    return SubspaceBasis(2 * d, rows)


def reduction_kernel(n, k):
    """Kernel of the tangent reduction map inside the vertical polar: pure fiber shifts."""
    d = n + k
    return SubspaceBasis(2 * d, np.eye(2 * d)[n:d])


def kappa_image_vectors(report):
    """Vectors ``(dq, H_q. t)`` for ``t`` spanning the critical-set tangent."""
    n = report.n
    t = report.tangent_cr
    if t is None:
        raise ValueError("report has no critical-set tangent; compute it with estimate_codim=True")
    if t.shape[0] == 0:
        return np.zeros((0, 2 * n))
    return np.hstack([t[:, :n], t @ report.full[:n].T])


def image_basis(report, rank_tol=RANK_TOL):
    """Orthonormal basis of the image of the tangent map of kappa.

    The tangent rows are orthonormal, so the map's size is set by the
    Hessian; singular values are compared with ``max(1, |H|)`` rather than
    with the largest one, which keeps rounding-level images at dimension 0.
    """
    n = report.n
    v = kappa_image_vectors(report)
    if v.shape[0] == 0:
        return SubspaceBasis.zero(2 * n)
    _, s, vh = np.linalg.svd(v, full_matrices=False)
    scale = max(1.0, float(np.linalg.norm(report.full, 2)))
    r = int(np.count_nonzero(s > rank_tol * scale))
    return SubspaceBasis(2 * n, vh[:r])


def tangent_kappa_image(fam, critical, report=None):
    """Image of the tangent map of kappa as a subspace of R^{2n}."""
    if report is None:
        report = hs.family_hessian(fam, critical.q, critical.lam)
    return image_basis(report)


def check_isotropy(space, basis):
    """Largest ``|omega(u, v)| / (|u| |v|)`` over pairs of spanning vectors."""
    v = np.asarray(basis.vectors if isinstance(basis, SubspaceBasis) else basis, dtype=float)
    if v.shape[0] < 2:
        return 0.0
    norms = np.linalg.norm(v, axis=1)
    keep = norms > 0
    v, norms = v[keep], norms[keep]
    if v.shape[0] < 2:
        return 0.0
    w = omega_matrix(space, v, v)
    return float(np.max(np.abs(w) / np.outer(norms, norms)))


def check_clean_and_transverse(fam, critical, report=None):
    if report is None:
        report = hs.family_hessian(fam, critical.q, critical.lam)
    n, k = fam.n, fam.k
    d = n + k
    ts = graph(report.full)
    tv = tangent_vertical_polar(n, k)
    inter, total = intersect_sum(ts, tv)
    t = report.tangent_cr
    lifted = SubspaceBasis(2 * d, np.hstack([t, t @ report.full.T]) if t.shape[0] else np.zeros((0, 2 * d)))
    clean = inter.dim == d - report.rank and lifted.dim == inter.dim and is_clean(ts, tv, lifted)
    transverse = total.dim == 2 * d
    dims = {"TS_cap_TV": inter.dim, "TS_plus_TV": total.dim, "TCr": t.shape[0], "TS": ts.dim, "TV": tv.dim}
    return clean, transverse, dims


def verify_sample(fam, critical, report, isotropy_tol=ISOTROPY_TOL):
    n, k = fam.n, fam.k
    d = n + k
    base_space = SymplecticSpace(n)
    clean, transverse, dims = check_clean_and_transverse(fam, critical, report)
    image = image_basis(report)
    ts = graph(report.full)
    ker_cap, _ = intersect_sum(reduction_kernel(n, k), ts)
    return SampleVerification(
        branch_id=int(critical.branch_id),
        rank=int(report.rank),
        dim_TCr=int(dims["TCr"]),
        dim_im_Tkappa=int(image.dim),
        isotropy_max_violation=check_isotropy(base_space, image),
        dim_TS_cap_TV=int(dims["TS_cap_TV"]),
        dim_TS_plus_TV=int(dims["TS_plus_TV"]),
        dim_ker_reduction_cap_TS=int(ker_cap.dim),
        TS_lagrangian=classify(SymplecticSpace(d), ts) == "lagrangian",
        clean_flag=bool(clean),
        transverse_flag=bool(transverse),
        regular_flag=report.rank == report.cr_codim_estimate,
        morse_flag=report.rank == k,
    )


def verify_family(fam, samples, reports, classification, isotropy_tol=ISOTROPY_TOL):
    """Per-sample checks plus the global consistency verdicts."""
    checks = [verify_sample(fam, s, r, isotropy_tol) for s, r in zip(samples, reports)]
    return summarize(fam, checks, classification, isotropy_tol)


def summarize(fam, checks, classification, isotropy_tol=ISOTROPY_TOL):
    n, k = fam.n, fam.k
    d = n + k
    ranks_by_branch = {}
    for c in checks:
        ranks_by_branch.setdefault(c.branch_id, set()).add(c.rank)
    constant = {b: len(r) == 1 for b, r in ranks_by_branch.items()}
    verdict = classification.verdict if hasattr(classification, "verdict") else classification
    generating = verdict in (hs.MORSE, hs.REGULAR)
    isotropic = all(c.isotropy_max_violation <= isotropy_tol for c in checks)
    v = {
        "classification": verdict,
        "TS_lagrangian": all(c.TS_lagrangian for c in checks),
        "intersection_dimension": all(c.dim_TS_cap_TV == d - c.rank for c in checks),
        "kernel_dimension": all(c.dim_ker_reduction_cap_TS == k - c.rank for c in checks),
        "clean_iff_regular": all(c.clean_flag == (c.regular_flag and constant[c.branch_id]) for c in checks),
        "transverse_iff_morse": all(c.transverse_flag == c.morse_flag for c in checks),
        "generated_isotropic": isotropic,
        "generated_dim": sorted({c.dim_im_Tkappa for c in checks}),
        "all_clean": all(c.clean_flag for c in checks),
        "all_transverse": all(c.transverse_flag for c in checks),
    }
    # immersed Lagrangian: dimension n and isotropic at every sample
    v["lagrangian_immersed"] = isotropic and all(c.dim_im_Tkappa == n for c in checks)
    v["generated_lagrangian"] = v["lagrangian_immersed"] if generating else True
    v["passed"] = all(
        v[key]
        for key in ("TS_lagrangian", "intersection_dimension", "kernel_dimension", "clean_iff_regular", "transverse_iff_morse", "generated_lagrangian")
    )
    return VerifyReport(checks, v)
