"""Critical points of a family: fiber Newton, multistart, continuation.

Besides the fiber solve over a fixed base point, :func:`project_to_critical`
moves a total-space point onto the critical set with minimum-norm
Gauss-Newton steps in all coordinates.  It backs joint exploration of the
critical set and the local tangent estimate :func:`critical_tangent`.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .autodiff import DomainError, Jet2
from .symplin import ABS_TOL, RANK_TOL, numerical_rank


class NewtonFailure(RuntimeError):
    """Newton did not reach the tolerance; ``reason`` is one of
    ``divergence``, ``stagnation``, ``domain`` or ``chart`` (converged onto
    a chart singularity)."""

    def __init__(self, reason, message, lam=None, residual_norm=None):
        super().__init__(f"{reason}: {message}")
        self.reason = reason
        self.lam = lam
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class SolveConfig:
    newton_tol: float = 1e-12
    max_iters: int = 50
    seeds: int = 32
    seed_box: Optional[tuple] = None  # per fiber axis (lo, hi); family default, else [-2, 2]
    dedup_radius: float = 1e-6
    continuation_step: float = 0.25
    rng_seed: int = 0
    damping: float = 1e-10
    mode: str = "fiber"  # or "joint"
    project_iters: int = 200
    threads: int = 1

    def __post_init__(self):
        if self.newton_tol <= 0 or self.dedup_radius <= 0 or self.continuation_step <= 0:
            raise ValueError("tolerances and step caps must be positive")
        if self.seeds < 1 or self.max_iters < 1:
            raise ValueError("seeds and max_iters must be at least 1")
        if self.mode not in ("fiber", "joint"):
            raise ValueError(f"mode must be 'fiber' or 'joint', got {self.mode!r}")


@dataclass
class CriticalPoint:
    q: np.ndarray
    lam: np.ndarray
    residual_norm: float
    branch_id: int = 0
    newton_iters: int = 0
    base_index: int = 0

    @property
    def qbar(self):
        return np.concatenate([self.q, self.lam])


@dataclass
class Fold:
    index: int  # position in the base path where continuation stopped
    q: np.ndarray
    reason: str


@dataclass
class Branch:
    points: list = field(default_factory=list)
    fold: Optional[Fold] = None


def default_threads():
    env = os.environ.get("GENFAM_THREADS")
    if env:
        return max(1, int(env))
    return 1


def _fiber_jet(fam, q, lam):
    xs = Jet2.variables(lam)
    out = fam.energy([float(v) for v in q], xs)
    if not isinstance(out, Jet2):
        out = Jet2.constant(out, len(xs))
    return out


def damped_solve(a, r, mu):
    """Tikhonov-regularised least-squares solution of ``a x = r``."""
    u, s, vh = np.linalg.svd(a)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(a.shape[1])
    if s[-1] > 1e-8 * s[0]:
        return vh.T @ ((u.T @ r) / s)
    w = s / (s * s + mu * s[0] * s[0])
    return vh.T @ (w * (u.T @ r))


def newton_solve(fam, q, lam0, cfg=SolveConfig()):
    """Zero the fiber residual over the fixed base point ``q``."""
    q = np.asarray(q, dtype=float)
    lam = np.asarray(lam0, dtype=float).copy()
    n = fam.n
    try:
        jet = _fiber_jet(fam, q, lam)
        r = jet.grad
        rn = float(np.linalg.norm(r))
        for it in range(cfg.max_iters + 1):
            if rn <= cfg.newton_tol:
                # post-check on the full evaluation path
                full = fam.jet(q, lam).grad[n:]
                fn = float(np.linalg.norm(full))
                if fn <= cfg.newton_tol:
                    if not fam.in_chart(lam):
                        raise NewtonFailure("chart", f"converged onto a chart singularity at {lam.tolist()}", lam, fn)
                    return CriticalPoint(q.copy(), lam, fn, newton_iters=it)
                rn = fn
            if it == cfg.max_iters:
                break
            step = damped_solve(jet.hess, r, cfg.damping)
            if not np.any(step) or np.linalg.norm(step) <= 1e-15 * (1.0 + np.linalg.norm(lam)):
                raise NewtonFailure("stagnation", f"singular step with residual {rn:.3e}", lam, rn)
            t = 1.0
            while True:
                cand = lam - t * step
                cjet = _fiber_jet(fam, q, cand)
                cn = float(np.linalg.norm(cjet.grad))
                if cn < rn or t < 1e-3:
                    break
                t *= 0.5
            lam, jet, r, rn = cand, cjet, cjet.grad, cn
    except DomainError as err:
        raise NewtonFailure("domain", str(err), lam) from err
    raise NewtonFailure("divergence", f"no convergence in {cfg.max_iters} iterations, residual {rn:.3e}", lam, rn)


def project_to_critical(fam, qbar0, cfg=SolveConfig(), step_tol=None):
    """Minimum-norm Gauss-Newton in all coordinates onto the critical set.

    Iterates past the residual tolerance until the step falls below
    ``step_tol`` (default: rounding level), which pins degenerate zeros,
    where convergence is only linear, tightly.
    """
    x = np.asarray(qbar0, dtype=float).copy()
    n = fam.n
    rn = np.inf
    last_step = np.inf
    for it in range(cfg.project_iters):
        jet = fam.jet(x[:n], x[n:])
        r = jet.grad[n:]
        rn = float(np.linalg.norm(r))
        tol = 1e-15 * (1.0 + np.linalg.norm(x)) if step_tol is None else step_tol
        if rn == 0.0 or (rn <= cfg.newton_tol and last_step <= tol):
            break
        step = np.linalg.lstsq(jet.hess[n:], r, rcond=None)[0]
        x = x - step
        last_step = float(np.linalg.norm(step))
    else:
        rn = float(np.linalg.norm(fam.jet(x[:n], x[n:]).grad[n:]))
    if not rn <= cfg.newton_tol:
        raise NewtonFailure("divergence", f"projection stalled with residual {rn:.3e}", x[n:], rn)
    if not fam.in_chart(x[n:]):
        raise NewtonFailure("chart", f"projected onto a chart singularity at {x[n:].tolist()}", x[n:], rn)
    return CriticalPoint(x[:n].copy(), x[n:].copy(), rn, newton_iters=it + 1)


def critical_tangent(fam, q, lam, cfg=SolveConfig(), h=1e-4):
    """Estimate the tangent space of the critical set at ``(q, lam)``.

    Each coordinate direction is perturbed by ``h`` and projected back; the
    difference quotients approximate the projector onto the tangent space,
    whose singular values are 1 (tangent) or 0 (normal).  Returns orthonormal
    rows spanning the estimate.
    """
    x0 = np.concatenate([np.asarray(q, dtype=float), np.asarray(lam, dtype=float)])
    d = x0.size
    rows = []
    for i in range(d):
        x = x0.copy()
        x[i] += h
        p = project_to_critical(fam, x, cfg, step_tol=1e-6 * h)
        rows.append((p.qbar - x0) / h)
    _, s, vh = np.linalg.svd(np.array(rows))
    dim = int(np.count_nonzero(s > 0.5))
    if dim == 0 or fam.k == 0:
        return vh[:dim]
    # T Cr lies in the null space of the vertical Hessian block; snap the
    # difference-quotient estimate into it to remove the O(h) error
    jet = fam.jet(x0[: fam.n], x0[fam.n :])
    m = jet.hess[fam.n :]
    scale = max(float(np.linalg.norm(jet.hess, 2)), float(np.linalg.norm(jet.grad)))
    r = numerical_rank(m, RANK_TOL, ABS_TOL, ref_scale=scale)
    null = np.linalg.svd(m, full_matrices=True)[2][r:]
    snapped = (vh[:dim] @ null.T) @ null
    _, s2, vh2 = np.linalg.svd(snapped)
    return vh2[: min(dim, int(np.count_nonzero(s2 > 0.5)))]


def _seed_points(fam, cfg):
    k = fam.k
    box = cfg.seed_box if cfg.seed_box is not None else fam.seed_box
    if box is None:
        box = ((-2.0, 2.0),) * k
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    if box.shape[0] == 1 and k > 1:
        box = np.repeat(box, k, axis=0)
    if box.shape[0] != k:
        raise ValueError(f"seed box has {box.shape[0]} axes, fiber dimension is {k}")
    sample = qmc.Halton(d=k, scramble=True, seed=cfg.rng_seed).random(cfg.seeds)
    return box[:, 0] + sample * (box[:, 1] - box[:, 0])


def _map(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def dedup(fam, points, radius, joint=False):
    """Keep the first of any points closer than ``radius``; input is sorted first."""

    def key(cp):
        lam = fam.canonical_fiber(cp.lam)
        return tuple(cp.q.tolist()) + tuple(lam.tolist()) if joint else tuple(lam.tolist())

    kept = []
    for cp in sorted(points, key=key):
        cp.lam = fam.canonical_fiber(cp.lam)
        if all(_distance(fam, cp, other, joint) > radius for other in kept):
            kept.append(cp)
    return kept


def _distance(fam, a, b, joint):
    d = fam.fiber_distance(a.lam, b.lam)
    if joint:
        d = float(np.hypot(d, np.linalg.norm(a.q - b.q)))
    return d


def multistart(fam, q, cfg=SolveConfig()):
    """Deduplicated critical points over ``q`` from seeds in the fiber box."""
    q = np.asarray(q, dtype=float)
    if fam.k == 0:
        return [CriticalPoint(q.copy(), np.zeros(0), 0.0)]
    seeds = _seed_points(fam, cfg)
    joint = cfg.mode == "joint"

    def solve(seed):
        try:
            if joint:
                return project_to_critical(fam, np.concatenate([q, seed]), cfg)
            return newton_solve(fam, q, seed, cfg)
        except NewtonFailure:
            return None

    found = [cp for cp in _map(solve, list(seeds), cfg.threads) if cp is not None]
    kept = dedup(fam, found, cfg.dedup_radius, joint)
    for i, cp in enumerate(kept):
        cp.branch_id = i
    return kept


def _vv_rank(fam, q, lam):
    if fam.k == 0:
        return 0
    jet = fam.jet(q, lam)
    n = fam.n
    scale = max(float(np.linalg.norm(jet.hess, 2)), float(np.linalg.norm(jet.grad)))
    return numerical_rank(jet.hess[n:, n:], RANK_TOL, ABS_TOL, ref_scale=scale), jet


def _kappa(jet, n):
    return jet.grad[:n]


def continue_branch(fam, base_path, start, cfg=SolveConfig(), kappa_lipschitz=None):
    """Follow ``start`` along ``base_path`` with Newton warm starts.

    Segments longer than ``cfg.continuation_step`` are subdivided.  The walk
    stops with a :class:`Fold` when Newton fails, when the fiber block of the
    Hessian loses rank (a fold of the projection or a chart singularity), or
    when the generated covector jumps by more than ``C * |dq|``; ``C`` defaults
    to ten times the Hessian norm at the previous point.
    """
    path = [np.asarray(p, dtype=float) for p in base_path]
    branch = Branch([replace(start, base_index=0)])
    if not path:
        return branch
    rank0, jet = _vv_rank(fam, start.q, start.lam)
    prev_q, prev_lam = np.asarray(start.q, dtype=float), np.asarray(start.lam, dtype=float)
    for idx in range(1, len(path)):
        target = path[idx]
        nsub = max(1, int(np.ceil(np.linalg.norm(target - prev_q) / cfg.continuation_step)))
        cp = None
        for j in range(1, nsub + 1):
            qj = prev_q + (target - prev_q) * (j / nsub)
            try:
                cp = newton_solve(fam, qj, prev_lam if cp is None else cp.lam, cfg)
            except NewtonFailure as err:
                branch.fold = Fold(idx, qj, f"newton {err.reason}")
                return branch
            rank, new_jet = _vv_rank(fam, cp.q, cp.lam)
            if rank < rank0:
                branch.fold = Fold(idx, qj, "fiber Hessian block lost rank (fold or chart singularity)")
                return branch
            bound = kappa_lipschitz if kappa_lipschitz is not None else 10.0 * max(1.0, np.linalg.norm(jet.hess, 2))
            dq = np.linalg.norm(cp.q - (prev_q if j == 1 else qj_prev))
            if np.linalg.norm(_kappa(new_jet, fam.n) - _kappa(jet, fam.n)) > bound * dq + 1e-12:
                branch.fold = Fold(idx, qj, "generated covector jumped")
                return branch
            jet, qj_prev = new_jet, qj
        cp.branch_id = start.branch_id
        cp.base_index = idx
        cp.lam = fam.canonical_fiber(cp.lam) if fam.k else cp.lam
        branch.points.append(cp)
        prev_q, prev_lam = cp.q, cp.lam
    return branch


def track(fam, base_points, cfg=SolveConfig()):
    """Critical points over every base point with branch labels linked by continuation.

    Branches alive at one base point are continued to the next; a fresh
    multistart runs at the first point, whenever a branch breaks, and
    whenever no branch is alive.  New solutions get new labels; branches that
    merge (possible on a non-isolated critical set) keep the lower label.
    """
    results = []
    live = []
    next_id = 0
    prev_q = None
    joint = cfg.mode == "joint"
    for i, q in enumerate(base_points):
        q = np.asarray(q, dtype=float)
        found = []
        broken = 0
        if live and not joint:
            for cp in live:
                br = continue_branch(fam, [prev_q, q], cp, cfg)
                if br.fold is not None or len(br.points) != 2:
                    broken += 1
                    continue
                new = br.points[1]
                # branches of a non-isolated critical set may merge; keep one
                if all(fam.fiber_distance(new.lam, o.lam) > cfg.dedup_radius for o in found):
                    found.append(new)
        if not live or broken or joint:
            for cp in multistart(fam, q, cfg):
                if all(_distance(fam, cp, o, joint) > cfg.dedup_radius for o in found):
                    cp.branch_id = next_id
                    next_id += 1
                    found.append(cp)
        for cp in found:
            cp.base_index = i
        found.sort(key=lambda c: c.branch_id)
        results.append(found)
        live = [] if joint else found
        prev_q = q
    return results
