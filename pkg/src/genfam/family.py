"""Families of functions on a trivial fibration Q x F -> Q.

Total-space coordinates are ``(q_1..q_n, l_1..l_k)``; the projection keeps the
first ``n``.  A covector on the total space is stored as ``(point, comps)``
with ``n + k`` entries each.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .autodiff import Jet2

KAPPA_TOL = 1e-8
POLAR_TOL = 1e-8


class NotCriticalError(ValueError):
    """Raised when an operation defined only on the critical set is called off it."""


@dataclass(frozen=True)
class Fibration:
    n: int
    k: int

    def __post_init__(self):
        if self.n < 1 or self.k < 0:
            raise ValueError(f"need n >= 1 and k >= 0, got n={self.n}, k={self.k}")

    @property
    def total_dim(self):
        return self.n + self.k

    def project(self, qbar):
        return np.asarray(qbar, dtype=float)[: self.n]

    def vertical_basis(self):
        """Rows spanning the vertical space: the last ``k`` coordinate directions."""
        return np.eye(self.total_dim)[self.n :]


@dataclass(frozen=True)
class Covector:
    q: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).copy()
        f = np.asarray(self.f, dtype=float).copy()
        if q.shape != f.shape:
            raise ValueError(f"point and components differ in length: {q.shape} vs {f.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(f))):
            raise ValueError("covector entries must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "f", f)


@dataclass(frozen=True)
class FamilySpec:
    """A scalar family ``energy(q, l)`` over a fibration.

    ``energy`` accepts sequences of floats or jets.  ``fiber_period`` marks
    angular fiber coordinates (``None`` or ``0`` for ordinary ones) so that
    solutions can be compared modulo the period.  ``chart_valid`` flags
    fiber points at chart singularities, where solutions are spurious.
    """

    fibration: Fibration
    energy: Callable
    params: dict = field(default_factory=dict)
    metric: Optional[np.ndarray] = None
    name: str = "custom"
    fiber_period: Optional[tuple] = None
    seed_box: Optional[tuple] = None
    canonicalizer: Optional[Callable] = None
    chart_valid: Optional[Callable] = None

    def __post_init__(self):
        g = np.eye(self.fibration.n) if self.metric is None else np.asarray(self.metric, dtype=float)
        if g.shape != (self.fibration.n, self.fibration.n):
            raise ValueError(f"metric must be {self.fibration.n}x{self.fibration.n}")
        if not np.allclose(g, g.T, rtol=0, atol=1e-12 * max(1.0, np.abs(g).max())):
            raise ValueError("metric must be symmetric")
        if np.linalg.eigvalsh(g).min() <= 0:
            raise ValueError("metric must be positive definite")
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "metric", g)
        object.__setattr__(self, "params", dict(self.params))

    @property
    def n(self):
        return self.fibration.n

    @property
    def k(self):
        return self.fibration.k

    def value(self, q, lam):
        return float(self.energy([float(v) for v in q], [float(v) for v in lam]))

    def jet(self, q, lam):
        """Jet of the energy in all ``n + k`` total-space coordinates."""
        xs = Jet2.variables(list(q) + list(lam))
        out = self.energy(xs[: self.n], xs[self.n :])
        if not isinstance(out, Jet2):
            out = Jet2.constant(out, self.n + self.k)
        return out

    def jet_function(self):
        n = self.n
        return lambda xs: self.energy(xs[:n], xs[n:])

    def canonical_fiber(self, lam):
        """Fiber point with periodic coordinates wrapped into ``[-period/2, period/2)``."""
        lam = np.asarray(lam, dtype=float).copy()
        if self.canonicalizer is not None:
            return np.asarray(self.canonicalizer(lam), dtype=float)
        if self.fiber_period is not None:
            for i, p in enumerate(self.fiber_period):
                if p:
                    lam[i] = (lam[i] + 0.5 * p) % p - 0.5 * p
        return lam

    def in_chart(self, lam):
        return self.chart_valid is None or bool(self.chart_valid(np.asarray(lam, dtype=float)))

    def fiber_distance(self, lam1, lam2):
        d = self.canonical_fiber(lam1) - self.canonical_fiber(lam2)
        if self.fiber_period is not None:
            for i, p in enumerate(self.fiber_period):
                if p:
                    d[i] = (d[i] + 0.5 * p) % p - 0.5 * p
        return float(np.linalg.norm(d))


def _check_dims(fam, q, lam):
    q = np.asarray(q, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if q.shape != (fam.n,) or lam.shape != (fam.k,):
        raise ValueError(f"expected q of length {fam.n} and lambda of length {fam.k}, got {q.shape} and {lam.shape}")
    return q, lam


def residual(fam, q, lam):
    """Fiber derivatives of the energy; zero exactly on the critical set."""
    q, lam = _check_dims(fam, q, lam)
    return fam.jet(q, lam).grad[fam.n :].copy()


def differential(fam, q, lam):
    """dU at (q, lam) as a covector on the total space."""
    q, lam = _check_dims(fam, q, lam)
    return Covector(np.concatenate([q, lam]), fam.jet(q, lam).grad)


def kappa(fam, q, lam, tol=KAPPA_TOL):
    """The covector on Q generated by the critical point ``(q, lam)``."""
    q, lam = _check_dims(fam, q, lam)
    grad = fam.jet(q, lam).grad
    r = np.linalg.norm(grad[fam.n :])
    if r > tol:
        raise NotCriticalError(f"({q.tolist()}, {lam.tolist()}) is not critical: residual norm {r:.3e} > {tol:.1e}")
    return Covector(q, grad[: fam.n])


def in_vertical_polar(fam, cov, tol=POLAR_TOL):
    """Whether ``cov`` annihilates vertical vectors (its fiber part vanishes)."""
    f = np.asarray(cov.f, dtype=float)
    if f.shape != (fam.n + fam.k,):
        raise ValueError(f"expected {fam.n + fam.k} covector components, got {f.shape}")
    if fam.k == 0:
        return True
    scale = max(1.0, float(np.abs(f).max()))
    return bool(np.abs(f[fam.n :]).max() <= tol * scale)


def reduce(fam, cov, tol=POLAR_TOL):
    """Map a covector in the vertical polar to its base covector."""
    if not in_vertical_polar(fam, cov, tol):
        raise NotCriticalError("covector has a nonzero fiber part; reduction is undefined")
    return Covector(cov.q[: fam.n], cov.f[: fam.n])
