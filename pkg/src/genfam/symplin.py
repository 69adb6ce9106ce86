"""Linear symplectic algebra on flat charts R^{2m}.

Vectors are laid out as ``(dq, dp)`` with ``dq`` the first ``m`` entries and
``dp`` the last ``m``.  The canonical form is

    omega((dq1, dp1), (dq2, dp2)) = <dp1, dq2> - <dp2, dq1>

so that ``omega(e_q, e_p) = -1`` for ``m = 1``.  Keep this convention in mind
when comparing with texts that put the minus sign on the other pairing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RANK_TOL = 1e-8
ABS_TOL = 1e-10
CONTAIN_TOL = 1e-8


def numerical_rank(a, rank_tol=RANK_TOL, abs_tol=0.0, ref_scale=None):
    """Count singular values above ``max(rank_tol * ref, abs_tol)``.

    ``ref`` is the largest singular value unless ``ref_scale`` is given.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    ref = s[0] if ref_scale is None else ref_scale
    return int(np.count_nonzero(s > max(rank_tol * ref, abs_tol)))


@dataclass(frozen=True)
class SymplecticSpace:
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"half-dimension must be positive, got {self.m}")

    @property
    def dim(self):
        return 2 * self.m

    def matrix(self):
        """Gram matrix J with omega(u, v) = u @ J @ v."""
        m = self.m
        j = np.zeros((2 * m, 2 * m))
        j[:m, m:] = -np.eye(m)
        j[m:, :m] = np.eye(m)
        return j


@dataclass(frozen=True)
class SubspaceBasis:
    """A linear subspace given by spanning vectors (rows of ``vectors``)."""

    ambient_dim: int
    vectors: np.ndarray
    rank_tol: float = RANK_TOL
    _q: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.size == 0:
            v = np.zeros((0, self.ambient_dim))
        v = np.atleast_2d(v)
        if v.shape[1] != self.ambient_dim:
            raise ValueError(
                f"vectors have length {v.shape[1]}, ambient dimension is {self.ambient_dim}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "_q", _orthonormal_rows(v, self.rank_tol))

    @classmethod
    def span(cls, *vectors, rank_tol=RANK_TOL):
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        return cls(v.shape[1], v, rank_tol)

    @classmethod
    def zero(cls, ambient_dim, rank_tol=RANK_TOL):
        return cls(ambient_dim, np.zeros((0, ambient_dim)), rank_tol)

    @classmethod
    def full(cls, ambient_dim, rank_tol=RANK_TOL):
        return cls(ambient_dim, np.eye(ambient_dim), rank_tol)

    @property
    def dim(self):
        return self._q.shape[0]

    def orthonormal(self):
        """Orthonormal basis as rows, shape ``(dim, ambient_dim)``."""
        return self._q

    def contains(self, other, tol=CONTAIN_TOL):
        """True when ``other`` is a subspace of ``self``."""
        _check_same_ambient(self, other)
        b = other.orthonormal()
        if b.shape[0] == 0:
            return True
        q = self._q
        resid = b - (b @ q.T) @ q
        return bool(np.abs(resid).max() <= tol)

    def equals(self, other, tol=CONTAIN_TOL):
        return self.dim == other.dim and self.contains(other, tol) and other.contains(self, tol)

    def complement(self):
        """Euclidean orthogonal complement."""
        return SubspaceBasis(self.ambient_dim, _null_rows(self._q, self.dim), self.rank_tol)


def _orthonormal_rows(v, rank_tol):
    if v.shape[0] == 0 or not np.any(v):
        return np.zeros((0, v.shape[1]))
    _, s, vh = np.linalg.svd(v, full_matrices=False)
    r = int(np.count_nonzero(s > rank_tol * s[0]))
    return vh[:r].copy()


def _null_rows(a, rank):
    """Orthonormal rows spanning the null space of ``a`` given its rank."""
    d = a.shape[1]
    if a.shape[0] == 0 or rank == 0:
        return np.eye(d)
    _, _, vh = np.linalg.svd(a, full_matrices=True)
    return vh[rank:].copy()


def _check_same_ambient(a, b):
    if a.ambient_dim != b.ambient_dim:
        raise ValueError(f"ambient dimensions differ: {a.ambient_dim} vs {b.ambient_dim}")


def _check_space(space, v):
    if v.ambient_dim != space.dim:
        raise ValueError(f"subspace lives in R^{v.ambient_dim}, symplectic space is R^{space.dim}")


def omega(space, u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (space.dim,) or v.shape != (space.dim,):
        raise ValueError(f"expected vectors of length {space.dim}, got {u.shape} and {v.shape}")
    m = space.m
    return float(u[m:] @ v[:m] - v[m:] @ u[:m])


def omega_matrix(space, a, b):
    """Pairwise values omega(a_i, b_j) for row stacks ``a`` and ``b``."""
    m = space.m
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    return a[:, m:] @ b[:, :m].T - a[:, :m] @ b[:, m:].T


def polar(space, v):
    """Symplectic polar {u : omega(u, w) = 0 for all w in v}."""
    _check_space(space, v)
    q = v.orthonormal()
    # omega(u, w) = u . (J w); J is orthogonal so rank is preserved
    constraints = q @ space.matrix().T
    return SubspaceBasis(space.dim, _null_rows(constraints, q.shape[0]), v.rank_tol)


def intersect_sum(a, b):
    """Return ``(a & b, a + b)``."""
    _check_same_ambient(a, b)
    tol = max(a.rank_tol, b.rank_tol)
    total = SubspaceBasis(a.ambient_dim, np.vstack([a.orthonormal(), b.orthonormal()]), tol)
    # a & b is the complement of (a_perp + b_perp)
    perp = np.vstack([a.complement().orthonormal(), b.complement().orthonormal()])
    perp_span = SubspaceBasis(a.ambient_dim, perp, tol)
    inter = SubspaceBasis(a.ambient_dim, _null_rows(perp_span.orthonormal(), perp_span.dim), tol)
    return inter, total


def classify(space, v):
    """One of ``lagrangian``, ``isotropic``, ``coisotropic``, ``symplectic``, ``generic``.

    Lagrangian is reported before isotropic/coisotropic.  A subspace that is
    both symplectic and coisotropic (the whole space) reports ``symplectic``;
    use :func:`is_coisotropic` to query that separately.
    """
    p = polar(space, v)
    sub = p.contains(v)
    sup = v.contains(p)
    if sub and sup:
        return "lagrangian"
    if sub:
        return "isotropic"
    inter, _ = intersect_sum(v, p)
    if inter.dim == 0:
        return "symplectic"
    if sup:
        return "coisotropic"
    return "generic"


def is_isotropic(space, v):
    return polar(space, v).contains(v)


def is_coisotropic(space, v):
    return v.contains(polar(space, v))


def is_clean(a, b, c_given):
    """True iff ``c_given`` coincides with ``a & b``."""
    inter, _ = intersect_sum(a, b)
    return inter.equals(c_given)


def is_transverse(space, a, b):
    _, total = intersect_sum(a, b)
    return total.dim == space.dim


def graph(matrix, rank_tol=RANK_TOL):
    """The graph {(x, S x)} of a linear map as a subspace of R^{2d}."""
    s = np.asarray(matrix, dtype=float)
    d = s.shape[1]
    return SubspaceBasis(d + s.shape[0], np.hstack([np.eye(d), s.T]), rank_tol)
