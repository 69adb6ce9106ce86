"""Built-in families with closed-form oracles.

``rod_spring``
    A point on a rigid rod of length ``a`` about ``q0`` (the fiber, in angle
    coordinates) tied by a spring of constant ``k`` to the controlled point
    ``q``.  Morse.
``two_springs``
    ``q`` tied to ``q0`` by a spring ``k1``; a free point ``l`` tied to ``q``
    by a spring ``k2`` of rest length ``a``.  Regular, Hessian rank 1.
``lambda_x2``
    ``U(x, l) = l x^2`` over the line.  Degenerate.

All norms and pairings use the metric ``g`` (default identity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .family import FamilySpec, Fibration


POLE_MARGIN = 1e-6


class CatalogError(ValueError):
    pass


def _quad(g, d):
    """<g d, d> for a list of scalars or jets."""
    n = len(d)
    total = 0.0
    for i in range(n):
        if g[i, i] != 0.0:
            total = total + g[i, i] * (d[i] * d[i])
        for j in range(i + 1, n):
            if g[i, j] != 0.0:
                total = total + (2.0 * g[i, j]) * (d[i] * d[j])
    return total


def _gnorm(g, v):
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(v @ g @ v))


def _metric(params, n):
    g = params.get("g")
    g = np.eye(n) if g is None else np.asarray(g, dtype=float)
    if g.shape != (n, n):
        raise CatalogError(f"metric g must be {n}x{n}, got shape {g.shape}")
    if not np.allclose(g, g.T) or np.linalg.eigvalsh(0.5 * (g + g.T)).min() <= 0:
        raise CatalogError("metric g must be symmetric positive definite")
    return 0.5 * (g + g.T)


def _positive(params, *names):
    for name in names:
        v = params[name]
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise CatalogError(f"parameter {name!r} must be a positive number, got {v!r}")


def _vector(params, name, n):
    v = np.asarray(params[name], dtype=float).reshape(-1)
    if v.shape != (n,):
        raise CatalogError(f"parameter {name!r} must have length {n}")
    return v


# rod_spring -------------------------------------------------------------

def _sphere_chart(n):
    """Unit-sphere chart in R^n as a function of n - 1 angles (n in {2, 3})."""
    if n == 2:
        return lambda t: [ad.cos(t[0]), ad.sin(t[0])]

    def chart3(t):
        st = ad.sin(t[0])
        return [st * ad.cos(t[1]), st * ad.sin(t[1]), ad.cos(t[0])]

    return chart3


def _canon_sphere3(lam):
    theta, phi = float(lam[0]), float(lam[1])
    theta = (theta + math.pi) % (2 * math.pi) - math.pi
    if theta < 0:
        theta, phi = -theta, phi + math.pi
    phi = (phi + math.pi) % (2 * math.pi) - math.pi
    return np.array([theta, phi])


def _off_poles(lam):
    # at theta = 0 or pi the azimuth is arbitrary and the chart degenerates
    return abs(math.sin(float(lam[0]))) > POLE_MARGIN


def rod_point(params, lam):
    """Position of the rod end for fiber angles ``lam``."""
    n = len(params["q0"])
    g = _metric(params, n)
    lt_inv = np.linalg.inv(np.linalg.cholesky(g)).T
    s = np.asarray(_sphere_chart(n)([float(x) for x in lam]), dtype=float)
    return np.asarray(params["q0"], dtype=float) + params["a"] * (lt_inv @ s)


def _rod_spring(params):
    n = int(params["n"])
    if n not in (2, 3):
        raise CatalogError(f"rod_spring supports n = 2 or 3, got {n}")
    _positive(params, "a", "k")
    q0 = _vector(params, "q0", n)
    g = _metric(params, n)
    a, k = float(params["a"]), float(params["k"])
    lt_inv = np.linalg.inv(np.linalg.cholesky(g)).T
    chart = _sphere_chart(n)

    def energy(q, lam):
        s = chart(lam)
        d = []
        for i in range(n):
            u = 0.0
            for j in range(n):
                if lt_inv[i, j] != 0.0:
                    u = u + lt_inv[i, j] * s[j]
            d.append(q0[i] + a * u - q[i])
        return (0.5 * k) * _quad(g, d)

    if n == 2:
        extra = dict(fiber_period=(2 * math.pi,), seed_box=((-math.pi, math.pi),))
    else:
        extra = dict(
            fiber_period=(0.0, 2 * math.pi),
            seed_box=((0.15, math.pi - 0.15), (-math.pi, math.pi)),
            canonicalizer=_canon_sphere3,
            chart_valid=_off_poles,
        )
    return FamilySpec(Fibration(n, n - 1), energy, params, g, "rod_spring", **extra)


def _rod_spring_oracle(params, q, tol=0.0):
    n = int(params["n"])
    g = _metric(params, n)
    d = np.asarray(q, dtype=float) - _vector(params, "q0", n)
    r = _gnorm(g, d)
    if r == 0.0:
        raise CatalogError("base point coincides with q0; the closed form excludes it")
    a, k = float(params["a"]), float(params["k"])
    gd = g @ d
    return [k * (1 - a / r) * gd, k * (1 + a / r) * gd]


def _rod_spring_critical(params, q, lam, tol=1e-8):
    """Rod direction parallel (either sign) to q - q0."""
    n = int(params["n"])
    g = _metric(params, n)
    q0 = _vector(params, "q0", n)
    d = np.asarray(q, dtype=float) - q0
    e = rod_point(params, lam) - q0
    r = _gnorm(g, d)
    a = float(params["a"])
    return min(np.linalg.norm(r * e - a * d), np.linalg.norm(r * e + a * d)) <= tol * max(1.0, a * r)


# two_springs --------------------------------------------------------------

def _two_springs(params):
    n = int(params["n"])
    if n < 1:
        raise CatalogError(f"two_springs needs n >= 1, got {n}")
    _positive(params, "a", "k1", "k2")
    q0 = _vector(params, "q0", n)
    g = _metric(params, n)
    a, k1, k2 = float(params["a"]), float(params["k1"]), float(params["k2"])

    def energy(q, lam):
        d0 = [q[i] - q0[i] for i in range(n)]
        d = [lam[i] - q[i] for i in range(n)]
        stretch = ad.sqrt(_quad(g, d)) - a
        return (0.5 * k1) * _quad(g, d0) + (0.5 * k2) * (stretch * stretch)

    return FamilySpec(Fibration(n, n), energy, params, g, "two_springs")


def _two_springs_oracle(params, q, tol=0.0):
    n = int(params["n"])
    g = _metric(params, n)
    return [float(params["k1"]) * (g @ (np.asarray(q, dtype=float) - _vector(params, "q0", n)))]


def _two_springs_critical(params, q, lam, tol=1e-8):
    n = int(params["n"])
    g = _metric(params, n)
    d = np.asarray(lam, dtype=float) - np.asarray(q, dtype=float)
    return abs(_gnorm(g, d) - float(params["a"])) <= tol


# lambda_x2 ----------------------------------------------------------------

def _lambda_x2(params):
    def energy(q, lam):
        return lam[0] * (q[0] * q[0])

    return FamilySpec(Fibration(1, 1), energy, params, None, "lambda_x2")


def _lambda_x2_oracle(params, q, tol=0.0):
    return [np.zeros(1)] if abs(float(np.asarray(q).reshape(-1)[0])) <= tol else []


def _lambda_x2_critical(params, q, lam, tol=1e-6):
    return abs(float(np.asarray(q).reshape(-1)[0])) <= tol


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    defaults: Callable  # n -> parameter table
    build: Callable
    oracle_constitutive: Callable
    oracle_critical: Callable
    expected_classification: str
    expected_rank: Callable  # parameter table -> Hessian rank

    def dims(self, params):
        n = int(params.get("n", 1))
        k = {"rod_spring": n - 1, "two_springs": n, "lambda_x2": 1}[self.id]
        return n, k


CATALOG = {
    "rod_spring": CatalogEntry(
        "rod_spring",
        lambda n: {"n": n, "q0": [0.0] * n, "a": 1.0, "k": 1.0, "g": np.eye(n).tolist()},
        _rod_spring,
        _rod_spring_oracle,
        _rod_spring_critical,
        "morse",
        lambda p: int(p["n"]) - 1,
    ),
    "two_springs": CatalogEntry(
        "two_springs",
        lambda n: {"n": n, "q0": [0.0] * n, "a": 1.0, "k1": 1.0, "k2": 1.0, "g": np.eye(n).tolist()},
        _two_springs,
        _two_springs_oracle,
        _two_springs_critical,
        "regular",
        lambda p: 1,
    ),
    "lambda_x2": CatalogEntry(
        "lambda_x2",
        lambda n: {"n": 1},
        _lambda_x2,
        _lambda_x2_oracle,
        _lambda_x2_critical,
        "degenerate",
        lambda p: 0,
    ),
}


def entry(id):
    try:
        return CATALOG[id]
    except KeyError:
        raise CatalogError(f"unknown catalog id {id!r}; choose from {sorted(CATALOG)}") from None


def resolve_params(id, overrides=None):
    """Defaults for ``id`` merged with ``overrides`` (which may change ``n``)."""
    e = entry(id)
    overrides = dict(overrides or {})
    n = int(overrides.get("n", 1 if id == "lambda_x2" else 2))
    params = e.defaults(n)
    unknown = set(overrides) - set(params)
    if unknown:
        raise CatalogError(f"unknown parameters for {id}: {sorted(unknown)}")
    params.update(overrides)
    if id == "lambda_x2" and int(params["n"]) != 1:
        raise CatalogError("lambda_x2 is defined for n = 1 only")
    return params


def instantiate(id, overrides=None):
    params = resolve_params(id, overrides)
    return entry(id).build(params)


def oracle_constitutive(id, params, q, tol=0.0):
    """Closed-form covectors generated over the base point ``q``.

    ``tol`` only widens the ``q = 0`` test of ``lambda_x2``.
    """
    return entry(id).oracle_constitutive(resolve_params(id, params), q, tol)
