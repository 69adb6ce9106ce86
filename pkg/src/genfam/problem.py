"""Problem files: JSON documents describing one batch run.

Example::

    {
      "catalog": {"id": "two_springs", "params": {"k1": 2.0, "k2": 5.0}},
      "base_points": {"grid": {"from": [-2, -2], "to": [2, 2], "steps": 5}},
      "solve": {"seeds": 32, "rng_seed": 0},
      "tolerances": {"isotropy_tol": 1e-6},
      "outputs": {"report_path": "report.json", "samples_path": "samples.csv"}
    }

A custom family replaces ``catalog`` with
``{"custom": {"n": 1, "k": 1, "expression": "l1*q1^2", "params": {}}}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import catalog
from .expr import ExprError, parse
from .family import FamilySpec, Fibration
from .solver import SolveConfig

TOLERANCE_DEFAULTS = {
    "rank_tol": 1e-8,
    "isotropy_tol": 1e-6,
    "oracle_tol": 1e-8,
    "critical_tol": 1e-8,
}


class ProblemError(ValueError):
    """Invalid problem file; the message names the line or field."""


@dataclass
class Problem:
    family: FamilySpec
    catalog_id: Optional[str]
    catalog_params: Optional[dict]
    base_points: list
    solve: SolveConfig
    tolerances: dict
    report_path: Optional[str] = None
    samples_path: Optional[str] = None
    source: dict = field(default_factory=dict)


def _field_error(path, message):
    return ProblemError(f"field '{path}': {message}")


def _number(value, path, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise _field_error(path, f"expected a finite number, got {value!r}")
    if positive and value <= 0:
        raise _field_error(path, f"must be positive, got {value!r}")
    return float(value)


def _int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise _field_error(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise _field_error(path, f"must be >= {minimum}, got {value}")
    return value


def _vector(value, length, path):
    if not isinstance(value, list) or len(value) != length:
        raise _field_error(path, f"expected a list of {length} numbers")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _object(doc, key, path, required=False):
    value = doc.get(key)
    if value is None:
        if required:
            raise _field_error(path, "is required")
        return {}
    if not isinstance(value, dict):
        raise _field_error(path, "expected an object")
    return value


def _reject_unknown(obj, allowed, path):
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise _field_error(path, f"unknown keys {extra}")


def load(path):
    """Read and validate a problem file."""
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ProblemError(f"cannot read problem file {path}: {err.strerror}") from err
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ProblemError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from err
    return from_dict(doc)


def _family(doc):
    has_cat, has_custom = "catalog" in doc, "custom" in doc
    if has_cat == has_custom:
        raise ProblemError("problem must contain exactly one of 'catalog' or 'custom'")
    if has_cat:
        cat = _object(doc, "catalog", "catalog", required=True)
        _reject_unknown(cat, ("id", "params"), "catalog")
        cid = cat.get("id")
        if not isinstance(cid, str):
            raise _field_error("catalog.id", "expected a string")
        params = _object(cat, "params", "catalog.params")
        try:
            resolved = catalog.resolve_params(cid, params)
            fam = catalog.entry(cid).build(resolved)
        except catalog.CatalogError as err:
            raise _field_error("catalog", str(err)) from err
        except (TypeError, ValueError) as err:
            raise _field_error("catalog.params", str(err)) from err
        return fam, cid, resolved
    custom = _object(doc, "custom", "custom", required=True)
    _reject_unknown(custom, ("n", "k", "expression", "params", "metric", "fiber_period", "seed_box"), "custom")
    n = _int(custom.get("n"), "custom.n", 1)
    k = _int(custom.get("k"), "custom.k", 0)
    src = custom.get("expression")
    if not isinstance(src, str):
        raise _field_error("custom.expression", "expected a string")
    params = _object(custom, "params", "custom.params")
    params = {name: _number(v, f"custom.params.{name}") for name, v in params.items()}
    try:
        expr = parse(src, n, k, params)
    except ExprError as err:
        raise _field_error("custom.expression", str(err)) from err
    period = custom.get("fiber_period")
    if period is not None:
        period = tuple(_vector(period, k, "custom.fiber_period"))
    box = custom.get("seed_box")
    if box is not None:
        box = _box(box, k, "custom.seed_box")
    try:
        fam = FamilySpec(Fibration(n, k), expr, params, custom.get("metric"), "custom", period, box)
    except ValueError as err:
        raise _field_error("custom.metric", str(err)) from err
    return fam, None, None


def _box(value, k, path):
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        value = [value] * k
    if not isinstance(value, list) or len(value) != k:
        raise _field_error(path, f"expected [lo, hi] or a list of {k} such pairs")
    out = []
    for i, pair in enumerate(value):
        lo, hi = _vector(pair, 2, f"{path}[{i}]")
        if not lo < hi:
            raise _field_error(f"{path}[{i}]", "need lo < hi")
        out.append((lo, hi))
    return tuple(out)


def grid_points(lo, hi, steps):
    """Grid in serpentine order so consecutive points are neighbours."""
    axes = [np.linspace(a, b, s) for a, b, s in zip(lo, hi, steps)]
    points = [[]]
    for axis in axes:
        nxt = []
        for j, prefix in enumerate(points):
            vals = axis if j % 2 == 0 else axis[::-1]
            nxt.extend(prefix + [float(v)] for v in vals)
        points = nxt
    return points


def _base_points(doc, n):
    bp = doc.get("base_points")
    if bp is None:
        raise _field_error("base_points", "is required")
    if isinstance(bp, list):
        bp = {"points": bp}
    if not isinstance(bp, dict):
        raise _field_error("base_points", "expected an object or a list of points")
    _reject_unknown(bp, ("points", "grid"), "base_points")
    points = []
    for i, p in enumerate(bp.get("points") or []):
        if n == 1 and isinstance(p, (int, float)) and not isinstance(p, bool):
            p = [p]
        points.append(_vector(p, n, f"base_points.points[{i}]"))
    grid = bp.get("grid")
    if grid is not None:
        if not isinstance(grid, dict):
            raise _field_error("base_points.grid", "expected an object")
        _reject_unknown(grid, ("from", "to", "steps"), "base_points.grid")
        lo = grid.get("from")
        hi = grid.get("to")
        if n == 1:
            lo = [lo] if isinstance(lo, (int, float)) else lo
            hi = [hi] if isinstance(hi, (int, float)) else hi
        lo = _vector(lo, n, "base_points.grid.from")
        hi = _vector(hi, n, "base_points.grid.to")
        steps = grid.get("steps", 1)
        steps = [steps] * n if isinstance(steps, int) and not isinstance(steps, bool) else steps
        if not isinstance(steps, list) or len(steps) != n:
            raise _field_error("base_points.grid.steps", f"expected an integer or {n} integers")
        steps = [_int(s, f"base_points.grid.steps[{i}]", 1) for i, s in enumerate(steps)]
        points.extend(grid_points(lo, hi, steps))
    if not points:
        raise _field_error("base_points", "must contain at least one point")
    return points


def _solve(doc, k):
    solve = _object(doc, "solve", "solve")
    names = {f.name for f in fields(SolveConfig)} - {"threads"}
    _reject_unknown(solve, names | {"seed"}, "solve")
    kw = {}
    for key, value in solve.items():
        path = f"solve.{key}"
        if key in ("max_iters", "seeds", "project_iters"):
            kw[key] = _int(value, path, 1)
        elif key in ("rng_seed", "seed"):
            kw["rng_seed"] = _int(value, path, 0)
        elif key == "mode":
            if value not in ("fiber", "joint"):
                raise _field_error(path, "expected 'fiber' or 'joint'")
            kw[key] = value
        elif key == "seed_box":
            kw[key] = _box(value, k, path)
        else:
            kw[key] = _number(value, path, positive=True)
    return SolveConfig(**kw)


def from_dict(doc):
    if not isinstance(doc, dict):
        raise ProblemError("problem file must contain a JSON object")
    _reject_unknown(doc, ("catalog", "custom", "base_points", "solve", "tolerances", "outputs"), "<root>")
    fam, cid, cparams = _family(doc)
    points = _base_points(doc, fam.n)
    cfg = _solve(doc, fam.k)
    tol_doc = _object(doc, "tolerances", "tolerances")
    _reject_unknown(tol_doc, TOLERANCE_DEFAULTS, "tolerances")
    tolerances = dict(TOLERANCE_DEFAULTS)
    for key, value in tol_doc.items():
        tolerances[key] = _number(value, f"tolerances.{key}", positive=True)
    outputs = _object(doc, "outputs", "outputs")
    _reject_unknown(outputs, ("report_path", "samples_path"), "outputs")
    for key in ("report_path", "samples_path"):
        if key in outputs and not isinstance(outputs[key], str):
            raise _field_error(f"outputs.{key}", "expected a path string")
    return Problem(
        fam,
        cid,
        cparams,
        points,
        cfg,
        tolerances,
        outputs.get("report_path"),
        outputs.get("samples_path"),
        doc,
    )
