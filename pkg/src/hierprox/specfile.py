"""Problem files: JSON description of layers, schedule and start point.

Layout::

    {
      "dimension": 3,
      "form": "trilevel",            # or "multilevel"; default by layer count
      "layers": [ selector, ..., bottom ],   # top first
      "schedule": {"kind": "rate", "r": 0.7},
      "x0": [0, 0, 0]
    }

A layer is ``{"smooth": {...}, "nonsmooth": {...}, "step": number | "auto"}``
or ``{"custom": {"name": "clamp", "lo": -1, "hi": 1}}``. A file may instead
name a gallery entry with ``{"gallery": "nested3"}`` and optionally override
``schedule``, ``x0`` and run options.
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import HierProxError, InputError
from .operators import ProxableSpec, SmoothSpec, contraction, custom_scalar, proxgrad
from .problems import GALLERY_NAMES, gallery
from .schedules import from_dict as schedule_from_dict
from .solver import MultilevelProblem, TrilevelProblem

RUN_OPTIONS = ("max_iters", "stop_residual", "trace_every", "record_iterates", "weight_family",
               "divergence_radius")


class ProblemSpec:
    """A validated problem file."""

    def __init__(self, problem, schedule, x0, options, source, gallery_entry=None):
        self.problem = problem
        self.schedule = schedule
        self.x0 = x0
        self.options = options
        self.source = source
        self.gallery_entry = gallery_entry


def _matrix(v, where, shape=None):
    try:
        a = np.array(v, dtype=np.float64)
    except (TypeError, ValueError):
        raise InputError(f"{where}: expected a numeric array") from None
    if shape is not None and a.shape != shape:
        raise InputError(f"{where}: expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{where}: non-finite entries")
    return a


def _field(d, key, where):
    if key not in d:
        raise InputError(f"{where}.{key}: missing field")
    return d[key]


def _smooth(d, n, where):
    if not isinstance(d, dict):
        raise InputError(f"{where}: expected an object")
    kind = d.get("kind")
    if kind == "zero":
        return SmoothSpec.zero(n)
    if kind == "quadratic":
        Q = _matrix(_field(d, "Q", where), f"{where}.Q", (n, n))
        b = _matrix(d.get("b", [0.0] * n), f"{where}.b", (n,))
        return SmoothSpec.quadratic(Q, b, float(d.get("c", 0.0)))
    if kind == "least_squares":
        A = _matrix(_field(d, "A", where), f"{where}.A")
        if A.ndim != 2 or A.shape[1] != n:
            raise InputError(f"{where}.A: expected a matrix with {n} columns, got shape {A.shape}")
        y = _matrix(_field(d, "y", where), f"{where}.y", (A.shape[0],))
        return SmoothSpec.least_squares(A, y, float(d.get("weight", 1.0)))
    if kind == "squared_distance":
        c = _matrix(_field(d, "center", where), f"{where}.center", (n,))
        return SmoothSpec.squared_distance(c, float(d.get("weight", 1.0)))
    raise InputError(f"{where}.kind: unknown smooth kind {kind!r}")


def _nonsmooth(d, n, where):
    if d is None:
        return ProxableSpec.zero(n)
    if not isinstance(d, dict):
        raise InputError(f"{where}: expected an object")
    kind = d.get("kind")
    if kind == "zero":
        return ProxableSpec.zero(n)
    if kind == "l1":
        return ProxableSpec.l1(n, float(d.get("weight", 1.0)))
    if kind == "box":
        lo = _lohi(_field(d, "lo", where), n, f"{where}.lo")
        hi = _lohi(_field(d, "hi", where), n, f"{where}.hi")
        return ProxableSpec.box(lo, hi)
    if kind == "affine_eq":
        A = _matrix(_field(d, "A", where), f"{where}.A")
        if A.ndim != 2 or A.shape[1] != n:
            raise InputError(f"{where}.A: expected a matrix with {n} columns, got shape {A.shape}")
        c = _matrix(_field(d, "c", where), f"{where}.c", (A.shape[0],))
        return ProxableSpec.affine_eq(A, c)
    if kind == "ball":
        c = _matrix(_field(d, "center", where), f"{where}.center", (n,))
        return ProxableSpec.ball(c, float(_field(d, "radius", where)))
    raise InputError(f"{where}.kind: unknown nonsmooth kind {kind!r}")


def _lohi(v, n, where):
    a = np.array(v if isinstance(v, list) else [v] * n, dtype=object)
    out = np.empty(n)
    if a.shape != (n,):
        raise InputError(f"{where}: expected {n} bounds")
    for i, x in enumerate(a):
        if x in ("inf", "-inf") or isinstance(x, (int, float)):
            out[i] = float(x)
        else:
            raise InputError(f"{where}: bound {x!r} is not a number")
    return out


def _step(d, where):
    s = d.get("step", "auto")
    if s == "auto":
        return s
    if isinstance(s, bool) or not isinstance(s, (int, float)) or not math.isfinite(s):
        raise InputError(f"{where}.step: expected a number or \"auto\"")
    return float(s)


def _layer(d, n, where, selector):
    if not isinstance(d, dict):
        raise InputError(f"{where}: expected an object")
    try:
        if "custom" in d:
            c = dict(d["custom"])
            name = c.pop("name", None)
            return custom_scalar(name, dim=n, **c)
        f = _smooth(_field(d, "smooth", where), n, f"{where}.smooth")
        if selector:
            g = d.get("nonsmooth")
            if g is not None and g.get("kind", "zero") != "zero":
                raise InputError(f"{where}.nonsmooth: the selector layer must be smooth")
            return contraction(f, _step(d, where))
        return proxgrad(f, _nonsmooth(d.get("nonsmooth"), n, f"{where}.nonsmooth"), _step(d, where))
    except InputError as exc:
        if str(exc).startswith(where):
            raise
        raise InputError(f"{where}: {exc}") from None
    except HierProxError as exc:
        raise InputError(f"{where}: {exc}") from None
    except TypeError as exc:
        raise InputError(f"{where}: {exc}") from None


def build_problem(d: dict):
    """Problem object from the ``dimension``/``layers``/``form`` fields."""
    n = _field(d, "dimension", "problem")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InputError("dimension: expected a positive integer")
    layers = _field(d, "layers", "problem")
    if not isinstance(layers, list) or len(layers) < 2:
        raise InputError("layers: expected a list of at least two layers (selector first)")
    form = d.get("form", "trilevel" if len(layers) == 3 else "multilevel")
    maps = [_layer(l, n, f"layers[{i}]", i == 0) for i, l in enumerate(layers)]
    try:
        if form == "trilevel":
            if len(maps) != 3:
                raise InputError(f"layers: a trilevel problem has 3 layers, got {len(maps)}")
            return TrilevelProblem(*maps)
        if form == "multilevel":
            return MultilevelProblem(maps[0], tuple(reversed(maps[1:])))
    except InputError:
        raise
    except HierProxError as exc:
        raise InputError(f"layers[0]: {exc}") from None
    raise InputError(f"form: expected 'trilevel' or 'multilevel', got {form!r}")


def parse_spec(d) -> ProblemSpec:
    """Validate a problem-file dictionary completely before anything runs."""
    if not isinstance(d, dict):
        raise InputError("problem file: expected a JSON object")
    entry = None
    if "gallery" in d:
        name = d["gallery"]
        if name not in GALLERY_NAMES:
            raise InputError(f"gallery: unknown entry {name!r}; available: {', '.join(GALLERY_NAMES)}")
        entry = gallery(name)
        problem = entry.problem
        defaults = dict(entry.run_defaults)
        schedule = defaults.pop("schedule")
        x0 = defaults.pop("x0")
        options = {k: v for k, v in defaults.items() if k in RUN_OPTIONS}
    else:
        problem = build_problem(d)
        schedule, x0, options = None, None, {}
    if "schedule" in d:
        schedule = schedule_from_dict(d["schedule"])
    if schedule is None:
        raise InputError("schedule: missing field")
    if "x0" in d:
        x0 = _matrix(d["x0"], "x0")
    if x0 is None:
        x0 = np.zeros(problem.dim)
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if x0.shape != (problem.dim,):
        raise InputError(f"x0: expected dimension {problem.dim}, got {x0.size}")
    for key in RUN_OPTIONS:
        if key in d:
            options[key] = d[key]
    if "iters" in d:
        options["max_iters"] = d["iters"]
    if "tol" in d:
        options["stop_residual"] = d["tol"]
    return ProblemSpec(problem, schedule, x0, options, d, entry)
