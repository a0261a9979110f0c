"""Exact oracles for nested quadratic problems and the problem gallery.

The oracle never iterates: solution sets of quadratic levels with affine
constraints are affine, so each level is one reduced normal-equation solve.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import InputError, OracleUnsupported, UnboundedError
from .operators import (RANK_TOL, LayerMap, ProxableSpec, SmoothSpec, contraction, custom_scalar,
                        proxgrad)
from .schedules import power, rate, ratio_counterexample
from .solver import MultilevelProblem, TrilevelProblem

MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class AffineSet:
    """``{anchor + basis @ y}``; basis columns are orthonormal (may be empty)."""

    anchor: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.anchor, dtype=np.float64))
        B = np.asarray(self.basis, dtype=np.float64).reshape(p.size, -1)
        if B.shape[1] and np.max(np.abs(B.T @ B - np.eye(B.shape[1]))) > 1e-12:
            raise InputError("affine set basis is not orthonormal")
        object.__setattr__(self, "anchor", p)
        object.__setattr__(self, "basis", B)

    @classmethod
    def whole_space(cls, n):
        return cls(np.zeros(n), np.eye(n))

    @classmethod
    def point(cls, x):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        return cls(x, np.zeros((x.size, 0)))

    @classmethod
    def from_span(cls, anchor, directions):
        """Affine set through ``anchor`` spanned by arbitrary direction columns."""
        anchor = np.atleast_1d(np.asarray(anchor, dtype=np.float64))
        D = np.asarray(directions, dtype=np.float64)
        if D.ndim == 1 and D.size:
            D = D[:, None]
        if D.size == 0:
            D = np.zeros((anchor.size, 0))
        if D.ndim != 2 or D.shape[0] != anchor.size:
            raise InputError(f"directions must be columns of length {anchor.size}, got shape {D.shape}")
        return cls(anchor, _orth(D))

    @property
    def dim(self) -> int:
        return self.anchor.size

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def project(self, x):
        d = np.asarray(x, dtype=np.float64) - self.anchor
        return self.anchor + (d @ self.basis) @ self.basis.T

    def distance(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.linalg.norm(x - self.project(x), axis=-1)

    def contains(self, x, tol=MEMBERSHIP_TOL) -> bool:
        return bool(np.all(self.distance(x) <= tol))

    def to_dict(self) -> dict:
        return {"anchor": self.anchor.tolist(), "basis": self.basis.T.tolist()}


@dataclass(frozen=True, eq=False)
class BoxSet:
    """Componentwise interval product, used for the 1-D counterexample sets."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.atleast_1d(np.asarray(self.lo, dtype=np.float64)))
        object.__setattr__(self, "hi", np.atleast_1d(np.asarray(self.hi, dtype=np.float64)))

    @property
    def dim(self) -> int:
        return self.lo.size

    def project(self, x):
        return np.clip(np.asarray(x, dtype=np.float64), self.lo, self.hi)

    def distance(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.linalg.norm(x - self.project(x), axis=-1)

    def contains(self, x, tol=MEMBERSHIP_TOL) -> bool:
        return bool(np.all(self.distance(x) <= tol))

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}


def set_from_dict(d: dict):
    if "anchor" in d:
        anchor = np.asarray(d["anchor"], dtype=np.float64)
        basis = np.asarray(d.get("basis", []), dtype=np.float64).reshape(-1, anchor.size).T
        return AffineSet(anchor, basis)
    if "lo" in d:
        return BoxSet(d["lo"], d["hi"])
    raise InputError("set: expected 'anchor'/'basis' or 'lo'/'hi'")


def _orth(D, tol=RANK_TOL):
    if D.shape[1] == 0:
        return D.reshape(D.shape[0], 0)
    U, s, _ = np.linalg.svd(D, full_matrices=False)
    keep = s > tol * max(s[0], 1e-300) if s.size else np.zeros(0, bool)
    return U[:, keep]


def _nullspace(M, tol=RANK_TOL):
    """Orthonormal basis of the nullspace of a symmetric PSD matrix."""
    if M.size == 0:
        return np.zeros((M.shape[0], M.shape[0]))
    w, V = np.linalg.eigh(M)
    cut = tol * max(abs(w[-1]), abs(w[0]), 1.0)
    return V[:, np.abs(w) <= cut]


# --------------------------------------------------------------------------
# exact oracle
# --------------------------------------------------------------------------


def affine_argmin(f: SmoothSpec, domain: AffineSet) -> AffineSet:
    """Minimizers of the convex quadratic ``f`` over ``domain`` (an affine set)."""
    if f.dim != domain.dim:
        raise InputError(f"objective has dimension {f.dim}, domain {domain.dim}")
    B, p = domain.basis, domain.anchor
    if B.shape[1] == 0:
        return domain
    H = B.T @ f.Q @ B
    g = B.T @ (f.b - f.Q @ p)
    y = np.linalg.pinv(H, rcond=RANK_TOL) @ g
    if np.linalg.norm(H @ y - g) > 1e-9 * max(1.0, np.linalg.norm(g)):
        raise UnboundedError("objective is unbounded below on the domain")
    N = _nullspace(H)
    return AffineSet(p + B @ y, _orth(B @ N))


def affine_intersect(domain: AffineSet, A, c) -> AffineSet:
    """``domain`` intersected with ``{x : Ax = c}``; raises if empty."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    c = np.atleast_1d(np.asarray(c, dtype=np.float64))
    B, p = domain.basis, domain.anchor
    M = A @ B
    rhs = c - A @ p
    y = np.linalg.pinv(M, rcond=RANK_TOL) @ rhs if M.size else np.zeros(B.shape[1])
    if np.linalg.norm(M @ y - rhs) > 1e-9 * max(1.0, np.linalg.norm(c)):
        raise InputError("affine constraint does not meet the lower-level solution set")
    N = _nullspace(M.T @ M) if B.shape[1] else np.zeros((0, 0))
    return AffineSet(p + B @ y, _orth(B @ N))


@dataclass
class OracleResult:
    x_star: np.ndarray
    sets: list
    notes: list = field(default_factory=list)

    def to_dict(self, name: str = "") -> dict:
        return {"name": name, "x_star": self.x_star.tolist(),
                "sets": [s.to_dict() for s in self.sets], "notes": list(self.notes)}


def _level_parts(level):
    if isinstance(level, LayerMap):
        if level.kind != "proxgrad":
            raise OracleUnsupported(f"no exact oracle for a {level.kind} layer map")
        return level.smooth, level.nonsmooth
    f, g = level
    return f, g


def nested_solve_oracle(levels: Sequence, selector: SmoothSpec) -> OracleResult:
    """Fold ``affine_argmin`` over the levels (innermost first), then select.

    Each level is a proxgrad LayerMap or a ``(SmoothSpec, ProxableSpec)`` pair
    whose nonsmooth part is ``zero`` or ``affine_eq``. Returns the unique
    minimizer of the strongly convex ``selector`` over the last set together
    with the chain of level solution sets.
    """
    if selector.strong_convexity <= 0:
        raise InputError("selector must be strongly convex")
    current = AffineSet.whole_space(selector.dim)
    sets = []
    for i, level in enumerate(levels):
        f, g = _level_parts(level)
        if g is not None and g.kind not in ("zero", "affine_eq"):
            raise OracleUnsupported(f"level {i + 1}: nonsmooth kind {g.kind!r} has no exact oracle")
        if g is not None and g.kind == "affine_eq":
            current = affine_intersect(current, g.A, g.c)
        current = affine_argmin(f, current)
        sets.append(current)
    final = affine_argmin(selector, current)
    if final.rank:
        raise InputError("selector does not single out a point")
    x = final.anchor
    for s in sets:
        if not s.contains(x):
            raise InputError("oracle self-check failed: x* left a level set")
    return OracleResult(x, sets)


def problem_oracle(p) -> OracleResult:
    """Exact oracle for a trilevel or multilevel problem built from quadratic layers."""
    if isinstance(p, TrilevelProblem):
        top, levels = p.top, [p.bottom, p.middle]
    elif isinstance(p, MultilevelProblem):
        top, levels = p.selector, list(p.layers)
    else:
        raise InputError(f"unsupported problem type {type(p).__name__}")
    if top.kind != "contraction":
        raise OracleUnsupported("selector is not a gradient contraction of a declared objective")
    return nested_solve_oracle(levels, top.smooth)


def mixed_vi_oracle(p: TrilevelProblem, delta: float) -> np.ndarray:
    """Solve ``<(I-S)x + delta (I-T)x, y - x> >= 0`` for all ``y`` in Fix(W).

    Available when S is a gradient contraction and T, W are smooth proxgrad
    maps with ``g = 0`` (so ``I - T = t grad f`` is affine) and Fix(W) is
    affine. ``delta = 0`` gives the selector's minimizer over Fix(W).
    """
    if p.top.kind != "contraction" or p.middle.kind != "proxgrad" or p.middle.nonsmooth.kind != "zero":
        raise OracleUnsupported("mixed VI oracle needs a contraction top and a smooth middle layer")
    fixW = nested_solve_oracle([p.bottom], p.top.smooth).sets[0]
    u, t = p.top.step, p.middle.step
    om, f1 = p.top.smooth, p.middle.smooth
    M = u * om.Q + delta * t * f1.Q
    m = u * om.b + delta * t * f1.b
    sol = affine_argmin(SmoothSpec.quadratic(M, m), fixW)
    if sol.rank:
        raise InputError("mixed VI has a non-unique solution")
    return sol.anchor


# --------------------------------------------------------------------------
# brute-force oracle
# --------------------------------------------------------------------------


def _eval_many(f, pts):
    return np.array([float(f(p)) for p in pts])


def _ternary(fun, a, b, tol):
    while b - a > tol:
        m1, m2 = a + (b - a) / 3.0, b - (b - a) / 3.0
        if fun(m1) <= fun(m2):
            b = m2
        else:
            a = m1
    return 0.5 * (a + b)


def grid_argmin(f: Callable, box, resolution: float = 1e-4, points_per_axis: Optional[int] = None):
    """Exhaustive grid minimum over a box of at most 2 dimensions, then ternary refinement.

    ``box`` is a sequence of ``(lo, hi)`` pairs. The refinement assumes the
    objective is unimodal inside the winning grid cell's neighbourhood.
    """
    box = [(float(lo), float(hi)) for lo, hi in box]
    d = len(box)
    if d == 0 or d > 2:
        raise OracleUnsupported(f"grid oracle handles 1 or 2 dimensions, got {d}")
    if not resolution > 0:
        raise InputError("resolution must be positive")
    if any(not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi) for lo, hi in box):
        raise InputError("grid box must be finite with lo <= hi")
    if points_per_axis is None:
        points_per_axis = 2001 if d == 1 else 201
    axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in box]
    pts = np.array(list(itertools.product(*axes)))
    vals = _eval_many(f, pts)
    best = pts[int(np.argmin(vals))]
    tol = resolution / 10.0
    brackets = []
    for (lo, hi), ax, c in zip(box, axes, best):
        h = ax[1] - ax[0] if ax.size > 1 else 0.0
        brackets.append((max(lo, c - h), min(hi, c + h)))
    if d == 1:
        (a, b), = brackets
        x = _ternary(lambda s: float(f(np.array([s]))), a, b, tol)
        cand = np.array([x])
    else:
        (a0, b0), (a1, b1) = brackets

        def inner(s):
            return _ternary(lambda t: float(f(np.array([s, t]))), a1, b1, tol)

        x0 = _ternary(lambda s: float(f(np.array([s, inner(s)]))), a0, b0, tol)
        cand = np.array([x0, inner(x0)])
    return cand if float(f(cand)) <= float(f(best)) else best


def grid_argmin_set(f: Callable, lo: float, hi: float, resolution: float = 1e-3, tol: float = 1e-12):
    """Interval hull of near-minimal points of a 1-D objective on ``[lo, hi]``.

    Returns a :class:`BoxSet`; suited to indicator-like objectives whose
    argmin is an interval.
    """
    n = int(math.ceil((hi - lo) / resolution)) + 1
    grid = np.linspace(lo, hi, n)
    vals = _eval_many(lambda s: f(np.array([s])), grid)
    best = np.min(vals)
    if not math.isfinite(best):
        raise InputError("objective is infinite on the whole grid")
    idx = np.nonzero(vals <= best + tol * max(1.0, abs(best)))[0]
    return BoxSet([grid[idx[0]]], [grid[idx[-1]]])


# --------------------------------------------------------------------------
# gallery
# --------------------------------------------------------------------------


@dataclass
class GalleryEntry:
    name: str
    problem: object
    oracle_solution: object  # Vector, or the string "diverges"
    oracle_sets: list
    notes: list
    run_defaults: dict = field(default_factory=dict)

    @property
    def diverges(self) -> bool:
        return isinstance(self.oracle_solution, str)

    def oracle_result(self) -> OracleResult:
        if self.diverges:
            raise OracleUnsupported(f"{self.name}: no finite solution")
        return OracleResult(np.asarray(self.oracle_solution), list(self.oracle_sets), list(self.notes))


def _nested3():
    n = 3
    bottom = proxgrad(SmoothSpec.least_squares([[1.0, 0.0, 0.0]], [1.0]), t=0.5)
    middle = proxgrad(SmoothSpec.least_squares([[0.0, 1.0, -1.0]], [0.0]), t="auto")
    top = contraction(SmoothSpec.squared_distance([0.0, 4.0, 0.0]), u=0.5)
    p = TrilevelProblem(top, middle, bottom)
    assert p.dim == n
    return p


def _nested4():
    t1 = proxgrad(SmoothSpec.least_squares([[1.0, 1.0, 0.0, 0.0]], [2.0]), t=0.25)
    t2 = proxgrad(SmoothSpec.least_squares([[0.0, 0.0, 1.0, -1.0]], [0.0]), t=0.5)
    t3 = proxgrad(SmoothSpec.zero(4), ProxableSpec.affine_eq([[1.0, 0.0, -1.0, 0.0]], [0.0]), t=1.0)
    sel = contraction(SmoothSpec.squared_distance([0.0, 0.0, 0.0, 3.0]), u=0.5)
    return MultilevelProblem(sel, (t1, t2, t3))


def _xu_quadratic(A=(1.0, 2.0), u=(1.0, 1.0), b=(0.0, 0.0), mu=1.0):
    A = np.diag(A)
    u, b = np.asarray(u, float), np.asarray(b, float)
    n = u.size
    # (mu/2) x'Ax + 1/2 ||x - u||^2 - <x, b>
    omega = SmoothSpec.quadratic(mu * A + np.eye(n), u + b, 0.5 * float(u @ u))
    layer = proxgrad(SmoothSpec.zero(n), t=1.0)
    return MultilevelProblem(contraction(omega), (layer,)), omega


def _fejer_common():
    c = np.array([1.0, 2.0])
    bottom = proxgrad(SmoothSpec.least_squares([[1.0, 0.0]], [1.0]))
    middle = proxgrad(SmoothSpec.squared_distance(c))
    top = contraction(SmoothSpec.squared_distance(c), u=0.5)
    return TrilevelProblem(top, middle, bottom)


def _build(name: str) -> GalleryEntry:
    if name == "clamp":
        top = contraction(SmoothSpec.quadratic([[1.0]]), u=0.75)
        p = TrilevelProblem(top, custom_scalar("clamp", lo=-1.0, hi=1.0),
                            custom_scalar("clamp", lo=0.0, hi=2.0))
        notes = ["S(x) = x/4 from omega = x^2/2 with u = 0.75; operative contraction constant 1/4 "
                 "(the generic strong-convexity factor evaluates to 1/2)",
                 "T and W are operator-level clamps; Fix(W) = [0, 2], Omega = VI(T, Fix W) = [0, 1]",
                 "with alpha_k = 1/k, beta_k = 1/k^2 the iterates tend to 0"]
        return GalleryEntry(name, p, np.array([0.0]), [BoxSet([0.0], [2.0]), BoxSet([0.0], [1.0])], notes,
                            {"schedule": power(1.0, 2.0, offset=0.0), "x0": np.array([5.0]),
                             "max_iters": 100_000})
    if name == "unbounded":
        p = TrilevelProblem(custom_scalar("scale", factor=0.25), custom_scalar("shift", offset=5.0),
                            custom_scalar("identity"))
        notes = ["S(x) = x/4, T(x) = x + 5, W = identity; with alpha_k = 1/k and beta_k = 1/sqrt(k) "
                 "the iterates grow without bound (about 4 sqrt(k))",
                 "run defaults use a divergence radius of 1e3 so the run ends with status diverged"]
        return GalleryEntry(name, p, "diverges", [], notes,
                            {"schedule": power(1.0, 0.5, offset=0.0), "x0": np.array([1.0]),
                             "max_iters": 1_000_000, "divergence_radius": 1e3})
    if name in ("nested3", "ratio_oscillating"):
        p = _nested3()
        res = problem_oracle(p)
        notes = ["bottom 1/2 (x1 - 1)^2 with step 1/(2L); middle 1/2 (x2 - x3)^2; "
                 "selector 1/2 ||x - (0, 4, 0)||^2 with u = 1/2 (r = sqrt(1/2), J = 6)",
                 "x* = projection of (0, 4, 0) onto {(1, s, s)} = (1, 2, 2)"]
        if name == "nested3":
            sched = rate(p.r)
        else:
            sched = ratio_counterexample()
            notes.append("paired with the oscillating schedule whose ratio has limsup 3/4 but no limit")
        return GalleryEntry(name, p, res.x_star, res.sets, notes,
                            {"schedule": sched, "x0": np.zeros(3), "max_iters": 10_000})
    if name == "nested4":
        p = _nested4()
        res = problem_oracle(p)
        notes = ["four levels on R^4: x1 + x2 = 2, then x3 = x4, then x1 = x3, "
                 "selector 1/2 ||x - (0, 0, 0, 3)||^2; x* = (1.25, 0.75, 1.25, 1.25)"]
        return GalleryEntry(name, p, res.x_star, res.sets, notes,
                            {"schedule": rate(p.r), "x0": np.zeros(4), "max_iters": 10_000,
                             "weight_family": "nested"})
    if name == "xu_quadratic":
        p, omega = _xu_quadratic()
        res = problem_oracle(p)
        notes = ["omega = (mu/2) x'Ax + 1/2 ||x - u||^2 - <x, b> with A = diag(1, 2), u = (1, 1), b = 0, "
                 "mu = 1; single identity layer, limit (mu A + I)^-1 (u + b) = (1/2, 1/3)"]
        return GalleryEntry(name, p, res.x_star, res.sets, notes,
                            {"schedule": power(0.5, 1.0), "x0": np.zeros(2), "max_iters": 10_000})
    if name == "fejer_common":
        p = _fejer_common()
        res = problem_oracle(p)
        notes = ["S, T and W share the fixed point (1, 2), so every iteration is Fejer monotone "
                 "with respect to it"]
        return GalleryEntry(name, p, res.x_star, res.sets + [AffineSet.point(res.x_star)], notes,
                            {"schedule": power(0.5, 0.5), "x0": np.array([-3.0, 5.0]), "max_iters": 10_000})
    raise KeyError(name)


GALLERY_NAMES = ("clamp", "unbounded", "nested3", "nested4", "xu_quadratic", "ratio_oscillating",
                 "fejer_common")


def verify_entry(e: GalleryEntry, tol: float = MEMBERSHIP_TOL) -> dict:
    """Membership and bottom-layer residual of the stored solution."""
    if e.diverges:
        return {"membership": 0.0, "residual": 0.0}
    x = np.asarray(e.oracle_solution)
    member = max((float(s.distance(x)) for s in e.oracle_sets), default=0.0)
    resid = float(np.linalg.norm(x - e.problem.lowest.apply(x)))
    if member > tol or resid > tol:
        raise InputError(f"gallery entry {e.name!r} failed re-verification "
                         f"(membership {member:.3e}, residual {resid:.3e})")
    return {"membership": member, "residual": resid}


def gallery(name: str) -> GalleryEntry:
    """Build a named gallery problem with its oracle artifacts, re-verified."""
    if name not in GALLERY_NAMES:
        raise KeyError(f"unknown gallery entry {name!r}; available: {', '.join(GALLERY_NAMES)}")
    e = _build(name)
    verify_entry(e)
    return e
