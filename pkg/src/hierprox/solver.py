"""Trilevel and N-level fixed-point iterations with trace emission.

Algorithm indexing: at step ``k`` (1-based) the maps are evaluated at
``x^{k-1}``::

    v^k = S(x^{k-1}),  y^k = T(x^{k-1}),  z^k = W(x^{k-1})
    x^k = a_k v^k + (1 - a_k) b_k y^k + (1 - a_k)(1 - b_k) z^k

In the N-level problem ``T_0`` is the selector contraction and ``T_1`` the
bottom layer, which carries the weight that tends to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .exceptions import DivergedError, InputError, ParameterError
from .operators import LayerMap, _as_vector
from .schedules import Schedule, multilevel_weight_table

DIVERGENCE_RADIUS = 1e12


@dataclass(frozen=True, eq=False)
class TrilevelProblem:
    """Top contraction ``S``, middle map ``T`` and bottom map ``W``."""

    top: LayerMap
    middle: LayerMap
    bottom: LayerMap

    def __post_init__(self):
        dims = {self.top.dim, self.middle.dim, self.bottom.dim}
        if len(dims) != 1:
            raise InputError(f"layer dimensions differ: {sorted(dims)}")
        r = self.top.r
        if r is None or not r < 1:
            raise ParameterError("top layer must be a strict contraction (r < 1)")

    @property
    def dim(self) -> int:
        return self.top.dim

    @property
    def r(self) -> float:
        return self.top.r

    @property
    def maps(self):
        """Maps in summation order: S, T, W."""
        return (self.top, self.middle, self.bottom)

    @property
    def upper(self) -> Optional[LayerMap]:
        return self.middle

    @property
    def lowest(self) -> LayerMap:
        return self.bottom


@dataclass(frozen=True, eq=False)
class MultilevelProblem:
    """Selector contraction ``T_0`` and layers ``T_1`` (bottom) .. ``T_N`` (top)."""

    selector: LayerMap
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.layers) < 1:
            raise InputError("a multilevel problem needs at least one layer")
        dims = {self.selector.dim} | {m.dim for m in self.layers}
        if len(dims) != 1:
            raise InputError(f"layer dimensions differ: {sorted(dims)}")
        r = self.selector.r
        if r is None or not r < 1:
            raise ParameterError("selector must be a strict contraction (r < 1)")

    @property
    def N(self) -> int:
        return len(self.layers)

    @property
    def dim(self) -> int:
        return self.selector.dim

    @property
    def r(self) -> float:
        return self.selector.r

    @property
    def maps(self):
        """Maps in summation order: T_0, T_N, ..., T_1."""
        return (self.selector,) + tuple(reversed(self.layers))

    @property
    def upper(self) -> Optional[LayerMap]:
        return self.layers[1] if self.N >= 2 else None

    @property
    def lowest(self) -> LayerMap:
        return self.layers[0]

    @classmethod
    def from_trilevel(cls, p: TrilevelProblem) -> "MultilevelProblem":
        return cls(p.top, (p.bottom, p.middle))


@dataclass
class SolverConfig:
    schedule: Schedule
    max_iters: int
    x0: np.ndarray
    stop_residual: float = 0.0
    trace_every: int = 1
    record_iterates: bool = False
    weight_family: str = "uniform"
    divergence_radius: float = DIVERGENCE_RADIUS
    backend: str = "auto"

    def __post_init__(self):
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InputError(f"max_iters must be a positive integer, got {self.max_iters}")
        if int(self.trace_every) != self.trace_every or self.trace_every < 1:
            raise InputError(f"trace_every must be a positive integer, got {self.trace_every}")
        if not (self.stop_residual >= 0 and math.isfinite(self.stop_residual)):
            raise InputError(f"stop_residual must be finite and >= 0, got {self.stop_residual}")
        if not self.divergence_radius > 0:
            raise InputError("divergence_radius must be positive")
        self.max_iters = int(self.max_iters)
        self.trace_every = int(self.trace_every)
        self.x0 = _as_vector(self.x0, name="x0")


@dataclass
class IterateRecord:
    k: int
    alpha: float
    beta: float
    res_W: float
    res_T: float
    step_norm: float
    phi1_y: float
    phi2_z: float
    omega_x: float
    x: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None


TRACE_COLUMNS = ("k", "alpha", "beta", "res_W", "res_T", "step_norm", "phi1_y", "phi2_z", "omega_x")


@dataclass
class Trace:
    """Columnar record of a run; one row per recorded iteration.

    ``res_W``/``phi2_z`` refer to the bottom layer and ``res_T``/``phi1_y`` to
    the layer above it (NaN when there is none). ``x_final`` is the last
    finite iterate.
    """

    k: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    res_W: np.ndarray
    res_T: np.ndarray
    step_norm: np.ndarray
    phi1_y: np.ndarray
    phi2_z: np.ndarray
    omega_x: np.ndarray
    status: str
    x0: np.ndarray
    x_final: np.ndarray
    last_k: int
    x: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.k.size)

    def column(self, name):
        return getattr(self, name)

    @property
    def records(self):
        out = []
        for i in range(len(self)):
            out.append(IterateRecord(
                int(self.k[i]), *(float(getattr(self, c)[i]) for c in TRACE_COLUMNS[1:]),
                x=None if self.x is None else self.x[i],
                weights=None if self.weights is None else self.weights[i]))
        return out

    def same_as(self, other: "Trace") -> bool:
        """Bitwise equality of every column (NaN equal to NaN)."""
        cols = TRACE_COLUMNS + ("x_final",)
        for c in cols:
            a, b = np.asarray(getattr(self, c)), np.asarray(getattr(other, c))
            if a.shape != b.shape or not np.array_equal(a, b, equal_nan=True):
                return False
        return self.status == other.status


# --------------------------------------------------------------------------
# single steps
# --------------------------------------------------------------------------


def _check_finite(x_new, x):
    if not np.all(np.isfinite(x_new)):
        raise DivergedError("non-finite iterate", last_finite=np.array(x, copy=True))


def _record_values(p, x_new, x, v, y, z, alpha, beta, weights=None):
    upper, low = p.upper, p.lowest
    top = p.maps[0]
    res_W = float(np.linalg.norm(x_new - low.apply(x_new)))
    res_T = float(np.linalg.norm(x_new - upper.apply(x_new))) if upper is not None else math.nan
    return IterateRecord(
        k=0, alpha=alpha, beta=beta, res_W=res_W, res_T=res_T,
        step_norm=float(np.linalg.norm(x_new - x)),
        phi1_y=float(upper.objective(y)) if upper is not None else math.nan,
        phi2_z=float(low.objective(z)), omega_x=float(top.objective(x_new)),
        x=x_new, weights=weights, v=v, y=y, z=z)


def _combine(weights, outputs):
    acc = weights[0] * outputs[0]
    for w, o in zip(weights[1:], outputs[1:]):
        acc = acc + w * o
    return acc


def trilevel_step(p: TrilevelProblem, x, alpha: float, beta: float):
    """One step ``alpha S(x) + (1-alpha) beta T(x) + (1-alpha)(1-beta) W(x)``."""
    if not (0 < alpha <= 1 and 0 < beta <= 1):
        raise InputError(f"alpha and beta must lie in (0, 1], got {alpha}, {beta}")
    x = _as_vector(x, p.dim)
    v, y, z = p.top.apply(x), p.middle.apply(x), p.bottom.apply(x)
    rest = 1.0 - alpha
    w = (alpha, rest * beta, rest * (1.0 - beta))
    x_new = _combine(w, (v, y, z))
    _check_finite(x_new, x)
    return x_new, _record_values(p, x_new, x, v, y, z, alpha, beta)


def multilevel_step(p: MultilevelProblem, x, weights):
    """One step ``sum_i weights[i] T_i(x)``; ``weights[0]`` is the selector's."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (p.N + 1,):
        raise InputError(f"expected {p.N + 1} weights, got shape {w.shape}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise InputError("weights must be nonnegative and sum to 1")
    x = _as_vector(x, p.dim)
    outs = [m.apply(x) for m in p.maps]
    order = [0] + list(range(p.N, 0, -1))
    x_new = _combine([float(w[i]) for i in order], outs)
    _check_finite(x_new, x)
    y = outs[-2] if p.N >= 2 else None
    return x_new, _record_values(p, x_new, x, outs[0], y, outs[-1], float(w[0]),
                                 float(w[2]) if p.N >= 2 else math.nan, weights=w)


# --------------------------------------------------------------------------
# full runs
# --------------------------------------------------------------------------


def _safe_apply(m: LayerMap, X, ok):
    out = np.full(X.shape, np.nan)
    if np.any(ok):
        out[ok] = m.apply(X[ok])
    return out


def _safe_objective(m: LayerMap, X, ok):
    out = np.full(X.shape[0], np.nan)
    if np.any(ok):
        out[ok] = m.objective(X[ok])
    return out


def _postprocess(p, cfg, W, rec_k, rec_x, rec_prev, status, last_k, meta):
    ok = np.all(np.isfinite(rec_x), axis=1)
    ok_prev = np.all(np.isfinite(rec_prev), axis=1)
    upper, low, top = p.upper, p.lowest, p.maps[0]
    res_W = np.linalg.norm(rec_x - _safe_apply(low, rec_x, ok), axis=1)
    z = _safe_apply(low, rec_prev, ok_prev)
    phi2 = _safe_objective(low, z, ok_prev)
    if upper is not None:
        res_T = np.linalg.norm(rec_x - _safe_apply(upper, rec_x, ok), axis=1)
        phi1 = _safe_objective(upper, _safe_apply(upper, rec_prev, ok_prev), ok_prev)
    else:
        res_T = np.full(rec_k.size, np.nan)
        phi1 = np.full(rec_k.size, np.nan)
    alpha_all, beta_all = cfg.schedule.arrays(int(rec_k[-1]) if rec_k.size else 1)
    idx = rec_k - 1
    if ok[-1]:
        x_final = rec_x[-1]
    else:
        x_final = rec_prev[-1] if ok_prev[-1] else cfg.x0
    return Trace(
        k=rec_k.copy(), alpha=alpha_all[idx], beta=beta_all[idx], res_W=res_W, res_T=res_T,
        step_norm=np.linalg.norm(rec_x - rec_prev, axis=1), phi1_y=phi1, phi2_z=phi2,
        omega_x=_safe_objective(top, rec_x, ok),
        status=_kernels.STATUS_NAMES[status], x0=cfg.x0.copy(), x_final=np.array(x_final),
        last_k=last_k, x=rec_x.copy() if cfg.record_iterates else None,
        weights=W[idx] if W is not None else None, meta=meta)


def _solve(p, cfg, weights, W_record, meta):
    if cfg.x0.shape != (p.dim,):
        raise InputError(f"x0 has dimension {cfg.x0.size}, expected {p.dim}")
    arrays = _kernels.stack_maps(p.maps)
    backend = _kernels.resolve_backend(cfg.backend)
    rec_k, rec_x, rec_prev, status, last_k = _kernels.run(
        cfg.x0, weights, arrays, cfg.stop_residual, cfg.divergence_radius, cfg.trace_every, backend)
    meta = dict(meta, backend=backend)
    return _postprocess(p, cfg, W_record, rec_k, rec_x, rec_prev, status, last_k, meta)


def trilevel_solve(p: TrilevelProblem, cfg: SolverConfig) -> Trace:
    """Run the trilevel iteration for ``cfg.max_iters`` steps or until a stop rule fires."""
    a, b = cfg.schedule.arrays(cfg.max_iters)
    rest = 1.0 - a
    weights = np.column_stack([a, rest * b, rest * (1.0 - b)])
    return _solve(p, cfg, weights, None, {"levels": 2, "kind": "trilevel"})


def multilevel_solve(p: MultilevelProblem, cfg: SolverConfig) -> Trace:
    """Run the N-level iteration with weights from ``cfg.weight_family``."""
    W = multilevel_weight_table(cfg.schedule, cfg.max_iters, p.N, cfg.weight_family)
    order = [0] + list(range(p.N, 0, -1))
    tr = _solve(p, cfg, np.ascontiguousarray(W[:, order]), W,
                {"levels": p.N, "kind": "multilevel", "weight_family": cfg.weight_family})
    return tr


def solve(p, cfg: SolverConfig) -> Trace:
    if isinstance(p, TrilevelProblem):
        return trilevel_solve(p, cfg)
    if isinstance(p, MultilevelProblem):
        return multilevel_solve(p, cfg)
    raise InputError(f"unsupported problem type {type(p).__name__}")


def iterates(p, schedule: Schedule, x0, K: int, weight_family: str = "uniform"):
    """All iterates ``x^0..x^K`` as a (K+1, n) array (for diagnostics on short runs)."""
    cfg = SolverConfig(schedule, K, x0, record_iterates=True, weight_family=weight_family)
    tr = solve(p, cfg)
    return np.vstack([cfg.x0[None, :], tr.x])


__all__ = [
    "TrilevelProblem", "MultilevelProblem", "SolverConfig", "IterateRecord", "Trace",
    "trilevel_step", "multilevel_step", "trilevel_solve", "multilevel_solve", "solve",
    "iterates", "TRACE_COLUMNS", "DIVERGENCE_RADIUS",
]
