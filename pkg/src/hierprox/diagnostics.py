"""Post-hoc checks of boundedness, rates, Fejer monotonicity and regularity on traces.

Every check returns a small report object with a ``passed`` flag and a
``to_dict`` method for JSON output. Limit statements are checked over the
finite horizon of the trace only.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .exceptions import FitError, InputError
from .schedules import Schedule, classify_regime
from .solver import MultilevelProblem, Trace, TrilevelProblem

FIXED_POINT_TOL = 1e-8


def _clean(v):
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


class _Report:
    def to_dict(self) -> dict:
        return _clean(asdict(self))


def _upper_maps(p):
    if isinstance(p, TrilevelProblem):
        return [p.middle]
    if isinstance(p, MultilevelProblem):
        return list(p.layers[1:])
    raise InputError(f"unsupported problem type {type(p).__name__}")


def _projector(proj) -> Callable:
    if hasattr(proj, "project"):
        return proj.project
    if callable(proj):
        return proj
    raise InputError("expected an AffineSet/BoxSet or a projection callable")


def _iterates(trace):
    """``(k, X)`` including ``x^0`` at ``k = 0``."""
    if isinstance(trace, Trace):
        if trace.x is None:
            raise InputError("trace does not record iterates (set record_iterates)")
        return np.concatenate([[0], trace.k]), np.vstack([trace.x0[None, :], trace.x])
    X = np.atleast_2d(np.asarray(trace, dtype=np.float64))
    return np.arange(X.shape[0]), X


# --------------------------------------------------------------------------
# constants
# --------------------------------------------------------------------------


@dataclass
class BoundConstants(_Report):
    C_x: float
    C_S: float
    C_T: float
    J: int
    r: float
    delta0: float

    @property
    def step_coeff(self) -> float:
        """``(C_S + 2 C_T + 5 C_x) J / (1 - r)``: the step-norm bound times k."""
        return (self.C_S + 2 * self.C_T + 5 * self.C_x) * self.J / (1 - self.r)


def default_delta0(schedule: Optional[Schedule]) -> float:
    """``max(delta, 1) + 0.5`` for a classified schedule (1.5 without one)."""
    if schedule is None:
        return 1.5
    d = classify_regime(schedule).delta_value
    if not math.isfinite(d):
        return math.inf
    return max(d, 1.0) + 0.5


def bound_constants(p, x_ref, x0, delta0=None, schedule: Optional[Schedule] = None) -> BoundConstants:
    """Boundedness constants at a fixed point ``x_ref`` of the bottom map.

    ``C_x = max(||x0 - x_ref||, (C_S + delta0 C_T) / (1 - r))`` with
    ``C_S = ||S x_ref - x_ref||`` and ``C_T = ||T x_ref - x_ref||`` (for N
    levels, the largest such residual over the layers above the bottom).
    """
    x_ref = np.asarray(x_ref, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if np.linalg.norm(x_ref - p.lowest.apply(x_ref)) > FIXED_POINT_TOL:
        raise InputError("x_ref is not a fixed point of the bottom map")
    if delta0 is None:
        delta0 = default_delta0(schedule)
    if not delta0 > 0:
        raise InputError(f"delta0 must be positive, got {delta0}")
    r = p.r
    C_S = float(np.linalg.norm(p.maps[0].apply(x_ref) - x_ref))
    C_T = max((float(np.linalg.norm(m.apply(x_ref) - x_ref)) for m in _upper_maps(p)), default=0.0)
    tail = C_S + (delta0 * C_T if C_T > 0 else 0.0)
    C_x = max(float(np.linalg.norm(x0 - x_ref)), tail / (1 - r))
    return BoundConstants(C_x, C_S, C_T, int(math.floor(2 / (1 - r))), float(r), float(delta0))


# --------------------------------------------------------------------------
# rate fits and bounds
# --------------------------------------------------------------------------


class RateFit(NamedTuple):
    slope: float
    intercept: float
    used: int
    excluded: int


def rate_fit(k, values, k_range=None, min_points: int = 10) -> RateFit:
    """Least-squares slope of ``log(value)`` against ``log(k)``.

    Nonpositive or non-finite values inside ``k_range`` are dropped and
    counted in ``excluded``.
    """
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if k.shape != v.shape:
        raise InputError("k and values must have the same length")
    sel = k > 0
    if k_range is not None:
        sel &= (k >= k_range[0]) & (k <= k_range[1])
    good = sel & np.isfinite(v) & (v > 0)
    used, excluded = int(good.sum()), int(sel.sum() - good.sum())
    if used < min_points:
        raise FitError(f"rate fit needs at least {min_points} positive points, got {used} "
                       f"({excluded} excluded)")
    slope, intercept = np.polyfit(np.log(k[good]), np.log(v[good]), 1)
    return RateFit(float(slope), float(intercept), used, excluded)


@dataclass
class BoundCheck(_Report):
    name: str
    k: np.ndarray
    gap: np.ndarray
    bound: np.ndarray
    ok: np.ndarray
    passed: bool
    max_violation: float
    conditional: bool = False
    note: str = ""


def _bound_check(name, k, gap, bound, conditional=False, note=""):
    ok = gap <= bound
    diff = gap - bound
    max_violation = float(np.max(diff)) if diff.size else -math.inf
    return BoundCheck(name, k, gap, bound, ok, bool(np.all(ok)), max_violation, conditional, note)


@dataclass
class RateBoundReport(_Report):
    phi2: BoundCheck
    phi1: Optional[BoundCheck] = None
    omega: Optional[BoundCheck] = None

    @property
    def passed(self) -> bool:
        return self.phi2.passed


def check_rate_bound(trace: Trace, consts: BoundConstants, s: float, phi2_star: float,
                     t: Optional[float] = None, phi1_star: Optional[float] = None,
                     x_star=None, p=None) -> RateBoundReport:
    """Compare the function-value gaps of a rate-schedule trace with their bounds.

    The bottom-level bound ``(C C_S + 2 C C_T + 5 C^2)(J + 2) / (s (1 - r)(k + 1))``
    decides ``passed``. The middle-level and selector bounds are evaluated
    when their inputs are given; they are reported as conditional because
    they rest on the half-space condition that ``halfspace_condition_check``
    probes.
    """
    if trace.phi2_z is None or not np.any(np.isfinite(trace.phi2_z)):
        raise InputError("trace has no phi2 records")
    if not s > 0:
        raise InputError("step s must be positive")
    c = consts
    k = trace.k.astype(np.float64)
    num = (c.C_x * c.C_S + 2 * c.C_x * c.C_T + 5 * c.C_x ** 2) * (c.J + 2)
    phi2 = _bound_check("phi2", trace.k, trace.phi2_z - phi2_star, num / (s * (1 - c.r) * (k + 1)))
    rep = RateBoundReport(phi2)
    mask = trace.k >= 2
    km = k[mask]
    if t is not None and phi1_star is not None and np.any(np.isfinite(trace.phi1_y)):
        rep.phi1 = _bound_check("phi1", trace.k[mask], trace.phi1_y[mask] - phi1_star,
                                c.C_x * c.J / (2 * t * (1 - c.r) * (km - 1)), conditional=True,
                                note="requires the half-space condition at x*; k = 1 skipped")
    if x_star is not None and p is not None and p.maps[0].kind == "contraction":
        om = p.maps[0].smooth
        L, mu = om.lipschitz, om.strong_convexity
        coef = (L + L * L / (2 * mu) * c.r * c.C_x) * c.r
        bound = coef * np.sqrt(c.C_x * c.J / ((1 - c.r) * (km - 1)))
        gap = trace.omega_x[mask] - float(om.value(np.asarray(x_star)))
        rep.omega = _bound_check("omega", trace.k[mask], gap, bound, conditional=True,
                                 note="requires the half-space condition at x*; k = 1 skipped")
    return rep


def step_bound_check(trace: Trace, consts: BoundConstants, slack: float = 1e-8) -> BoundCheck:
    """``||x^k - x^{k-1}|| <= (C_S + 2 C_T + 5 C_x) J / ((1 - r) k) + slack``."""
    k = trace.k.astype(np.float64)
    return _bound_check("step_norm", trace.k, trace.step_norm, consts.step_coeff / k + slack)


def boundedness_check(trace: Trace, x_ref, consts: BoundConstants, slack: float = 1e-6) -> BoundCheck:
    """``max_k ||x^k - x_ref|| <= C_x`` over the recorded iterates (and x^0)."""
    k, X = _iterates(trace)
    d = np.linalg.norm(X - np.asarray(x_ref), axis=1)
    return _bound_check("boundedness", k, d, np.full(d.shape, consts.C_x + slack))


def vanishing_check(values, factor: float = 10.0) -> dict:
    """Median of the last tenth of a series versus the first tenth."""
    v = np.asarray(values, dtype=np.float64)
    n = max(v.size // 10, 1)
    first, last = float(np.median(v[:n])), float(np.median(v[-n:]))
    return {"first_median": first, "last_median": last, "passed": bool(last * factor < first)}


# --------------------------------------------------------------------------
# Fejer monotonicity and distances
# --------------------------------------------------------------------------


@dataclass
class FejerRateParams:
    beta: float
    gamma: float
    q: int
    lam: float

    def __post_init__(self):
        if not (self.gamma > self.beta > 0):
            raise InputError("need gamma > beta > 0")
        if int(self.q) != self.q or self.q < 1:
            raise InputError("q must be a positive integer")
        if not self.lam > 0:
            raise InputError("lam must be positive")

    def M(self, d0: float) -> float:
        e = 1.0 / (self.gamma - self.beta)
        a = 2 * (2 * self.q * self.beta / ((self.gamma - self.beta) * self.lam)) ** e
        return max(a, 2 * (2 * self.q) ** e * d0)


@dataclass
class FejerReport(_Report):
    passed: bool
    first_violation_k: Optional[int]
    x_bar: np.ndarray
    distances: np.ndarray
    decrease_ok: Optional[bool] = None
    envelope_ok: Optional[bool] = None
    M: Optional[float] = None


def fejer_check(trace, projector, tol: float = 1e-10, params: Optional[FejerRateParams] = None) -> FejerReport:
    """Fejer monotonicity toward ``x_bar``, the projection of the last iterate.

    With ``params`` the decrease condition on ``d(x^{jq}, set)`` and the
    resulting envelope ``d(x^k, set) <= M / (2 k^(1/(gamma-beta)))`` are
    checked too (only at recorded multiples of q for the former).
    """
    proj = _projector(projector)
    k, X = _iterates(trace)
    x_bar = np.asarray(proj(X[-1]), dtype=np.float64)
    if x_bar.shape != X[-1].shape:
        raise InputError("projector output dimension does not match the iterates")
    d = np.linalg.norm(X - x_bar, axis=1)
    bad = np.nonzero(d[1:] > d[:-1] + tol)[0]
    first = int(k[bad[0] + 1]) if bad.size else None
    rep = FejerReport(first is None, first, x_bar, d)
    if params is not None:
        dist = np.linalg.norm(X - proj(X), axis=1)
        on = np.nonzero(k % params.q == 0)[0]
        db, dg = dist[on] ** params.beta, dist[on] ** params.gamma
        consecutive = np.diff(k[on]) == params.q
        rep.decrease_ok = bool(np.all((db[1:] <= db[:-1] - params.lam * dg[:-1] + tol) | ~consecutive))
        rep.M = params.M(float(dist[0]))
        pos = k >= 1
        env = rep.M / (2 * k[pos].astype(float) ** (1.0 / (params.gamma - params.beta)))
        rep.envelope_ok = bool(np.all(dist[pos] <= env + tol))
        rep.passed = rep.passed and rep.decrease_ok and rep.envelope_ok
    return rep


@dataclass
class DistanceSeries(_Report):
    k: np.ndarray
    h: np.ndarray
    margins: np.ndarray
    fact_ok: bool

    def nonincreasing_after(self, burn_in: float = 0.1, tol: float = 1e-12) -> bool:
        start = int(len(self.h) * burn_in)
        h = self.h[start:]
        return bool(np.all(h[1:] <= h[:-1] + tol))

    def last_decade_median(self) -> float:
        n = max(len(self.h) // 10, 1)
        return float(np.median(self.h[-n:]))


def distance_series(trace, projector, tol: float = 1e-12) -> DistanceSeries:
    """``h_k = d(x^k, set)`` and the margins of ``(h'^2 - h^2)^+ / h' <= 2 ||x - x'||``.

    Margins are taken between consecutive recorded iterates (NaN where
    ``h' = 0``); the inequality holds for any pair since ``d`` is 1-Lipschitz.
    """
    proj = _projector(projector)
    k, X = _iterates(trace)
    P = np.asarray(proj(X), dtype=np.float64)
    if P.shape != X.shape:
        raise InputError("projector output dimension does not match the iterates")
    h = np.linalg.norm(X - P, axis=1)
    step = np.linalg.norm(np.diff(X, axis=0), axis=1)
    h0, h1 = h[:-1], h[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = np.maximum(h1 ** 2 - h0 ** 2, 0.0) / h1
    margins = np.where(h1 > 0, 2 * step - lhs, np.nan)
    scale = np.maximum(1.0, np.abs(X[1:]).max(axis=1))
    ok = np.isnan(margins) | (margins >= -tol * scale)
    return DistanceSeries(k, h, margins, bool(np.all(ok)))


# --------------------------------------------------------------------------
# half-space condition and regularity
# --------------------------------------------------------------------------


@dataclass
class HalfspaceReport(_Report):
    fraction_both: float
    fraction_S: float
    fraction_T: float
    boundary_S: bool
    boundary_T: bool
    burn_in: int
    samples: int

    @property
    def satisfied(self) -> bool:
        return self.fraction_both == 1.0 and not (self.boundary_S or self.boundary_T)


def halfspace_condition_check(trace: Trace, x_star, p, burn_in: float = 0.1,
                              zero_tol: float = 1e-14) -> HalfspaceReport:
    """Fraction of iterates after burn-in with ``<S x* - x*, x^k - x*> < 0`` and
    ``<T x* - x*, x^k - x*> < 0`` (T ranging over the layers above the bottom).

    A zero vector ``S x* - x*`` or ``T x* - x*`` makes the condition
    vacuous; it is flagged as a boundary case and never counted as satisfied.
    """
    k, X = _iterates(trace)
    x_star = np.asarray(x_star, dtype=np.float64)
    start = int(math.ceil(len(k) * burn_in))
    D = X[start:] - x_star
    vS = p.maps[0].apply(x_star) - x_star
    ipS = D @ vS
    okS = ipS < -zero_tol
    okT = np.ones(D.shape[0], bool)
    boundary_T = False
    for m in _upper_maps(p):
        vT = m.apply(x_star) - x_star
        boundary_T |= bool(np.linalg.norm(vT) <= zero_tol)
        okT &= (D @ vT) < -zero_tol
    boundary_S = bool(np.linalg.norm(vS) <= zero_tol)
    n = max(D.shape[0], 1)
    return HalfspaceReport(float(np.sum(okS & okT) / n), float(np.sum(okS) / n), float(np.sum(okT) / n),
                           boundary_S, boundary_T, start, int(D.shape[0]))


@dataclass
class RegularityReport(_Report):
    theta: float
    used: int
    excluded: int
    seed: int
    radius: float


def regularity_check(p, fix_set, sample_radius: float = 10.0, samples: int = 10_000,
                     seed: int = 0, residual_floor: float = 1e-12) -> RegularityReport:
    """Estimate ``theta = max d(x, Fix W) / ||x - W x||`` over uniform samples of a ball.

    ``p`` is a problem (its bottom map is used) or a LayerMap.
    """
    W = p.lowest if hasattr(p, "lowest") else p
    proj = _projector(fix_set)
    rng = np.random.default_rng(seed)
    n = W.dim
    g = rng.standard_normal((samples, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    X = g * (sample_radius * rng.random(samples) ** (1.0 / n))[:, None]
    res = np.linalg.norm(X - W.apply(X), axis=1)
    dist = np.linalg.norm(X - proj(X), axis=1)
    keep = res >= residual_floor
    if not np.any(keep):
        raise FitError("every sample is (nearly) a fixed point; cannot estimate theta")
    return RegularityReport(float(np.max(dist[keep] / res[keep])), int(keep.sum()),
                            int((~keep).sum()), int(seed), float(sample_radius))
