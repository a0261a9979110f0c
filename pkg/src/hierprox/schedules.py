"""Step-size sequences, multilevel weight families and regime classification.

Indexing is 1-based throughout: ``k = 1`` is the first iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import InputError, ScheduleError

KINDS = ("power", "rate", "ratio_counterexample", "table", "constant_beta")
TABLE2_CASES = ("a", "b", "c", "d", "e", "f", "none")
# log-log slope of beta_k/alpha_k separating a vanishing or exploding ratio from a bounded one
SLOPE_TOL = 0.05


@dataclass(frozen=True, eq=False)
class Schedule:
    """Predetermined step-size pairs ``(alpha_k, beta_k)``.

    Build with the module-level constructors (:func:`power`, :func:`rate`,
    :func:`ratio_counterexample`, :func:`table`, :func:`constant_beta`).
    """

    kind: str
    lam: float = 1.0
    gamma: float = 1.0
    oscillate: bool = False
    offset: float = 1.0
    r: float = 0.0
    beta_const: float = 0.0
    alphas: Optional[np.ndarray] = field(default=None, repr=False)
    betas: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def J(self) -> Optional[int]:
        """Burn-in length ``floor(2 / (1 - r))`` of the rate schedule."""
        if self.kind != "rate":
            return None
        return int(math.floor(2.0 / (1.0 - self.r)))

    def _eval(self, k):
        k = np.asarray(k, dtype=np.int64)
        if np.any(k < 1):
            raise InputError("schedule index starts at k = 1")
        kf = k.astype(np.float64)
        if self.kind in ("power", "ratio_counterexample"):
            base = kf + self.offset
            a, b = base ** -self.lam, base ** -self.gamma
            if self.oscillate:
                sign = np.where(k % 2 == 0, 1.0, -1.0)
                a = a / (2.0 + sign)
                b = b / (3.0 + sign)
            return a, b
        if self.kind == "rate":
            a = np.minimum(2.0 / ((1.0 - self.r) * kf), 1.0)
            return a, a.copy()
        if self.kind == "constant_beta":
            return (kf + self.offset) ** -self.lam, np.full(kf.shape, self.beta_const)
        # table
        if np.any(k > self.alphas.size):
            raise InputError(f"table schedule defines only {self.alphas.size} steps")
        return self.alphas[k - 1].copy(), self.betas[k - 1].copy()

    def at(self, k: int):
        """``(alpha_k, beta_k)`` for a single 1-based index."""
        if int(k) != k or k < 1:
            raise InputError(f"schedule index must be a positive integer, got {k}")
        a, b = self._eval(np.array([k]))
        return float(a[0]), float(b[0])

    def arrays(self, K: int):
        """Vectors of ``alpha_k`` and ``beta_k`` for ``k = 1..K``."""
        return self._eval(np.arange(1, int(K) + 1))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "power":
            d.update(lam=self.lam, gamma=self.gamma, oscillate=self.oscillate, offset=self.offset)
        elif self.kind == "rate":
            d.update(r=self.r)
        elif self.kind == "constant_beta":
            d.update(lam=self.lam, beta=self.beta_const, offset=self.offset)
        elif self.kind == "table":
            d.update(alphas=self.alphas.tolist(), betas=self.betas.tolist())
        return d


def power(lam: float, gamma: float, oscillate: bool = False, offset: float = 1.0) -> Schedule:
    """``alpha_k = (k+offset)^-lam``, ``beta_k = (k+offset)^-gamma``.

    With ``oscillate`` the two are further divided by ``2 + (-1)^k`` and
    ``3 + (-1)^k``. ``offset=0`` gives the ``1/k`` style sequences.
    """
    if not (lam > 0 and gamma > 0):
        raise InputError(f"power schedule needs lam > 0 and gamma > 0, got {lam}, {gamma}")
    if not (offset >= 0 and math.isfinite(offset)):
        raise InputError(f"offset must be a nonnegative number, got {offset}")
    return Schedule("power", lam=float(lam), gamma=float(gamma), oscillate=bool(oscillate),
                    offset=float(offset))


def rate(r: float) -> Schedule:
    """``alpha_k = beta_k = min(2 / ((1 - r) k), 1)`` for contraction factor r."""
    if not (0.0 <= r < 1.0):
        raise InputError(f"rate schedule needs r in [0, 1), got {r}")
    return Schedule("rate", r=float(r))


def ratio_counterexample() -> Schedule:
    """Oscillating pair whose ratio alternates between 1/2 and 3/4."""
    return Schedule("ratio_counterexample", lam=1.0, gamma=1.0, oscillate=True, offset=1.0)


def table(alphas, betas) -> Schedule:
    a = np.asarray(alphas, dtype=np.float64).ravel()
    b = np.asarray(betas, dtype=np.float64).ravel()
    if a.shape != b.shape or a.size == 0:
        raise InputError("table schedule needs equally long non-empty alpha and beta lists")
    if np.any(~(a > 0)) or np.any(a > 1) or np.any(~(b > 0)) or np.any(b > 1):
        raise InputError("table entries must lie in (0, 1]")
    a.setflags(write=False)
    b.setflags(write=False)
    return Schedule("table", alphas=a, betas=b)


def constant_beta(beta: float, lam: float = 1.0, offset: float = 1.0) -> Schedule:
    """Constant ``beta_k = beta`` with power ``alpha_k = (k+offset)^-lam``."""
    if not (0.0 < beta < 1.0):
        raise InputError(f"constant beta must lie in (0, 1), got {beta}")
    if not lam > 0:
        raise InputError(f"lam must be positive, got {lam}")
    return Schedule("constant_beta", lam=float(lam), beta_const=float(beta), offset=float(offset))


def from_dict(d: dict) -> Schedule:
    """Inverse of :meth:`Schedule.to_dict`; raises InputError naming the bad field."""
    if not isinstance(d, dict) or "kind" not in d:
        raise InputError("schedule: expected an object with a 'kind' field")
    kind = d["kind"]
    try:
        if kind == "power":
            return power(d["lam"], d["gamma"], d.get("oscillate", False), d.get("offset", 1.0))
        if kind == "rate":
            return rate(d["r"])
        if kind == "ratio_counterexample":
            return ratio_counterexample()
        if kind == "table":
            return table(d["alphas"], d["betas"])
        if kind == "constant_beta":
            return constant_beta(d["beta"], d.get("lam", 1.0), d.get("offset", 1.0))
    except KeyError as exc:
        raise InputError(f"schedule.{exc.args[0]}: missing field for kind {kind!r}") from None
    except TypeError as exc:
        raise InputError(f"schedule: bad field type ({exc})") from None
    raise InputError(f"schedule.kind: unknown kind {kind!r}; choose from {KINDS}")


# --------------------------------------------------------------------------
# regime classification
# --------------------------------------------------------------------------


@dataclass
class RegimeReport:
    delta: str  # "zero" | "finite" | "infinite"
    delta_value: float
    delta_tilde_exists: bool
    delta_tilde: Optional[float]
    assumption_flags: dict
    table2_case: str
    estimated: bool
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "delta_value": _json_float(self.delta_value),
            "delta_tilde_exists": self.delta_tilde_exists,
            "delta_tilde": None if self.delta_tilde is None else _json_float(self.delta_tilde),
            "assumption_flags": dict(self.assumption_flags),
            "table2_case": self.table2_case,
            "estimated": self.estimated,
            "notes": list(self.notes),
        }


def _json_float(v):
    return "inf" if v == math.inf else v


def table2_case(lam: float, gamma: float) -> str:
    """Case label of the power family ``(lam, gamma)``.

    Several cases can hold at once; the first match in the order
    a, c, f, d, e, b wins (b only when no narrower case applies).
    """
    if lam < gamma:
        return "a"
    if 0 < lam <= gamma < 1 and lam + gamma < 1:
        return "c"
    if 0 < gamma == lam < 1:
        return "f"
    if 0 < gamma < lam <= 1 and lam + gamma <= 1:
        return "d" if lam <= 2 * gamma else "e"
    if 0 < lam <= gamma < 1 or 0 < gamma < lam < 1:
        return "b"
    return "none"


def _power_report(lam, gamma, oscillate) -> RegimeReport:
    notes = []
    if lam < gamma:
        delta, value = "zero", 0.0
    elif lam > gamma:
        delta, value = "infinite", math.inf
    else:
        delta, value = "finite", 0.75 if oscillate else 1.0
    tilde_exists = not (oscillate and lam == gamma)
    tilde = None if not tilde_exists else value
    if oscillate:
        # successive differences of the oscillating factors decay only like
        # k^-lam and k^-gamma, which breaks both difference conditions
        a4 = a5 = False
        notes.append("oscillating family: |alpha_k - alpha_{k-1}| ~ k^-lam, so assumption4 and assumption5 flags are false")
    else:
        a4 = lam + gamma <= 1
        a5 = lam < 1 and gamma < 1
    flags = {
        "assumption2": tilde_exists,
        "assumption3": lam <= 1,
        "assumption4": a4,
        "assumption5": a5,
        "A2_zero": lam < 2 * gamma,
        "A2_finite": lam <= 2 * gamma,
    }
    return RegimeReport(delta, value, tilde_exists, tilde, flags, table2_case(lam, gamma),
                        estimated=False, notes=notes)


def _window_max(v, lo, hi):
    return float(np.max(v[lo:hi]))


def _estimate_report(s: Schedule, horizon: int) -> RegimeReport:
    a, b = s.arrays(horizon)
    h = horizon
    q1, q2 = h // 4, h // 2
    ratio = b / a
    tail = _window_max(ratio, q2, h)
    kk = np.arange(q2 + 1, h + 1, dtype=np.float64)
    slope = np.polyfit(np.log(kk), np.log(ratio[q2:]), 1)[0]
    if slope > SLOPE_TOL:
        delta, value = "infinite", math.inf
    elif slope < -SLOPE_TOL or tail < 1e-12:
        delta, value = "zero", 0.0
    else:
        delta, value = "finite", tail
    t = ratio[h - max(h // 10, 1):]
    spread = (t.max() - t.min()) / max(t.max(), 1e-300)
    tilde_exists = bool(spread < 1e-2 or delta != "finite")
    inv_b = 1.0 / b
    q4 = np.abs(np.diff(inv_b)) / a[1:]
    q5 = (np.abs(np.diff(b)) + np.abs(np.diff(a))) / (a[1:] * b[1:])
    a2 = b * b / a

    def vanishing(v):
        return _window_max(v, q2 - 1, h - 1) < 0.9 * _window_max(v, q1 - 1, q2 - 1) or v[-1] < 1e-12

    def bounded(v):
        return _window_max(v, q2 - 1, h - 1) <= 1.5 * _window_max(v, q1 - 1, q2 - 1)

    flags = {
        "assumption2": tilde_exists,
        "assumption3": bool(a[q2:].max() <= a[q1:q2].max() and a[q2:].sum() >= 0.5 * a[q1:q2].sum()),
        "assumption4": bool(bounded(q4)),
        "assumption5": bool(vanishing(q5)),
        "A2_zero": bool(vanishing(a2[1:])),
        "A2_finite": bool(bounded(a2[1:])),
    }
    notes = [f"finite-horizon estimate over k in [{q2}, {h}]; limsup is not finitely decidable"]
    return RegimeReport(delta, value, tilde_exists, value if tilde_exists else None, flags,
                        "none", estimated=True, notes=notes)


def classify_regime(s: Schedule, horizon: int = 100_000) -> RegimeReport:
    """Classify a schedule by delta = limsup beta_k/alpha_k and the step assumptions.

    Power, rate and constant-beta kinds are classified analytically; table
    and ratio-counterexample kinds get tail-window estimates flagged as such.
    """
    if s.kind == "power":
        return _power_report(s.lam, s.gamma, s.oscillate)
    if s.kind == "rate":
        flags = {"assumption2": True, "assumption3": True, "assumption4": False,
                 "assumption5": False, "A2_zero": True, "A2_finite": True}
        notes = ["alpha_k = beta_k ~ 2/((1-r)k): the difference conditions 4 and 5 fail "
                 "asymptotically; the rate analysis does not rely on them"]
        return RegimeReport("finite", 1.0, True, 1.0, flags, "none", False, notes)
    if s.kind == "constant_beta":
        flags = {"assumption2": True, "assumption3": s.lam <= 1, "assumption4": True,
                 "assumption5": True, "A2_zero": False, "A2_finite": False}
        return RegimeReport("infinite", math.inf, True, math.inf, flags, "none", False)
    if s.kind == "table":
        horizon = min(horizon, s.alphas.size)
    if horizon < 100:
        raise InputError(f"regime estimation needs a horizon of at least 100, got {horizon}")
    return _estimate_report(s, horizon)


# --------------------------------------------------------------------------
# multilevel weights
# --------------------------------------------------------------------------

WEIGHT_FAMILIES = ("uniform", "nested")


def multilevel_weight_table(base: Schedule, K: int, N: int, family: str = "uniform"):
    """Weights ``(alpha^(0), ..., alpha^(N))`` for ``k = 1..K`` as a (K, N+1) array.

    ``uniform``: selector gets alpha_k, each upper layer i >= 2 gets
    beta_k / (N - 1) and the bottom layer takes the remainder.
    ``nested``: selector alpha_k, then each layer from the top down takes a
    beta_k share of what is left; for N = 2 this is exactly the trilevel
    split ``(alpha, (1-alpha)(1-beta), (1-alpha) beta)``.
    """
    if N < 1:
        raise InputError(f"number of levels must be >= 1, got {N}")
    a, b = base.arrays(K)
    W = np.empty((a.size, N + 1))
    W[:, 0] = a
    if family == "uniform":
        if N > 1:
            bad = np.nonzero(a + b > 1.0)[0]
            if bad.size:
                k = int(bad[0]) + 1
                raise ScheduleError(
                    f"alpha_k + beta_k = {a[bad[0]] + b[bad[0]]:.6g} > 1 at k = {k}; the uniform "
                    "weight family would go negative. Start the schedule later (larger offset) "
                    "or use smaller constants")
            share = b / (N - 1)
            W[:, 2:] = share[:, None]
            W[:, 1] = 1.0 - a - share * (N - 1)
        else:
            W[:, 1] = 1.0 - a
    elif family == "nested":
        rem = 1.0 - a
        for i in range(N, 1, -1):
            W[:, i] = rem * b
            rem = rem * (1.0 - b)
        W[:, 1] = rem
    else:
        raise InputError(f"unknown weight family {family!r}; choose from {WEIGHT_FAMILIES}")
    return W


def make_multilevel_weights(k: int, N: int, base: Schedule, family: str = "uniform"):
    """Weight vector for a single 1-based index ``k``."""
    if int(k) != k or k < 1:
        raise InputError(f"index must be a positive integer, got {k}")
    a, b = base.at(k)
    return multilevel_weight_table(table([a], [b]), 1, N, family)[0]
