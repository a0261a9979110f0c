"""Proximal operators, proximal-gradient maps and the gradient contraction.

Every object here is immutable after construction and evaluation is pure, so
maps can be shared freely between solves. All arithmetic is float64.

Vectors may carry leading batch axes: a map of dimension ``n`` accepts any
array whose last axis has length ``n`` and acts row-wise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import InputError, ParameterError

SYMMETRY_TOL = 1e-12
RANK_TOL = 1e-10
STEP_TOL = 1e-12
INDICATOR_TOL = 1e-9

# prox codes shared with the iteration kernels
PROX_NONE, PROX_L1, PROX_BOX, PROX_AFFINE, PROX_BALL = 0, 1, 2, 3, 4


def _as_vector(x, dim=None, name="x"):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if dim is not None and arr.shape[-1] != dim:
        raise InputError(f"{name} has dimension {arr.shape[-1]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


def _freeze(arr):
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


# --------------------------------------------------------------------------
# smooth terms
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SmoothSpec:
    """Smooth convex term ``0.5 x'Qx - b'x + c`` (``zero`` when Q = 0, b = 0).

    ``lipschitz`` is the largest eigenvalue of Q and ``strong_convexity`` the
    smallest, clipped at zero.
    """

    kind: str
    Q: np.ndarray
    b: np.ndarray
    c: float = 0.0
    lipschitz: float = field(init=False)
    strong_convexity: float = field(init=False)

    def __post_init__(self):
        if self.kind not in ("quadratic", "zero"):
            raise InputError(f"unknown smooth kind {self.kind!r}")
        Q = np.asarray(self.Q, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise InputError(f"Q must be square, got shape {Q.shape}")
        if b.shape != (Q.shape[0],):
            raise InputError(f"b has shape {b.shape}, expected ({Q.shape[0]},)")
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(b)) and math.isfinite(self.c)):
            raise InputError("smooth term has non-finite coefficients")
        scale = max(1.0, float(np.max(np.abs(Q), initial=0.0)))
        if np.max(np.abs(Q - Q.T), initial=0.0) > SYMMETRY_TOL * scale:
            raise InputError("Q is not symmetric")
        Q = 0.5 * (Q + Q.T)
        eig = np.linalg.eigvalsh(Q) if Q.size else np.zeros(1)
        if eig[0] < -1e-10 * scale:
            raise InputError(f"Q is not positive semidefinite (min eigenvalue {eig[0]:.3e})")
        object.__setattr__(self, "Q", _freeze(Q))
        object.__setattr__(self, "b", _freeze(b))
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "lipschitz", float(max(eig[-1], 0.0)))
        object.__setattr__(self, "strong_convexity", float(max(eig[0], 0.0)))

    @classmethod
    def quadratic(cls, Q, b=None, c=0.0):
        Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
        if b is None:
            b = np.zeros(Q.shape[0])
        return cls("quadratic", Q, np.atleast_1d(np.asarray(b, dtype=np.float64)), c)

    @classmethod
    def zero(cls, dim):
        return cls("zero", np.zeros((dim, dim)), np.zeros(dim), 0.0)

    @classmethod
    def least_squares(cls, A, y, weight=1.0):
        """``weight/2 * ||Ax - y||^2`` expanded into quadratic form."""
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        return cls.quadratic(weight * A.T @ A, weight * A.T @ y, 0.5 * weight * float(y @ y))

    @classmethod
    def squared_distance(cls, center, weight=1.0):
        """``weight/2 * ||x - center||^2``."""
        center = np.atleast_1d(np.asarray(center, dtype=np.float64))
        return cls.least_squares(np.eye(center.size), center, weight)

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * np.sum(x * (x @ self.Q), axis=-1) - x @ self.b + self.c

    def grad(self, x):
        return np.asarray(x, dtype=np.float64) @ self.Q - self.b


# --------------------------------------------------------------------------
# nonsmooth terms
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProxableSpec:
    """Nonsmooth convex term with a closed-form prox.

    Kinds: ``zero``, ``l1`` (``weight * ||x||_1``), ``box`` (indicator of
    ``[lo, hi]``), ``affine_eq`` (indicator of ``{x : Ax = c}``) and ``ball``
    (indicator of the Euclidean ball around ``center``). Use the class
    constructors rather than the raw initializer.
    """

    kind: str
    dim: int
    weight: float = 0.0
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    A: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    radius: float = 0.0
    _proj: Optional[np.ndarray] = field(default=None, repr=False)
    _offset: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def zero(cls, dim):
        return cls("zero", int(dim))

    @classmethod
    def l1(cls, dim, weight=1.0):
        if not weight > 0 or not math.isfinite(weight):
            raise ParameterError(f"l1 weight must be positive and finite, got {weight}")
        return cls("l1", int(dim), weight=float(weight))

    @classmethod
    def box(cls, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InputError("box bounds must be vectors of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise InputError("box bounds contain NaN")
        if np.any(lo > hi):
            raise InputError("box requires lo <= hi componentwise")
        return cls("box", lo.size, lo=_freeze(lo), hi=_freeze(hi))

    @classmethod
    def affine_eq(cls, A, c):
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        c = np.atleast_1d(np.asarray(c, dtype=np.float64))
        if c.shape != (A.shape[0],):
            raise InputError(f"affine_eq: c has shape {c.shape}, expected ({A.shape[0]},)")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(c))):
            raise InputError("affine_eq has non-finite coefficients")
        pinv = np.linalg.pinv(A, rcond=RANK_TOL)
        offset = pinv @ c
        if np.linalg.norm(A @ offset - c) > 1e-9 * max(1.0, np.linalg.norm(c)):
            raise InputError("affine_eq system Ax = c is inconsistent")
        n = A.shape[1]
        proj = np.eye(n) - pinv @ A
        return cls("affine_eq", n, A=_freeze(A), c=_freeze(c),
                   _proj=_freeze(proj), _offset=_freeze(offset))

    @classmethod
    def ball(cls, center, radius):
        center = np.atleast_1d(np.asarray(center, dtype=np.float64))
        if not radius > 0 or not math.isfinite(radius):
            raise ParameterError(f"ball radius must be positive, got {radius}")
        return cls("ball", center.size, center=_freeze(center), radius=float(radius))

    @property
    def is_indicator(self) -> bool:
        return self.kind in ("box", "affine_eq", "ball")

    def prox(self, x, t=1.0):
        """Minimizer of ``g(u) + ||u - x||^2 / (2t)``."""
        if not t > 0:
            raise ParameterError(f"prox step must be positive, got {t}")
        x = _as_vector(x, self.dim)
        if self.kind == "zero":
            return x.copy()
        if self.kind == "l1":
            return np.sign(x) * np.maximum(np.abs(x) - t * self.weight, 0.0)
        if self.kind == "box":
            return np.clip(x, self.lo, self.hi)
        if self.kind == "affine_eq":
            return x @ self._proj.T + self._offset
        # ball
        d = x - self.center
        nrm = np.linalg.norm(d, axis=-1, keepdims=True)
        scale = np.where(nrm > self.radius, self.radius / np.where(nrm > 0, nrm, 1.0), 1.0)
        return self.center + d * scale

    def violation(self, x):
        """Distance-like constraint violation (zero for non-indicators)."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "box":
            return np.max(np.maximum(self.lo - x, 0.0) + np.maximum(x - self.hi, 0.0), axis=-1)
        if self.kind == "affine_eq":
            return np.max(np.abs(x @ self.A.T - self.c), axis=-1)
        if self.kind == "ball":
            return np.maximum(np.linalg.norm(x - self.center, axis=-1) - self.radius, 0.0)
        return np.zeros(x.shape[:-1])

    def value(self, x, tol=INDICATOR_TOL):
        """Term value; indicators read +inf only when violated by more than ``tol``."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "l1":
            return self.weight * np.sum(np.abs(x), axis=-1)
        if self.kind == "zero":
            return np.zeros(x.shape[:-1])
        return np.where(self.violation(x) > tol, np.inf, 0.0)


# --------------------------------------------------------------------------
# layer maps
# --------------------------------------------------------------------------

CUSTOM_MAPS = ("scale", "shift", "clamp", "identity")


def contraction_factor(u: float, mu: float, L: float) -> float:
    """Lipschitz factor of ``x - u * grad(omega)(x)`` for mu-strongly convex, L-smooth omega."""
    if not (mu > 0 and L >= mu and math.isfinite(L)):
        raise ParameterError(f"contraction needs 0 < mu <= L, got mu={mu}, L={L}")
    upper = 2.0 / (L + mu)
    if not (u > 0 and u <= upper * (1 + STEP_TOL)):
        raise ParameterError(f"step u={u} outside admissible interval (0, {upper!r}]")
    radicand = 1.0 - 2.0 * u * mu * L / (mu + L)
    return math.sqrt(max(radicand, 0.0))


@dataclass(frozen=True, eq=False)
class LayerMap:
    """One of the layer operators.

    ``contraction``: ``S(x) = x - u grad(omega)(x)``;
    ``proxgrad``: ``T(x) = prox_{t g}(x - t grad f(x))``;
    ``custom_scalar``: an elementwise map from the counterexample catalog
    (``scale``, ``shift``, ``clamp``, ``identity``).
    """

    kind: str
    step: float
    smooth: Optional[SmoothSpec] = None
    nonsmooth: Optional[ProxableSpec] = None
    name: Optional[str] = None
    params: dict = field(default_factory=dict)
    dim_: int = 0

    @property
    def dim(self) -> int:
        if self.smooth is not None:
            return self.smooth.dim
        return self.dim_

    @property
    def r(self) -> Optional[float]:
        """Contraction factor, or None for maps that are merely nonexpansive."""
        if self.kind == "contraction":
            return contraction_factor(self.step, self.smooth.strong_convexity, self.smooth.lipschitz)
        if self.kind == "custom_scalar" and self.name == "scale":
            a = abs(self.params["factor"])
            return a if a < 1 else None
        return None

    @property
    def operator_level(self) -> bool:
        """True when the map has no declared objective behind it."""
        return self.kind == "custom_scalar"

    def apply(self, x):
        x = _as_vector(x, self.dim)
        if self.kind == "contraction":
            return x - self.step * self.smooth.grad(x)
        if self.kind == "proxgrad":
            return self.nonsmooth.prox(x - self.step * self.smooth.grad(x), self.step)
        name, p = self.name, self.params
        if name == "scale":
            return p["factor"] * x
        if name == "shift":
            return x + p["offset"]
        if name == "clamp":
            return np.clip(x, p["lo"], p["hi"])
        return x.copy()

    __call__ = apply

    def objective(self, x):
        """The layer objective (omega, or f + g); NaN for operator-level maps."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "contraction":
            return self.smooth.value(x)
        if self.kind == "proxgrad":
            return self.smooth.value(x) + self.nonsmooth.value(x)
        return np.full(x.shape[:-1], np.nan)

    def encode(self):
        """Affine-then-prox encoding consumed by the iteration kernels."""
        n = self.dim
        eye = np.eye(n)
        G, h = eye.copy(), np.zeros(n)
        code, tau, radius = PROX_NONE, 0.0, 0.0
        lo, hi = np.full(n, -np.inf), np.full(n, np.inf)
        P, q, center = eye.copy(), np.zeros(n), np.zeros(n)
        if self.kind in ("contraction", "proxgrad"):
            G = eye - self.step * self.smooth.Q
            h = self.step * self.smooth.b
        if self.kind == "proxgrad":
            g = self.nonsmooth
            if g.kind == "l1":
                code, tau = PROX_L1, self.step * g.weight
            elif g.kind == "box":
                code, lo, hi = PROX_BOX, g.lo.copy(), g.hi.copy()
            elif g.kind == "affine_eq":
                code, P, q = PROX_AFFINE, g._proj.copy(), g._offset.copy()
            elif g.kind == "ball":
                code, center, radius = PROX_BALL, g.center.copy(), g.radius
        elif self.kind == "custom_scalar":
            p = self.params
            if self.name == "scale":
                G = p["factor"] * eye
            elif self.name == "shift":
                h = np.full(n, p["offset"])
            elif self.name == "clamp":
                code, lo, hi = PROX_BOX, np.full(n, p["lo"]), np.full(n, p["hi"])
        return G, h, code, tau, lo, hi, P, q, center, radius


def contraction(omega: SmoothSpec, u="auto") -> LayerMap:
    """Gradient contraction ``S``; ``u="auto"`` picks ``2 / (L + mu)``."""
    mu, L = omega.strong_convexity, omega.lipschitz
    if not mu > 0:
        raise ParameterError("contraction requires a strongly convex omega (mu > 0)")
    if u == "auto":
        u = 2.0 / (L + mu)
    u = float(u)
    contraction_factor(u, mu, L)
    return LayerMap("contraction", u, smooth=omega)


def proxgrad(f: SmoothSpec, g: Optional[ProxableSpec] = None, t="auto") -> LayerMap:
    """Proximal-gradient map; ``t="auto"`` picks ``1/L`` (or 1 when L = 0)."""
    if g is None:
        g = ProxableSpec.zero(f.dim)
    if g.dim != f.dim:
        raise InputError(f"smooth part has dimension {f.dim}, nonsmooth part {g.dim}")
    L = f.lipschitz
    if t == "auto":
        t = 1.0 / L if L > 0 else 1.0
    t = float(t)
    if not (t > 0 and math.isfinite(t)):
        raise ParameterError(f"prox-gradient step must be positive, got {t}")
    if L > 0 and t > (1.0 / L) * (1 + STEP_TOL):
        raise ParameterError(f"prox-gradient step t={t} outside admissible interval (0, {1.0 / L!r}]")
    return LayerMap("proxgrad", t, smooth=f, nonsmooth=g)


def custom_scalar(name: str, dim: int = 1, **params) -> LayerMap:
    """Elementwise counterexample map: scale(factor), shift(offset), clamp(lo, hi), identity."""
    if name not in CUSTOM_MAPS:
        raise InputError(f"unknown custom map {name!r}; choose from {CUSTOM_MAPS}")
    required = {"scale": ("factor",), "shift": ("offset",), "clamp": ("lo", "hi"), "identity": ()}[name]
    missing = [k for k in required if k not in params]
    if missing:
        raise InputError(f"custom map {name!r} needs parameters {missing}")
    params = {k: float(v) for k, v in params.items()}
    if name == "clamp" and params["lo"] > params["hi"]:
        raise InputError("clamp requires lo <= hi")
    return LayerMap("custom_scalar", float("nan"), name=name, params=params, dim_=int(dim))


# --------------------------------------------------------------------------
# functional interface
# --------------------------------------------------------------------------


def prox_eval(g: ProxableSpec, t: float, x):
    return g.prox(x, t)


def proxgrad_apply(m: LayerMap, x):
    if m.kind != "proxgrad":
        raise InputError(f"expected a proxgrad map, got {m.kind}")
    return m.apply(x)


def contraction_apply(m: LayerMap, x):
    if m.kind != "contraction":
        raise InputError(f"expected a contraction map, got {m.kind}")
    return m.apply(x)


def gradient_map_residual(m: LayerMap, x):
    """Return ``(psi(x), ||x - T(x)||)`` with ``psi(x) = (x - T(x)) / t``."""
    if m.kind != "proxgrad":
        raise InputError(f"expected a proxgrad map, got {m.kind}")
    x = _as_vector(x, m.dim)
    d = x - m.apply(x)
    return d / m.step, np.linalg.norm(d, axis=-1)


def min_norm_subgradient(m: LayerMap, x):
    """Norm of the least-norm element of the subdifferential of f + g at x.

    Closed form exists for ``g`` in {zero, l1}; other kinds raise.
    """
    if m.kind != "proxgrad" or m.nonsmooth.kind not in ("zero", "l1"):
        raise InputError("min-norm subgradient is closed-form only for zero/l1 nonsmooth terms")
    x = _as_vector(x, m.dim)
    grad = m.smooth.grad(x)
    if m.nonsmooth.kind == "zero":
        return np.linalg.norm(grad, axis=-1)
    w = m.nonsmooth.weight
    comp = np.where(x != 0, grad + w * np.sign(x), np.maximum(np.abs(grad) - w, 0.0))
    return np.linalg.norm(comp, axis=-1)
