"""Iteration kernels: a numba-compiled loop and a pure-numpy fallback.

Each layer map is encoded as ``w = G x + h`` followed by a closed-form prox
(see ``LayerMap.encode``); maps are stacked along a leading axis in the
order they are summed. Setting ``HIERPROX_NO_NUMBA=1`` forces the numpy
path, as does a missing numba installation.
"""

from __future__ import annotations

import os

import numpy as np

from .operators import PROX_AFFINE, PROX_BALL, PROX_BOX, PROX_L1

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

STATUS_MAX_ITERS, STATUS_RESIDUAL, STATUS_DIVERGED = 0, 1, 2
STATUS_NAMES = {0: "max_iters", 1: "residual_met", 2: "diverged"}


def numba_enabled() -> bool:
    """Whether the compiled kernel will be used for ``backend="auto"``."""
    return HAVE_NUMBA and os.environ.get("HIERPROX_NO_NUMBA", "") not in ("1", "true", "yes")


def resolve_backend(backend: str = "auto") -> str:
    if backend == "auto":
        return "numba" if numba_enabled() else "numpy"
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend


def stack_maps(maps):
    """Stack ``LayerMap.encode`` outputs of ``maps`` into kernel arrays."""
    enc = [m.encode() for m in maps]
    G = np.ascontiguousarray(np.stack([e[0] for e in enc]))
    h = np.ascontiguousarray(np.stack([e[1] for e in enc]))
    code = np.array([e[2] for e in enc], dtype=np.int64)
    tau = np.array([e[3] for e in enc], dtype=np.float64)
    lo = np.ascontiguousarray(np.stack([e[4] for e in enc]))
    hi = np.ascontiguousarray(np.stack([e[5] for e in enc]))
    P = np.ascontiguousarray(np.stack([e[6] for e in enc]))
    q = np.ascontiguousarray(np.stack([e[7] for e in enc]))
    center = np.ascontiguousarray(np.stack([e[8] for e in enc]))
    radius = np.array([e[9] for e in enc], dtype=np.float64)
    return G, h, code, tau, lo, hi, P, q, center, radius


# --------------------------------------------------------------------------
# numpy fallback
# --------------------------------------------------------------------------


def _apply_np(j, x, G, h, code, tau, lo, hi, P, q, center, radius):
    w = G[j] @ x + h[j]
    c = code[j]
    if c == PROX_L1:
        return np.sign(w) * np.maximum(np.abs(w) - tau[j], 0.0)
    if c == PROX_BOX:
        return np.minimum(np.maximum(w, lo[j]), hi[j])
    if c == PROX_AFFINE:
        return P[j] @ w + q[j]
    if c == PROX_BALL:
        d = w - center[j]
        nrm = np.sqrt(d @ d)
        if nrm > radius[j]:
            return center[j] + d * (radius[j] / nrm)
        return w
    return w


def _run_numpy(x0, weights, G, h, code, tau, lo, hi, P, q, center, radius,
               stop_tol, div_radius, trace_every, rec_k, rec_x, rec_prev):
    K, m = weights.shape
    x = x0.copy()
    nrec, status, k = 0, STATUS_MAX_ITERS, 0
    for k in range(1, K + 1):
        prev = x
        x = weights[k - 1, 0] * _apply_np(0, prev, G, h, code, tau, lo, hi, P, q, center, radius)
        for j in range(1, m):
            x = x + weights[k - 1, j] * _apply_np(j, prev, G, h, code, tau, lo, hi, P, q, center, radius)
        nrm2 = x @ x
        if not (nrm2 <= div_radius * div_radius):
            status = STATUS_DIVERGED
        elif stop_tol > 0.0:
            d = x - prev
            if np.sqrt(d @ d) <= stop_tol:
                status = STATUS_RESIDUAL
        if status != STATUS_MAX_ITERS or k % trace_every == 0 or k == K:
            rec_k[nrec] = k
            rec_x[nrec] = x
            rec_prev[nrec] = prev
            nrec += 1
        if status != STATUS_MAX_ITERS:
            break
    return nrec, status, k


# --------------------------------------------------------------------------
# numba kernel
# --------------------------------------------------------------------------


def _run_loops(x0, weights, G, h, code, tau, lo, hi, P, q, center, radius,
               stop_tol, div_radius, trace_every, rec_k, rec_x, rec_prev):
    K, m = weights.shape
    n = x0.shape[0]
    x = x0.copy()
    prev = np.empty(n)
    w = np.empty(n)
    out = np.empty(n)
    nrec, status, k = 0, 0, 0
    for k in range(1, K + 1):
        for i in range(n):
            prev[i] = x[i]
            x[i] = 0.0
        for j in range(m):
            for i in range(n):
                s = h[j, i]
                for l in range(n):
                    s += G[j, i, l] * prev[l]
                w[i] = s
            c = code[j]
            if c == 1:
                for i in range(n):
                    a = abs(w[i]) - tau[j]
                    if a <= 0.0:
                        out[i] = 0.0
                    elif w[i] > 0.0:
                        out[i] = a
                    else:
                        out[i] = -a
            elif c == 2:
                for i in range(n):
                    out[i] = min(max(w[i], lo[j, i]), hi[j, i])
            elif c == 3:
                for i in range(n):
                    s = q[j, i]
                    for l in range(n):
                        s += P[j, i, l] * w[l]
                    out[i] = s
            elif c == 4:
                nrm2 = 0.0
                for i in range(n):
                    nrm2 += (w[i] - center[j, i]) ** 2
                nrm = np.sqrt(nrm2)
                if nrm > radius[j]:
                    fac = radius[j] / nrm
                    for i in range(n):
                        out[i] = center[j, i] + (w[i] - center[j, i]) * fac
                else:
                    for i in range(n):
                        out[i] = w[i]
            else:
                for i in range(n):
                    out[i] = w[i]
            wk = weights[k - 1, j]
            for i in range(n):
                x[i] += wk * out[i]
        nrm2 = 0.0
        step2 = 0.0
        for i in range(n):
            nrm2 += x[i] * x[i]
            step2 += (x[i] - prev[i]) ** 2
        if not (nrm2 <= div_radius * div_radius):
            status = 2
        elif stop_tol > 0.0 and np.sqrt(step2) <= stop_tol:
            status = 1
        if status != 0 or k % trace_every == 0 or k == K:
            rec_k[nrec] = k
            for i in range(n):
                rec_x[nrec, i] = x[i]
                rec_prev[nrec, i] = prev[i]
            nrec += 1
        if status != 0:
            break
    return nrec, status, k


_run_numba = njit(cache=True)(_run_loops) if HAVE_NUMBA else None


def run(x0, weights, maps_arrays, stop_tol=0.0, div_radius=1e12, trace_every=1, backend="auto"):
    """Run ``x <- sum_j weights[k-1, j] * map_j(x)`` for ``k = 1..len(weights)``.

    Returns ``(rec_k, rec_x, rec_prev, status, last_k)`` where ``rec_x[i]`` is
    the iterate at ``rec_k[i]`` and ``rec_prev[i]`` the one before it.
    """
    backend = resolve_backend(backend)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    K = weights.shape[0]
    cap = K // trace_every + 2
    rec_k = np.zeros(cap, dtype=np.int64)
    rec_x = np.zeros((cap, x0.size))
    rec_prev = np.zeros((cap, x0.size))
    fn = _run_numba if backend == "numba" else _run_numpy
    nrec, status, last = fn(x0, weights, *maps_arrays, float(stop_tol), float(div_radius),
                            int(trace_every), rec_k, rec_x, rec_prev)
    return rec_k[:nrec], rec_x[:nrec], rec_prev[:nrec], int(status), int(last)
