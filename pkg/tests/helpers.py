"""Random problem generators shared by the property tests."""

import numpy as np

from hierprox.operators import ProxableSpec, SmoothSpec, contraction, proxgrad

NONSMOOTH_KINDS = ("zero", "l1", "box", "affine_eq", "ball")


def random_psd(rng, n, rank=None, scale=3.0):
    rank = n if rank is None else rank
    A = rng.normal(size=(rank, n)) * scale / np.sqrt(n)
    return A.T @ A


def random_smooth(rng, n, strongly_convex=False):
    Q = random_psd(rng, n, rank=int(rng.integers(0, n + 1)))
    if strongly_convex:
        Q = Q + rng.uniform(0.1, 2.0) * np.eye(n)
    return SmoothSpec.quadratic(Q, rng.normal(size=n) * 2)


def random_nonsmooth(rng, n, kind=None):
    kind = kind or NONSMOOTH_KINDS[int(rng.integers(len(NONSMOOTH_KINDS)))]
    if kind == "zero":
        return ProxableSpec.zero(n)
    if kind == "l1":
        return ProxableSpec.l1(n, rng.uniform(0.1, 2.0))
    if kind == "box":
        lo = rng.normal(size=n) - 1
        return ProxableSpec.box(lo, lo + rng.uniform(0, 3, size=n))
    if kind == "affine_eq":
        m = int(rng.integers(1, n + 1))
        A = rng.normal(size=(m, n))
        return ProxableSpec.affine_eq(A, A @ rng.normal(size=n))
    return ProxableSpec.ball(rng.normal(size=n), rng.uniform(0.2, 3.0))


def random_proxgrad(rng, n, kind=None, step_fraction=None):
    f = random_smooth(rng, n)
    g = random_nonsmooth(rng, n, kind)
    frac = rng.uniform(0.05, 1.0) if step_fraction is None else step_fraction
    t = frac / f.lipschitz if f.lipschitz > 0 else rng.uniform(0.1, 5.0)
    return proxgrad(f, g, t)


def random_contraction(rng, n):
    om = random_smooth(rng, n, strongly_convex=True)
    u = rng.uniform(0.05, 1.0) * 2.0 / (om.lipschitz + om.strong_convexity)
    return contraction(om, u)
