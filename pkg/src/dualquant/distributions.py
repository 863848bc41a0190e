"""Sampling targets with optional exact one-dimensional analytics.

A DistributionSpec bundles a seeded sampler with the support box (when
bounded) and, in one dimension, closed-form cdf / pdf / partial moments
/ quantiles so that training and error evaluation can run without Monte
Carlo.  Partial moments are ordinary truncated power moments:

    partial_moment(k, a, b) = E[X^k ; a <= X <= b],  k in {0, 1, 2}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

from .rng import RngStream

_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Analytics1D:
    cdf: Callable[[float], float]
    pdf: Callable[[float], float]
    partial_moment: Callable[[int, float, float], float]
    quantile: Callable[[float], float]


@dataclass(frozen=True)
class DistributionSpec:
    """A target law: seeded sampler plus optional structure.

    ``sampler(rng, n)`` returns an (n, dim) array.  ``support`` is a
    (lo, hi) box or None when unbounded.  ``strongly_continuous``
    records that the law assigns no mass to hyperplanes, the hypothesis
    under which splitting-trained grids stay non-degenerate.
    """

    name: str
    dim: int
    sampler: Callable[[RngStream, int], np.ndarray]
    support: tuple[np.ndarray, np.ndarray] | None = None
    analytics: Analytics1D | None = None
    strongly_continuous: bool = True


def _phi(x: float) -> float:
    if math.isinf(x):
        return 0.0
    return math.exp(-0.5 * x * x) / _SQRT2PI


def _Phi(x: float) -> float:
    if x == -math.inf:
        return 0.0
    if x == math.inf:
        return 1.0
    return float(ndtr(x))


def _xphi(x: float) -> float:
    # x * phi(x) with the correct limit 0 at +-inf
    if math.isinf(x):
        return 0.0
    return x * _phi(x)


def make_uniform_box(lo, hi, name: str | None = None) -> DistributionSpec:
    """Uniform law on the box [lo, hi] (scalars give one dimension)."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise ValueError("box bounds must satisfy lo < hi componentwise")
    dim = lo.size

    def sampler(rng: RngStream, n: int) -> np.ndarray:
        return lo + (hi - lo) * rng.uniform((n, dim))

    analytics = None
    if dim == 1:
        a0, b0 = float(lo[0]), float(hi[0])
        h = b0 - a0

        def cdf(x: float) -> float:
            return min(1.0, max(0.0, (x - a0) / h))

        def pdf(x: float) -> float:
            return 1.0 / h if a0 <= x <= b0 else 0.0

        def partial_moment(k: int, a: float, b: float) -> float:
            aa = min(max(a, a0), b0)
            bb = min(max(b, a0), b0)
            if bb <= aa:
                return 0.0
            return (bb ** (k + 1) - aa ** (k + 1)) / ((k + 1) * h)

        def quantile(q: float) -> float:
            return a0 + q * h

        analytics = Analytics1D(cdf, pdf, partial_moment, quantile)

    if name is None:
        if dim == 1:
            name = f"uniform:{float(lo[0])},{float(hi[0])}"
        else:
            name = f"uniform-box-{dim}d"
    return DistributionSpec(name, dim, sampler, (lo, hi), analytics)


def make_normal(mu: float = 0.0, sigma: float = 1.0, dim: int = 1,
                name: str | None = None) -> DistributionSpec:
    """Isotropic normal N(mu, sigma^2 I)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    mu = float(mu)
    sigma = float(sigma)

    def sampler(rng: RngStream, n: int) -> np.ndarray:
        return mu + sigma * rng.normal((n, dim))

    analytics = None
    if dim == 1:

        def cdf(x: float) -> float:
            return _Phi((x - mu) / sigma)

        def pdf(x: float) -> float:
            return _phi((x - mu) / sigma) / sigma

        def partial_moment(k: int, a: float, b: float) -> float:
            al = (a - mu) / sigma if not math.isinf(a) else a
            be = (b - mu) / sigma if not math.isinf(b) else b
            m0 = _Phi(be) - _Phi(al)
            if k == 0:
                return m0
            m1 = _phi(al) - _phi(be)
            if k == 1:
                return mu * m0 + sigma * m1
            m2 = m0 + _xphi(al) - _xphi(be)
            return mu * mu * m0 + 2.0 * mu * sigma * m1 + sigma * sigma * m2

        def quantile(q: float) -> float:
            return mu + sigma * float(ndtri(q))

        analytics = Analytics1D(cdf, pdf, partial_moment, quantile)

    if name is None:
        name = f"normal:{mu},{sigma}" if dim == 1 else f"normal-{dim}d"
    return DistributionSpec(name, dim, sampler, None, analytics)


def make_exponential(lam: float, name: str | None = None) -> DistributionSpec:
    """Exponential law with rate lam on [0, inf)."""
    if lam <= 0:
        raise ValueError("rate must be positive")
    lam = float(lam)

    def sampler(rng: RngStream, n: int) -> np.ndarray:
        return rng.generator.exponential(scale=1.0 / lam, size=(n, 1))

    def cdf(x: float) -> float:
        return 1.0 - math.exp(-lam * x) if x > 0 else 0.0

    def pdf(x: float) -> float:
        return lam * math.exp(-lam * x) if x >= 0 else 0.0

    def _g(k: int, x: float) -> float:
        # antiderivative tail: integral_x^inf t^k lam e^(-lam t) dt
        if x == math.inf:
            return 0.0
        x = max(x, 0.0)  # no mass below the origin
        e = math.exp(-lam * x)
        if k == 0:
            return e
        if k == 1:
            return (x + 1.0 / lam) * e
        return (x * x + 2.0 * x / lam + 2.0 / (lam * lam)) * e

    def partial_moment(k: int, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        return _g(k, a) - _g(k, b)

    def quantile(q: float) -> float:
        return -math.log1p(-q) / lam

    analytics = Analytics1D(cdf, pdf, partial_moment, quantile)
    support = (np.array([0.0]), np.array([math.inf]))
    return DistributionSpec(name or f"exponential:{lam}", 1, sampler, support, analytics)


def make_bm_sup(name: str = "bmsup") -> DistributionSpec:
    """Joint law of (W_1, sup_{t<=1} W_t) for a standard Brownian motion.

    Sampled exactly: conditionally on W_1 = w the running maximum has
    tail P(M >= m) = exp(-2 m (m - w)) for m >= max(w, 0), inverted in
    closed form.
    """

    def sampler(rng: RngStream, n: int) -> np.ndarray:
        w = rng.normal(n)
        u = 1.0 - rng.uniform(n)  # in (0, 1], keeps the log finite
        m = 0.5 * (w + np.sqrt(w * w - 2.0 * np.log(u)))
        return np.column_stack([w, m])

    return DistributionSpec(name, 2, sampler, None, None)


def parse_distribution(text: str) -> DistributionSpec:
    """Build a distribution from its command-line string form.

    Accepted: ``uniform:lo,hi``  ``normal:mu,sigma``  ``exponential:rate``
    ``uniform2d``  ``normal2d``  ``bmsup``.
    """
    text = text.strip()
    if text == "uniform2d":
        return make_uniform_box([0.0, 0.0], [1.0, 1.0], name="uniform2d")
    if text == "normal2d":
        return make_normal(0.0, 1.0, dim=2, name="normal2d")
    if text == "bmsup":
        return make_bm_sup()
    head, sep, args = text.partition(":")
    if not sep:
        raise ValueError(f"unknown distribution {text!r}")
    try:
        vals = [float(v) for v in args.split(",")]
    except ValueError:
        raise ValueError(f"malformed distribution arguments in {text!r}")
    if head == "uniform" and len(vals) == 2:
        return make_uniform_box(vals[0], vals[1])
    if head == "normal" and len(vals) == 2:
        return make_normal(vals[0], vals[1])
    if head == "exponential" and len(vals) == 1:
        return make_exponential(vals[0])
    raise ValueError(f"unknown distribution {text!r}")
