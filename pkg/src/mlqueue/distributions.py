"""Unit-mean renewal increments: reproducible streams, sampling, and the
truncated Laplace transforms / moments used by the exponent solver and the
tail-bound checks.

Streams are numpy PCG64 generators derived from a (seed, key) pair through
SeedSequence spawn keys: identical pairs reproduce identical draw sequences
and distinct keys give statistically independent streams.  The scalar
sampler consumes uniforms in exactly the same order as the compiled kernels
so Python and kernel simulations can share a stream bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import integrate
from scipy.special import gammainc, gammaln

from .model import Family, RenewalSpec

__all__ = [
    "stream",
    "sample",
    "sample_many",
    "truncated_laplace",
    "truncated_moment",
    "survival",
    "partial_excess",
    "TruncatedLaplace",
    "draw_increment",
]


def stream(seed: int, *key: int) -> np.random.Generator:
    """Reproducible independent stream for (seed, key)."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))
    )


# -- sampling --------------------------------------------------------------
#
# One scalar draw consumes a fixed number of uniforms per family
# (exponential/uniform: 1, deterministic: 0, erlang: shape, hyper: 2), in
# the same order in the njit and Python versions.


@njit(cache=True, nogil=True, inline="always")
def draw_increment(code, p1, p2, p3, rng):
    if code == 0:  # exponential
        return -np.log1p(-rng.random())
    if code == 1:  # deterministic
        return 1.0
    if code == 2:  # erlang, p1 = shape
        k = int(p1)
        s = 0.0
        for _ in range(k):
            s += -np.log1p(-rng.random())
        return s / k
    if code == 3:  # hyperexponential, p1 = p, p2/p3 = rates
        u = rng.random()
        v = -np.log1p(-rng.random())
        return v / p2 if u < p1 else v / p3
    # uniform, p1 = half width; value in (1 - p1, 1 + p1]
    return (1.0 - p1) + 2.0 * p1 * (1.0 - rng.random())


def sample(spec: RenewalSpec, rng: np.random.Generator) -> float:
    """One draw, mirroring the kernel's uniform consumption exactly."""
    code, p1, p2, p3 = spec.numba_params()
    if code == 0:
        return -math.log1p(-rng.random())
    if code == 1:
        return 1.0
    if code == 2:
        k = int(p1)
        s = 0.0
        for _ in range(k):
            s += -math.log1p(-rng.random())
        return s / k
    if code == 3:
        u = rng.random()
        v = -math.log1p(-rng.random())
        return v / p2 if u < p1 else v / p3
    return (1.0 - p1) + 2.0 * p1 * (1.0 - rng.random())


def sample_many(spec: RenewalSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorized draws (consumption pattern differs from `sample`)."""
    f = spec.family
    if f == Family.EXPONENTIAL:
        return -np.log1p(-rng.random(size))
    if f == Family.DETERMINISTIC:
        return np.ones(size)
    if f == Family.ERLANG:
        k = spec.shape
        u = rng.random((size, k))
        return -np.log1p(-u).sum(axis=1) / k
    if f == Family.HYPEREXPONENTIAL:
        u = rng.random(size)
        v = -np.log1p(-rng.random(size))
        return np.where(u < spec.p, v / spec.r1, v / spec.r2)
    hw = spec.half_width
    return (1.0 - hw) + 2.0 * hw * (1.0 - rng.random(size))


# -- truncated Laplace transform -------------------------------------------


def _check_exp(x: float) -> float:
    if x > 700.0:
        raise OverflowError(f"transform overflows: needs exp({x:.3g})")
    return math.exp(x)


def _expo_piece_laplace(r: float, m: float, s: float) -> float:
    """E[exp(-s (T ^ m))] for T ~ Exp(rate r)."""
    a = r + s
    if math.isinf(m):
        if a <= 0.0:
            raise ValueError("untruncated transform infinite for s <= -rate")
        return r / a
    x = a * m
    if abs(x) < 1e-14 or abs(a) < 1e-300:
        return r * m + math.exp(-x)
    if -x > 700.0:
        _check_exp(-x)
    tail = math.exp(-x) if -x <= 700.0 else math.inf
    return r / a * (-math.expm1(-x)) + tail


def truncated_laplace(spec: RenewalSpec, m: float, s: float) -> float:
    """E[exp(-s (T ^ m))]; closed form per family, quadrature fallback for
    the one Erlang branch without a positive effective rate.

    `m` may be inf (untruncated transform, finite only above the family's
    abscissa).  Raises OverflowError when the value exceeds float range.
    """
    if m <= 0.0:
        raise ValueError("cutoff must be positive")
    f = spec.family
    if f == Family.EXPONENTIAL:
        return _expo_piece_laplace(1.0, m, s)
    if f == Family.DETERMINISTIC:
        return _check_exp(-s * min(1.0, m))
    if f == Family.HYPEREXPONENTIAL:
        return spec.p * _expo_piece_laplace(spec.r1, m, s) + (
            1.0 - spec.p
        ) * _expo_piece_laplace(spec.r2, m, s)
    if f == Family.ERLANG:
        k = spec.shape
        a = k + s
        if math.isinf(m):
            if a <= 0.0:
                raise ValueError("untruncated transform infinite for s <= -shape")
            return (k / a) ** k
        if a > 0.0:
            body = (k / a) ** k * gammainc(k, a * m)
            tail = _check_exp(-s * m) * (1.0 - gammainc(k, k * m))
            return body + tail
        # nonpositive effective rate: no incomplete-gamma form
        lognorm = k * math.log(k) - gammaln(k)
        body, _ = integrate.quad(
            lambda t: math.exp(-s * t + lognorm + (k - 1) * math.log(t) - k * t),
            0.0,
            m,
            epsabs=1e-13,
            epsrel=1e-12,
            limit=200,
        )
        return body + _check_exp(-s * m) * (1.0 - gammainc(k, k * m))
    # uniform on [a0, b0]
    hw = spec.half_width
    a0, b0 = 1.0 - hw, 1.0 + hw
    width = 2.0 * hw
    if m <= a0:
        return _check_exp(-s * m)
    hi = min(b0, m)
    if abs(s) < 1e-14:
        body = (hi - a0) / width
    else:
        body = (_check_exp(-s * a0) - _check_exp(-s * hi)) / (s * width)
    tail = 0.0 if m >= b0 else _check_exp(-s * m) * (b0 - m) / width
    return body + tail


# -- truncated moments -------------------------------------------------------


def _expo_piece_moment(r: float, m: float, k: int) -> float:
    """E[(T ^ m)^k] for T ~ Exp(rate r)."""
    if math.isinf(m):
        return math.factorial(k) / r**k
    body = math.factorial(k) / r**k * gammainc(k + 1, r * m)
    return body + m**k * math.exp(-r * m)


def truncated_moment(spec: RenewalSpec, m: float, k: int) -> float:
    """E[(T ^ m)^k] for k in {1, 2, 3}, exact per family."""
    if k not in (1, 2, 3):
        raise ValueError("moment order must be 1, 2 or 3")
    if m <= 0.0:
        raise ValueError("cutoff must be positive")
    f = spec.family
    if f == Family.EXPONENTIAL:
        return _expo_piece_moment(1.0, m, k)
    if f == Family.DETERMINISTIC:
        return min(1.0, m) ** k
    if f == Family.HYPEREXPONENTIAL:
        return spec.p * _expo_piece_moment(spec.r1, m, k) + (
            1.0 - spec.p
        ) * _expo_piece_moment(spec.r2, m, k)
    if f == Family.ERLANG:
        ks = spec.shape
        ratio = math.exp(gammaln(ks + k) - gammaln(ks)) / ks**k
        if math.isinf(m):
            return ratio
        body = ratio * gammainc(ks + k, ks * m)
        return body + m**k * (1.0 - gammainc(ks, ks * m))
    hw = spec.half_width
    a0, b0 = 1.0 - hw, 1.0 + hw
    width = 2.0 * hw
    if m <= a0:
        return m**k
    hi = min(b0, m)
    body = (hi ** (k + 1) - a0 ** (k + 1)) / ((k + 1) * width)
    tail = 0.0 if m >= b0 else m**k * (b0 - m) / width
    return body + tail


def survival(spec: RenewalSpec, y: float) -> float:
    """P(T > y)."""
    if y < 0.0:
        return 1.0
    f = spec.family
    if f == Family.EXPONENTIAL:
        return math.exp(-y)
    if f == Family.DETERMINISTIC:
        return 1.0 if y < 1.0 else 0.0
    if f == Family.ERLANG:
        return 1.0 - gammainc(spec.shape, spec.shape * y)
    if f == Family.HYPEREXPONENTIAL:
        return spec.p * math.exp(-spec.r1 * y) + (1.0 - spec.p) * math.exp(-spec.r2 * y)
    hw = spec.half_width
    return min(1.0, max(0.0, (1.0 + hw - y) / (2.0 * hw)))


def partial_excess(spec: RenewalSpec, y: float) -> float:
    """E[(T - y) 1(T > y)] = mean minus the first truncated moment."""
    if y <= 0.0:
        return 1.0
    return 1.0 - truncated_moment(spec, y, 1)


@dataclass(frozen=True)
class TruncatedLaplace:
    """Transform of T ^ cutoff for a fixed spec, as used by the exponent
    equations with cutoff sqrt(n)."""

    spec: RenewalSpec
    cutoff: float

    def __post_init__(self):
        if self.cutoff <= 0.0:
            raise ValueError("cutoff must be positive")

    def transform(self, s: float) -> float:
        return truncated_laplace(self.spec, self.cutoff, s)
