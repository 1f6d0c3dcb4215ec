"""Closed-form heavy-traffic limit of the scaled stationary queue length.

Two independent constructions of the same law: a mixture of per-level
truncated exponentials (uniform on zero-drift levels) weighted by level
masses derived from the telescoping products ``xi``, and a Gibbs-type
density proportional to exp(integral of the step 2*drift/variance) over
the step variance.  Their pointwise agreement is one of the package's
acceptance checks.

All products of exponentials are carried in log space; a drift treated as
zero (|beta| < 1e-12) switches every formula to its flat branch to avoid
cancellation in (exp(beta*width) - 1) / beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .model import QueueModel

__all__ = [
    "LimitDistribution",
    "GibbsDensity",
    "build_limit",
    "limit_from_coefficients",
    "build_gibbs",
    "gibbs_pdf",
]

ZERO_DRIFT_EPS = 1e-12


def _log_expm1_abs(x: float) -> float:
    """log|exp(x) - 1| for x != 0, stable at both ends."""
    if x > 0.0:
        return x + math.log1p(-math.exp(-x)) if x < 37.0 else x
    return math.log(-math.expm1(x))


def _cdf_ratio(u: float, v: float) -> float:
    """expm1(u)/expm1(v) for 0 <= u/v <= 1 with u, v of one sign."""
    if v > 0.0:
        return math.exp(u - v) * math.expm1(-u) / math.expm1(-v)
    return math.expm1(u) / math.expm1(v)


@dataclass(frozen=True)
class LimitDistribution:
    """Mixture form of the limit law.

    ``edges`` holds the K level endpoints starting at 0 (the top level is
    unbounded), ``beta`` the per-level exponents, ``log_xi`` the running
    integral of beta across full levels, ``c`` the unnormalized level
    weights (all negative), ``d`` the level masses.
    """

    edges: tuple[float, ...]
    drift: tuple[float, ...]
    sigma2: tuple[float, ...]
    beta: tuple[float, ...]
    log_xi: tuple[float, ...]
    xi: tuple[float, ...]
    c: tuple[float, ...]
    log_abs_c: tuple[float, ...]
    d: tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.d)

    @property
    def flat(self) -> tuple[bool, ...]:
        return tuple(abs(b) < ZERO_DRIFT_EPS for b in self.beta)

    def _piece_of(self, x: np.ndarray) -> np.ndarray:
        inner = np.asarray(self.edges[1:])
        return np.searchsorted(inner, x, side="left")

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.any(x < 0.0):
            raise ValueError("support is the nonnegative half-line")
        piece = self._piece_of(x)
        out = np.zeros_like(x)
        for i in range(self.k):
            m = piece == i
            if not np.any(m):
                continue
            a = self.edges[i]
            b = self.beta[i]
            di = self.d[i]
            if i == self.k - 1:
                out[m] = di * abs(b) * np.exp(b * (x[m] - a))
            elif abs(b) < ZERO_DRIFT_EPS:
                out[m] = di / (self.edges[i + 1] - a)
            else:
                w = self.edges[i + 1] - a
                out[m] = di * abs(b) * np.exp(b * (x[m] - a) - _log_expm1_abs(b * w))
        return out if out.shape else float(out)

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        piece = np.where(x < 0.0, -1, self._piece_of(np.maximum(x, 0.0)))
        prefix = np.concatenate(([0.0], np.cumsum(self.d)))
        out = np.zeros_like(x, dtype=float)
        for i in range(self.k):
            m = piece == i
            if not np.any(m):
                continue
            a = self.edges[i]
            b = self.beta[i]
            if i == self.k - 1:
                frac = -np.expm1(b * (x[m] - a))
            elif abs(b) < ZERO_DRIFT_EPS:
                w = self.edges[i + 1] - a
                frac = (x[m] - a) / w
            else:
                w = self.edges[i + 1] - a
                frac = np.array([_cdf_ratio(b * (xx - a), b * w) for xx in x[m]])
            out[m] = prefix[i] + self.d[i] * frac
        out[piece == -1] = 0.0
        return out if out.shape else float(out)

    def quantile(self, p: float) -> float:
        """Monotone bisection to 1e-12 absolute."""
        if not 0.0 < p < 1.0:
            raise ValueError("quantile level must lie in (0, 1)")
        lo = 0.0
        hi = self.edges[-1] + (60.0 - math.log(max(1.0 - p, 1e-300))) / abs(self.beta[-1])
        it = 0
        while self.cdf(hi) < p:
            hi *= 2.0
            it += 1
            if it > 200:
                raise RuntimeError("quantile bracket failure")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if hi - lo <= 1e-12 * max(1.0, hi):
                break
            if self.cdf(mid) < p:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def quantile_many(self, p: np.ndarray) -> np.ndarray:
        return np.array([self.quantile(pi) for pi in np.asarray(p, dtype=float)])

    def _piece_conditional_moments(self, i: int) -> tuple[float, float]:
        """Conditional first/second moment of the offset within piece i."""
        b = self.beta[i]
        if i == self.k - 1:
            return 1.0 / abs(b), 2.0 / b**2
        w = self.edges[i + 1] - self.edges[i]
        if abs(b) < ZERO_DRIFT_EPS:
            return w / 2.0, w * w / 3.0
        bw = b * w
        if bw < -700.0:
            m1 = -1.0 / b
            return m1, 2.0 / b**2
        denom = -math.expm1(-bw)  # 1 - exp(-b w)
        m1 = w / denom - 1.0 / b
        m2 = w * w / denom - 2.0 * m1 / b
        return m1, m2

    def moment(self, k: int = 1) -> float:
        if k not in (1, 2):
            raise ValueError("closed-form moments implemented for k in {1, 2}")
        total = 0.0
        for i in range(self.k):
            a = self.edges[i]
            m1, m2 = self._piece_conditional_moments(i)
            if k == 1:
                total += self.d[i] * (a + m1)
            else:
                total += self.d[i] * (a * a + 2.0 * a * m1 + m2)
        return total

    def mean(self) -> float:
        return self.moment(1)

    def piece_mass(self, i: int) -> float:
        return self.d[i]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Inverse-CDF draws from the mixture."""
        u = rng.random(size)
        cum = np.concatenate(([0.0], np.cumsum(self.d)))
        cum[-1] = 1.0
        piece = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, self.k - 1)
        v = (u - cum[piece]) / np.asarray(self.d)[piece]
        v = np.clip(v, 1e-16, 1.0 - 1e-16)
        out = np.empty(size)
        for i in range(self.k):
            m = piece == i
            if not np.any(m):
                continue
            a = self.edges[i]
            b = self.beta[i]
            if i == self.k - 1:
                out[m] = a + np.log1p(-v[m]) / b
            elif abs(b) < ZERO_DRIFT_EPS:
                w = self.edges[i + 1] - a
                out[m] = a + v[m] * w
            else:
                w = self.edges[i + 1] - a
                if b > 0.0:
                    out[m] = a + w + np.log(v[m] + (1.0 - v[m]) * np.exp(-b * w)) / b
                else:
                    out[m] = a + np.log1p(v[m] * np.expm1(b * w)) / b
        return out


def limit_from_coefficients(levels, drift, sigma2) -> LimitDistribution:
    """Build the mixture law from raw per-level (thresholds, drift,
    variance).  The zero-drift branch is taken exactly when the exponent
    vanishes to within 1e-12."""
    drift = tuple(float(b) for b in drift)
    sigma2 = tuple(float(s) for s in sigma2)
    k = len(drift)
    if k < 2 or len(sigma2) != k or len(levels) != k - 1:
        raise ValueError("need drift/variance per level and K-1 thresholds")
    if any(s <= 0.0 for s in sigma2):
        raise ValueError("variances must be positive")
    if drift[-1] >= 0.0:
        raise ValueError("top-level drift must be negative")
    edges = (0.0,) + tuple(float(l) for l in levels)
    if any(edges[i] >= edges[i + 1] for i in range(k - 1)):
        raise ValueError("thresholds must be strictly increasing and positive")
    beta = tuple(2.0 * b / s for b, s in zip(drift, sigma2))

    log_xi = [0.0]
    for i in range(k - 1):
        log_xi.append(log_xi[-1] + beta[i] * (edges[i + 1] - edges[i]))
    log_xi = tuple(log_xi)
    xi = tuple(math.exp(v) if v < 700.0 else math.inf for v in log_xi)

    log_abs_c = []
    for i in range(k - 1):
        w = edges[i + 1] - edges[i]
        if abs(beta[i]) < ZERO_DRIFT_EPS:
            log_abs_c.append(math.log(2.0 * w / sigma2[i]) + log_xi[i])
        else:
            log_abs_c.append(
                _log_expm1_abs(beta[i] * w) - math.log(abs(drift[i])) + log_xi[i]
            )
    log_abs_c.append(log_xi[k - 1] - math.log(abs(drift[k - 1])))
    log_abs_c = tuple(log_abs_c)

    log_total = logsumexp(np.asarray(log_abs_c))
    d = np.exp(np.asarray(log_abs_c) - log_total)
    d = d / d.sum()
    c = tuple(-math.exp(v) if v < 700.0 else -math.inf for v in log_abs_c)
    return LimitDistribution(
        edges=edges,
        drift=drift,
        sigma2=sigma2,
        beta=beta,
        log_xi=log_xi,
        xi=xi,
        c=c,
        log_abs_c=log_abs_c,
        d=tuple(float(x) for x in d),
    )


def build_limit(model: QueueModel) -> LimitDistribution:
    return limit_from_coefficients(
        model.params.levels, model.params.drift, model.sigma2
    )


@dataclass(frozen=True)
class GibbsDensity:
    """Density proportional to exp(int_0^x beta(y) dy) / variance(x), with
    the normalizing constant computed from per-level exponential integrals
    (independent from the mixture weights)."""

    edges: tuple[float, ...]
    beta: tuple[float, ...]
    sigma2: tuple[float, ...]
    log_norm: float

    @property
    def k(self) -> int:
        return len(self.beta)

    def exponent_integral(self, x) -> np.ndarray:
        """Piecewise-exact integral of the step exponent from 0 to x."""
        x = np.asarray(x, dtype=float)
        inner = np.asarray(self.edges[1:])
        piece = np.searchsorted(inner, x, side="left")
        log_xi = np.concatenate(([0.0], np.cumsum(np.asarray(self.beta[:-1]) * np.diff(self.edges))))
        a = np.asarray(self.edges)[piece]
        b = np.asarray(self.beta)[piece]
        return log_xi[piece] + b * (x - a)

    def log_pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.any(x < 0.0):
            raise ValueError("support is the nonnegative half-line")
        inner = np.asarray(self.edges[1:])
        piece = np.searchsorted(inner, x, side="left")
        s2 = np.asarray(self.sigma2)[piece]
        return self.exponent_integral(x) - self.log_norm - np.log(s2)

    def pdf(self, x) -> np.ndarray:
        out = np.exp(self.log_pdf(x))
        return out if out.shape else float(out)


def build_gibbs(model_or_coeffs) -> GibbsDensity:
    if isinstance(model_or_coeffs, QueueModel):
        levels = model_or_coeffs.params.levels
        drift = model_or_coeffs.params.drift
        sigma2 = model_or_coeffs.sigma2
    else:
        levels, drift, sigma2 = model_or_coeffs
    k = len(drift)
    edges = (0.0,) + tuple(float(l) for l in levels)
    beta = tuple(2.0 * b / s for b, s in zip(drift, sigma2))
    if beta[-1] >= 0.0:
        raise ValueError("top-level exponent must be negative")
    log_xi = [0.0]
    for i in range(k - 1):
        log_xi.append(log_xi[-1] + beta[i] * (edges[i + 1] - edges[i]))
    terms = []
    for i in range(k - 1):
        w = edges[i + 1] - edges[i]
        if abs(beta[i]) < ZERO_DRIFT_EPS:
            terms.append(math.log(w / sigma2[i]) + log_xi[i])
        else:
            terms.append(
                _log_expm1_abs(beta[i] * w)
                - math.log(sigma2[i] * abs(beta[i]))
                + log_xi[i]
            )
    terms.append(log_xi[k - 1] - math.log(sigma2[k - 1] * abs(beta[k - 1])))
    return GibbsDensity(
        edges=edges,
        beta=beta,
        sigma2=tuple(float(s) for s in sigma2),
        log_norm=float(logsumexp(np.asarray(terms))),
    )


def gibbs_pdf(model: QueueModel, x) -> np.ndarray:
    return build_gibbs(model).pdf(x)
