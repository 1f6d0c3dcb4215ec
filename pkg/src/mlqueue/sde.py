"""Reflected Euler simulation of the limiting diffusion.

The diffusion has piecewise-constant drift and deviation read off the
level partition, reflection at zero through the regulator process, and its
stationary law is the closed-form limit law.  Reflection is by projection
(max with zero), which biases the boundary layer at O(sqrt(dt)); the
default step keeps that far below the statistical tolerances, and a
common-random-numbers step-halving check quantifies it.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .distributions import stream
from .model import QueueModel
from .stats import EmpiricalDistribution, batch_ci

__all__ = [
    "DiffusionParams",
    "DiffusionPath",
    "SdeResult",
    "HalvingReport",
    "diffusion_params",
    "euler_reflect_step",
    "simulate_path",
    "run_sde_stationary",
    "halving_check",
]


@dataclass(frozen=True)
class DiffusionParams:
    """Step drift/deviation plus the numerical scheme settings."""

    bounds: tuple[float, ...]  # finite level endpoints
    drift: tuple[float, ...]
    sigma: tuple[float, ...]
    dt: float
    horizon: float
    z0: float = 0.0

    def __post_init__(self):
        if self.dt <= 0.0 or self.horizon <= self.dt:
            raise ValueError("need 0 < dt < horizon")
        if any(s <= 0.0 for s in self.sigma):
            raise ValueError("deviation must be positive everywhere")
        if self.drift[-1] >= 0.0:
            raise ValueError("top-level drift must be negative")
        if self.z0 < 0.0:
            raise ValueError("initial point must be nonnegative")

    @property
    def beta_top(self) -> float:
        return 2.0 * self.drift[-1] / self.sigma[-1] ** 2


def diffusion_params(
    model: QueueModel, dt: float = 1e-3, horizon: float = 1e4, z0: float = 0.0
) -> DiffusionParams:
    return DiffusionParams(
        bounds=model.params.levels,
        drift=model.params.drift,
        sigma=tuple(math.sqrt(s) for s in model.sigma2),
        dt=dt,
        horizon=horizon,
        z0=z0,
    )


def _coeffs_at(params: DiffusionParams, z: float) -> tuple[float, float]:
    for i, b in enumerate(params.bounds):
        if z <= b:
            return params.drift[i], params.sigma[i]
    return params.drift[-1], params.sigma[-1]


def euler_reflect_step(z: float, params: DiffusionParams, g: float) -> tuple[float, float]:
    """One projected Euler step from z with standard normal draw g;
    returns (next point, regulator increment)."""
    if z < 0.0:
        raise ValueError("state must be nonnegative")
    b, s = _coeffs_at(params, z)
    p = z + b * params.dt + s * math.sqrt(params.dt) * g
    if p < 0.0:
        return 0.0, -p
    return p, 0.0


@njit(cache=True, nogil=True)
def _sde_kernel(bounds, drift, sigma, dt, n_steps, warmup, nb, bin_w, nbins, z0, rng):
    k = drift.shape[0]
    hist = np.zeros((nb, nbins + 1))
    zsum = np.zeros(nb)
    steps_b = np.zeros(nb, dtype=np.int64)
    y_total = 0.0
    comp_viol = 0
    visits_zero = np.int64(0)
    post = n_steps - warmup
    sq = np.sqrt(dt)
    z = z0
    for step_i in range(n_steps):
        lev = k - 1
        for i in range(k - 1):
            if z <= bounds[i]:
                lev = i
                break
        p = z + drift[lev] * dt + sigma[lev] * sq * rng.standard_normal()
        if p < 0.0:
            dy = -p
            z = 0.0
        else:
            dy = 0.0
            z = p
        if step_i >= warmup:
            j = step_i - warmup
            b = j * nb // post
            idx = int(z / bin_w)
            if idx > nbins:
                idx = nbins
            hist[b, idx] += 1.0
            zsum[b] += z
            steps_b[b] += 1
            y_total += dy
            if dy > 0.0:
                visits_zero += 1
                if z > 0.0:
                    comp_viol += 1
    return hist, zsum, steps_b, y_total, comp_viol, visits_zero, z


@dataclass
class DiffusionPath:
    """Short sampled trajectory (for invariant tests and plots)."""

    params: DiffusionParams
    z: np.ndarray  # states including z0
    y: np.ndarray  # accumulated regulator, y[0] = 0

    def __len__(self) -> int:
        return self.z.size


def simulate_path(params: DiffusionParams, steps: int, rng: np.random.Generator) -> DiffusionPath:
    z = np.empty(steps + 1)
    y = np.empty(steps + 1)
    z[0] = params.z0
    y[0] = 0.0
    for i in range(steps):
        zi, dy = euler_reflect_step(z[i], params, rng.standard_normal())
        z[i + 1] = zi
        y[i + 1] = y[i] + dy
    return DiffusionPath(params, z, y)


@dataclass
class SdeResult:
    params: DiffusionParams
    dist: EmpiricalDistribution
    mean: float
    mean_batches: np.ndarray
    y_total: float
    visits_zero: int
    steps: int
    warmup: int
    seed: int
    wall_time: float

    def mean_ci(self) -> tuple[float, float, float]:
        return batch_ci(self.mean_batches)

    def summary(self) -> dict:
        m, se, half = self.mean_ci()
        return {
            "dt": self.params.dt,
            "horizon": self.params.horizon,
            "steps": self.steps,
            "warmup": self.warmup,
            "seed": self.seed,
            "mean": self.mean,
            "mean_se": se,
            "mean_ci_halfwidth": half,
            "regulator_total": self.y_total,
            "visits_zero": self.visits_zero,
            "wall_time_s": self.wall_time,
        }


def run_sde_stationary(
    params: DiffusionParams,
    warmup_frac: float = 0.1,
    seed: int = 0,
    batches: int = 32,
    nbins: int = 8192,
    guard_frac: float = 0.01,
) -> SdeResult:
    """Time-average law of the reflected diffusion over the post-warmup
    horizon, with batch-means error bars.  Aborts when more than
    `guard_frac` of the mass escapes past the guard level (instability)."""
    n_steps = int(round(params.horizon / params.dt))
    warmup = int(n_steps * warmup_frac)
    if n_steps - warmup < batches:
        raise ValueError("horizon too short for the requested batches")
    zmax = params.bounds[-1] + 60.0 / abs(params.beta_top)
    bin_w = zmax / nbins
    rng = stream(seed, 0)
    t0 = _time.perf_counter()
    hist, zsum, steps_b, y_total, comp_viol, visits_zero, _ = _sde_kernel(
        np.asarray(params.bounds),
        np.asarray(params.drift),
        np.asarray(params.sigma),
        params.dt,
        n_steps,
        warmup,
        batches,
        bin_w,
        nbins,
        params.z0,
        rng,
    )
    wall = _time.perf_counter() - t0
    if comp_viol:
        raise RuntimeError("complementarity violated: regulator moved off the boundary")
    post = float(steps_b.sum())
    overflow = float(hist[:, nbins].sum())
    if overflow > guard_frac * post:
        raise RuntimeError(
            f"diffusion spent {overflow / post:.1%} of its time beyond the guard "
            f"level {zmax:.3g}; parameters look unstable"
        )
    support = (np.arange(nbins + 1) + 1.0) * bin_w
    mean_batches = zsum / np.maximum(steps_b, 1)
    return SdeResult(
        params=params,
        dist=EmpiricalDistribution(support, hist),
        mean=float(zsum.sum() / post),
        mean_batches=mean_batches,
        y_total=float(y_total),
        visits_zero=int(visits_zero),
        steps=n_steps,
        warmup=warmup,
        seed=seed,
        wall_time=wall,
    )


@njit(cache=True, nogil=True)
def _lockstep_kernel(bounds, drift, sigma, dt, n_coarse, warmup_coarse, nb, rng):
    """Fine path at dt/2 and coarse path at dt driven by the same Brownian
    increments (pairwise sums), for the discretization self-test."""
    k = drift.shape[0]
    half = 0.5 * dt
    sq_h = np.sqrt(half)
    sq = np.sqrt(dt)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    zf = 0.0
    zc = 0.0
    fine_sum = np.zeros(nb)
    coarse_sum = np.zeros(nb)
    cnt = np.zeros(nb, dtype=np.int64)
    post = n_coarse - warmup_coarse
    for step_i in range(n_coarse):
        g1 = rng.standard_normal()
        g2 = rng.standard_normal()
        for g in (g1, g2):
            lev = k - 1
            for i in range(k - 1):
                if zf <= bounds[i]:
                    lev = i
                    break
            p = zf + drift[lev] * half + sigma[lev] * sq_h * g
            zf = p if p > 0.0 else 0.0
        lev = k - 1
        for i in range(k - 1):
            if zc <= bounds[i]:
                lev = i
                break
        p = zc + drift[lev] * dt + sigma[lev] * sq * (g1 + g2) * inv_sqrt2
        zc = p if p > 0.0 else 0.0
        if step_i >= warmup_coarse:
            j = step_i - warmup_coarse
            b = j * nb // post
            fine_sum[b] += zf
            coarse_sum[b] += zc
            cnt[b] += 1
    return fine_sum, coarse_sum, cnt


@dataclass
class HalvingReport:
    mean_coarse: float
    mean_fine: float
    shift: float
    ci_halfwidth: float

    @property
    def ok(self) -> bool:
        return abs(self.shift) < self.ci_halfwidth


def halving_check(
    params: DiffusionParams, warmup_frac: float = 0.1, seed: int = 0, batches: int = 32
) -> HalvingReport:
    """Compare the stationary mean at dt against dt/2 under common random
    numbers; passes when the shift sits inside the coarse batch-means CI."""
    n_coarse = int(round(params.horizon / params.dt))
    warmup = int(n_coarse * warmup_frac)
    rng = stream(seed, 1)
    fine_sum, coarse_sum, cnt = _lockstep_kernel(
        np.asarray(params.bounds),
        np.asarray(params.drift),
        np.asarray(params.sigma),
        params.dt,
        n_coarse,
        warmup,
        batches,
        rng,
    )
    mean_f = float(fine_sum.sum() / cnt.sum())
    mean_c = float(coarse_sum.sum() / cnt.sum())
    _, _, half = batch_ci(coarse_sum / np.maximum(cnt, 1))
    return HalvingReport(
        mean_coarse=mean_c,
        mean_fine=mean_f,
        shift=mean_c - mean_f,
        ci_halfwidth=half,
    )
