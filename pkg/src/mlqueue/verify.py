"""Executable form of the stationary identities.

The balance relation couples three expectations: the time average of the
state generator applied to a test function, plus each event rate times the
mean jump of the function at its events, summing to zero in stationarity.
Test functions come from a closed catalog carrying exact right-derivative
metadata; because the state drains linearly between events, per-interval
generator integrals are exact (they telescope through the state values at
event boundaries), so the residual carries no quadrature error.

Also here: the Palm identity checks, the residual-clock tail/moment
bounds, the truncated-transform exponent solver with its second-order
expansion check, and the pathwise renewal decomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .des import EventLog, StationaryResult
from .distributions import (
    partial_excess,
    sample,
    sample_many,
    stream,
    survival,
    truncated_laplace,
    truncated_moment,
)
from .limit import LimitDistribution
from .model import PrelimitConfig, RenewalSpec
from .stats import EmpiricalDistribution, batch_ci, ks_distance, wasserstein1

__all__ = [
    "TestFunction",
    "arrival_clock",
    "service_clock",
    "queue_capped",
    "clock_power",
    "level_clock_power",
    "generator_value",
    "BarResidual",
    "bar_residual",
    "IdentityCheck",
    "PalmReport",
    "palm_identities",
    "MomentBoundsReport",
    "moment_bounds",
    "EtaZetaSolution",
    "solve_eta_zeta",
    "expansion_error",
    "RenewalTrace",
    "renewal_trace",
    "DmReport",
    "daley_miyazawa_check",
    "martingale_drift",
    "ComparisonReport",
    "compare_distributions",
]


# -- test-function catalog --------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """State functional with exact right partial derivatives in the two
    clock coordinates (the queue length never drains, only jumps)."""

    tag: str
    fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    d_arrival: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    d_service: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def arrival_clock() -> TestFunction:
    return TestFunction(
        "arrival_clock",
        lambda L, re, rd: re,
        lambda L, re, rd: np.ones_like(re),
        lambda L, re, rd: np.zeros_like(re),
    )


def service_clock() -> TestFunction:
    return TestFunction(
        "service_clock",
        lambda L, re, rd: rd,
        lambda L, re, rd: np.zeros_like(re),
        lambda L, re, rd: np.ones_like(re),
    )


def queue_capped(cap_level: float) -> TestFunction:
    c = float(cap_level) + 1.0
    return TestFunction(
        f"queue_capped({cap_level:g})",
        lambda L, re, rd: np.minimum(L, c),
        lambda L, re, rd: np.zeros_like(re),
        lambda L, re, rd: np.zeros_like(re),
    )


def clock_power(axis: str, k: int, cutoff: float) -> TestFunction:
    """(clock ^ cutoff)^k on the chosen clock axis."""
    if axis not in ("arrival", "service"):
        raise ValueError("axis must be 'arrival' or 'service'")
    m = float(cutoff)

    def val(L, re, rd):
        x = re if axis == "arrival" else rd
        return np.minimum(x, m) ** k

    def der(L, re, rd):
        x = re if axis == "arrival" else rd
        return np.where(x < m, k * np.minimum(x, m) ** (k - 1), 0.0)

    zero = lambda L, re, rd: np.zeros_like(re)
    return TestFunction(
        f"{axis}_clock_pow({k},{cutoff:g})",
        val,
        der if axis == "arrival" else zero,
        der if axis == "service" else zero,
    )


def level_clock_power(cfg: PrelimitConfig, level: int, axis: str, k: int, cutoff: float) -> TestFunction:
    """Level-set indicator times a capped clock power."""
    if not 1 <= level <= cfg.k:
        raise ValueError("level out of range")
    lo = 0.0 if level == 1 else cfg.levels[level - 2]
    hi = math.inf if level == cfg.k else cfg.levels[level - 1]
    base = clock_power(axis, k, cutoff)

    def ind(L):
        if level == 1:
            return L <= hi
        return (L > lo) & (L <= hi)

    return TestFunction(
        f"level({level})*{base.tag}",
        lambda L, re, rd: np.where(ind(L), base.fn(L, re, rd), 0.0),
        lambda L, re, rd: np.where(ind(L), base.d_arrival(L, re, rd), 0.0),
        lambda L, re, rd: np.where(ind(L), base.d_service(L, re, rd), 0.0),
    )


def generator_value(f: TestFunction, cfg: PrelimitConfig, length, re, rd) -> np.ndarray:
    """Pointwise generator action on a catalog function: minus the
    level-dependent clock speeds times the right derivatives, with the
    service term vanishing in the empty state.  Along an inter-event drain
    this is the path derivative of f, which is why the residual
    accumulation can telescope exactly through the event-boundary states;
    a test integrates this form directly to certify the equivalence."""
    length = np.asarray(length, dtype=float)
    re = np.asarray(re, dtype=float)
    rd = np.asarray(rd, dtype=float)
    lev = np.searchsorted(np.asarray(cfg.levels), length, side="left")
    a = np.asarray(cfg.lam)[lev]
    s = np.where(length >= 1, np.asarray(cfg.mu)[lev], 0.0)
    return -a * f.d_arrival(length, re, rd) - s * f.d_service(length, re, rd)


# -- balance-relation residual ----------------------------------------------


@dataclass
class BarResidual:
    tag: str
    residual: float
    se: float
    z: float
    generator_term: float
    arrival_term: float
    departure_term: float
    events: int
    elapsed: float
    batch_residuals: np.ndarray

    @property
    def ok(self) -> bool:
        return self.z <= 3.0

    def to_dict(self) -> dict:
        return {
            "test_function": self.tag,
            "residual": self.residual,
            "se": self.se,
            "z": self.z,
            "generator_term": self.generator_term,
            "arrival_term": self.arrival_term,
            "departure_term": self.departure_term,
            "events": self.events,
            "pass": bool(self.ok),
        }


def bar_residual(
    log: EventLog, f: TestFunction, warmup: int | None = None, batches: int = 32
) -> BarResidual:
    """Stationary balance residual of one test function over a logged run.

    The generator component is accumulated exactly per inter-event
    interval (the integrand is the path derivative of f along the linear
    drain); jump components are evaluated at the recorded pre/intermediate/
    post states, arrival-first at ties.  Standard error from
    non-overlapping batch means.
    """
    n = len(log)
    if warmup is None:
        warmup = n // 10
    if n - warmup < max(batches * 4, 16):
        raise ValueError("log too short for the requested warmup/batches")
    fb = np.asarray(
        f.fn(log.length_before.astype(float), log.re_before, log.rd_before), dtype=float
    )
    fa = np.asarray(
        f.fn(log.length_after().astype(float), log.re_after(), log.rd_after()),
        dtype=float,
    )
    w = warmup
    gen = fb[w + 1 :] - fa[w:-1]  # interval ending at event j+1
    jump = fa[w + 1 :] - fb[w + 1 :]
    kinds = log.kind[w + 1 :]
    arr_total = float(jump[kinds == 0].sum())
    dep_total = float(jump[kinds == 1].sum())
    gen_total = float(gen.sum())
    elapsed = float(log.time[-1] - log.time[w])
    n_ev = n - 1 - w

    contrib = gen + jump
    bounds = np.linspace(0, n_ev, batches + 1).astype(int)
    times = np.concatenate(([log.time[w]], log.time[w + 1 :][np.maximum(bounds[1:] - 1, 0)]))
    batch_res = []
    for b in range(batches):
        sl = slice(bounds[b], bounds[b + 1])
        span = times[b + 1] - times[b]
        if span > 0:
            batch_res.append(contrib[sl].sum() / span)
    batch_res = np.asarray(batch_res)
    residual = (gen_total + arr_total + dep_total) / elapsed
    _, se, _ = batch_ci(batch_res)
    z = abs(residual) / se if se > 0 else 0.0
    return BarResidual(
        tag=f.tag,
        residual=residual,
        se=se,
        z=z,
        generator_term=gen_total / elapsed,
        arrival_term=arr_total / elapsed,
        departure_term=dep_total / elapsed,
        events=n_ev,
        elapsed=elapsed,
        batch_residuals=batch_res,
    )


# -- Palm identities ----------------------------------------------------------


@dataclass
class IdentityCheck:
    name: str
    value: float
    threshold: float
    ok: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "threshold": self.threshold,
            "pass": bool(self.ok),
            "detail": self.detail,
        }


@dataclass
class PalmReport:
    checks: list[IdentityCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def to_dict(self) -> dict:
        return {"pass": bool(self.ok), "checks": [c.to_dict() for c in self.checks]}


def palm_identities(result: StationaryResult) -> PalmReport:
    """Event-rate equality, the rate bounds, the per-state level-crossing
    balance, and the two rate identities tying event rates to level
    occupancies."""
    rep = PalmReport()
    cfg = result.cfg
    palm = result.palm

    z = palm.alpha_gap_z()
    rep.checks.append(
        IdentityCheck("event_rates_equal", z, 3.0, z <= 3.0, "z-score of rate gap")
    )

    _, se_e, _ = batch_ci(palm.alpha_e_batches)
    lo = min(cfg.lam) - 3.0 * se_e
    hi = max(cfg.mu) + 3.0 * se_e
    ok = lo <= palm.alpha_e <= hi and lo <= palm.alpha_d <= hi
    rep.checks.append(
        IdentityCheck(
            "event_rate_bounds",
            palm.alpha_e,
            hi,
            ok,
            f"requires {min(cfg.lam):.6g} <= rate <= {max(cfg.mu):.6g} (3-SE slack)",
        )
    )

    up = palm.arrival_pre
    down = palm.departure_post
    states = np.union1d(up.support, down.support)
    u = np.zeros(states.size)
    v = np.zeros(states.size)
    u[np.searchsorted(states, up.support)] = up.weights
    v[np.searchsorted(states, down.support)] = down.weights
    worst = float(np.max(np.abs(u - v)))
    bound = float(result.replicas)
    rep.checks.append(
        IdentityCheck(
            "level_crossing_balance",
            worst,
            bound,
            worst <= bound,
            "pathwise |up-crossings minus down-crossings| per state",
        )
    )

    lam = np.asarray(cfg.lam)
    mu = np.asarray(cfg.mu)
    pred_e = result.level_mass_batches @ lam
    diff = palm.alpha_e_batches - pred_e
    mean, se, _ = batch_ci(diff)
    z = abs(mean) / se if se > 0 else 0.0
    rep.checks.append(
        IdentityCheck("arrival_rate_identity", z, 3.0, z <= 3.0, "rate vs occupancy-weighted clock speeds")
    )

    pred_d = result.level_mass_batches @ mu - mu[0] * result.p_empty_batches
    diff = palm.alpha_d_batches - pred_d
    mean, se, _ = batch_ci(diff)
    z = abs(mean) / se if se > 0 else 0.0
    rep.checks.append(
        IdentityCheck("departure_rate_identity", z, 3.0, z <= 3.0, "with the empty-system correction")
    )
    return rep


# -- residual-clock bounds ----------------------------------------------------


@dataclass
class MomentBoundsReport:
    checks: list[IdentityCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def to_dict(self) -> dict:
        return {"pass": bool(self.ok), "checks": [c.to_dict() for c in self.checks]}


def _one_sided(rep: MomentBoundsReport, name: str, lhs_b: np.ndarray, rhs_b: np.ndarray) -> None:
    """Bound check on per-batch differences: the bound may hold with
    equality (single-regime configs), so both sides must come from the
    same batches for the noise to cancel."""
    diff = lhs_b - rhs_b
    mean, se, _ = batch_ci(diff)
    slack = 3.0 * se if np.isfinite(se) and se > 0.0 else 1e-12
    rep.checks.append(
        IdentityCheck(
            name,
            mean,
            slack,
            mean <= slack,
            f"lhs {float(lhs_b.mean()):.6g}, bound {float(rhs_b.mean()):.6g}",
        )
    )


def moment_bounds(result: StationaryResult) -> MomentBoundsReport:
    """One-sided tail and moment bounds for the stationary residual
    clocks, with closed-form transform/moment factors and the event rate
    estimated batch-by-batch."""
    rep = MomentBoundsReport()
    cfg = result.cfg
    arr, svc = cfg.model.arrival, cfg.model.service
    alpha_b = result.palm.alpha_e_batches
    min_lam = min(cfg.lam)
    min_mu = min(cfg.mu)
    mu1 = cfg.mu[0]

    for g, y in enumerate(result.tail_grid):
        _one_sided(
            rep,
            f"arrival_clock_tail(y={y:g})",
            result.re_tail_batches[:, g],
            alpha_b / min_lam * partial_excess(arr, float(y)),
        )
        _one_sided(
            rep,
            f"service_clock_tail(y={y:g})",
            result.rd_tail_batches[:, g],
            (mu1 * survival(svc, float(y)) + alpha_b * partial_excess(svc, float(y))) / min_mu,
        )

    for k in (1, 2):
        _one_sided(
            rep,
            f"arrival_clock_moment(k={k})",
            (k + 1) * result.re_moments_batches[:, k - 1],
            alpha_b / min_lam * truncated_moment(arr, math.inf, k + 1),
        )
        _one_sided(
            rep,
            f"service_clock_moment(k={k})",
            (k + 1) * result.rd_moments_batches[:, k - 1],
            (k + 1) * truncated_moment(svc, math.inf, k)
            + alpha_b / min_mu * truncated_moment(svc, math.inf, k + 1),
        )
    return rep


# -- exponent solver -----------------------------------------------------------


@dataclass(frozen=True)
class EtaZetaSolution:
    theta: float
    n: float
    cutoff: float
    eta: float
    zeta: float
    eta_residual: float
    zeta_residual: float

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "n": self.n,
            "cutoff": self.cutoff,
            "eta": self.eta,
            "zeta": self.zeta,
            "eta_residual": self.eta_residual,
            "zeta_residual": self.zeta_residual,
        }


def _solve_exponent(spec: RenewalSpec, cutoff: float, target: float) -> float:
    """Root of exp(target) * E[exp(-s (T ^ cutoff))] = 1 in s."""
    if target == 0.0:
        return 0.0

    def g(s: float) -> float:
        return math.log(truncated_laplace(spec, cutoff, s)) + target

    if target > 0.0:
        lo, hi = 0.0, 1.0
        for _ in range(200):
            if g(hi) < 0.0:
                break
            lo, hi = hi, hi * 2.0
        else:
            raise RuntimeError("exponent bracket failure (positive side)")
    else:
        hi, lo = 0.0, -1.0
        invalid = None
        for _ in range(400):
            try:
                v = g(lo)
            except (OverflowError, ValueError):
                invalid = lo
                lo = 0.5 * (lo + hi)
                continue
            if v > 0.0:
                break
            hi = lo
            lo = 0.5 * (lo + invalid) if invalid is not None else lo * 2.0
        else:
            raise RuntimeError("exponent bracket failure (negative side)")
    root = brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    return float(root)


def solve_eta_zeta(
    arrival: RenewalSpec, service: RenewalSpec, n: float, theta: float
) -> EtaZetaSolution:
    """Solve the two truncated-transform equations at cutoff sqrt(n)
    (untruncated when n is inf) to residual 1e-12."""
    cutoff = math.inf if math.isinf(n) else math.sqrt(n)
    eta = _solve_exponent(arrival, cutoff, theta)
    zeta = _solve_exponent(service, cutoff, -theta)
    res_e = abs(math.exp(theta) * truncated_laplace(arrival, cutoff, eta) - 1.0)
    res_z = abs(math.exp(-theta) * truncated_laplace(service, cutoff, zeta) - 1.0)
    if res_e > 1e-12 or res_z > 1e-12:
        raise RuntimeError(f"solver residuals too large: {res_e:.3g}, {res_z:.3g}")
    return EtaZetaSolution(
        theta=theta,
        n=n,
        cutoff=cutoff,
        eta=eta,
        zeta=zeta,
        eta_residual=res_e,
        zeta_residual=res_z,
    )


def expansion_error(arrival: RenewalSpec, service: RenewalSpec, n: float, theta: float) -> tuple[float, float]:
    """Error of the second-order small-argument expansions of both
    exponents at scaled argument theta / sqrt(n)."""
    root = math.sqrt(n)
    sol = solve_eta_zeta(arrival, service, n, theta / root)
    ref_e = theta / root + 0.5 * arrival.variance * theta**2 / n
    ref_z = -theta / root + 0.5 * service.variance * theta**2 / n
    return abs(sol.eta - ref_e), abs(sol.zeta - ref_z)


# -- pathwise renewal decomposition ---------------------------------------------


@dataclass
class RenewalTrace:
    """Delayed renewal process: first point at the initial delay, then
    unit-mean increments.  Counting times are materialized at build time
    (extended precision, so prefix roundoff never masks a real fault) and
    the identity check treats them as independent recorded data."""

    spec: RenewalSpec
    initial_delay: float
    increments: np.ndarray
    points: np.ndarray


def renewal_trace(
    spec: RenewalSpec, events: int, seed: int = 0, initial_delay: float | None = None
) -> RenewalTrace:
    rng = stream(seed, 0)
    t0 = sample(spec, rng) if initial_delay is None else float(initial_delay)
    incs = sample_many(spec, rng, events)
    pts = np.longdouble(t0) + np.concatenate(
        ([np.longdouble(0.0)], np.cumsum(incs[:-1].astype(np.longdouble)))
    )
    return RenewalTrace(spec=spec, initial_delay=t0, increments=incs, points=pts)


@dataclass
class DmReport:
    max_violation: float
    worst_t: float
    points_checked: int

    @property
    def ok(self) -> bool:
        return self.max_violation < 1e-9

    def to_dict(self) -> dict:
        return {
            "max_violation": self.max_violation,
            "worst_t": self.worst_t,
            "points_checked": self.points_checked,
            "pass": bool(self.ok),
        }


def daley_miyazawa_check(trace: RenewalTrace, t_grid: np.ndarray | None = None) -> DmReport:
    """Verify the pathwise decomposition

        count(t) = t + residual(t) - initial_delay + centered_sum(t)

    where centered_sum adds (1 - increment) over counted events.  This is
    an algebraic identity, so violations indicate bookkeeping errors; the
    two running sums are accumulated independently in extended precision
    so float roundoff over 1e5-term prefixes stays far below the 1e-9
    reporting threshold."""
    pts = trace.points
    if t_grid is None:
        hi = float(pts[-2])
        t_grid = np.concatenate(
            [np.linspace(0.0, hi, 1024), pts[pts <= hi][:2048].astype(float)]
        )
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid >= pts[-1]):
        raise ValueError("grid must stay below the last counting time")
    centered = np.concatenate(
        ([np.longdouble(0.0)], np.cumsum(1.0 - trace.increments.astype(np.longdouble)))
    )
    grid_l = t_grid.astype(np.longdouble)
    count = np.searchsorted(pts, grid_l, side="right")
    resid = pts[count] - grid_l
    rhs = grid_l + resid - np.longdouble(trace.initial_delay) + centered[count]
    gap = np.abs(count - rhs)
    i = int(np.argmax(gap))
    return DmReport(
        max_violation=float(gap[i]), worst_t=float(t_grid[i]), points_checked=t_grid.size
    )


def martingale_drift(spec: RenewalSpec, events: int, replicas: int, seed: int = 0) -> tuple[float, float]:
    """Mean and SE over replicas of centered_sum(end)/elapsed: a mean-zero
    sanity check for the centered term."""
    vals = []
    for r in range(replicas):
        rng = stream(seed, r)
        incs = sample_many(spec, rng, events)
        t_end = float(np.sum(incs))
        vals.append(float(np.sum(1.0 - incs)) / t_end)
    v = np.asarray(vals)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(replicas))


# -- distribution comparisons ----------------------------------------------------


@dataclass
class ComparisonReport:
    ks: float
    wasserstein1: float
    mean_gap: float
    second_moment_gap: float

    def to_dict(self) -> dict:
        return {
            "ks": self.ks,
            "wasserstein1": self.wasserstein1,
            "mean_gap": self.mean_gap,
            "second_moment_gap": self.second_moment_gap,
        }


def compare_distributions(a, b) -> ComparisonReport:
    """KS and Wasserstein-1 between two laws (each empirical or the
    closed-form limit); plug-in values, no p-values for time-correlated
    simulation output."""
    if isinstance(a, EmpiricalDistribution):
        emp, other = a, b
    elif isinstance(b, EmpiricalDistribution):
        emp, other = b, a
    else:
        raise TypeError("at least one side must be an empirical distribution")
    ks = ks_distance(emp, other)
    w1 = wasserstein1(emp, other)
    if isinstance(other, (EmpiricalDistribution, LimitDistribution)):
        m1 = other.moment(1)
        m2 = other.moment(2)
    else:
        m1, m2 = other.moment(1), other.moment(2)
    return ComparisonReport(
        ks=ks,
        wasserstein1=w1,
        mean_gap=abs(emp.moment(1) - m1),
        second_moment_gap=abs(emp.moment(2) - m2),
    )
