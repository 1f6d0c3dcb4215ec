"""Exact event-driven simulation of the pre-limit Markov process.

State is (queue length, nominal residual arrival work, nominal residual
service work).  Between events both clocks drain linearly at the
level-dependent speeds, so the next event time is exact arithmetic and no
time discretization appears anywhere.  The service clock freezes while the
system is empty; at a simultaneous arrival/departure the arrival is
processed first and the intermediate state is materialized as its own
event record.

Two engines share semantics and random streams bit-for-bit: a compiled
kernel for long stationary runs and a pure-Python `step` used as the
reference implementation in tests.
"""

from __future__ import annotations

import math
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .distributions import draw_increment, sample, stream
from .model import PrelimitConfig
from .stats import EmpiricalDistribution, batch_ci

__all__ = [
    "QueueState",
    "EventRecord",
    "EventLog",
    "PalmEstimates",
    "StationaryResult",
    "TrajectoryReport",
    "initial_state",
    "step",
    "run_stationary",
    "run_logged",
    "validate_trajectory",
    "DEFAULT_TAIL_GRID",
]

DEFAULT_TAIL_GRID = np.array([0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0])


@dataclass
class QueueState:
    """Markov state: queue length, residual clock values, wall clock."""

    length: int
    r_arrival: float
    r_service: float
    t: float = 0.0


@dataclass(frozen=True)
class EventRecord:
    time: float
    kind: str  # "arrival" | "departure"
    length_before: int
    re_before: float
    rd_before: float
    draw: float  # value refilled into the fired clock

    @property
    def length_after(self) -> int:
        return self.length_before + (1 if self.kind == "arrival" else -1)

    @property
    def re_after(self) -> float:
        return self.draw if self.kind == "arrival" else self.re_before

    @property
    def rd_after(self) -> float:
        return self.rd_before if self.kind == "arrival" else self.draw


def initial_state(
    cfg: PrelimitConfig, rng_arrival: np.random.Generator, rng_service: np.random.Generator
) -> QueueState:
    """Empty system with fresh initial clock draws."""
    return QueueState(
        length=0,
        r_arrival=sample(cfg.model.arrival, rng_arrival),
        r_service=sample(cfg.model.service, rng_service),
    )


def _rates_at(cfg: PrelimitConfig, length: int) -> tuple[float, float]:
    lev = cfg.partition().level_of(length) - 1
    a = cfg.lam[lev]
    s = cfg.mu[lev] if length >= 1 else 0.0
    return a, s


def step(
    state: QueueState,
    cfg: PrelimitConfig,
    rng_arrival: np.random.Generator,
    rng_service: np.random.Generator,
) -> tuple[QueueState, list[EventRecord]]:
    """Advance to the next event; on an exact clock tie both the arrival
    and the simultaneous departure are emitted (arrival first)."""
    if state.r_arrival <= 0.0 or (state.length >= 1 and state.r_service < 0.0):
        raise RuntimeError("nonpositive residual: corrupted state")
    a, s = _rates_at(cfg, state.length)
    ta = state.r_arrival / a
    ts = state.r_service / s if s > 0.0 else math.inf
    records: list[EventRecord] = []
    if ta <= ts:
        dt = ta
        t = state.t + dt
        rd = state.r_service - s * dt
        tie = ta == ts
        if tie:
            rd = 0.0
        if rd < 0.0:
            rd = 0.0
        draw = sample(cfg.model.arrival, rng_arrival)
        records.append(
            EventRecord(t, "arrival", state.length, 0.0, rd, draw)
        )
        length = state.length + 1
        re = draw
        if tie:
            draw_s = sample(cfg.model.service, rng_service)
            records.append(EventRecord(t, "departure", length, re, 0.0, draw_s))
            length -= 1
            rd = draw_s
        return QueueState(length, re, rd, t), records
    dt = ts
    t = state.t + dt
    re = state.r_arrival - a * dt
    if re < 0.0:
        re = 0.0
    draw = sample(cfg.model.service, rng_service)
    records.append(EventRecord(t, "departure", state.length, re, 0.0, draw))
    return QueueState(state.length - 1, re, draw, t), records


# -- compiled kernel ---------------------------------------------------------


@njit(cache=True, nogil=True)
def _sim_kernel(
    lam,
    mu,
    bounds,
    bstates,
    acode,
    ap1,
    ap2,
    ap3,
    scode,
    sp1,
    sp2,
    sp3,
    total_events,
    warmup_events,
    nb,
    lmax,
    tail_grid,
    trunc,
    L0,
    re0,
    rd0,
    rng_a,
    rng_s,
    log_kind,
    log_time,
    log_len,
    log_re,
    log_rd,
    log_draw,
):
    K = lam.shape[0]
    G = tail_grid.shape[0]
    post = total_events - warmup_events
    width = lmax + 2  # slot lmax+1 collects overflow

    ti_L = np.zeros((nb, width))
    arr_cnt = np.zeros((nb, width))
    dep_cnt = np.zeros((nb, width))
    time_b = np.zeros(nb)
    lsum_b = np.zeros(nb)
    re_mom = np.zeros((nb, 2))
    rd_mom = np.zeros((nb, 2))
    tail_e = np.zeros((nb, G))
    tail_d = np.zeros((nb, G))
    e_rd = np.zeros((nb, K - 1, 2))
    d_re = np.zeros((nb, K - 1, 2))
    n_arr = np.zeros(nb, dtype=np.int64)
    n_dep = np.zeros(nb, dtype=np.int64)

    n_ties = 0
    do_log = log_kind.shape[0] > 0
    L = L0
    re = re0
    rd = rd0
    t = 0.0
    pending_dep = False
    ev = 0
    while ev < total_events:
        lev = K - 1
        for i in range(K - 1):
            if L <= bounds[i]:
                lev = i
                break
        a = lam[lev]
        s = mu[lev] if L >= 1 else 0.0

        if pending_dep:
            pending_dep = False
            kind = 1
            dt = 0.0
            re_d = re
            rd_d = rd  # already exactly zero from the tie
        else:
            ta = re / a
            ts = rd / s if s > 0.0 else np.inf
            tie = False
            if ta <= ts:
                kind = 0
                dt = ta
                tie = ta == ts
            else:
                kind = 1
                dt = ts
            if ev >= warmup_events and dt > 0.0:
                j = ev - warmup_events
                b = j * nb // post
                li = L if L <= lmax else lmax + 1
                ti_L[b, li] += dt
                time_b[b] += dt
                lsum_b[b] += L * dt
                re_end = re - a * dt
                if re_end < 0.0:
                    re_end = 0.0
                re_mom[b, 0] += (re * re - re_end * re_end) / (2.0 * a)
                re_mom[b, 1] += (re * re * re - re_end * re_end * re_end) / (3.0 * a)
                if s > 0.0:
                    rd_end = rd - s * dt
                    if rd_end < 0.0:
                        rd_end = 0.0
                    rd_mom[b, 0] += (rd * rd - rd_end * rd_end) / (2.0 * s)
                    rd_mom[b, 1] += (rd * rd * rd - rd_end * rd_end * rd_end) / (3.0 * s)
                else:
                    rd_mom[b, 0] += rd * dt
                    rd_mom[b, 1] += rd * rd * dt
                for g in range(G):
                    y = tail_grid[g]
                    if re > y:
                        u = (re - y) / a
                        tail_e[b, g] += u if u < dt else dt
                    if rd > y:
                        if s > 0.0:
                            u = (rd - y) / s
                            tail_d[b, g] += u if u < dt else dt
                        else:
                            tail_d[b, g] += dt
            re_d = re - a * dt
            rd_d = rd - s * dt
            if kind == 0:
                re_d = 0.0
                if tie:
                    rd_d = 0.0
                    pending_dep = True
                    n_ties += 1
            else:
                rd_d = 0.0
            if re_d < 0.0:
                re_d = 0.0
            if rd_d < 0.0:
                rd_d = 0.0

        t = t + dt
        if ev >= warmup_events:
            b = (ev - warmup_events) * nb // post
        else:
            b = -1

        if kind == 0:
            draw = draw_increment(acode, ap1, ap2, ap3, rng_a)
            if b >= 0:
                n_arr[b] += 1
                li = L if L <= lmax else lmax + 1
                arr_cnt[b, li] += 1.0
                for i in range(K - 1):
                    if L == bstates[i]:
                        v = rd_d if rd_d < trunc else trunc
                        e_rd[b, i, 0] += v
                        e_rd[b, i, 1] += v * v
            if do_log and ev < log_kind.shape[0]:
                log_kind[ev] = 0
                log_time[ev] = t
                log_len[ev] = L
                log_re[ev] = 0.0
                log_rd[ev] = rd_d
                log_draw[ev] = draw
            L = L + 1
            re = draw
            rd = rd_d
        else:
            draw = draw_increment(scode, sp1, sp2, sp3, rng_s)
            La = L - 1
            if b >= 0:
                n_dep[b] += 1
                li = La if La <= lmax else lmax + 1
                dep_cnt[b, li] += 1.0
                for i in range(K - 1):
                    if La == bstates[i]:
                        v = re_d if re_d < trunc else trunc
                        d_re[b, i, 0] += v
                        d_re[b, i, 1] += v * v
            if do_log and ev < log_kind.shape[0]:
                log_kind[ev] = 1
                log_time[ev] = t
                log_len[ev] = L
                log_re[ev] = re_d
                log_rd[ev] = 0.0
                log_draw[ev] = draw
            L = La
            re = re_d
            rd = draw
        ev += 1

    return (
        ti_L,
        arr_cnt,
        dep_cnt,
        time_b,
        lsum_b,
        re_mom,
        rd_mom,
        tail_e,
        tail_d,
        e_rd,
        d_re,
        n_arr,
        n_dep,
        n_ties,
        L,
        re,
        rd,
        t,
    )


def _default_lmax(cfg: PrelimitConfig) -> int:
    beta_k = cfg.model.beta[-1]
    b_k = cfg.model.params.drift[-1]
    mu_k = cfg.mu[-1]
    span = max(60.0 / abs(beta_k), 60.0 * mu_k / abs(b_k)) * cfg.sqrt_n
    lmax = int(math.ceil(cfg.levels[-1] + span)) + 64
    if lmax > 2_000_000:
        raise ValueError("state histogram would be enormous; check stability margins")
    return lmax


def _kernel_args(cfg: PrelimitConfig):
    acode, ap1, ap2, ap3 = cfg.model.arrival.numba_params()
    scode, sp1, sp2, sp3 = cfg.model.service.numba_params()
    return (
        np.asarray(cfg.lam, dtype=np.float64),
        np.asarray(cfg.mu, dtype=np.float64),
        np.asarray(cfg.levels, dtype=np.float64),
        np.asarray(cfg.boundary_states, dtype=np.int64),
        acode,
        ap1,
        ap2,
        ap3,
        scode,
        sp1,
        sp2,
        sp3,
    )


def _replica_streams(seed: int, replica: int):
    return stream(seed, replica, 0), stream(seed, replica, 1)


@dataclass
class PalmEstimates:
    """Event-embedded laws: the state just before arrivals and just after
    departures, plus the event rates and boundary-state quantities."""

    alpha_e: float
    alpha_d: float
    alpha_e_batches: np.ndarray
    alpha_d_batches: np.ndarray
    arrival_pre: EmpiricalDistribution
    departure_post: EmpiricalDistribution
    boundary_states: tuple[int, ...]
    e_boundary_mass: np.ndarray
    d_boundary_mass: np.ndarray
    e_rd_trunc_at_boundary: np.ndarray
    d_re_trunc_at_boundary: np.ndarray

    def alpha_gap_z(self) -> float:
        diff = self.alpha_e_batches - self.alpha_d_batches
        mean, se, _ = batch_ci(diff)
        if not np.isfinite(se) or se == 0.0:
            return 0.0
        return abs(mean) / se


@dataclass
class StationaryResult:
    """Merged stationary-regime estimates of one configuration."""

    cfg: PrelimitConfig
    events: int
    warmup: int
    replicas: int
    seed: int
    elapsed_time: float
    wall_time: float
    scaled: EmpiricalDistribution
    counts: EmpiricalDistribution
    palm: PalmEstimates
    level_mass: np.ndarray
    level_mass_batches: np.ndarray
    p_empty: float
    p_empty_batches: np.ndarray
    re_moments: np.ndarray
    rd_moments: np.ndarray
    re_moments_batches: np.ndarray
    rd_moments_batches: np.ndarray
    tail_grid: np.ndarray
    re_tail: np.ndarray
    rd_tail: np.ndarray
    re_tail_batches: np.ndarray
    rd_tail_batches: np.ndarray
    mean_scaled: float
    n_ties: int
    overflow_time: float

    def p_empty_ci(self) -> tuple[float, float, float]:
        return batch_ci(self.p_empty_batches)

    def summary(self) -> dict:
        _, p0_se, _ = self.p_empty_ci()
        _, ae_se, _ = batch_ci(self.palm.alpha_e_batches)
        _, ad_se, _ = batch_ci(self.palm.alpha_d_batches)
        return {
            "n": self.cfg.n,
            "events": self.events,
            "warmup": self.warmup,
            "replicas": self.replicas,
            "seed": self.seed,
            "elapsed_time": self.elapsed_time,
            "wall_time_s": self.wall_time,
            "alpha_e": self.palm.alpha_e,
            "alpha_e_se": ae_se,
            "alpha_d": self.palm.alpha_d,
            "alpha_d_se": ad_se,
            "level_mass": [float(x) for x in self.level_mass],
            "p_empty": self.p_empty,
            "p_empty_se": p0_se,
            "sqrt_n_p_empty": self.cfg.sqrt_n * self.p_empty,
            "mean_scaled_length": self.mean_scaled,
            "re_moments": [float(x) for x in self.re_moments],
            "rd_moments": [float(x) for x in self.rd_moments],
            "n_ties": self.n_ties,
            "overflow_time": self.overflow_time,
        }


def _level_index_of_states(cfg: PrelimitConfig, width: int) -> np.ndarray:
    states = np.arange(width)
    idx = np.searchsorted(np.asarray(cfg.levels), states, side="left")
    idx[-1] = cfg.k - 1  # overflow slot belongs to the top level
    return idx


def run_stationary(
    cfg: PrelimitConfig,
    events: int,
    warmup: int | None = None,
    batches: int = 32,
    seed: int = 0,
    replicas: int = 1,
    workers: int = 1,
    tail_grid: np.ndarray | None = None,
    lmax: int | None = None,
) -> StationaryResult:
    """Time-stationary and Palm estimates from `replicas` independent runs
    of `events` events each, discarding `warmup` events per replica
    (default 10%).  Merging is done in replica order, so results do not
    depend on scheduling."""
    if events < 10:
        raise ValueError("need at least 10 events")
    if warmup is None:
        warmup = events // 10
    if not 0 <= warmup < events:
        raise ValueError("warmup must be smaller than the event budget")
    if batches < 2 or events - warmup < batches:
        raise ValueError("need at least two nonempty batches")
    if tail_grid is None:
        tail_grid = DEFAULT_TAIL_GRID
    tail_grid = np.asarray(tail_grid, dtype=float)
    if lmax is None:
        lmax = _default_lmax(cfg)
    base = _kernel_args(cfg)
    empty_log = (
        np.empty(0, dtype=np.int8),
        np.empty(0),
        np.empty(0, dtype=np.int64),
        np.empty(0),
        np.empty(0),
        np.empty(0),
    )

    def one(replica: int):
        rng_a, rng_s = _replica_streams(seed, replica)
        st = initial_state(cfg, rng_a, rng_s)
        return _sim_kernel(
            *base,
            events,
            warmup,
            batches,
            lmax,
            tail_grid,
            cfg.sqrt_n,
            st.length,
            st.r_arrival,
            st.r_service,
            rng_a,
            rng_s,
            *empty_log,
        )

    t0 = _time.perf_counter()
    if workers > 1 and replicas > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(one, range(replicas)))
    else:
        outs = [one(r) for r in range(replicas)]
    wall = _time.perf_counter() - t0

    ti_L = np.vstack([o[0] for o in outs])
    arr_cnt = np.vstack([o[1] for o in outs])
    dep_cnt = np.vstack([o[2] for o in outs])
    time_b = np.concatenate([o[3] for o in outs])
    lsum_b = np.concatenate([o[4] for o in outs])
    re_mom = np.vstack([o[5] for o in outs])
    rd_mom = np.vstack([o[6] for o in outs])
    tail_e = np.vstack([o[7] for o in outs])
    tail_d = np.vstack([o[8] for o in outs])
    e_rd = np.vstack([o[9] for o in outs])
    d_re = np.vstack([o[10] for o in outs])
    n_arr = np.concatenate([o[11] for o in outs])
    n_dep = np.concatenate([o[12] for o in outs])
    n_ties = int(sum(o[13] for o in outs))

    total_time = float(time_b.sum())
    width = lmax + 2
    lev_idx = _level_index_of_states(cfg, width)
    k = cfg.k
    level_mass_b = np.zeros((ti_L.shape[0], k))
    for lev in range(k):
        cols = lev_idx == lev
        level_mass_b[:, lev] = ti_L[:, cols].sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        level_mass_batches = level_mass_b / time_b[:, None]
    level_mass = level_mass_b.sum(axis=0) / total_time
    p_empty_batches = np.divide(
        ti_L[:, 0], time_b, out=np.zeros_like(time_b), where=time_b > 0
    )
    p_empty = float(ti_L[:, 0].sum() / total_time)
    overflow_time = float(ti_L[:, lmax + 1].sum())

    # trim trailing all-zero states for compact supports
    occupied = np.nonzero(ti_L.sum(axis=0) > 0)[0]
    hi = int(occupied.max()) + 1
    counts_dist = EmpiricalDistribution(np.arange(hi, dtype=float), ti_L[:, :hi])
    scaled_dist = EmpiricalDistribution(np.arange(hi, dtype=float) / cfg.sqrt_n, ti_L[:, :hi])

    occ_e = np.nonzero(arr_cnt.sum(axis=0) > 0)[0]
    hi_e = int(occ_e.max()) + 1
    arrival_pre = EmpiricalDistribution(np.arange(hi_e, dtype=float), arr_cnt[:, :hi_e])
    occ_d = np.nonzero(dep_cnt.sum(axis=0) > 0)[0]
    hi_d = int(occ_d.max()) + 1
    departure_post = EmpiricalDistribution(np.arange(hi_d, dtype=float), dep_cnt[:, :hi_d])

    tot_arr = float(n_arr.sum())
    tot_dep = float(n_dep.sum())
    bs = cfg.boundary_states
    e_mass = np.array([arr_cnt[:, s].sum() / tot_arr for s in bs])
    d_mass = np.array([dep_cnt[:, s].sum() / tot_dep for s in bs])
    palm = PalmEstimates(
        alpha_e=tot_arr / total_time,
        alpha_d=tot_dep / total_time,
        alpha_e_batches=np.divide(
            n_arr, time_b, out=np.zeros_like(time_b), where=time_b > 0
        ),
        alpha_d_batches=np.divide(
            n_dep, time_b, out=np.zeros_like(time_b), where=time_b > 0
        ),
        arrival_pre=arrival_pre,
        departure_post=departure_post,
        boundary_states=bs,
        e_boundary_mass=e_mass,
        d_boundary_mass=d_mass,
        e_rd_trunc_at_boundary=e_rd[:, :, 0].sum(axis=0) / tot_arr,
        d_re_trunc_at_boundary=d_re[:, :, 0].sum(axis=0) / tot_dep,
    )

    with np.errstate(invalid="ignore", divide="ignore"):
        re_b = re_mom / time_b[:, None]
        rd_b = rd_mom / time_b[:, None]
        te_b = tail_e / time_b[:, None]
        td_b = tail_d / time_b[:, None]
    mean_scaled = float(lsum_b.sum() / total_time / cfg.sqrt_n)

    return StationaryResult(
        cfg=cfg,
        events=events,
        warmup=warmup,
        replicas=replicas,
        seed=seed,
        elapsed_time=total_time,
        wall_time=wall,
        scaled=scaled_dist,
        counts=counts_dist,
        palm=palm,
        level_mass=level_mass,
        level_mass_batches=level_mass_batches,
        p_empty=p_empty,
        p_empty_batches=p_empty_batches,
        re_moments=re_mom.sum(axis=0) / total_time,
        rd_moments=rd_mom.sum(axis=0) / total_time,
        re_moments_batches=re_b,
        rd_moments_batches=rd_b,
        tail_grid=tail_grid,
        re_tail=tail_e.sum(axis=0) / total_time,
        rd_tail=tail_d.sum(axis=0) / total_time,
        re_tail_batches=te_b,
        rd_tail_batches=td_b,
        mean_scaled=mean_scaled,
        n_ties=n_ties,
        overflow_time=overflow_time,
    )


@dataclass
class EventLog:
    """Per-event records of one replica, arrival-first at ties."""

    cfg: PrelimitConfig
    seed: int
    replica: int
    initial: QueueState
    kind: np.ndarray  # 0 arrival, 1 departure
    time: np.ndarray
    length_before: np.ndarray
    re_before: np.ndarray
    rd_before: np.ndarray
    draw: np.ndarray
    n_ties: int = 0

    def __len__(self) -> int:
        return self.kind.size

    @property
    def n_arrivals(self) -> int:
        return int(np.sum(self.kind == 0))

    @property
    def n_departures(self) -> int:
        return int(np.sum(self.kind == 1))

    def length_after(self) -> np.ndarray:
        return self.length_before + np.where(self.kind == 0, 1, -1)

    def re_after(self) -> np.ndarray:
        return np.where(self.kind == 0, self.draw, self.re_before)

    def rd_after(self) -> np.ndarray:
        return np.where(self.kind == 0, self.rd_before, self.draw)

    def record(self, i: int) -> EventRecord:
        return EventRecord(
            time=float(self.time[i]),
            kind="arrival" if self.kind[i] == 0 else "departure",
            length_before=int(self.length_before[i]),
            re_before=float(self.re_before[i]),
            rd_before=float(self.rd_before[i]),
            draw=float(self.draw[i]),
        )

    def to_csv(self, path, cap: int = 100_000) -> None:
        m = min(len(self), cap)
        header = "index,time,kind,length_before,re_before,rd_before,refill_draw"
        rows = np.column_stack(
            [
                np.arange(m),
                self.time[:m],
                self.kind[:m],
                self.length_before[:m],
                self.re_before[:m],
                self.rd_before[:m],
                self.draw[:m],
            ]
        )
        np.savetxt(
            path,
            rows,
            delimiter=",",
            header=header,
            comments="",
            fmt=["%d", "%.17g", "%d", "%d", "%.17g", "%.17g", "%.17g"],
        )


def run_logged(
    cfg: PrelimitConfig,
    events: int,
    seed: int = 0,
    replica: int = 0,
    cap: int = 5_000_000,
) -> EventLog:
    """Run one replica and keep the full event log (bounded length)."""
    if events > cap:
        raise ValueError(f"log of {events} events exceeds the cap {cap}")
    base = _kernel_args(cfg)
    rng_a, rng_s = _replica_streams(seed, replica)
    st = initial_state(cfg, rng_a, rng_s)
    log_kind = np.zeros(events, dtype=np.int8)
    log_time = np.zeros(events)
    log_len = np.zeros(events, dtype=np.int64)
    log_re = np.zeros(events)
    log_rd = np.zeros(events)
    log_draw = np.zeros(events)
    out = _sim_kernel(
        *base,
        events,
        0,
        2,
        8,
        np.empty(0),
        cfg.sqrt_n,
        st.length,
        st.r_arrival,
        st.r_service,
        rng_a,
        rng_s,
        log_kind,
        log_time,
        log_len,
        log_re,
        log_rd,
        log_draw,
    )
    return EventLog(
        cfg=cfg,
        seed=seed,
        replica=replica,
        initial=st,
        kind=log_kind,
        time=log_time,
        length_before=log_len,
        re_before=log_re,
        rd_before=log_rd,
        draw=log_draw,
        n_ties=int(out[13]),
    )


@dataclass
class CheckResult:
    ok: bool
    first_violation: int | None = None
    detail: str = ""


@dataclass
class TrajectoryReport:
    checks: dict[str, CheckResult] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks.values())


def validate_trajectory(log: EventLog) -> TrajectoryReport:
    """Assert the pathwise identities every valid run must satisfy:
    the counting identity, exact clock refills against independently
    regenerated streams, the frozen service clock on empty stretches, and
    busy-period work conservation."""
    rep = TrajectoryReport()
    cfg = log.cfg
    kind = log.kind
    la = log.length_after()

    # queue length = initial + arrivals - departures, at every event
    ne = np.cumsum(kind == 0)
    nd = np.cumsum(kind == 1)
    expect = log.initial.length + ne - nd
    bad = np.nonzero(la != expect)[0]
    rep.checks["counting_identity"] = CheckResult(
        ok=bad.size == 0,
        first_violation=int(bad[0]) if bad.size else None,
        detail=f"{bad.size} mismatches",
    )

    # refills replay the dedicated streams bit-for-bit
    rng_a, rng_s = _replica_streams(log.seed, log.replica)
    init_re = sample(cfg.model.arrival, rng_a)
    init_rd = sample(cfg.model.service, rng_s)
    ok_init = init_re == log.initial.r_arrival and init_rd == log.initial.r_service
    arr_idx = np.nonzero(kind == 0)[0]
    dep_idx = np.nonzero(kind == 1)[0]
    arr_draws = np.array([sample(cfg.model.arrival, rng_a) for _ in range(arr_idx.size)])
    dep_draws = np.array([sample(cfg.model.service, rng_s) for _ in range(dep_idx.size)])
    bad_a = np.nonzero(log.draw[arr_idx] != arr_draws)[0]
    bad_d = np.nonzero(log.draw[dep_idx] != dep_draws)[0]
    rep.checks["arrival_refills"] = CheckResult(
        ok=ok_init and bad_a.size == 0,
        first_violation=int(arr_idx[bad_a[0]]) if bad_a.size else None,
        detail="initial draw mismatch" if not ok_init else f"{bad_a.size} mismatches",
    )
    rep.checks["service_refills"] = CheckResult(
        ok=ok_init and bad_d.size == 0,
        first_violation=int(dep_idx[bad_d[0]]) if bad_d.size else None,
        detail="initial draw mismatch" if not ok_init else f"{bad_d.size} mismatches",
    )

    # service clock untouched across empty stretches
    rd_after = log.rd_after()
    empty = np.nonzero(la[:-1] == 0)[0]
    frozen_bad = empty[log.rd_before[empty + 1] != rd_after[empty]]
    rep.checks["frozen_when_empty"] = CheckResult(
        ok=frozen_bad.size == 0,
        first_violation=int(frozen_bad[0]) if frozen_bad.size else None,
        detail=f"{frozen_bad.size} drifts during empty periods",
    )

    # between consecutive firings of a clock, the work drained at the
    # level-dependent speed equals the consumed draw
    lam = np.asarray(cfg.lam)
    mu = np.asarray(cfg.mu)
    lev_after = np.searchsorted(np.asarray(cfg.levels), la, side="left")
    lev_after[la > cfg.levels[-1]] = cfg.k - 1
    dt = np.diff(log.time)
    a_rate = lam[lev_after[:-1]]
    s_rate = np.where(la[:-1] >= 1, mu[lev_after[:-1]], 0.0)
    drained_e = np.concatenate(([0.0], a_rate * dt))
    drained_d = np.concatenate(([0.0], s_rate * dt))
    ce = np.cumsum(drained_e)
    cd = np.cumsum(drained_d)
    worst = 0.0
    worst_idx = None
    if arr_idx.size >= 2:
        spans = ce[arr_idx[1:]] - ce[arr_idx[:-1]]
        gap = np.abs(spans - log.draw[arr_idx[:-1]])
        worst = float(gap.max())
        if worst > 1e-9:
            worst_idx = int(arr_idx[np.argmax(gap)])
    worst_d = 0.0
    if dep_idx.size >= 2:
        spans = cd[dep_idx[1:]] - cd[dep_idx[:-1]]
        gap = np.abs(spans - log.draw[dep_idx[:-1]])
        worst_d = float(gap.max())
        if worst_d > 1e-9 and worst_idx is None:
            worst_idx = int(dep_idx[np.argmax(gap)])
    rep.checks["work_conservation"] = CheckResult(
        ok=worst <= 1e-9 and worst_d <= 1e-9,
        first_violation=worst_idx,
        detail=f"max arrival-span error {worst:.3g}, service {worst_d:.3g}",
    )

    # residual sign conventions
    ok_re = bool(np.all(log.re_before[kind == 0] == 0.0)) and bool(
        np.all(log.re_before >= 0.0)
    )
    ok_rd = bool(np.all(log.rd_before[kind == 1] == 0.0)) and bool(
        np.all(log.rd_before >= 0.0)
    )
    rep.checks["residual_signs"] = CheckResult(ok=ok_re and ok_rd)
    return rep
