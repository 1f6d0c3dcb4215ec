"""Experiment driver: sweeps over the scaling index, three-way comparison
between simulation, closed form, and diffusion, and result persistence.

All randomness derives from one master seed: replica r of the run at index
n uses streams keyed (seed, n, r, role), so a sweep is a single
reproducible object and replica merge order cannot change any output.
"""

from __future__ import annotations

import csv
import json
import math
import time as _time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import des
from .limit import build_limit
from .model import QueueModel, build_prelimit, model_from_dict, model_to_dict
from .sde import diffusion_params, run_sde_stationary
from .stats import batch_ci, ks_distance, wasserstein1

__all__ = [
    "SweepPlan",
    "SweepRow",
    "SweepResult",
    "run_sweep",
    "save_result",
    "load_result",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = "mlqueue-sweep-1"


@dataclass(frozen=True)
class SweepPlan:
    """Heavy-traffic probe: one stationary run per scaling index."""

    model: QueueModel
    n_values: tuple[int, ...]
    events_per_n: dict[int, int] = field(default_factory=dict)
    replicas: int = 1
    seed: int = 0
    warmup_frac: float = 0.1
    batches: int = 32
    workers: int = 1
    events_scale: int = 100_000  # default budget = events_scale * n
    run_sde: bool = False
    sde_dt: float = 1e-3
    sde_horizon: float = 1e4

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        if not self.n_values:
            raise ValueError("empty list of scaling indices")
        for n in self.n_values:
            build_prelimit(self.model, n)  # fail early
        if self.replicas < 1:
            raise ValueError("need at least one replica")

    def budget(self, n: int) -> int:
        return int(self.events_per_n.get(n, self.events_scale * n))


@dataclass
class SweepRow:
    n: int
    events: int
    replicas: int
    level_mass: list[float]
    level_mass_se: list[float]
    ks: float
    w1: float
    alpha_e: float
    p_empty: float
    sqrt_n_p_empty: float
    sqrt_n_p_empty_se: float
    wall_time_s: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SweepResult:
    schema: str
    model: dict
    seed: int
    d_limit: list[float]
    empty_mass_coefficient: float
    rows: list[SweepRow]
    sde_ks: float | None = None
    sde_mean: float | None = None

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "model": self.model,
            "seed": self.seed,
            "d_limit": self.d_limit,
            "empty_mass_coefficient": self.empty_mass_coefficient,
            "sde_ks": self.sde_ks,
            "sde_mean": self.sde_mean,
            "rows": [r.to_dict() for r in self.rows],
        }

    @staticmethod
    def from_dict(data: dict) -> "SweepResult":
        if data.get("schema") != SCHEMA_VERSION:
            raise ValueError(
                f"schema mismatch: file has {data.get('schema')!r}, "
                f"this build reads {SCHEMA_VERSION!r}"
            )
        rows = [SweepRow(**r) for r in data["rows"]]
        return SweepResult(
            schema=data["schema"],
            model=data["model"],
            seed=data["seed"],
            d_limit=data["d_limit"],
            empty_mass_coefficient=data["empty_mass_coefficient"],
            rows=rows,
            sde_ks=data.get("sde_ks"),
            sde_mean=data.get("sde_mean"),
        )


def run_sweep(plan: SweepPlan) -> SweepResult:
    """Run the simulation at every scaling index, evaluate the limit once,
    optionally run the diffusion once, and join the comparisons.  Per-n
    failures are isolated: a failed row is reported with NaNs and the
    sweep continues."""
    limit = build_limit(plan.model)
    drift = plan.model.params.drift
    coeff = -sum(b * d for b, d in zip(drift, limit.d)) / plan.model.params.mu[0]
    rows: list[SweepRow] = []
    for n in plan.n_values:
        cfg = build_prelimit(plan.model, n)
        events = plan.budget(n)
        t0 = _time.perf_counter()
        try:
            res = des.run_stationary(
                cfg,
                events=events,
                warmup=int(events * plan.warmup_frac),
                batches=plan.batches,
                seed=_derive_seed(plan.seed, n),
                replicas=plan.replicas,
                workers=plan.workers,
            )
        except Exception as exc:  # isolate per-n failures
            rows.append(
                SweepRow(
                    n=n,
                    events=events,
                    replicas=plan.replicas,
                    level_mass=[math.nan] * cfg.k,
                    level_mass_se=[math.nan] * cfg.k,
                    ks=math.nan,
                    w1=math.nan,
                    alpha_e=math.nan,
                    p_empty=math.nan,
                    sqrt_n_p_empty=math.nan,
                    sqrt_n_p_empty_se=math.nan,
                    wall_time_s=_time.perf_counter() - t0,
                )
            )
            print(f"[sweep] n={n} failed: {exc}")
            continue
        ks = ks_distance(res.scaled, limit)
        w1 = wasserstein1(res.scaled, limit)
        mass_se = [
            batch_ci(res.level_mass_batches[:, i])[1] for i in range(cfg.k)
        ]
        _, p0_se, _ = res.p_empty_ci()
        rows.append(
            SweepRow(
                n=n,
                events=events,
                replicas=plan.replicas,
                level_mass=[float(x) for x in res.level_mass],
                level_mass_se=[float(x) for x in mass_se],
                ks=float(ks),
                w1=float(w1),
                alpha_e=res.palm.alpha_e,
                p_empty=res.p_empty,
                sqrt_n_p_empty=res.p_empty * cfg.sqrt_n,
                sqrt_n_p_empty_se=p0_se * cfg.sqrt_n,
                wall_time_s=_time.perf_counter() - t0,
            )
        )
    sde_ks = None
    sde_mean = None
    if plan.run_sde:
        params = diffusion_params(plan.model, dt=plan.sde_dt, horizon=plan.sde_horizon)
        sres = run_sde_stationary(
            params, warmup_frac=plan.warmup_frac, seed=_derive_seed(plan.seed, 0)
        )
        sde_ks = float(ks_distance(sres.dist, limit))
        sde_mean = sres.mean
    return SweepResult(
        schema=SCHEMA_VERSION,
        model=model_to_dict(plan.model),
        seed=plan.seed,
        d_limit=[float(x) for x in limit.d],
        empty_mass_coefficient=float(coeff),
        rows=rows,
        sde_ks=sde_ks,
        sde_mean=sde_mean,
    )


def _derive_seed(seed: int, n: int) -> int:
    return int(np.random.SeedSequence(entropy=seed, spawn_key=(n,)).generate_state(1)[0])


def save_result(result: SweepResult, out_dir: str | Path, stem: str = "sweep") -> tuple[Path, Path]:
    """Write the versioned JSON plus a flat CSV of the per-n rows."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jpath = out / f"{stem}.json"
    with open(jpath, "w") as fh:
        json.dump(result.to_dict(), fh, indent=2)
    cpath = out / f"{stem}.csv"
    k = len(result.d_limit)
    cols = (
        ["n", "events", "replicas"]
        + [f"d{i + 1}" for i in range(k)]
        + [f"d{i + 1}_se" for i in range(k)]
        + ["ks", "w1", "alpha_e", "p_empty", "sqrt_n_p_empty", "sqrt_n_p_empty_se", "wall_time_s"]
    )
    with open(cpath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["schema", result.schema])
        w.writerow(cols)
        for r in result.rows:
            w.writerow(
                [r.n, r.events, r.replicas]
                + [f"{x:.17g}" for x in r.level_mass]
                + [f"{x:.17g}" for x in r.level_mass_se]
                + [
                    f"{r.ks:.17g}",
                    f"{r.w1:.17g}",
                    f"{r.alpha_e:.17g}",
                    f"{r.p_empty:.17g}",
                    f"{r.sqrt_n_p_empty:.17g}",
                    f"{r.sqrt_n_p_empty_se:.17g}",
                    f"{r.wall_time_s:.17g}",
                ]
            )
    return jpath, cpath


def load_result(path: str | Path) -> SweepResult:
    """Load the JSON form; schema mismatches and truncation fail cleanly."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not a complete sweep file ({exc})") from exc
    if not isinstance(data, dict):
        raise ValueError(f"{path}: unexpected top-level structure")
    result = SweepResult.from_dict(data)
    model_from_dict(result.model)  # validate the embedded model
    return result
