"""Command-line driver.

Every subcommand reads the model from a config file (see configs/ for the
schema), takes a master seed, and writes CSV grids plus JSON summaries
into --out-dir.  Simulation and diffusion outputs share one ECDF schema so
`compare` is source-agnostic.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import des, verify
from .limit import build_limit, build_gibbs
from .model import RenewalSpec, build_prelimit, load_model
from .orchestrate import SweepPlan, load_result, run_sweep, save_result
from .sde import diffusion_params, halving_check, run_sde_stationary
from .stats import EmpiricalDistribution


@click.group()
def main():
    """Simulation and verification lab for level-dependent queues in heavy
    traffic."""


def _out_dir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
    click.echo(f"wrote {path}")


def _write_grid(path: Path, header: list[str], columns: list[np.ndarray], fmt: str) -> None:
    if fmt == "json":
        payload = {h: np.asarray(c).tolist() for h, c in zip(header, columns)}
        _write_json(path.with_suffix(".json"), payload)
        return
    rows = np.column_stack(columns)
    np.savetxt(path, rows, delimiter=",", header=",".join(header), comments="", fmt="%.12g")
    click.echo(f"wrote {path}")


def _write_ecdf(dist: EmpiricalDistribution, path: Path, fmt: str) -> None:
    se = dist.cdf_se(dist.support)
    _write_grid(
        path,
        ["x", "cdf", "ci_halfwidth"],
        [dist.support, dist.cdf_values, 1.96 * se],
        fmt,
    )


def _read_ecdf(path: Path) -> EmpiricalDistribution:
    data = np.genfromtxt(path, delimiter=",", names=True)
    x = np.atleast_1d(data["x"])
    cdf = np.atleast_1d(data["cdf"])
    probs = np.diff(np.concatenate(([0.0], cdf)))
    keep = probs > 0
    return EmpiricalDistribution(x[keep], probs[keep][None, :])


config_opt = click.option(
    "--config", "config_path", required=True, type=click.Path(exists=True), help="model config file"
)
seed_opt = click.option("--seed", default=0, show_default=True, type=int)
outdir_opt = click.option("--out-dir", default="out", show_default=True)
format_opt = click.option(
    "--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True
)


@main.command()
@config_opt
@outdir_opt
@format_opt
@click.option("--grid-points", default=2001, show_default=True)
@click.option("--x-max", default=None, type=float, help="grid end (default: tail auto-cut)")
def density(config_path, out_dir, fmt, grid_points, x_max):
    """Evaluate the closed-form limit law on a grid."""
    model = load_model(config_path)
    dist = build_limit(model)
    gibbs = build_gibbs(model)
    if x_max is None:
        x_max = dist.edges[-1] + 50.0 / abs(dist.beta[-1])
    out = _out_dir(out_dir)
    x = np.linspace(0.0, x_max, grid_points)
    _write_grid(out / "density.csv", ["x", "pdf", "cdf"], [x, dist.pdf(x), dist.cdf(x)], fmt)
    _write_json(
        out / "coefficients.json",
        {
            "edges": list(dist.edges),
            "beta": list(dist.beta),
            "xi": [x if math.isfinite(x) else None for x in dist.xi],
            "log_xi": list(dist.log_xi),
            "c": [x if math.isfinite(x) else None for x in dist.c],
            "log_abs_c": list(dist.log_abs_c),
            "d": list(dist.d),
            "mean": dist.mean(),
            "second_moment": dist.moment(2),
            "gibbs_log_norm": gibbs.log_norm,
        },
    )


@main.command()
@config_opt
@seed_opt
@outdir_opt
@format_opt
@click.option("--n", required=True, type=int, help="scaling index")
@click.option("--events", default=1_000_000, show_default=True, type=int)
@click.option("--warmup", default=None, type=int, help="events to discard (default 10%)")
@click.option("--replicas", default=1, show_default=True, type=int)
@click.option("--workers", default=1, show_default=True, type=int)
@click.option("--batches", default=32, show_default=True, type=int)
@click.option("--log-csv", default=None, type=click.Path(), help="also dump a capped raw event log")
@click.option("--log-cap", default=100_000, show_default=True, type=int)
def simulate(config_path, seed, out_dir, fmt, n, events, warmup, replicas, workers, batches, log_csv, log_cap):
    """Simulate the pre-limit queue and estimate its stationary law."""
    model = load_model(config_path)
    cfg = build_prelimit(model, n)
    res = des.run_stationary(
        cfg, events=events, warmup=warmup, batches=batches, seed=seed,
        replicas=replicas, workers=workers,
    )
    out = _out_dir(out_dir)
    _write_ecdf(res.scaled, out / "ecdf.csv", fmt)
    _write_json(out / "summary.json", res.summary())
    if log_csv is not None:
        log = des.run_logged(cfg, min(events, log_cap), seed=seed)
        log.to_csv(log_csv, cap=log_cap)
        click.echo(f"wrote {log_csv}")


@main.command()
@config_opt
@seed_opt
@outdir_opt
@format_opt
@click.option("--dt", default=1e-3, show_default=True, type=float)
@click.option("--horizon", default=1e4, show_default=True, type=float)
@click.option("--warmup-frac", default=0.1, show_default=True, type=float)
@click.option("--halving/--no-halving", default=False, show_default=True, help="also run the step-halving self-test")
def sde(config_path, seed, out_dir, fmt, dt, horizon, warmup_frac, halving):
    """Simulate the limiting reflected diffusion."""
    model = load_model(config_path)
    params = diffusion_params(model, dt=dt, horizon=horizon)
    res = run_sde_stationary(params, warmup_frac=warmup_frac, seed=seed)
    out = _out_dir(out_dir)
    _write_ecdf(res.dist, out / "ecdf.csv", fmt)
    summary = res.summary()
    if halving:
        rep = halving_check(params, warmup_frac=warmup_frac, seed=seed)
        summary["halving"] = {
            "mean_coarse": rep.mean_coarse,
            "mean_fine": rep.mean_fine,
            "shift": rep.shift,
            "ci_halfwidth": rep.ci_halfwidth,
            "pass": bool(rep.ok),
        }
    _write_json(out / "summary.json", summary)


@main.command()
@config_opt
@seed_opt
@outdir_opt
@click.option("--n", required=True, type=int)
@click.option("--events", default=1_000_000, show_default=True, type=int)
@click.option("--batches", default=32, show_default=True, type=int)
def barcheck(config_path, seed, out_dir, n, events, batches):
    """Stationary balance residuals for the test-function catalog, plus the
    Palm identities and residual-clock bounds."""
    model = load_model(config_path)
    cfg = build_prelimit(model, n)
    log = des.run_logged(cfg, events, seed=seed)
    fns = [verify.arrival_clock(), verify.service_clock()]
    for frac in (0.5, 1.0, 1.5):
        fns.append(verify.queue_capped(frac * cfg.levels[0]))
    residuals = [verify.bar_residual(log, f, batches=batches).to_dict() for f in fns]
    res = des.run_stationary(cfg, events=events, batches=batches, seed=seed)
    payload = {
        "n": n,
        "events": events,
        "seed": seed,
        "residuals": residuals,
        "palm": verify.palm_identities(res).to_dict(),
        "moment_bounds": verify.moment_bounds(res).to_dict(),
    }
    _write_json(_out_dir(out_dir) / "barcheck.json", payload)
    ok = all(r["pass"] for r in residuals) and payload["palm"]["pass"] and payload["moment_bounds"]["pass"]
    click.echo("all identities pass" if ok else "IDENTITY FAILURES, see barcheck.json")
    if not ok:
        sys.exit(1)


@main.command()
@config_opt
@click.option("--n", default=math.inf, show_default=True, type=float, help="scaling index; inf = untruncated")
@click.option("--theta", required=True, type=float)
@click.option("--out-dir", default=None)
def etazeta(config_path, n, theta, out_dir):
    """Solve the truncated-transform exponent equations at one argument."""
    model = load_model(config_path)
    sol = verify.solve_eta_zeta(model.arrival, model.service, n, theta)
    payload = sol.to_dict()
    if math.isfinite(n):
        ee, ez = verify.expansion_error(model.arrival, model.service, n, theta * math.sqrt(n))
        payload["expansion_error"] = {"eta": ee, "zeta": ez}
    click.echo(json.dumps(payload, indent=2))
    if out_dir is not None:
        _write_json(_out_dir(out_dir) / "etazeta.json", payload)


@main.command()
@seed_opt
@click.option("--family", default="exponential", show_default=True)
@click.option("--shape", default=4, show_default=True, type=int, help="erlang stages")
@click.option("--cv2", default=4.0, show_default=True, type=float, help="hyperexponential squared CV")
@click.option("--half-width", default=0.5, show_default=True, type=float, help="uniform half width")
@click.option("--events", default=100_000, show_default=True, type=int)
@click.option("--out-dir", default=None)
def dmcheck(seed, family, shape, cv2, half_width, events, out_dir):
    """Pathwise renewal-decomposition identity on a simulated trace."""
    extras = {"erlang": {"shape": shape}, "hyperexponential": {"cv2": cv2}, "uniform": {"half_width": half_width}}
    spec = RenewalSpec.from_dict({"family": family, **extras.get(family, {})})
    trace = verify.renewal_trace(spec, events, seed=seed)
    rep = verify.daley_miyazawa_check(trace)
    drift_mean, drift_se = verify.martingale_drift(spec, events, replicas=16, seed=seed)
    payload = rep.to_dict()
    payload["centered_term_mean"] = drift_mean
    payload["centered_term_se"] = drift_se
    click.echo(json.dumps(payload, indent=2))
    if out_dir is not None:
        _write_json(_out_dir(out_dir) / "dmcheck.json", payload)
    if not rep.ok:
        sys.exit(1)


@main.command()
@click.option("--a", "path_a", required=True, help="ecdf.csv or limit:<config>")
@click.option("--b", "path_b", required=True, help="ecdf.csv or limit:<config>")
@click.option("--out-dir", default=None)
def compare(path_a, path_b, out_dir):
    """KS / Wasserstein-1 / moment gaps between two laws."""

    def resolve(spec: str):
        if spec.startswith("limit:"):
            return build_limit(load_model(spec.split(":", 1)[1]))
        return _read_ecdf(Path(spec))

    rep = verify.compare_distributions(resolve(path_a), resolve(path_b))
    click.echo(json.dumps(rep.to_dict(), indent=2))
    if out_dir is not None:
        _write_json(_out_dir(out_dir) / "compare.json", rep.to_dict())


@main.command()
@config_opt
@seed_opt
@outdir_opt
@click.option("--n", "n_list", required=True, help="comma-separated scaling indices, e.g. 25,100,400")
@click.option("--events-scale", default=100_000, show_default=True, type=int, help="events per unit n")
@click.option("--replicas", default=1, show_default=True, type=int)
@click.option("--workers", default=1, show_default=True, type=int)
@click.option("--sde/--no-sde", "with_sde", default=True, show_default=True)
@click.option("--sde-horizon", default=1e4, show_default=True, type=float)
def sweep(config_path, seed, out_dir, n_list, events_scale, replicas, workers, with_sde, sde_horizon):
    """Heavy-traffic sweep: simulate every n, compare against the limit."""
    model = load_model(config_path)
    plan = SweepPlan(
        model=model,
        n_values=tuple(int(s) for s in n_list.split(",")),
        replicas=replicas,
        seed=seed,
        workers=workers,
        events_scale=events_scale,
        run_sde=with_sde,
        sde_horizon=sde_horizon,
    )
    result = run_sweep(plan)
    jpath, cpath = save_result(result, out_dir)
    load_result(jpath)  # round-trip sanity
    click.echo(f"wrote {jpath} and {cpath}")


if __name__ == "__main__":
    main()
