import math

import numpy as np
import pytest

from mlqueue import des, verify
from mlqueue.distributions import stream
from mlqueue.limit import build_limit, limit_from_coefficients
from mlqueue.model import RenewalSpec, build_prelimit
from mlqueue.stats import EmpiricalDistribution


@pytest.fixture(scope="module")
def e1_log(e1_model):
    cfg = build_prelimit(e1_model, 100)
    return des.run_logged(cfg, 400_000, seed=41)


@pytest.fixture(scope="module")
def e1_result(e1_model):
    cfg = build_prelimit(e1_model, 100)
    return des.run_stationary(cfg, events=400_000, seed=41)


class TestBarResidual:
    def test_arrival_clock_decomposition(self, e1_log, e1_result):
        br = verify.bar_residual(e1_log, verify.arrival_clock())
        assert br.ok, br.to_dict()
        # generator term is minus the occupancy-weighted arrival speed;
        # the arrival term is the event rate times the unit mean draw
        cfg = e1_log.cfg
        pred = -float(np.dot(cfg.lam, e1_result.level_mass))
        assert br.generator_term == pytest.approx(pred, abs=0.01)
        assert br.arrival_term == pytest.approx(e1_result.palm.alpha_e, abs=0.01)
        assert br.departure_term == 0.0

    def test_service_clock_decomposition(self, e1_log, e1_result):
        br = verify.bar_residual(e1_log, verify.service_clock())
        assert br.ok
        cfg = e1_log.cfg
        pred = -(
            cfg.mu[0] * (e1_result.level_mass[0] - e1_result.p_empty)
            + float(np.dot(cfg.mu[1:], e1_result.level_mass[1:]))
        )
        assert br.generator_term == pytest.approx(pred, abs=0.01)
        assert br.arrival_term == 0.0

    def test_capped_queue_balances_crossings(self, e1_log):
        cfg = e1_log.cfg
        for frac in (0.5, 1.0, 1.5):
            br = verify.bar_residual(e1_log, verify.queue_capped(frac * cfg.levels[0]))
            assert br.ok
            assert br.generator_term == 0.0
            # up-crossing rate equals down-crossing rate of every edge
            assert br.arrival_term == pytest.approx(-br.departure_term, rel=1e-3)

    def test_clock_powers_and_level_indicators(self, e1_log):
        cfg = e1_log.cfg
        m = cfg.sqrt_n
        fns = [
            verify.clock_power("arrival", 1, m),
            verify.clock_power("arrival", 2, m),
            verify.clock_power("service", 2, m),
            verify.level_clock_power(cfg, 1, "service", 1, m),
            verify.level_clock_power(cfg, 2, "arrival", 1, m),
        ]
        for f in fns:
            br = verify.bar_residual(e1_log, f)
            assert br.ok, (f.tag, br.to_dict())

    def test_residual_is_tiny_on_long_runs(self, e1_log):
        br = verify.bar_residual(e1_log, verify.arrival_clock())
        assert abs(br.residual) < 1e-3

    def test_log_too_short_rejected(self, e1_model):
        cfg = build_prelimit(e1_model, 25)
        log = des.run_logged(cfg, 100, seed=1)
        with pytest.raises(ValueError):
            verify.bar_residual(log, verify.arrival_clock(), warmup=90)

    @pytest.mark.parametrize(
        "make_f",
        [
            verify.arrival_clock,
            verify.service_clock,
            lambda: verify.clock_power("arrival", 2, 3.0),
            lambda: verify.clock_power("service", 2, 3.0),
        ],
    )
    def test_generator_integral_telescopes(self, e1_log, make_f):
        # quadrature of the explicit generator form over each inter-event
        # drain reproduces the telescoped value: the derivative metadata
        # and the accumulation are mutually consistent
        from scipy import integrate

        f = make_f()
        cfg = e1_log.cfg
        lam = np.asarray(cfg.lam)
        mu = np.asarray(cfg.mu)
        la = e1_log.length_after()
        rea, rda = e1_log.re_after(), e1_log.rd_after()
        fb = f.fn(e1_log.length_before.astype(float), e1_log.re_before, e1_log.rd_before)
        fa = f.fn(la.astype(float), rea, rda)
        worst = 0.0
        for j in range(500, 700):
            dt = e1_log.time[j + 1] - e1_log.time[j]
            if dt == 0.0:
                continue
            L = la[j]
            lev = cfg.partition().level_of(L) - 1
            a = lam[lev]
            s = mu[lev] if L >= 1 else 0.0
            kinks = []
            for start, rate in ((rea[j], a), (rda[j], s)):
                if rate > 0.0:
                    u_star = (start - 3.0) / rate  # cutoff crossing of the capped powers
                    if 0.0 < u_star < dt:
                        kinks.append(u_star)
            val, _ = integrate.quad(
                lambda u: float(
                    verify.generator_value(f, cfg, L, rea[j] - a * u, rda[j] - s * u)
                ),
                0.0,
                dt,
                limit=100,
                points=kinks or None,
                epsabs=1e-13,
                epsrel=1e-12,
            )
            worst = max(worst, abs(val - (fb[j + 1] - fa[j])))
        assert worst < 1e-9

    def test_k3_catalog(self, k3_model):
        cfg = build_prelimit(k3_model, 64)
        log = des.run_logged(cfg, 300_000, seed=42)
        for f in (
            verify.arrival_clock(),
            verify.service_clock(),
            verify.queue_capped(cfg.levels[0]),
            verify.queue_capped(cfg.levels[1]),
            verify.clock_power("service", 2, cfg.sqrt_n),
        ):
            br = verify.bar_residual(log, f)
            assert br.ok, (f.tag, br.to_dict())


class TestPalmIdentities:
    def test_all_pass_on_valid_run(self, e1_result):
        rep = verify.palm_identities(e1_result)
        assert rep.ok, rep.to_dict()

    def test_level_crossing_balance_is_pathwise(self, e1_result):
        chk = {c.name: c for c in verify.palm_identities(e1_result).checks}
        assert chk["level_crossing_balance"].value <= 1.0

    def test_mm1_rate_matches_arrival_speed(self, mm1_model):
        cfg = build_prelimit(mm1_model, 100)
        res = des.run_stationary(cfg, events=400_000, seed=43)
        rep = verify.palm_identities(res)
        assert rep.ok
        gap = abs(res.palm.alpha_e - cfg.lam[0])
        from mlqueue.stats import batch_ci

        _, se, _ = batch_ci(res.palm.alpha_e_batches)
        assert gap <= 3.0 * se


class TestMomentBounds:
    def test_all_shipped_configs(self, e1_model, e2_model, mm1_model, k3_model):
        for model in (e1_model, e2_model, mm1_model, k3_model):
            cfg = build_prelimit(model, 100)
            res = des.run_stationary(cfg, events=300_000, seed=44)
            rep = verify.moment_bounds(res)
            assert rep.ok, [c.to_dict() for c in rep.checks if not c.ok]

    def test_deterministic_arrivals_have_no_excess(self):
        # residual of a unit deterministic clock never exceeds one
        from mlqueue.model import HeavyTrafficParams, QueueModel

        p = HeavyTrafficParams((1.0,), (1.0, 1.0), (0.0, 0.0), (0.0, 1.0))
        model = QueueModel(p, RenewalSpec.deterministic(), RenewalSpec.exponential())
        cfg = build_prelimit(model, 100)
        res = des.run_stationary(cfg, events=200_000, seed=45)
        g = np.nonzero(res.tail_grid == 1.0)[0][0]
        assert res.re_tail[g] == 0.0
        assert verify.moment_bounds(res).ok


class TestEtaZeta:
    def test_zero_argument(self):
        sol = verify.solve_eta_zeta(
            RenewalSpec.exponential(), RenewalSpec.erlang(3), 100.0, 0.0
        )
        assert sol.eta == 0.0 and sol.zeta == 0.0

    def test_exponential_untruncated_closed_form(self):
        sol = verify.solve_eta_zeta(
            RenewalSpec.exponential(), RenewalSpec.exponential(), math.inf, 0.1
        )
        assert sol.eta == pytest.approx(math.exp(0.1) - 1.0, abs=1e-10)
        # the service exponent solves the mirrored equation
        assert sol.zeta == pytest.approx(math.exp(-0.1) - 1.0, abs=1e-10)

    @pytest.mark.parametrize(
        "arr",
        [
            RenewalSpec.exponential(),
            RenewalSpec.deterministic(),
            RenewalSpec.erlang(4),
            RenewalSpec.hyperexponential_cv2(4.0),
            RenewalSpec.uniform(0.5),
        ],
        ids=lambda s: s.family.value,
    )
    @pytest.mark.parametrize("theta", [-1.5, -0.3, 0.2, 1.0, 2.5])
    def test_residuals_at_solver_tolerance(self, arr, theta):
        sol = verify.solve_eta_zeta(arr, RenewalSpec.erlang(2), 400.0, theta)
        assert sol.eta_residual <= 1e-12
        assert sol.zeta_residual <= 1e-12

    def test_monotonicity(self):
        arr = RenewalSpec.erlang(2)
        svc = RenewalSpec.uniform(0.5)
        thetas = np.linspace(-2.0, 2.0, 17)
        sols = [verify.solve_eta_zeta(arr, svc, 256.0, t) for t in thetas]
        etas = [s.eta for s in sols]
        zetas = [s.zeta for s in sols]
        assert all(a < b for a, b in zip(etas, etas[1:]))
        assert all(a > b for a, b in zip(zetas, zetas[1:]))

    def test_expansion_error_shrinks(self):
        arr = RenewalSpec.exponential()
        svc = RenewalSpec.erlang(4)
        e100 = verify.expansion_error(arr, svc, 100.0, 1.0)
        e10k = verify.expansion_error(arr, svc, 10_000.0, 1.0)
        assert e10k[0] < e100[0] / 8.0
        assert e10k[1] < e100[1] / 8.0

    def test_second_order_term_matters(self):
        # dropping the variance term leaves an O(1/n) error, so the
        # expansion really is second order
        arr = RenewalSpec.exponential()
        sol = verify.solve_eta_zeta(arr, arr, 10_000.0, 0.01)  # theta/sqrt(n)=0.01
        first_only = 0.01
        with_second = 0.01 + 0.5 * 1.0 * 0.01**2
        assert abs(sol.eta - with_second) < abs(sol.eta - first_only) / 50.0


class TestDaleyMiyazawa:
    def test_deterministic_staircase_exact(self):
        trace = verify.renewal_trace(
            RenewalSpec.deterministic(), 1000, seed=46, initial_delay=1.0
        )
        grid = np.array([0.0, 0.4, 1.0, 1.5, 2.0, 7.25, 900.0])
        rep = verify.daley_miyazawa_check(trace, grid)
        assert rep.max_violation < 1e-12
        # hand value: with unit spacing the count at t is floor(t) + 1(t at a point)
        pts = trace.points
        assert np.searchsorted(pts, 2.0, side="right") == 2

    @pytest.mark.parametrize(
        "spec",
        [RenewalSpec.exponential(), RenewalSpec.deterministic(), RenewalSpec.uniform(0.9)],
        ids=lambda s: s.family.value,
    )
    def test_pathwise_identity(self, spec):
        trace = verify.renewal_trace(spec, 100_000, seed=47)
        rep = verify.daley_miyazawa_check(trace)
        assert rep.ok
        assert rep.max_violation < 1e-9

    def test_violation_localized(self):
        trace = verify.renewal_trace(RenewalSpec.exponential(), 1000, seed=48)
        trace.increments[500] += 1e-6  # corrupt bookkeeping
        rep = verify.daley_miyazawa_check(trace)
        assert not rep.ok
        assert rep.worst_t > trace.points[499]

    def test_grid_beyond_last_point_rejected(self):
        trace = verify.renewal_trace(RenewalSpec.exponential(), 100, seed=49)
        with pytest.raises(ValueError):
            verify.daley_miyazawa_check(trace, np.array([trace.points[-1] + 1.0]))

    def test_centered_term_mean_zero(self):
        mean, se = verify.martingale_drift(RenewalSpec.erlang(2), 50_000, 24, seed=50)
        assert abs(mean) <= 3.0 * se + 1e-4


class TestCompare:
    def test_self_distance_zero(self):
        d = EmpiricalDistribution(np.array([0.0, 1.0]), np.array([[1.0, 1.0]]))
        rep = verify.compare_distributions(d, d)
        assert rep.ks == 0.0
        assert rep.wasserstein1 == 0.0
        assert rep.mean_gap == 0.0

    def test_iid_exponential_vs_exact_limit(self):
        lim = limit_from_coefficients((1.0,), (-1.0, -1.0), (2.0, 2.0))
        x = lim.sample(stream(51, 0), 1_000_000)
        d = EmpiricalDistribution.from_samples(x)
        rep = verify.compare_distributions(d, lim)
        assert rep.ks < 0.004  # DKW scale
        assert rep.wasserstein1 < 0.01
        assert rep.mean_gap < 0.01

    def test_des_vs_limit_matches_direct_ks(self, e1_model, e1_result):
        lim = build_limit(e1_model)
        from mlqueue.stats import ks_distance

        rep = verify.compare_distributions(e1_result.scaled, lim)
        assert rep.ks == ks_distance(e1_result.scaled, lim)

    def test_needs_an_empirical_side(self, e1_model):
        lim = build_limit(e1_model)
        with pytest.raises(TypeError):
            verify.compare_distributions(lim, lim)
