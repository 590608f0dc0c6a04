import math

import pytest
from scipy import stats

from perfmodel.config import load_config
from perfmodel.coupler import fixed_point_solve
from perfmodel.exceptions import InvalidConfig
from perfmodel.report import build_report
from perfmodel.simulator import (
    VALIDATION_METRICS,
    MetricSummary,
    PlatformSimulation,
    SimConfig,
    SimStats,
    replication_seeds,
    run_simulation,
    simulate_replication,
    validate_against_analytic,
)

from .factories import make_config
from .oracles import erlang_b


def sim_config(system, horizon=2000.0, replications=2, seed=11, warmup_fraction=0.2, threshold=0.0):
    return SimConfig(system=system, horizon=horizon, warmup_fraction=warmup_fraction,
                     replications=replications, seed=seed, immediate_threshold=threshold)


def fixed_group(**overrides):
    """Host group pinned at two VMs, so the container layer never scales."""
    values = dict(micro__min_vms=2, micro__max_vms=2, micro__users=1)
    values.update(overrides)
    return make_config(**values)


class TestSimConfig:
    @pytest.mark.parametrize('overrides', [
        {'horizon': 0.0},
        {'replications': 0},
        {'warmup_fraction': 1.0},
        {'threshold': -1.0},
        {'seed': -5},
    ])
    def test_invalid(self, base_config, overrides):
        with pytest.raises(InvalidConfig):
            sim_config(base_config, **overrides)

    def test_defaults(self, base_config, settings):
        sim = SimConfig.from_system(base_config)
        defaults = settings.PERFMODEL_SETTINGS
        assert sim.horizon == pytest.approx(defaults['SIM_HORIZON_ARRIVALS'] / 0.5)
        assert sim.replications == defaults['SIM_REPLICATIONS']
        assert sim.warmup == pytest.approx(defaults['SIM_WARMUP_FRACTION'] * sim.horizon)
        assert sim.seed == 0

    def test_config_sim_section(self, configs_dir):
        system = load_config(configs_dir / 'validation_1.cfg')
        sim = SimConfig.from_system(system, replications=3)
        assert sim.horizon == 20000.0
        assert sim.replications == 3
        assert sim.seed == 20200101

    def test_payload(self, base_config):
        sim = sim_config(base_config)
        assert SimConfig.from_payload(sim.to_payload()) == sim


class TestReplications:
    def test_same_seed_same_statistics(self, base_config):
        sim = sim_config(base_config, horizon=500.0)
        assert run_simulation(sim) == run_simulation(sim)

    def test_replication_depends_only_on_seed_and_index(self, base_config):
        sim = sim_config(base_config, horizon=500.0, replications=3)
        alone = simulate_replication(sim, 2)
        together = [simulate_replication(sim, index) for index in range(3)]
        assert alone == together[2]

    def test_different_seeds_differ(self, base_config):
        a = run_simulation(sim_config(base_config, horizon=500.0, seed=1))
        b = run_simulation(sim_config(base_config, horizon=500.0, seed=2))
        assert a['micro_total_delay'].mean != b['micro_total_delay'].mean

    def test_seed_streams_are_independent(self):
        first, second = replication_seeds(5, 2)
        assert first.generate_state(4).tolist() != second.generate_state(4).tolist()

    def test_counters_balance(self, base_config):
        sim = sim_config(base_config, horizon=1000.0)
        simulation = PlatformSimulation(sim, replication_seeds(sim.seed, 1)[0])
        result = simulation.run()
        simulation.check_conservation()
        simulation.check_capacity()
        counters = result.counters
        assert counters['micro_arrived'] > 0
        assert counters['micro_started'] >= counters['containers_completed']
        assert counters['macro_submitted'] >= counters['macro_deployed']


class TestBehaviour:
    def test_no_container_load(self):
        system = make_config(micro__arrival_rate='0 /second')
        stats_ = run_simulation(sim_config(system, horizon=1000.0))
        assert stats_['micro_rejection'].mean == 0.0
        assert stats_['micro_p_immediate'].mean == 1.0
        assert stats_['micro_mean_vms'].mean == pytest.approx(system.micro.min_vms)
        assert stats_['micro_mean_containers'].mean == 0.0

    def test_loss_system_matches_erlang(self):
        system = fixed_group(micro__instantiation_time='0.0001 second', micro__container_lifetime='3 second',
                             micro__arrival_rate='1 /second', micro__containers_per_vm=2)
        stats_ = run_simulation(sim_config(system, horizon=20000.0, replications=1))
        assert stats_['micro_rejection'].mean == pytest.approx(erlang_b(4, 3.0), abs=0.02)

    def test_little_law(self):
        system = fixed_group(micro__arrival_rate='1 /second', micro__instantiation_time='0.4 second',
                             micro__container_lifetime='2 second')
        stats_ = run_simulation(sim_config(system, horizon=40000.0, replications=1))
        wait = stats_['micro_queue_wait'].mean
        assert stats_['micro_mean_queue'].mean == pytest.approx(stats_['micro_admission_rate'].mean * wait, rel=0.05)

    def test_queue_wait_includes_own_instantiation(self):
        system = fixed_group(micro__arrival_rate='0.05 /second', micro__instantiation_time='0.4 second',
                             micro__container_lifetime='1 second')
        stats_ = run_simulation(sim_config(system, horizon=40000.0, replications=1))
        wait = stats_['micro_queue_wait'].mean
        assert wait == pytest.approx(0.4, rel=0.1)
        assert stats_['micro_total_delay'].mean == pytest.approx(wait + 0.4)

    def test_generous_threshold_counts_every_admission(self, base_config):
        stats_ = run_simulation(sim_config(base_config, horizon=5000.0, replications=1, threshold=1e6))
        assert stats_['micro_p_immediate'].mean == pytest.approx(1 - stats_['micro_rejection'].mean, abs=0.01)

    def test_rejection_split(self, base_config):
        stats_ = run_simulation(sim_config(base_config, horizon=2000.0))
        total = stats_['macro_rejection'].mean
        assert total == pytest.approx(stats_['macro_rejection_fq'].mean + stats_['macro_rejection_nc'].mean)

    def test_autoscaling_stays_within_bounds(self, base_config):
        stats_ = run_simulation(sim_config(base_config, horizon=3000.0))
        assert base_config.micro.min_vms <= stats_['micro_mean_vms'].mean <= base_config.micro.max_vms
        assert 0.0 <= stats_['micro_mean_util'].mean <= 1.0

    def test_clock_never_passes_horizon(self, base_config):
        sim = sim_config(base_config, horizon=400.0)
        simulation = PlatformSimulation(sim, replication_seeds(sim.seed, 1)[0])
        simulation.run()
        assert simulation.env.now <= 400.0
        assert simulation.lookup.capacity == 1
        assert all(pm.unit.capacity == 1 for pm in simulation.pms)

    def test_full_global_queue_rejects_at_submission(self):
        system = make_config(micro__arrival_rate='0 /second', macro__arrival_rate='5 /second',
                             macro__queue=1, macro__lookup_rate='0.5 /second', macro__pms=50)
        stats_ = run_simulation(sim_config(system, horizon=2000.0, replications=1))
        assert stats_['macro_rejection_fq'].mean > 0.5
        assert stats_['macro_rejection_nc'].mean == 0.0

    def test_full_pool_rejects_after_two_lookups(self):
        system = make_config(micro__arrival_rate='0 /second', macro__arrival_rate='1 /second',
                             macro__pms=1, macro__vms_per_pm=1, macro__vm_lifetime='100 second',
                             macro__queue=50)
        sim = sim_config(system, horizon=2000.0, replications=1)
        simulation = PlatformSimulation(sim, replication_seeds(sim.seed, 1)[0])
        result = simulation.run()
        assert result.counters['macro_rejected_nc'] > 0
        assert result.metrics['macro_rejection_nc'] > 0.5


class TestMetricSummary:
    def test_t_interval(self):
        summary = MetricSummary.from_samples([1.0, 2.0, 3.0])
        assert summary.mean == pytest.approx(2.0)
        assert summary.variance == pytest.approx(1.0)
        assert summary.half_width == pytest.approx(stats.t.ppf(0.975, 2) * math.sqrt(1 / 3))
        assert summary.ci_low < summary.mean < summary.ci_high

    def test_single_sample_has_no_width(self):
        summary = MetricSummary.from_samples([4.0])
        assert summary.half_width == 0.0
        assert summary.variance == 0.0


def synthetic_stats(report, shift=0.0, half_width=0.0):
    metrics = {}
    for name in VALIDATION_METRICS:
        mean = report.metric(name) + shift
        metrics[name] = MetricSummary(mean=mean, variance=0.0, ci_low=mean - half_width,
                                      ci_high=mean + half_width, samples=5)
    return SimStats(config_hash=report.provenance.config_hash, seed=0, horizon=1.0, warmup=0.0,
                    replications=5, metrics=metrics)


class TestValidateAgainstAnalytic:
    @pytest.fixture
    def report(self, base_config):
        return build_report(fixed_point_solve(base_config), base_config)

    def test_exact_agreement(self, report):
        verdict = validate_against_analytic(report, synthetic_stats(report), tol=0.0)
        assert verdict.passed

    def test_zero_tolerance_rejects_any_error(self, report):
        verdict = validate_against_analytic(report, synthetic_stats(report, shift=1e-6), tol=0.0)
        assert not verdict.passed
        assert len(verdict.failures) == len(VALIDATION_METRICS)

    def test_probability_floor(self, report):
        verdict = validate_against_analytic(report, synthetic_stats(report, shift=0.005), tol=0.01, atol=0.01)
        assert verdict.check('micro_rejection').passed
        assert verdict.check('micro_rejection').allowed >= 0.01

    def test_confidence_interval_widens_allowance(self, report):
        verdict = validate_against_analytic(report, synthetic_stats(report, shift=0.5, half_width=1.0), tol=0.01)
        assert all(check.allowed == pytest.approx(1.0) or check.allowed > 1.0 for check in verdict.checks)
        assert verdict.passed

    def test_simulation_of_other_config_fails(self, configs_dir):
        system = load_config(configs_dir / 'validation_1.cfg')
        report = build_report(fixed_point_solve(system), system)
        busier = system.with_overrides({'micro.arrival_rate': '2 /second'})
        simulated = run_simulation(sim_config(busier, horizon=3000.0))
        verdict = validate_against_analytic(report, simulated, tol=0.10)
        assert not verdict.passed
        assert verdict.check('micro_mean_containers') in verdict.failures

    def test_zero_tolerance_fails_against_simulation(self, configs_dir):
        system = load_config(configs_dir / 'validation_1.cfg')
        report = build_report(fixed_point_solve(system), system)
        simulated = run_simulation(sim_config(system, horizon=2000.0))
        assert not validate_against_analytic(report, simulated, tol=0.0).passed


@pytest.mark.slow
@pytest.mark.parametrize('name', [f'validation_{n}.cfg' for n in range(1, 6)])
def test_analytic_engine_agrees_with_simulation(name, configs_dir):
    system = load_config(configs_dir / name)
    report = build_report(fixed_point_solve(system).require_converged(), system)
    simulated = run_simulation(SimConfig.from_system(system))
    verdict = validate_against_analytic(report, simulated, tol=0.10)
    assert verdict.passed, verdict.as_table()
