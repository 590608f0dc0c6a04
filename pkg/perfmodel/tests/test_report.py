import json
from dataclasses import replace

import pytest

from perfmodel.coupler import fixed_point_solve
from perfmodel.exceptions import ConfigMismatch
from perfmodel.report import (
    COMPARED_METRICS,
    REPORT_COLUMNS,
    FieldCheck,
    MicroMetrics,
    PerformanceReport,
    build_report,
    compare_reports,
)
from perfmodel.writers import read_report_csv, read_report_json, write_report

from .factories import make_config


@pytest.fixture
def report(base_config):
    return build_report(fixed_point_solve(base_config), base_config)


def scaled(report: PerformanceReport, factor: float) -> PerformanceReport:
    """Every compared metric multiplied by `factor`, clamped to valid ranges."""
    micro = {name: min(value * factor, 1.0) if name in ('rejection', 'p_immediate', 'mean_util') else value * factor
             for name, value in vars(report.micro).items()}
    macro = {name: min(value * factor, 1.0)
             if name in ('rejection', 'bp_queue', 'bp_resource', 'p_immediate', 'success_prob', 'p_na')
             else value * factor
             for name, value in vars(report.macro).items()}
    return replace(report, micro=type(report.micro)(**micro), macro=type(report.macro)(**macro))


class TestBuildReport:
    def test_fields(self, report, base_config):
        assert report.provenance.config_hash == base_config.config_hash
        assert report.provenance.time_unit == 'second'
        assert report.converged
        assert report.micro.total_delay >= 1.0 / base_config.micro.instantiation_rate
        assert report.macro.provisioning_time_naive == pytest.approx(2.0)
        assert report.macro.rejection == pytest.approx(report.macro.bp_queue + report.macro.bp_resource)

    def test_row_follows_report_columns(self, report):
        assert tuple(report.as_row()) == REPORT_COLUMNS

    def test_metric_lookup(self, report):
        assert report.metric('micro_util_ratio_of_means') == report.micro.util_ratio_of_means
        assert report.metric('coupling_lambda_c') == report.coupling.lambda_c

    def test_probability_slack_is_clamped(self):
        metrics = MicroMetrics(rejection=1.0 + 1e-12, total_delay=1.0, queue_wait=0.0, p_immediate=-1e-12,
                               mean_vms=1.0, mean_containers=0.0, mean_util=0.0, util_ratio_of_means=0.0)
        assert metrics.rejection == 1.0
        assert metrics.p_immediate == 0.0

    def test_invalid_probability(self):
        with pytest.raises(ValueError):
            MicroMetrics(rejection=1.5, total_delay=1.0, queue_wait=0.0, p_immediate=0.0,
                         mean_vms=1.0, mean_containers=0.0, mean_util=0.0, util_ratio_of_means=0.0)

    def test_idle_micro_layer(self):
        config = make_config(micro__arrival_rate='0 /second')
        report = build_report(fixed_point_solve(config), config)
        assert report.micro.rejection == pytest.approx(0.0, abs=1e-12)
        assert report.micro.queue_wait == 0.0
        assert 'degenerate_load:wt_q' in report.provenance.flags


class TestPersistence:
    def test_csv_and_json_read_back(self, report, tmp_path):
        csv_path, json_path = write_report(report, tmp_path / 'out' / 'report')
        assert csv_path.name == 'report.csv'
        assert read_report_csv(csv_path) == report
        assert read_report_json(json_path) == report

    def test_csv_header(self, report, tmp_path):
        csv_path, _ = write_report(report, tmp_path / 'report')
        header = csv_path.read_text(encoding='utf-8').splitlines()[0]
        assert tuple(header.split(',')) == REPORT_COLUMNS

    def test_json_is_stable(self, report):
        assert json.loads(report.to_json()) == report.as_dict()


class TestCompareReports:
    def test_identical_reports_pass_at_zero_tolerance(self, report):
        verdict = compare_reports(report, report, tol=0.0)
        assert verdict.passed
        assert [check.name for check in verdict.checks] == list(COMPARED_METRICS)

    def test_quarter_off_fails_at_ten_percent(self, report):
        verdict = compare_reports(scaled(report, 1.25), report, tol=0.10)
        assert not verdict.passed
        assert verdict.check('micro_total_delay') in verdict.failures

    def test_quarter_off_passes_at_thirty_percent(self, report):
        verdict = compare_reports(scaled(report, 1.25), report, tol=0.30,
                                  metrics=['micro_total_delay', 'micro_mean_vms', 'macro_total_delay'])
        assert verdict.passed

    def test_per_metric_tolerance(self, report):
        off = scaled(report, 1.25)
        verdict = compare_reports(off, report, tol={'micro_total_delay': 0.3, 'default': 0.0},
                                  metrics=['micro_total_delay', 'micro_mean_vms'])
        assert verdict.check('micro_total_delay').passed
        assert not verdict.check('micro_mean_vms').passed

    def test_config_mismatch(self, report):
        other_config = make_config(micro__users=3)
        other = build_report(fixed_point_solve(other_config), other_config)
        with pytest.raises(ConfigMismatch):
            compare_reports(report, other, tol=0.1)
        assert compare_reports(report, other, tol=10.0, override=True).checks

    def test_table(self, report):
        table = compare_reports(report, report, tol=0.1).as_table()
        assert 'verdict: PASS' in table


class TestFieldCheck:
    def test_relative_error_with_zero_reference(self):
        assert FieldCheck('x', 0.0, 0.0, 0.0).relative_error == 0.0
        assert FieldCheck('x', 1.0, 0.0, 0.0).relative_error == float('inf')

    def test_boundary_is_inclusive(self):
        assert FieldCheck('x', 1.1, 1.0, 0.1 + 1e-12).passed
        assert not FieldCheck('x', 1.3, 1.0, 0.1).passed


class TestPublishedScenarios:
    """Published calibration points, reproduced within 15%."""

    @pytest.mark.parametrize('field, published', [
        ('total_delay', 2.89),
        ('mean_vms', 7.12),
        ('mean_containers', 39.8),
        ('mean_util', 0.814),
        ('p_immediate', 0.7415),
    ])
    def test_single_application(self, table6_config, field, published):
        report = build_report(fixed_point_solve(table6_config), table6_config)
        assert report.converged
        assert getattr(report.micro, field) == pytest.approx(published, rel=0.15)
