"""Delay accounting: configured totals, measured components, additivity."""

from __future__ import annotations

import dataclasses

import pytest

from gridshield.delay import DelayComponents, NoTripFound, measure, total
from gridshield.netsim import EventLog
from gridshield.scenarios import load_scenario, run_scenario


class TestTotal:
    def test_all_zero_components_sum_to_zero(self):
        zeros = DelayComponents(0, 0, 0, 0, 0, 0, 0, 0, with_ids=False)
        assert total(zeros) == 0

    def test_default_split_without_inspection_is_23ms(self):
        assert total(DelayComponents(with_ids=False)) == 23_000

    def test_default_split_with_inspection_is_27ms(self):
        assert total(DelayComponents(with_ids=True)) == 27_000

    def test_inspection_term_counted_only_when_active(self):
        c = DelayComponents(t_ids=9_000)
        assert total(dataclasses.replace(c, with_ids=True)) - total(c) == 9_000

    def test_negative_component_rejected(self):
        with pytest.raises(ValueError):
            DelayComponents(t_mu=-1)


@pytest.fixture(scope="module")
def baseline_result():
    return run_scenario(load_scenario("baseline"))


@pytest.fixture(scope="module")
def with_ids_result():
    return run_scenario(load_scenario("baseline", {"with_ids": True}))


class TestMeasure:
    def test_measured_total_equals_configured_total(self, baseline_result):
        spec = load_scenario("baseline")
        report = measure(baseline_result.log)
        assert report.total_us == total(spec.delays) == 23_000

    def test_each_component_matches_configuration(self, baseline_result):
        spec = load_scenario("baseline")
        report = measure(baseline_result.log)
        expected = spec.delays.as_dict()
        expected["t_ids"] = 0  # module transparent in the baseline
        assert report.components == expected

    def test_additivity_is_exact(self, baseline_result, with_ids_result):
        for result in (baseline_result, with_ids_result):
            report = measure(result.log)
            assert sum(report.components.values()) == report.total_us
            assert report.checks["additivity_exact"]

    def test_differential_isolates_the_inspection_term(self, baseline_result, with_ids_result):
        base = measure(baseline_result.log)
        with_ids = measure(with_ids_result.log)
        assert with_ids.components["t_ids"] == with_ids.total_us - base.total_us == 4_000

    def test_inspection_passes_scale_the_term(self):
        result = run_scenario(
            load_scenario("baseline", {"with_ids": True, "inspection_passes": 2, "t_ids": 1.5})
        )
        report = measure(result.log)
        assert report.components["t_ids"] == 3_000

    def test_log_without_trip_raises(self):
        result = run_scenario(load_scenario("attack1"))
        with pytest.raises(NoTripFound):
            measure(result.log)

    def test_empty_log_raises(self):
        with pytest.raises(NoTripFound):
            measure(EventLog())

    def test_budget_checks(self, baseline_result, with_ids_result):
        base = measure(baseline_result.log)
        assert base.checks["baseline_is_23ms"]
        withm = measure(with_ids_result.log)
        assert withm.checks["with_ids_leq_27ms"]
        assert withm.checks["ids_added_leq_4ms"]
        assert withm.checks["ids_added_leq_quarter_cycle"]

    def test_report_json_is_stable(self, baseline_result):
        a = measure(baseline_result.log).to_json()
        b = measure(baseline_result.log).to_json()
        assert a == b and '"total_us": 23000' in a
