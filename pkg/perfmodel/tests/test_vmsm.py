import pytest

from perfmodel.exceptions import ValidationError
from perfmodel.vmsm import (
    VmsmParams,
    VmsmState,
    build_vmsm,
    per_pm_arrival_rate,
    solve_vmsm,
    vmsm_state_count,
)


def params(**overrides) -> VmsmParams:
    values = dict(arrival_rate=1.0, provisioning_rate=1.0, completion_rate=1.0,
                  release_rate=0.0, vms_per_pm=1, pool_size=2)
    values.update(overrides)
    return VmsmParams(**values)


class TestStateSpace:
    @pytest.mark.parametrize('vms_per_pm', range(1, 51))
    def test_size(self, vms_per_pm):
        expected = (vms_per_pm + 1) * (vms_per_pm + 2) // 2
        assert vmsm_state_count(vms_per_pm) == expected
        assert build_vmsm(params(vms_per_pm=vms_per_pm)).size == expected

    def test_queue_implies_busy_hypervisor(self):
        space = build_vmsm(params(vms_per_pm=4)).space
        assert all(state.j == 1 for state in space if state.i > 0)
        assert all(sum(state) <= 4 for state in space)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            vmsm_state_count(0)


class TestParams:
    def test_pool_size(self):
        with pytest.raises(ValidationError):
            params(pool_size=0)

    def test_per_pm_rate(self):
        assert per_pm_arrival_rate(4.0, 0.25, 3) == pytest.approx(1.0)

    @pytest.mark.parametrize('bp_queue', [-0.1, 1.5])
    def test_per_pm_rate_range(self, bp_queue):
        with pytest.raises(ValueError):
            per_pm_arrival_rate(1.0, bp_queue, 2)


class TestTransitions:
    def test_arrival_starts_provisioning_or_queues(self):
        edges = build_vmsm(params(vms_per_pm=3, arrival_rate=0.5)).edges()
        assert edges[(VmsmState(0, 0, 1), VmsmState(0, 1, 1))] == pytest.approx(0.5)
        assert edges[(VmsmState(0, 1, 1), VmsmState(1, 1, 1))] == pytest.approx(0.5)
        assert (VmsmState(1, 1, 1), VmsmState(2, 1, 1)) not in edges

    def test_departure_rate_includes_release(self):
        edges = build_vmsm(params(vms_per_pm=3, completion_rate=0.5, release_rate=0.25)).edges()
        assert edges[(VmsmState(0, 0, 2), VmsmState(0, 0, 1))] == pytest.approx(1.25)

    def test_full_adjacency_three_slots(self):
        # lambda_h = 0.5, provisioning 2.0, departures k * 0.5 + 0.25
        p = params(vms_per_pm=3, arrival_rate=0.5, provisioning_rate=2.0, completion_rate=0.5, release_rate=0.25)
        V = VmsmState
        expected = {
            (V(0, 0, 0), V(0, 1, 0)): 0.5,
            (V(0, 0, 1), V(0, 1, 1)): 0.5, (V(0, 0, 1), V(0, 0, 0)): 0.75,
            (V(0, 0, 2), V(0, 1, 2)): 0.5, (V(0, 0, 2), V(0, 0, 1)): 1.25,
            (V(0, 0, 3), V(0, 0, 2)): 1.75,
            (V(0, 1, 0), V(1, 1, 0)): 0.5, (V(0, 1, 0), V(0, 0, 1)): 2.0,
            (V(1, 1, 0), V(2, 1, 0)): 0.5, (V(1, 1, 0), V(0, 1, 1)): 2.0,
            (V(2, 1, 0), V(1, 1, 1)): 2.0,
            (V(0, 1, 1), V(1, 1, 1)): 0.5, (V(0, 1, 1), V(0, 0, 2)): 2.0, (V(0, 1, 1), V(0, 1, 0)): 0.75,
            (V(1, 1, 1), V(0, 1, 2)): 2.0, (V(1, 1, 1), V(1, 1, 0)): 0.75,
            (V(0, 1, 2), V(0, 0, 3)): 2.0, (V(0, 1, 2), V(0, 1, 1)): 1.25,
        }
        edges = build_vmsm(p).edges()
        assert set(edges) == set(expected)
        assert edges == pytest.approx(expected)

    def test_departure_leaves_queue_and_unit_alone(self):
        edges = build_vmsm(params(vms_per_pm=6, release_rate=0.5)).edges()
        departures = [(source, target) for source, target in edges if target.k == source.k - 1]
        assert departures
        assert all((source.i, source.j) == (target.i, target.j) for source, target in departures)


class TestSolution:
    def test_single_slot_example(self):
        sol = solve_vmsm(params())
        assert sol.pi.values == pytest.approx([1 / 3] * 3, abs=1e-12)
        assert sol.p_na == pytest.approx(2 / 3)
        assert sol.success_prob == pytest.approx(5 / 9)
        assert sol.queue_wait == pytest.approx(0.0, abs=1e-12)
        assert sol.provisioning_time == pytest.approx(1.0)
        assert sol.mean_deployed == pytest.approx(1 / 3)

    def test_idle_pm(self):
        sol = solve_vmsm(params(arrival_rate=0.0, vms_per_pm=3))
        assert sol.p_na == pytest.approx(0.0, abs=1e-12)
        assert sol.success_prob == pytest.approx(1.0)
        assert sol.queue_wait == 0.0
        assert 'degenerate_load:PM_wt' in sol.flags

    def test_more_pms_raise_success(self):
        values = [solve_vmsm(params(vms_per_pm=2, pool_size=n)).success_prob for n in (1, 2, 4, 8)]
        assert values == sorted(values)
        assert all(0.0 <= value <= 1.0 for value in values)
