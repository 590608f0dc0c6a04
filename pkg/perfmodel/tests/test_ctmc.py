import numpy as np
import pytest

from perfmodel.ctmc import (
    CtmcModel,
    ProbabilityVector,
    SolverOptions,
    StateSpace,
    build_generator,
    expectation,
    residual,
    solve_steady_state,
)
from perfmodel.exceptions import NonPositiveRate, NotConverged, SelfLoop, SingularOrReducible, UnknownState

from .oracles import birth_death_stationary, dense_stationary


def birth_death_model(births, deaths):
    space = StateSpace.from_states(range(len(births) + 1))
    transitions = []
    for i, (birth, death) in enumerate(zip(births, deaths)):
        transitions.append((i, i + 1, birth))
        transitions.append((i + 1, i, death))
    return CtmcModel(space=space, generator=build_generator(space, transitions))


class TestStateSpace:
    def test_index_of(self):
        space = StateSpace.from_states(['a', 'b', 'c'])
        assert space.index_of('c') == 2
        assert len(space) == 3
        assert 'b' in space

    def test_unknown_state(self):
        space = StateSpace.from_states(['a'])
        with pytest.raises(UnknownState):
            space.index_of('z')

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            StateSpace.from_states(['a', 'a'])


class TestBuildGenerator:
    def test_rows_sum_to_zero(self):
        space = StateSpace.from_states(range(4))
        gen = build_generator(space, [(0, 1, 2.0), (1, 2, 0.5), (2, 3, 1.5), (3, 0, 4.0), (1, 0, 0.25)])
        assert np.abs(gen.row_sums()).max() < 1e-12
        assert gen.diagonal[1] == pytest.approx(-0.75)

    def test_parallel_transitions_aggregate(self):
        space = StateSpace.from_states(['x', 'y'])
        gen = build_generator(space, [('x', 'y', 1.0), ('x', 'y', 2.0), ('y', 'x', 1.0)])
        assert gen.rate(0, 1) == pytest.approx(3.0)

    def test_self_loop(self):
        space = StateSpace.from_states(['x', 'y'])
        with pytest.raises(SelfLoop):
            build_generator(space, [('x', 'x', 1.0)])

    @pytest.mark.parametrize('rate', [0.0, -1.0])
    def test_non_positive_rate(self, rate):
        space = StateSpace.from_states(['x', 'y'])
        with pytest.raises(NonPositiveRate):
            build_generator(space, [('x', 'y', rate)])

    def test_unknown_target(self):
        space = StateSpace.from_states(['x', 'y'])
        with pytest.raises(UnknownState):
            build_generator(space, [('x', 'q', 1.0)])


class TestSolveSteadyState:
    def test_two_state_chain(self):
        model = birth_death_model([2.0], [3.0])
        pi = model.solve()
        assert pi.values == pytest.approx([0.6, 0.4], abs=1e-12)

    def test_three_slot_queue(self):
        model = birth_death_model([1.0] * 3, [2.0] * 3)
        pi = model.solve()
        assert pi.values == pytest.approx([8 / 15, 4 / 15, 2 / 15, 1 / 15], abs=1e-12)
        assert expectation(pi, [1.0, 0.0, 0.0, 0.0]) == pytest.approx(8 / 15)
        assert expectation(pi, lambda position: position) == pytest.approx(11 / 15)

    def test_absorbing_state_takes_all_mass(self):
        space = StateSpace.from_states(['a', 'b', 'sink'])
        gen = build_generator(space, [('a', 'b', 1.0), ('b', 'a', 1.0), ('b', 'sink', 0.5)])
        assert solve_steady_state(gen).values == pytest.approx([0.0, 0.0, 1.0], abs=1e-12)

    def test_single_state(self):
        space = StateSpace.from_states(['only'])
        pi = solve_steady_state(build_generator(space, []))
        assert pi[0] == 1.0

    @pytest.mark.parametrize('seed', range(200))
    def test_birth_death_matches_product_form(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 40))
        births = rng.uniform(0.05, 5.0, size=n)
        deaths = rng.uniform(0.05, 5.0, size=n)
        pi = birth_death_model(births, deaths).solve()
        assert np.abs(pi.values - birth_death_stationary(births, deaths)).max() < 1e-8

    @pytest.mark.parametrize('seed', range(10))
    def test_iterative_agrees_with_direct(self, seed):
        rng = np.random.default_rng(1000 + seed)
        n = 25
        model = birth_death_model(rng.uniform(0.5, 2.0, size=n), rng.uniform(0.5, 2.0, size=n))
        direct = model.solve(SolverOptions(method='direct'))
        iterative = model.solve(SolverOptions(method='iterative', residual_tol=1e-13))
        assert np.abs(direct.values - iterative.values).max() < 1e-8

    def test_matches_dense_least_squares(self):
        rng = np.random.default_rng(7)
        n = 12
        space = StateSpace.from_states(range(n))
        transitions = [
            (i, j, float(rng.uniform(0.1, 3.0)))
            for i in range(n) for j in range(n)
            if i != j and rng.random() < 0.4
        ]
        # ring keeps the chain irreducible
        transitions += [(i, (i + 1) % n, 1.0) for i in range(n)]
        gen = build_generator(space, transitions)
        pi = solve_steady_state(gen)
        assert residual(gen, pi) < 1e-10
        assert np.abs(pi.values - dense_stationary(gen.matrix.toarray())).max() < 1e-8

    def test_transient_states_get_no_mass(self):
        space = StateSpace.from_states(['start', 'a', 'b'])
        gen = build_generator(space, [('start', 'a', 1.0), ('a', 'b', 2.0), ('b', 'a', 2.0)])
        pi = solve_steady_state(gen)
        assert pi[0] == pytest.approx(0.0, abs=1e-12)
        assert pi[1] == pytest.approx(0.5)

    def test_two_closed_classes_are_rejected(self):
        space = StateSpace.from_states(['start', 'left', 'right'])
        gen = build_generator(space, [('start', 'left', 1.0), ('start', 'right', 1.0)])
        with pytest.raises(SingularOrReducible):
            solve_steady_state(gen)

    def test_iterative_budget(self):
        model = birth_death_model([1.0] * 30, [1.5] * 30)
        with pytest.raises(NotConverged):
            model.solve(SolverOptions(method='iterative', max_sweeps=10, residual_tol=1e-14))

    def test_no_transitions_iterative(self):
        space = StateSpace.from_states(['a', 'b'])
        with pytest.raises(SingularOrReducible):
            solve_steady_state(build_generator(space, []), SolverOptions(method='iterative'))


class TestProbabilityVector:
    def test_read_only(self):
        pi = ProbabilityVector(np.array([0.25, 0.75]))
        with pytest.raises(ValueError):
            pi.values[0] = 1.0

    @pytest.mark.parametrize('values', [[0.5, 0.6], [-0.1, 1.1], []])
    def test_invalid(self, values):
        with pytest.raises(ValueError):
            ProbabilityVector(np.array(values))

    def test_expectation(self):
        pi = ProbabilityVector(np.array([0.2, 0.3, 0.5]))
        assert expectation(pi, [0.0, 1.0, 2.0]) == pytest.approx(1.3)
        assert expectation(pi, lambda position: position ** 2) == pytest.approx(2.3)

    def test_model_expect_and_probability(self):
        model = birth_death_model([1.0, 1.0], [1.0, 1.0])
        pi = model.solve()
        assert model.expect(pi, float) == pytest.approx(1.0)
        assert model.probability(pi, lambda label: label > 0) == pytest.approx(2 / 3)
        assert model.edges()[(0, 1)] == 1.0
