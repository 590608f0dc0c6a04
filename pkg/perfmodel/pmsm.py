"""
Physical machine sub-model: the macro layer's global FCFS queue in front of
a two-attempt lookup over the PM pool.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, NamedTuple, Optional, Tuple

import numpy as np

from .ctmc import CtmcModel, ProbabilityVector, SolverOptions, StateSpace, Transition, build_generator
from .exceptions import ValidationError

logger = logging.getLogger(__name__)

SUCCESS = 's'
FAILURE = 'f'


class PmsmState(NamedTuple):
    i: int
    flag: str


EMPTY_STATE = PmsmState(0, '0')


@dataclass(frozen=True)
class PmsmParams:
    external_rate: float
    request_rate: float
    lookup_rate: float
    success_prob: float
    queue_size: int

    def __post_init__(self):
        if not self.arrival_rate > 0:
            raise ValidationError('arrival_rate', "lambda_x + lambda_c must be positive")
        if self.external_rate < 0 or self.request_rate < 0:
            raise ValidationError('arrival_rate', "arrival components must not be negative")
        if self.queue_size < 1:
            raise ValidationError('queue_size', "must be at least 1")
        if not self.lookup_rate > 0:
            raise ValidationError('lookup_rate', "must be positive")
        if not 0.0 <= self.success_prob <= 1.0:
            raise ValidationError('success_prob', f"must lie in [0, 1], got {self.success_prob}")

    @property
    def arrival_rate(self) -> float:
        """lambda_a = lambda_x + lambda_c."""
        return self.external_rate + self.request_rate


@dataclass(frozen=True)
class PmsmSolution:
    pi: ProbabilityVector
    bp_queue: float
    bp_resource: float
    mean_queue: float
    queue_wait: float
    lookup_delay: float
    p_immediate: float
    state_count: int
    flags: Tuple[str, ...] = ()

    @property
    def p_reject(self) -> float:
        return self.bp_queue + self.bp_resource


def pmsm_state_count(queue_size: int) -> int:
    return 2 * queue_size + 1


@lru_cache(maxsize=16)
def _space(queue_size: int) -> StateSpace:
    states = [EMPTY_STATE]
    for i in range(1, queue_size + 1):
        states.append(PmsmState(i, FAILURE))
        states.append(PmsmState(i, SUCCESS))
    return StateSpace.from_states(states)


def _transitions(p: PmsmParams) -> Iterator[Transition]:
    arrival = p.arrival_rate
    success = p.success_prob * p.lookup_rate
    failure = (1.0 - p.success_prob) * p.lookup_rate
    top = p.queue_size

    yield EMPTY_STATE, PmsmState(1, SUCCESS), arrival
    for i in range(1, top + 1):
        current = PmsmState(i, SUCCESS)
        if i < top:
            yield current, PmsmState(i + 1, SUCCESS), arrival
        if success > 0:
            yield current, PmsmState(i - 1, SUCCESS) if i > 1 else EMPTY_STATE, success
        if failure > 0:
            yield current, PmsmState(i, FAILURE), failure

        retried = PmsmState(i, FAILURE)
        if i < top:
            yield retried, PmsmState(i + 1, FAILURE), arrival
        if i == 1:
            # second lookup ends the request either way
            yield retried, EMPTY_STATE, p.lookup_rate
            continue
        if success > 0:
            yield retried, PmsmState(i - 1, SUCCESS), success
        if failure > 0:
            yield retried, PmsmState(i - 1, FAILURE), failure


def build_pmsm(p: PmsmParams) -> CtmcModel:
    space = _space(p.queue_size)
    return CtmcModel(space=space, generator=build_generator(space, _transitions(p)))


def pmsm_outputs(model: CtmcModel, pi: ProbabilityVector, p: PmsmParams) -> PmsmSolution:
    labels = model.space.states
    weights = pi.values
    queued = np.fromiter((label.i for label in labels), dtype=float, count=len(labels))
    failed = np.fromiter((label.flag == FAILURE for label in labels), dtype=bool, count=len(labels))

    alpha = p.lookup_rate
    bp_queue = float(weights[queued == p.queue_size].sum())
    resource_weight = alpha * (1.0 - p.success_prob) / (alpha * p.success_prob + p.arrival_rate)
    bp_resource = resource_weight * float(weights[failed].sum())
    mean_queue = float(weights @ queued)

    flags = []
    admitted = 1.0 - bp_queue
    if p.arrival_rate * admitted > 0:
        queue_wait = mean_queue / (p.arrival_rate * admitted)
        lookup_delay = (1.0 / alpha + (1.0 - p.success_prob) / alpha) / admitted
    else:
        logger.warning("Global queue admits nothing; macro queue wait and lookup delay reported as 0")
        queue_wait = 0.0
        lookup_delay = 0.0
        flags.append('degenerate_load:wt_Q')

    return PmsmSolution(
        pi=pi,
        bp_queue=bp_queue,
        bp_resource=bp_resource,
        mean_queue=mean_queue,
        queue_wait=queue_wait,
        lookup_delay=lookup_delay,
        p_immediate=pi[model.space.index_of(EMPTY_STATE)],
        state_count=model.size,
        flags=tuple(flags),
    )


def solve_pmsm(p: PmsmParams, solver: Optional[SolverOptions] = None) -> PmsmSolution:
    model = build_pmsm(p)
    solution = pmsm_outputs(model, model.solve(solver), p)
    logger.info(
        f"PMSM (lambda_a={p.arrival_rate:.6g}, P_s={p.success_prob:.6g}): "
        f"BP_q={solution.bp_queue:.6g}, BP_r={solution.bp_resource:.6g}"
    )
    return solution
