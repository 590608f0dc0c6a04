"""
Container sub-model: one user's autoscaling host group as a CTMC over
(queued requests i, running containers j, active VMs k).
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, NamedTuple, Optional, Tuple

import numpy as np
from django.conf import settings

from .ctmc import CtmcModel, ProbabilityVector, SolverOptions, StateSpace, Transition, build_generator
from .exceptions import CapacityOverflow, ValidationError

logger = logging.getLogger(__name__)


class CsmState(NamedTuple):
    i: int
    j: int
    k: int


@dataclass(frozen=True)
class CsmParams:
    arrival_rate: float
    instantiation_rate: float
    completion_rate: float
    min_vms: int
    max_vms: int
    containers_per_vm: int
    high_util: float
    low_util: float
    acquire_rate: float
    release_rate: float

    def __post_init__(self):
        if not 1 <= self.min_vms <= self.max_vms:
            raise ValidationError('min_vms', f"need 1 <= s <= S, got s={self.min_vms}, S={self.max_vms}")
        if self.containers_per_vm < 1:
            raise ValidationError('containers_per_vm', "must be at least 1")
        if not 0 <= self.low_util < self.high_util <= 1:
            raise ValidationError(
                'low_util', f"need 0 <= low < high <= 1, got {self.low_util} / {self.high_util}"
            )
        if self.arrival_rate < 0:
            raise ValidationError('arrival_rate', "must not be negative")
        for name in ('instantiation_rate', 'completion_rate', 'acquire_rate', 'release_rate'):
            if not getattr(self, name) > 0:
                raise ValidationError(name, "must be positive")

    @property
    def queue_capacity(self) -> int:
        """L_q = S * M."""
        return self.max_vms * self.containers_per_vm


@dataclass(frozen=True)
class CsmSolution:
    pi: ProbabilityVector
    bp_q: float
    p_req: float
    p_rel: float
    lambda_c: float
    eta_c: float
    mean_queue: float
    queue_wait: float
    mean_containers: float
    mean_vms: float
    mean_util: float
    util_ratio_of_means: float
    p_immediate: float
    total_delay: float
    state_count: int
    flags: Tuple[str, ...] = ()


def utilization(state: CsmState, containers_per_vm: int) -> float:
    """u = (i + j) / (k * M)."""
    i, j, k = state
    if k < 1:
        raise ValueError("utilization needs at least one active VM")
    return (i + j) / (k * containers_per_vm)


def enumerated_state_count(min_vms: int, max_vms: int, containers_per_vm: int) -> int:
    """Size of the (i, j, k) lattice without building it."""
    capacity = max_vms * containers_per_vm
    total = 0
    for k in range(min_vms, max_vms + 1):
        top = k * containers_per_vm
        total += (top + 1) * (capacity + 1) - top * (top + 1) // 2
    return total


def published_state_count(min_vms: int, max_vms: int, containers_per_vm: int) -> int:
    """Published size formula M*S^2 - s*M*S; kept for reference, it does not match the lattice."""
    if min_vms > max_vms:
        raise ValueError("min_vms must not exceed max_vms")
    return containers_per_vm * max_vms ** 2 - min_vms * containers_per_vm * max_vms


def enumerate_states(p: CsmParams, max_states: Optional[int] = None) -> StateSpace:
    """All (i, j, k) with j <= k*M and i + j <= S*M, ordered by (k, j, i)."""
    limit = max_states or settings.PERFMODEL_SETTINGS['MAX_STATES']
    count = enumerated_state_count(p.min_vms, p.max_vms, p.containers_per_vm)
    if count > limit:
        raise CapacityOverflow(count, limit)
    return _lattice(p.min_vms, p.max_vms, p.containers_per_vm)


@lru_cache(maxsize=32)
def _lattice(min_vms: int, max_vms: int, containers_per_vm: int) -> StateSpace:
    capacity = max_vms * containers_per_vm
    return StateSpace.from_states(
        CsmState(i, j, k)
        for k in range(min_vms, max_vms + 1)
        for j in range(k * containers_per_vm + 1)
        for i in range(capacity - j + 1)
    )


@lru_cache(maxsize=32)
def _lattice_arrays(min_vms: int, max_vms: int, containers_per_vm: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    states = np.array(_lattice(min_vms, max_vms, containers_per_vm).states, dtype=np.int64)
    i, j, k = states[:, 0], states[:, 1], states[:, 2]
    for column in (i, j, k):
        column.setflags(write=False)
    return i, j, k


def _transitions(space: StateSpace, p: CsmParams) -> Iterator[Transition]:
    capacity = p.queue_capacity
    per_vm = p.containers_per_vm
    for state in space:
        i, j, k = state
        if i + j < capacity and p.arrival_rate > 0:
            yield state, CsmState(i + 1, j, k), p.arrival_rate
        if i > 0 and j < k * per_vm:
            yield state, CsmState(i - 1, j + 1, k), p.instantiation_rate
        if j > 0:
            yield state, CsmState(i, j - 1, k), j * p.completion_rate

        u = utilization(state, per_vm)
        if u >= p.high_util and k < p.max_vms:
            yield state, CsmState(i, j, k + 1), p.acquire_rate
        if u <= p.low_util and k > p.min_vms and j <= (k - 1) * per_vm:
            yield state, CsmState(i, j, k - 1), p.release_rate


def build_csm(p: CsmParams, max_states: Optional[int] = None) -> CtmcModel:
    space = enumerate_states(p, max_states)
    generator = build_generator(space, _transitions(space, p))
    return CtmcModel(space=space, generator=generator)


def csm_outputs(model: CtmcModel, pi: ProbabilityVector, p: CsmParams) -> CsmSolution:
    i, j, k = _lattice_arrays(p.min_vms, p.max_vms, p.containers_per_vm)
    weights = pi.values
    per_vm = p.containers_per_vm
    capacity = p.queue_capacity
    u = (i + j) / (k * per_vm)

    bp_q = float(weights[(i + j) == capacity].sum())
    p_req = float(weights[(u >= p.high_util) & (k < p.max_vms)].sum())
    p_rel = float(weights[(u <= p.low_util) & (k > p.min_vms)].sum())
    mean_queue = float(weights @ i)
    mean_containers = float(weights @ j)
    mean_vms = float(weights @ k)
    mean_util = float(weights @ u)
    p_immediate = float(weights[(i == 0) & (j < k * per_vm) & ((i + j) < capacity)].sum())

    flags = []
    throughput = p.arrival_rate * (1.0 - bp_q)
    if throughput > 0:
        queue_wait = mean_queue / throughput
    else:
        logger.warning("Container sub-model has no admitted load; queue wait reported as 0")
        queue_wait = 0.0
        flags.append('degenerate_load:wt_q')

    return CsmSolution(
        pi=pi,
        bp_q=bp_q,
        p_req=p_req,
        p_rel=p_rel,
        lambda_c=p.arrival_rate * p_req,
        eta_c=p.completion_rate * p_rel,
        mean_queue=mean_queue,
        queue_wait=queue_wait,
        mean_containers=mean_containers,
        mean_vms=mean_vms,
        mean_util=mean_util,
        util_ratio_of_means=(mean_queue + mean_containers) / (per_vm * mean_vms),
        p_immediate=p_immediate,
        total_delay=queue_wait + 1.0 / p.instantiation_rate,
        state_count=model.size,
        flags=tuple(flags),
    )


def solve_csm(p: CsmParams, solver: Optional[SolverOptions] = None,
              max_states: Optional[int] = None) -> CsmSolution:
    """Build, solve and interrogate the container sub-model in one call."""
    model = build_csm(p, max_states)
    pi = model.solve(solver)
    solution = csm_outputs(model, pi, p)
    logger.info(
        f"CSM ({model.size} states): bp_q={solution.bp_q:.6g}, "
        f"lambda_c={solution.lambda_c:.6g}, eta_c={solution.eta_c:.6g}"
    )
    return solution
