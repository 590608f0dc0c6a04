"""
VM sub-model: one representative PM with a provisioning queue, a single
hypervisor provisioning unit and up to m deployed VMs.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, NamedTuple, Optional, Tuple

import numpy as np

from .ctmc import CtmcModel, ProbabilityVector, SolverOptions, StateSpace, Transition, build_generator
from .exceptions import ValidationError

logger = logging.getLogger(__name__)


class VmsmState(NamedTuple):
    i: int
    j: int
    k: int


@dataclass(frozen=True)
class VmsmParams:
    arrival_rate: float
    provisioning_rate: float
    completion_rate: float
    release_rate: float
    vms_per_pm: int
    pool_size: int

    def __post_init__(self):
        if self.vms_per_pm < 1:
            raise ValidationError('vms_per_pm', "must be at least 1")
        if self.pool_size < 1:
            raise ValidationError('pool_size', "must be at least 1")
        if self.arrival_rate < 0:
            raise ValidationError('arrival_rate', "must not be negative")
        if not self.provisioning_rate > 0:
            raise ValidationError('provisioning_rate', "must be positive")
        if not self.completion_rate > 0:
            raise ValidationError('completion_rate', "must be positive")
        if self.release_rate < 0:
            raise ValidationError('release_rate', "must not be negative")


@dataclass(frozen=True)
class VmsmSolution:
    pi: ProbabilityVector
    p_na: float
    success_prob: float
    queue_wait: float
    provisioning_time: float
    mean_deployed: float
    state_count: int
    flags: Tuple[str, ...] = ()


def per_pm_arrival_rate(arrival_rate: float, bp_queue: float, pool_size: int) -> float:
    """lambda_h = lambda_a * (1 - BP_q) / N."""
    if pool_size < 1:
        raise ValueError("pool_size must be at least 1")
    if not 0.0 <= bp_queue <= 1.0:
        raise ValueError(f"BP_q must lie in [0, 1], got {bp_queue}")
    return arrival_rate * (1.0 - bp_queue) / pool_size


def vmsm_state_count(vms_per_pm: int) -> int:
    """f(m) = 2 f(m-1) - f(m-2) + 1 with f(1) = 3, f(2) = 6."""
    if vms_per_pm < 1:
        raise ValueError("vms_per_pm must be at least 1")
    previous, current = 1, 3
    for _ in range(vms_per_pm - 1):
        previous, current = current, 2 * current - previous + 1
    return current


@lru_cache(maxsize=16)
def _space(vms_per_pm: int) -> StateSpace:
    # a queued request implies the provisioning unit is busy
    return StateSpace.from_states(
        VmsmState(i, j, k)
        for k in range(vms_per_pm + 1)
        for j in (0, 1)
        for i in range(vms_per_pm - k - j + 1 if j else 1)
        if i + j + k <= vms_per_pm
    )


def _transitions(space: StateSpace, p: VmsmParams) -> Iterator[Transition]:
    capacity = p.vms_per_pm
    for state in space:
        i, j, k = state
        if i + j + k < capacity and p.arrival_rate > 0:
            yield state, VmsmState(0, 1, k) if j == 0 else VmsmState(i + 1, 1, k), p.arrival_rate
        if j == 1:
            yield state, VmsmState(i - 1, 1, k + 1) if i > 0 else VmsmState(0, 0, k + 1), p.provisioning_rate
        if k >= 1:
            yield state, VmsmState(i, j, k - 1), k * p.completion_rate + p.release_rate


def build_vmsm(p: VmsmParams) -> CtmcModel:
    space = _space(p.vms_per_pm)
    return CtmcModel(space=space, generator=build_generator(space, _transitions(space, p)))


def vmsm_outputs(model: CtmcModel, pi: ProbabilityVector, p: VmsmParams) -> VmsmSolution:
    states = np.array(model.space.states, dtype=np.int64)
    i, j, k = states[:, 0], states[:, 1], states[:, 2]
    weights = pi.values

    p_na = float(weights[(i + j + k) == p.vms_per_pm].sum())
    flags = []
    throughput = p.arrival_rate * (1.0 - p_na)
    if throughput > 0:
        queue_wait = float(weights @ i) / throughput
        provisioning_time = float(weights @ j) / throughput
    else:
        logger.warning("PM receives no admitted requests; PM wait and provisioning time reported as 0")
        queue_wait = 0.0
        provisioning_time = 0.0
        flags.append('degenerate_load:PM_wt')

    return VmsmSolution(
        pi=pi,
        p_na=p_na,
        success_prob=1.0 - p_na ** p.pool_size,
        queue_wait=queue_wait,
        provisioning_time=provisioning_time,
        mean_deployed=float(weights @ k),
        state_count=model.size,
        flags=tuple(flags),
    )


def solve_vmsm(p: VmsmParams, solver: Optional[SolverOptions] = None) -> VmsmSolution:
    model = build_vmsm(p)
    solution = vmsm_outputs(model, model.solve(solver), p)
    logger.info(
        f"VMSM (lambda_h={p.arrival_rate:.6g}): P_na={solution.p_na:.6g}, P_s={solution.success_prob:.6g}"
    )
    return solution
