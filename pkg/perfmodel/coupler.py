"""
Successive substitution across the container, PM and VM sub-models.

The container sub-model hands (lambda_c, eta_c) to the macro layer; the
macro layer hands back a total provisioning delay td, from which the VM
acquire/release rates alpha = beta = 1/td are derived. Inside the macro
layer P_s and BP_q are exchanged between the PM and VM sub-models.
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Optional, Tuple

from django.conf import settings

from .csm import CsmParams, CsmSolution, solve_csm
from .exceptions import CouplingNotConverged, NonPositiveDelay
from .pmsm import PmsmParams, PmsmSolution, solve_pmsm
from .vmsm import VmsmParams, VmsmSolution, per_pm_arrival_rate, solve_vmsm

if TYPE_CHECKING:
    from .config import SystemConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CouplingOptions:
    """Fixed-point knobs; unset fields come from PERFMODEL_SETTINGS."""

    max_err: Optional[float] = None
    max_outer: Optional[int] = None
    max_inner: Optional[int] = None
    initial_success_prob: Optional[float] = None
    initial_acquire_rate: Optional[float] = None

    def __post_init__(self):
        defaults = settings.PERFMODEL_SETTINGS
        for name, key in (('max_err', 'MAX_ERR'), ('max_outer', 'MAX_OUTER'),
                          ('max_inner', 'MAX_INNER'), ('initial_success_prob', 'INITIAL_SUCCESS_PROB')):
            if getattr(self, name) is None:
                object.__setattr__(self, name, defaults[key])
        if self.initial_acquire_rate is None:
            # seconds; SystemConfig always supplies a value in its own time unit
            object.__setattr__(self, 'initial_acquire_rate', 1.0 / defaults['DEFAULT_ACQUIRE_TIME_SECONDS'])
        if not self.max_err > 0:
            raise ValueError("max_err must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be at least 1")
        if not 0.0 <= self.initial_success_prob <= 1.0:
            raise ValueError("initial_success_prob must lie in [0, 1]")
        if not self.initial_acquire_rate > 0:
            raise ValueError("initial_acquire_rate must be positive")


@dataclass(frozen=True)
class IterationRecord:
    outer: int
    inner: int
    phase: str
    bp_q: float
    bp_queue: float
    success_prob: float
    acquire_rate: float
    lambda_c: float
    eta_c: float
    difference: float


@dataclass(frozen=True)
class CoupledSolution:
    converged: bool
    outer_iterations: int
    inner_iterations: int
    total_inner_iterations: int
    damped: bool
    bp_q: float
    bp_queue: float
    bp_resource: float
    success_prob: float
    p_na: float
    lambda_a: float
    lambda_c: float
    eta_c: float
    acquire_rate: float
    release_rate: float
    total_delay: float
    csm: CsmSolution
    pmsm: PmsmSolution
    vmsm: VmsmSolution
    trace: Tuple[IterationRecord, ...] = ()
    flags: Tuple[str, ...] = ()

    @property
    def p_reject(self) -> float:
        return self.bp_queue + self.bp_resource

    def require_converged(self) -> 'CoupledSolution':
        if not self.converged:
            raise CouplingNotConverged(self)
        return self


def total_delay(queue_wait: float, lookup_delay: float, pm_queue_wait: float, provisioning_time: float) -> float:
    """td = wt_Q + lut + PM_wt + pt."""
    parts = (queue_wait, lookup_delay, pm_queue_wait, provisioning_time)
    if any(part < 0 for part in parts):
        raise ValueError(f"delay components must be non-negative, got {parts}")
    return queue_wait + lookup_delay + pm_queue_wait + provisioning_time


def derive_rates(delay: float) -> Tuple[float, float]:
    """alpha = beta = 1/td."""
    if not delay > 0:
        raise NonPositiveDelay(delay)
    rate = 1.0 / delay
    return rate, rate


class _FixedPoint:
    """Mutable iteration state for one fixed_point_solve call."""

    def __init__(self, config: 'SystemConfig', opts: CouplingOptions):
        self.config = config
        self.opts = opts
        self.trace: List[IterationRecord] = []
        self.flags: List[str] = []
        self.outer = 0
        self.total_inner = 0
        self.max_inner_used = 0
        self.damped = False

    def micro(self, acquire_rate: float, release_rate: float) -> CsmSolution:
        micro = self.config.micro
        params = CsmParams(
            arrival_rate=micro.arrival_rate,
            instantiation_rate=micro.instantiation_rate,
            completion_rate=micro.completion_rate,
            min_vms=micro.min_vms,
            max_vms=micro.max_vms,
            containers_per_vm=micro.containers_per_vm,
            high_util=micro.high_util,
            low_util=micro.low_util,
            acquire_rate=acquire_rate,
            release_rate=release_rate,
        )
        return solve_csm(params, self.config.solver, self.config.max_states)

    def pm(self, lambda_c: float, success_prob: float) -> PmsmSolution:
        macro = self.config.macro
        params = PmsmParams(
            external_rate=macro.arrival_rate,
            request_rate=self.config.micro.users * lambda_c,
            lookup_rate=macro.lookup_rate,
            success_prob=success_prob,
            queue_size=macro.queue_size,
        )
        return solve_pmsm(params, self.config.solver)

    def vm(self, lambda_a: float, bp_queue: float, eta_c: float) -> VmsmSolution:
        macro = self.config.macro
        params = VmsmParams(
            arrival_rate=per_pm_arrival_rate(lambda_a, bp_queue, macro.pool_size),
            provisioning_rate=macro.provisioning_rate,
            completion_rate=macro.completion_rate,
            release_rate=eta_c,
            vms_per_pm=macro.vms_per_pm,
            pool_size=macro.pool_size,
        )
        return solve_vmsm(params, self.config.solver)

    def inner_loop(self, csm: CsmSolution, pm: PmsmSolution, success_prob: float,
                   acquire_rate: float, damped: bool):
        lambda_a = self.config.macro.arrival_rate + self.config.micro.users * csm.lambda_c
        phase = 'inner-damped' if damped else 'inner'
        bp_queue = pm.bp_queue
        vm = None
        for inner in range(1, self.opts.max_inner + 1):
            vm = self.vm(lambda_a, bp_queue, csm.eta_c)
            if damped:
                success_prob = 0.5 * (success_prob + vm.success_prob)
            else:
                success_prob = vm.success_prob
            pm = self.pm(csm.lambda_c, success_prob)
            difference = abs(pm.bp_queue - bp_queue)
            bp_queue = pm.bp_queue
            self.total_inner += 1
            self.trace.append(IterationRecord(
                outer=self.outer, inner=inner, phase=phase, bp_q=csm.bp_q, bp_queue=bp_queue,
                success_prob=success_prob, acquire_rate=acquire_rate,
                lambda_c=csm.lambda_c, eta_c=csm.eta_c, difference=difference,
            ))
            if difference < self.opts.max_err:
                self.max_inner_used = max(self.max_inner_used, inner)
                return pm, vm, success_prob, True
        self.max_inner_used = max(self.max_inner_used, self.opts.max_inner)
        return pm, vm, success_prob, False


def fixed_point_solve(config: 'SystemConfig', opts: Optional[CouplingOptions] = None) -> CoupledSolution:
    """
    Solve the three sub-models to a joint fixed point.

    A run that hits an iteration cap is returned with converged=False and
    its trace attached rather than raised.
    """
    opts = opts or config.coupling
    state = _FixedPoint(config, opts)

    acquire_rate = release_rate = opts.initial_acquire_rate
    csm = state.micro(acquire_rate, release_rate)
    bp_q = csm.bp_q
    success_prob = opts.initial_success_prob
    converged = False

    while True:
        state.outer += 1
        pm = state.pm(csm.lambda_c, success_prob)
        pm, vm, success_prob, settled = state.inner_loop(csm, pm, success_prob, acquire_rate, damped=False)
        if not settled:
            logger.warning(
                f"Inner loop hit its cap at outer iteration {state.outer}; retrying with damped P_s"
            )
            state.damped = True
            pm, vm, success_prob, settled = state.inner_loop(csm, pm, success_prob, acquire_rate, damped=True)
            if not settled:
                logger.warning("Damped inner loop did not settle; returning a non-converged solution")
                break

        delay = total_delay(pm.queue_wait, pm.lookup_delay, vm.queue_wait, vm.provisioning_time)
        if delay > 0:
            acquire_rate, release_rate = derive_rates(delay)
        elif 'degenerate_load:td' not in state.flags:
            logger.warning("Total macro delay is zero; keeping the previous acquire/release rates")
            state.flags.append('degenerate_load:td')

        csm = state.micro(acquire_rate, release_rate)
        difference = abs(csm.bp_q - bp_q)
        bp_q = csm.bp_q
        state.trace.append(IterationRecord(
            outer=state.outer, inner=0, phase='outer', bp_q=bp_q, bp_queue=pm.bp_queue,
            success_prob=success_prob, acquire_rate=acquire_rate,
            lambda_c=csm.lambda_c, eta_c=csm.eta_c, difference=difference,
        ))
        if difference < opts.max_err:
            converged = True
            break
        if state.outer >= opts.max_outer:
            logger.warning(f"Outer loop hit its cap of {opts.max_outer} iterations")
            break

    lambda_a = config.macro.arrival_rate + config.micro.users * csm.lambda_c
    flags = tuple(dict.fromkeys((*csm.flags, *pm.flags, *vm.flags, *state.flags)))
    logger.info(
        f"Fixed point {'reached' if converged else 'NOT reached'} after {state.outer} outer / "
        f"{state.total_inner} inner iterations: bp_q={bp_q:.6g}, BP_q={pm.bp_queue:.6g}, P_s={success_prob:.6g}"
    )
    return CoupledSolution(
        converged=converged,
        outer_iterations=state.outer,
        inner_iterations=state.max_inner_used,
        total_inner_iterations=state.total_inner,
        damped=state.damped,
        bp_q=bp_q,
        bp_queue=pm.bp_queue,
        bp_resource=pm.bp_resource,
        success_prob=success_prob,
        p_na=vm.p_na,
        lambda_a=lambda_a,
        lambda_c=csm.lambda_c,
        eta_c=csm.eta_c,
        acquire_rate=acquire_rate,
        release_rate=release_rate,
        total_delay=total_delay(pm.queue_wait, pm.lookup_delay, vm.queue_wait, vm.provisioning_time),
        csm=csm,
        pmsm=pm,
        vmsm=vm,
        trace=tuple(state.trace),
        flags=flags,
    )
