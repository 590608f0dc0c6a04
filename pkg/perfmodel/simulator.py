"""
Discrete-event simulation of the whole two-layer platform.

Every user owns an autoscaling host group of VMs running containers; VM
requests from the host groups and from outside tenants share the IaaS
back end (global queue, two-attempt lookup, per-PM provisioning queue).
Used as an independent check on the analytic engine.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Deque, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import simpy
from django.conf import settings
from scipy import stats

from .exceptions import InvalidConfig, SimulationInvariantError
from .report import ComparisonVerdict, FieldCheck, PerformanceReport

if TYPE_CHECKING:
    from .config import SystemConfig

logger = logging.getLogger(__name__)

CONFIDENCE = 0.95

# Metrics shared with the analytic report
VALIDATION_METRICS = (
    'micro_rejection',
    'micro_total_delay',
    'micro_p_immediate',
    'micro_mean_vms',
    'micro_mean_containers',
    'micro_mean_util',
    'macro_rejection',
    'macro_total_delay',
)
PROBABILITY_METRICS = frozenset({'micro_rejection', 'micro_p_immediate', 'micro_mean_util', 'macro_rejection'})


@dataclass(frozen=True)
class SimConfig:
    """Analytic configuration plus the simulation run settings."""

    system: 'SystemConfig'
    horizon: float
    warmup_fraction: float
    replications: int
    seed: int
    immediate_threshold: float = 0.0

    def __post_init__(self):
        if not self.horizon > 0:
            raise InvalidConfig(f"horizon must be positive, got {self.horizon}")
        if self.replications < 1:
            raise InvalidConfig(f"need at least one replication, got {self.replications}")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise InvalidConfig(f"warmup fraction must lie in [0, 1), got {self.warmup_fraction}")
        if self.immediate_threshold < 0:
            raise InvalidConfig("immediate threshold must not be negative")
        if self.seed < 0:
            raise InvalidConfig("seed must not be negative")

    @property
    def warmup(self) -> float:
        return self.warmup_fraction * self.horizon

    @classmethod
    def from_system(cls, system: 'SystemConfig', seed: Optional[int] = None,
                    replications: Optional[int] = None, horizon: Optional[float] = None) -> 'SimConfig':
        """Fill unset run settings from the config's sim section, then from PERFMODEL_SETTINGS."""
        defaults = settings.PERFMODEL_SETTINGS
        overrides = system.sim
        if horizon is None:
            horizon = overrides.horizon
        if horizon is None:
            rate = system.micro.arrival_rate or system.macro.arrival_rate
            horizon = defaults['SIM_HORIZON_ARRIVALS'] / rate
        return cls(
            system=system,
            horizon=horizon,
            warmup_fraction=(overrides.warmup_fraction if overrides.warmup_fraction is not None
                             else defaults['SIM_WARMUP_FRACTION']),
            replications=replications or overrides.replications or defaults['SIM_REPLICATIONS'],
            seed=seed if seed is not None else (overrides.seed or 0),
            immediate_threshold=overrides.immediate_threshold or 0.0,
        )

    def to_payload(self) -> dict:
        """JSON-safe form for Celery."""
        return {
            'entries': [list(entry) for entry in self.system.entries],
            'horizon': self.horizon,
            'warmup_fraction': self.warmup_fraction,
            'replications': self.replications,
            'seed': self.seed,
            'immediate_threshold': self.immediate_threshold,
        }

    @classmethod
    def from_payload(cls, payload: Mapping) -> 'SimConfig':
        from .config import config_from_entries

        system = config_from_entries({key: (value, 0) for key, value in payload['entries']})
        return cls(
            system=system,
            horizon=payload['horizon'],
            warmup_fraction=payload['warmup_fraction'],
            replications=payload['replications'],
            seed=payload['seed'],
            immediate_threshold=payload['immediate_threshold'],
        )



@dataclass
class SimVm:
    id: int
    pm: Optional[int]
    containers: int = 0


@dataclass
class HostGroup:
    index: int
    vms: List[SimVm]
    # arrival times; the head stays queued while it is being instantiated
    queue: Deque[float] = field(default_factory=deque)
    changed: Optional[simpy.Event] = None
    pending_acquire: bool = False
    release_armed: bool = False

    @property
    def k(self) -> int:
        return len(self.vms)

    @property
    def running(self) -> int:
        return sum(vm.containers for vm in self.vms)


@dataclass
class MacroRequest:
    id: int
    owner: Optional[int]
    submitted: float
    attempt: int = 1
    lookup_time: float = 0.0


@dataclass
class PhysicalMachine:
    index: int
    unit: simpy.Resource
    deployed: int = 0

    @property
    def pending(self) -> int:
        """Requests queued at or being provisioned by the hypervisor."""
        return len(self.unit.users) + len(self.unit.queue)

    @property
    def occupancy(self) -> int:
        return self.pending + self.deployed


@dataclass(frozen=True)
class ReplicationResult:
    index: int
    metrics: Dict[str, float]
    counters: Dict[str, int]


class PlatformSimulation:
    """One replication: a simpy environment, RNG streams and all platform state."""

    def __init__(self, sim: SimConfig, seed_sequence: np.random.SeedSequence, index: int = 0):
        self.sim = sim
        self.index = index
        system = sim.system
        self.micro = system.micro
        self.macro = system.macro
        arrival_seq, service_seq, placement_seq = seed_sequence.spawn(3)
        self.arrivals = np.random.default_rng(arrival_seq)
        self.services = np.random.default_rng(service_seq)
        self.placement = np.random.default_rng(placement_seq)

        self.env = simpy.Environment()
        self.next_vm_id = 0
        self.next_request_id = 0

        self.groups = [
            HostGroup(index=g, vms=[self._new_vm(pm=None) for _ in range(self.micro.min_vms)])
            for g in range(self.micro.users)
        ]
        self.pms = [PhysicalMachine(index=p, unit=simpy.Resource(self.env, capacity=1))
                    for p in range(self.macro.pool_size)]
        # holder is the request in lookup, queue the rest of the global queue
        self.lookup = simpy.Resource(self.env, capacity=1)

        self.latency_total = 0.0
        self.latency_count = 0
        self.initial_latency = 1.0 / self.macro.provisioning_rate + 1.0 / self.macro.lookup_rate

        # time integrals since warmup
        self.last_time = 0.0
        self.area_vms = 0.0
        self.area_containers = 0.0
        self.area_queue = 0.0
        self.area_util = 0.0

        self.counters: Dict[str, int] = {
            'micro_arrived': 0, 'micro_rejected': 0, 'micro_started': 0, 'containers_completed': 0,
            'macro_submitted': 0, 'macro_rejected_fq': 0, 'macro_rejected_nc': 0, 'macro_deployed': 0,
            'vms_released': 0, 'vms_expired': 0, 'events': 0,
        }
        # post-warmup samples
        self.window = {
            'micro_arrivals': 0, 'micro_rejected': 0, 'micro_immediate': 0, 'micro_admitted': 0,
            'macro_submitted': 0, 'macro_fq': 0, 'macro_nc': 0, 'macro_arrive_empty': 0,
        }
        self.waits: List[float] = []
        self.macro_delays: List[float] = []

    @property
    def now(self) -> float:
        return self.env.now

    def _exp(self, rng: np.random.Generator, rate: float) -> float:
        return float(rng.exponential(1.0 / rate))

    def _new_vm(self, pm: Optional[int]) -> SimVm:
        self.next_vm_id += 1
        return SimVm(id=self.next_vm_id, pm=pm)

    def _in_window(self, when: float) -> bool:
        return when >= self.sim.warmup

    def _global_queue_length(self) -> int:
        return len(self.lookup.users) + len(self.lookup.queue)

    def _advance(self, until: float):
        start = max(self.last_time, self.sim.warmup)
        if until > start:
            span = until - start
            per_vm = self.micro.containers_per_vm
            for group in self.groups:
                k, running, queued = group.k, group.running, len(group.queue)
                self.area_vms += span * k
                self.area_containers += span * running
                self.area_queue += span * queued
                self.area_util += span * (queued + running) / (k * per_vm)
        self.last_time = until

    # micro layer

    def _wake(self, group: HostGroup):
        if group.changed is not None and not group.changed.triggered:
            group.changed.succeed()

    def _user(self, group: HostGroup):
        while True:
            yield self.env.timeout(self._exp(self.arrivals, self.micro.arrival_rate))
            self._micro_arrival(group)

    def _micro_arrival(self, group: HostGroup):
        counted = self._in_window(self.now)
        self.counters['micro_arrived'] += 1
        if counted:
            self.window['micro_arrivals'] += 1
        if len(group.queue) + group.running >= self.micro.max_vms * self.micro.containers_per_vm:
            self.counters['micro_rejected'] += 1
            if counted:
                self.window['micro_rejected'] += 1
            return
        if counted:
            self.window['micro_admitted'] += 1
        group.queue.append(self.now)
        self._wake(group)
        self._autoscale(group)

    def _instantiator(self, group: HostGroup):
        """One container instantiation at a time, FIFO, only into a free slot."""
        per_vm = self.micro.containers_per_vm
        while True:
            while not group.queue or group.running >= group.k * per_vm:
                group.changed = self.env.event()
                yield group.changed
            arrived = group.queue[0]
            if self._in_window(arrived) and self.now - arrived <= self.sim.immediate_threshold:
                self.window['micro_immediate'] += 1
            yield self.env.timeout(self._exp(self.services, self.micro.instantiation_rate))

            group.queue.popleft()
            candidates = [vm for vm in group.vms if vm.containers < per_vm]
            if not candidates:
                raise SimulationInvariantError(
                    f"host group {group.index} has no free slot for an instantiated container"
                )
            # binpack: fullest VM with room, lowest id on ties
            vm = max(candidates, key=lambda item: (item.containers, -item.id))
            vm.containers += 1
            self.counters['micro_started'] += 1
            if self._in_window(arrived):
                self.waits.append(self.now - arrived)
            self.env.process(self._container(group, vm))
            self._autoscale(group)

    def _container(self, group: HostGroup, vm: SimVm):
        yield self.env.timeout(self._exp(self.services, self.micro.completion_rate))
        vm.containers -= 1
        self.counters['containers_completed'] += 1
        self._wake(group)
        self._autoscale(group)

    def _autoscale(self, group: HostGroup):
        micro = self.micro
        u = (len(group.queue) + group.running) / (group.k * micro.containers_per_vm)
        if u >= micro.high_util and group.k < micro.max_vms and not group.pending_acquire:
            group.pending_acquire = True
            self._submit(owner=group.index)
        if u <= micro.low_util and group.k > micro.min_vms and not group.release_armed:
            group.release_armed = True
            mean = self.latency_total / self.latency_count if self.latency_count else self.initial_latency
            self.env.process(self._release_timer(group, float(self.services.exponential(mean))))

    def _release_timer(self, group: HostGroup, delay: float):
        yield self.env.timeout(delay)
        group.release_armed = False
        micro = self.micro
        u = (len(group.queue) + group.running) / (group.k * micro.containers_per_vm)
        empty = [vm for vm in group.vms if vm.containers == 0]
        if u <= micro.low_util and group.k > micro.min_vms and empty:
            victim = min(empty, key=lambda vm: (vm.pm is None, -vm.id))
            group.vms.remove(victim)
            self.counters['vms_released'] += 1
            if victim.pm is not None:
                self.pms[victim.pm].deployed -= 1
        self._autoscale(group)

    # macro layer

    def _tenants(self):
        while True:
            yield self.env.timeout(self._exp(self.arrivals, self.macro.arrival_rate))
            self._submit(owner=None)

    def _submit(self, owner: Optional[int]):
        self.next_request_id += 1
        request = MacroRequest(id=self.next_request_id, owner=owner, submitted=self.now)
        counted = self._in_window(self.now)
        queued = self._global_queue_length()
        self.counters['macro_submitted'] += 1
        if counted:
            self.window['macro_submitted'] += 1
            if not queued:
                self.window['macro_arrive_empty'] += 1
        if queued >= self.macro.queue_size:
            self.counters['macro_rejected_fq'] += 1
            if counted:
                self.window['macro_fq'] += 1
            self._acquire_failed(request)
            return
        # the slot is taken now so the global queue length is exact at once
        self.env.process(self._vm_request(request, self.lookup.request()))

    def _vm_request(self, request: MacroRequest, slot: simpy.resources.resource.Request):
        with slot:
            yield slot
            while True:
                started = self.now
                yield self.env.timeout(self._exp(self.services, self.macro.lookup_rate))
                request.lookup_time += self.now - started
                room = [pm for pm in self.pms if pm.occupancy < self.macro.vms_per_pm]
                if room:
                    break
                if request.attempt == 2:
                    self.counters['macro_rejected_nc'] += 1
                    if self._in_window(request.submitted):
                        self.window['macro_nc'] += 1
                    self._acquire_failed(request)
                    return
                request.attempt = 2
            pm = room[int(self.placement.integers(len(room)))]
            provisioning = pm.unit.request()

        with provisioning:
            yield provisioning
            yield self.env.timeout(self._exp(self.services, self.macro.provisioning_rate))
            pm.deployed += 1
        self._provisioned(pm, request)

    def _acquire_failed(self, request: MacroRequest):
        if request.owner is not None:
            self.groups[request.owner].pending_acquire = False

    def _provisioned(self, pm: PhysicalMachine, request: MacroRequest):
        self.counters['macro_deployed'] += 1
        latency = self.now - request.submitted
        if self._in_window(request.submitted):
            # lookup service is counted on top of the queue sojourn, as in the analytic total
            self.macro_delays.append(latency + request.lookup_time)
        if request.owner is None:
            self.env.process(self._tenant_vm(pm))
            return
        group = self.groups[request.owner]
        group.pending_acquire = False
        group.vms.append(self._new_vm(pm=pm.index))
        self.latency_total += latency
        self.latency_count += 1
        self._wake(group)
        self._autoscale(group)

    def _tenant_vm(self, pm: PhysicalMachine):
        yield self.env.timeout(self._exp(self.services, self.macro.completion_rate))
        pm.deployed -= 1
        self.counters['vms_expired'] += 1

    # driver

    def check_capacity(self):
        micro, macro = self.micro, self.macro
        for group in self.groups:
            if not micro.min_vms <= group.k <= micro.max_vms:
                raise SimulationInvariantError(f"host group {group.index} holds {group.k} VMs")
            for vm in group.vms:
                if not 0 <= vm.containers <= micro.containers_per_vm:
                    raise SimulationInvariantError(f"VM {vm.id} holds {vm.containers} containers")
            if len(group.queue) + group.running > micro.max_vms * micro.containers_per_vm:
                raise SimulationInvariantError(f"host group {group.index} exceeds its request capacity")
        for pm in self.pms:
            if not 0 <= pm.occupancy <= macro.vms_per_pm:
                raise SimulationInvariantError(f"PM {pm.index} holds {pm.occupancy} VMs")
        if self._global_queue_length() > macro.queue_size:
            raise SimulationInvariantError("global queue exceeds its capacity")

    def check_conservation(self):
        counters = self.counters
        queued = sum(len(group.queue) for group in self.groups)
        running = sum(group.running for group in self.groups)
        if counters['micro_arrived'] != counters['micro_rejected'] + counters['micro_started'] + queued:
            raise SimulationInvariantError("micro requests are not conserved")
        if counters['micro_started'] != counters['containers_completed'] + running:
            raise SimulationInvariantError("containers are not conserved")
        in_flight = self._global_queue_length() + sum(pm.pending for pm in self.pms)
        rejected = counters['macro_rejected_fq'] + counters['macro_rejected_nc']
        if counters['macro_submitted'] != rejected + counters['macro_deployed'] + in_flight:
            raise SimulationInvariantError("VM requests are not conserved")

    def run(self) -> ReplicationResult:
        env = self.env
        for group in self.groups:
            env.process(self._instantiator(group))
            if self.micro.arrival_rate > 0:
                env.process(self._user(group))
        if self.macro.arrival_rate > 0:
            env.process(self._tenants())

        # stepped by hand so state integrals and capacity checks see every event
        horizon = self.sim.horizon
        while env.peek() <= horizon:
            self._advance(env.peek())
            env.step()
            self.counters['events'] += 1
            self.check_capacity()
        self._advance(horizon)
        self.check_conservation()
        return ReplicationResult(index=self.index, metrics=self.metrics(), counters=dict(self.counters))

    def metrics(self) -> Dict[str, float]:
        window = self.window
        span = self.sim.horizon - self.sim.warmup
        users = len(self.groups)
        arrivals = window['micro_arrivals']
        submitted = window['macro_submitted']
        queue_wait = float(np.mean(self.waits)) if self.waits else 0.0
        return {
            'micro_rejection': window['micro_rejected'] / arrivals if arrivals else 0.0,
            'micro_queue_wait': queue_wait,
            'micro_total_delay': queue_wait + 1.0 / self.micro.instantiation_rate,
            'micro_p_immediate': window['micro_immediate'] / arrivals if arrivals else 1.0,
            'micro_mean_vms': self.area_vms / (users * span),
            'micro_mean_containers': self.area_containers / (users * span),
            'micro_mean_queue': self.area_queue / (users * span),
            'micro_mean_util': self.area_util / (users * span),
            'micro_admission_rate': window['micro_admitted'] / (users * span),
            'macro_rejection': (window['macro_fq'] + window['macro_nc']) / submitted if submitted else 0.0,
            'macro_rejection_fq': window['macro_fq'] / submitted if submitted else 0.0,
            'macro_rejection_nc': window['macro_nc'] / submitted if submitted else 0.0,
            'macro_total_delay': float(np.mean(self.macro_delays)) if self.macro_delays else 0.0,
            'macro_p_immediate': window['macro_arrive_empty'] / submitted if submitted else 1.0,
        }


def replication_seeds(seed: int, replications: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(replications)


def simulate_replication(sim: SimConfig, index: int) -> ReplicationResult:
    """Run replication `index`; its RNG streams depend only on (seed, index)."""
    seed_sequence = replication_seeds(sim.seed, sim.replications)[index]
    result = PlatformSimulation(sim, seed_sequence, index).run()
    logger.info(f"Replication {index} finished after {result.counters['events']} events")
    return result


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    variance: float
    ci_low: float
    ci_high: float
    samples: int

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0

    @classmethod
    def from_samples(cls, samples: Sequence[float]) -> 'MetricSummary':
        values = np.asarray(samples, dtype=float)
        n = values.size
        mean = float(values.mean())
        if n < 2:
            return cls(mean=mean, variance=0.0, ci_low=mean, ci_high=mean, samples=n)
        variance = float(values.var(ddof=1))
        half = float(stats.t.ppf(0.5 + CONFIDENCE / 2.0, n - 1)) * math.sqrt(variance / n)
        return cls(mean=mean, variance=variance, ci_low=mean - half, ci_high=mean + half, samples=n)


@dataclass(frozen=True)
class SimStats:
    config_hash: str
    seed: int
    horizon: float
    warmup: float
    replications: int
    metrics: Dict[str, MetricSummary]
    counters: Tuple[Dict[str, int], ...] = ()

    def __getitem__(self, name: str) -> MetricSummary:
        return self.metrics[name]

    @classmethod
    def from_replications(cls, sim: SimConfig, results: Sequence[ReplicationResult]) -> 'SimStats':
        ordered = sorted(results, key=lambda result: result.index)
        names = list(ordered[0].metrics)
        return cls(
            config_hash=sim.system.config_hash,
            seed=sim.seed,
            horizon=sim.horizon,
            warmup=sim.warmup,
            replications=len(ordered),
            metrics={
                name: MetricSummary.from_samples([result.metrics[name] for result in ordered])
                for name in names
            },
            counters=tuple(result.counters for result in ordered),
        )

    def as_rows(self) -> List[dict]:
        return [
            {
                'metric': name,
                'mean': summary.mean,
                'variance': summary.variance,
                'ci_low': summary.ci_low,
                'ci_high': summary.ci_high,
                'half_width': summary.half_width,
                'replications': summary.samples,
            }
            for name, summary in self.metrics.items()
        ]

    def as_dict(self) -> dict:
        return {
            'config_hash': self.config_hash,
            'seed': self.seed,
            'horizon': self.horizon,
            'warmup': self.warmup,
            'replications': self.replications,
            'metrics': {
                name: {
                    'mean': summary.mean,
                    'variance': summary.variance,
                    'ci_low': summary.ci_low,
                    'ci_high': summary.ci_high,
                    'samples': summary.samples,
                }
                for name, summary in self.metrics.items()
            },
            'counters': [dict(counter) for counter in self.counters],
        }


def run_simulation(cfg: SimConfig) -> SimStats:
    """Run every replication in order and aggregate."""
    logger.info(
        f"Simulating {cfg.replications} replications of {cfg.horizon:g} {cfg.system.time_unit}s "
        f"(seed {cfg.seed})"
    )
    results = [simulate_replication(cfg, index) for index in range(cfg.replications)]
    return SimStats.from_replications(cfg, results)


def validate_against_analytic(report: PerformanceReport, sim_stats: SimStats, tol: float,
                              atol: Optional[float] = None,
                              metrics: Sequence[str] = VALIDATION_METRICS) -> ComparisonVerdict:
    """
    Check each shared analytic metric against the simulated mean.

    A metric passes when |analytic - simulated| is within the largest of
    tol * |simulated|, the 95% CI half-width and (for probabilities) `atol`.
    With tol = 0 only an exact match passes.
    """
    if atol is None:
        atol = settings.PERFMODEL_SETTINGS['VALIDATION_PROBABILITY_ATOL']
    if report.provenance.config_hash != sim_stats.config_hash:
        logger.warning("Validating a report against a simulation of a different config")

    checks = []
    for name in metrics:
        summary = sim_stats[name]
        if tol > 0:
            allowed = max(tol * abs(summary.mean), summary.half_width,
                          atol if name in PROBABILITY_METRICS else 0.0)
        else:
            allowed = 0.0
        checks.append(FieldCheck(
            name=name, value=report.metric(name), reference=summary.mean,
            allowed=allowed, ci_half_width=summary.half_width,
        ))
    return ComparisonVerdict(checks=tuple(checks))
