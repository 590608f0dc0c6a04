"""
User-facing metrics projected from a coupled solution, plus field-by-field
comparison of two reports.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import TYPE_CHECKING, Dict, Iterable, Mapping, Optional, Tuple, Union

from .exceptions import ConfigMismatch

if TYPE_CHECKING:
    from .config import SystemConfig
    from .coupler import CoupledSolution

logger = logging.getLogger(__name__)

PROBABILITY_SLACK = 1e-9


def _probability(name: str, value: float) -> float:
    if not -PROBABILITY_SLACK <= value <= 1.0 + PROBABILITY_SLACK:
        raise ValueError(f"{name} = {value!r} is not a probability")
    return min(max(value, 0.0), 1.0)


def _delay(name: str, value: float) -> float:
    if value < 0:
        raise ValueError(f"{name} = {value!r} is negative")
    return value


@dataclass(frozen=True)
class MicroMetrics:
    rejection: float
    total_delay: float
    queue_wait: float
    p_immediate: float
    mean_vms: float
    mean_containers: float
    mean_util: float
    util_ratio_of_means: float

    def __post_init__(self):
        for name in ('rejection', 'p_immediate', 'mean_util'):
            object.__setattr__(self, name, _probability(f"micro.{name}", getattr(self, name)))
        for name in ('total_delay', 'queue_wait'):
            _delay(f"micro.{name}", getattr(self, name))


@dataclass(frozen=True)
class MacroMetrics:
    rejection: float
    bp_queue: float
    bp_resource: float
    total_delay: float
    queue_wait: float
    lookup_delay: float
    pm_queue_wait: float
    provisioning_time: float
    provisioning_time_naive: float
    p_immediate: float
    success_prob: float
    p_na: float

    def __post_init__(self):
        for name in ('rejection', 'bp_queue', 'bp_resource', 'p_immediate', 'success_prob', 'p_na'):
            object.__setattr__(self, name, _probability(f"macro.{name}", getattr(self, name)))
        for name in ('total_delay', 'queue_wait', 'lookup_delay', 'pm_queue_wait', 'provisioning_time'):
            _delay(f"macro.{name}", getattr(self, name))


@dataclass(frozen=True)
class CouplingRates:
    lambda_c: float
    eta_c: float
    lambda_a: float
    acquire_rate: float


@dataclass(frozen=True)
class Provenance:
    config_hash: str
    solver_version: str
    time_unit: str
    converged: bool
    outer_iterations: int
    inner_iterations: int
    total_inner_iterations: int
    damped: bool
    flags: Tuple[str, ...] = ()


SECTIONS = (('micro', MicroMetrics), ('macro', MacroMetrics), ('coupling', CouplingRates))

REPORT_COLUMNS: Tuple[str, ...] = (
    *(f.name for f in fields(Provenance)),
    *(f"{prefix}_{f.name}" for prefix, cls in SECTIONS for f in fields(cls)),
)

# Metrics compared by compare_reports and by analytic-vs-simulation validation
COMPARED_METRICS: Tuple[str, ...] = tuple(
    f"{prefix}_{f.name}" for prefix, cls in SECTIONS[:2] for f in fields(cls)
)


@dataclass(frozen=True)
class PerformanceReport:
    micro: MicroMetrics
    macro: MacroMetrics
    coupling: CouplingRates
    provenance: Provenance

    @property
    def converged(self) -> bool:
        return self.provenance.converged

    def metric(self, column: str) -> float:
        prefix, name = column.split('_', 1)
        return getattr(getattr(self, prefix), name)

    def as_dict(self) -> dict:
        data = asdict(self)
        data['provenance']['flags'] = list(self.provenance.flags)
        return data

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)

    def as_row(self) -> Dict[str, Union[str, int, float, bool]]:
        """Flat CSV row keyed by REPORT_COLUMNS."""
        row: Dict[str, Union[str, int, float, bool]] = {}
        for f in fields(Provenance):
            row[f.name] = getattr(self.provenance, f.name)
        row['flags'] = ';'.join(self.provenance.flags)
        for prefix, cls in SECTIONS:
            section = getattr(self, prefix)
            for f in fields(cls):
                row[f"{prefix}_{f.name}"] = getattr(section, f.name)
        return row

    @classmethod
    def from_dict(cls, data: Mapping) -> 'PerformanceReport':
        provenance = dict(data['provenance'])
        provenance['flags'] = tuple(provenance.get('flags', ()))
        return cls(
            micro=MicroMetrics(**data['micro']),
            macro=MacroMetrics(**data['macro']),
            coupling=CouplingRates(**data['coupling']),
            provenance=Provenance(**provenance),
        )

    @classmethod
    def from_row(cls, row: Mapping[str, str]) -> 'PerformanceReport':
        """Inverse of as_row for values read back as strings."""
        provenance = {}
        for f in fields(Provenance):
            raw = row[f.name]
            if f.name == 'flags':
                provenance[f.name] = tuple(flag for flag in str(raw).split(';') if flag)
            elif f.type in (bool, 'bool'):
                provenance[f.name] = raw if isinstance(raw, bool) else str(raw) == 'True'
            elif f.type in (int, 'int'):
                provenance[f.name] = int(raw)
            else:
                provenance[f.name] = str(raw)
        sections = {
            prefix: section_cls(**{f.name: float(row[f"{prefix}_{f.name}"]) for f in fields(section_cls)})
            for prefix, section_cls in SECTIONS
        }
        return cls(provenance=Provenance(**provenance), **sections)


def build_report(sol: 'CoupledSolution', cfg: 'SystemConfig') -> PerformanceReport:
    """Project a coupled solution onto the reported metrics."""
    from . import __version__

    csm, pmsm, vmsm = sol.csm, sol.pmsm, sol.vmsm
    micro = MicroMetrics(
        rejection=csm.bp_q,
        total_delay=csm.total_delay,
        queue_wait=csm.queue_wait,
        p_immediate=csm.p_immediate,
        mean_vms=csm.mean_vms,
        mean_containers=csm.mean_containers,
        mean_util=csm.mean_util,
        util_ratio_of_means=csm.util_ratio_of_means,
    )
    macro = MacroMetrics(
        rejection=sol.p_reject,
        bp_queue=sol.bp_queue,
        bp_resource=sol.bp_resource,
        total_delay=sol.total_delay,
        queue_wait=pmsm.queue_wait,
        lookup_delay=pmsm.lookup_delay,
        pm_queue_wait=vmsm.queue_wait,
        provisioning_time=vmsm.provisioning_time,
        provisioning_time_naive=1.0 / cfg.macro.provisioning_rate,
        p_immediate=pmsm.p_immediate,
        success_prob=sol.success_prob,
        p_na=sol.p_na,
    )
    coupling = CouplingRates(
        lambda_c=sol.lambda_c,
        eta_c=sol.eta_c,
        lambda_a=sol.lambda_a,
        acquire_rate=sol.acquire_rate,
    )
    provenance = Provenance(
        config_hash=cfg.config_hash,
        solver_version=__version__,
        time_unit=cfg.time_unit,
        converged=sol.converged,
        outer_iterations=sol.outer_iterations,
        inner_iterations=sol.inner_iterations,
        total_inner_iterations=sol.total_inner_iterations,
        damped=sol.damped,
        flags=tuple(sol.flags),
    )
    return PerformanceReport(micro=micro, macro=macro, coupling=coupling, provenance=provenance)


@dataclass(frozen=True)
class FieldCheck:
    name: str
    value: float
    reference: float
    allowed: float
    ci_half_width: float = 0.0

    @property
    def abs_error(self) -> float:
        return abs(self.value - self.reference)

    @property
    def relative_error(self) -> float:
        if self.reference != 0:
            return self.abs_error / abs(self.reference)
        return 0.0 if self.value == 0 else math.inf

    @property
    def passed(self) -> bool:
        return self.abs_error <= self.allowed

    def as_row(self) -> dict:
        return {
            'metric': self.name,
            'value': self.value,
            'reference': self.reference,
            'abs_error': self.abs_error,
            'relative_error': self.relative_error,
            'allowed': self.allowed,
            'ci_half_width': self.ci_half_width,
            'passed': self.passed,
        }


@dataclass(frozen=True)
class ComparisonVerdict:
    checks: Tuple[FieldCheck, ...]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> Tuple[FieldCheck, ...]:
        return tuple(check for check in self.checks if not check.passed)

    def check(self, name: str) -> FieldCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def as_table(self) -> str:
        header = f"{'metric':<28} {'value':>14} {'reference':>14} {'rel.err':>10} {'allowed':>12}  result"
        lines = [header, '-' * len(header)]
        for check in self.checks:
            lines.append(
                f"{check.name:<28} {check.value:>14.6g} {check.reference:>14.6g} "
                f"{check.relative_error:>10.3%} {check.allowed:>12.4g}  {'PASS' if check.passed else 'FAIL'}"
            )
        lines.append(f"verdict: {'PASS' if self.passed else 'FAIL'} "
                     f"({len(self.checks) - len(self.failures)}/{len(self.checks)} metrics within tolerance)")
        return '\n'.join(lines)


def _tolerance_for(tol: Union[float, Mapping[str, float]], name: str) -> float:
    if isinstance(tol, Mapping):
        return tol.get(name, tol.get('default', 0.0))
    return tol


def compare_reports(a: PerformanceReport, b: PerformanceReport,
                    tol: Union[float, Mapping[str, float]],
                    override: bool = False,
                    metrics: Optional[Iterable[str]] = None) -> ComparisonVerdict:
    """
    Check every compared metric of `a` against `b` with relative tolerances.

    `tol` is one tolerance for every metric or a mapping by column name
    (a 'default' key covers the rest).
    """
    if a.provenance.config_hash != b.provenance.config_hash and not override:
        raise ConfigMismatch(a.provenance.config_hash, b.provenance.config_hash)
    checks = []
    for name in metrics or COMPARED_METRICS:
        reference = b.metric(name)
        allowed = _tolerance_for(tol, name) * abs(reference)
        checks.append(FieldCheck(name=name, value=a.metric(name), reference=reference, allowed=allowed))
    verdict = ComparisonVerdict(checks=tuple(checks))
    if not verdict.passed:
        logger.info(f"Report comparison failed on {[check.name for check in verdict.failures]}")
    return verdict
