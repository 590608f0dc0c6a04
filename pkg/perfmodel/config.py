"""
Configuration files: flat `section.key = value` lines with explicit units,
normalized to one base time unit and validated into frozen dataclasses.
"""

import hashlib
import json
import logging
import math
import re
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
from django.conf import settings

from .coupler import CouplingOptions
from .ctmc import SolverOptions
from .exceptions import ParseError, UnitError, ValidationError
from .serializers import SweepAxisSerializer, SystemConfigSerializer, first_error

logger = logging.getLogger(__name__)

SECONDS_PER_UNIT = {
    'millisecond': 0.001, 'milliseconds': 0.001, 'ms': 0.001,
    'second': 1.0, 'seconds': 1.0, 'sec': 1.0, 's': 1.0,
    'minute': 60.0, 'minutes': 60.0, 'min': 60.0,
    'hour': 3600.0, 'hours': 3600.0, 'hr': 3600.0, 'h': 3600.0,
    'day': 86400.0, 'days': 86400.0, 'd': 86400.0,
}

# value kinds
COUNT = 'count'
NUMBER = 'number'
RATE = 'rate'
DURATION = 'duration'
CHOICE = 'choice'

# key -> (kind, section, field, invert)
# `invert` turns a duration into the matching rate.
KEYS: Dict[str, Tuple[str, str, str, bool]] = {
    'time_unit': (CHOICE, '', 'time_unit', False),
    'micro.users': (COUNT, 'micro', 'users', False),
    'micro.arrival_rate': (RATE, 'micro', 'arrival_rate', False),
    'micro.instantiation_rate': (RATE, 'micro', 'instantiation_rate', False),
    'micro.instantiation_time': (DURATION, 'micro', 'instantiation_rate', True),
    'micro.completion_rate': (RATE, 'micro', 'completion_rate', False),
    'micro.container_lifetime': (DURATION, 'micro', 'completion_rate', True),
    'micro.min_vms': (COUNT, 'micro', 'min_vms', False),
    'micro.max_vms': (COUNT, 'micro', 'max_vms', False),
    'micro.quota': (COUNT, 'micro', 'quota', False),
    'micro.containers_per_vm': (COUNT, 'micro', 'containers_per_vm', False),
    'micro.high_util': (NUMBER, 'micro', 'high_util', False),
    'micro.low_util': (NUMBER, 'micro', 'low_util', False),
    'macro.arrival_rate': (RATE, 'macro', 'arrival_rate', False),
    'macro.queue': (COUNT, 'macro', 'queue_size', False),
    'macro.lookup_rate': (RATE, 'macro', 'lookup_rate', False),
    'macro.lookup_time': (DURATION, 'macro', 'lookup_rate', True),
    'macro.pms': (COUNT, 'macro', 'pool_size', False),
    'macro.vms_per_pm': (COUNT, 'macro', 'vms_per_pm', False),
    'macro.provisioning_rate': (RATE, 'macro', 'provisioning_rate', False),
    'macro.provisioning_time': (DURATION, 'macro', 'provisioning_rate', True),
    'macro.completion_rate': (RATE, 'macro', 'completion_rate', False),
    'macro.vm_lifetime': (DURATION, 'macro', 'completion_rate', True),
    'solver.max_err': (NUMBER, 'solver', 'max_err', False),
    'solver.max_outer': (COUNT, 'solver', 'max_outer', False),
    'solver.max_inner': (COUNT, 'solver', 'max_inner', False),
    'solver.initial_success_prob': (NUMBER, 'solver', 'initial_success_prob', False),
    'solver.initial_acquire_time': (DURATION, 'solver', 'initial_acquire_rate', True),
    'solver.residual_tol': (NUMBER, 'solver', 'residual_tol', False),
    'solver.method': (CHOICE, 'solver', 'method', False),
    'solver.max_states': (COUNT, 'solver', 'max_states', False),
    'sim.horizon': (DURATION, 'sim', 'horizon', False),
    'sim.warmup_fraction': (NUMBER, 'sim', 'warmup_fraction', False),
    'sim.replications': (COUNT, 'sim', 'replications', False),
    'sim.seed': (COUNT, 'sim', 'seed', False),
    'sim.immediate_threshold': (DURATION, 'sim', 'immediate_threshold', False),
}

# Keys that set the same field; a sweep override drops the other spelling.
ALTERNATES: Dict[str, Tuple[str, ...]] = {}
for _key, (_, _section, _field, _) in KEYS.items():
    ALTERNATES[_key] = tuple(
        other for other, spec in KEYS.items()
        if other != _key and spec[1] == _section and spec[2] == _field
    )
ALTERNATES['micro.quota'] = ('micro.max_vms',)
ALTERNATES['micro.max_vms'] = ('micro.quota',)

KEY_PATTERN = re.compile(r'^[a-z_]+(\.[a-z0-9_]+)*$')
VALUE_PATTERN = re.compile(r'^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*)$')
RATE_UNIT_PATTERN = re.compile(r'^(?:/|per\s+)\s*([a-z]+)$')

Entries = Dict[str, Tuple[str, int]]


@dataclass(frozen=True)
class MicroConfig:
    users: int
    arrival_rate: float
    instantiation_rate: float
    completion_rate: float
    min_vms: int
    max_vms: int
    containers_per_vm: int
    high_util: float
    low_util: float


@dataclass(frozen=True)
class MacroConfig:
    arrival_rate: float
    queue_size: int
    lookup_rate: float
    pool_size: int
    vms_per_pm: int
    provisioning_rate: float
    completion_rate: float


@dataclass(frozen=True)
class SimSettings:
    """Simulation overrides from the config file; None means the project default."""
    horizon: Optional[float] = None
    warmup_fraction: Optional[float] = None
    replications: Optional[int] = None
    seed: Optional[int] = None
    immediate_threshold: Optional[float] = None


@dataclass(frozen=True)
class SystemConfig:
    time_unit: str
    micro: MicroConfig
    macro: MacroConfig
    coupling: CouplingOptions
    solver: SolverOptions
    sim: SimSettings
    max_states: int
    entries: Tuple[Tuple[str, str], ...] = field(default=(), compare=False, repr=False)

    def canonical(self) -> dict:
        """Normalized model and solver parameters; simulation overrides are not part of it."""
        return {
            'time_unit': self.time_unit,
            'micro': asdict(self.micro),
            'macro': asdict(self.macro),
            'coupling': asdict(self.coupling),
            'solver': asdict(self.solver),
            'max_states': self.max_states,
        }

    @cached_property
    def config_hash(self) -> str:
        payload = json.dumps(self.canonical(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()

    def with_overrides(self, overrides: Mapping[str, str]) -> 'SystemConfig':
        """Re-parse with some raw `key = value` entries replaced."""
        entries = dict(self.entries)
        for key, value in overrides.items():
            if key not in KEYS:
                raise ValidationError(key, "unknown key")
            for other in ALTERNATES.get(key, ()):
                entries.pop(other, None)
            entries[key] = value
        return config_from_entries({key: (value, 0) for key, value in entries.items()})

    def seconds_per_unit(self) -> float:
        return SECONDS_PER_UNIT[self.time_unit]


@dataclass(frozen=True)
class SweepAxis:
    path: str
    minimum: float
    maximum: float
    steps: int
    unit: str = ''

    def values(self) -> List[Union[int, float]]:
        points = np.linspace(self.minimum, self.maximum, self.steps)
        if KEYS[self.path][0] == COUNT:
            return [int(round(point)) for point in points]
        return [float(point) for point in points]

    def render(self, value: Union[int, float]) -> str:
        """Raw config text for one grid value."""
        kind = KEYS[self.path][0]
        if kind == RATE and self.unit:
            return f"{value!r} /{self.unit}"
        if kind == DURATION and self.unit:
            return f"{value!r} {self.unit}"
        return repr(value)


@dataclass(frozen=True)
class SweepSpec:
    axes: Tuple[SweepAxis, ...]
    outputs: Tuple[str, ...] = ()

    def grid(self) -> List[Dict[str, Union[int, float]]]:
        """Grid points in row-major order (first axis outermost)."""
        points: List[Dict[str, Union[int, float]]] = [{}]
        for axis in self.axes:
            points = [{**point, axis.path: value} for point in points for value in axis.values()]
        return points

    def overrides(self, point: Mapping[str, Union[int, float]]) -> Dict[str, str]:
        by_path = {axis.path: axis for axis in self.axes}
        return {path: by_path[path].render(value) for path, value in point.items()}


def read_entries(text: str) -> Entries:
    """Split config text into key -> (raw value, line number)."""
    entries: Entries = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ParseError(number, "expected 'key = value'")
        key, value = (part.strip() for part in line.split('=', 1))
        if not key or not value:
            raise ParseError(number, "empty key or value")
        if not KEY_PATTERN.match(key):
            raise ParseError(number, f"malformed key {key!r}")
        if key in entries:
            raise ParseError(number, f"duplicate key {key!r}")
        entries[key] = (value, number)
    return entries


def _number(key: str, text: str) -> Tuple[float, str]:
    match = VALUE_PATTERN.match(text)
    if not match:
        raise ValidationError(key, f"{text!r} is not a number")
    value = float(match.group(1))
    if not math.isfinite(value):
        raise ValidationError(key, "must be finite")
    return value, match.group(2).strip().lower()


def _unit_seconds(key: str, unit: str) -> float:
    try:
        return SECONDS_PER_UNIT[unit]
    except KeyError:
        raise UnitError(key, f"unknown time unit {unit!r}") from None


def normalize_value(key: str, text: str, base_seconds: float):
    """Convert one raw value to the base time unit (rates per base unit, durations in base units)."""
    kind, _, _, invert = KEYS[key]
    if kind == CHOICE:
        return text.strip().lower()
    if kind == COUNT:
        value, unit = _number(key, text)
        if unit:
            raise UnitError(key, "counts take no unit")
        if not value.is_integer():
            raise ValidationError(key, f"{text!r} is not a whole number")
        return int(value)

    value, unit = _number(key, text)
    if kind == NUMBER:
        if unit:
            raise UnitError(key, "dimensionless value takes no unit")
        return value
    if kind == RATE:
        if not unit:
            return value
        match = RATE_UNIT_PATTERN.match(unit)
        if not match:
            raise UnitError(key, f"rates are written '/unit' or 'per unit', got {unit!r}")
        return value * base_seconds / _unit_seconds(key, match.group(1))

    # duration
    if unit.startswith('/') or unit.startswith('per '):
        raise UnitError(key, "a duration cannot carry a rate unit")
    duration = value * _unit_seconds(key, unit) / base_seconds if unit else value
    if invert:
        if not duration > 0:
            raise ValidationError(key, "must be positive")
        return 1.0 / duration
    return duration


def config_from_entries(entries: Entries) -> SystemConfig:
    unknown = [(line, key) for key, (_, line) in entries.items() if key not in KEYS]
    if unknown:
        line, key = min(unknown)
        raise ParseError(line, f"unknown key {key!r}")
    if 'time_unit' not in entries:
        raise ValidationError('time_unit', "this field is required")

    time_unit = entries['time_unit'][0].strip().lower()
    if time_unit not in ('second', 'minute', 'hour', 'day'):
        raise UnitError('time_unit', f"base unit must be second, minute, hour or day, got {time_unit!r}")
    base_seconds = SECONDS_PER_UNIT[time_unit]

    data: Dict[str, Dict[str, object]] = {'micro': {}, 'macro': {}}
    for key, (text, _) in entries.items():
        if key == 'time_unit':
            continue
        _, section, name, _ = KEYS[key]
        bucket = data.setdefault(section, {})
        if name in bucket:
            raise ValidationError(key, f"{section}.{name} is given twice under different keys")
        bucket[name] = normalize_value(key, text, base_seconds)
    data['time_unit'] = time_unit

    serializer = SystemConfigSerializer(data=data)
    if not serializer.is_valid():
        name, reason = first_error(serializer.errors)
        raise ValidationError(name, reason)
    valid = serializer.validated_data

    solver = dict(valid.get('solver', {}))
    defaults = settings.PERFMODEL_SETTINGS
    if 'initial_acquire_rate' not in solver:
        solver['initial_acquire_rate'] = base_seconds / defaults['DEFAULT_ACQUIRE_TIME_SECONDS']
    max_states = solver.pop('max_states', defaults['MAX_STATES'])
    coupling = CouplingOptions(
        max_err=solver.get('max_err'),
        max_outer=solver.get('max_outer'),
        max_inner=solver.get('max_inner'),
        initial_success_prob=solver.get('initial_success_prob'),
        initial_acquire_rate=solver['initial_acquire_rate'],
    )
    solver_options = SolverOptions(residual_tol=solver.get('residual_tol'), method=solver.get('method', 'auto'))

    return SystemConfig(
        time_unit=time_unit,
        micro=MicroConfig(**valid['micro']),
        macro=MacroConfig(**valid['macro']),
        coupling=coupling,
        solver=solver_options,
        sim=SimSettings(**valid.get('sim', {})),
        max_states=max_states,
        entries=tuple((key, text) for key, (text, _) in entries.items()),
    )


def parse_config(text: str) -> SystemConfig:
    """Parse and validate config text."""
    return config_from_entries(read_entries(text))


def load_config(path: Union[str, Path]) -> SystemConfig:
    text = Path(path).read_text(encoding='utf-8')
    config = parse_config(text)
    logger.info(f"Loaded config {path} (hash {config.config_hash[:12]}, base unit {config.time_unit})")
    return config


def parse_sweep_spec(text: str) -> SweepSpec:
    """
    Sweep specs use the same line format:

        sweep.1.path = micro.container_lifetime
        sweep.1.min = 4
        sweep.1.max = 20
        sweep.1.steps = 5
        sweep.1.unit = minute
        outputs = micro_rejection, macro_rejection
    """
    from .report import REPORT_COLUMNS

    entries = read_entries(text)
    axes_data: Dict[int, Dict[str, str]] = {}
    outputs: Tuple[str, ...] = ()
    for key, (value, line) in entries.items():
        if key == 'outputs':
            outputs = tuple(name.strip() for name in value.split(',') if name.strip())
            continue
        parts = key.split('.')
        if len(parts) != 3 or parts[0] != 'sweep' or not parts[1].isdigit():
            raise ParseError(line, f"unknown key {key!r}")
        axes_data.setdefault(int(parts[1]), {})[parts[2]] = value

    if not 1 <= len(axes_data) <= 2:
        raise ValidationError('sweep', "a sweep needs one or two axes")

    axes = []
    for position in sorted(axes_data):
        serializer = SweepAxisSerializer(data=axes_data[position])
        if not serializer.is_valid():
            name, reason = first_error(serializer.errors)
            raise ValidationError(f"sweep.{position}.{name}", reason)
        valid = serializer.validated_data
        path = valid['path']
        if path not in KEYS or KEYS[path][0] not in (COUNT, NUMBER, RATE, DURATION):
            raise ValidationError(f"sweep.{position}.path", f"{path!r} is not a sweepable key")
        unit = valid.get('unit', '').strip().lower()
        if unit:
            if KEYS[path][0] not in (RATE, DURATION):
                raise UnitError(f"sweep.{position}.unit", "only rates and durations take a unit")
            _unit_seconds(f"sweep.{position}.unit", unit)
        axes.append(SweepAxis(path=path, minimum=valid['min'], maximum=valid['max'],
                              steps=valid['steps'], unit=unit))

    if len({axis.path for axis in axes}) != len(axes):
        raise ValidationError('sweep', "axes must sweep different keys")
    unknown = [name for name in outputs if name not in REPORT_COLUMNS]
    if unknown:
        raise ValidationError('outputs', f"unknown report columns {unknown}")
    return SweepSpec(axes=tuple(axes), outputs=outputs)


def load_sweep_spec(path: Union[str, Path]) -> SweepSpec:
    return parse_sweep_spec(Path(path).read_text(encoding='utf-8'))
