"""
Finite continuous-time Markov chains: indexed state spaces, sparse generators
and steady-state solvers shared by every sub-model.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Hashable, Iterable, Iterator, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from django.conf import settings
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .exceptions import NonPositiveRate, NotConverged, SelfLoop, SingularOrReducible, UnknownState

logger = logging.getLogger(__name__)

Label = Hashable
Transition = Tuple[Label, Label, float]

# Largest negative entry tolerated (and clipped) in a solved vector
NEGATIVE_ROUNDOFF = 1e-9
REFINEMENT_STEPS = 3
RESIDUAL_CHECK_EVERY = 10


@dataclass(frozen=True)
class StateSpace:
    """Ordered state labels with a label -> position index."""

    states: Tuple[Label, ...]
    index: Mapping[Label, int] = field(repr=False, compare=False)

    @classmethod
    def from_states(cls, states: Iterable[Label]) -> 'StateSpace':
        ordered = tuple(states)
        if not ordered:
            raise ValueError("a state space needs at least one state")
        index = {label: position for position, label in enumerate(ordered)}
        if len(index) != len(ordered):
            raise ValueError("state labels must be unique")
        return cls(states=ordered, index=index)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[Label]:
        return iter(self.states)

    def __contains__(self, label) -> bool:
        return label in self.index

    def index_of(self, label: Label) -> int:
        try:
            return self.index[label]
        except KeyError:
            raise UnknownState(label) from None


@dataclass(frozen=True)
class Generator:
    """
    Infinitesimal generator stored as aggregated off-diagonal rates.

    The diagonal is implied: each row sums to zero.
    """

    n: int
    entries: Mapping[Tuple[int, int], float]

    @cached_property
    def matrix(self) -> sparse.csr_matrix:
        """Full generator (off-diagonals plus diagonal) in CSR form."""
        if self.entries:
            rows, cols = zip(*self.entries.keys())
            rates = np.fromiter(self.entries.values(), dtype=float, count=len(self.entries))
        else:
            rows, cols, rates = (), (), np.empty(0)
        off_diagonal = sparse.coo_matrix(
            (rates, (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
            shape=(self.n, self.n),
        ).tocsr()
        exit_rates = np.asarray(off_diagonal.sum(axis=1)).ravel()
        return (off_diagonal - sparse.diags(exit_rates)).tocsr()

    @property
    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def rate(self, row: int, col: int) -> float:
        return self.entries.get((row, col), 0.0)


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    """A stationary distribution; read-only once built."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("a probability vector is a non-empty 1-D sequence")
        if values.min() < 0.0 or values.max() > 1.0 + 1e-12:
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(values.sum() - 1.0) > 1e-10:
            raise ValueError(f"probabilities sum to {values.sum()!r}, not 1")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, position: int) -> float:
        return float(self.values[position])


@dataclass(frozen=True)
class SolverOptions:
    """Steady-state solver knobs; unset fields come from PERFMODEL_SETTINGS."""

    residual_tol: Optional[float] = None
    direct_limit: Optional[int] = None
    max_sweeps: Optional[int] = None
    method: str = 'auto'

    def __post_init__(self):
        defaults = settings.PERFMODEL_SETTINGS
        if self.residual_tol is None:
            object.__setattr__(self, 'residual_tol', defaults['RESIDUAL_TOL'])
        if self.direct_limit is None:
            object.__setattr__(self, 'direct_limit', defaults['DIRECT_SOLVER_LIMIT'])
        if self.max_sweeps is None:
            object.__setattr__(self, 'max_sweeps', defaults['ITERATIVE_MAX_SWEEPS'])
        if self.method not in ('auto', 'direct', 'iterative'):
            raise ValueError(f"unknown solver method {self.method!r}")
        if self.residual_tol <= 0:
            raise ValueError("residual_tol must be positive")


@dataclass(frozen=True)
class CtmcModel:
    """A state space paired with its generator."""

    space: StateSpace
    generator: Generator

    @property
    def size(self) -> int:
        return len(self.space)

    def solve(self, opts: Optional[SolverOptions] = None) -> ProbabilityVector:
        return solve_steady_state(self.generator, opts)

    def edges(self) -> Dict[Tuple[Label, Label], float]:
        """Aggregated transitions keyed by (source label, target label)."""
        states = self.space.states
        return {(states[row], states[col]): rate for (row, col), rate in self.generator.entries.items()}

    def state_values(self, fn: Callable[[Label], float]) -> np.ndarray:
        return np.fromiter((fn(label) for label in self.space.states), dtype=float, count=self.size)

    def expect(self, pi: ProbabilityVector, fn: Callable[[Label], float]) -> float:
        return expectation(pi, self.state_values(fn))

    def probability(self, pi: ProbabilityVector, predicate: Callable[[Label], bool]) -> float:
        return expectation(pi, self.state_values(lambda label: 1.0 if predicate(label) else 0.0))


def build_generator(space: StateSpace, transitions: Iterable[Transition]) -> Generator:
    """Aggregate (source, target, rate) triples into a generator over `space`."""
    entries: Dict[Tuple[int, int], float] = {}
    for source, target, rate in transitions:
        row = space.index_of(source)
        col = space.index_of(target)
        if row == col:
            raise SelfLoop(source)
        if not rate > 0:
            raise NonPositiveRate(source, target, rate)
        entries[(row, col)] = entries.get((row, col), 0.0) + float(rate)
    return Generator(n=len(space), entries=entries)


def residual(gen: Generator, pi: Union[ProbabilityVector, np.ndarray]) -> float:
    """Infinity norm of pi Q."""
    values = pi.values if isinstance(pi, ProbabilityVector) else np.asarray(pi, dtype=float)
    return float(np.abs(gen.matrix.T @ values).max())


def solve_steady_state(gen: Generator, opts: Optional[SolverOptions] = None) -> ProbabilityVector:
    """
    Stationary distribution of a generator with a single recurrent class.

    Direct sparse LU on the augmented system up to `direct_limit` states,
    power iteration on the uniformized chain above it.
    """
    opts = opts or SolverOptions()
    if gen.n == 1:
        return ProbabilityVector(np.ones(1))

    method = opts.method
    if method == 'auto':
        method = 'direct' if gen.n <= opts.direct_limit else 'iterative'

    if method == 'direct':
        raw = _solve_direct(gen, opts)
    else:
        raw = _solve_uniformized(gen, opts)

    values = _normalize(raw)
    error = residual(gen, values)
    if error > opts.residual_tol:
        raise SingularOrReducible(
            f"{method} solve of a {gen.n}-state chain left residual {error:.3e} "
            f"(tolerance {opts.residual_tol:.1e})"
        )
    logger.debug(f"Solved {gen.n}-state chain ({method}), residual {error:.2e}")
    return ProbabilityVector(values)


def _solve_direct(gen: Generator, opts: SolverOptions) -> np.ndarray:
    n = gen.n
    transposed = gen.matrix.T.tocsr()
    augmented = sparse.vstack(
        [transposed[:-1, :], sparse.csr_matrix(np.ones((1, n)))], format='csc'
    )
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        factor = splinalg.splu(augmented)
    except RuntimeError as exc:
        raise SingularOrReducible(f"augmented balance system is singular: {exc}") from exc

    values = factor.solve(rhs)
    if not np.all(np.isfinite(values)):
        raise SingularOrReducible("augmented balance system produced non-finite values")

    # Iterative refinement against the balance residual
    for _ in range(REFINEMENT_STEPS):
        if residual(gen, values) <= opts.residual_tol:
            break
        values = values + factor.solve(rhs - augmented @ values)
    return values


def _solve_uniformized(gen: Generator, opts: SolverOptions) -> np.ndarray:
    q = gen.matrix
    uniformization = 1.1 * float(np.abs(q.diagonal()).max())
    if uniformization == 0.0:
        raise SingularOrReducible("chain has no transitions; every state is absorbing")

    step = (sparse.identity(gen.n, format='csr') + q / uniformization).T.tocsr()
    qt = q.T.tocsr()
    values = np.full(gen.n, 1.0 / gen.n)
    for sweep in range(1, opts.max_sweeps + 1):
        values = step @ values
        if sweep % RESIDUAL_CHECK_EVERY == 0:
            values = values / values.sum()
            if float(np.abs(qt @ values).max()) <= opts.residual_tol:
                logger.debug(f"Power iteration converged after {sweep} sweeps")
                return values
    raise NotConverged(f"power iteration exceeded {opts.max_sweeps} sweeps on {gen.n} states")


def _normalize(values: np.ndarray) -> np.ndarray:
    total = values.sum()
    if not np.isfinite(total) or total <= 0:
        raise SingularOrReducible("solution cannot be normalized")
    values = values / total
    if values.min() < -NEGATIVE_ROUNDOFF:
        raise SingularOrReducible(f"solution has negative mass {values.min():.3e}")
    values = np.clip(values, 0.0, None)
    return values / values.sum()


def expectation(pi: ProbabilityVector, f: Union[Callable[[int], float], Sequence[float], np.ndarray]) -> float:
    """Sum of pi_i * f(i); `f` is a callable on state positions or a value per state."""
    values = pi.values
    if callable(f):
        weights = np.fromiter((f(position) for position in range(values.size)), dtype=float, count=values.size)
    else:
        weights = np.asarray(f, dtype=float)
    return float(values @ weights)
