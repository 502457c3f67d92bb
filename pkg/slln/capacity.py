"""Capacities, Choquet integrals, truncation and extended expectations."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import config
from .engine import lower_expectation, payoff_table, upper_expectation
from .errors import GridTooCoarse, ModelError, NotConvergedError, NotExactCapable, UnboundedSupport
from .functionals import Functional, absolute, coordinate, partial_sum, truncated
from .measures import truncate  # noqa: F401  re-exported
from .models import ModelKind, SequenceModel
from .reports import CheckReport
from .strategies import AdversaryStrategy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EventPredicate:
    """An event {pred(X_1..X_n)} over ``horizon`` observables."""

    horizon: int
    pred: Callable[[Tuple[float, ...]], bool] = field(compare=False)
    name: str = "A"
    batch: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def indicator(self) -> Functional:
        pred, batch = self.pred, self.batch
        return Functional(
            self.horizon,
            lambda x: 1.0 if pred(x) else 0.0,
            name=f"1{{{self.name}}}",
            batch=(lambda rows: np.asarray(batch(rows), dtype=bool).astype(float)) if batch else None,
        )

    def complement(self) -> "EventPredicate":
        pred, batch = self.pred, self.batch
        return EventPredicate(
            self.horizon,
            lambda x: not pred(x),
            name=f"not({self.name})",
            batch=(lambda rows: ~np.asarray(batch(rows), dtype=bool)) if batch else None,
        )

    @classmethod
    def at_least(cls, phi: Functional, level: float, tol: Optional[float] = None) -> "EventPredicate":
        """{phi >= level}, with the level lowered by the event tolerance."""
        threshold = level - (config.EVENT_TOL if tol is None else tol)
        batch = phi.batch
        return cls(
            phi.horizon,
            lambda x: phi(x) >= threshold,
            name=f"{phi.name}>={level:g}",
            batch=(lambda rows: batch(rows) >= threshold) if batch else None,
        )


def everything(n: int) -> EventPredicate:
    return EventPredicate(n, lambda x: True, "Omega", lambda rows: np.ones(len(rows), dtype=bool))


def nothing(n: int) -> EventPredicate:
    return EventPredicate(n, lambda x: False, "empty", lambda rows: np.zeros(len(rows), dtype=bool))


def upper_capacity(model: SequenceModel, event: EventPredicate) -> float:
    """V(A) = E[1_A]; the sup over adaptive strategies of P(A) on finite support."""
    return upper_expectation(model, event.indicator())


def lower_capacity(model: SequenceModel, event: EventPredicate) -> float:
    """v(A) = 1 - V(A^c)."""
    return 1.0 - upper_capacity(model, event.complement())


@dataclass(frozen=True)
class CapacityEstimate:
    value: float
    stderr: float
    strategy: str
    per_strategy: Dict[str, float]
    n_paths: int


def mc_capacity_lower_bound(model: SequenceModel, event: EventPredicate,
                            strategies: Sequence[AdversaryStrategy], n_paths: int,
                            seed: int) -> CapacityEstimate:
    """Best empirical frequency of the event over the given strategies.

    All strategies share the per-path streams (common random numbers).
    """
    from .simulation import simulate_driver_paths

    if not strategies:
        raise ModelError("need at least one strategy")
    indicator = event.indicator()
    T = model.driver_horizon(event.horizon)
    frequencies: Dict[str, float] = {}
    best_name, best = "", -1.0
    for strategy in strategies:
        drivers = simulate_driver_paths(model, strategy, T, n_paths, seed)
        freq = float(indicator.evaluate_many(model.observe_array(drivers)).mean())
        frequencies[strategy.name] = freq
        if freq > best:
            best_name, best = strategy.name, freq
    stderr = math.sqrt(best * (1.0 - best) / n_paths)
    logger.info("MC capacity of %s: %.6g +- %.3g (%s)", event.name, best, stderr, best_name)
    return CapacityEstimate(best, stderr, best_name, frequencies, n_paths)


@dataclass(frozen=True)
class CapacityCurve:
    """V(X >= t) at sorted thresholds t."""

    thresholds: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        if len(self.thresholds) != len(self.values):
            raise ModelError("thresholds and values differ in length")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ModelError("thresholds must be strictly increasing")
        for v in self.values:
            if v < -1e-12 or v > 1 + 1e-12:
                raise ModelError(f"capacity value {v!r} outside [0, 1]")
        if any(b > a + 1e-12 for a, b in zip(self.values, self.values[1:])):
            raise ModelError("capacity curve must be nonincreasing")

    def at(self, t: float) -> float:
        """V(X >= t) for any t (X only takes the threshold values)."""
        i = int(np.searchsorted(self.thresholds, t, side="left"))
        if i >= len(self.thresholds):
            return 0.0
        return self.values[i]


def observable_values(model: SequenceModel, X: Functional) -> List[float]:
    """Distinct values a payoff takes on the support."""
    return sorted(set(np.unique(payoff_table(model, X)).tolist()))


def capacity_curve(model: SequenceModel, X: Optional[Functional] = None) -> CapacityCurve:
    """V(X >= v) at every value v of X (X defaults to the first observable)."""
    X = X or coordinate(1, 1)
    values = observable_values(model, X)
    caps = tuple(upper_capacity(model, EventPredicate.at_least(X, v)) for v in values)
    return CapacityCurve(tuple(values), caps)


def choquet_integral_finite(source: Union[CapacityCurve, SequenceModel],
                            X: Optional[Functional] = None) -> float:
    """Layer-cake Choquet integral of a finitely-valued X.

    The thresholds are split at 0: the positive side adds (x_i - x_{i-1}) V(X >= x_i),
    the negative side adds (x_i - x_{i-1}) (V(X >= x_i) - 1).
    """
    if isinstance(source, CapacityCurve):
        curve = source
    else:
        if not source.exact_capable:
            raise UnboundedSupport(f"{source.label} has no finite support")
        curve = capacity_curve(source, X)
    points = sorted(set(curve.thresholds) | {0.0})
    total = 0.0
    for lo, hi in zip(points, points[1:]):
        # V(X >= t) is constant on (lo, hi] and equals V(X >= hi)
        v = curve.at(hi)
        total += (hi - lo) * (v if hi > 0 else v - 1.0)
    return total


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    diverging: bool
    octave_increments: Tuple[float, ...]
    T_max: float


def upper_tail_function(model: SequenceModel, X: Optional[Functional] = None,
                        absolute_value: bool = False) -> Tuple[Callable[[float], float], Tuple[float, ...]]:
    """t -> V(X >= t) (or V(|X| >= t)) and its breakpoints.

    Exact models go through the capacity curve; otherwise X must be the first
    observable of an i.i.d. model and the closed-form marginal tails are used.
    """
    if model.exact_capable:
        base = X or coordinate(1, 1)
        curve = capacity_curve(model, absolute(base) if absolute_value else base)
        return curve.at, curve.thresholds
    if X is not None or model.kind is ModelKind.MOVING_WINDOW:
        raise NotExactCapable("tail of a general payoff needs an exact-capable model")
    aset = model.driver
    return (aset.upper_abs_tail if absolute_value else aset.upper_tail), ()


def _octave_grid(T_max: float, points_per_octave: int, breakpoints: Sequence[float]) -> np.ndarray:
    grid = [np.linspace(0.0, min(1.0, T_max), points_per_octave + 1)]
    lo = 1.0
    while lo < T_max:
        hi = min(2.0 * lo, T_max)
        grid.append(np.linspace(lo, hi, points_per_octave + 1))
        lo = hi
    grid.append(np.array([b for b in breakpoints if 0.0 <= b <= T_max], dtype=float))
    return np.unique(np.concatenate(grid))


def choquet_integral_quadrature(tail: Union[Callable[[float], float], SequenceModel], T_max: float,
                                points_per_octave: int = 256, breakpoints: Sequence[float] = (),
                                X: Optional[Functional] = None) -> QuadratureResult:
    """Trapezoid integral of t -> V(X >= t) over [0, T_max] for X >= 0.

    The tail is read at one-sided limits inside each cell, so step tails with
    jumps at breakpoints integrate exactly. ``diverging`` is set when the
    integral over the last octave is at least ``SLLN_QUADRATURE_RATIO`` times
    the one before.

    Raises:
        GridTooCoarse: the sampled tail increases somewhere.
    """
    if isinstance(tail, SequenceModel):
        tail, points = upper_tail_function(tail, X)
        breakpoints = tuple(breakpoints) + tuple(points)
    if not T_max > 0:
        raise ModelError("T_max must be positive")
    grid = _octave_grid(T_max, points_per_octave, breakpoints)
    widths = np.diff(grid)
    eps = widths * 1e-9
    left = np.array([tail(g + e) for g, e in zip(grid[:-1], eps)])
    right = np.array([tail(g - e) for g, e in zip(grid[1:], eps)])
    samples = np.column_stack([left, right]).ravel()
    if np.any(np.diff(samples) > 1e-12):
        raise GridTooCoarse("tail function is not monotone on the quadrature grid")
    cells = 0.5 * widths * (left + right)
    total = float(math.fsum(cells))

    increments = []
    lo = 1.0
    while lo < T_max:
        hi = min(2.0 * lo, T_max)
        inside = (grid[:-1] >= lo) & (grid[1:] <= hi)
        increments.append(float(math.fsum(cells[inside])))
        lo = hi
    diverging = False
    if len(increments) >= 2 and increments[-1] > 0:
        diverging = increments[-1] >= config.QUADRATURE_RATIO * increments[-2]
    return QuadratureResult(total, diverging, tuple(increments), float(T_max))


@dataclass(frozen=True)
class ExtendedExpectationResult:
    """E[X^(c)] along increasing truncation levels."""

    value: float
    converged: bool
    c_grid: Tuple[float, ...]
    values: Tuple[float, ...]
    deltas: Tuple[float, ...]

    def require(self) -> "ExtendedExpectationResult":
        if not self.converged:
            raise NotConvergedError(
                f"truncated expectations still moving by {self.deltas[-1]:.3g} at c={self.c_grid[-1]:g}",
                result=self,
            )
        return self

    def rows(self, quantity: str = "truncated_expectation") -> List[dict]:
        flag = "converged" if self.converged else "not-converged"
        return [{"quantity": quantity, "parameter": f"c={c:g}", "value": v, "flag": flag}
                for c, v in zip(self.c_grid, self.values)]


def _truncated_value(model: SequenceModel, X: Optional[Functional], c: float, upper: bool) -> float:
    if model.exact_capable:
        phi = truncated(X or coordinate(1, 1), c)
        return upper_expectation(model, phi) if upper else lower_expectation(model, phi)
    if X is not None or model.kind is ModelKind.MOVING_WINDOW:
        raise NotExactCapable("truncated expectation of a general payoff needs an exact-capable model")
    if upper:
        return model.driver.upper_truncated_mean(c)
    # truncation is odd, so the lower side is the smallest law-wise truncated mean
    return min(law.truncated_mean(c) for law in model.driver.laws)


def extended_expectation(model: SequenceModel, X: Optional[Functional] = None, c0: float = 1.0,
                         doublings: int = 30, tol: float = 1e-9, upper: bool = True,
                         c_schedule: Optional[Sequence[float]] = None) -> ExtendedExpectationResult:
    """Extended expectation lim_c E[X^(c)] along doubling truncation levels.

    Converged once two successive deltas are below ``tol``; the trajectory is
    returned either way.
    """
    levels = list(c_schedule) if c_schedule is not None else [c0 * 2.0 ** k for k in range(doublings + 1)]
    if any(c <= 0 for c in levels):
        raise ModelError("truncation levels must be positive")
    values: List[float] = []
    deltas: List[float] = []
    converged = False
    for c in levels:
        values.append(_truncated_value(model, X, c, upper))
        if len(values) >= 2:
            deltas.append(abs(values[-1] - values[-2]))
        if len(deltas) >= 2 and deltas[-1] < tol and deltas[-2] < tol:
            converged = True
            break
    used = tuple(levels[:len(values)])
    logger.debug("extended expectation: %d levels, converged=%s", len(values), converged)
    return ExtendedExpectationResult(values[-1], converged, used, tuple(values), tuple(deltas))


def extended_additivity_check(model: SequenceModel, n: int, tol: float = 1e-8, c0: float = 1.0) -> CheckReport:
    """Extended expectation of S_n against n times the marginal one (both sides)."""
    if model.kind is ModelKind.MOVING_WINDOW:
        raise ModelError("extended additivity needs independent coordinates")
    report = CheckReport("extended-additivity")
    for upper, label in ((True, "upper"), (False, "lower")):
        joint = extended_expectation(model, partial_sum(n), c0=c0, tol=tol, upper=upper).require()
        marginal = 0.0
        for i in range(1, n + 1):
            marginal += extended_expectation(model, coordinate(n, i), c0=c0, tol=tol, upper=upper).require().value
        report.expect_close(label, joint.value, marginal, n * tol, witness=f"S{n}")
        report.details[label] = joint.value
    return report


@dataclass(frozen=True)
class SeriesReport:
    """Partial sums of a nonnegative series with an octave-decay verdict."""

    terms: Tuple[float, ...]
    partial_sums: Tuple[float, ...]
    octave_increments: Tuple[float, ...]
    summable: bool

    @property
    def diverging(self) -> bool:
        return not self.summable


def octave_increments(partial_sums: Sequence[float]) -> List[float]:
    """Increase of the partial sums over index octaves (2^k, 2^(k+1)]."""
    increments, lo = [], 1
    while lo < len(partial_sums):
        hi = min(2 * lo, len(partial_sums))
        increments.append(partial_sums[hi - 1] - partial_sums[lo - 1])
        lo = hi
    return increments


def decaying(increments: Sequence[float], ratio: float) -> bool:
    """Last increment zero, or at most ``ratio`` times the one before."""
    if not increments or increments[-1] <= 0:
        return True
    if len(increments) < 2:
        return False
    return increments[-1] <= ratio * increments[-2]


def borel_cantelli_report(capacities: Sequence[float], ratio: Optional[float] = None) -> SeriesReport:
    """Partial sums of V(A_n) and whether they look summable."""
    terms = [float(c) for c in capacities]
    if any(c < 0 for c in terms):
        raise ModelError("capacities must be nonnegative")
    sums = np.cumsum(terms).tolist() if terms else []
    inc = octave_increments(sums)
    ratio = config.SERIES_RATIO if ratio is None else ratio
    return SeriesReport(tuple(terms), tuple(sums), tuple(inc), decaying(inc, ratio))


@dataclass(frozen=True)
class FinitenessReport:
    tail_series: SeriesReport
    c_grid: Tuple[float, ...]
    excess: Tuple[float, ...]
    excess_to_zero: bool
    M: float

    @property
    def summable(self) -> bool:
        return self.tail_series.summable

    @property
    def diverging(self) -> bool:
        return not self.summable

    def rows(self) -> List[dict]:
        flag = "summable" if self.summable else "diverging"
        rows = [{"quantity": "tail_partial_sum", "parameter": f"I={i + 1}", "value": s, "flag": flag}
                for i, s in enumerate(self.tail_series.partial_sums)
                if (i + 1) & i == 0 or i + 1 == len(self.tail_series.partial_sums)]
        rows += [{"quantity": "excess_mean", "parameter": f"c={c:g}", "value": e,
                  "flag": "vanishing" if self.excess_to_zero else "persistent"}
                 for c, e in zip(self.c_grid, self.excess)]
        return rows


def choquet_finiteness_diagnostics(model: SequenceModel, X: Optional[Functional] = None, M: float = 1.0,
                                   I_max: int = 1024, c_max: float = 2.0 ** 20) -> FinitenessReport:
    """Summability of V(|X| >= M i) and decay of E[(|X| - c)^+] along doubling c."""
    if not M > 0:
        raise ModelError("M must be positive")
    tail, _ = upper_tail_function(model, X, absolute_value=True)
    series = borel_cantelli_report([tail(M * i) for i in range(1, I_max + 1)])

    levels, excess = [], []
    c = 1.0
    while c <= c_max:
        levels.append(c)
        if model.exact_capable:
            base = absolute(X or coordinate(1, 1))
            excess.append(upper_expectation(model, base.map(lambda v, c=c: max(v - c, 0.0),
                                                            f"({base.name}-{c:g})+",
                                                            lambda a, c=c: np.maximum(a - c, 0.0))))
        else:
            excess.append(model.driver.upper_excess_mean(c))
        c *= 2.0
    finite = all(math.isfinite(e) for e in excess)
    to_zero = finite and (excess[-1] == 0.0 or
                          (len(excess) >= 2 and excess[-1] <= config.EXCESS_RATIO * excess[-2]))
    return FinitenessReport(series, tuple(levels), tuple(excess), to_zero, M)


def choquet_dominance_check(model: SequenceModel, X: Optional[Functional] = None,
                            tol: Optional[float] = None) -> CheckReport:
    """C_V(|X|) >= extended E[|X|] >= |extended E[X]| on an exact model."""
    tol = config.EXACT_TOL if tol is None else tol
    X = X or coordinate(1, 1)
    report = CheckReport("choquet-dominance")
    choquet = choquet_integral_finite(model, absolute(X))
    bound = max(abs(v) for v in observable_values(model, X))
    abs_mean = extended_expectation(model, absolute(X), c0=2 * bound + 1, tol=tol).require().value
    mean = extended_expectation(model, X, c0=2 * bound + 1, tol=tol).require().value
    report.expect_at_most("choquet>=abs-mean", abs_mean, choquet + tol, witness=X.name)
    report.expect_at_most("abs-mean>=|mean|", abs(mean), abs_mean + tol, witness=X.name)
    report.details.update(choquet=choquet, abs_mean=abs_mean, mean=mean)
    return report
