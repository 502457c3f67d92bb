"""Compressed backward induction for payoffs of running partial sums.

The full-history recursion keeps one value per driver prefix and dies
around twenty coordinates. When the payoff only depends on a running
statistic of the partial sums, the value function only needs

    (last m driver values, partial sum, statistic extra)

as its state. Partial sums are held as integer multiples of a lattice step
so that states compare exactly; observables that do not live on a common
lattice raise :class:`NotLattice` and the caller falls back to full-history
recursion.
"""

import logging
import math
from fractions import Fraction
from functools import reduce
from typing import Callable, Dict, Hashable, Iterable, List, Optional, Tuple

import numpy as np

from .config import config
from .errors import ModelError, StateSpaceCap
from .functionals import RunningStatistic, StatisticKind
from .measures import truncate
from .models import ModelKind, SequenceModel

logger = logging.getLogger(__name__)

MAX_DENOMINATOR = 10 ** 6


class NotLattice(ModelError):
    """Observable values do not share a lattice step."""


def lattice_step(values: Iterable[float]) -> Fraction:
    """Largest step h such that every value is an integer multiple of h."""
    numerators, denominators = [], []
    for v in values:
        fr = Fraction(v).limit_denominator(MAX_DENOMINATOR)
        if abs(float(fr) - v) > 1e-12 * max(1.0, abs(v)):
            raise NotLattice(f"value {v!r} is not on a rational lattice")
        numerators.append(abs(fr.numerator))
        denominators.append(fr.denominator)
    g = reduce(math.gcd, numerators, 0)
    if g == 0:
        return Fraction(1)
    lcm = reduce(lambda a, b: a * b // math.gcd(a, b), denominators, 1)
    return Fraction(g, lcm)


State = Tuple[Tuple[float, ...], int, Hashable]


class LatticeDP:
    """Layered state graph for one model and one running statistic.

    The graph is built once for ``horizon`` observables; :meth:`value` can then
    run backward induction from any shorter horizon, which is how the whole
    mean-bounds sequence costs a single forward pass.
    """

    def __init__(self, model: SequenceModel, statistic: RunningStatistic, horizon: int,
                 state_cap: Optional[int] = None, tol: Optional[float] = None):
        model.require_exact()
        if horizon < 1:
            raise ModelError("horizon must be at least one observable")
        self.model = model
        self.stat = statistic
        self.n = horizon
        self.m = model.m if model.kind is ModelKind.MOVING_WINDOW else 0
        self.T = horizon + self.m
        self.state_cap = state_cap or config.get_dp_state_cap()
        self.tol = config.EVENT_TOL if tol is None else tol
        self.lo = statistic.lo
        self.hi = statistic.hi if statistic.hi is not None else horizon
        if statistic.kind is not StatisticKind.SUM and (self.lo != 1 or statistic.hi is not None):
            raise ModelError("crossing and running-max statistics run over all observables")
        if statistic.kind is not StatisticKind.SUM and len(statistic.centers) < horizon:
            raise ModelError(f"need {horizon} centers, got {len(statistic.centers)}")

        # running-max centers are subtracted in lattice units, so they share the step
        on_lattice = self._summed_values()
        if statistic.kind is StatisticKind.RUNNING_MAX:
            on_lattice += list(statistic.centers[:horizon])
        self.step = lattice_step(on_lattice)
        self.h = float(self.step)
        self._units: Dict[float, int] = {}
        self._observed: Dict[Tuple[float, ...], float] = {}
        self._center_units = None
        if statistic.kind is StatisticKind.RUNNING_MAX:
            self._center_units = [self._to_units(c) for c in statistic.centers[:horizon]]

        self.layers: List[List[State]] = []
        self.transitions: List[np.ndarray] = []
        self._build()

    # lattice ------------------------------------------------------------------

    def _summed_values(self) -> List[float]:
        base = self.model.observable_values()
        values = set(base)
        if self.stat.truncate_by_index:
            bound = max(abs(v) for v in base)
            for k in range(max(1, self.lo), self.hi + 1):
                values.update(truncate(v, k) for v in base)
                if k >= bound:
                    break
        values.add(0.0)
        return sorted(values)

    def _to_units(self, v: float) -> int:
        units = self._units.get(v)
        if units is None:
            units = int(round(v / self.h))
            self._units[v] = units
        return units

    def _observe(self, window: Tuple[float, ...]) -> float:
        value = self._observed.get(window)
        if value is None:
            value = self.model.window(window) if self.model.kind is ModelKind.MOVING_WINDOW else window[-1]
            self._observed[window] = value
        return value

    # graph --------------------------------------------------------------------

    def _initial(self) -> State:
        if self.stat.kind is StatisticKind.CROSSING:
            return ((), 0, 0)
        return ((), 0, None)

    def _advance(self, state: State, t: int, value: float) -> State:
        window, s, extra = state
        full = window + (value,)
        if len(full) < self.m + 1:
            return (full, s, extra)
        k = t - self.m
        y = self._observe(full)
        window = full[1:]
        if self.lo <= k <= self.hi:
            if self.stat.truncate_by_index:
                y = truncate(y, k)
            s += self._to_units(y)
        kind = self.stat.kind
        if kind is StatisticKind.CROSSING and k <= self.n and not extra:
            d = s * self.h - self.stat.centers[k - 1]
            if (abs(d) if self.stat.two_sided else d) >= self.stat.level - self.tol:
                extra = 1
        elif kind is StatisticKind.RUNNING_MAX and k <= self.n:
            dev = s - self._center_units[k - 1]
            extra = dev if extra is None else max(extra, dev)
        return (window, s, extra)

    def _build(self):
        supports = self.model.supports(self.T)
        current = [self._initial()]
        self.layers.append(current)
        total = 1
        for t in range(1, self.T + 1):
            index: Dict[State, int] = {}
            nxt: List[State] = []
            support = supports[t - 1]
            table = np.empty((len(current), len(support)), dtype=np.int64)
            for i, state in enumerate(current):
                for x, value in enumerate(support):
                    new = self._advance(state, t, value)
                    j = index.get(new)
                    if j is None:
                        j = len(nxt)
                        index[new] = j
                        nxt.append(new)
                    table[i, x] = j
            total += len(nxt)
            if total > self.state_cap:
                raise StateSpaceCap(f"compressed DP exceeded {self.state_cap} states at driver step {t}")
            self.transitions.append(table)
            self.layers.append(nxt)
            current = nxt
        logger.debug("lattice DP: %d states over %d driver steps (step %s)", total, self.T, self.step)

    @property
    def state_count(self) -> int:
        return sum(len(layer) for layer in self.layers)

    # values -------------------------------------------------------------------

    def statistic_values(self, n: Optional[int] = None) -> np.ndarray:
        """Raw statistic at every terminal state of horizon ``n``."""
        layer = self.layers[(n or self.n) + self.m]
        kind = self.stat.kind
        if kind is StatisticKind.SUM:
            return np.array([s * self.h for _, s, _ in layer])
        if kind is StatisticKind.CROSSING:
            return np.array([float(extra) for _, _, extra in layer])
        return np.array([extra * self.h for _, _, extra in layer])

    def value(self, n: Optional[int] = None, outer: Optional[Callable[[float], float]] = None) -> float:
        """Upper expectation of ``outer(statistic)`` over ``n`` observables."""
        n = n or self.n
        if not 1 <= n <= self.n:
            raise ModelError(f"horizon {n} outside the built graph (1..{self.n})")
        if self.stat.kind is not StatisticKind.SUM and n != self.n:
            raise ModelError("crossing and running-max graphs are built for one horizon")
        if self.stat.kind is StatisticKind.SUM and self.hi < self.n and n < self.hi:
            raise ModelError("block sums need the whole block inside the horizon")
        outer = outer or self.stat.outer
        v = np.array([outer(x) for x in self.statistic_values(n)], dtype=float)
        for t in range(n + self.m, 0, -1):
            probs = self.model.driver_at(t).prob_matrix
            v = (v[self.transitions[t - 1]] @ probs.T).max(axis=1)
        return float(v[0])
