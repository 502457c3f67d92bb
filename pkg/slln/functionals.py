"""Payoffs phi(X_1, ..., X_n) and the small expression vocabulary used in configs.

A :class:`Functional` is always evaluable tuple by tuple. Payoffs that only
depend on a running partial-sum statistic additionally carry a
:class:`RunningStatistic`, which lets the engine use the compressed
dynamic program instead of full-history recursion.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigValidationError, ModelError
from .measures import truncate

logger = logging.getLogger(__name__)


class StatisticKind(Enum):
    SUM = "sum"
    CROSSING = "crossing"
    RUNNING_MAX = "running_max"


def _identity(v: float) -> float:
    return v


@dataclass(frozen=True)
class RunningStatistic:
    """A payoff written as ``outer(statistic)`` of observable partial sums.

    SUM:         statistic = sum of the observables with index in [lo, hi]
    CROSSING:    statistic = 1 if S_k - c_k >= level (|S_k - c_k| >= level when
                 two-sided) for some k <= n, else 0
    RUNNING_MAX: statistic = max over k <= n of S_k - c_k

    With ``truncate_by_index`` the summed observable of index i is X_i^(i).
    """

    kind: StatisticKind
    outer: Callable[[float], float] = field(default=_identity, compare=False)
    lo: int = 1
    hi: Optional[int] = None
    centers: Tuple[float, ...] = ()
    level: float = 0.0
    two_sided: bool = False
    truncate_by_index: bool = False

    def then(self, f: Callable[[float], float]) -> "RunningStatistic":
        inner = self.outer
        return replace(self, outer=lambda v: f(inner(v)))


@dataclass(frozen=True)
class LipschitzMeta:
    """Membership data for C_{l,Lip}: |phi(x)-phi(y)| <= C(1+|x|^m+|y|^m)|x-y|."""
    constant: float
    order: float


@dataclass(frozen=True)
class Functional:
    """A payoff over ``horizon`` observables."""

    horizon: int
    fn: Callable[[Tuple[float, ...]], float] = field(compare=False)
    name: str = "phi"
    lipschitz_meta: Optional[LipschitzMeta] = None
    batch: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    statistic: Optional[RunningStatistic] = None

    def __call__(self, x: Sequence[float]) -> float:
        return float(self.fn(tuple(x)))

    def evaluate_many(self, rows: np.ndarray) -> np.ndarray:
        """Evaluate on each row of a 2-D array of observable tuples."""
        rows = np.asarray(rows, dtype=float)
        if self.batch is not None:
            return np.asarray(self.batch(rows), dtype=float).reshape(len(rows))
        return np.array([self.fn(tuple(r)) for r in rows], dtype=float)

    # algebra -------------------------------------------------------------------

    def map(self, f: Callable[[float], float], name: Optional[str] = None,
            vector_f: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> "Functional":
        """Compose a scalar transform on the outside of the payoff."""
        fn, batch = self.fn, self.batch
        vf = vector_f or np.vectorize(f, otypes=[float])
        return Functional(
            horizon=self.horizon,
            fn=lambda x: f(fn(x)),
            name=name or f"f({self.name})",
            batch=(lambda rows: vf(batch(rows))) if batch is not None else None,
            statistic=self.statistic.then(f) if self.statistic is not None else None,
        )

    def __neg__(self) -> "Functional":
        return self.map(lambda v: -v, f"-({self.name})", lambda a: -a)

    def scaled(self, lam: float) -> "Functional":
        return self.map(lambda v: lam * v, f"{lam:g}*({self.name})", lambda a: lam * a)

    def shifted(self, c: float) -> "Functional":
        return self.map(lambda v: v + c, f"({self.name})+{c:g}", lambda a: a + c)

    def __add__(self, other: "Functional") -> "Functional":
        if not isinstance(other, Functional):
            return self.shifted(float(other))
        if other.horizon != self.horizon:
            raise ModelError("cannot add functionals of different horizons")
        f, g = self.fn, other.fn
        fb, gb = self.batch, other.batch
        return Functional(
            horizon=self.horizon,
            fn=lambda x: f(x) + g(x),
            name=f"({self.name})+({other.name})",
            batch=(lambda rows: fb(rows) + gb(rows)) if fb is not None and gb is not None else None,
        )

    def __sub__(self, other: "Functional") -> "Functional":
        return self + (-other)

    def extended(self, horizon: int, offset: int = 0) -> "Functional":
        """The same payoff read off observables ``offset+1 .. offset+n`` of a longer tuple."""
        if offset + self.horizon > horizon:
            raise ModelError("shifted functional does not fit the horizon")
        fn, batch, n = self.fn, self.batch, self.horizon
        return Functional(
            horizon=horizon,
            fn=lambda x: fn(tuple(x[offset:offset + n])),
            name=f"{self.name}[+{offset}]",
            batch=(lambda rows: batch(rows[:, offset:offset + n])) if batch is not None else None,
        )


# vocabulary ------------------------------------------------------------------

def constant(n: int, c: float) -> Functional:
    return Functional(n, lambda x: c, name=f"{c:g}", batch=lambda rows: np.full(len(rows), c),
                      lipschitz_meta=LipschitzMeta(0.0, 0.0))


def coordinate(n: int, i: int) -> Functional:
    """phi(x) = x_i (1-based)."""
    if not 1 <= i <= n:
        raise ModelError(f"coordinate {i} outside horizon {n}")
    return Functional(n, lambda x: x[i - 1], name=f"X{i}", batch=lambda rows: rows[:, i - 1],
                      lipschitz_meta=LipschitzMeta(1.0, 0.0),
                      statistic=RunningStatistic(StatisticKind.SUM, lo=i, hi=i))


def partial_sum(n: int) -> Functional:
    """S_n = X_1 + ... + X_n."""
    return Functional(n, lambda x: math.fsum(x), name=f"S{n}", batch=lambda rows: rows.sum(axis=1),
                      lipschitz_meta=LipschitzMeta(float(n), 0.0),
                      statistic=RunningStatistic(StatisticKind.SUM))


def mean(n: int) -> Functional:
    return partial_sum(n).map(lambda v: v / n, f"S{n}/{n}", lambda a: a / n)


def block_sum(n: int, lo: int, hi: int, truncate_by_index: bool = False) -> Functional:
    """Sum of observables lo..hi (1-based, inclusive); hi < lo is the empty sum."""
    if lo < 1 or hi > n:
        raise ModelError(f"block [{lo}, {hi}] outside horizon {n}")

    def value(x):
        total = 0.0
        for i in range(lo, hi + 1):
            total += truncate(x[i - 1], i) if truncate_by_index else x[i - 1]
        return total

    def batch(rows):
        if hi < lo:
            return np.zeros(len(rows))
        block = rows[:, lo - 1:hi]
        if truncate_by_index:
            levels = np.arange(lo, hi + 1, dtype=float)
            block = np.clip(block, -levels, levels)
        return block.sum(axis=1)

    return Functional(n, value, name=f"sum[{lo}..{hi}]", batch=batch,
                      statistic=RunningStatistic(StatisticKind.SUM, lo=lo, hi=hi,
                                                 truncate_by_index=truncate_by_index))


def _centers(n: int, centers: Optional[Sequence[float]]) -> Tuple[float, ...]:
    if centers is None:
        return tuple(0.0 for _ in range(n))
    centers = tuple(float(c) for c in centers)
    if len(centers) < n:
        raise ModelError(f"need {n} centers, got {len(centers)}")
    return centers[:n]


def max_partial_sum_deviation(n: int, centers: Optional[Sequence[float]] = None) -> Functional:
    """max over k <= n of S_k - c_k (centers default to zero)."""
    c = _centers(n, centers)
    c_arr = np.asarray(c)

    def value(x):
        s, best = 0.0, -math.inf
        for k in range(n):
            s += x[k]
            best = max(best, s - c[k])
        return best

    return Functional(n, value, name=f"maxdev{n}",
                      batch=lambda rows: (np.cumsum(rows, axis=1) - c_arr).max(axis=1),
                      statistic=RunningStatistic(StatisticKind.RUNNING_MAX, centers=c))


def crossing_indicator(n: int, level: float, centers: Optional[Sequence[float]] = None,
                       two_sided: bool = False, tol: float = 1e-12) -> Functional:
    """Indicator of {max_k (S_k - c_k) >= level} (or of |S_k - c_k| when two-sided)."""
    c = _centers(n, centers)
    c_arr = np.asarray(c)
    threshold = level - tol

    def value(x):
        s = 0.0
        for k in range(n):
            s += x[k]
            d = s - c[k]
            if (abs(d) if two_sided else d) >= threshold:
                return 1.0
        return 0.0

    def batch(rows):
        d = np.cumsum(rows, axis=1) - c_arr
        if two_sided:
            d = np.abs(d)
        return (d >= threshold).any(axis=1).astype(float)

    side = "|S_k-c_k|" if two_sided else "S_k-c_k"
    return Functional(n, value, name=f"1{{max {side} >= {level:g}}}", batch=batch,
                      statistic=RunningStatistic(StatisticKind.CROSSING, centers=c, level=level,
                                                 two_sided=two_sided))


def power(phi: Functional, k: float) -> Functional:
    return phi.map(lambda v: v ** k, f"({phi.name})^{k:g}", lambda a: np.power(a, k))


def affine(phi: Functional, a: float, b: float) -> Functional:
    return phi.map(lambda v: a * v + b, f"{a:g}*({phi.name})+{b:g}", lambda arr: a * arr + b)


def absolute(phi: Functional) -> Functional:
    return phi.map(abs, f"|{phi.name}|", np.abs)


def truncated(phi: Functional, c: float) -> Functional:
    """phi^(c) = (-c) v phi ^ c."""
    return phi.map(lambda v: truncate(v, c), f"({phi.name})^({c:g})", lambda a: np.clip(a, -c, c))


def compose(phi: Functional, transforms: Sequence[Mapping[str, Any]]) -> Functional:
    """Apply scalar transforms (power / affine / abs / truncate) innermost first."""
    for t in transforms:
        op = t.get("op")
        if op == "power":
            phi = power(phi, float(t["k"]))
        elif op == "affine":
            phi = affine(phi, float(t.get("a", 1.0)), float(t.get("b", 0.0)))
        elif op == "abs":
            phi = absolute(phi)
        elif op == "truncate":
            phi = truncated(phi, float(t["c"]))
        else:
            raise ConfigValidationError(f"unknown transform '{op}' in compose")
    return phi


def table_functional(n: int, table: Mapping[Tuple[float, ...], float], name: str = "table") -> Functional:
    """A payoff given by its values on observable tuples."""
    lookup = dict(table)

    def value(x):
        try:
            return lookup[tuple(x)]
        except KeyError:
            raise ModelError(f"{name} is not defined at {tuple(x)}") from None

    return Functional(n, value, name=name)


def build_functional(expr: Mapping[str, Any], n: int) -> Functional:
    """Build a payoff from the config vocabulary.

    ``{"op": "sum"}``, ``{"op": "mean"}``, ``{"op": "coordinate", "i": 2}``,
    ``{"op": "max_partial_sum_deviation", "centers": [...]}``,
    ``{"op": "power", "k": 2, "of": {...}}``, ``{"op": "affine", "a": 1, "b": 0, "of": {...}}``,
    ``{"op": "compose", "of": {...}, "transforms": [{...}, ...]}``.
    """
    op = expr.get("op")
    if op == "sum":
        return partial_sum(n)
    if op == "mean":
        return mean(n)
    if op == "coordinate":
        return coordinate(n, int(expr.get("i", 1)))
    if op == "max_partial_sum_deviation":
        return max_partial_sum_deviation(n, expr.get("centers"))
    if op in ("power", "affine", "abs", "truncate"):
        inner = build_functional(expr.get("of", {"op": "sum"}), n)
        return compose(inner, [expr])
    if op == "compose":
        inner = build_functional(expr.get("of", {"op": "sum"}), n)
        return compose(inner, expr.get("transforms", []))
    raise ConfigValidationError(f"unknown functional op '{op}'")


def check_lipschitz(phi: Functional, points: np.ndarray, pairs: int = 200, seed: int = 0) -> Optional[Dict[str, Any]]:
    """Spot-check the C_{l,Lip} bound on random pairs of ``points``.

    Returns the first violating pair, or None.
    """
    meta = phi.lipschitz_meta
    if meta is None or len(points) < 2:
        return None
    rng = np.random.default_rng(seed)
    for _ in range(pairs):
        i, j = rng.choice(len(points), size=2, replace=False)
        x, y = points[i], points[j]
        dist = float(np.linalg.norm(x - y))
        bound = meta.constant * (1 + np.linalg.norm(x) ** meta.order + np.linalg.norm(y) ** meta.order) * dist
        gap = abs(phi(x) - phi(y))
        if gap > bound + 1e-12:
            return {"x": tuple(x), "y": tuple(y), "gap": gap, "bound": bound}
    return None
