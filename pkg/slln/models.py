"""Sequence models: how observables (X_n) are built from driver ambiguity sets."""

from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import HorizonMismatch, InvariantViolation, ModelError, NotExactCapable, UnknownWindowFn
from .measures import AmbiguitySet

PAIR_TOL = 1e-12


class ModelKind(Enum):
    """How driver coordinates turn into observables."""
    IID = "iid"
    MOVING_WINDOW = "moving_window"
    INDEPENDENT = "independent"


@dataclass(frozen=True)
class WindowFunction:
    """A registered map from an (m+1)-window of drivers to one observable."""

    name: str
    fn: Callable[[Tuple[float, ...]], float] = field(compare=False)
    vectorized: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    params: Tuple[Tuple[str, float], ...] = ()

    def __call__(self, window: Sequence[float]) -> float:
        return float(self.fn(tuple(window)))

    def apply(self, windows: np.ndarray) -> np.ndarray:
        """Evaluate on every row of a 2-D array of windows."""
        if self.vectorized is not None:
            return np.asarray(self.vectorized(windows), dtype=float)
        return np.array([self.fn(tuple(row)) for row in windows], dtype=float)

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        return f"{self.name}(" + ",".join(f"{v:g}" for _, v in self.params) + ")"


IDENTITY = WindowFunction("identity", lambda w: w[-1], lambda a: a[:, -1])
MEAN_WINDOW = WindowFunction("mean_window", lambda w: sum(w) / len(w), lambda a: a.mean(axis=1))
MAX_WINDOW = WindowFunction("max_window", max, lambda a: a.max(axis=1))


def affine_window(a: float, b: float) -> WindowFunction:
    """Window map w -> a * sum(w) + b."""
    a, b = float(a), float(b)
    return WindowFunction(
        "affine_window",
        lambda w: a * sum(w) + b,
        lambda arr: a * arr.sum(axis=1) + b,
        params=(("a", a), ("b", b)),
    )


WINDOW_FUNCTIONS: Dict[str, Callable[..., WindowFunction]] = {
    "identity": lambda: IDENTITY,
    "mean_window": lambda: MEAN_WINDOW,
    "max_window": lambda: MAX_WINDOW,
    "affine_window": affine_window,
}


def resolve_window(name: str, params: Optional[Dict[str, Any]] = None) -> WindowFunction:
    """Look a window function up in the registered vocabulary."""
    try:
        factory = WINDOW_FUNCTIONS[name]
    except KeyError:
        raise UnknownWindowFn(f"unknown window function '{name}' "
                              f"(known: {', '.join(sorted(WINDOW_FUNCTIONS))})") from None
    try:
        return factory(**(params or {}))
    except TypeError as e:
        raise UnknownWindowFn(f"bad parameters for window function '{name}': {e}") from None


@dataclass(frozen=True)
class SequenceModel:
    """A sequence (X_n) built from driver coordinates.

    ``IID``: X_i is the i-th driver. ``MOVING_WINDOW``: X_i = g(e_i, ..., e_{i+m})
    with i.i.d. drivers e. ``INDEPENDENT``: X_i is the i-th driver drawn from
    ``drivers[(i - 1) % len(drivers)]``. Use the constructors in
    :mod:`slln.sequences`.
    """

    kind: ModelKind
    drivers: Tuple[AmbiguitySet, ...]
    m: int = 0
    window: WindowFunction = IDENTITY

    def __post_init__(self):
        if not self.drivers:
            raise ModelError("a sequence model needs a driver ambiguity set")
        if self.m < 0:
            raise ModelError("m must be nonnegative")
        if self.kind is not ModelKind.MOVING_WINDOW and self.m != 0:
            raise ModelError(f"{self.kind.value} models have m = 0")

    @property
    def driver(self) -> AmbiguitySet:
        return self.drivers[0]

    @property
    def exact_capable(self) -> bool:
        return all(d.exact_capable for d in self.drivers)

    def driver_at(self, t: int) -> AmbiguitySet:
        """Driver ambiguity set of the 1-based coordinate ``t``."""
        return self.drivers[(t - 1) % len(self.drivers)]

    def driver_horizon(self, n: int) -> int:
        """Driver coordinates needed for ``n`` observables."""
        return n + self.m

    def observables(self, driver_values: Sequence[float]) -> Tuple[float, ...]:
        """Observables of a realised driver tuple (``len - m`` of them)."""
        if self.kind is not ModelKind.MOVING_WINDOW:
            return tuple(float(v) for v in driver_values)
        width = self.m + 1
        return tuple(self.window(driver_values[i:i + width]) for i in range(len(driver_values) - self.m))

    def observe_array(self, drivers: np.ndarray) -> np.ndarray:
        """Row-wise observables of a 2-D array of driver paths."""
        drivers = np.asarray(drivers, dtype=float)
        if self.kind is not ModelKind.MOVING_WINDOW:
            return drivers
        rows, cols = drivers.shape
        width = self.m + 1
        windows = np.lib.stride_tricks.sliding_window_view(drivers, width, axis=1)
        flat = windows.reshape(-1, width)
        return self.window.apply(flat).reshape(rows, cols - self.m)

    def require_exact(self):
        if not self.exact_capable:
            raise NotExactCapable(f"{self.label} has laws without a common finite support")

    def require_horizon(self, n: int, horizon: int):
        if n != horizon:
            raise HorizonMismatch(f"functional horizon {horizon} does not match {n} observables")

    def supports(self, T: int) -> List[Tuple[float, ...]]:
        """Support of each of the first ``T`` driver coordinates."""
        self.require_exact()
        return [self.driver_at(t).support for t in range(1, T + 1)]

    def observable_values(self) -> List[float]:
        """Every value a single observable can take (exact models)."""
        self.require_exact()
        if self.kind is ModelKind.MOVING_WINDOW:
            support = self.driver.support
            return sorted({self.window(w) for w in product(support, repeat=self.m + 1)})
        return sorted({x for d in self.drivers for x in d.support})

    @property
    def label(self) -> str:
        if self.kind is ModelKind.IID:
            return f"IID({self.driver!r})"
        if self.kind is ModelKind.MOVING_WINDOW:
            return f"MovingWindow(m={self.m}, {self.window.label}, {self.driver!r})"
        return f"Independent({len(self.drivers)} driver sets)"


@dataclass(frozen=True)
class ExpectationPair:
    """Upper expectation and its conjugate lower expectation."""

    upper: float
    lower: float

    def __post_init__(self):
        if self.lower > self.upper + PAIR_TOL:
            raise InvariantViolation(f"lower expectation {self.lower!r} exceeds upper {self.upper!r}")
