"""Adversary strategies: history-dependent choice of a law at every driver step.

Each strategy induces one classical probability measure P with
P[phi] <= E[phi]. History-free strategies (constant, epoch schedules,
tracking schedules) can hand out law indices for a whole block of steps at
once, which is what lets long simulations run vectorised.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidStrategy


def one_hot(index: int, n_laws: int) -> np.ndarray:
    weights = np.zeros(n_laws)
    weights[index] = 1.0
    return weights


class AdversaryStrategy(ABC):
    """Base class for measure-selection policies."""

    name: str = "strategy"
    history_free: bool = False
    randomized: bool = False

    @abstractmethod
    def law_index(self, history: Tuple[float, ...]) -> int:
        """Law to use for the next driver given the realised driver history."""

    def step_weights(self, history: Tuple[float, ...], n_laws: int) -> np.ndarray:
        """Probability of picking each law at the next step (one-hot unless randomised)."""
        index = self.law_index(history)
        self._check_index(index, n_laws)
        return one_hot(index, n_laws)

    def law_indices(self, start: int, count: int, n_laws: int, aux=None) -> np.ndarray:
        """Law indices for steps ``start .. start+count-1`` (history-free strategies only)."""
        raise InvalidStrategy(f"{self.name} depends on the history and cannot be scheduled in bulk")

    def validate(self, n_laws: int):
        """Check every index the strategy can return is below ``n_laws``."""

    def _check_index(self, index: int, n_laws: int):
        if not 0 <= index < n_laws:
            raise InvalidStrategy(f"{self.name} chose law {index} but only {n_laws} laws exist")

    def __repr__(self):
        return f"<{type(self).__name__}({self.name})>"


class ConstantStrategy(AdversaryStrategy):
    """Always the same law."""

    history_free = True

    def __init__(self, index: int, name: Optional[str] = None):
        self.index = int(index)
        self.name = name or f"constant[{self.index}]"

    def law_index(self, history):
        return self.index

    def law_indices(self, start, count, n_laws, aux=None):
        self._check_index(self.index, n_laws)
        return np.full(count, self.index, dtype=np.int64)

    def validate(self, n_laws):
        self._check_index(self.index, n_laws)


@dataclass(frozen=True)
class Epoch:
    """A run of ``length`` steps whose law is drawn i.i.d. from ``weights``."""

    length: int
    weights: Tuple[Tuple[int, float], ...]

    @classmethod
    def pure(cls, length: int, index: int) -> "Epoch":
        return cls(int(length), ((int(index), 1.0),))

    @classmethod
    def mixed(cls, length: int, weights: Mapping[int, float]) -> "Epoch":
        total = sum(weights.values())
        if total <= 0 or any(w < 0 for w in weights.values()):
            raise InvalidStrategy("epoch mixing weights must be nonnegative with positive total")
        return cls(int(length), tuple(sorted((int(j), w / total) for j, w in weights.items())))

    @property
    def is_pure(self) -> bool:
        return len([w for _, w in self.weights if w > 0]) == 1

    @property
    def pure_index(self) -> int:
        return next(j for j, w in self.weights if w > 0)

    def vector(self, n_laws: int) -> np.ndarray:
        out = np.zeros(n_laws)
        for j, w in self.weights:
            if j >= n_laws:
                raise InvalidStrategy(f"epoch uses law {j} but only {n_laws} laws exist")
            out[j] = w
        return out


class EpochSchedule(AdversaryStrategy):
    """A list of epochs, optionally repeated cyclically."""

    history_free = True

    def __init__(self, epochs: Sequence[Epoch], repeat: bool = True, name: Optional[str] = None):
        if not epochs or any(e.length <= 0 for e in epochs):
            raise InvalidStrategy("an epoch schedule needs epochs of positive length")
        self.epochs = tuple(epochs)
        self.repeat = repeat
        self.ends = np.cumsum([e.length for e in self.epochs])
        self.period = int(self.ends[-1])
        self.randomized = not all(e.is_pure for e in self.epochs)
        self.name = name or f"epochs[{len(self.epochs)}]"

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[int, int]], repeat: bool = True,
                   name: Optional[str] = None) -> "EpochSchedule":
        """Schedule from (length, law index) pairs."""
        return cls([Epoch.pure(length, index) for length, index in pairs], repeat, name)

    def epoch_of(self, steps: np.ndarray) -> np.ndarray:
        steps = np.asarray(steps, dtype=np.int64)
        if self.repeat:
            steps = steps % self.period
        ids = np.searchsorted(self.ends, steps, side="right")
        return np.minimum(ids, len(self.epochs) - 1)

    def law_index(self, history):
        epoch = self.epochs[int(self.epoch_of(np.array([len(history)]))[0])]
        if not epoch.is_pure:
            raise InvalidStrategy(f"{self.name} mixes laws; use step_weights or law_indices")
        return epoch.pure_index

    def step_weights(self, history, n_laws):
        epoch = self.epochs[int(self.epoch_of(np.array([len(history)]))[0])]
        return epoch.vector(n_laws)

    def law_indices(self, start, count, n_laws, aux=None):
        ids = self.epoch_of(np.arange(start, start + count))
        table = np.array([e.vector(n_laws) for e in self.epochs])
        if not self.randomized:
            return np.argmax(table, axis=1)[ids]
        if aux is None:
            raise InvalidStrategy(f"{self.name} mixes laws and needs an auxiliary stream")
        cumulative = np.cumsum(table, axis=1)
        u = aux.uniforms(count)
        chosen = (u[:, None] >= cumulative[ids]).sum(axis=1)
        return np.minimum(chosen, n_laws - 1)

    def validate(self, n_laws):
        for e in self.epochs:
            e.vector(n_laws)


class TrackingSchedule(AdversaryStrategy):
    """Per-step mixture of two laws: ``hi`` with probability lambda(step), else ``lo``."""

    history_free = True
    randomized = True

    def __init__(self, hi: int, lo: int, lambdas: Callable[[np.ndarray], np.ndarray],
                 name: Optional[str] = None):
        self.hi, self.lo = int(hi), int(lo)
        self.lambdas = lambdas
        self.name = name or f"tracking[{self.hi},{self.lo}]"

    def _lambda(self, steps: np.ndarray) -> np.ndarray:
        lam = np.asarray(self.lambdas(steps), dtype=float)
        if np.any(lam < -1e-12) or np.any(lam > 1 + 1e-12):
            raise InvalidStrategy(f"{self.name} produced a mixing weight outside [0, 1]")
        return np.clip(lam, 0.0, 1.0)

    def law_index(self, history):
        raise InvalidStrategy(f"{self.name} mixes laws; use step_weights or law_indices")

    def step_weights(self, history, n_laws):
        lam = float(self._lambda(np.array([len(history)]))[0])
        weights = np.zeros(n_laws)
        weights[self.hi] += lam
        weights[self.lo] += 1.0 - lam
        return weights

    def law_indices(self, start, count, n_laws, aux=None):
        if aux is None:
            raise InvalidStrategy(f"{self.name} needs an auxiliary stream")
        lam = self._lambda(np.arange(start, start + count))
        u = aux.uniforms(count)
        return np.where(u < lam, self.hi, self.lo).astype(np.int64)

    def validate(self, n_laws):
        self._check_index(self.hi, n_laws)
        self._check_index(self.lo, n_laws)


class TableStrategy(AdversaryStrategy):
    """Explicit map from driver history to law index, with a fallback."""

    def __init__(self, table: Mapping[Tuple[float, ...], int], default: int = 0, name: Optional[str] = None):
        self.table: Dict[Tuple[float, ...], int] = {tuple(float(v) for v in k): int(j) for k, j in table.items()}
        self.default = int(default)
        self.name = name or "table"

    def law_index(self, history):
        return self.table.get(tuple(float(v) for v in history), self.default)

    def validate(self, n_laws):
        for index in list(self.table.values()) + [self.default]:
            self._check_index(index, n_laws)


class LastValueStrategy(TableStrategy):
    """Choose ``on_value[v]`` when the previous driver was v (``first`` at step one)."""

    def __init__(self, first: int, on_value: Mapping[float, int], default: int = 0, name: Optional[str] = None):
        super().__init__({}, default, name or "last-value")
        self.first = int(first)
        self.on_value = {float(v): int(j) for v, j in on_value.items()}

    def law_index(self, history):
        if not history:
            return self.first
        return self.on_value.get(float(history[-1]), self.default)

    def validate(self, n_laws):
        for index in [self.first, self.default, *self.on_value.values()]:
            self._check_index(index, n_laws)


class HookStrategy(AdversaryStrategy):
    """Arbitrary policy callable ``policy(history) -> law index``."""

    def __init__(self, policy: Callable[[Tuple[float, ...]], int], name: str = "hook"):
        self.policy = policy
        self.name = name

    def law_index(self, history):
        return int(self.policy(tuple(history)))
