"""Adversarial path simulation.

A strategy picks a law at every driver step and one value is drawn from it.
History-free strategies are simulated in chunks of ``SLLN_SIM_CHUNK`` steps
with numpy; history-dependent ones step one driver at a time. Paths are
independent and keyed by their index, so they fan out over a thread pool
and still come back bit-identical and in order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import config
from .errors import ModelError
from .models import ModelKind, SequenceModel
from .rng import path_streams
from .strategies import AdversaryStrategy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PathStats:
    """Running statistics of one simulated path at its checkpoints."""

    seed: int
    path_index: int
    strategy: str
    checkpoints: Tuple[int, ...]
    sums: Tuple[float, ...]
    running_means: Tuple[float, ...]
    running_sup: Tuple[float, ...]
    running_max_dev: Tuple[float, ...]

    def rows(self) -> List[dict]:
        return [
            {"path": self.path_index, "strategy": self.strategy, "n": n, "sum": s,
             "running_mean": mean, "running_sup": sup, "running_max_dev": dev}
            for n, s, mean, sup, dev in zip(self.checkpoints, self.sums, self.running_means,
                                             self.running_sup, self.running_max_dev)
        ]


def geometric_checkpoints(n: int, first: int = 10, ratio: float = 10.0) -> List[int]:
    """first, first*ratio, ... up to n (n always included)."""
    points, k = [], float(first)
    while k < n:
        points.append(int(round(k)))
        k *= ratio
    points.append(n)
    return sorted(set(points))


def _draw(model: SequenceModel, start: int, laws: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Driver values for steps ``start .. start+len(u)-1`` (0-based) from the chosen laws."""
    values = np.empty(len(u))
    if model.kind is ModelKind.INDEPENDENT and len(model.drivers) > 1:
        sets = (start + np.arange(len(u))) % len(model.drivers)
    else:
        sets = np.zeros(len(u), dtype=np.int64)
    for s in np.unique(sets):
        aset = model.drivers[int(s)]
        in_set = sets == s
        for j in np.unique(laws[in_set]):
            mask = in_set & (laws == j)
            values[mask] = aset.laws[int(j)].quantiles(u[mask])
    return values


class PathSimulator:
    """Simulates paths of one model under one strategy."""

    def __init__(self, model: SequenceModel, strategy: AdversaryStrategy, seed: int,
                 chunk: Optional[int] = None):
        self.model = model
        self.strategy = strategy
        self.seed = int(seed)
        self.chunk = chunk or config.SIM_CHUNK
        self.m = model.m
        for aset in model.drivers:
            strategy.validate(aset.size)

    def _laws_of(self, t: int) -> int:
        return self.model.driver_at(t + 1).size

    def drivers(self, path_index: int, T: int) -> np.ndarray:
        """The full driver path of ``T`` steps (materialised; use for short horizons)."""
        return np.concatenate(list(self._driver_chunks(path_index, T)))

    def _driver_chunks(self, path_index: int, T: int):
        values, aux = path_streams(self.seed, path_index)
        if self.strategy.history_free:
            n_laws = self.model.driver.size
            for start in range(0, T, self.chunk):
                count = min(self.chunk, T - start)
                laws = self.strategy.law_indices(start, count, n_laws, aux)
                yield _draw(self.model, start, laws, values.uniforms(count))
            return
        history: List[float] = []
        for t in range(T):
            aset = self.model.driver_at(t + 1)
            weights = self.strategy.step_weights(tuple(history), aset.size)
            if self.strategy.randomized:
                j = int(np.searchsorted(np.cumsum(weights), aux.uniform(), side="right"))
                j = min(j, aset.size - 1)
            else:
                j = int(np.argmax(weights))
            history.append(aset.laws[j].quantile(values.uniform()))
        yield np.asarray(history, dtype=float)

    def run(self, path_index: int, n: int, checkpoints: Sequence[int], center: float = 0.0) -> PathStats:
        """Simulate ``n`` observables and record the running statistics at ``checkpoints``.

        ``running_sup`` is max_{k<=n} |S_k|/k and ``running_max_dev`` is
        max_{k<=n} |S_k - k*center|.
        """
        points = np.array(sorted(set(int(c) for c in checkpoints if 1 <= c <= n)), dtype=np.int64)
        sums, sups, devs = [], [], []
        carry = np.empty(0)
        S, done = 0.0, 0
        best_sup, best_dev = 0.0, 0.0
        for block in self._driver_chunks(path_index, n + self.m):
            ext = np.concatenate([carry, block])
            if len(ext) <= self.m:
                carry = ext
                continue
            obs = self.model.observe_array(ext[None, :])[0]
            carry = ext[len(ext) - self.m:] if self.m else np.empty(0)
            k = done + np.arange(1, len(obs) + 1)
            partial = S + np.cumsum(obs)
            sup = np.maximum.accumulate(np.maximum(np.abs(partial) / k, best_sup))
            dev = np.maximum.accumulate(np.maximum(np.abs(partial - k * center), best_dev))
            here = points[(points > done) & (points <= done + len(obs))] - done - 1
            sums.extend(partial[here].tolist())
            sups.extend(sup[here].tolist())
            devs.extend(dev[here].tolist())
            S, done = float(partial[-1]), done + len(obs)
            best_sup, best_dev = float(sup[-1]), float(dev[-1])
        if done != n:
            raise ModelError(f"simulated {done} observables, expected {n}")
        return PathStats(
            seed=self.seed,
            path_index=path_index,
            strategy=self.strategy.name,
            checkpoints=tuple(int(p) for p in points),
            sums=tuple(sums),
            running_means=tuple(s / p for s, p in zip(sums, points.tolist())),
            running_sup=tuple(sups),
            running_max_dev=tuple(devs),
        )

    def running_means(self, path_index: int, n: int) -> np.ndarray:
        """S_k/k for every k <= n (materialised)."""
        obs = self.model.observe_array(self.drivers(path_index, n + self.m)[None, :])[0]
        return np.cumsum(obs) / np.arange(1, n + 1)


def simulate_paths(model: SequenceModel, strategy: AdversaryStrategy, n: int, n_paths: int,
                   checkpoints: Sequence[int], seed: int, center: float = 0.0,
                   threads: Optional[int] = None, first_path: int = 0) -> List[PathStats]:
    """Simulate ``n_paths`` paths; results are in path order whatever the thread count."""
    simulator = PathSimulator(model, strategy, seed)
    workers = min(threads or config.get_threads(), max(1, n_paths))
    indices = range(first_path, first_path + n_paths)
    logger.info("simulating %d paths of %d observables under %s (%d threads)",
                n_paths, n, strategy.name, workers)
    if workers == 1:
        return [simulator.run(i, n, checkpoints, center) for i in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: simulator.run(i, n, checkpoints, center), indices))


def simulate_driver_paths(model: SequenceModel, strategy: AdversaryStrategy, T: int, n_paths: int,
                          seed: int) -> np.ndarray:
    """``n_paths`` driver paths of length ``T`` as rows of a matrix."""
    simulator = PathSimulator(model, strategy, seed)
    if T == 0:
        return np.empty((n_paths, 0))
    return np.vstack([simulator.drivers(i, T) for i in range(n_paths)])
