"""Strong-law experiments: mean bounds, maximal inequalities and adversarial paths.

Exact quantities (mean-bound sequences, capacities of crossing events) come
from the compressed DP; asymptotic statements are checked by simulating the
measures that strategies induce. Nothing here claims a limit: reports carry
values at finite horizons and band-membership flags.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .capacity import choquet_finiteness_diagnostics
from .config import config
from .engine import strategy_measure_expectation, upper_expectation
from .errors import (
    HorizonTooSmall,
    InvariantViolation,
    MuOutOfBand,
    NoHeavyTailLaw,
    TargetOrderError,
    TargetOutOfBracket,
    WeightConditionFails,
)
from .functionals import coordinate, crossing_indicator, partial_sum, power
from .lattice import LatticeDP, NotLattice
from .measures import AmbiguitySet
from .models import ModelKind, SequenceModel
from .sequences import weight_sequence_check
from .simulation import PathSimulator, geometric_checkpoints, simulate_paths
from .strategies import AdversaryStrategy, ConstantStrategy, Epoch, EpochSchedule, TrackingSchedule

logger = logging.getLogger(__name__)

BRACKET_TOL = 1e-10
INEQUALITY_TOL = 1e-12

Weights = Union[Sequence[float], Callable[[np.ndarray], np.ndarray]]


# mean bounds -------------------------------------------------------------------

@dataclass(frozen=True)
class MeanBoundsSequence:
    """E[S_n]/n and e[S_n]/n for each n, with the single-coordinate bracket."""

    n_values: Tuple[int, ...]
    upper_means: Tuple[float, ...]
    lower_means: Tuple[float, ...]
    bracket: Tuple[float, float]

    def __post_init__(self):
        low, high = self.bracket
        for n, up, lo in zip(self.n_values, self.upper_means, self.lower_means):
            if not (low - BRACKET_TOL <= lo <= up + BRACKET_TOL and up <= high + BRACKET_TOL):
                raise InvariantViolation(f"mean bounds at n={n} ({lo!r}, {up!r}) leave the bracket {self.bracket}")

    def rows(self) -> List[dict]:
        rows = []
        for n, up, lo in zip(self.n_values, self.upper_means, self.lower_means):
            rows.append({"quantity": "upper_mean", "parameter": f"n={n}", "value": up, "flag": "ok"})
            rows.append({"quantity": "lower_mean", "parameter": f"n={n}", "value": lo, "flag": "ok"})
        return rows


def coordinate_bracket(model: SequenceModel) -> Tuple[float, float]:
    """(lowest, highest) single-coordinate lower/upper expectation."""
    count = len(model.drivers) if model.kind is ModelKind.INDEPENDENT else 1
    lows, highs = [], []
    for i in range(1, count + 1):
        phi = coordinate(i, i)
        highs.append(upper_expectation(model, phi))
        lows.append(-upper_expectation(model, -phi))
    return min(lows), max(highs)


def mean_bounds_sequence(model: SequenceModel, N: int, n_values: Optional[Sequence[int]] = None,
                         scale: float = 1.0) -> MeanBoundsSequence:
    """Exact E[scale S_n]/n and e[scale S_n]/n for n in ``n_values`` (default 1..N).

    One compressed state graph over N observables serves every n.
    """
    n_values = sorted(set(n_values)) if n_values is not None else list(range(1, N + 1))
    if not n_values or n_values[0] < 1 or n_values[-1] > N:
        raise HorizonTooSmall(f"n values must lie in 1..{N}")
    low, high = coordinate_bracket(model)
    bracket = (scale * low, scale * high) if scale >= 0 else (scale * high, scale * low)
    upper, lower = [], []
    try:
        dp = LatticeDP(model, partial_sum(N).statistic, N)
        for n in n_values:
            upper.append(dp.value(n, outer=lambda v: scale * v) / n)
            lower.append(-dp.value(n, outer=lambda v: -scale * v) / n)
    except NotLattice as e:
        logger.info("mean bounds fall back to full-history DP: %s", e)
        upper, lower = [], []
        for n in n_values:
            s = partial_sum(n).scaled(scale)
            upper.append(upper_expectation(model, s) / n)
            lower.append(-upper_expectation(model, -s) / n)
    logger.debug("mean bounds for n=%d..%d computed", n_values[0], n_values[-1])
    return MeanBoundsSequence(tuple(n_values), tuple(upper), tuple(lower), bracket)


@dataclass(frozen=True)
class MuEstimate:
    mu_bar: float
    mu_under: float
    doublings: Tuple[int, ...]
    upper_deltas: Tuple[float, ...]
    lower_deltas: Tuple[float, ...]
    converged: bool

    def rows(self) -> List[dict]:
        flag = "converged" if self.converged else "not-converged"
        rows = [{"quantity": "mu_bar", "parameter": "", "value": self.mu_bar, "flag": flag},
                {"quantity": "mu_under", "parameter": "", "value": self.mu_under, "flag": flag}]
        for n, du, dl in zip(self.doublings, self.upper_deltas, self.lower_deltas):
            rows.append({"quantity": "upper_delta", "parameter": f"n={n}", "value": du, "flag": flag})
            rows.append({"quantity": "lower_delta", "parameter": f"n={n}", "value": dl, "flag": flag})
        return rows


def estimate_mu_limits(seq: MeanBoundsSequence, tol: float = 1e-3) -> MuEstimate:
    """Last values plus |mean(2n) - mean(n)| over doublings; converged when the last two are below tol."""
    if seq.n_values[-1] < 8:
        raise HorizonTooSmall("need N >= 8 to read a trend")
    index = {n: i for i, n in enumerate(seq.n_values)}
    doublings, du, dl = [], [], []
    n = 1
    while 2 * n <= seq.n_values[-1]:
        if n in index and 2 * n in index:
            doublings.append(n)
            du.append(abs(seq.upper_means[index[2 * n]] - seq.upper_means[index[n]]))
            dl.append(abs(seq.lower_means[index[2 * n]] - seq.lower_means[index[n]]))
        n *= 2
    tail = [max(a, b) for a, b in zip(du, dl)][-2:]
    converged = bool(tail) and all(d <= tol for d in tail)
    return MuEstimate(seq.upper_means[-1], seq.lower_means[-1], tuple(doublings), tuple(du), tuple(dl), converged)


# maximal inequalities ----------------------------------------------------------

@dataclass
class InequalityReport:
    """One instance of a maximal inequality: exact left side against its bound."""

    instance: str
    lhs: float
    rhs: float
    asserted: bool = True
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else math.inf
        return self.lhs / self.rhs

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + INEQUALITY_TOL

    @property
    def ok(self) -> bool:
        return self.passed or not self.asserted

    def rows(self) -> List[dict]:
        flag = "pass" if self.passed else ("fail" if self.asserted else "violation")
        rows = [{"quantity": "lhs", "parameter": self.instance, "value": self.lhs, "flag": flag},
                {"quantity": "rhs", "parameter": self.instance, "value": self.rhs, "flag": flag}]
        rows += [{"quantity": k, "parameter": self.instance, "value": v, "flag": flag}
                 for k, v in self.extras.items()]
        return rows


def _independent(model: SequenceModel) -> bool:
    return model.kind is not ModelKind.MOVING_WINDOW or model.m == 0


def _classical(model: SequenceModel) -> bool:
    return _independent(model) and all(d.size == 1 for d in model.drivers)


def second_moment_sum(model: SequenceModel, n: int) -> float:
    """B_n^2 = sum of E[X_i^2] for i <= n."""
    if model.kind is ModelKind.MOVING_WINDOW and model.m:
        return n * upper_expectation(model, power(coordinate(1, 1), 2))
    return math.fsum(upper_expectation(model, power(coordinate(i, i), 2))
                     for i in range(1, n + 1))


def _partial_sum_bounds(model: SequenceModel, n: int) -> Tuple[List[float], List[float]]:
    """E[S_k] and e[S_k] for k = 1..n."""
    seq = mean_bounds_sequence(model, n)
    return ([k * u for k, u in zip(seq.n_values, seq.upper_means)],
            [k * lo for k, lo in zip(seq.n_values, seq.lower_means)])


def kolmogorov_report(model: SequenceModel, n: int, x: float, delta: float = 1.0, p: float = 2.0,
                      upper: bool = True) -> InequalityReport:
    """V(max_k (S_k - E[S_k]) >= x), or v(max_k (S_k - e[S_k]) >= x) when ``upper`` is False.

    The constants of the bound are unspecified, so the report carries the
    smallest ones that make it hold: C = lhs x^2 / B_n^2 for the x^-2 form and
    C_p = (lhs - exp term) delta^p x^p / B_n^2 for the exponential form. Only
    the classical single-law case is asserted, with C <= 1.
    """
    if not (0 < delta <= 1) or p < 2 or x <= 0:
        raise ValueError("need x > 0, 0 < delta <= 1 and p >= 2")
    b2 = second_moment_sum(model, n)
    upper_sums, lower_sums = _partial_sum_bounds(model, n)
    centers = upper_sums if upper else lower_sums
    event = crossing_indicator(n, x, centers)
    if upper:
        lhs = upper_expectation(model, event)
    else:
        lhs = 1.0 - upper_expectation(model, event.map(lambda v: 1.0 - v, "complement", lambda a: 1.0 - a))
    exp_term = math.exp(-x * x / (2 * (1 + delta) * b2)) if b2 > 0 else 0.0
    c_hat = lhs * x * x / b2 if b2 > 0 else (0.0 if lhs == 0 else math.inf)
    c_hat_p = max(0.0, lhs - exp_term) * delta ** p * x ** p / b2 if b2 > 0 else 0.0
    classical = _classical(model)
    side = "V" if upper else "v"
    report = InequalityReport(
        instance=f"kolmogorov[{side}] n={n} x={x:g}",
        lhs=lhs,
        rhs=b2 / (x * x) if classical else math.inf,
        asserted=classical,
        extras={"C_hat": c_hat, "C_hat_p": c_hat_p, "exp_term": exp_term, "B2": b2},
    )
    logger.debug("%s: lhs=%.6g C=%.6g", report.instance, lhs, c_hat)
    return report


def _mu_list(mus: Union[float, Sequence[float]], n: int) -> List[float]:
    if isinstance(mus, (int, float)):
        return [float(mus)] * n
    mus = [float(v) for v in mus]
    if len(mus) < n:
        raise MuOutOfBand(f"need {n} centers, got {len(mus)}")
    return mus[:n]


def lower_capacity_maximal_check(model: SequenceModel, n: int, mus: Union[float, Sequence[float]],
                                 x: float) -> InequalityReport:
    """v(max_k |sum_{i<=k} (X_i - mu_i)| >= x) against (2/x^2) sum E[X_i^2].

    Asserted for independent sequences; moving windows with m > 0 are reported only.
    """
    if x <= 0:
        raise ValueError("x must be positive")
    mus = _mu_list(mus, n)
    for i, mu in enumerate(mus, start=1):
        phi = coordinate(i, i)
        hi, lo = upper_expectation(model, phi), -upper_expectation(model, -phi)
        if not lo - INEQUALITY_TOL <= mu <= hi + INEQUALITY_TOL:
            raise MuOutOfBand(f"mu_{i} = {mu!r} outside [{lo!r}, {hi!r}]")
    centers = np.cumsum(mus).tolist()
    event = crossing_indicator(n, x, centers, two_sided=True)
    lhs = 1.0 - upper_expectation(model, event.map(lambda v: 1.0 - v, "complement", lambda a: 1.0 - a))
    b2 = second_moment_sum(model, n)
    report = InequalityReport(
        instance=f"lower-maximal n={n} x={x:g}",
        lhs=lhs,
        rhs=2.0 * b2 / (x * x),
        asserted=_independent(model),
    )
    if not report.ok:
        logger.warning("%s violated: %.6g > %.6g", report.instance, report.lhs, report.rhs)
    return report


# strategies over extreme laws -------------------------------------------------

def observable_law_means(model: SequenceModel) -> List[float]:
    """Mean of one observable when every driver uses law j, for each j.

    Averaged over the driver cycle for independent models; computed exactly
    when the model allows it, from the law means otherwise.
    """
    size = min(d.size for d in model.drivers)
    if model.exact_capable and model.kind is ModelKind.MOVING_WINDOW:
        phi = coordinate(1, 1)
        return [strategy_measure_expectation(model, ConstantStrategy(j), phi).value for j in range(size)]
    return [math.fsum(d.laws[j].mean for d in model.drivers) / len(model.drivers) for j in range(size)]


def extreme_laws(model: SequenceModel) -> Tuple[int, int, float, float]:
    """(index of highest-mean law, index of lowest, their observable means)."""
    means = observable_law_means(model)
    hi = max(range(len(means)), key=lambda j: (means[j], -j))
    lo = min(range(len(means)), key=lambda j: (means[j], j))
    return hi, lo, means[hi], means[lo]


def mixing_weight(target: float, high: float, low: float) -> float:
    """lambda with lambda high + (1 - lambda) low = target."""
    if high == low:
        return 1.0
    return min(1.0, max(0.0, (target - low) / (high - low)))


# cluster set -------------------------------------------------------------------

@dataclass
class ExperimentReport:
    """Summary values of a simulation experiment plus its per-checkpoint rows."""

    name: str
    passed: bool
    summary: Dict[str, Any]
    rows: List[dict] = field(default_factory=list)
    asserted: bool = True

    @property
    def ok(self) -> bool:
        return self.passed or not self.asserted

    def summary_rows(self) -> List[dict]:
        flag = "pass" if self.passed else ("fail" if self.asserted else "reported")
        return [{"quantity": k, "parameter": self.name, "value": v, "flag": flag}
                for k, v in self.summary.items()]


def cluster_schedule(n: int, a: float, b: float, growth: float, high: int, low: int,
                     high_mean: float, low_mean: float) -> EpochSchedule:
    """Epochs of length ceil(g^(e(e-1)/2)) alternately aimed at a and b."""
    epochs, total, e = [], 0, 1
    while total < n:
        length = int(math.ceil(growth ** (e * (e - 1) / 2)))
        target = a if e % 2 == 1 else b
        lam = mixing_weight(target, high_mean, low_mean)
        weights = {high: lam, low: 1.0 - lam} if high != low else {high: 1.0}
        epochs.append(Epoch.mixed(length, weights))
        total += length
        e += 1
    return EpochSchedule(epochs, repeat=False, name=f"cluster[{a:g},{b:g}]")


def cluster_set_experiment(model: SequenceModel, a: float, b: float, epoch_growth: float = 2.0,
                           n: int = 10 ** 6, seed: int = 0, min_epoch: int = 1000,
                           burn_in: int = 100, epsilon: Optional[float] = None,
                           resolution: Optional[float] = None) -> ExperimentReport:
    """Steer the running mean between a and b and measure how much of [a, b] it visits.

    limsup is the largest running mean over the last 10% of every b-epoch at
    least ``min_epoch`` long, liminf the smallest over the a-epochs; coverage is
    the fraction of a ``resolution``-spaced grid on [a, b] within ``resolution``
    of some running mean after ``burn_in``.
    """
    epsilon = config.EPSILON if epsilon is None else epsilon
    resolution = config.COVERAGE_RESOLUTION if resolution is None else resolution
    if a > b:
        raise TargetOrderError(f"a = {a!r} exceeds b = {b!r}")
    high, low, high_mean, low_mean = extreme_laws(model)
    bracket = coordinate_bracket(model) if model.exact_capable else (low_mean, high_mean)
    if a < bracket[0] - BRACKET_TOL or b > bracket[1] + BRACKET_TOL:
        raise TargetOutOfBracket(f"[{a:g}, {b:g}] is not inside [{bracket[0]:g}, {bracket[1]:g}]")

    schedule = cluster_schedule(n + model.m, a, b, epoch_growth, high, low, high_mean, low_mean)
    means = PathSimulator(model, schedule, seed).running_means(0, n)

    ends = np.minimum(schedule.ends, n)
    starts = np.concatenate([[0], ends[:-1]])
    epochs = []
    for e, (s, t) in enumerate(zip(starts, ends), start=1):
        if t <= s:
            break
        window = means[int(t - max(1, (t - s) // 10)):int(t)]
        epochs.append((e % 2 == 0, int(t - s), float(window.max() if e % 2 == 0 else window.min())))

    def extremes(aimed_at_b: bool) -> List[float]:
        mine = [(length, x) for at_b, length, x in epochs if at_b == aimed_at_b]
        return [x for length, x in mine if length >= min_epoch] or [x for _, x in mine]

    tops = extremes(True) or [float(means[burn_in:].max())]
    bottoms = extremes(False) or [float(means[burn_in:].min())]
    limsup, liminf = max(tops), min(bottoms)

    visited = np.sort(means[min(burn_in, n - 1):])
    grid = np.arange(a, b + resolution / 2, resolution) if b > a else np.array([a])
    pos = np.searchsorted(visited, grid)
    above = visited[np.minimum(pos, len(visited) - 1)]
    below = visited[np.maximum(pos - 1, 0)]
    nearest = np.minimum(np.abs(above - grid), np.abs(below - grid))
    coverage = float(np.mean(nearest <= resolution))

    passed = limsup >= b - epsilon and liminf <= a + epsilon and coverage >= 0.9
    if a == b:
        passed = abs(float(means[-1]) - a) <= resolution
    checkpoints = geometric_checkpoints(n, 10, 10.0)
    rows = [{"experiment": "cluster", "strategy": schedule.name, "n": k, "statistic": "running_mean",
             "value": float(means[k - 1]), "pass_flag": passed} for k in checkpoints]
    rows += [{"experiment": "cluster", "strategy": schedule.name, "n": int(t), "statistic": "epoch_end_mean",
              "value": float(means[int(t) - 1]), "pass_flag": passed} for t in ends if t > 0]
    logger.info("cluster set: limsup %.4f liminf %.4f coverage %.3f", limsup, liminf, coverage)
    return ExperimentReport(
        "cluster", passed,
        {"limsup": limsup, "liminf": liminf, "coverage": coverage, "final_mean": float(means[-1]),
         "epochs": int(np.count_nonzero(ends > starts)), "lambda_a": mixing_weight(a, high_mean, low_mean),
         "lambda_b": mixing_weight(b, high_mean, low_mean)},
        rows,
    )


# divergence --------------------------------------------------------------------

def divergence_experiment(model: SequenceModel, n: int = 10 ** 6, n_paths: int = 100, seed: int = 0,
                          first_checkpoint: int = 1000, law_index: Optional[int] = None,
                          growth_fraction: Optional[float] = None) -> ExperimentReport:
    """Constant strategy on a heavy-tailed law; does max |S_k|/k keep growing?

    The verdict statistic is max over first_checkpoint <= k <= n of |S_k|/k. A
    path grows when the statistic at n exceeds its value at the first
    checkpoint. Divergence needs ``growth_fraction`` (``SLLN_DIVERGENCE_RATIO``)
    of the paths to grow and the Choquet diagnostics of |X_1| under that law to
    diverge. The unrestarted running sup max over k <= n is reported alongside.
    """
    growth_fraction = config.DIVERGENCE_RATIO if growth_fraction is None else growth_fraction
    if law_index is None:
        heavy = model.driver.heavy_tail_indices()
        if not heavy:
            raise NoHeavyTailLaw(f"{model.label} has no law without a finite mean")
        law_index = heavy[0]
    strategy = ConstantStrategy(law_index)
    checkpoints = geometric_checkpoints(n, first_checkpoint, 10.0)
    simulator = PathSimulator(model, strategy, seed)
    workers = config.get_threads()

    def path_stat(i: int) -> List[List[float]]:
        means = np.abs(simulator.running_means(i, n))
        running_sup = np.maximum.accumulate(means)
        # restarted at the first checkpoint
        tail = np.maximum.accumulate(means[first_checkpoint - 1:])
        return [[float(tail[c - first_checkpoint]) for c in checkpoints],
                [float(running_sup[c - 1]) for c in checkpoints]]

    if workers > 1 and n_paths > 1:
        with ThreadPoolExecutor(max_workers=min(workers, n_paths)) as pool:
            stats = np.array(list(pool.map(path_stat, range(n_paths))))
    else:
        stats = np.array([path_stat(i) for i in range(n_paths)])
    table, full = stats[:, 0, :], stats[:, 1, :]

    growing = float(np.mean(table[:, -1] > table[:, 0]))
    full_growing = float(np.mean(full[:, -1] > full[:, 0]))
    law_model = SequenceModel(ModelKind.IID, (AmbiguitySet((model.driver.laws[law_index],)),))
    diagnostics = choquet_finiteness_diagnostics(law_model)
    divergent = growing >= growth_fraction and diagnostics.diverging
    medians = np.median(table, axis=0)
    full_medians = np.median(full, axis=0)
    rows = [{"experiment": "divergence", "strategy": strategy.name, "n": c, "statistic": "median_sup_abs_mean",
             "value": float(v), "pass_flag": divergent} for c, v in zip(checkpoints, medians)]
    rows += [{"experiment": "divergence", "strategy": strategy.name, "n": c, "statistic": "median_running_sup",
              "value": float(v), "pass_flag": divergent} for c, v in zip(checkpoints, full_medians)]
    logger.info("divergence: %.0f%% of paths growing (%.0f%% by the unrestarted sup), diagnostics %s",
                100 * growing, 100 * full_growing, "diverging" if diagnostics.diverging else "summable")
    return ExperimentReport(
        "divergence", divergent,
        {"growing_fraction": growing, "choquet_diverging": diagnostics.diverging,
         "median_first": float(medians[0]), "median_last": float(medians[-1]),
         "running_sup_growing_fraction": full_growing,
         "median_running_sup_first": float(full_medians[0]),
         "median_running_sup_last": float(full_medians[-1]), "law": law_index},
        rows,
    )


# theorem 1 ---------------------------------------------------------------------

def _weights(a: Weights, n: int) -> np.ndarray:
    if callable(a):
        return np.asarray(a(np.arange(1, n + 1, dtype=float)), dtype=float)
    values = np.asarray(a, dtype=float)
    if len(values) < n:
        raise HorizonTooSmall(f"need {n} weights, got {len(values)}")
    return values[:n]


def default_strategy_battery(model: SequenceModel) -> List[AdversaryStrategy]:
    """Constant on every law, a periodic hi/lo switch and a uniformly random law per step."""
    k = min(d.size for d in model.drivers)
    battery: List[AdversaryStrategy] = [ConstantStrategy(j) for j in range(k)]
    if k > 1:
        battery.append(EpochSchedule.from_pairs([(50, 0), (50, k - 1)], name="periodic[50]"))
        battery.append(EpochSchedule([Epoch.mixed(1, {j: 1.0 for j in range(k)})], name="random"))
    return battery


def theorem1_experiment(model: SequenceModel, a: Weights, n: int, seed: int,
                        strategies: Optional[Sequence[AdversaryStrategy]] = None,
                        epsilon: Optional[float] = None, n0: Optional[int] = None) -> ExperimentReport:
    """(S_n - E[S_n])/a_n and (S_n - e[S_n])/a_n along a strategy battery.

    Raises:
        WeightConditionFails: sum E[X_i^2]/a_i^2 does not look summable.
    """
    if not _independent(model):
        raise WeightConditionFails("the weighted strong law is stated for independent sequences")
    epsilon = config.EPSILON if epsilon is None else epsilon
    weights = _weights(a, n)
    second = np.resize([d.upper_second_moment for d in model.drivers], n)
    check = weight_sequence_check(second.tolist(), weights.tolist())
    if not check.summable:
        raise WeightConditionFails("sum E[X_i^2]/a_i^2 does not look summable over the horizon")
    upper = np.cumsum(np.resize([d.upper_mean for d in model.drivers], n))
    lower = np.cumsum(np.resize([d.lower_mean for d in model.drivers], n))

    n0 = n0 or max(1, n // 1000)
    checkpoints = [c for c in geometric_checkpoints(n, 10, 10.0) if c >= n0] or [n]
    strategies = list(strategies) if strategies is not None else default_strategy_battery(model)
    rows, passed = [], True
    worst_upper, worst_lower = -math.inf, math.inf
    for strategy in strategies:
        stats = simulate_paths(model, strategy, n, 1, checkpoints, seed, threads=1)[0]
        idx = np.asarray(stats.checkpoints) - 1
        sums = np.asarray(stats.sums)
        u = (sums - upper[idx]) / weights[idx]
        lo = (sums - lower[idx]) / weights[idx]
        ok = bool(u[-1] <= epsilon and lo[-1] >= -epsilon)
        passed &= ok
        worst_upper, worst_lower = max(worst_upper, float(u.max())), min(worst_lower, float(lo.min()))
        for c, uv, lv in zip(stats.checkpoints, u, lo):
            rows.append({"experiment": "theorem1", "strategy": strategy.name, "n": c,
                         "statistic": "upper_centered", "value": float(uv), "pass_flag": ok})
            rows.append({"experiment": "theorem1", "strategy": strategy.name, "n": c,
                         "statistic": "lower_centered", "value": float(lv), "pass_flag": ok})
    return ExperimentReport(
        "theorem1", passed,
        {"max_upper_centered": worst_upper, "min_lower_centered": worst_lower,
         "weight_sum": check.partial_sums[-1], "strategies": len(strategies)},
        rows,
    )


# mu tracking -------------------------------------------------------------------

def mu_tracking_experiment(model: SequenceModel, mus: Union[Sequence[float], Callable[[np.ndarray], np.ndarray]],
                           n: int, seed: int, epsilon: Optional[float] = None) -> ExperimentReport:
    """Follow a target sequence mu_j in [mu, mu_bar]: is |S_n - sum mu_j|/n small?"""
    epsilon = config.EPSILON if epsilon is None else epsilon
    T = n + model.m
    targets = _weights(mus, n)
    high, low, high_mean, low_mean = extreme_laws(model)
    band = (min(low_mean, high_mean), max(low_mean, high_mean))
    if np.any(targets < band[0] - BRACKET_TOL) or np.any(targets > band[1] + BRACKET_TOL):
        raise MuOutOfBand(f"targets must stay inside [{band[0]:g}, {band[1]:g}]")
    if high_mean == low_mean:
        lambdas = np.ones(n)
    else:
        lambdas = np.clip((targets - low_mean) / (high_mean - low_mean), 0.0, 1.0)
    lambdas = np.concatenate([lambdas, np.full(T - n, lambdas[-1])])
    schedule = TrackingSchedule(high, low, lambda steps: lambdas[np.minimum(steps, T - 1)])
    checkpoints = geometric_checkpoints(n, 10, 10.0)
    stats = simulate_paths(model, schedule, n, 1, checkpoints, seed, threads=1)[0]
    target_sums = np.cumsum(targets)
    gaps = [abs(s - target_sums[c - 1]) / c for c, s in zip(stats.checkpoints, stats.sums)]
    passed = gaps[-1] <= epsilon
    rows = [{"experiment": "mu-tracking", "strategy": schedule.name, "n": c, "statistic": "tracking_gap",
             "value": g, "pass_flag": passed} for c, g in zip(stats.checkpoints, gaps)]
    return ExperimentReport("mu-tracking", passed, {"final_gap": gaps[-1]}, rows)
