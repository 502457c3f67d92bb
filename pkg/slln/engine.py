"""Exact sub-linear expectations by backward induction, and the checks built on them.

The upper expectation of a payoff of Peng-independent drivers is evaluated
coordinate by coordinate, last coordinate innermost:

    v_{T+1}(x_1..x_T) = phi(observables)
    v_t(x_1..x_{t-1}) = max_j E_{Q_j}[v_{t+1}(x_1..x_{t-1}, .)]

Payoffs that carry a running statistic go through :class:`~slln.lattice.LatticeDP`;
everything else uses the full payoff tensor. The oracle enumerates every
adaptive strategy instead and is what the DP is checked against.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .config import config
from .errors import (
    HorizonMismatch,
    InvalidStrategy,
    ModelError,
    StateSpaceCap,
    StrategySpaceTooLarge,
)
from .functionals import Functional, constant, coordinate, partial_sum
from .lattice import LatticeDP, NotLattice
from .models import ExpectationPair, ModelKind, SequenceModel
from .reports import CheckReport
from .strategies import AdversaryStrategy

logger = logging.getLogger(__name__)

AUTO = "auto"
FULL = "full"
LATTICE = "lattice"


# full-history tables -----------------------------------------------------------

def driver_grid(model: SequenceModel, T: int) -> Tuple[Tuple[int, ...], np.ndarray]:
    """Shape of the driver tensor and every driver tuple as a row (row-major order)."""
    supports = model.supports(T)
    shape = tuple(len(s) for s in supports)
    cells = math.prod(shape)
    cap = config.get_dp_cell_cap()
    if cells > cap:
        raise StateSpaceCap(f"{cells} driver tuples over {T} coordinates exceed the cap of {cap}")
    if T == 0:
        return shape, np.empty((1, 0))
    index = np.indices(shape).reshape(T, -1)
    rows = np.column_stack([np.asarray(supports[t], dtype=float)[index[t]] for t in range(T)])
    return shape, rows


def payoff_table(model: SequenceModel, phi: Functional) -> np.ndarray:
    """phi evaluated on every driver tuple, as a tensor with one axis per driver coordinate."""
    T = model.driver_horizon(phi.horizon)
    shape, rows = driver_grid(model, T)
    values = phi.evaluate_many(model.observe_array(rows))
    if not np.all(np.isfinite(values)):
        raise ModelError(f"{phi.name} is not finite on every support tuple")
    return values.reshape(shape)


def backward_induction(model: SequenceModel, table: np.ndarray) -> Tuple[float, int]:
    """Value of a payoff tensor and the law chosen at the first coordinate."""
    v = np.asarray(table, dtype=float)
    choice = 0
    for t in range(v.ndim, 0, -1):
        q = v @ model.driver_at(t).prob_matrix.T
        if t == 1:
            choice = int(np.argmax(q))
        v = q.max(axis=-1)
    return float(v), choice


def _check_horizon(phi: Functional, n: Optional[int]):
    if n is not None and n != phi.horizon:
        raise HorizonMismatch(f"functional {phi.name} has horizon {phi.horizon}, model horizon is {n}")


def upper_expectation(model: SequenceModel, phi: Functional, n: Optional[int] = None,
                      method: str = AUTO) -> float:
    """Upper expectation of ``phi`` under the model.

    Raises:
        NotExactCapable: the drivers are not finite laws on a common support.
        HorizonMismatch: ``n`` is given and differs from the payoff's horizon.
        StateSpaceCap: neither DP fits its state budget.
    """
    model.require_exact()
    _check_horizon(phi, n)
    if phi.statistic is not None and method in (AUTO, LATTICE):
        try:
            return LatticeDP(model, phi.statistic, phi.horizon).value()
        except NotLattice as e:
            if method == LATTICE:
                raise
            logger.info("falling back to full-history DP for %s: %s", phi.name, e)
    return backward_induction(model, payoff_table(model, phi))[0]


def lower_expectation(model: SequenceModel, phi: Functional, n: Optional[int] = None,
                      method: str = AUTO) -> float:
    return -upper_expectation(model, -phi, n, method)


def expectation_pair(model: SequenceModel, phi: Functional, n: Optional[int] = None) -> ExpectationPair:
    return ExpectationPair(upper_expectation(model, phi, n), lower_expectation(model, phi, n))


# oracle ------------------------------------------------------------------------

def _prefix_counts(model: SequenceModel, T: int) -> Tuple[List[int], List[int]]:
    supports = model.supports(T)
    prefixes, count = [], 1
    for t in range(T):
        prefixes.append(count)
        count *= len(supports[t])
    laws = [model.driver_at(t + 1).size for t in range(T)]
    return prefixes, laws


def strategy_count(model: SequenceModel, n: int) -> int:
    """Number of adaptive strategies over ``n`` observables (one law per driver prefix)."""
    prefixes, laws = _prefix_counts(model, model.driver_horizon(n))
    return math.prod(k ** p for k, p in zip(laws, prefixes))


def oracle_search(model: SequenceModel, phi: Functional, cap: Optional[int] = None) -> Tuple[float, int]:
    """Best value over all adaptive strategies and the index of the first best strategy.

    A strategy is a mixed-radix number with one digit per driver prefix, prefixes
    ordered by depth and then lexicographically.
    """
    model.require_exact()
    cap = cap or config.get_oracle_strategy_cap()
    total = strategy_count(model, phi.horizon)
    if total > cap:
        raise StrategySpaceTooLarge(f"{total} adaptive strategies exceed the oracle cap of {cap}")

    T = model.driver_horizon(phi.horizon)
    f = payoff_table(model, phi).ravel()
    shape = tuple(len(s) for s in model.supports(T))
    prefixes, laws = _prefix_counts(model, T)
    radix = np.concatenate([np.full(p, k, dtype=np.int64) for p, k in zip(prefixes, laws)])
    place = np.concatenate([[1], np.cumprod(radix)[:-1]]).astype(np.int64)

    cells = f.size
    cell = np.arange(cells, dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(prefixes)]).astype(np.int64)
    tails = [math.prod(shape[t:]) for t in range(T + 1)]
    prefix_ids = [offsets[t] + cell // tails[t] for t in range(T)]
    digits_at = [(cell // tails[t + 1]) % shape[t] for t in range(T)]
    matrices = [model.driver_at(t + 1).prob_matrix for t in range(T)]

    batch = max(1, min(config.ORACLE_BATCH, 4_000_000 // max(cells, 1)))
    best, best_index = -math.inf, 0
    for start in range(0, total, batch):
        idx = np.arange(start, min(total, start + batch), dtype=np.int64)
        digits = (idx[:, None] // place[None, :]) % radix[None, :]
        weights = np.ones((len(idx), cells))
        for t in range(T):
            weights *= matrices[t][digits[:, prefix_ids[t]], digits_at[t][None, :]]
        values = weights @ f
        j = int(np.argmax(values))
        if values[j] > best:
            best, best_index = float(values[j]), start + j
    logger.debug("oracle: %d strategies, best %r at %d", total, best, best_index)
    return best, best_index


def oracle_upper_expectation(model: SequenceModel, phi: Functional, cap: Optional[int] = None) -> float:
    """Maximum of P[phi] over every adaptive strategy, by enumeration."""
    return oracle_search(model, phi, cap)[0]


def tree_upper_expectation(model: SequenceModel, phi: Functional) -> float:
    """Nested evaluation written as a literal recursion over driver prefixes.

    Used where the oracle's strategy space is out of reach; it shares no code
    with the tensor or lattice DPs.
    """
    model.require_exact()
    T = model.driver_horizon(phi.horizon)
    supports = model.supports(T)

    def node(prefix: Tuple[float, ...]) -> float:
        t = len(prefix)
        if t == T:
            return phi(model.observables(prefix))
        children = [node(prefix + (x,)) for x in supports[t]]
        best = -math.inf
        for law in model.driver_at(t + 1).laws:
            best = max(best, math.fsum(p * v for p, v in zip(law.finite.probs, children)))
        return best

    return node(())


# checks ------------------------------------------------------------------------

def _scale(*values: float) -> float:
    return max(1.0, *(abs(v) for v in values))


def check_sublinear_axioms(model: SequenceModel, test_phis: Sequence[Functional],
                           pairs: Optional[int] = None, seed: int = 0,
                           tol: Optional[float] = None) -> CheckReport:
    """Monotonicity, constants, sub-additivity, homogeneity and translation on the given payoffs."""
    model.require_exact()
    tol = config.AXIOM_TOL if tol is None else tol
    report = CheckReport("sublinear-axioms")
    if not test_phis:
        return report
    n = test_phis[0].horizon
    for phi in test_phis:
        _check_horizon(phi, n)

    tables = [payoff_table(model, phi) for phi in test_phis]
    shape = tables[0].shape
    E = lambda table: backward_induction(model, table)[0]  # noqa: E731
    values = [E(t) for t in tables]
    rng = np.random.default_rng(seed)

    for c in (-2.5, 0.0, 5.0):
        report.expect_close("constant", E(np.full(shape, c)), c, tol, witness=f"c={c:g}")

    for phi, table, value in zip(test_phis, tables, values):
        lam = float(rng.uniform(0.1, 3.0))
        report.expect_close("homogeneity", E(lam * table), lam * value, tol * _scale(value, lam),
                            witness=f"{lam:g}*{phi.name}")
        c = float(rng.uniform(-2.0, 2.0))
        report.expect_close("translation", E(table + c), value + c, tol * _scale(value, c),
                            witness=f"{phi.name}+{c:g}")

    count = pairs if pairs is not None else len(test_phis)
    for _ in range(count):
        i, j = (int(k) for k in rng.integers(0, len(test_phis), size=2))
        a, b = tables[i], tables[j]
        ea, eb = values[i], values[j]
        label = f"({test_phis[i].name}, {test_phis[j].name})"
        slack = tol * _scale(ea, eb)
        report.expect_at_most("sub-additivity", E(a + b), ea + eb + slack, witness=label)
        report.expect_at_most("difference", ea - eb - slack, E(a - b), witness=label)
        if np.all(a <= b):
            report.expect_at_most("monotonicity", ea, eb + slack, witness=label)
        report.expect_at_most("monotonicity", ea, E(np.maximum(a, b)) + slack, witness=f"max{label}")
    return report


def _marginal_sum(model: SequenceModel, n: int, upper: bool) -> float:
    total = 0.0
    for i in range(1, n + 1):
        phi = coordinate(n, i)
        total += upper_expectation(model, phi) if upper else lower_expectation(model, phi)
    return total


def check_independent_bounded_additivity(model: SequenceModel, n: int,
                                         tol: Optional[float] = None) -> CheckReport:
    """E[S_n] equals the sum of the marginal upper expectations (same for the lower side)."""
    if model.kind is ModelKind.MOVING_WINDOW:
        raise ModelError("bounded additivity needs independent coordinates")
    tol = config.EXACT_TOL if tol is None else tol
    report = CheckReport("bounded-additivity")
    s = partial_sum(n)
    upper, lower = upper_expectation(model, s), lower_expectation(model, s)
    report.expect_close("upper", upper, _marginal_sum(model, n, True), tol, witness=f"S{n}")
    report.expect_close("lower", lower, _marginal_sum(model, n, False), tol, witness=f"S{n}")
    report.details.update(upper=upper, lower=lower)
    return report


def check_identity_in_distribution(model_a: SequenceModel, model_b: SequenceModel, p: int, n: int,
                                   test_phis: Sequence[Functional],
                                   tol: Optional[float] = None) -> CheckReport:
    """E_A[phi(X_1..X_n)] against E_B[phi(X_{1+p}..X_{n+p})] for every test payoff."""
    tol = config.EXACT_TOL if tol is None else tol
    report = CheckReport("identical-distribution")
    for phi in test_phis:
        _check_horizon(phi, n)
        left = upper_expectation(model_a, phi)
        right = upper_expectation(model_b, phi.extended(n + p, offset=p))
        report.expect_close("shift", left, right, tol, witness=phi.name)
    return report


def two_block_functional(phi: Callable[[Tuple[float, ...], Tuple[float, ...]], float],
                         n: int, lo: int, hi: int, name: str = "phi") -> Functional:
    """phi(x_1..x_n, x_lo..x_hi) as a payoff over ``hi`` observables."""
    return Functional(hi, lambda x: phi(tuple(x[:n]), tuple(x[lo - 1:hi])), name=name)


def check_m_dependence(model: SequenceModel, n: int, j: int,
                       test_phis: Sequence[Callable[[Tuple[float, ...], Tuple[float, ...]], float]],
                       gap: Optional[int] = None, method: str = AUTO,
                       tol: Optional[float] = None) -> CheckReport:
    """Block independence across a gap: E[phi(X, Y)] against E[psi(X)], psi(x) = E[phi(x, Y)].

    X is (X_1..X_n) and Y is (X_{n+gap+1}..X_{n+j}), gap defaulting to m. Both
    sides are evaluated without the DP: by strategy enumeration, or by the
    literal recursion when enumeration is over its cap. A gap below m is
    reported as an expected failure.
    """
    model.require_exact()
    m = model.m
    gap = m if gap is None else gap
    if j < gap + 1:
        raise ModelError(f"need j >= gap + 1 (j={j}, gap={gap})")
    tol = config.EXACT_TOL if tol is None else tol
    expected_failure = gap < m
    report = CheckReport("m-dependence", expected_failure=expected_failure)
    lo, hi = n + gap + 1, n + j

    def evaluate(phi: Functional) -> float:
        if method in (AUTO, "oracle"):
            try:
                report.details["method"] = report.details.get("method", "oracle")
                return oracle_upper_expectation(model, phi)
            except StrategySpaceTooLarge:
                if method == "oracle":
                    raise
        report.details["method"] = "tree"
        return tree_upper_expectation(model, phi)

    for k, phi in enumerate(test_phis):
        name = getattr(phi, "__name__", f"phi{k}")
        joint = evaluate(two_block_functional(phi, n, lo, hi, name))

        def psi(x, phi=phi):
            inner = Functional(hi, lambda z: phi(tuple(x), tuple(z[lo - 1:hi])))
            return evaluate(inner)

        nested = evaluate(Functional(n, psi, name=f"psi({name})"))
        report.expect_close("nested", joint, nested, tol, witness=name)
    report.details.update(n=n, j=j, gap=gap, m=m)
    return report


# strategy measures --------------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    """A strategy-measure expectation (exact, or Monte Carlo with standard error)."""
    value: float
    stderr: float = 0.0
    mode: str = "exact"
    n_paths: int = 0


def strategy_measure_expectation(model: SequenceModel, strategy: AdversaryStrategy, phi: Functional,
                                 mode: str = "exact", n_paths: int = 10_000, seed: int = 0) -> Estimate:
    """P[phi] for the classical measure the strategy induces.

    Exact mode enumerates driver tuples forward, weighting each step by the
    strategy's law choice; MC mode simulates ``n_paths`` independent paths.
    """
    T = model.driver_horizon(phi.horizon)
    if mode == "mc":
        from .simulation import simulate_driver_paths

        drivers = simulate_driver_paths(model, strategy, T, n_paths, seed)
        values = phi.evaluate_many(model.observe_array(drivers))
        stderr = float(values.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else math.inf
        return Estimate(float(values.mean()), stderr, "mc", n_paths)
    if mode != "exact":
        raise ModelError(f"unknown mode {mode!r}")

    supports = model.supports(T)
    cap = config.get_dp_cell_cap()
    if math.prod(len(s) for s in supports) > cap:
        raise StrategySpaceTooLarge(f"exact strategy evaluation over {T} coordinates exceeds the cap of {cap}")
    prefixes: List[Tuple[Tuple[float, ...], float]] = [((), 1.0)]
    for t in range(T):
        aset = model.driver_at(t + 1)
        probs_matrix = aset.prob_matrix
        grown = []
        for history, weight in prefixes:
            choice = strategy.step_weights(history, aset.size)
            if choice.shape != (aset.size,) or np.any(choice < 0):
                raise InvalidStrategy(f"{strategy.name} returned bad law weights at step {t}")
            for x, q in zip(supports[t], choice @ probs_matrix):
                if q > 0:
                    grown.append((history + (x,), weight * q))
        prefixes = grown
    drivers = np.array([h for h, _ in prefixes], dtype=float).reshape(len(prefixes), T)
    weights = np.array([w for _, w in prefixes])
    values = phi.evaluate_many(model.observe_array(drivers))
    return Estimate(float(weights @ values))


def default_test_functionals(n: int) -> List[Functional]:
    """Small bounded payoffs used by the axiom and distribution checks."""
    phis = [constant(n, 1.0), coordinate(n, 1), partial_sum(n).map(math.sin, "sin(S)", np.sin)]
    if n >= 2:
        phis.append(Functional(n, lambda x: (x[0] - x[1]) ** 2, name="(X1-X2)^2",
                               batch=lambda r: (r[:, 0] - r[:, 1]) ** 2))
        phis.append(Functional(n, lambda x: -((x[0] - x[1]) ** 2), name="-(X1-X2)^2",
                               batch=lambda r: -((r[:, 0] - r[:, 1]) ** 2)))
    phis.append(Functional(n, lambda x: float(max(x) > min(x)), name="1{not constant}",
                           batch=lambda r: (r.max(axis=1) > r.min(axis=1)).astype(float)))
    return phis
