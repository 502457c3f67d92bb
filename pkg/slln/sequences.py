"""Sequence constructors and the blocking machinery of the m-dependent strong law.

Indices are 1-based throughout, as in the block notation: block n covers
observables a_{n-1}+1 .. a_n, its Z-part stops m short of the end and the
last m indices form the W-part.
"""

import logging
import math
from dataclasses import dataclass
from itertools import product
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .capacity import decaying, octave_increments
from .config import config
from .engine import upper_expectation
from .errors import (
    BoundViolated,
    HorizonExhausted,
    HorizonTooSmall,
    IndexOutOfScheme,
    InvariantViolation,
    ModelError,
    NotMonotone,
    TailNotSummable,
)
from .functionals import Functional, absolute, block_sum, power
from .measures import AmbiguitySet
from .models import IDENTITY, MEAN_WINDOW, ModelKind, SequenceModel, WindowFunction, resolve_window
from .reports import CheckReport

logger = logging.getLogger(__name__)


# models ------------------------------------------------------------------------

def make_iid_model(driver: AmbiguitySet) -> SequenceModel:
    return SequenceModel(ModelKind.IID, (driver,))


def make_moving_window_model(m: int, driver: AmbiguitySet,
                             window_fn: Union[WindowFunction, str] = MEAN_WINDOW) -> SequenceModel:
    """X_i = g(e_i, ..., e_{i+m}) over i.i.d. drivers e."""
    if isinstance(window_fn, str):
        window_fn = resolve_window(window_fn)
    if driver.exact_capable:
        for window in product(driver.support, repeat=m + 1):
            try:
                value = window_fn(window)
            except Exception as e:
                raise ModelError(f"{window_fn.label} fails on {window}: {e}") from e
            if not math.isfinite(value):
                raise ModelError(f"{window_fn.label} is not finite on {window}")
    return SequenceModel(ModelKind.MOVING_WINDOW, (driver,), m=m, window=window_fn)


def make_independent_model(drivers: Sequence[AmbiguitySet]) -> SequenceModel:
    """Independent, not identically distributed: X_i uses drivers[(i - 1) % len]."""
    return SequenceModel(ModelKind.INDEPENDENT, tuple(drivers))


def as_moving_window(model: SequenceModel) -> SequenceModel:
    """An i.i.d. model written as a moving window with m = 0."""
    if model.kind is not ModelKind.IID:
        raise ModelError("only i.i.d. models have a moving-window form")
    return SequenceModel(ModelKind.MOVING_WINDOW, model.drivers, m=0, window=IDENTITY)


# weights -----------------------------------------------------------------------

@dataclass(frozen=True)
class WeightReport:
    terms: Tuple[float, ...]
    partial_sums: Tuple[float, ...]
    octave_increments: Tuple[float, ...]
    cauchy_flag: bool

    @property
    def summable(self) -> bool:
        return self.cauchy_flag

    def rows(self) -> List[dict]:
        flag = "summable" if self.cauchy_flag else "diverging"
        return [{"quantity": "weighted_second_moments", "parameter": f"N={2 ** k}",
                 "value": self.partial_sums[2 ** k - 1], "flag": flag}
                for k in range(int(math.log2(len(self.partial_sums))) + 1)] if self.partial_sums else []


def check_nondecreasing(a: Sequence[float], name: str = "a"):
    for i, (x, y) in enumerate(zip(a, a[1:]), start=1):
        if y < x:
            raise NotMonotone(f"{name} decreases at index {i + 1}: {y!r} < {x!r}")


def is_nonincreasing(values: Sequence[float], tol: float = 1e-12) -> bool:
    return all(y <= x + tol for x, y in zip(values, values[1:]))


def weight_sequence_check(second_moments: Sequence[float], a: Sequence[float],
                          ratio: Optional[float] = None) -> WeightReport:
    """Partial sums of E[X_i^2]/a_i^2 and whether their octave increments decay."""
    if len(second_moments) != len(a):
        raise ModelError("second moments and weights differ in length")
    if not a:
        raise ModelError("empty weight sequence")
    check_nondecreasing(a)
    if a[0] < 1:
        raise NotMonotone(f"weights must start at 1 or above, got {a[0]!r}")
    terms = [s / (w * w) for s, w in zip(second_moments, a)]
    sums = np.cumsum(terms).tolist()
    increments = octave_increments(sums)
    ratio = config.DECAY_RATIO if ratio is None else ratio
    return WeightReport(tuple(terms), tuple(sums), tuple(increments), decaying(increments, ratio))


def build_weights_M(s: Sequence[float]) -> List[float]:
    """Weights M_i increasing to infinity with sum M_i s_i still finite.

    M_i = r_i^(-1/2) with r_i the tail sum from i, clipped to be nondecreasing
    and at least 1; then s_i M_i <= 2 (sqrt(r_i) - sqrt(r_{i+1})).
    """
    if any(not math.isfinite(v) or v < 0 for v in s):
        raise TailNotSummable("terms must be finite and nonnegative")
    tails = np.cumsum(np.asarray(s, dtype=float)[::-1])[::-1]
    if len(s) >= 4 and not decaying(octave_increments(np.cumsum(s).tolist()), config.DECAY_RATIO):
        raise TailNotSummable("series does not look summable over the given horizon")
    weights, current = [], 1.0
    for r in tails:
        if r > 0:
            current = max(current, r ** -0.5)
        weights.append(current)
    return weights


# blocking ----------------------------------------------------------------------

@dataclass(frozen=True)
class BlockingScheme:
    """Block endpoints a (a[0] = 0), lengths l and the weights M used to size them."""

    m: int
    a: Tuple[int, ...]
    l: Tuple[int, ...]
    M: Tuple[float, ...]

    @property
    def blocks(self) -> int:
        return len(self.l)

    def block(self, n: int) -> Tuple[int, int]:
        self._require(n)
        return self.a[n - 1] + 1, self.a[n]

    def z_window(self, n: int) -> Tuple[int, int]:
        """Indices of Z_n (a_{n-1}+1 .. a_n - m)."""
        lo, hi = self.block(n)
        return lo, hi - self.m

    def w_window(self, n: int) -> Tuple[int, int]:
        """Indices of W_n (a_n - m + 1 .. a_n); empty when m = 0."""
        _, hi = self.block(n)
        return hi - self.m + 1, hi

    def bound(self, n: int) -> float:
        """min(M_{a_{n-1}+1}^(1/4), n^(1/4))."""
        return min(self.M[self.a[n - 1]] ** 0.25, n ** 0.25)

    def forced(self, n: int) -> bool:
        """Block n is longer than its size bound allows because of the m + 1 floor."""
        return math.floor(self.bound(n)) < self.m + 1

    def _require(self, n: int):
        if not 1 <= n <= self.blocks:
            raise IndexOutOfScheme(f"block {n} outside 1..{self.blocks}")

    def check_invariants(self):
        """Raise InvariantViolation unless every block invariant holds."""
        if self.a[0] != 0:
            raise InvariantViolation("a_0 must be 0")
        for n in range(1, self.blocks + 1):
            if self.a[n] - self.a[n - 1] != self.l[n - 1]:
                raise InvariantViolation(f"a_{n} - a_{n - 1} != l_{n}")
            if self.l[n - 1] < self.m + 1:
                raise InvariantViolation(f"l_{n} = {self.l[n - 1]} < m + 1")
            if n > 1 and self.l[n - 1] < self.l[n - 2]:
                raise InvariantViolation(f"l decreases at block {n}")
            if not self.forced(n) and self.l[n - 1] > self.bound(n) + 1e-12:
                raise InvariantViolation(f"l_{n} = {self.l[n - 1]} exceeds its bound {self.bound(n):.6g}")

    def rows(self) -> List[dict]:
        return [{"n": n, "a_n": self.a[n], "l_n": self.l[n - 1], "M": self.M[self.a[n - 1]]}
                for n in range(1, self.blocks + 1)]


def blocking_scheme(m: int, M: Sequence[float], N: int) -> BlockingScheme:
    """Greedy block lengths l_n = max(m+1, l_{n-1}, floor(min(M_{a_{n-1}+1}^(1/4), n^(1/4)))) covering 1..N."""
    if m < 0:
        raise ModelError("m must be nonnegative")
    if N < m + 1:
        raise HorizonTooSmall(f"horizon {N} cannot hold one block of length {m + 1}")
    if len(M) < N:
        raise HorizonTooSmall(f"need {N} weights, got {len(M)}")
    check_nondecreasing(M, "M")
    if M[0] < 1:
        raise NotMonotone("weights M must be at least 1")
    a, l = [0], []
    while a[-1] < N:
        n = len(l) + 1
        start = a[-1]
        weight = M[start] if start < len(M) else M[-1]
        size = math.floor(min(weight ** 0.25, n ** 0.25))
        length = max(m + 1, l[-1] if l else 0, size)
        l.append(length)
        a.append(start + length)
    extended = tuple(M) + (M[-1],) * max(0, a[-1] - len(M))
    scheme = BlockingScheme(m, tuple(a), tuple(l), extended)
    scheme.check_invariants()
    logger.debug("blocking scheme: %d blocks covering %d indices", scheme.blocks, a[-1])
    return scheme


def block_sum_functionals(scheme: BlockingScheme, kind: str, n: int,
                          horizon: Optional[int] = None) -> Functional:
    """Z_n or W_n as a payoff of truncated observables Y_i = X_i^(i)."""
    lo, hi = scheme.z_window(n) if kind.upper() == "Z" else (
        scheme.w_window(n) if kind.upper() == "W" else (None, None))
    if lo is None:
        raise ModelError(f"block kind must be Z or W, got {kind!r}")
    horizon = horizon or scheme.a[n]
    if horizon < scheme.a[n]:
        raise IndexOutOfScheme(f"horizon {horizon} ends before block {n}")
    return block_sum(horizon, lo, hi, truncate_by_index=True)


def block_domination_report(model: SequenceModel, scheme: BlockingScheme, K: int,
                            b_abs_mean: Optional[float] = None) -> CheckReport:
    """Exact Z/W domination chains and the W-negligibility trend over the first K blocks.

    Z chain: sum_n E[Z_n^2]/a_n^2 <= sum_i M_i E[Y_i^2]/i^2, summed over the blocks
    with l_n <= M_{a_{n-1}+1} (the others are forced up to m + 1).
    W chain: sum_n E[W_n^2]/a_n^2 <= m sum_{i<=a_k} E[Y_i^2]/i^2.
    Negligibility: sum_{n<=k} E|W_n| / a_k, checked against k m E|X_1| / a_k when given.
    """
    if K > scheme.blocks:
        raise IndexOutOfScheme(f"only {scheme.blocks} blocks in the scheme")
    report = CheckReport("block-domination")
    end = scheme.a[K]
    y_sq = [upper_expectation(model, power(block_sum(i, i, i, truncate_by_index=True), 2))
            for i in range(1, end + 1)]
    y_chain = np.cumsum([y_sq[i - 1] / i ** 2 for i in range(1, end + 1)])

    z_total = z_bound = w_total = w_abs = 0.0
    negligible = []
    for n in range(1, K + 1):
        lo, a_n = scheme.block(n)
        z_term = upper_expectation(model, power(block_sum_functionals(scheme, "Z", n), 2)) / a_n ** 2
        if scheme.l[n - 1] <= scheme.M[lo - 1]:
            z_total += z_term
            z_bound += math.fsum(scheme.M[i - 1] * y_sq[i - 1] / i ** 2 for i in range(lo, a_n + 1))
            report.expect_at_most("Z-chain", z_total, z_bound + 1e-12, witness=f"block {n}")
        if scheme.m:
            w = block_sum_functionals(scheme, "W", n)
            w_total += upper_expectation(model, power(w, 2)) / a_n ** 2
            w_abs += upper_expectation(model, absolute(w))
        report.expect_at_most("W-chain", w_total, scheme.m * y_chain[a_n - 1] + 1e-12, witness=f"block {n}")
        negligible.append(w_abs / a_n)
        if b_abs_mean is not None:
            report.expect_at_most("W-bound", w_abs / a_n, n * scheme.m * b_abs_mean / a_n + 1e-12,
                                  witness=f"block {n}")
    report.details.update(
        z_chain=z_total,
        z_bound=z_bound,
        w_chain=w_total,
        negligibility=tuple(negligible),
        negligibility_nonincreasing=is_nonincreasing(negligible),
    )
    return report


# subsequences ------------------------------------------------------------------

def geometric_subsequence(a: Sequence[float], lam: float) -> List[int]:
    """Greedy indices n_k with lam a_{n_k} <= a_{n_{k+1}} <= lam^3 a_{n_k + 1}.

    Raises:
        HorizonExhausted: the sequence never grows by a factor lam.
        BoundViolated: the upper bound fails; the witness is (n_k, n_{k+1}).
    """
    if not lam > 1:
        raise ModelError("lambda must exceed 1")
    if not a or a[0] <= 0:
        raise ModelError("the sequence must start positive")
    check_nondecreasing(a)
    picks = [1]
    target = lam * a[0]
    for n in range(2, len(a) + 1):
        if a[n - 1] >= target:
            picks.append(n)
            target = lam * a[n - 1]
    if len(picks) < 2:
        raise HorizonExhausted(f"no index reaches {lam:g} * a_1 within {len(a)} terms")
    for nk, nk1 in zip(picks, picks[1:]):
        if a[nk1 - 1] > lam ** 3 * a[nk]:
            raise BoundViolated(f"a_{nk1} = {a[nk1 - 1]!r} > {lam:g}^3 a_{nk + 1}", witness=(nk, nk1))
    return picks
