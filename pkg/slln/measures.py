"""Classical probability primitives: laws, ambiguity sets and sampling.

Everything the engine maximises over is built from the types in this
module. All of them are immutable after construction and can be shared
between threads; sampling needs a :class:`~slln.rng.RandomStream` per
consumer.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    EmptyAmbiguitySet,
    EmptySupport,
    LengthMismatch,
    ModelError,
    NegativeProb,
    NotExactCapable,
    NotNormalizable,
)

PROB_SUM_TOL = 1e-12
NORMALIZE_TOL = 1e-9


class LawKind(Enum):
    """Family of a samplable law."""
    FINITE = "finite"
    PARETO = "pareto"
    DISCRETIZED = "discretized"


@dataclass(frozen=True)
class FiniteDistribution:
    """A law with finite support; ``support`` strictly increasing."""

    support: Tuple[float, ...]
    probs: Tuple[float, ...]

    def __post_init__(self):
        if not self.support:
            raise EmptySupport("finite distribution needs at least one support point")
        if len(self.support) != len(self.probs):
            raise LengthMismatch("support and probs must have the same length")
        if any(b <= a for a, b in zip(self.support, self.support[1:])):
            raise ModelError("support must be strictly increasing")
        if any(p < 0 for p in self.probs):
            raise NegativeProb("probabilities must be nonnegative")
        if abs(math.fsum(self.probs) - 1.0) > PROB_SUM_TOL:
            raise NotNormalizable(f"probabilities sum to {math.fsum(self.probs)!r}")

    @property
    def size(self) -> int:
        return len(self.support)

    @cached_property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.probs, dtype=float))

    @property
    def mean(self) -> float:
        return self.expectation(lambda x: x)

    @property
    def second_moment(self) -> float:
        return self.expectation(lambda x: x * x)

    def expectation(self, f: Callable[[float], float]) -> float:
        """Classical expectation of ``f(X)``, summed in support order."""
        total = 0.0
        for x, p in zip(self.support, self.probs):
            total += p * f(x)
        return total

    def tail(self, t: float) -> float:
        """P(X >= t)."""
        return min(1.0, sum(p for x, p in zip(self.support, self.probs) if x >= t))

    def abs_tail(self, t: float) -> float:
        """P(|X| >= t)."""
        return min(1.0, sum(p for x, p in zip(self.support, self.probs) if abs(x) >= t))

    def truncated_mean(self, c: float) -> float:
        """E[(-c) v X ^ c]."""
        return self.expectation(lambda x: truncate(x, c))

    def excess_mean(self, c: float) -> float:
        """E[(|X| - c)^+]."""
        return self.expectation(lambda x: max(abs(x) - c, 0.0))

    def quantile(self, u: float) -> float:
        """Inverse CDF at ``u`` in [0, 1)."""
        index = int(np.searchsorted(self.cumulative, u, side="right"))
        return self.support[min(index, self.size - 1)]

    def quantiles(self, us: np.ndarray) -> np.ndarray:
        indices = np.searchsorted(self.cumulative, us, side="right")
        np.minimum(indices, self.size - 1, out=indices)
        return np.asarray(self.support, dtype=float)[indices]

    def padded(self, support: Sequence[float]) -> "FiniteDistribution":
        """Same law written on a larger support (missing points get zero mass)."""
        masses = dict(zip(self.support, self.probs))
        missing = set(self.support) - set(support)
        if missing:
            raise ModelError(f"support {sorted(missing)} not covered by the target support")
        return FiniteDistribution(tuple(support), tuple(masses.get(x, 0.0) for x in support))

    def __repr__(self):
        pairs = ", ".join(f"{x:g}:{p:g}" for x, p in zip(self.support, self.probs))
        return f"<FiniteDistribution({pairs})>"


def make_finite_distribution(values: Iterable[float], probs: Iterable[float]) -> FiniteDistribution:
    """Build a finite law in canonical form.

    Values are sorted (probabilities follow), duplicate values are merged by
    summing their mass, and a total within 1e-9 of one is rescaled to one.

    Raises:
        EmptySupport: no values were given.
        LengthMismatch: values and probs differ in length.
        NegativeProb: a probability is negative.
        NotNormalizable: the total mass is further than 1e-9 from one.
    """
    values = [float(v) for v in values]
    probs = [float(p) for p in probs]
    if not values:
        raise EmptySupport("finite distribution needs at least one support point")
    if len(values) != len(probs):
        raise LengthMismatch(f"{len(values)} values but {len(probs)} probabilities")
    if any(p < 0 or math.isnan(p) for p in probs):
        raise NegativeProb("probabilities must be nonnegative")
    total = math.fsum(probs)
    if abs(total - 1.0) > NORMALIZE_TOL:
        raise NotNormalizable(f"probabilities sum to {total!r}")

    merged: Dict[float, float] = {}
    for v, p in zip(values, probs):
        merged[v] = merged.get(v, 0.0) + p
    support = tuple(sorted(merged))
    masses = [merged[v] / total for v in support]
    return FiniteDistribution(support, tuple(masses))


def bernoulli(p: float) -> FiniteDistribution:
    """Bernoulli(p) on the support {0, 1} (both points kept even at p in {0, 1})."""
    return make_finite_distribution([0.0, 1.0], [1.0 - p, p])


def truncate(x: float, c: float) -> float:
    """Clamp ``x`` to [-c, c]; the truncation X^(c) = (-c) v X ^ c."""
    if not c > 0:
        raise ValueError(f"truncation level must be positive, got {c!r}")
    return max(-c, min(x, c))


@dataclass(frozen=True)
class SamplableDistribution:
    """A single classical law that can be sampled.

    Use the ``finite_support``, ``pareto`` and ``discretized`` constructors;
    ``has_finite_mean`` is derived from the family and checked.
    """

    kind: LawKind
    has_finite_mean: bool
    finite: Optional[FiniteDistribution] = None
    alpha: Optional[float] = None
    scale: Optional[float] = None
    step: Optional[float] = None
    cap: Optional[float] = None

    def __post_init__(self):
        if self.kind is LawKind.FINITE:
            if self.finite is None:
                raise ModelError("finite law needs a FiniteDistribution")
            if not self.has_finite_mean:
                raise ModelError("finite-support law always has a finite mean")
        else:
            if self.alpha is None or self.scale is None or self.alpha <= 0 or self.scale <= 0:
                raise ModelError("Pareto parameters must be positive")
            if self.kind is LawKind.PARETO and self.alpha <= 1 and self.has_finite_mean:
                raise ModelError("Pareto(alpha <= 1) has no finite mean")
            if self.kind is LawKind.DISCRETIZED:
                if self.step is None or self.cap is None or self.step <= 0 or self.cap < self.scale:
                    raise ModelError("discretized law needs step > 0 and cap >= scale")

    # construction -----------------------------------------------------------

    @classmethod
    def finite_support(cls, dist: FiniteDistribution) -> "SamplableDistribution":
        return cls(kind=LawKind.FINITE, has_finite_mean=True, finite=dist)

    @classmethod
    def pareto(cls, alpha: float, scale: float = 1.0) -> "SamplableDistribution":
        return cls(kind=LawKind.PARETO, has_finite_mean=alpha > 1, alpha=float(alpha), scale=float(scale))

    @classmethod
    def discretized(cls, alpha: float, scale: float, step: float, cap: float) -> "SamplableDistribution":
        """Pareto(alpha, scale) rounded down to the lattice scale + k*step, mass above ``cap`` lumped at cap."""
        return cls(kind=LawKind.DISCRETIZED, has_finite_mean=True, alpha=float(alpha),
                   scale=float(scale), step=float(step), cap=float(cap))

    # views --------------------------------------------------------------------

    @property
    def is_finite(self) -> bool:
        return self.kind is LawKind.FINITE

    @cached_property
    def exact_law(self) -> Optional[FiniteDistribution]:
        """The finite form of the law, when it has one."""
        if self.kind is LawKind.FINITE:
            return self.finite
        if self.kind is LawKind.DISCRETIZED:
            count = int(math.floor((self.cap - self.scale) / self.step + 1e-9))
            grid = [self.scale + k * self.step for k in range(count + 1)]
            upper = [_pareto_survival(g, self.alpha, self.scale) for g in grid]
            probs = [upper[k] - upper[k + 1] for k in range(count)] + [upper[count]]
            return make_finite_distribution(grid, probs)
        return None

    @property
    def label(self) -> str:
        if self.kind is LawKind.FINITE:
            if self.finite.support == (0.0, 1.0):
                return f"Bern({self.finite.probs[1]:g})"
            return "Finite(" + ",".join(f"{x:g}:{p:g}" for x, p in zip(self.finite.support, self.finite.probs)) + ")"
        if self.kind is LawKind.PARETO:
            return f"Pareto({self.alpha:g},{self.scale:g})"
        return f"Discretized({self.alpha:g},{self.scale:g},{self.step:g},{self.cap:g})"

    # moments and tails ------------------------------------------------------

    @property
    def mean(self) -> float:
        law = self.exact_law
        if law is not None:
            return law.mean
        if self.alpha <= 1:
            return math.inf
        return self.alpha * self.scale / (self.alpha - 1)

    @property
    def second_moment(self) -> float:
        law = self.exact_law
        if law is not None:
            return law.second_moment
        if self.alpha <= 2:
            return math.inf
        return self.alpha * self.scale ** 2 / (self.alpha - 2)

    def tail(self, t: float) -> float:
        """P(X >= t)."""
        law = self.exact_law
        if law is not None:
            return law.tail(t)
        return _pareto_survival(t, self.alpha, self.scale)

    def abs_tail(self, t: float) -> float:
        """P(|X| >= t)."""
        law = self.exact_law
        if law is not None:
            return law.abs_tail(t)
        return _pareto_survival(t, self.alpha, self.scale) if t > 0 else 1.0

    def truncated_mean(self, c: float) -> float:
        """E[X^(c)] in closed form for Pareto laws."""
        law = self.exact_law
        if law is not None:
            return law.truncated_mean(c)
        if not c > 0:
            raise ValueError(f"truncation level must be positive, got {c!r}")
        a, s = self.alpha, self.scale
        if c <= s:
            return c
        if a == 1:
            return s + s * math.log(c / s)
        return s + s ** a * (c ** (1 - a) - s ** (1 - a)) / (1 - a)

    def excess_mean(self, c: float) -> float:
        """E[(|X| - c)^+]; infinite for Pareto(alpha <= 1)."""
        law = self.exact_law
        if law is not None:
            return law.excess_mean(c)
        a, s = self.alpha, self.scale
        if a <= 1:
            return math.inf
        if c < s:
            return self.mean - c
        return s ** a * c ** (1 - a) / (a - 1)

    # sampling -----------------------------------------------------------------

    def quantile(self, u: float) -> float:
        """Inverse CDF; Pareto(alpha, s) maps u to s * (1 - u)^(-1/alpha)."""
        law = self.exact_law
        if law is not None:
            return law.quantile(u)
        return self.scale * (1.0 - u) ** (-1.0 / self.alpha)

    def quantiles(self, us: np.ndarray) -> np.ndarray:
        law = self.exact_law
        if law is not None:
            return law.quantiles(us)
        return self.scale * np.power(1.0 - us, -1.0 / self.alpha)

    # serialization ----------------------------------------------------------

    def to_record(self) -> Dict[str, Any]:
        if self.kind is LawKind.FINITE:
            return {"kind": "finite", "support": list(self.finite.support), "probs": list(self.finite.probs)}
        if self.kind is LawKind.PARETO:
            return {"kind": "pareto", "alpha": self.alpha, "scale": self.scale}
        return {"kind": "discretized", "alpha": self.alpha, "scale": self.scale,
                "step": self.step, "cap": self.cap}

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "SamplableDistribution":
        kind = record.get("kind")
        if kind == "finite":
            return cls.finite_support(make_finite_distribution(record["support"], record["probs"]))
        if kind == "bernoulli":
            return cls.finite_support(bernoulli(float(record["p"])))
        if kind == "pareto":
            return cls.pareto(float(record["alpha"]), float(record.get("scale", 1.0)))
        if kind == "discretized":
            return cls.discretized(float(record["alpha"]), float(record.get("scale", 1.0)),
                                   float(record["step"]), float(record["cap"]))
        raise ModelError(f"unknown distribution kind {kind!r}")

    def __repr__(self):
        return f"<SamplableDistribution({self.label})>"


def _pareto_survival(t: float, alpha: float, scale: float) -> float:
    if t <= scale:
        return 1.0
    return (scale / t) ** alpha


Law = Union[FiniteDistribution, SamplableDistribution]


def as_samplable(law: Law) -> SamplableDistribution:
    if isinstance(law, SamplableDistribution):
        return law
    if isinstance(law, FiniteDistribution):
        return SamplableDistribution.finite_support(law)
    raise ModelError(f"not a distribution: {law!r}")


@dataclass(frozen=True)
class AmbiguitySet:
    """A finite, ordered family of laws generating a sub-linear expectation.

    The order of ``laws`` is the tie-breaking order of every argmax taken
    downstream: the lowest index wins.
    """

    laws: Tuple[SamplableDistribution, ...]
    exact_capable: bool = field(init=False)

    def __post_init__(self):
        if not self.laws:
            raise EmptyAmbiguitySet("an ambiguity set needs at least one law")
        first = self.laws[0]
        capable = all(law.is_finite for law in self.laws) and all(
            set(law.finite.support) == set(first.finite.support) for law in self.laws
        )
        object.__setattr__(self, "exact_capable", capable)

    @property
    def size(self) -> int:
        return len(self.laws)

    @property
    def support(self) -> Tuple[float, ...]:
        self._require_exact()
        return self.laws[0].finite.support

    @cached_property
    def prob_matrix(self) -> np.ndarray:
        """Row j holds the probabilities of law j over the common support."""
        self._require_exact()
        return np.array([law.finite.probs for law in self.laws], dtype=float)

    @property
    def means(self) -> List[float]:
        return [law.mean for law in self.laws]

    @property
    def upper_mean(self) -> float:
        return max(self.means)

    @property
    def lower_mean(self) -> float:
        return min(self.means)

    @property
    def upper_second_moment(self) -> float:
        return max(law.second_moment for law in self.laws)

    def argmax_mean(self) -> int:
        means = self.means
        return max(range(self.size), key=lambda j: (means[j], -j))

    def argmin_mean(self) -> int:
        means = self.means
        return min(range(self.size), key=lambda j: (means[j], j))

    # single-coordinate sup over P is a max over laws
    def upper_tail(self, t: float) -> float:
        return max(law.tail(t) for law in self.laws)

    def upper_abs_tail(self, t: float) -> float:
        return max(law.abs_tail(t) for law in self.laws)

    def upper_truncated_mean(self, c: float) -> float:
        return max(law.truncated_mean(c) for law in self.laws)

    def upper_excess_mean(self, c: float) -> float:
        return max(law.excess_mean(c) for law in self.laws)

    def heavy_tail_indices(self) -> List[int]:
        return [j for j, law in enumerate(self.laws) if not law.has_finite_mean]

    def _require_exact(self):
        if not self.exact_capable:
            raise NotExactCapable("ambiguity set is not exact-capable (finite laws on a common support required)")

    def to_records(self) -> List[Dict[str, Any]]:
        return [law.to_record() for law in self.laws]

    def __repr__(self):
        return f"<AmbiguitySet({', '.join(law.label for law in self.laws)})>"


def make_ambiguity_set(laws: Sequence[Law]) -> AmbiguitySet:
    """Wrap laws (kept in the given order) into an :class:`AmbiguitySet`."""
    if not laws:
        raise EmptyAmbiguitySet("an ambiguity set needs at least one law")
    return AmbiguitySet(tuple(as_samplable(law) for law in laws))


def align_supports(aset: AmbiguitySet) -> AmbiguitySet:
    """Rewrite every finite-form law on the union support so the set is exact-capable."""
    exact = []
    for law in aset.laws:
        finite = law.exact_law
        if finite is None:
            raise ModelError(f"{law.label} has no finite form")
        exact.append(finite)
    union = tuple(sorted(set().union(*(law.support for law in exact))))
    return make_ambiguity_set([law.padded(union) for law in exact])


def classical_expectation(dist: Law, f: Callable[[float], float]) -> float:
    """Sum of probs * f(support) for a finite-form law."""
    finite = dist if isinstance(dist, FiniteDistribution) else dist.exact_law
    if finite is None:
        raise ModelError(f"{dist!r} has no finite form")
    return finite.expectation(f)


def sample(dist: Law, stream) -> float:
    """Draw one value from ``dist`` by inverse CDF on the stream's next uniform."""
    return as_samplable(dist).quantile(stream.uniform())
