"""Built-in models and the exhaustive-small family used by checks and the CLI."""

import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, Dict, Iterator, List, Sequence, Tuple

from .errors import ConfigValidationError
from .measures import SamplableDistribution, bernoulli, make_ambiguity_set, make_finite_distribution
from .models import MEAN_WINDOW, SequenceModel
from .sequences import make_iid_model, make_independent_model, make_moving_window_model


def moving_average() -> SequenceModel:
    """m = 1, X_i = (e_i + e_{i+1})/2 with e ~ {Bern(0.3), Bern(0.7)}."""
    return make_moving_window_model(1, make_ambiguity_set([bernoulli(0.3), bernoulli(0.7)]), MEAN_WINDOW)


def heavy_tail() -> SequenceModel:
    return make_iid_model(make_ambiguity_set([bernoulli(0.5), SamplableDistribution.pareto(1.0, 1.0)]))


def pareto2_control() -> SequenceModel:
    """Finite-mean Pareto: the divergence experiment should call it non-divergent."""
    return make_iid_model(make_ambiguity_set([SamplableDistribution.pareto(2.0, 1.0)]))


def classical_singleton() -> SequenceModel:
    return make_iid_model(make_ambiguity_set([bernoulli(0.5)]))


def two_bernoulli() -> SequenceModel:
    return make_iid_model(make_ambiguity_set([bernoulli(0.3), bernoulli(0.7)]))


def independent_bounded() -> SequenceModel:
    """Alternating driver sets: {Bern(0.3), Bern(0.7)} then two laws on {-1, 0, 1}."""
    signs = make_ambiguity_set([
        make_finite_distribution([-1.0, 0.0, 1.0], [0.2, 0.6, 0.2]),
        make_finite_distribution([-1.0, 0.0, 1.0], [0.1, 0.5, 0.4]),
    ])
    return make_independent_model([make_ambiguity_set([bernoulli(0.3), bernoulli(0.7)]), signs])


def alternating_epochs(N: int = 64) -> SequenceModel:
    """Deterministic 0/1 sequence in doubling epochs; S_n/n keeps swinging between 1/3 and 2/3."""
    drivers = []
    for i in range(1, N + 1):
        value = 1.0 if int(math.log2(i)) % 2 == 0 else 0.0
        drivers.append(make_ambiguity_set([make_finite_distribution([value], [1.0])]))
    return make_independent_model(drivers)


@dataclass(frozen=True)
class Fixture:
    name: str
    description: str
    build: Callable[[], SequenceModel]


FIXTURES: Dict[str, Fixture] = {
    f.name: f
    for f in (
        Fixture("moving-average", "m=1 mean window over {Bern(0.3), Bern(0.7)}", moving_average),
        Fixture("heavy-tail", "i.i.d. {Bern(0.5), Pareto(1,1)}", heavy_tail),
        Fixture("classical-singleton", "i.i.d. Bern(0.5)", classical_singleton),
        Fixture("two-bernoulli", "i.i.d. {Bern(0.3), Bern(0.7)}", two_bernoulli),
        Fixture("pareto2-control", "i.i.d. Pareto(2,1), finite mean", pareto2_control),
        Fixture("independent-bounded", "independent, alternating bounded driver sets", independent_bounded),
        Fixture("alternating-epochs", "deterministic doubling 1/0 epochs (no Cesaro limit)", alternating_epochs),
    )
}


def get_fixture(name: str) -> SequenceModel:
    try:
        return FIXTURES[name].build()
    except KeyError:
        raise ConfigValidationError(f"unknown fixture {name!r}; known: {', '.join(sorted(FIXTURES))}") from None


def fixture_rows() -> List[dict]:
    rows = []
    for f in FIXTURES.values():
        model = f.build()
        rows.append({"fixture": f.name, "kind": model.kind.value, "laws": model.label,
                     "description": f.description})
    return rows


# exhaustive-small family ---------------------------------------------------------

FAMILY_SUPPORTS: Tuple[Tuple[float, ...], ...] = ((0.0, 1.0), (-1.0, 0.0, 2.0), (0.0, 0.5, 1.0))
FAMILY_PROBS: Dict[int, Tuple[Tuple[float, ...], ...]] = {
    2: ((0.5, 0.5), (0.3, 0.7), (0.9, 0.1)),
    3: ((1 / 3, 1 / 3, 1 / 3), (0.2, 0.5, 0.3), (0.6, 0.1, 0.3)),
}


@dataclass(frozen=True)
class FamilyMember:
    name: str
    model: SequenceModel

    @property
    def independent(self) -> bool:
        return self.model.m == 0


def exhaustive_small_family(max_laws: int = 3, max_m: int = 0,
                            supports: Sequence[Tuple[float, ...]] = FAMILY_SUPPORTS) -> Iterator[FamilyMember]:
    """Every (support, number of laws, m) combination over a fixed grid of laws."""
    for support, k, m in product(supports, range(1, max_laws + 1), range(max_m + 1)):
        laws = [make_finite_distribution(support, p) for p in FAMILY_PROBS[len(support)][:k]]
        driver = make_ambiguity_set(laws)
        model = make_iid_model(driver) if m == 0 else make_moving_window_model(m, driver, MEAN_WINDOW)
        yield FamilyMember(f"support={len(support)}:{support[0]:g}..{support[-1]:g} laws={k} m={m}", model)


def mu_grid(low: float, high: float, points: int = 3) -> List[float]:
    """``points`` evenly spaced centers in [low, high] (one point when the band is degenerate)."""
    if high - low <= 1e-15 or points == 1:
        return [low]
    return [low + (high - low) * k / (points - 1) for k in range(points)]


# m-dependence block payoffs -------------------------------------------------------

BlockPayoff = Callable[[Tuple[float, ...], Tuple[float, ...]], float]

BLOCK_PAYOFFS: Tuple[BlockPayoff, ...] = (
    lambda x, y: sum(x) * sum(y),
    lambda x, y: max(x) - min(y),
    lambda x, y: math.sin(sum(x) - 2.0 * sum(y)),
    lambda x, y: float(sum(y) > sum(x)),
)
