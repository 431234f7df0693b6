"""Evaluate-or-estimate fitness dispatch backed by a history of seen points.

Every fitness request within one search is recorded in a history store.
A new position is truly evaluated when its nearest recorded neighbor is
the best point seen so far (worth refining) or when no record lies within
the distance threshold (nothing to copy from); otherwise its fitness is
copied from that nearest neighbor. Estimated entries join the store too,
so later queries may chain off them.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from .de import ESTIMATED, EVALUATED, Position


@dataclass(frozen=True)
class StrategyParams:
    """d: neighbor-distance threshold (pixels, Euclidean) steering the
    trade-off between true evaluations and copies."""

    d: float = 2.5

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError(f"distance threshold must be positive, got {self.d}")


class Rule(enum.Enum):
    """Dispatch outcome for one queried position."""

    NEAR_BEST = 1  # evaluate: nearest stored point is the best seen so far
    UNEXPLORED = 2  # evaluate: no stored point within the distance threshold
    NEIGHBOR_COPY = 3  # estimate: copy the nearest stored fitness


@dataclass
class EvaluationRecord:
    position: Position
    fitness: float
    kind: str

    def __post_init__(self):
        if self.fitness < 0:
            raise ValueError(f"fitness must be nonnegative, got {self.fitness}")
        if not all(math.isfinite(x) for x in self.position):
            raise ValueError(f"position must be finite, got {self.position}")
        if self.kind not in (EVALUATED, ESTIMATED):
            raise ValueError(f"unknown record kind {self.kind!r}")


class NearestHit(NamedTuple):
    index: int
    record: EvaluationRecord
    distance: float


@dataclass
class HistoryStore:
    """Ordered log of all fitness requests within one block search.

    best_index always points at the minimal fitness over all records,
    evaluated and estimated alike; ties keep the earliest insertion.
    """

    records: list[EvaluationRecord] = field(default_factory=list)
    best_index: int | None = None

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: EvaluationRecord) -> int:
        self.records.append(record)
        index = len(self.records) - 1
        if self.best_index is None or record.fitness < self.records[self.best_index].fitness:
            self.best_index = index
        return index

    def rewrite(self, index: int, fitness: float, kind: str) -> None:
        """Replace one record's value in place, e.g. after re-resolving an
        estimate with a true evaluation, and re-derive the best index."""
        self.records[index] = EvaluationRecord(
            self.records[index].position, fitness, kind
        )
        self.best_index = None
        for i, record in enumerate(self.records):
            if self.best_index is None or record.fitness < self.records[self.best_index].fitness:
                self.best_index = i

    def best(self) -> EvaluationRecord | None:
        return None if self.best_index is None else self.records[self.best_index]

    def nearest(self, position: Position) -> NearestHit | None:
        """Closest record by Euclidean distance; earliest insertion wins
        ties. None iff the store is empty."""
        hit = None
        for index, record in enumerate(self.records):
            distance = math.dist(record.position, position)
            if hit is None or distance < hit.distance:
                hit = NearestHit(index, record, distance)
        return hit

    def reset(self) -> None:
        self.records.clear()
        self.best_index = None


def classify(store: HistoryStore, position: Position, params: StrategyParams) -> Rule:
    """Decide how a position's fitness is obtained.

    Exactly one rule applies: no record within d (or an empty store)
    means UNEXPLORED (evaluate, nothing nearby to copy from), a nearest
    record that is the best seen so far means NEAR_BEST (evaluate, to
    keep refining the minimum), and any other near record means
    NEIGHBOR_COPY.
    """
    hit = store.nearest(position)
    if hit is None or hit.distance > params.d:
        return Rule.UNEXPLORED
    if hit.index == store.best_index:
        return Rule.NEAR_BEST
    return Rule.NEIGHBOR_COPY


def fitness_of(
    store: HistoryStore,
    position: Position,
    params: StrategyParams,
    objective: Callable[[Position], float],
) -> tuple[float, str]:
    """Resolve one fitness request and record it in the store.

    NEAR_BEST and UNEXPLORED invoke the objective exactly once; a
    NEIGHBOR_COPY copies the nearest record's fitness and does not touch
    the objective. Objective errors propagate and leave the store as-is.
    """
    rule = classify(store, position, params)
    if rule is Rule.NEIGHBOR_COPY:
        value = store.nearest(position).record.fitness
        kind = ESTIMATED
    else:
        value = float(objective(position))
        kind = EVALUATED
    store.append(EvaluationRecord(tuple(position), value, kind))
    return value, kind


def provider(
    store: HistoryStore,
    params: StrategyParams,
    objective: Callable[[Position], float],
):
    """Bind store, params and objective into a fitness provider."""

    def request(position: Position) -> tuple[float, str]:
        return fitness_of(store, position, params, objective)

    return request
