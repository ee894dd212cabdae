"""Retrieval evaluation: top-n error on labelled pairs, link distances.

The labelled dataset is JSON-lines, one record per line:
`{"fragment_id": ..., "fragment_text": ..., "gold_trope": ...}`. A pair
scores a hit when its gold trope appears in the tilt candidates computed
for its fragment text; misses additionally report how far the top
prediction is from the gold in the trope link graph.
"""

from __future__ import annotations

import json
import random
import statistics
from collections import deque
from dataclasses import dataclass
from typing import IO, Sequence

from .corpus import TropeCorpus, plot_trope_subset
from .embedding import EmbeddingModel
from .engine import tilt_candidates

REPORT_VERSION = 1

# distance value for trope pairs with no connecting path
UNREACHABLE = None


class EvalError(Exception):
    """Invalid evaluation input."""


@dataclass(frozen=True)
class LabelledPair:
    fragment_id: str
    fragment_text: str
    gold_trope: str


def load_pairs(source: IO[str] | str) -> list[LabelledPair]:
    text = source if isinstance(source, str) else source.read()
    pairs: list[LabelledPair] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            pairs.append(LabelledPair(
                fragment_id=record["fragment_id"],
                fragment_text=record["fragment_text"],
                gold_trope=record["gold_trope"],
            ))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise EvalError(f"bad labelled pair on line {line_no}: {exc}") from exc
    return pairs


# ---------------------------------------------------------------------------
# Link distances
# ---------------------------------------------------------------------------

def trope_link_distance(corpus: TropeCorpus, a: str, b: str) -> int | None:
    """Shortest hop count between two tropes in the undirected link graph.

    Returns UNREACHABLE (None) when no path exists; 0 iff a == b.
    """
    for name in (a, b):
        if name not in corpus.tropes:
            raise EvalError(f"unknown trope name {name!r}")
    if a == b:
        return 0
    seen = {a}
    frontier = deque([(a, 0)])
    while frontier:
        name, hops = frontier.popleft()
        for neighbor in corpus.neighbors(name):
            if neighbor == b:
                return hops + 1
            if neighbor not in seen:
                seen.add(neighbor)
                frontier.append((neighbor, hops + 1))
    return UNREACHABLE


@dataclass(frozen=True)
class DistanceStats:
    median: float
    mean: float
    stddev: float
    count: int
    unreachable_count: int
    excluded_exact_count: int

    def to_dict(self) -> dict:
        return {
            "median": self.median,
            "mean": self.mean,
            "stddev": self.stddev,
            "count": self.count,
            "unreachable_count": self.unreachable_count,
            "excluded_exact_count": self.excluded_exact_count,
        }


def distance_stats(corpus: TropeCorpus,
                   pairs: Sequence[tuple[str, str]],
                   exclude_exact: bool = False) -> DistanceStats:
    """Moments of link distances over (predicted, gold) trope pairs.

    Unreachable pairs are tallied but excluded from the moments, as are
    exact matches when exclude_exact is set. Population standard
    deviation, so a single surviving pair reports stddev 0.
    """
    if not pairs:
        raise EvalError("no pairs")
    excluded_exact = 0
    unreachable = 0
    distances: list[int] = []
    for predicted, gold in pairs:
        if exclude_exact and predicted == gold:
            excluded_exact += 1
            continue
        d = trope_link_distance(corpus, predicted, gold)
        if d is UNREACHABLE:
            unreachable += 1
        else:
            distances.append(d)
    if not distances:
        raise EvalError("all pairs excluded")
    return DistanceStats(
        median=float(statistics.median(distances)),
        mean=float(statistics.fmean(distances)),
        stddev=float(statistics.pstdev(distances)),
        count=len(distances),
        unreachable_count=unreachable,
        excluded_exact_count=excluded_exact,
    )


def baseline_distance_stats(corpus: TropeCorpus, samples: int,
                            rng: random.Random,
                            plot_subset_only: bool = False) -> DistanceStats:
    """The same moments over uniformly sampled distinct trope pairs."""
    names = sorted(plot_trope_subset(corpus)) if plot_subset_only \
        else sorted(corpus.tropes)
    if len(names) < 2:
        raise EvalError("need at least 2 tropes for a baseline")
    pairs = [tuple(rng.sample(names, 2)) for _ in range(samples)]
    return distance_stats(corpus, pairs, exclude_exact=False)


# ---------------------------------------------------------------------------
# Top-n retrieval error
# ---------------------------------------------------------------------------

MISS_FILTERED = "FILTERED"
MISS_RANKED_OUT = "RANKED_OUT"


@dataclass(frozen=True)
class PairRecord:
    fragment_id: str
    gold_trope: str
    predicted: tuple[tuple[str, float], ...]
    hit_rank: int | None
    miss_reason: str | None
    link_distance: int | None
    link_unreachable: bool

    def to_dict(self) -> dict:
        return {
            "fragment_id": self.fragment_id,
            "gold_trope": self.gold_trope,
            "predicted": [[n, d] for n, d in self.predicted],
            "hit_rank": self.hit_rank,
            "miss_reason": self.miss_reason,
            "link_distance": self.link_distance,
            "link_unreachable": self.link_unreachable,
        }


@dataclass(frozen=True)
class EvalReport:
    top1_error: float
    top5_error: float
    n: int
    records: tuple[PairRecord, ...]
    rejected: tuple[tuple[str, str], ...]
    tilt_distance_stats: DistanceStats | None
    baseline: DistanceStats | None

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "n": self.n,
            "top1_error": self.top1_error,
            "top5_error": self.top5_error,
            "pair_count": len(self.records),
            "records": [r.to_dict() for r in self.records],
            "rejected": [{"fragment_id": f, "reason": r} for f, r in self.rejected],
            "tilt_distance_stats": (
                None if self.tilt_distance_stats is None
                else self.tilt_distance_stats.to_dict()
            ),
            "baseline": None if self.baseline is None else self.baseline.to_dict(),
        }


def evaluate_topn(model: EmbeddingModel, corpus: TropeCorpus,
                  pairs: Sequence[LabelledPair], n: int = 5) -> EvalReport:
    """Score labelled pairs through the tilt candidate pipeline.

    The query for each pair is the fragment's trained doc vector when the
    model has one, otherwise a vector inferred from fragment_text. The
    top1 error is measured on the same ranking as the top-n error, so
    top1_error >= topn_error always holds.
    """
    if not pairs:
        raise EvalError("no pairs")
    records: list[PairRecord] = []
    rejected: list[tuple[str, str]] = []
    top1_hits = 0
    topn_hits = 0
    for pair in pairs:
        if pair.gold_trope not in corpus.tropes:
            rejected.append(
                (pair.fragment_id, f"gold trope {pair.gold_trope!r} not in corpus")
            )
            continue
        candidates, filtered_out = tilt_candidates(
            model, corpus, pair.fragment_text,
            context_doc_id=f"frag:{pair.fragment_id}", n=n,
        )
        names = [name for name, _ in candidates]
        hit_rank = names.index(pair.gold_trope) + 1 \
            if pair.gold_trope in names else None
        miss_reason = None
        link = None
        link_unreachable = False
        if hit_rank is None:
            filtered_names = {name for name, _ in filtered_out}
            miss_reason = MISS_FILTERED if pair.gold_trope in filtered_names \
                else MISS_RANKED_OUT
            link = trope_link_distance(corpus, names[0], pair.gold_trope)
            if link is UNREACHABLE:
                link_unreachable = True
        else:
            top1_hits += hit_rank == 1
            topn_hits += 1
        records.append(PairRecord(
            fragment_id=pair.fragment_id,
            gold_trope=pair.gold_trope,
            predicted=candidates,
            hit_rank=hit_rank,
            miss_reason=miss_reason,
            link_distance=link,
            link_unreachable=link_unreachable,
        ))
    if not records:
        raise EvalError("every pair was rejected")

    scored = len(records)
    miss_pairs = [(r.predicted[0][0], r.gold_trope)
                  for r in records if r.hit_rank != 1]
    tilt_stats = None
    if miss_pairs:
        try:
            tilt_stats = distance_stats(corpus, miss_pairs, exclude_exact=True)
        except EvalError:
            tilt_stats = None
    return EvalReport(
        top1_error=1.0 - top1_hits / scored,
        top5_error=1.0 - topn_hits / scored,
        n=n,
        records=tuple(records),
        rejected=tuple(rejected),
        tilt_distance_stats=tilt_stats,
        baseline=None,
    )


def build_report(model: EmbeddingModel, corpus: TropeCorpus,
                 pairs: Sequence[LabelledPair], n: int = 5,
                 baseline_samples: int = 200, seed: int = 1,
                 plot_subset_only: bool = False) -> EvalReport:
    """evaluate_topn plus a seeded random-pair distance baseline."""
    report = evaluate_topn(model, corpus, pairs, n=n)
    baseline = baseline_distance_stats(
        corpus, baseline_samples, random.Random(seed),
        plot_subset_only=plot_subset_only,
    )
    return EvalReport(
        top1_error=report.top1_error,
        top5_error=report.top5_error,
        n=report.n,
        records=report.records,
        rejected=report.rejected,
        tilt_distance_stats=report.tilt_distance_stats,
        baseline=baseline,
    )
