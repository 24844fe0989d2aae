"""Corpus statistics, inter-rater reliability, and response-time heuristics.

All functions are pure over immutable corpora. ``corpus`` arguments accept a
:class:`~groundwork.corpus_io.CorpusFile` or any iterable of dialogs.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

from . import engine
from .corpus_io import CorpusFile
from .engine import Finding, Severity
from .model import (
    Degree,
    DialogAnnotation,
    EmptyInput,
    Flag,
    GroundingAct,
    GroundworkError,
)


class LengthMismatch(GroundworkError):
    def __init__(self, len_a: int, len_b: int) -> None:
        super().__init__(f"sequences differ in length: {len_a} vs {len_b}")


class MissingTimestamps(GroundworkError):
    """The corpus carries no timestamps, so time-based figures are undefined."""


def _dialogs(corpus: CorpusFile | Iterable[DialogAnnotation]) -> tuple[DialogAnnotation, ...]:
    if isinstance(corpus, CorpusFile):
        return corpus.dialogs
    return tuple(corpus)


COUNTABLE_ACTS = tuple(act for act in GroundingAct if act is not GroundingAct.NONE)


@dataclass(frozen=True)
class ActHistogram:
    """Counts and percentages per act; None labels are excluded from both."""

    counts: dict[GroundingAct, int]
    total_acts: int
    percentages: dict[GroundingAct, float]


def act_histogram(corpus: CorpusFile | Iterable[DialogAnnotation]) -> ActHistogram:
    counter: Counter[GroundingAct] = Counter()
    for dialog in _dialogs(corpus):
        for label in dialog.labels:
            if label.act is not GroundingAct.NONE:
                counter[label.act] += 1
    counts = {act: counter.get(act, 0) for act in COUNTABLE_ACTS}
    total = sum(counts.values())
    percentages = {
        act: (100.0 * count / total if total else 0.0)
        for act, count in counts.items()
    }
    return ActHistogram(counts=counts, total_acts=total, percentages=percentages)


@dataclass(frozen=True)
class TrajectoryStats:
    """Per-CGU grounding spans plus reopening and flag figures.

    A span counts the utterances from the Initiate up to (excluding) the
    grounding utterance, so a CGU grounded by the immediately following
    utterance has span 1. Spans cover initial groundings only; reopenings
    are counted as revisits.
    """

    spans: dict[tuple[str, str], int]
    span_histogram: dict[int, int]
    grounded_in_next_count: int
    max_span: int
    revisit_count: int
    revisit_gaps_seconds: list[float]
    ambiguous_count: int
    flag_census: dict[Flag, int] = field(default_factory=dict)


def trajectory_stats(corpus: CorpusFile | Iterable[DialogAnnotation]) -> TrajectoryStats:
    spans: dict[tuple[str, str], int] = {}
    revisit_count = 0
    gaps: list[float] = []
    ambiguous = 0
    flags: Counter[Flag] = Counter()

    for dialog in _dialogs(corpus):
        timeline = engine.replay(dialog)
        initiated_at: dict[str, int] = {}
        first_grounded: dict[str, int] = {}
        last_grounded: dict[str, int] = {}
        for position, row in enumerate(timeline.rows):
            flags.update(row.utterance.flags)
            for label in row.labels:
                if label.act is GroundingAct.INITIATE:
                    initiated_at[label.cgu_id] = position
            for cgu_id, degree in row.closed_here:
                if cgu_id not in first_grounded:
                    first_grounded[cgu_id] = position
                    spans[(dialog.dialog_id, cgu_id)] = position - initiated_at[cgu_id]
                last_grounded[cgu_id] = position
                if degree is Degree.AMBIGUOUS:
                    ambiguous += 1
            for cgu_id in row.reopened_here:
                revisit_count += 1
                here = row.utterance.ts
                there = timeline.rows[last_grounded[cgu_id]].utterance.ts
                if here is not None and there is not None:
                    gaps.append(here - there)

    histogram: Counter[int] = Counter(spans.values())
    return TrajectoryStats(
        spans=spans,
        span_histogram=dict(sorted(histogram.items())),
        grounded_in_next_count=histogram.get(1, 0),
        max_span=max(spans.values(), default=0),
        revisit_count=revisit_count,
        revisit_gaps_seconds=gaps,
        ambiguous_count=ambiguous,
        flag_census={flag: flags.get(flag, 0) for flag in Flag},
    )


def cohen_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
    """Chance-corrected agreement between two equal-length label sequences.

    kappa = (po - pe) / (1 - pe), with pe from the product of each rater's
    own marginal distribution. The degenerate all-agreeing single-category
    case (pe = 1, po = 1) returns 1.
    """
    if len(labels_a) != len(labels_b):
        raise LengthMismatch(len(labels_a), len(labels_b))
    n = len(labels_a)
    if n == 0:
        raise EmptyInput("kappa needs at least one pair")

    observed = sum(1 for a, b in zip(labels_a, labels_b) if a == b) / n
    marg_a = Counter(labels_a)
    marg_b = Counter(labels_b)
    expected = sum(
        (marg_a[cat] / n) * (marg_b.get(cat, 0) / n) for cat in marg_a
    )
    if expected == 1.0:
        return 1.0
    return (observed - expected) / (1.0 - expected)


def response_time_profile(
    corpus: CorpusFile | Iterable[DialogAnnotation],
) -> dict[int, float]:
    """Mean response time keyed by the preceding utterance's word count.

    A sample is a consecutive cross-speaker pair with timestamps on both
    sides. Raises :class:`MissingTimestamps` when the corpus has no
    timestamps at all.
    """
    dialogs = _dialogs(corpus)
    if not any(
        utt.ts is not None for dialog in dialogs for utt in dialog.utterances
    ):
        raise MissingTimestamps("corpus has no timestamps")
    samples: dict[int, list[float]] = {}
    for dialog in dialogs:
        for prev, cur in zip(dialog.utterances, dialog.utterances[1:]):
            if prev.ts is None or cur.ts is None:
                continue
            if prev.speaker == cur.speaker:
                continue
            samples.setdefault(prev.word_count, []).append(cur.ts - prev.ts)
    return {
        bucket: sum(values) / len(values)
        for bucket, values in sorted(samples.items())
    }


def feasibility_check(
    corpus: CorpusFile | Iterable[DialogAnnotation],
    profile: dict[int, float],
    threshold_factor: float = 1.0,
) -> list[Finding]:
    """Flag groundings answered faster than the response-time profile allows.

    Checks every closure whose closed CGU's latest contribution is the
    immediately preceding utterance by the other speaker; warns when the
    observed gap is below ``threshold_factor`` times the bucket mean (global
    profile mean for unseen buckets).
    """
    findings: list[Finding] = []
    if not profile:
        return findings
    global_mean = sum(profile.values()) / len(profile)

    for dialog in _dialogs(corpus):
        members: dict[str, list[int]] = {}
        for label in dialog.labels:
            if label.cgu_id is not None:
                members.setdefault(label.cgu_id, []).append(label.utterance_id)
        timeline = engine.replay(dialog)
        for position, row in enumerate(timeline.rows):
            if position == 0 or not row.closed_here:
                continue
            cur = row.utterance
            prev = timeline.rows[position - 1].utterance
            if cur.ts is None or prev.ts is None or cur.speaker == prev.speaker:
                continue
            for cgu_id, _ in row.closed_here:
                contributions = [u for u in members.get(cgu_id, ()) if u < cur.id]
                if not contributions or max(contributions) != prev.id:
                    continue
                threshold = threshold_factor * profile.get(
                    prev.word_count, global_mean
                )
                observed = cur.ts - prev.ts
                if observed < threshold:
                    findings.append(
                        Finding(
                            Severity.WARNING,
                            "grounding-infeasible",
                            f"CGU {cgu_id!r} grounded {observed:g}s after a "
                            f"{prev.word_count}-word utterance "
                            f"(threshold {threshold:g}s)",
                            dialog_id=dialog.dialog_id,
                            utterance_id=cur.id,
                            cgu_id=cgu_id,
                        )
                    )
    return findings
