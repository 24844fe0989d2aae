"""Classifier-ready encodings, stratified splits, and class weights.

Each classification instance asks: given the dialog history and one focal
CGU (or a fresh one), what act does the next utterance perform on it? The
history is rendered utterance-by-utterance with the focal CGU's member
utterances wrapped in a marker token, then joined with a separator token; a
doubled separator divides history from the next utterance.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

from . import engine
from .corpus_io import CorpusFile, format_timestamp
from .model import (
    DialogAnnotation,
    EmptyInput,
    GroundingAct,
    GroundworkError,
    Utterance,
)

SPECIAL_TOKEN = "<special_token>"
SEPARATOR = "</s>"


class FocalNotInHistory(GroundworkError):
    def __init__(self, cgu_id: str) -> None:
        super().__init__(f"focal CGU {cgu_id!r} has no member in the history")
        self.cgu_id = cgu_id


@dataclass(frozen=True)
class EncodedInstance:
    """One (history, focal CGU, next utterance) classification example.

    ``focal_cgu`` is ``None`` for the fresh-CGU instance that asks whether
    the next utterance initiates something new.
    """

    dialog_id: str
    utt_id: int
    focal_cgu: str | None
    input_text: str
    label: GroundingAct | None
    history_len: int


def render_utterance(utt: Utterance) -> str:
    """``[mm:ss] Speaker: text`` with the stamp dropped when untimed."""
    if utt.ts is not None:
        return f"{format_timestamp(utt.ts)} {utt.speaker}: {utt.text}"
    return f"{utt.speaker}: {utt.text}"


def encode_instance(
    history: Sequence[Utterance],
    memberships: Mapping[int, set[str]],
    focal: str | None,
    next_utt: Utterance,
    label: GroundingAct | None = None,
    *,
    dialog_id: str = "",
    special_token: str = SPECIAL_TOKEN,
    separator: str = SEPARATOR,
) -> EncodedInstance:
    """Render one instance; ``focal=None`` encodes the fresh-CGU case."""
    if focal is not None and not any(
        focal in memberships.get(utt.id, ()) for utt in history
    ):
        raise FocalNotInHistory(focal)

    blocks: list[str] = []
    for utt in history:
        rendered = render_utterance(utt)
        if focal is not None and focal in memberships.get(utt.id, ()):
            rendered = f"{special_token}{rendered}{special_token}"
        blocks.append(rendered)
    text = separator.join(blocks)
    text += separator * 2
    text += render_utterance(next_utt) + separator
    if label is not None:
        text += label.canonical_name + separator
    return EncodedInstance(
        dialog_id=dialog_id,
        utt_id=next_utt.id,
        focal_cgu=focal,
        input_text=text,
        label=label,
        history_len=len(history),
    )


def build_instances(
    corpus: CorpusFile | Iterable[DialogAnnotation],
    *,
    special_token: str = SPECIAL_TOKEN,
    separator: str = SEPARATOR,
    max_history: int | None = None,
) -> list[EncodedInstance]:
    """One instance per (utterance, open CGU) pair plus one fresh-CGU instance.

    An utterance's label for an open CGU is its act on that CGU, or None if
    it carries none; the fresh instance is labeled Initiate exactly when the
    utterance opens a new CGU. Output order is dialog order, then utterance
    order, then CGU creation order with the fresh instance last.

    With ``max_history`` set, open CGUs whose members all fall outside the
    trimmed window are skipped: without a visible member the focal marking
    cannot be rendered.
    """
    dialogs = corpus.dialogs if isinstance(corpus, CorpusFile) else tuple(corpus)
    instances: list[EncodedInstance] = []
    for dialog in dialogs:
        timeline = engine.replay(dialog)
        by_utt = dialog.labels_by_utterance()
        memberships: dict[int, set[str]] = {}
        open_before: tuple[str, ...] = ()
        for position, row in enumerate(timeline.rows):
            utt = row.utterance
            history = [r.utterance for r in timeline.rows[:position]]
            if max_history is not None:
                history = history[-max_history:]
            labels = by_utt.get(utt.id, ())
            act_on: dict[str, GroundingAct] = {}
            for label in labels:
                if label.cgu_id is not None and label.cgu_id not in act_on:
                    act_on[label.cgu_id] = label.act
            for cgu_id in open_before:
                if max_history is not None and not any(
                    cgu_id in memberships.get(u.id, ()) for u in history
                ):
                    continue
                instances.append(
                    encode_instance(
                        history,
                        memberships,
                        cgu_id,
                        utt,
                        act_on.get(cgu_id, GroundingAct.NONE),
                        dialog_id=dialog.dialog_id,
                        special_token=special_token,
                        separator=separator,
                    )
                )
            initiates = any(
                label.act is GroundingAct.INITIATE for label in labels
            )
            instances.append(
                encode_instance(
                    history,
                    memberships,
                    None,
                    utt,
                    GroundingAct.INITIATE if initiates else GroundingAct.NONE,
                    dialog_id=dialog.dialog_id,
                    special_token=special_token,
                    separator=separator,
                )
            )
            for label in labels:
                if label.cgu_id is not None:
                    memberships.setdefault(utt.id, set()).add(label.cgu_id)
            open_before = row.open_after
    return instances


def _label_key(item: object) -> str:
    if isinstance(item, Mapping):
        label = item["label"]
    else:
        label = getattr(item, "label")
    if isinstance(label, GroundingAct):
        return label.canonical_name
    return str(label)


def stratified_split(
    instances: Sequence,
    ratios: Sequence[int] = (70, 15, 15),
    seed: int = 0,
) -> tuple[list, list, list]:
    """Partition into train/dev/test keeping per-label proportions within 1.

    Each label group is shuffled with the seeded generator and apportioned
    by largest remainder, so the three parts reproduce exactly for a fixed
    seed and always recompose to the input as a multiset.
    """
    if len(ratios) != 3 or sum(ratios) != 100 or any(r < 0 for r in ratios):
        raise ValueError(f"ratios must be three non-negative shares of 100, got {ratios}")
    if not instances:
        raise EmptyInput("nothing to split")

    groups: dict[str, list] = {}
    for item in instances:
        groups.setdefault(_label_key(item), []).append(item)

    rng = random.Random(seed)
    parts: tuple[list, list, list] = ([], [], [])
    for key in sorted(groups):
        group = groups[key]
        rng.shuffle(group)
        shares = [len(group) * r / 100 for r in ratios]
        counts = [int(s) for s in shares]
        remainders = sorted(
            range(3), key=lambda i: (shares[i] - counts[i], -i), reverse=True
        )
        for i in remainders[: len(group) - sum(counts)]:
            counts[i] += 1
        start = 0
        for part, count in zip(parts, counts):
            part.extend(group[start : start + count])
            start += count
    return parts


def class_weights(train: Sequence) -> dict[Hashable, float]:
    """Balanced weights: N / (K * n_c) over the K labels present."""
    if not train:
        raise EmptyInput("empty training set")
    counts: dict[Hashable, int] = {}
    for item in train:
        label = item["label"] if isinstance(item, Mapping) else getattr(item, "label")
        counts[label] = counts.get(label, 0) + 1
    n = len(train)
    k = len(counts)
    return {label: n / (k * count) for label, count in counts.items()}
