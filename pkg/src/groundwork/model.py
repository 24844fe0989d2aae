"""Shared value types: grounding acts, degrees, utterances, labels, and dialogs.

Everything in this module is an immutable value. Construction performs the
structural checks; the engine, IO, and analytics layers build on top and are
free to share these objects across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class GroundworkError(Exception):
    """Base class for every error this package raises."""


class ModelError(GroundworkError):
    """A value failed a structural invariant at construction time."""


class UnknownLabel(GroundworkError):
    """Raised by :func:`parse_act` for text outside the label set."""

    def __init__(self, text: str) -> None:
        super().__init__(f"unknown grounding-act label: {text!r}")
        self.text = text


class EmptyInput(GroundworkError):
    """An operation that needs at least one item received none."""


class GroundingAct(Enum):
    """Per-utterance grounding acts, plus ``NONE`` for inert utterances.

    The enum value is the canonical spelling emitted by every writer in this
    package; :func:`parse_act` accepts the historical spelling variants.
    """

    INITIATE = "Initiate"
    CONTINUE = "Continue"
    EXPLICIT_ACK = "Explicit-Ack"
    REPEAT_BACK = "Repeat-Back"
    MOVE_ON = "Move-On"
    USE = "Use"
    REPAIR = "Repair"
    REQUEST_REPAIR = "Request-Repair"
    REQUEST_ACK = "Request-Ack"
    CANCEL = "Cancel"
    REPEAT = "Repeat"
    NONE = "None"

    @property
    def canonical_name(self) -> str:
        return self.value

    @property
    def is_acknowledging(self) -> bool:
        """True for the four acts that ground an open CGU."""
        return self in _ACKNOWLEDGING

    @property
    def is_reopening(self) -> bool:
        """True for the acts that pull an already-grounded CGU back open."""
        return self in _REOPENING


_ACKNOWLEDGING = frozenset(
    {
        GroundingAct.EXPLICIT_ACK,
        GroundingAct.REPEAT_BACK,
        GroundingAct.MOVE_ON,
        GroundingAct.USE,
    }
)

_REOPENING = frozenset(
    {
        GroundingAct.REPAIR,
        GroundingAct.REQUEST_REPAIR,
        GroundingAct.REQUEST_ACK,
    }
)

# Normalized spelling -> act. Keys are lowercase with separators collapsed to
# single spaces and trailing "." / ":" stripped, which is what _normalize_label
# produces. Covers the spellings found in published act tables and figures.
_ACT_ALIASES: dict[str, GroundingAct] = {
    "initiate": GroundingAct.INITIATE,
    "continue": GroundingAct.CONTINUE,
    "explicit ack": GroundingAct.EXPLICIT_ACK,
    "explicit acknowledgment": GroundingAct.EXPLICIT_ACK,
    "explicit acknowledgement": GroundingAct.EXPLICIT_ACK,
    "exp ack": GroundingAct.EXPLICIT_ACK,
    "exp acknowledgment": GroundingAct.EXPLICIT_ACK,
    "exp acknowledgement": GroundingAct.EXPLICIT_ACK,
    "explicitack": GroundingAct.EXPLICIT_ACK,
    "repeat back": GroundingAct.REPEAT_BACK,
    "repeatback": GroundingAct.REPEAT_BACK,
    "move": GroundingAct.MOVE_ON,
    "move on": GroundingAct.MOVE_ON,
    "moveon": GroundingAct.MOVE_ON,
    "use": GroundingAct.USE,
    "repair": GroundingAct.REPAIR,
    "request repair": GroundingAct.REQUEST_REPAIR,
    "req repair": GroundingAct.REQUEST_REPAIR,
    "requestrepair": GroundingAct.REQUEST_REPAIR,
    "reqrepair": GroundingAct.REQUEST_REPAIR,
    "request ack": GroundingAct.REQUEST_ACK,
    "request acknowledge": GroundingAct.REQUEST_ACK,
    "request acknowledgment": GroundingAct.REQUEST_ACK,
    "request acknowledgement": GroundingAct.REQUEST_ACK,
    "req ack": GroundingAct.REQUEST_ACK,
    "requestack": GroundingAct.REQUEST_ACK,
    "reqack": GroundingAct.REQUEST_ACK,
    "cancel": GroundingAct.CANCEL,
    "repeat": GroundingAct.REPEAT,
    "none": GroundingAct.NONE,
}


def _normalize_label(text: str) -> str:
    cleaned = text.strip().rstrip(".:").strip().lower()
    cleaned = cleaned.replace("-", " ").replace("_", " ").replace("/", " ")
    return " ".join(cleaned.split())


def parse_act(label_text: str) -> GroundingAct:
    """Map a label spelling onto its act, case-insensitively.

    Raises :class:`UnknownLabel` for anything outside the accepted spellings.
    """
    act = _ACT_ALIASES.get(_normalize_label(label_text))
    if act is None:
        raise UnknownLabel(label_text)
    return act


class Degree(Enum):
    """Confidence level assigned to a CGU at the moment it is grounded."""

    HIGH = "High"
    MEDIUM = "Medium"
    LOW = "Low"
    AMBIGUOUS = "Ambiguous"

    @classmethod
    def parse(cls, text: str) -> "Degree":
        for degree in cls:
            if degree.value.lower() == text.strip().lower():
                return degree
        raise ModelError(f"unknown degree: {text!r}")


class Flag(Enum):
    """Per-utterance annotation flags.

    ``REVISED`` marks labels rewritten after later context, ``OVERLAP`` marks
    simultaneous speech or typing, ``MURMUR`` marks self-directed speech.
    """

    REVISED = "revised"
    OVERLAP = "overlap"
    MURMUR = "murmur"

    @property
    def symbol(self) -> str:
        return _FLAG_SYMBOLS[self]

    @classmethod
    def parse(cls, text: str) -> "Flag":
        token = text.strip().lower()
        for flag in cls:
            if token in (flag.value, flag.symbol):
                return flag
        raise ModelError(f"unknown flag: {text!r}")


_FLAG_SYMBOLS = {Flag.REVISED: "*", Flag.OVERLAP: "#", Flag.MURMUR: "m"}


class CguStatus(Enum):
    OPEN = "open"
    GROUNDED = "grounded"
    CANCELED = "canceled"


class CorpusTag(Enum):
    MEETUP = "meetup"
    SPOT_THE_DIFFERENCE = "spot_the_difference"
    OTHER = "other"

    @classmethod
    def parse(cls, text: str) -> "CorpusTag":
        token = text.strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {
            "meetup": cls.MEETUP,
            "spot_the_difference": cls.SPOT_THE_DIFFERENCE,
            "spotthedifference": cls.SPOT_THE_DIFFERENCE,
            "std": cls.SPOT_THE_DIFFERENCE,
            "other": cls.OTHER,
        }
        if token not in aliases:
            raise ModelError(f"unknown corpus tag: {text!r}")
        return aliases[token]


@dataclass(frozen=True)
class Utterance:
    """One speaker turn. ``id`` is the 0-based position within its dialog."""

    id: int
    speaker: str
    text: str
    ts: float | None = None
    flags: frozenset[Flag] = frozenset()

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ModelError(f"utterance id must be non-negative, got {self.id}")
        if self.ts is not None and self.ts < 0:
            raise ModelError(f"timestamp must be non-negative, got {self.ts}")
        if not isinstance(self.flags, frozenset):
            object.__setattr__(self, "flags", frozenset(self.flags))

    @property
    def word_count(self) -> int:
        return len(self.text.split())


@dataclass(frozen=True)
class ActLabel:
    """One (utterance, CGU, act) assignment; an utterance may carry several.

    ``degree_override`` records the annotator's Ambiguous judgment on an
    acknowledging act; whether an override is legal for the act it sits on
    is checked by the engine's validator, not here.
    """

    utterance_id: int
    act: GroundingAct
    cgu_id: str | None = None
    degree_override: Degree | None = None
    link_cgu: str | None = None

    def __post_init__(self) -> None:
        if self.act is GroundingAct.NONE:
            if self.cgu_id is not None:
                raise ModelError("a None act carries no CGU id")
        elif self.cgu_id is None:
            raise ModelError(f"act {self.act.canonical_name} requires a CGU id")


@dataclass(frozen=True)
class CguRecord:
    """Lifecycle snapshot of one CGU.

    ``prior_degree`` stashes the degree held before the latest reopening so a
    cancelation of the reopening can restore it.
    """

    id: str
    status: CguStatus
    members: tuple[tuple[int, GroundingAct], ...]
    degree: Degree | None = None
    reopen_count: int = 0
    prior_degree: Degree | None = None

    def __post_init__(self) -> None:
        if not self.members or self.members[0][1] is not GroundingAct.INITIATE:
            raise ModelError(f"CGU {self.id!r} must start with an Initiate")
        if (self.degree is not None) != (self.status is CguStatus.GROUNDED):
            raise ModelError(
                f"CGU {self.id!r}: degree is carried exactly while grounded"
            )
        if self.reopen_count < 0:
            raise ModelError(f"CGU {self.id!r}: negative reopen count")


@dataclass(frozen=True)
class DerivedRow:
    """Open/closed assertions copied from an annotation table row.

    These are never trusted as state; the validator checks them against
    replay. A ``None`` degree in ``closed`` means the row asserted the
    closure but not its degree.
    """

    utterance_id: int
    open_ids: tuple[str, ...]
    closed: tuple[tuple[str, Degree | None], ...]


@dataclass(frozen=True)
class DialogAnnotation:
    """Ordered utterances plus their labels; the unit of replay and export."""

    dialog_id: str
    corpus_tag: CorpusTag = CorpusTag.OTHER
    utterances: tuple[Utterance, ...] = ()
    labels: tuple[ActLabel, ...] = ()
    derived_rows: tuple[DerivedRow, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.utterances, tuple):
            object.__setattr__(self, "utterances", tuple(self.utterances))
        if not isinstance(self.labels, tuple):
            object.__setattr__(self, "labels", tuple(self.labels))
        if not isinstance(self.derived_rows, tuple):
            object.__setattr__(self, "derived_rows", tuple(self.derived_rows))

        prev_id: int | None = None
        prev_ts: float | None = None
        ids: set[int] = set()
        for utt in self.utterances:
            if prev_id is not None and utt.id <= prev_id:
                raise ModelError(
                    f"dialog {self.dialog_id!r}: utterance ids must strictly "
                    f"increase ({prev_id} then {utt.id})"
                )
            prev_id = utt.id
            if utt.ts is not None:
                if prev_ts is not None and utt.ts < prev_ts:
                    raise ModelError(
                        f"dialog {self.dialog_id!r}: timestamps decrease at "
                        f"utterance {utt.id}"
                    )
                prev_ts = utt.ts
            ids.add(utt.id)
        for label in self.labels:
            if label.utterance_id not in ids:
                raise ModelError(
                    f"dialog {self.dialog_id!r}: label references missing "
                    f"utterance {label.utterance_id}"
                )

    def labels_by_utterance(self) -> dict[int, tuple[ActLabel, ...]]:
        """Labels grouped per utterance, preserving file order."""
        grouped: dict[int, list[ActLabel]] = {}
        for label in self.labels:
            grouped.setdefault(label.utterance_id, []).append(label)
        return {utt_id: tuple(labels) for utt_id, labels in grouped.items()}
