"""CGU lifecycle engine: degree assignment, in-order replay, and validation.

A CGU opens with an Initiate, is grounded (closed) by an acknowledging act,
can be reopened by a repair-family act, and can be canceled. Canceling a CGU
that was reopened after grounding does not discard it: the cancelation
re-grounds it with the degree it held before the reopening. Canceling a
currently grounded CGU revokes it. Canceled is terminal.

Replays are deterministic functions of the label sequence; a
:class:`Session` is single-writer and fed utterances strictly in order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

from .model import (
    ActLabel,
    CguRecord,
    CguStatus,
    Degree,
    DialogAnnotation,
    GroundingAct,
    GroundworkError,
    ModelError,
    Utterance,
)


class EngineError(GroundworkError):
    """Base class for label-application failures.

    ``utterance_id`` is filled in by :func:`apply` so replay errors carry
    their position in the dialog.
    """

    utterance_id: int | None = None


class NotAcknowledging(EngineError):
    def __init__(self, act: GroundingAct) -> None:
        super().__init__(f"{act.canonical_name} is not an acknowledging act")
        self.act = act


class UnknownCgu(EngineError):
    def __init__(self, cgu_id: str) -> None:
        super().__init__(f"no such CGU: {cgu_id!r}")
        self.cgu_id = cgu_id


class DuplicateInitiate(EngineError):
    def __init__(self, cgu_id: str) -> None:
        super().__init__(f"CGU {cgu_id!r} already exists")
        self.cgu_id = cgu_id


class ActOnCanceled(EngineError):
    def __init__(self, cgu_id: str) -> None:
        super().__init__(f"CGU {cgu_id!r} is canceled; canceled is terminal")
        self.cgu_id = cgu_id


class OutOfOrderUtterance(EngineError):
    def __init__(self, expected: int, got: int) -> None:
        super().__init__(f"expected utterance {expected}, got {got}")
        self.expected = expected
        self.got = got


class SameUtteranceGrounding(EngineError):
    def __init__(self, cgu_id: str) -> None:
        super().__init__(
            f"CGU {cgu_id!r} initiated and grounded by the same utterance"
        )
        self.cgu_id = cgu_id


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Finding:
    """One validation or replay observation."""

    severity: Severity
    code: str
    message: str
    dialog_id: str | None = None
    utterance_id: int | None = None
    cgu_id: str | None = None


@dataclass(frozen=True)
class TransitionReport:
    """What one utterance did to the CGU state."""

    utterance_id: int
    opened: tuple[str, ...] = ()
    closed: tuple[tuple[str, Degree], ...] = ()
    reopened: tuple[str, ...] = ()
    canceled: tuple[str, ...] = ()
    warnings: tuple[Finding, ...] = ()


@dataclass
class Session:
    """Mutable replay state for one dialog; single-writer, strictly ordered."""

    dialog_id: str
    cgus: dict[str, CguRecord] = field(default_factory=dict)
    applied: int = 0
    event_log: list[TransitionReport] = field(default_factory=list)


@dataclass(frozen=True)
class TimelineRow:
    utterance: Utterance
    labels: tuple[ActLabel, ...]
    open_after: tuple[str, ...]
    closed_here: tuple[tuple[str, Degree], ...]
    reopened_here: tuple[str, ...]
    canceled_here: tuple[str, ...]
    warnings: tuple[Finding, ...]


@dataclass(frozen=True)
class Timeline:
    dialog_id: str
    rows: tuple[TimelineRow, ...]
    session: Session


_DEGREE_BY_CLOSER = {
    GroundingAct.REPEAT_BACK: Degree.HIGH,
    GroundingAct.USE: Degree.MEDIUM,
    GroundingAct.EXPLICIT_ACK: Degree.MEDIUM,
    GroundingAct.MOVE_ON: Degree.LOW,
}


def assign_degree(closing_act: GroundingAct, override: Degree | None = None) -> Degree:
    """Degree granted at grounding time.

    Repeat-Back earns High, Use and Explicit-Ack earn Medium, Move-On earns
    Low. An annotator override may force Ambiguous; no other override exists.
    """
    if not closing_act.is_acknowledging:
        raise NotAcknowledging(closing_act)
    if override is not None:
        if override is not Degree.AMBIGUOUS:
            raise ModelError("only an Ambiguous override is permitted")
        return Degree.AMBIGUOUS
    return _DEGREE_BY_CLOSER[closing_act]


def open_cgus(session: Session) -> list[str]:
    """Ids of open CGUs, ascending by creation order."""
    return [
        cgu_id
        for cgu_id, record in session.cgus.items()
        if record.status is CguStatus.OPEN
    ]


def grounded_cgus(session: Session) -> list[tuple[str, Degree]]:
    """(id, degree) of grounded CGUs, ascending by creation order."""
    out: list[tuple[str, Degree]] = []
    for cgu_id, record in session.cgus.items():
        if record.status is CguStatus.GROUNDED:
            assert record.degree is not None
            out.append((cgu_id, record.degree))
    return out


def canceled_cgus(session: Session) -> list[str]:
    return [
        cgu_id
        for cgu_id, record in session.cgus.items()
        if record.status is CguStatus.CANCELED
    ]


@dataclass
class _Delta:
    opened: list[str] = field(default_factory=list)
    closed: list[tuple[str, Degree]] = field(default_factory=list)
    reopened: list[str] = field(default_factory=list)
    canceled: list[str] = field(default_factory=list)
    warnings: list[Finding] = field(default_factory=list)


def _apply_label(
    cgus: dict[str, CguRecord],
    opened_now: set[str],
    utt_id: int,
    label: ActLabel,
    delta: _Delta,
    dialog_id: str | None = None,
) -> None:
    """Apply one label. All error checks happen before any mutation."""
    act = label.act
    if act is GroundingAct.NONE:
        return
    cgu_id = label.cgu_id
    assert cgu_id is not None  # model invariant
    record = cgus.get(cgu_id)

    if act is GroundingAct.INITIATE:
        if record is not None:
            raise DuplicateInitiate(cgu_id)
        cgus[cgu_id] = CguRecord(
            id=cgu_id,
            status=CguStatus.OPEN,
            members=((utt_id, act),),
        )
        opened_now.add(cgu_id)
        delta.opened.append(cgu_id)
        return

    if record is None:
        raise UnknownCgu(cgu_id)
    if record.status is CguStatus.CANCELED:
        raise ActOnCanceled(cgu_id)

    members = record.members + ((utt_id, act),)

    if record.status is CguStatus.OPEN:
        if act.is_acknowledging:
            # opened and closed sets of one report must stay disjoint
            if cgu_id in opened_now:
                raise SameUtteranceGrounding(cgu_id)
            degree = assign_degree(act, label.degree_override)
            cgus[cgu_id] = replace(
                record, status=CguStatus.GROUNDED, members=members, degree=degree
            )
            delta.closed.append((cgu_id, degree))
        elif act is GroundingAct.CANCEL:
            if record.prior_degree is not None:
                # canceling the reopening re-grounds with the stashed degree
                cgus[cgu_id] = replace(
                    record,
                    status=CguStatus.GROUNDED,
                    members=members,
                    degree=record.prior_degree,
                )
                delta.closed.append((cgu_id, record.prior_degree))
            else:
                cgus[cgu_id] = replace(
                    record, status=CguStatus.CANCELED, members=members, degree=None
                )
                delta.canceled.append(cgu_id)
        else:
            # Continue / Repeat / repair-family acts keep the CGU open
            cgus[cgu_id] = replace(record, members=members)
        return

    # record.status is GROUNDED
    if act.is_reopening:
        cgus[cgu_id] = replace(
            record,
            status=CguStatus.OPEN,
            members=members,
            degree=None,
            reopen_count=record.reopen_count + 1,
            prior_degree=record.degree,
        )
        delta.reopened.append(cgu_id)
    elif act is GroundingAct.CANCEL:
        # the proposer revokes an already-grounded CGU
        cgus[cgu_id] = replace(
            record, status=CguStatus.CANCELED, members=members, degree=None
        )
        delta.canceled.append(cgu_id)
    elif act.is_acknowledging:
        cgus[cgu_id] = replace(record, members=members)
        delta.warnings.append(
            Finding(
                Severity.WARNING,
                "ack-on-grounded",
                f"acknowledging act on already-grounded CGU {cgu_id!r}",
                dialog_id=dialog_id,
                utterance_id=utt_id,
                cgu_id=cgu_id,
            )
        )
    else:
        # Continue / Repeat after grounding: recorded, no state change
        cgus[cgu_id] = replace(record, members=members)


def apply(
    session: Session, utterance: Utterance, labels: Sequence[ActLabel]
) -> TransitionReport:
    """Consume the next utterance and its labels, in listed order.

    The batch is atomic: on error the session is left untouched and the
    raised :class:`EngineError` carries the utterance id.
    """
    if utterance.id != session.applied:
        exc = OutOfOrderUtterance(session.applied, utterance.id)
        exc.utterance_id = utterance.id
        raise exc

    staged = dict(session.cgus)
    opened_now: set[str] = set()
    delta = _Delta()
    try:
        for label in labels:
            if label.utterance_id != utterance.id:
                raise ModelError(
                    f"label for utterance {label.utterance_id} fed with "
                    f"utterance {utterance.id}"
                )
            _apply_label(
                staged, opened_now, utterance.id, label, delta, session.dialog_id
            )
    except EngineError as exc:
        exc.utterance_id = utterance.id
        raise

    report = TransitionReport(
        utterance_id=utterance.id,
        opened=tuple(delta.opened),
        closed=tuple(delta.closed),
        reopened=tuple(delta.reopened),
        canceled=tuple(delta.canceled),
        warnings=tuple(delta.warnings),
    )
    session.cgus = staged
    session.applied += 1
    session.event_log.append(report)
    return report


def replay(dialog: DialogAnnotation) -> Timeline:
    """Replay a whole dialog into per-utterance state rows plus the final session."""
    session = Session(dialog.dialog_id)
    by_utt = dialog.labels_by_utterance()
    rows: list[TimelineRow] = []
    for utterance in dialog.utterances:
        labels = by_utt.get(utterance.id, ())
        report = apply(session, utterance, labels)
        rows.append(
            TimelineRow(
                utterance=utterance,
                labels=labels,
                open_after=tuple(open_cgus(session)),
                closed_here=report.closed,
                reopened_here=report.reopened,
                canceled_here=report.canceled,
                warnings=report.warnings,
            )
        )
    return Timeline(dialog.dialog_id, tuple(rows), session)


def _check_override(label: ActLabel, dialog_id: str) -> list[Finding]:
    findings: list[Finding] = []
    if label.degree_override is None:
        return findings
    if label.degree_override is not Degree.AMBIGUOUS:
        findings.append(
            Finding(
                Severity.ERROR,
                "bad-degree-override",
                f"degree override must be Ambiguous, got "
                f"{label.degree_override.value}",
                dialog_id=dialog_id,
                utterance_id=label.utterance_id,
                cgu_id=label.cgu_id,
            )
        )
    elif not label.act.is_acknowledging:
        findings.append(
            Finding(
                Severity.ERROR,
                "bad-degree-override",
                f"degree override on non-acknowledging act "
                f"{label.act.canonical_name}",
                dialog_id=dialog_id,
                utterance_id=label.utterance_id,
                cgu_id=label.cgu_id,
            )
        )
    return findings


def validate(
    dialog: DialogAnnotation, threshold_factor: float = 1.0
) -> list[Finding]:
    """Check a dialog against the coding rules; findings are the output.

    Errors: acts on unknown or canceled CGUs, a CGU whose first act is not
    Initiate, duplicate initiations, out-of-order utterances, and illegal
    degree overrides. Warnings: a Continue by someone other than the CGU's
    initiator, an acknowledging act on an already-grounded CGU, derived
    table columns that disagree with replay, and groundings faster than the
    response-time profile deems feasible (timestamped dialogs only).
    Offending labels are skipped so one mistake does not cascade.
    """
    findings: list[Finding] = []
    by_utt = dialog.labels_by_utterance()
    cgus: dict[str, CguRecord] = {}
    seen_ids: set[str] = set()
    initiator_speaker: dict[str, str] = {}
    open_after: dict[int, tuple[str, ...]] = {}
    closed_at: dict[int, tuple[tuple[str, Degree], ...]] = {}

    expected = 0
    for utterance in dialog.utterances:
        if utterance.id != expected:
            findings.append(
                Finding(
                    Severity.ERROR,
                    "out-of-order",
                    f"expected utterance {expected}, got {utterance.id}",
                    dialog_id=dialog.dialog_id,
                    utterance_id=utterance.id,
                )
            )
        expected = utterance.id + 1

        delta = _Delta()
        opened_now: set[str] = set()
        for label in by_utt.get(utterance.id, ()):
            findings.extend(_check_override(label, dialog.dialog_id))
            clean = label
            if label.degree_override is not None and (
                label.degree_override is not Degree.AMBIGUOUS
                or not label.act.is_acknowledging
            ):
                clean = replace(label, degree_override=None)

            if (
                clean.act is GroundingAct.CONTINUE
                and clean.cgu_id in initiator_speaker
                and initiator_speaker[clean.cgu_id] != utterance.speaker
            ):
                findings.append(
                    Finding(
                        Severity.WARNING,
                        "cross-speaker-continue",
                        f"Continue on CGU {clean.cgu_id!r} by "
                        f"{utterance.speaker!r}, initiated by "
                        f"{initiator_speaker[clean.cgu_id]!r}",
                        dialog_id=dialog.dialog_id,
                        utterance_id=utterance.id,
                        cgu_id=clean.cgu_id,
                    )
                )

            try:
                _apply_label(
                    cgus, opened_now, utterance.id, clean, delta, dialog.dialog_id
                )
            except UnknownCgu:
                code = (
                    "unknown-cgu"
                    if clean.cgu_id in seen_ids
                    else "first-act-not-initiate"
                )
                message = (
                    f"act on unknown CGU {clean.cgu_id!r}"
                    if code == "unknown-cgu"
                    else f"first act of CGU {clean.cgu_id!r} is "
                    f"{clean.act.canonical_name}, not Initiate"
                )
                findings.append(
                    Finding(
                        Severity.ERROR,
                        code,
                        message,
                        dialog_id=dialog.dialog_id,
                        utterance_id=utterance.id,
                        cgu_id=clean.cgu_id,
                    )
                )
            except EngineError as exc:
                code = {
                    DuplicateInitiate: "duplicate-initiate",
                    ActOnCanceled: "act-on-canceled",
                    SameUtteranceGrounding: "same-utterance-grounding",
                }.get(type(exc), "engine-error")
                findings.append(
                    Finding(
                        Severity.ERROR,
                        code,
                        str(exc),
                        dialog_id=dialog.dialog_id,
                        utterance_id=utterance.id,
                        cgu_id=clean.cgu_id,
                    )
                )
            else:
                if clean.act is GroundingAct.INITIATE:
                    initiator_speaker[clean.cgu_id] = utterance.speaker
            if clean.cgu_id is not None:
                seen_ids.add(clean.cgu_id)

        findings.extend(delta.warnings)
        open_after[utterance.id] = tuple(
            cgu_id
            for cgu_id, record in cgus.items()
            if record.status is CguStatus.OPEN
        )
        closed_at[utterance.id] = tuple(delta.closed)

    findings.extend(_check_derived_rows(dialog, open_after, closed_at))
    findings.extend(_feasibility_findings(dialog, threshold_factor))
    return findings


def _check_derived_rows(
    dialog: DialogAnnotation,
    open_after: dict[int, tuple[str, ...]],
    closed_at: dict[int, tuple[tuple[str, Degree], ...]],
) -> list[Finding]:
    findings: list[Finding] = []
    for row in dialog.derived_rows:
        computed_open = open_after.get(row.utterance_id, ())
        computed_closed = closed_at.get(row.utterance_id, ())
        problems: list[str] = []
        if tuple(row.open_ids) != computed_open:
            problems.append(
                f"open column says {list(row.open_ids)}, replay says "
                f"{list(computed_open)}"
            )
        asserted = [(cgu_id, deg) for cgu_id, deg in row.closed]
        computed = list(computed_closed)
        if [c for c, _ in asserted] != [c for c, _ in computed]:
            problems.append(
                f"closed column says {[c for c, _ in asserted]}, replay says "
                f"{[c for c, _ in computed]}"
            )
        else:
            for (cgu_id, asserted_deg), (_, computed_deg) in zip(asserted, computed):
                if asserted_deg is not None and asserted_deg is not computed_deg:
                    problems.append(
                        f"degree of {cgu_id!r} recorded as {asserted_deg.value}, "
                        f"replay says {computed_deg.value}"
                    )
        if problems:
            findings.append(
                Finding(
                    Severity.WARNING,
                    "derived-column-mismatch",
                    "; ".join(problems),
                    dialog_id=dialog.dialog_id,
                    utterance_id=row.utterance_id,
                )
            )
    return findings


def _feasibility_findings(
    dialog: DialogAnnotation, threshold_factor: float
) -> list[Finding]:
    if not any(utt.ts is not None for utt in dialog.utterances):
        return []
    # imported here: analytics builds on this module
    from .analytics import MissingTimestamps, feasibility_check, response_time_profile

    try:
        profile = response_time_profile([dialog])
        return feasibility_check([dialog], profile, threshold_factor=threshold_factor)
    except (MissingTimestamps, EngineError):
        # a dialog that cannot replay already carries Error findings
        return []
