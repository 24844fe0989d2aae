"""Corpus readers and writers.

The canonical on-disk form is JSONL, one utterance per line with its labels
embedded; reading back what was written reproduces the corpus exactly. The
TSV form mirrors the tabular annotation layout (one row per utterance with
derived open/closed columns); its derived columns are parsed as assertions
to be checked against replay, never as state. See ``docs/format.md``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .model import (
    ActLabel,
    CorpusTag,
    Degree,
    DerivedRow,
    DialogAnnotation,
    Flag,
    GroundworkError,
    ModelError,
    UnknownLabel,
    Utterance,
    parse_act,
)
from . import engine

FORMAT_VERSION = 1

TSV_COLUMNS = (
    "ts",
    "speaker",
    "text",
    "acts",
    "cgus",
    "open_cgus",
    "closed_cgus",
    "degree",
    "flags",
)


class BadTimestamp(GroundworkError):
    def __init__(self, stamp: str) -> None:
        super().__init__(f"malformed timestamp: {stamp!r}")
        self.stamp = stamp


class ParseError(GroundworkError):
    def __init__(self, line_no: int, reason: str) -> None:
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class InvariantViolation(GroundworkError):
    def __init__(self, dialog_id: str, reason: str) -> None:
        super().__init__(f"dialog {dialog_id!r}: {reason}")
        self.dialog_id = dialog_id
        self.reason = reason


class FileFormat(Enum):
    JSONL = "jsonl"
    TSV = "tsv"


@dataclass(frozen=True)
class CorpusFile:
    dialogs: tuple[DialogAnnotation, ...]
    source_path: str
    format: FileFormat

    def __post_init__(self) -> None:
        if not isinstance(self.dialogs, tuple):
            object.__setattr__(self, "dialogs", tuple(self.dialogs))
        seen: set[str] = set()
        for dialog in self.dialogs:
            if dialog.dialog_id in seen:
                raise InvariantViolation(dialog.dialog_id, "duplicate dialog id")
            seen.add(dialog.dialog_id)


_TS_TWO = re.compile(r"^\[(\d+):(\d{2})\]$")
_TS_THREE = re.compile(r"^\[(\d+):(\d{2}):(\d{2})\]$")


def parse_timestamp(stamp: str) -> int:
    """``[m+:ss]`` or ``[h:mm:ss]`` to elapsed seconds."""
    match = _TS_TWO.match(stamp.strip())
    if match:
        minutes, seconds = (int(g) for g in match.groups())
        if seconds >= 60:
            raise BadTimestamp(stamp)
        return minutes * 60 + seconds
    match = _TS_THREE.match(stamp.strip())
    if match:
        hours, minutes, seconds = (int(g) for g in match.groups())
        if minutes >= 60 or seconds >= 60:
            raise BadTimestamp(stamp)
        return hours * 3600 + minutes * 60 + seconds
    raise BadTimestamp(stamp)


def format_timestamp(seconds: float) -> str:
    """Seconds to ``[mm:ss]``, or ``[h:mm:ss]`` from one hour up."""
    total = int(round(seconds))
    if total < 0:
        raise BadTimestamp(str(seconds))
    if total < 3600:
        return f"[{total // 60:02d}:{total % 60:02d}]"
    return f"[{total // 3600}:{total % 3600 // 60:02d}:{total % 60:02d}]"


# --- JSONL ---------------------------------------------------------------


def _label_to_obj(label: ActLabel) -> dict:
    return {
        "cgu": label.cgu_id,
        "act": label.act.canonical_name,
        "degree": label.degree_override.value if label.degree_override else None,
        "link": label.link_cgu,
    }


def _utterance_line(dialog: DialogAnnotation, utt: Utterance, labels: Sequence[ActLabel]) -> dict:
    ts: float | int | None = utt.ts
    if isinstance(ts, float) and ts.is_integer():
        ts = int(ts)
    return {
        "format_version": FORMAT_VERSION,
        "dialog_id": dialog.dialog_id,
        "corpus": dialog.corpus_tag.value,
        "utt_id": utt.id,
        "speaker": utt.speaker,
        "ts": ts,
        "text": utt.text,
        "flags": sorted(flag.value for flag in utt.flags),
        "labels": [_label_to_obj(label) for label in labels],
    }


def dumps_jsonl(dialogs: Iterable[DialogAnnotation]) -> str:
    lines: list[str] = []
    for dialog in dialogs:
        by_utt = dialog.labels_by_utterance()
        for utt in dialog.utterances:
            obj = _utterance_line(dialog, utt, by_utt.get(utt.id, ()))
            lines.append(json.dumps(obj, ensure_ascii=False))
    return "".join(line + "\n" for line in lines)


def write_jsonl(corpus: CorpusFile | Iterable[DialogAnnotation], path: str | Path) -> None:
    dialogs = corpus.dialogs if isinstance(corpus, CorpusFile) else corpus
    Path(path).write_text(dumps_jsonl(dialogs), encoding="utf-8")


def _parse_label_obj(obj: dict, utt_id: int, line_no: int) -> ActLabel:
    if not isinstance(obj, dict):
        raise ParseError(line_no, "label entry must be an object")
    try:
        act = parse_act(str(obj["act"]))
    except KeyError:
        raise ParseError(line_no, "label missing 'act'") from None
    except UnknownLabel as exc:
        raise ParseError(line_no, str(exc)) from None
    degree = obj.get("degree")
    override = Degree.parse(degree) if degree is not None else None
    cgu = obj.get("cgu")
    link = obj.get("link")
    return ActLabel(
        utterance_id=utt_id,
        act=act,
        cgu_id=str(cgu) if cgu is not None else None,
        degree_override=override,
        link_cgu=str(link) if link is not None else None,
    )


def _parse_jsonl_line(obj: dict, line_no: int) -> tuple[str, CorpusTag, Utterance, list[ActLabel]]:
    version = obj.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ParseError(line_no, f"unsupported format_version {version!r}")
    try:
        dialog_id = str(obj["dialog_id"])
        utt_id = int(obj["utt_id"])
        speaker = str(obj["speaker"])
        text = str(obj["text"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(line_no, f"bad utterance object: {exc}") from None
    corpus_tag = CorpusTag.parse(str(obj.get("corpus", "other")))
    ts = obj.get("ts")
    if ts is not None and not isinstance(ts, (int, float)):
        raise ParseError(line_no, f"ts must be a number, got {ts!r}")
    flags = frozenset(Flag.parse(str(f)) for f in obj.get("flags", ()))
    utt = Utterance(id=utt_id, speaker=speaker, text=text, ts=ts, flags=flags)
    labels = [
        _parse_label_obj(lo, utt_id, line_no) for lo in obj.get("labels", ())
    ]
    return dialog_id, corpus_tag, utt, labels


def read_jsonl(path: str | Path) -> CorpusFile:
    """Read a canonical JSONL corpus, enforcing every model invariant."""
    dialogs: list[DialogAnnotation] = []
    current_id: str | None = None
    current_tag = CorpusTag.OTHER
    utterances: list[Utterance] = []
    labels: list[ActLabel] = []
    seen_dialogs: set[str] = set()

    def flush() -> None:
        nonlocal utterances, labels
        if current_id is None:
            return
        try:
            dialogs.append(
                DialogAnnotation(
                    dialog_id=current_id,
                    corpus_tag=current_tag,
                    utterances=tuple(utterances),
                    labels=tuple(labels),
                )
            )
        except ModelError as exc:
            raise InvariantViolation(current_id, str(exc)) from None
        utterances, labels = [], []

    with open(path, encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"bad JSON: {exc}") from None
            if not isinstance(obj, dict):
                raise ParseError(line_no, "each line must be a JSON object")
            try:
                dialog_id, tag, utt, utt_labels = _parse_jsonl_line(obj, line_no)
            except ModelError as exc:
                raise InvariantViolation(str(obj.get("dialog_id", "?")), str(exc)) from None
            if dialog_id != current_id:
                flush()
                if dialog_id in seen_dialogs:
                    raise InvariantViolation(dialog_id, "dialog lines are not contiguous")
                seen_dialogs.add(dialog_id)
                current_id, current_tag = dialog_id, tag
            if utt.id != len(utterances):
                raise InvariantViolation(
                    dialog_id,
                    f"utt_id {utt.id} at position {len(utterances)}; ids must be "
                    f"0-based and dense",
                )
            _check_override_invariant(dialog_id, utt_labels)
            utterances.append(utt)
            labels.extend(utt_labels)
    flush()
    return CorpusFile(tuple(dialogs), str(path), FileFormat.JSONL)


def _check_override_invariant(dialog_id: str, labels: Iterable[ActLabel]) -> None:
    for label in labels:
        if label.degree_override is None:
            continue
        if label.degree_override is not Degree.AMBIGUOUS:
            raise InvariantViolation(
                dialog_id, f"degree override must be Ambiguous, got {label.degree_override.value}"
            )
        if not label.act.is_acknowledging:
            raise InvariantViolation(
                dialog_id,
                f"degree override on non-acknowledging act {label.act.canonical_name}",
            )


# --- TSV -----------------------------------------------------------------


def _tsv_safe(text: str) -> str:
    return text.replace("\t", " ").replace("\n", " ").replace("\r", " ")


def _flags_cell(flags: frozenset[Flag]) -> str:
    return "".join(flag.symbol for flag in (Flag.REVISED, Flag.OVERLAP, Flag.MURMUR) if flag in flags)


def dumps_tsv(dialogs: Iterable[DialogAnnotation]) -> str:
    """Annotation-table layout; derived columns are recomputed via replay."""
    lines = ["\t".join(TSV_COLUMNS)]
    for dialog in dialogs:
        timeline = engine.replay(dialog)
        lines.append(f"# dialog_id={dialog.dialog_id}\tcorpus={dialog.corpus_tag.value}")
        for row in timeline.rows:
            utt = row.utterance
            acts = ";".join(label.act.canonical_name for label in row.labels)
            cgu_cells = []
            for label in row.labels:
                cell = label.cgu_id or ""
                if label.link_cgu:
                    cell = f"{cell}|{label.link_cgu}"
                cgu_cells.append(cell)
            lines.append(
                "\t".join(
                    (
                        format_timestamp(utt.ts) if utt.ts is not None else "",
                        _tsv_safe(utt.speaker),
                        _tsv_safe(utt.text),
                        acts,
                        ";".join(cgu_cells),
                        ";".join(row.open_after),
                        ";".join(cgu_id for cgu_id, _ in row.closed_here),
                        ";".join(degree.value for _, degree in row.closed_here),
                        _flags_cell(utt.flags),
                    )
                )
            )
    return "".join(line + "\n" for line in lines)


def write_tsv(corpus: CorpusFile | Iterable[DialogAnnotation], path: str | Path) -> None:
    dialogs = corpus.dialogs if isinstance(corpus, CorpusFile) else corpus
    Path(path).write_text(dumps_tsv(dialogs), encoding="utf-8")


_DIALOG_MARK = re.compile(r"^#\s*dialog_id=(?P<id>[^\t]+)(?:\tcorpus=(?P<corpus>.+))?$")


def _split_cells(cell: str) -> list[str]:
    return cell.split(";") if cell else []


def _parse_tsv_row(
    cells: list[str], utt_id: int, line_no: int
) -> tuple[Utterance, list[ActLabel], DerivedRow]:
    if len(cells) != len(TSV_COLUMNS):
        raise ParseError(line_no, f"expected {len(TSV_COLUMNS)} columns, got {len(cells)}")
    ts_cell, speaker, text, acts_cell, cgus_cell, open_cell, closed_cell, degree_cell, flags_cell = cells
    try:
        ts = parse_timestamp(ts_cell) if ts_cell else None
    except BadTimestamp as exc:
        raise ParseError(line_no, str(exc)) from None
    try:
        flags = frozenset(Flag.parse(ch) for ch in flags_cell)
    except ModelError as exc:
        raise ParseError(line_no, str(exc)) from None
    utt = Utterance(id=utt_id, speaker=speaker, text=text, ts=ts, flags=flags)

    act_names = _split_cells(acts_cell)
    cgu_cells = _split_cells(cgus_cell)
    cgu_cells += [""] * (len(act_names) - len(cgu_cells))
    labels: list[ActLabel] = []
    closed_ids = _split_cells(closed_cell)
    closed_degrees = _split_cells(degree_cell)
    ambiguous_ids = set()
    for cgu_id, degree_name in zip(closed_ids, closed_degrees):
        if degree_name and Degree.parse(degree_name) is Degree.AMBIGUOUS:
            ambiguous_ids.add(cgu_id)
    for name, cgu_cell in zip(act_names, cgu_cells):
        try:
            act = parse_act(name)
        except UnknownLabel as exc:
            raise ParseError(line_no, str(exc)) from None
        cgu_id, _, link = cgu_cell.partition("|")
        override = None
        if act.is_acknowledging and cgu_id in ambiguous_ids:
            override = Degree.AMBIGUOUS
        try:
            labels.append(
                ActLabel(
                    utterance_id=utt_id,
                    act=act,
                    cgu_id=cgu_id or None,
                    degree_override=override,
                    link_cgu=link or None,
                )
            )
        except ModelError as exc:
            raise ParseError(line_no, str(exc)) from None

    closed: list[tuple[str, Degree | None]] = []
    for index, cgu_id in enumerate(closed_ids):
        degree = None
        if index < len(closed_degrees) and closed_degrees[index]:
            try:
                degree = Degree.parse(closed_degrees[index])
            except ModelError as exc:
                raise ParseError(line_no, str(exc)) from None
        closed.append((cgu_id, degree))
    derived = DerivedRow(
        utterance_id=utt_id,
        open_ids=tuple(_split_cells(open_cell)),
        closed=tuple(closed),
    )
    return utt, labels, derived


def read_tsv(path: str | Path) -> CorpusFile:
    """Read the annotation-table layout.

    Derived columns (open/closed/degree) are stored on the dialog as
    assertions for the validator; the labels themselves are the state.
    """
    path = Path(path)
    dialogs: list[DialogAnnotation] = []
    current_id: str | None = None
    current_tag = CorpusTag.OTHER
    utterances: list[Utterance] = []
    labels: list[ActLabel] = []
    derived: list[DerivedRow] = []
    header_seen = False

    def flush() -> None:
        nonlocal utterances, labels, derived
        if current_id is None or not utterances:
            utterances, labels, derived = [], [], []
            return
        try:
            dialogs.append(
                DialogAnnotation(
                    dialog_id=current_id,
                    corpus_tag=current_tag,
                    utterances=tuple(utterances),
                    labels=tuple(labels),
                    derived_rows=tuple(derived),
                )
            )
        except ModelError as exc:
            raise InvariantViolation(current_id, str(exc)) from None
        utterances, labels, derived = [], [], []

    with open(path, encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            mark = _DIALOG_MARK.match(line)
            if mark:
                flush()
                current_id = mark.group("id").strip()
                corpus_text = mark.group("corpus")
                current_tag = (
                    CorpusTag.parse(corpus_text) if corpus_text else CorpusTag.OTHER
                )
                continue
            cells = line.split("\t")
            if not header_seen:
                if [c.strip() for c in cells] != list(TSV_COLUMNS):
                    raise ParseError(line_no, "missing or malformed header row")
                header_seen = True
                continue
            if current_id is None:
                current_id = path.stem
            utt, utt_labels, derived_row = _parse_tsv_row(cells, len(utterances), line_no)
            _check_override_invariant(current_id, utt_labels)
            utterances.append(utt)
            labels.extend(utt_labels)
            derived.append(derived_row)
    flush()
    return CorpusFile(tuple(dialogs), str(path), FileFormat.TSV)


def read_corpus(path: str | Path, fmt: FileFormat | None = None) -> CorpusFile:
    """Read either format; sniffed from the extension unless forced."""
    if fmt is None:
        fmt = FileFormat.TSV if str(path).endswith(".tsv") else FileFormat.JSONL
    return read_tsv(path) if fmt is FileFormat.TSV else read_jsonl(path)


# --- timeline export ------------------------------------------------------


def _finding_to_obj(finding: engine.Finding) -> dict:
    return {
        "severity": finding.severity.value,
        "code": finding.code,
        "message": finding.message,
        "utt_id": finding.utterance_id,
        "cgu": finding.cgu_id,
    }


def timeline_row_to_obj(row: engine.TimelineRow) -> dict:
    utt = row.utterance
    ts: float | int | None = utt.ts
    if isinstance(ts, float) and ts.is_integer():
        ts = int(ts)
    return {
        "utt_id": utt.id,
        "speaker": utt.speaker,
        "ts": ts,
        "text": utt.text,
        "labels": [_label_to_obj(label) for label in row.labels],
        "open_after": list(row.open_after),
        "closed_here": [
            {"cgu": cgu_id, "degree": degree.value} for cgu_id, degree in row.closed_here
        ],
        "reopened_here": list(row.reopened_here),
        "canceled_here": list(row.canceled_here),
        "warnings": [_finding_to_obj(w) for w in row.warnings],
    }


def dumps_timeline_jsonl(timeline: engine.Timeline) -> str:
    return "".join(
        json.dumps(timeline_row_to_obj(row), ensure_ascii=False) + "\n"
        for row in timeline.rows
    )


def write_timeline_jsonl(timeline: engine.Timeline, path: str | Path) -> None:
    Path(path).write_text(dumps_timeline_jsonl(timeline), encoding="utf-8")
