"""HTTP service hosting live annotation sessions.

Each session is one dialog being labeled utterance by utterance. Durability
comes from an append-only event log per session (one JSON line per accepted
label batch, written and synced before the response goes out); rebuilding a
session replays its log, so a restarted server reports exactly the state it
held before the crash. Revising a past utterance truncates the log at that
utterance, replays, and applies the new labels, which keeps the engine free
of backward transitions.

Per-session operations are serialized through a lock; distinct sessions
proceed concurrently.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import analytics, corpus_io, engine
from .model import (
    ActLabel,
    CorpusTag,
    Degree,
    DialogAnnotation,
    Flag,
    ModelError,
    UnknownLabel,
    Utterance,
    parse_act,
)

DEFAULT_PORT = 7340


class LabelIn(BaseModel):
    act: str
    cgu: str | None = None
    degree: str | None = None
    link: str | None = None


class UtteranceIn(BaseModel):
    speaker: str
    text: str
    ts: float | None = None
    flags: list[str] = Field(default_factory=list)


class TranscriptIn(BaseModel):
    dialog_id: str | None = None
    corpus: str = "other"
    utterances: list[UtteranceIn]


class LabelBatchIn(BaseModel):
    utt_id: int
    labels: list[LabelIn]


class RevisionIn(BaseModel):
    labels: list[LabelIn]


def _to_label(spec: LabelIn, utt_id: int) -> ActLabel:
    try:
        act = parse_act(spec.act)
        override = Degree.parse(spec.degree) if spec.degree is not None else None
        return ActLabel(
            utterance_id=utt_id,
            act=act,
            cgu_id=spec.cgu,
            degree_override=override,
            link_cgu=spec.link,
        )
    except (UnknownLabel, ModelError) as exc:
        raise HTTPException(status_code=422, detail={"errors": [str(exc)]}) from None


def _to_utterance(spec: UtteranceIn, utt_id: int, revised: bool = False) -> Utterance:
    try:
        flags = frozenset(Flag.parse(f) for f in spec.flags)
        if revised:
            flags |= {Flag.REVISED}
        return Utterance(
            id=utt_id, speaker=spec.speaker, text=spec.text, ts=spec.ts, flags=flags
        )
    except ModelError as exc:
        raise HTTPException(status_code=422, detail={"errors": [str(exc)]}) from None


@dataclass
class AnnotationSession:
    session_id: str
    dialog: DialogAnnotation
    engine_session: engine.Session
    log_path: Path
    lock: threading.Lock = field(default_factory=threading.Lock)


def _label_obj(label: ActLabel) -> dict:
    return {
        "cgu": label.cgu_id,
        "act": label.act.canonical_name,
        "degree": label.degree_override.value if label.degree_override else None,
        "link": label.link_cgu,
    }


def _report_obj(report: engine.TransitionReport) -> dict:
    return {
        "utt_id": report.utterance_id,
        "opened": list(report.opened),
        "closed": [
            {"cgu": cgu_id, "degree": degree.value} for cgu_id, degree in report.closed
        ],
        "reopened": list(report.reopened),
        "canceled": list(report.canceled),
        "warnings": [
            {"code": w.code, "message": w.message, "cgu": w.cgu_id}
            for w in report.warnings
        ],
    }


def _state_obj(session: AnnotationSession) -> dict:
    eng = session.engine_session
    utterances = {utt.id: utt for utt in session.dialog.utterances}
    open_entries = []
    for cgu_id in engine.open_cgus(eng):
        record = eng.cgus[cgu_id]
        first_utt = record.members[0][0]
        open_entries.append(
            {
                "cgu": cgu_id,
                "initiated_at": first_utt,
                "initiating_text": utterances[first_utt].text,
                "member_count": len(record.members),
            }
        )
    return {
        "applied": eng.applied,
        "utterance_count": len(session.dialog.utterances),
        "open": open_entries,
        "grounded": [
            {"cgu": cgu_id, "degree": degree.value}
            for cgu_id, degree in engine.grounded_cgus(eng)
        ],
        "canceled": engine.canceled_cgus(eng),
    }


class SessionStore:
    """Sessions on disk under ``root``, one append-only log per session."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, AnnotationSession] = {}
        self._registry_lock = threading.Lock()
        for log_path in sorted(self.root.glob("*.jsonl")):
            session = self._rebuild(log_path)
            if session is not None:
                self._sessions[session.session_id] = session

    # -- persistence -------------------------------------------------------

    def _append_event(self, session: AnnotationSession, event: dict) -> None:
        line = json.dumps(event, ensure_ascii=False) + "\n"
        with open(session.log_path, "a", encoding="utf-8") as handle:
            handle.write(line)
            handle.flush()
            os.fsync(handle.fileno())

    def _read_events(self, log_path: Path) -> list[dict]:
        events: list[dict] = []
        with open(log_path, encoding="utf-8") as handle:
            for raw in handle:
                if not raw.strip():
                    continue
                try:
                    events.append(json.loads(raw))
                except json.JSONDecodeError:
                    break  # torn final write; everything before it is intact
        return events

    def _rebuild(self, log_path: Path) -> AnnotationSession | None:
        events = self._read_events(log_path)
        if not events or events[0].get("event") != "create":
            return None
        return self._from_events(events, log_path, strict=False)

    def _from_events(
        self, events: list[dict], log_path: Path, strict: bool = True
    ) -> AnnotationSession:
        head = events[0]
        session_id = head["session_id"]
        utterances = [
            _to_utterance(UtteranceIn(**u), i) for i, u in enumerate(head["utterances"])
        ]
        dialog = DialogAnnotation(
            dialog_id=head.get("dialog_id") or session_id,
            corpus_tag=CorpusTag.parse(head.get("corpus", "other")),
            utterances=tuple(utterances),
        )
        session = AnnotationSession(
            session_id=session_id,
            dialog=dialog,
            engine_session=engine.Session(dialog.dialog_id),
            log_path=log_path,
        )
        for event in events[1:]:
            if event.get("event") != "labels":
                continue
            utt_id = event["utt_id"]
            try:
                labels = [_to_label(LabelIn(**lo), utt_id) for lo in event["labels"]]
                self._apply_to_memory(
                    session, utt_id, labels, bool(event.get("revised"))
                )
            except Exception:
                if strict:
                    raise
                break  # a torn tail must not take the whole session down
        return session

    # -- state transitions ---------------------------------------------------

    def _apply_to_memory(
        self,
        session: AnnotationSession,
        utt_id: int,
        labels: list[ActLabel],
        revised: bool,
    ) -> engine.TransitionReport:
        utterance = session.dialog.utterances[utt_id]
        if revised and Flag.REVISED not in utterance.flags:
            utterance = replace(utterance, flags=utterance.flags | {Flag.REVISED})
        report = engine.apply(session.engine_session, utterance, labels)
        new_utterances = list(session.dialog.utterances)
        new_utterances[utt_id] = utterance
        session.dialog = replace(
            session.dialog,
            utterances=tuple(new_utterances),
            labels=session.dialog.labels + tuple(labels),
        )
        return report

    def create(self, transcript: TranscriptIn) -> AnnotationSession:
        session_id = uuid.uuid4().hex[:12]
        utterances = [
            _to_utterance(u, i) for i, u in enumerate(transcript.utterances)
        ]
        try:
            dialog = DialogAnnotation(
                dialog_id=transcript.dialog_id or session_id,
                corpus_tag=CorpusTag.parse(transcript.corpus),
                utterances=tuple(utterances),
            )
        except ModelError as exc:
            raise HTTPException(status_code=422, detail={"errors": [str(exc)]}) from None
        session = AnnotationSession(
            session_id=session_id,
            dialog=dialog,
            engine_session=engine.Session(dialog.dialog_id),
            log_path=self.root / f"{session_id}.jsonl",
        )
        self._append_event(
            session,
            {
                "event": "create",
                "session_id": session_id,
                "dialog_id": dialog.dialog_id,
                "corpus": dialog.corpus_tag.value,
                "utterances": [
                    {
                        "speaker": u.speaker,
                        "text": u.text,
                        "ts": u.ts,
                        "flags": sorted(f.value for f in u.flags),
                    }
                    for u in dialog.utterances
                ],
            },
        )
        with self._registry_lock:
            self._sessions[session_id] = session
        return session

    def get(self, session_id: str) -> AnnotationSession:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    def post_labels(
        self, session: AnnotationSession, utt_id: int, label_specs: list[LabelIn]
    ) -> engine.TransitionReport:
        with session.lock:
            if utt_id != session.engine_session.applied:
                raise HTTPException(
                    status_code=409,
                    detail={
                        "errors": [
                            f"expected utterance {session.engine_session.applied}, "
                            f"got {utt_id}"
                        ]
                    },
                )
            if utt_id >= len(session.dialog.utterances):
                raise HTTPException(
                    status_code=409,
                    detail={"errors": ["transcript exhausted"]},
                )
            labels = [_to_label(spec, utt_id) for spec in label_specs]
            staged = [
                {"cgu": lo.cgu, "act": lo.act, "degree": lo.degree, "link": lo.link}
                for lo in label_specs
            ]
            # write-ahead: the batch must be durable before we answer
            self._append_event(
                session, {"event": "labels", "utt_id": utt_id, "labels": staged}
            )
            try:
                return self._apply_to_memory(session, utt_id, labels, revised=False)
            except engine.EngineError as exc:
                self._truncate_log(session, utt_id)
                raise HTTPException(
                    status_code=409, detail={"errors": [str(exc)]}
                ) from None

    def revise_labels(
        self, session: AnnotationSession, utt_id: int, label_specs: list[LabelIn]
    ) -> engine.TransitionReport:
        with session.lock:
            if utt_id >= session.engine_session.applied:
                raise HTTPException(
                    status_code=409,
                    detail={"errors": [f"utterance {utt_id} has no labels to revise"]},
                )
            [_to_label(spec, utt_id) for spec in label_specs]  # 422 on bad specs
            events = self._read_events(session.log_path)
            kept = [events[0]] + [
                e
                for e in events[1:]
                if e.get("event") == "labels" and e["utt_id"] < utt_id
            ]
            staged = [
                {"cgu": lo.cgu, "act": lo.act, "degree": lo.degree, "link": lo.link}
                for lo in label_specs
            ]
            event = {
                "event": "labels",
                "utt_id": utt_id,
                "labels": staged,
                "revised": True,
            }
            # verify in memory before any disk change
            try:
                rebuilt = self._from_events(kept + [event], session.log_path)
            except engine.EngineError as exc:
                raise HTTPException(
                    status_code=409, detail={"errors": [str(exc)]}
                ) from None
            last_report = rebuilt.engine_session.event_log[-1]
            self._rewrite_log(session, kept + [event])
            session.dialog = rebuilt.dialog
            session.engine_session = rebuilt.engine_session
            return last_report

    def _truncate_log(self, session: AnnotationSession, utt_id: int) -> None:
        """Drop label events from ``utt_id`` on."""
        events = self._read_events(session.log_path)
        kept = [events[0]] + [
            e
            for e in events[1:]
            if e.get("event") == "labels" and e["utt_id"] < utt_id
        ]
        self._rewrite_log(session, kept)

    def _rewrite_log(self, session: AnnotationSession, events: list[dict]) -> None:
        tmp = session.log_path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as handle:
            for event in events:
                handle.write(json.dumps(event, ensure_ascii=False) + "\n")
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, session.log_path)


def _labeled_prefix(session: AnnotationSession) -> DialogAnnotation:
    """The dialog restricted to utterances that have been labeled so far."""
    applied = session.engine_session.applied
    return DialogAnnotation(
        dialog_id=session.dialog.dialog_id,
        corpus_tag=session.dialog.corpus_tag,
        utterances=session.dialog.utterances[:applied],
        labels=session.dialog.labels,
    )


def create_app(
    data_dir: str | Path, static_dir: str | Path | None = None
) -> FastAPI:
    """Build the service; state lives under ``data_dir``."""
    data_dir = Path(data_dir)
    store = SessionStore(data_dir / "sessions")
    app = FastAPI(title="groundwork annotation service")
    app.state.store = store

    @app.post("/sessions")
    def create_session(transcript: TranscriptIn) -> dict:
        session = store.create(transcript)
        return {
            "session_id": session.session_id,
            "dialog_id": session.dialog.dialog_id,
            "utterance_count": len(session.dialog.utterances),
            "state": _state_obj(session),
        }

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str) -> dict:
        session = store.get(session_id)
        with session.lock:
            return {
                "session_id": session.session_id,
                "dialog_id": session.dialog.dialog_id,
                "utterances": [
                    {
                        "utt_id": u.id,
                        "speaker": u.speaker,
                        "text": u.text,
                        "ts": u.ts,
                        "flags": sorted(f.value for f in u.flags),
                    }
                    for u in session.dialog.utterances
                ],
                "state": _state_obj(session),
            }

    @app.post("/sessions/{session_id}/labels")
    def post_labels(session_id: str, batch: LabelBatchIn) -> dict:
        session = store.get(session_id)
        report = store.post_labels(session, batch.utt_id, batch.labels)
        with session.lock:
            return {"report": _report_obj(report), "state": _state_obj(session)}

    @app.put("/sessions/{session_id}/labels/{utt_id}")
    def revise_labels(session_id: str, utt_id: int, revision: RevisionIn) -> dict:
        session = store.get(session_id)
        report = store.revise_labels(session, utt_id, revision.labels)
        with session.lock:
            return {"report": _report_obj(report), "state": _state_obj(session)}

    @app.get("/sessions/{session_id}/timeline")
    def timeline(session_id: str) -> dict:
        session = store.get(session_id)
        with session.lock:
            prefix = _labeled_prefix(session)
            rows = engine.replay(prefix).rows
            return {
                "dialog_id": session.dialog.dialog_id,
                "rows": [corpus_io.timeline_row_to_obj(row) for row in rows],
                "state": _state_obj(session),
            }

    @app.get("/sessions/{session_id}/export")
    def export(session_id: str, format: str = Query("jsonl")) -> PlainTextResponse:
        session = store.get(session_id)
        with session.lock:
            prefix = _labeled_prefix(session)
        if format == "jsonl":
            return PlainTextResponse(
                corpus_io.dumps_jsonl([prefix]), media_type="application/x-ndjson"
            )
        if format == "tsv":
            return PlainTextResponse(
                corpus_io.dumps_tsv([prefix]), media_type="text/tab-separated-values"
            )
        raise HTTPException(status_code=422, detail={"errors": [f"unknown format {format!r}"]})

    @app.get("/corpora/{name}/stats")
    def corpus_stats(name: str) -> dict:
        corpora_dir = data_dir / "corpora"
        for suffix in (".jsonl", ".tsv"):
            path = corpora_dir / f"{name}{suffix}"
            if path.exists():
                corpus = corpus_io.read_corpus(path)
                histogram = analytics.act_histogram(corpus)
                trajectory = analytics.trajectory_stats(corpus)
                return {
                    "acts": {
                        "counts": {
                            act.canonical_name: count
                            for act, count in histogram.counts.items()
                        },
                        "total": histogram.total_acts,
                        "percentages": {
                            act.canonical_name: pct
                            for act, pct in histogram.percentages.items()
                        },
                    },
                    "trajectory": {
                        "grounded_in_next": trajectory.grounded_in_next_count,
                        "max_span": trajectory.max_span,
                        "revisits": trajectory.revisit_count,
                        "revisit_gaps_seconds": trajectory.revisit_gaps_seconds,
                        "ambiguous": trajectory.ambiguous_count,
                        "flags": {
                            flag.value: count
                            for flag, count in trajectory.flag_census.items()
                        },
                    },
                }
        raise HTTPException(status_code=404, detail=f"no corpus named {name!r}")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
