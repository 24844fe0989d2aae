from __future__ import annotations

from pathlib import Path

import pytest

from groundwork import corpus_io
from groundwork.model import DialogAnnotation

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def one_stone() -> DialogAnnotation:
    """Single CGU: initiate, request-repair, repair, explicit ack."""
    return corpus_io.read_jsonl(FIXTURES / "one_stone.jsonl").dialogs[0]


@pytest.fixture
def bed_chair() -> DialogAnnotation:
    """Two CGUs; the first is reopened and then re-grounded by a Cancel."""
    return corpus_io.read_jsonl(FIXTURES / "bed_chair.jsonl").dialogs[0]


@pytest.fixture
def lamp() -> DialogAnnotation:
    """Timestamped three-utterance dialog with two open CGUs at the end."""
    return corpus_io.read_jsonl(FIXTURES / "lamp.jsonl").dialogs[0]
