"""Grounding-act annotation toolkit.

Models dialogs as sequences of labeled utterances, replays the labels into
common-grounding-unit lifecycles with degrees of grounding, computes corpus
statistics and inter-rater reliability, prepares classifier encodings, and
hosts live annotation sessions.
"""

from .model import (
    ActLabel,
    CguRecord,
    CguStatus,
    CorpusTag,
    Degree,
    DerivedRow,
    DialogAnnotation,
    EmptyInput,
    Flag,
    GroundingAct,
    GroundworkError,
    ModelError,
    UnknownLabel,
    Utterance,
    parse_act,
)
from .engine import (
    ActOnCanceled,
    DuplicateInitiate,
    EngineError,
    Finding,
    NotAcknowledging,
    OutOfOrderUtterance,
    SameUtteranceGrounding,
    Session,
    Severity,
    Timeline,
    TimelineRow,
    TransitionReport,
    UnknownCgu,
    apply,
    assign_degree,
    canceled_cgus,
    grounded_cgus,
    open_cgus,
    replay,
    validate,
)
from .corpus_io import (
    BadTimestamp,
    CorpusFile,
    FileFormat,
    InvariantViolation,
    ParseError,
    format_timestamp,
    parse_timestamp,
    read_corpus,
    read_jsonl,
    read_tsv,
    write_jsonl,
    write_timeline_jsonl,
    write_tsv,
)
from .analytics import (
    ActHistogram,
    LengthMismatch,
    MissingTimestamps,
    TrajectoryStats,
    act_histogram,
    cohen_kappa,
    feasibility_check,
    response_time_profile,
    trajectory_stats,
)
from .dataset import (
    EncodedInstance,
    FocalNotInHistory,
    build_instances,
    class_weights,
    encode_instance,
    stratified_split,
)
from .service import create_app

__version__ = "0.1.0"
