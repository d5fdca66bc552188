"""Screenplay conversation threading toolkit.

Parse screenplays into sentence-level utterances, predict who replies to
whom, recover conversation threads, score predictions against gold
annotations, and run corpus analytics. All heavy lifting happens in the
native extension; data crosses the boundary in the toolkit's interchange
formats (canonical corpus JSONL, gold-link JSONL, plain dicts).
"""

from screenthreads._core import (
    DataError,
    Error,
    NotAForest,
    ScenesMismatch,
    TooFewUnits,
    UnparsableDocument,
    UtteranceSetMismatch,
    agreement,
    analyze_era,
    analyze_floor,
    annotations_to_gold,
    evaluate,
    links_to_partition,
    parse,
    predict,
    previous_baseline,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "Error",
    "NotAForest",
    "ScenesMismatch",
    "TooFewUnits",
    "UnparsableDocument",
    "UtteranceSetMismatch",
    "agreement",
    "analyze_era",
    "analyze_floor",
    "annotations_to_gold",
    "evaluate",
    "links_to_partition",
    "parse",
    "predict",
    "previous_baseline",
    "train",
]
