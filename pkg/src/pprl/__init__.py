"""Two-party privacy-preserving record linkage.

Banded MinHash signatures decide near-matches; a commutative-blinding set
intersection lets the parties compare signatures without disclosing them.
See README.md for the protocol walk-through and CLI usage.
"""

from .analysis import (
    AccuracyReport,
    CurveSpec,
    TuneResult,
    estimate_jaccard_interval,
    evaluate_accuracy,
    match_probability,
    tune_parameters,
)
from .config import LinkageConfig, Variant, load_config
from .lsh import BandSignatureList, LshParams, jaccard, lsh_match, lsh_record, shingles
from .protocol import (
    MatchCount,
    MatchEntry,
    MatchResult,
    ReceiverOutcome,
    run_loopback,
    run_receiver,
    run_sender,
)
from .records import Dataset, FieldGroupSpec, Record

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "BandSignatureList",
    "CurveSpec",
    "Dataset",
    "FieldGroupSpec",
    "LinkageConfig",
    "LshParams",
    "MatchCount",
    "MatchEntry",
    "MatchResult",
    "ReceiverOutcome",
    "Record",
    "TuneResult",
    "Variant",
    "estimate_jaccard_interval",
    "evaluate_accuracy",
    "jaccard",
    "load_config",
    "lsh_match",
    "lsh_record",
    "match_probability",
    "run_loopback",
    "run_receiver",
    "run_sender",
    "shingles",
    "tune_parameters",
    "__version__",
]
