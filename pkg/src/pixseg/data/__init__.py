"""Record I/O, mask codec, dataset conversion, synthetic scenes and statistics."""

from .convert import ConversionReport, convert_multi_referring, parse_answer, parse_question
from .filters import FilterRules, filter_records
from .records import MuseRecord, Target, load_records, save_records, split_of, split_records
from .rle import RleMask, decode, encode, rle_roundtrip
from .stats import compute_statistics
from .synthetic import SceneConfig, SyntheticScene, gen_synthetic

__all__ = [
    "ConversionReport",
    "FilterRules",
    "MuseRecord",
    "RleMask",
    "SceneConfig",
    "SyntheticScene",
    "Target",
    "compute_statistics",
    "convert_multi_referring",
    "decode",
    "encode",
    "filter_records",
    "gen_synthetic",
    "load_records",
    "parse_answer",
    "parse_question",
    "rle_roundtrip",
    "save_records",
    "split_of",
    "split_records",
]
