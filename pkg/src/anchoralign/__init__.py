"""Anchor-based CTC forced alignment of long audio against imperfect text.

The package aligns frame-wise character log-posteriors (from any CTC
acoustic model) to a transcript by repeatedly force-aligning small windows,
accepting utterance batches whose trailing score clears a threshold, and
anchoring the next window after the last accepted frame. Scores double as
per-utterance quality labels for downstream filtering.
"""

from .aligner import (
    Anchor,
    AlignmentRun,
    AlignParams,
    WindowResult,
    align_file,
    align_window,
    frames_to_seconds,
)
from .errors import (
    AnchorAlignError,
    ConfigError,
    EmptyTextError,
    FrameMapError,
    ManifestError,
    NoPathError,
    NoSpeechError,
    PosteriorFormatError,
    SpeechRegionsError,
    VocabFormatError,
    WindowTooSmallError,
)
from .filters import (
    FilterReport,
    filter_absolute,
    filter_chebyshev,
    filter_normalized,
    recovery_stats,
    score_histogram,
    write_filter_report_csv,
    write_histogram_csv,
    write_recovery_csv,
)
from .posterior_io import (
    DEFAULT_FRAME_DURATION_S,
    FrameMap,
    PosteriorMatrix,
    SpeechRegions,
    Vocab,
    apply_speech_regions,
    identity_frame_map,
    load_posteriors,
    load_regions,
    load_vocab,
    map_frames_back,
    save_posteriors,
    save_regions,
    save_vocab,
)
from .synthdata import (
    SynthSpec,
    SynthUtterance,
    default_spanish_vocab,
    load_ground_truth,
    oracle_best_path,
    parse_manifest,
    random_window,
    synth_posteriors,
    write_ground_truth,
    write_manifest,
)
from .textprep import (
    MAX_WORDS_PER_UTT,
    TokenSequence,
    Utterance,
    build_token_sequence,
    estimate_time_refs,
    load_utterances,
    normalize_text,
    read_transcript,
    split_utterances,
)
from .trellis import (
    FRAGMENT_FRAMES,
    SCORE_REF_S,
    SHORT_PENALTY,
    CharAlignment,
    Trellis,
    UtteranceAlignment,
    apply_short_penalty,
    backtrack,
    compute_trellis,
    fragment_scores,
    normalize_score,
    segment_score,
)

__version__ = "0.1.0"

__all__ = [
    "Anchor",
    "AlignmentRun",
    "AlignParams",
    "WindowResult",
    "align_file",
    "align_window",
    "frames_to_seconds",
    "AnchorAlignError",
    "ConfigError",
    "EmptyTextError",
    "FrameMapError",
    "ManifestError",
    "NoPathError",
    "NoSpeechError",
    "PosteriorFormatError",
    "SpeechRegionsError",
    "VocabFormatError",
    "WindowTooSmallError",
    "FilterReport",
    "filter_absolute",
    "filter_chebyshev",
    "filter_normalized",
    "recovery_stats",
    "score_histogram",
    "write_filter_report_csv",
    "write_histogram_csv",
    "write_recovery_csv",
    "DEFAULT_FRAME_DURATION_S",
    "FrameMap",
    "PosteriorMatrix",
    "SpeechRegions",
    "Vocab",
    "apply_speech_regions",
    "identity_frame_map",
    "load_posteriors",
    "load_regions",
    "load_vocab",
    "map_frames_back",
    "save_posteriors",
    "save_regions",
    "save_vocab",
    "SynthSpec",
    "SynthUtterance",
    "default_spanish_vocab",
    "load_ground_truth",
    "oracle_best_path",
    "parse_manifest",
    "random_window",
    "synth_posteriors",
    "write_ground_truth",
    "write_manifest",
    "MAX_WORDS_PER_UTT",
    "TokenSequence",
    "Utterance",
    "build_token_sequence",
    "estimate_time_refs",
    "load_utterances",
    "normalize_text",
    "read_transcript",
    "split_utterances",
    "FRAGMENT_FRAMES",
    "SCORE_REF_S",
    "SHORT_PENALTY",
    "CharAlignment",
    "Trellis",
    "UtteranceAlignment",
    "apply_short_penalty",
    "backtrack",
    "compute_trellis",
    "fragment_scores",
    "normalize_score",
    "segment_score",
    "__version__",
]
