"""Toolkit for localizing an unknown number of tampered regions in audio,
evaluating predictions with segment-level F1 at IoU thresholds, and
synthesizing splice-tampered fixtures with exact ground truth."""

from .annotations import (
    PredictionRecord,
    SegmentSet,
    TimeSegment,
    UtteranceRecord,
    fake_ratio,
    read_manifest,
    read_predictions,
    validate_segment_set,
    write_manifest,
    write_predictions,
)
from .audio import AudioBuffer, extract_window, load_audio, rms, save_wav
from .metrics import (
    MetricReport,
    count_accuracy,
    evaluate_dataset,
    greedy_match,
    iou_matrix,
    mean_iou,
    temporal_iou,
    utterance_metrics,
)
from .pipeline import (
    CandidateRegion,
    ConfidenceMap,
    LocalizeResult,
    PipelineParams,
    coarse_grid,
    coarse_scan,
    flag_windows,
    localize,
    merge_flagged,
    refine_region,
    run_baseline,
    run_pipeline,
)
from .scorers import (
    ConstantScorer,
    EnergyScorer,
    ExternalScorer,
    OracleConfig,
    OracleScorer,
    PrecomputedScorer,
    ScoreRequest,
    WindowScore,
    build_scorer,
    energy_score,
    oracle_score,
    score_windows,
)
from .splice import (
    SpliceConfig,
    SyntheticSource,
    WordToken,
    crossfade_splice,
    match_gain,
    select_words,
    synthesize_family,
    synthesize_variant,
    trim_silence,
)

__version__ = "0.1.0"
