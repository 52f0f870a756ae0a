mod calibration;
mod combine;
mod scoring;

pub use calibration::{
    calibration_bins, confidence_records, nce, CalibrationBin, CalibrationReport, ConfidenceRecord,
    NCE_EPSILON,
};
pub use combine::{
    combine_corpus, combine_weighted, consensus, consensus_corpus, format_consensus, parse_consensus,
    simplex_grid, tune_weights,
    ConsensusOutput, TunedWeights,
};
pub use scoring::{score, score_consensus, ScoreReport, Scorer};
