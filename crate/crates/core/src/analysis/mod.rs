//! Diagnostic experiments on top of the filtering pipeline.

mod curve;
mod dsir;
mod mixture;
mod overlap;
mod subsample;

pub use curve::{prior_curve, write_curve_csv, CurveRow};
pub use dsir::{
    block_bucket_counts, dsir_features, dsir_select, dsir_weight, for_each_ngram, BucketHash,
    FeatureConfig, FeatureDistribution,
};
pub use mixture::{mixture_sweep, select_minority, write_mixture_csv, MixtureRow};
pub use overlap::{
    overlap_ratio, overlap_vs_external, read_external_scores, trim_external, write_overlap_csv,
    ExternalScores, OverlapRow,
};
pub use subsample::{
    subsample_consistency, write_subsample_csv, write_subsample_timing_csv, SubsampleRow,
};

/// Shortest decimal form that parses back to the same value.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x}")
}
