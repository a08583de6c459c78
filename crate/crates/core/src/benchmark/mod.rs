//! Benchmark protocol, baselines, metrics and synthetic data.

pub mod baselines;
pub mod harness;
pub mod metrics;
pub mod synthetic;

pub use baselines::{baseline_locf, baseline_mean};
pub use harness::{
    cell_key, compare_to_reference, fingerprint, mask_test_split, run_benchmark, score_split, split_samples,
    BenchmarkConfig, BenchmarkReport, CellReport, Dataset, FittedMethod, MaskedSplit, Method,
    ReferenceDeviation, ReferenceResult, ReportMetadata, REFERENCE_RESULTS,
};
pub use metrics::{compute_metrics, Metrics};
pub use synthetic::{generate_synthetic, LatentStructure, MarginalFamily, SyntheticData, SyntheticSpec};
