//! Evaluation protocol: split samples 80/20, fit every method on the
//! training split, hide a fraction of the test observations, impute and
//! score the hidden cells.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::baselines::{baseline_locf, baseline_mean};
use super::metrics::{compute_metrics, Metrics};
use super::synthetic::{generate_synthetic, SyntheticSpec};
use crate::copula::EmConfig;
use crate::data::{mask_mcar, resolve_specs, unfold, ColumnSpec, HeldOutCell, Layout, MtsTensor, StandardizationParams};
use crate::error::{Error, Result};
use crate::impute::{fit, TgcModel};
use crate::scalar::Scalar;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Copula model on the per-sample unfolding.
    Tgc,
    /// Copula model on the timewise `(N*T) x F` unfolding.
    TgcU,
    Locf,
    Mean,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Tgc => "tgc",
            Method::TgcU => "tgc-u",
            Method::Locf => "locf",
            Method::Mean => "mean",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tgc" => Ok(Method::Tgc),
            "tgc-u" | "tgcu" | "tgc_u" => Ok(Method::TgcU),
            "locf" => Ok(Method::Locf),
            "mean" => Ok(Method::Mean),
            other => Err(Error::Spec(format!("unknown method {other:?}"))),
        }
    }
}

/// A method after fitting on the training split.
#[derive(Debug, Clone)]
pub enum FittedMethod<S> {
    Copula(Box<TgcModel<S>>),
    Locf { feature_means: Vec<S> },
    Mean { feature_means: Vec<S> },
}

impl<S: Scalar> FittedMethod<S> {
    pub fn fit(
        method: Method,
        train: &MtsTensor<S>,
        specs: &[ColumnSpec],
        em: &EmConfig,
    ) -> Result<Self> {
        let feature_means = || StandardizationParams::fit(&unfold(train)).mean;
        Ok(match method {
            Method::Tgc => Self::Copula(Box::new(fit(train, specs, em, Layout::PatientRows)?)),
            Method::TgcU => Self::Copula(Box::new(fit(train, specs, em, Layout::TimeRows)?)),
            Method::Locf => Self::Locf {
                feature_means: feature_means(),
            },
            Method::Mean => Self::Mean {
                feature_means: feature_means(),
            },
        })
    }

    pub fn impute(&self, x: &MtsTensor<S>) -> Result<MtsTensor<S>> {
        match self {
            Self::Copula(model) => Ok(model.impute(x)?.completed),
            Self::Locf { feature_means } => baseline_locf(x, feature_means),
            Self::Mean { feature_means } => baseline_mean(x, feature_means),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    /// Fractions of the test observations to hide.
    pub rates: Vec<f64>,
    pub reps: usize,
    /// Split seed; repetition `r` masks with `seed + r`.
    pub seed: u64,
    pub train_fraction: f64,
    pub em: EmConfig,
    /// Feature declarations (partial lists allowed).
    pub specs: Vec<ColumnSpec>,
    /// Score on the original scale instead of the standardized one.
    pub raw_metrics: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Tgc, Method::Locf, Method::Mean],
            rates: vec![0.2, 0.4, 0.6, 0.8],
            reps: 3,
            seed: 0,
            train_fraction: 0.8,
            em: EmConfig::default(),
            specs: Vec::new(),
            raw_metrics: false,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Spec("at least one method is required".into()));
        }
        if self.rates.is_empty() || self.rates.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(Error::Spec("rates must be a nonempty subset of (0, 1)".into()));
        }
        if self.reps == 0 {
            return Err(Error::Spec("reps must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Spec("train fraction must lie in (0, 1)".into()));
        }
        self.em.validate()
    }
}

pub enum Dataset<S> {
    Tensor(MtsTensor<S>),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub method: String,
    pub rate: f64,
    pub status: String,
    pub mae: Option<f64>,
    pub mre: Option<f64>,
    pub rmse: Option<f64>,
    pub std_mae: Option<f64>,
    pub std_mre: Option<f64>,
    pub std_rmse: Option<f64>,
    /// Held-out cells scored per repetition.
    pub n_evaluated: usize,
    pub runs: Vec<Metrics>,
}

impl CellReport {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub split_seed: u64,
    pub rep_seeds: Vec<u64>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_steps: usize,
    pub n_features: usize,
    pub dataset_fingerprint: String,
    pub config: BenchmarkConfig,
    /// Free-form run configuration supplied by the caller.
    #[serde(default)]
    pub run_config: serde_json::Value,
    /// Wall-clock stamp, only when the caller asks for one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    /// Keyed `"method/rate"`.
    pub cells: BTreeMap<String, CellReport>,
    pub metadata: ReportMetadata,
    /// Deviations from published numbers, when the dataset has any.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference: Vec<ReferenceDeviation>,
}

pub fn cell_key(method: Method, rate: f64) -> String {
    format!("{}/{}", method.name(), rate)
}

impl BenchmarkReport {
    pub fn cell(&self, method: Method, rate: f64) -> Option<&CellReport> {
        self.cells.get(&cell_key(method, rate))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("method,rate,mae,mre,rmse,std_mae,std_mre,std_rmse,n_evaluated,status\n");
        for c in self.cells.values() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                c.method,
                c.rate,
                fmt(c.mae),
                fmt(c.mre),
                fmt(c.rmse),
                fmt(c.std_mae),
                fmt(c.std_mre),
                fmt(c.std_rmse),
                c.n_evaluated,
                c.status.replace(',', ";")
            );
        }
        out
    }

    /// Fixed-width MAE table, one row per method, one column per rate.
    pub fn summary_table(&self) -> String {
        let cfg = &self.metadata.config;
        let mut out = format!("{:<8}", "method");
        for r in &cfg.rates {
            let _ = write!(out, " {:>16}", format!("mae@{r}"));
        }
        out.push('\n');
        for &m in &cfg.methods {
            let _ = write!(out, "{:<8}", m.name());
            for &r in &cfg.rates {
                let text = match self.cell(m, r) {
                    Some(c) if c.is_ok() => format!(
                        "{:.4} ({:.4})",
                        c.mae.unwrap_or(f64::NAN),
                        c.std_mae.unwrap_or(0.0)
                    ),
                    _ => "failed".to_owned(),
                };
                let _ = write!(out, " {text:>16}");
            }
            out.push('\n');
        }
        out
    }

    /// Mean over rates of a method's cell means.
    pub fn rate_averaged(&self, method: Method) -> Option<(f64, Option<f64>, f64)> {
        let cells: Vec<&CellReport> = self
            .metadata
            .config
            .rates
            .iter()
            .filter_map(|&r| self.cell(method, r))
            .filter(|c| c.is_ok())
            .collect();
        if cells.is_empty() {
            return None;
        }
        let n = cells.len() as f64;
        let mae = cells.iter().filter_map(|c| c.mae).sum::<f64>() / n;
        let rmse = cells.iter().filter_map(|c| c.rmse).sum::<f64>() / n;
        let mre = cells
            .iter()
            .map(|c| c.mre)
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / n);
        Some((mae, mre, rmse))
    }
}

/// SHA-256 over shape, feature names, mask and observed values.
pub fn fingerprint<S: Scalar>(x: &MtsTensor<S>) -> String {
    let mut h = Sha256::new();
    for d in [x.n_samples(), x.n_steps(), x.n_features()] {
        h.update((d as u64).to_le_bytes());
    }
    for name in x.feature_names() {
        h.update(name.as_bytes());
        h.update([0u8]);
    }
    for (v, &m) in x.values().iter().zip(x.mask()) {
        h.update([m as u8]);
        if m {
            h.update(v.as_f64().to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Sample indices of the training and test splits, each sorted.
pub fn split_samples(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::Domain("a train/test split needs at least two samples".into()));
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Test tensor with `rate` of its observations hidden, plus the hidden cells
/// as `(sample, step, feature, value)`.
pub struct MaskedSplit<S> {
    pub masked: MtsTensor<S>,
    pub held_out: Vec<HeldOutCell<S>>,
    pub coords: Vec<(usize, usize, usize)>,
}

pub fn mask_test_split<S: Scalar>(test: &MtsTensor<S>, rate: f64, seed: u64) -> Result<MaskedSplit<S>> {
    let unfolded = unfold(test);
    let (masked, held_out) = mask_mcar(&unfolded, rate, seed)?;
    let coords = held_out
        .iter()
        .map(|c| unfolded.tensor_coords(c.row, c.col))
        .collect();
    Ok(MaskedSplit {
        masked: masked.refold(),
        held_out,
        coords,
    })
}

/// Scores an imputed tensor on the held-out cells of a split.
pub fn score_split<S: Scalar>(
    split: &MaskedSplit<S>,
    imputed: &MtsTensor<S>,
    scoring: Option<&StandardizationParams<S>>,
) -> Result<Metrics> {
    let mut pred = Vec::with_capacity(split.coords.len());
    let mut truth = Vec::with_capacity(split.coords.len());
    for (cell, &(i, t, f)) in split.held_out.iter().zip(&split.coords) {
        let p = imputed.get(i, t, f).ok_or_else(|| {
            Error::Contract(format!("imputer left cell ({i}, {t}, {f}) empty"))
        })?;
        match scoring {
            Some(params) => {
                pred.push(params.forward(f, p));
                truth.push(params.forward(f, cell.value));
            }
            None => {
                pred.push(p);
                truth.push(cell.value);
            }
        }
    }
    compute_metrics(&pred, &truth)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn aggregate(method: Method, rate: f64, runs: std::result::Result<Vec<Metrics>, String>) -> CellReport {
    match runs {
        Ok(runs) => {
            let mae: Vec<f64> = runs.iter().map(|m| m.mae).collect();
            let rmse: Vec<f64> = runs.iter().map(|m| m.rmse).collect();
            let mre: Option<Vec<f64>> = runs.iter().map(|m| m.mre).collect();
            let (mae, std_mae) = mean_sd(&mae);
            let (rmse, std_rmse) = mean_sd(&rmse);
            let (mre, std_mre) = match mre {
                Some(v) => {
                    let (a, b) = mean_sd(&v);
                    (Some(a), Some(b))
                }
                None => (None, None),
            };
            CellReport {
                method: method.name().into(),
                rate,
                status: "ok".into(),
                mae: Some(mae),
                mre,
                rmse: Some(rmse),
                std_mae: Some(std_mae),
                std_mre,
                std_rmse: Some(std_rmse),
                n_evaluated: runs.first().map(|m| m.n_evaluated).unwrap_or(0),
                runs,
            }
        }
        Err(msg) => CellReport {
            method: method.name().into(),
            rate,
            status: format!("failed: {msg}"),
            mae: None,
            mre: None,
            rmse: None,
            std_mae: None,
            std_mre: None,
            std_rmse: None,
            n_evaluated: 0,
            runs: Vec::new(),
        },
    }
}

/// Runs every `(method, rate, repetition)` cell. A failing method marks its
/// cells as failed; the rest of the run continues.
pub fn run_benchmark<S: Scalar>(dataset: &Dataset<S>, config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let (tensor, mut specs) = match dataset {
        Dataset::Tensor(x) => (x.clone(), config.specs.clone()),
        Dataset::Synthetic(spec) => {
            let data = generate_synthetic::<S>(spec)?;
            let mut specs = spec.column_specs();
            for declared in &config.specs {
                if let Some(s) = specs.iter_mut().find(|s| s.feature_name == declared.feature_name) {
                    *s = declared.clone();
                }
            }
            (data.observed, specs)
        }
    };
    specs = resolve_specs(tensor.feature_names(), &specs)?;

    let (train_idx, test_idx) = split_samples(tensor.n_samples(), config.train_fraction, config.seed)?;
    let train = tensor.select_samples(&train_idx)?;
    let test = tensor.select_samples(&test_idx)?;
    let scoring = StandardizationParams::fit(&unfold(&train));

    let fitted: Vec<(Method, std::result::Result<FittedMethod<S>, String>)> = config
        .methods
        .iter()
        .map(|&m| {
            let res = FittedMethod::fit(m, &train, &specs, &config.em).map_err(|e| e.to_string());
            if let Err(e) = &res {
                log::warn!("method {m} failed to fit: {e}");
            }
            (m, res)
        })
        .collect();

    let rep_seeds: Vec<u64> = (0..config.reps as u64).map(|r| config.seed.wrapping_add(r)).collect();
    let jobs: Vec<(usize, usize)> = (0..config.rates.len())
        .flat_map(|ri| (0..config.reps).map(move |rep| (ri, rep)))
        .collect();
    let outcomes: Vec<Vec<std::result::Result<Metrics, String>>> = jobs
        .par_iter()
        .map(|&(ri, rep)| -> Vec<std::result::Result<Metrics, String>> {
            let split = match mask_test_split(&test, config.rates[ri], rep_seeds[rep]) {
                Ok(s) => s,
                Err(e) => return fitted.iter().map(|_| Err(e.to_string())).collect(),
            };
            fitted
                .iter()
                .map(|(_, f)| {
                    let f = f.as_ref().map_err(Clone::clone)?;
                    let imputed = f.impute(&split.masked).map_err(|e| e.to_string())?;
                    score_split(&split, &imputed, (!config.raw_metrics).then_some(&scoring))
                        .map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect();

    let mut cells = BTreeMap::new();
    for (mi, &(method, _)) in fitted.iter().enumerate() {
        for (ri, &rate) in config.rates.iter().enumerate() {
            let runs: std::result::Result<Vec<Metrics>, String> = jobs
                .iter()
                .zip(&outcomes)
                .filter(|((r, _), _)| *r == ri)
                .map(|(_, out)| out[mi].clone())
                .collect();
            cells.insert(cell_key(method, rate), aggregate(method, rate, runs));
        }
    }

    Ok(BenchmarkReport {
        schema_version: REPORT_SCHEMA_VERSION,
        cells,
        metadata: ReportMetadata {
            split_seed: config.seed,
            rep_seeds,
            n_train: train.n_samples(),
            n_test: test.n_samples(),
            n_steps: tensor.n_steps(),
            n_features: tensor.n_features(),
            dataset_fingerprint: fingerprint(&tensor),
            config: BenchmarkConfig {
                specs,
                ..config.clone()
            },
            run_config: serde_json::Value::Null,
            timestamp: None,
        },
        reference: Vec::new(),
    })
}

/// Published rate-averaged results, kept for comparison only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceResult {
    pub method: Method,
    pub dataset: &'static str,
    pub mae: f64,
    pub mre: f64,
    pub rmse: f64,
}

pub const REFERENCE_RESULTS: &[ReferenceResult] = &[
    ReferenceResult { method: Method::Tgc, dataset: "mimic", mae: 0.377, mre: 0.497, rmse: 0.610 },
    ReferenceResult { method: Method::Tgc, dataset: "physionet2012", mae: 0.309, mre: 0.437, rmse: 0.639 },
    ReferenceResult { method: Method::Tgc, dataset: "physionet2019", mae: 0.389, mre: 0.521, rmse: 0.638 },
    ReferenceResult { method: Method::Locf, dataset: "mimic", mae: 0.547, mre: 0.722, rmse: 0.842 },
    ReferenceResult { method: Method::Locf, dataset: "physionet2012", mae: 0.447, mre: 0.632, rmse: 0.864 },
    ReferenceResult { method: Method::Locf, dataset: "physionet2019", mae: 0.520, mre: 0.698, rmse: 0.800 },
    ReferenceResult { method: Method::TgcU, dataset: "mimic", mae: 0.760, mre: 1.002, rmse: 1.003 },
    ReferenceResult { method: Method::TgcU, dataset: "physionet2012", mae: 0.709, mre: 1.003, rmse: 1.01 },
    ReferenceResult { method: Method::TgcU, dataset: "physionet2019", mae: 0.746, mre: 1.000, rmse: 0.995 },
];

pub fn reference_result(method: Method, dataset: &str) -> Option<&'static ReferenceResult> {
    let key = dataset.to_ascii_lowercase();
    REFERENCE_RESULTS
        .iter()
        .find(|r| r.method == method && r.dataset == key)
}

/// Measured minus published, for the rate-averaged metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDeviation {
    pub method: String,
    pub dataset: String,
    pub measured_mae: f64,
    pub reference_mae: f64,
    pub mae_delta: f64,
    pub mre_delta: Option<f64>,
    pub rmse_delta: f64,
}

/// Compares a report against the published numbers for `dataset`. Returns
/// `None` when there is no reference or the method's cells all failed.
pub fn compare_to_reference(
    report: &BenchmarkReport,
    method: Method,
    dataset: &str,
) -> Option<ReferenceDeviation> {
    let reference = reference_result(method, dataset)?;
    let (mae, mre, rmse) = report.rate_averaged(method)?;
    Some(ReferenceDeviation {
        method: method.name().into(),
        dataset: reference.dataset.into(),
        measured_mae: mae,
        reference_mae: reference.mae,
        mae_delta: mae - reference.mae,
        mre_delta: mre.map(|v| v - reference.mre),
        rmse_delta: rmse - reference.rmse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::synthetic::{LatentStructure, MarginalFamily};

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            n_samples: 60,
            n_steps: 5,
            n_features: 2,
            structure: LatentStructure::Ar1 { rho: 0.7 },
            marginals: vec![MarginalFamily::Gaussian],
            missing_rate: 0.1,
            seed: 3,
        }
    }

    fn small_config() -> BenchmarkConfig {
        BenchmarkConfig {
            methods: vec![Method::Tgc, Method::TgcU, Method::Locf, Method::Mean],
            rates: vec![0.2, 0.5],
            reps: 3,
            seed: 11,
            ..BenchmarkConfig::default()
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Tgc, Method::TgcU, Method::Locf, Method::Mean] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("knn".parse::<Method>().is_err());
    }

    #[test]
    fn split_is_disjoint_and_covering() {
        let (train, test) = split_samples(10, 0.8, 4).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(split_samples(1, 0.8, 0).is_err());
    }

    #[test]
    fn every_cell_is_present_with_three_runs() {
        let cfg = small_config();
        let report = run_benchmark::<f64>(&Dataset::Synthetic(small_spec()), &cfg).unwrap();
        assert_eq!(report.cells.len(), 8);
        for c in report.cells.values() {
            assert!(c.is_ok(), "{}", c.status);
            assert_eq!(c.runs.len(), 3);
            assert!(c.std_mae.unwrap() >= 0.0);
            assert!(c.mae.unwrap() <= c.rmse.unwrap());
        }
        assert_eq!(report.metadata.rep_seeds, vec![11, 12, 13]);
        assert_eq!(report.metadata.n_train + report.metadata.n_test, 60);
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = small_config();
        let a = run_benchmark::<f64>(&Dataset::Synthetic(small_spec()), &cfg).unwrap();
        let b = run_benchmark::<f64>(&Dataset::Synthetic(small_spec()), &cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let back: BenchmarkReport = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn failing_method_is_recorded_per_cell() {
        let cfg = BenchmarkConfig {
            em: EmConfig {
                max_iters: 0,
                ..EmConfig::default()
            },
            ..small_config()
        };
        // An invalid EM config is rejected up front.
        assert!(run_benchmark::<f64>(&Dataset::Synthetic(small_spec()), &cfg).is_err());

        let mut x = generate_synthetic::<f64>(&small_spec()).unwrap().observed;
        // A feature that is ordinal in the declaration but not in the data
        // makes only the copula arms fail.
        x.set(0, 0, 1, Some(0.123));
        let cfg = BenchmarkConfig {
            specs: vec![ColumnSpec::ordinal_k("x1", 3).unwrap()],
            ..small_config()
        };
        let report = run_benchmark(&Dataset::Tensor(x), &cfg).unwrap();
        assert!(!report.cell(Method::Tgc, 0.2).unwrap().is_ok());
        assert!(report.cell(Method::Tgc, 0.2).unwrap().status.starts_with("failed"));
        assert!(report.cell(Method::Mean, 0.5).unwrap().is_ok());
        assert!(report.summary_table().contains("failed"));
    }

    #[test]
    fn held_out_cells_are_exactly_the_masked_ones() {
        let x = generate_synthetic::<f64>(&small_spec()).unwrap().observed;
        let split = mask_test_split(&x, 0.3, 5).unwrap();
        let mut removed = Vec::new();
        for i in 0..x.n_samples() {
            for t in 0..x.n_steps() {
                for f in 0..x.n_features() {
                    if x.is_observed(i, t, f) && !split.masked.is_observed(i, t, f) {
                        removed.push((i, t, f));
                    }
                }
            }
        }
        let mut coords = split.coords.clone();
        coords.sort_unstable();
        assert_eq!(coords, removed);
        for (c, &(i, t, f)) in split.held_out.iter().zip(&split.coords) {
            assert_eq!(x.get(i, t, f), Some(c.value));
        }
    }

    #[test]
    fn csv_has_one_line_per_cell() {
        let report = run_benchmark::<f64>(&Dataset::Synthetic(small_spec()), &small_config()).unwrap();
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 1 + report.cells.len());
        assert!(csv.starts_with("method,rate,mae"));
    }

    #[test]
    fn reference_constants_and_deviation() {
        let r = reference_result(Method::Tgc, "PhysioNet2012").unwrap();
        assert_eq!(r.mae, 0.309);
        assert_eq!(reference_result(Method::Tgc, "mimic").unwrap().rmse, 0.610);
        assert!(reference_result(Method::Mean, "mimic").is_none());
        let report = run_benchmark::<f64>(&Dataset::Synthetic(small_spec()), &small_config()).unwrap();
        let dev = compare_to_reference(&report, Method::Tgc, "physionet2012").unwrap();
        assert!((dev.mae_delta - (dev.measured_mae - 0.309)).abs() < 1e-15);
    }

    #[test]
    fn fingerprint_changes_with_content() {
        let x = generate_synthetic::<f64>(&small_spec()).unwrap().observed;
        let mut y = x.clone();
        assert_eq!(fingerprint(&x), fingerprint(&y));
        y.set(0, 0, 0, None);
        assert_ne!(fingerprint(&x), fingerprint(&y));
        assert_eq!(fingerprint(&x).len(), 64);
    }
}
