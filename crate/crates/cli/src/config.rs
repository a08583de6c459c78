//! Flag and config-file layering. Every option is optional at parse time;
//! flags override the file and defaults fill the rest.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::CliError;

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Opts {
    /// Input CSV in long format (sample_id,time_index,<features>...)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Model bundle path (written by fit, read by impute)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Primary output path
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Diagnostics JSON written by fit [default: <model>.diagnostics.json]
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    /// Ground-truth CSV written by synth [default: <output>.truth.csv]
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Latent correlation JSON written by synth [default: <output>.sigma.json]
    #[arg(long)]
    pub sigma: Option<PathBuf>,
    /// Flattened CSV copy of the benchmark report
    #[arg(long)]
    pub csv: Option<PathBuf>,

    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated masking rates in (0, 1)
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "list")]
    pub rates: Option<Vec<f64>>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated methods: tgc, tgc-u, locf, mean
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "list")]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Score on the original scale instead of the standardized one
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub raw_metrics: Option<bool>,
    /// Record the wall-clock time in the report
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub stamp: Option<bool>,
    /// Dataset name for comparison with published numbers (e.g. physionet2012)
    #[arg(long)]
    pub dataset_name: Option<String>,

    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Unfolding: patient (N x TF) or timewise (NT x F)
    #[arg(long)]
    pub layout: Option<String>,
    /// Ordinal features as name:K, comma-separated
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "list")]
    pub ordinal: Option<Vec<String>>,
    /// Number of time steps (default: inferred from the data)
    #[arg(long)]
    pub n_steps: Option<usize>,

    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub n_features: Option<usize>,
    /// Latent structure: ar1, block or identity
    #[arg(long)]
    pub structure: Option<String>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub block_size: Option<usize>,
    /// Marginal families, one for all features or one per feature:
    /// gaussian, lognormal, ordinal:K
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "list")]
    pub marginals: Option<Vec<String>>,
    /// Fraction of cells hidden in generated data
    #[arg(long)]
    pub missing_rate: Option<f64>,

    /// Worker threads (default: all cores)
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Lists in the config file may be arrays or comma-separated strings.
fn list<'de, D, T>(de: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: std::str::FromStr + Deserialize<'de>,
    T::Err: std::fmt::Display,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw<T> {
        Text(String),
        Items(Vec<T>),
    }
    match Option::<Raw<T>>::deserialize(de)? {
        None => Ok(None),
        Some(Raw::Items(v)) => Ok(Some(v)),
        Some(Raw::Text(s)) => s
            .split(',')
            .map(|p| p.trim().parse::<T>().map_err(serde::de::Error::custom))
            .collect::<Result<Vec<T>, _>>()
            .map(Some),
    }
}

macro_rules! layer {
    ($a:ident, $b:ident, $($field:ident),* $(,)?) => {
        Opts { $($field: $a.$field.or($b.$field)),* }
    };
    (@names $($field:ident),* $(,)?) => {
        &[$(stringify!($field)),*]
    };
}

macro_rules! with_fields {
    ($mac:ident ! ($($pre:tt)*)) => {
        $mac!($($pre)* input, model, output, diagnostics, truth, sigma, csv, seed, rates, reps,
            methods, train_fraction, raw_metrics, stamp, dataset_name, max_iter, tol, ridge,
            layout, ordinal, n_steps, n_samples, n_features, structure, rho, block_size,
            marginals, missing_rate, threads)
    };
}

impl Opts {
    /// Values in `self` win over `base`.
    pub fn over(self, base: Opts) -> Opts {
        let (a, b) = (self, base);
        with_fields!(layer!(a, b,))
    }

    /// Names of the options that are set, in kebab case.
    pub fn set_keys(&self) -> Vec<String> {
        let names: &[&str] = with_fields!(layer!(@names));
        let value = serde_json::to_value(self).expect("options serialize");
        names
            .iter()
            .map(|n| n.replace('_', "-"))
            .filter(|k| !value[k.as_str()].is_null())
            .collect()
    }

    pub fn load(path: &Path) -> Result<Opts, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            // A run record written by this tool: {"command": ..., "config": {...}}.
            let mut value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?;
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
            serde_json::from_value(value)
                .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::input(format!("config {}: {e}", path.display())))
        }
    }

    /// Rejects flags the subcommand does not use.
    pub fn check_allowed(&self, command: &str, allowed: &[&str]) -> Result<(), CliError> {
        let extra: Vec<String> = self
            .set_keys()
            .into_iter()
            .filter(|k| !allowed.contains(&k.as_str()) && k != "threads")
            .map(|k| format!("--{k}"))
            .collect();
        if extra.is_empty() {
            Ok(())
        } else {
            Err(CliError::input(format!("{command} does not take {}", extra.join(", "))))
        }
    }

    /// Keeps only the options relevant to a subcommand.
    pub fn restrict(self, allowed: &[&str]) -> Opts {
        let mut value = serde_json::to_value(&self).expect("options serialize");
        if let Some(map) = value.as_object_mut() {
            map.retain(|k, _| allowed.contains(&k.as_str()) || k == "threads");
        }
        serde_json::from_value(value).expect("subset of valid options")
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("options serialize");
        if let Some(map) = value.as_object_mut() {
            map.retain(|_, v| !v.is_null());
        }
        value
    }
}
