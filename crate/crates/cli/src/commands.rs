use std::path::PathBuf;

use serde_json::{json, Value};
use tgc::benchmark::{
    compare_to_reference, generate_synthetic, run_benchmark, BenchmarkConfig, Dataset, LatentStructure,
    MarginalFamily, Method, SyntheticSpec,
};
use tgc::data::{load_csv_long, write_csv_long_annotated};
use tgc::{ColumnSpec, EmConfig, Layout, ModelBundle, MtsTensor};

use crate::config::Opts;
use crate::error::CliError;
use crate::output::{sibling, Staged};

pub const FIT_KEYS: &[&str] = &[
    "input", "model", "diagnostics", "ordinal", "layout", "max-iter", "tol", "ridge", "n-steps",
];
pub const IMPUTE_KEYS: &[&str] = &["input", "model", "output"];
pub const SYNTH_KEYS: &[&str] = &[
    "output", "truth", "sigma", "seed", "n-samples", "n-steps", "n-features", "structure", "rho",
    "block-size", "marginals", "missing-rate",
];
pub const BENCHMARK_KEYS: &[&str] = &[
    "input", "output", "csv", "ordinal", "n-steps", "methods", "rates", "reps", "seed", "max-iter",
    "tol", "ridge", "train-fraction", "raw-metrics", "stamp", "dataset-name", "n-samples",
    "n-features", "structure", "rho", "block-size", "marginals", "missing-rate",
];
const SYNTHETIC_ONLY: &[&str] = &[
    "n-samples", "n-features", "structure", "rho", "block-size", "marginals", "missing-rate",
];

fn required(value: Option<PathBuf>, flag: &str) -> Result<PathBuf, CliError> {
    value.ok_or_else(|| CliError::input(format!("--{flag} is required")))
}

fn run_record(command: &str, resolved: &Opts) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": resolved.to_json(),
    })
}

fn to_json_bytes(value: &impl serde::Serialize) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::internal(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes(x: &MtsTensor<f64>, record: &Value) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_csv_long_annotated(x, &mut buf, Some(&format!("tgc {record}")))?;
    Ok(buf)
}

fn parse_ordinals(list: &[String]) -> Result<Vec<ColumnSpec>, CliError> {
    list.iter()
        .map(|item| {
            let (name, k) = item
                .rsplit_once(':')
                .ok_or_else(|| CliError::input(format!("--ordinal entry {item:?} must be name:K")))?;
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| CliError::input(format!("--ordinal entry {item:?}: K must be a positive integer")))?;
            Ok(ColumnSpec::ordinal_k(name.trim(), k)?)
        })
        .collect()
}

fn parse_layout(s: &str) -> Result<Layout, CliError> {
    s.parse().map_err(|e: tgc::Error| CliError::input(e.to_string()))
}

fn em_config(o: &Opts) -> EmConfig {
    let d = EmConfig::default();
    EmConfig {
        max_iters: o.max_iter.unwrap_or(d.max_iters),
        rel_tol: o.tol.unwrap_or(d.rel_tol),
        ridge: o.ridge.unwrap_or(d.ridge),
        ..d
    }
}

fn with_em_defaults(mut o: Opts) -> Opts {
    let d = EmConfig::default();
    o.max_iter.get_or_insert(d.max_iters);
    o.tol.get_or_insert(d.rel_tol);
    o.ridge.get_or_insert(d.ridge);
    o
}

pub fn fit(o: Opts) -> Result<Staged, CliError> {
    let mut o = with_em_defaults(o);
    o.layout.get_or_insert_with(|| "patient".into());
    let input = required(o.input.clone(), "input")?;
    let model_path = required(o.model.clone(), "model")?;
    let diagnostics_path = o
        .diagnostics
        .get_or_insert_with(|| sibling(&model_path, "diagnostics.json"))
        .clone();
    let layout = parse_layout(o.layout.as_deref().unwrap_or_default())?;
    let specs = parse_ordinals(o.ordinal.as_deref().unwrap_or_default())?;

    let x: MtsTensor<f64> = load_csv_long(&input, &specs, o.n_steps)?;
    let model = tgc::fit(&x, &specs, &em_config(&o), layout)?;
    let record = run_record("fit", &o);
    let fallback: Vec<Value> = model
        .diagnostics
        .fallback_columns
        .iter()
        .map(|&j| {
            let key = model.marginals.column_features[j];
            json!({"column": j, "feature": model.feature_names[key]})
        })
        .collect();
    let diagnostics = json!({
        "run": record,
        "n_samples": x.n_samples(),
        "n_steps": x.n_steps(),
        "n_features": x.n_features(),
        "layout": layout.to_string(),
        "dim": model.dim(),
        "fallback": fallback,
        "diagnostics": model.diagnostics,
    });
    log::info!(
        "fitted {}-dimensional model in {} iterations (converged: {})",
        model.dim(),
        model.diagnostics.iterations_run,
        model.diagnostics.converged
    );

    let mut staged = Staged::default();
    staged.add(model_path, to_json_bytes(&ModelBundle::from_model(&model, record))?);
    staged.add(diagnostics_path, to_json_bytes(&diagnostics)?);
    Ok(staged)
}

pub fn impute(o: Opts) -> Result<Staged, CliError> {
    let input = required(o.input.clone(), "input")?;
    let model_path = required(o.model.clone(), "model")?;
    let output = required(o.output.clone(), "output")?;
    let model = ModelBundle::<f64>::load(&model_path)?.into_model()?;
    // Specs are checked against the model's features by `impute`, which
    // reports the full feature diff on a mismatch.
    let x: MtsTensor<f64> = load_csv_long(&input, &[], Some(model.n_steps))?;
    let result = model.impute(&x)?;
    let record = run_record("impute", &o);
    log::info!("filled {} cells", result.filled_positions.len());
    let mut staged = Staged::default();
    staged.add(output, csv_bytes(&result.completed, &record)?);
    Ok(staged)
}

fn parse_family(s: &str) -> Result<MarginalFamily, CliError> {
    let s = s.trim().to_ascii_lowercase();
    match s.as_str() {
        "gaussian" | "normal" => Ok(MarginalFamily::Gaussian),
        "lognormal" => Ok(MarginalFamily::LogNormal),
        _ => match s.strip_prefix("ordinal:").map(str::parse::<usize>) {
            Some(Ok(levels)) => Ok(MarginalFamily::Ordinal { levels }),
            _ => Err(CliError::input(format!(
                "unknown marginal {s:?} (expected gaussian, lognormal or ordinal:K)"
            ))),
        },
    }
}

fn with_synthetic_defaults(mut o: Opts) -> Opts {
    o.seed.get_or_insert(0);
    o.n_samples.get_or_insert(200);
    o.n_steps.get_or_insert(10);
    o.n_features.get_or_insert(3);
    o.structure.get_or_insert_with(|| "ar1".into());
    o.marginals.get_or_insert_with(|| vec!["gaussian".into()]);
    o.missing_rate.get_or_insert(0.0);
    match o.structure.as_deref() {
        Some("ar1") => {
            o.rho.get_or_insert(0.8);
        }
        Some("block") => {
            o.rho.get_or_insert(0.8);
            o.block_size.get_or_insert(2);
        }
        _ => {}
    }
    o
}

fn synthetic_spec(o: &Opts) -> Result<SyntheticSpec, CliError> {
    let structure = match o.structure.as_deref().unwrap_or("ar1").to_ascii_lowercase().as_str() {
        "ar1" => LatentStructure::Ar1 {
            rho: o.rho.unwrap_or(0.8),
        },
        "block" => LatentStructure::Block {
            size: o.block_size.unwrap_or(2),
            rho: o.rho.unwrap_or(0.8),
        },
        "identity" => LatentStructure::Identity,
        other => {
            return Err(CliError::input(format!(
                "unknown structure {other:?} (expected ar1, block or identity)"
            )))
        }
    };
    let marginals = o
        .marginals
        .as_deref()
        .unwrap_or_default()
        .iter()
        .map(|s| parse_family(s))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = SyntheticSpec {
        n_samples: o.n_samples.unwrap_or(200),
        n_steps: o.n_steps.unwrap_or(10),
        n_features: o.n_features.unwrap_or(3),
        structure,
        marginals,
        missing_rate: o.missing_rate.unwrap_or(0.0),
        seed: o.seed.unwrap_or(0),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn synth(o: Opts) -> Result<Staged, CliError> {
    let mut o = with_synthetic_defaults(o);
    let output = required(o.output.clone(), "output")?;
    let truth_path = o.truth.get_or_insert_with(|| sibling(&output, "truth.csv")).clone();
    let sigma_path = o.sigma.get_or_insert_with(|| sibling(&output, "sigma.json")).clone();
    let spec = synthetic_spec(&o)?;
    let data = generate_synthetic::<f64>(&spec)?;
    let record = run_record("synth", &o);

    let mut staged = Staged::default();
    staged.add(output, csv_bytes(&data.observed, &record)?);
    staged.add(truth_path, csv_bytes(&data.truth, &record)?);
    staged.add(
        sigma_path,
        to_json_bytes(&json!({"run": record, "spec": spec, "sigma": data.sigma}))?,
    );
    Ok(staged)
}

pub fn benchmark(o: Opts) -> Result<(Staged, String), CliError> {
    let mut o = with_em_defaults(o);
    let defaults = BenchmarkConfig::default();
    let output = required(o.output.clone(), "output")?;
    let methods: Vec<String> = o
        .methods
        .get_or_insert_with(|| defaults.methods.iter().map(|m| m.name().to_owned()).collect())
        .clone();
    let methods = methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::input(e.to_string()))?;
    let rates = o.rates.get_or_insert_with(|| defaults.rates.clone()).clone();
    let reps = *o.reps.get_or_insert(defaults.reps);
    let seed = *o.seed.get_or_insert(defaults.seed);
    let train_fraction = *o.train_fraction.get_or_insert(defaults.train_fraction);
    let raw_metrics = *o.raw_metrics.get_or_insert(false);
    let specs = parse_ordinals(o.ordinal.as_deref().unwrap_or_default())?;

    let dataset = match o.input.clone() {
        Some(path) => {
            if let Some(k) = o.set_keys().iter().find(|k| SYNTHETIC_ONLY.contains(&k.as_str())) {
                return Err(CliError::input(format!(
                    "--{k} describes synthetic data and cannot be combined with --input"
                )));
            }
            Dataset::Tensor(load_csv_long::<f64>(&path, &specs, o.n_steps)?)
        }
        None => {
            o = with_synthetic_defaults(o);
            Dataset::Synthetic(synthetic_spec(&o)?)
        }
    };

    let config = BenchmarkConfig {
        methods,
        rates,
        reps,
        seed,
        train_fraction,
        em: em_config(&o),
        specs,
        raw_metrics,
    };
    let mut report = run_benchmark(&dataset, &config)?;
    report.metadata.run_config = run_record("benchmark", &o);
    if o.stamp == Some(true) {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        report.metadata.timestamp = Some(format!("unix:{secs}"));
    }
    let mut summary = report.summary_table();
    if let Some(name) = o.dataset_name.as_deref() {
        report.reference = config
            .methods
            .iter()
            .filter_map(|&m| compare_to_reference(&report, m, name))
            .collect();
        for d in &report.reference {
            summary.push_str(&format!(
                "{}: mean MAE {:.4} vs published {:.3} on {} ({:+.4})\n",
                d.method, d.measured_mae, d.reference_mae, d.dataset, d.mae_delta
            ));
        }
    }
    if report.cells.values().all(|c| !c.is_ok()) {
        return Err(CliError::internal("every benchmark cell failed"));
    }

    let mut staged = Staged::default();
    staged.add(output, to_json_bytes(&report)?);
    if let Some(csv) = o.csv.clone() {
        staged.add(csv, report.to_csv().into_bytes());
    }
    Ok((staged, summary))
}
