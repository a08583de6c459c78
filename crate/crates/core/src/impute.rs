//! End-to-end copula imputation: standardize, unfold, map to latent space,
//! fill with conditional means under `Σ`, and map back.
//!
//! The point estimate is `F_j⁻¹(E[z_m | z_o])`, the latent conditional mean
//! pushed through the inverse marginal. Because `F_j⁻¹` is nonlinear this is
//! not the conditional mean in data space; under weak correlation it leans
//! toward the marginal median.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{fit_em, group_patterns, ConditionalSolver, CorrelationModel, EmConfig, FitDiagnostics};
use crate::data::{
    resolve_specs, unfold_with, ColumnKind, ColumnSpec, Layout, MtsTensor, StandardizationParams,
};
use crate::error::{Error, Result};
use crate::marginals::MarginalSet;
use crate::scalar::Scalar;

pub const BUNDLE_FORMAT: &str = "tgc-model";
pub const BUNDLE_VERSION: u32 = 1;

/// A fitted copula model, frozen at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TgcModel<S> {
    pub layout: Layout,
    pub n_steps: usize,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    pub specs: Vec<ColumnSpec>,
    pub config: EmConfig,
    pub standardization: StandardizationParams<S>,
    pub marginals: MarginalSet<S>,
    pub correlation: CorrelationModel<S>,
    pub diagnostics: FitDiagnostics,
}

/// Completed tensor plus where it was filled.
#[derive(Debug, Clone)]
pub struct ImputationResult<S> {
    pub completed: MtsTensor<S>,
    /// `(sample, step, feature)` of every filled cell, sorted.
    pub filled_positions: Vec<(usize, usize, usize)>,
    /// Latent conditional means, aligned with `filled_positions`.
    pub latent_fills: Vec<S>,
    pub diagnostics: FitDiagnostics,
}

/// Fits marginals and the latent correlation on the observed cells of `x`.
/// `specs` may be partial; undeclared features are continuous.
pub fn fit<S: Scalar>(
    x: &MtsTensor<S>,
    specs: &[ColumnSpec],
    config: &EmConfig,
    layout: Layout,
) -> Result<TgcModel<S>> {
    let specs = resolve_specs(x.feature_names(), specs).map_err(|e| e.in_stage("marginals"))?;
    config.validate().map_err(|e| e.in_stage("em"))?;
    let unfolded = unfold_with(x, layout);

    let mut standardization = StandardizationParams::fit(&unfolded);
    for (f, spec) in specs.iter().enumerate() {
        if spec.kind == ColumnKind::Ordinal {
            standardization.exempt(f);
        }
    }
    let standardized = standardization
        .apply(&unfolded)
        .map_err(|e| e.in_stage("standardize"))?;

    let marginals =
        MarginalSet::fit(&standardized, &specs).map_err(|e| e.in_stage("marginals"))?;
    let latent = marginals
        .to_latent(&standardized.matrix)
        .map_err(|e| e.in_stage("marginals"))?;
    let (correlation, diagnostics) = fit_em(&latent, config).map_err(|e| e.in_stage("em"))?;

    Ok(TgcModel {
        layout,
        n_steps: x.n_steps(),
        n_features: x.n_features(),
        feature_names: x.feature_names().to_vec(),
        specs,
        config: config.clone(),
        standardization,
        marginals,
        correlation,
        diagnostics,
    })
}

impl<S: Scalar> TgcModel<S> {
    pub fn dim(&self) -> usize {
        self.correlation.dim()
    }

    /// Checks that `x` can be imputed by this model and returns it with
    /// features in model order.
    pub fn align(&self, x: &MtsTensor<S>) -> Result<MtsTensor<S>> {
        if x.n_steps() != self.n_steps {
            return Err(Error::Contract(format!(
                "model was fitted with {} time steps, input has {}",
                self.n_steps,
                x.n_steps()
            )));
        }
        x.align_features(&self.feature_names)
    }

    /// Fills every missing cell of `x`. Observed cells are copied unchanged.
    pub fn impute(&self, x: &MtsTensor<S>) -> Result<ImputationResult<S>> {
        let aligned = self.align(x)?;
        let unfolded = unfold_with(&aligned, self.layout);
        let standardized = self.standardization.apply(&unfolded)?;
        let latent = self.marginals.to_latent(&standardized.matrix)?;

        let groups: Vec<_> = group_patterns(&latent)
            .into_iter()
            .filter(|g| !g.missing.is_empty())
            .collect();
        let sigma = self.correlation.sigma();
        let per_group: Vec<Vec<(usize, usize, S)>> = groups
            .par_iter()
            .map(|g| -> Result<Vec<(usize, usize, S)>> {
                let solver = ConditionalSolver::new(sigma, &g.observed, &g.missing, false)?;
                let mut out = Vec::with_capacity(g.rows.len() * g.missing.len());
                for &r in &g.rows {
                    let vals = latent.row_values(r);
                    let z_o: Vec<S> = g.observed.iter().map(|&j| vals[j]).collect();
                    for (a, mean) in solver.mean(&z_o).into_iter().enumerate() {
                        out.push((r, g.missing[a], mean));
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;

        let mut fills: Vec<((usize, usize, usize), S, S)> = per_group
            .into_iter()
            .flatten()
            .map(|(r, j, z)| {
                let (i, t, f) = unfolded.tensor_coords(r, j);
                let v_std = self.marginals.columns[j].from_latent(z);
                ((i, t, f), z, self.standardization.inverse(f, v_std))
            })
            .collect();
        fills.sort_by(|a, b| a.0.cmp(&b.0));

        let mut completed = aligned;
        for &((i, t, f), _, v) in &fills {
            completed.set(i, t, f, Some(v));
        }
        Ok(ImputationResult {
            completed,
            filled_positions: fills.iter().map(|f| f.0).collect(),
            latent_fills: fills.iter().map(|f| f.1).collect(),
            diagnostics: self.diagnostics.clone(),
        })
    }
}

pub fn impute<S: Scalar>(model: &TgcModel<S>, x: &MtsTensor<S>) -> Result<ImputationResult<S>> {
    model.impute(x)
}

/// `fit` followed by `impute` on the same tensor.
pub fn fit_impute<S: Scalar>(
    x: &MtsTensor<S>,
    specs: &[ColumnSpec],
    config: &EmConfig,
    layout: Layout,
) -> Result<(TgcModel<S>, ImputationResult<S>)> {
    let model = fit(x, specs, config, layout)?;
    let result = model.impute(x)?;
    Ok((model, result))
}

/// Header of a model bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub version: u32,
    pub layout: Layout,
    pub n_steps: usize,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    pub specs: Vec<ColumnSpec>,
    pub fit_config: EmConfig,
    /// Caller-supplied run configuration, echoed for replay.
    #[serde(default)]
    pub run_config: serde_json::Value,
}

/// Self-contained file form of a [`TgcModel`]: a manifest plus the
/// marginals, correlation dump, standardization constants and fit
/// diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ModelBundle<S> {
    pub manifest: BundleManifest,
    pub marginals: MarginalSet<S>,
    pub correlation: CorrelationModel<S>,
    pub standardization: StandardizationParams<S>,
    pub diagnostics: FitDiagnostics,
}

impl<S: Scalar> ModelBundle<S> {
    pub fn from_model(model: &TgcModel<S>, run_config: serde_json::Value) -> Self {
        Self {
            manifest: BundleManifest {
                format: BUNDLE_FORMAT.into(),
                version: BUNDLE_VERSION,
                layout: model.layout,
                n_steps: model.n_steps,
                n_features: model.n_features,
                feature_names: model.feature_names.clone(),
                specs: model.specs.clone(),
                fit_config: model.config.clone(),
                run_config,
            },
            marginals: model.marginals.clone(),
            correlation: model.correlation.clone(),
            standardization: model.standardization.clone(),
            diagnostics: model.diagnostics.clone(),
        }
    }

    pub fn into_model(self) -> Result<TgcModel<S>> {
        let m = &self.manifest;
        if m.format != BUNDLE_FORMAT || m.version != BUNDLE_VERSION {
            return Err(Error::Contract(format!(
                "unsupported bundle {:?} version {}",
                m.format, m.version
            )));
        }
        let dim = match m.layout {
            Layout::PatientRows => m.n_steps * m.n_features,
            Layout::TimeRows => m.n_features,
        };
        if self.marginals.len() != dim || self.correlation.dim() != dim {
            return Err(Error::Shape(format!(
                "bundle components disagree: {} marginals, {}-dim Σ, expected {dim}",
                self.marginals.len(),
                self.correlation.dim()
            )));
        }
        if m.feature_names.len() != m.n_features || self.standardization.mean.len() != m.n_features {
            return Err(Error::Shape("bundle feature count mismatch".into()));
        }
        Ok(TgcModel {
            layout: m.layout,
            n_steps: m.n_steps,
            n_features: m.n_features,
            feature_names: m.feature_names.clone(),
            specs: m.specs.clone(),
            config: m.fit_config.clone(),
            standardization: self.standardization,
            marginals: self.marginals,
            correlation: self.correlation,
            diagnostics: self.diagnostics,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}
