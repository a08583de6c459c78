//! Latent correlation estimation by EM.
//!
//! Each iteration fills missing latent coordinates with their conditional
//! means under the current `Σ` (E-step), averages the expected second
//! moments (M-step) and rescales the result to unit diagonal. Rows sharing a
//! missing pattern share one factorization of `Σ_oo`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::MaskedMatrix;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Scalar;

pub const CORRELATION_VERSION: u32 = 1;

/// Diagonal jitter tried, in order, when a `Σ_oo` block will not factor.
pub const JITTER_SCHEDULE: [f64; 3] = [1e-8, 1e-6, 1e-4];

/// Fixed number of work chunks for reductions, so the summation order does
/// not depend on the thread count.
const REDUCE_CHUNKS: usize = 16;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Latent correlation matrix `Σ` of the Gaussian copula.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationModel<S> {
    sigma: Matrix<S>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct CorrelationDoc<S> {
    version: u32,
    dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> CorrelationModel<S> {
    pub fn identity(m: usize) -> Self {
        Self {
            sigma: Matrix::identity(m),
        }
    }

    /// Wraps a matrix without checking the correlation invariants. Used for
    /// pre-scale iterates and for externally supplied matrices that are
    /// validated with [`CorrelationModel::check`].
    pub fn from_matrix_unchecked(sigma: Matrix<S>) -> Self {
        Self { sigma }
    }

    pub fn from_matrix(sigma: Matrix<S>) -> Result<Self> {
        let model = Self { sigma };
        model.check(S::lit(1e-12))?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.sigma.rows()
    }

    pub fn sigma(&self) -> &Matrix<S> {
        &self.sigma
    }

    pub fn into_matrix(self) -> Matrix<S> {
        self.sigma
    }

    /// Verifies symmetry and unit diagonal to `tol`, off-diagonals in
    /// `[-1, 1]`, and smallest eigenvalue at least `-1e-8`.
    pub fn check(&self, tol: S) -> Result<()> {
        let s = &self.sigma;
        if !s.is_square() {
            return Err(Error::Shape("correlation matrix is not square".into()));
        }
        if s.asymmetry() > tol {
            return Err(Error::Numerical(format!(
                "correlation asymmetry {} exceeds {tol}",
                s.asymmetry()
            )));
        }
        for i in 0..s.rows() {
            if (s[(i, i)] - S::one()).abs() > tol {
                return Err(Error::Numerical(format!(
                    "diagonal entry {i} is {}, not 1",
                    s[(i, i)]
                )));
            }
            for j in 0..s.cols() {
                if s[(i, j)].abs() > S::one() + tol {
                    return Err(Error::Numerical(format!(
                        "entry ({i}, {j}) = {} outside [-1, 1]",
                        s[(i, j)]
                    )));
                }
            }
        }
        let mut shifted = s.clone();
        shifted.add_diagonal(S::lit(1e-8) * S::lit(1.0 + 1e-6));
        if shifted.cholesky().is_none() {
            return Err(Error::Numerical(
                "correlation matrix has an eigenvalue below -1e-8".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = CorrelationDoc {
            version: CORRELATION_VERSION,
            dim: self.dim(),
            data: self.sigma.as_slice().to_vec(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CorrelationDoc<S> = serde_json::from_str(text)?;
        if doc.version != CORRELATION_VERSION {
            return Err(Error::Contract(format!(
                "correlation dump version {} is not supported",
                doc.version
            )));
        }
        Ok(Self {
            sigma: Matrix::from_row_major(doc.dim, doc.dim, doc.data)?,
        })
    }

    fn pin_identity(&mut self, cols: &[usize]) {
        let m = self.dim();
        for &c in cols {
            for k in 0..m {
                self.sigma[(c, k)] = S::zero();
                self.sigma[(k, c)] = S::zero();
            }
            self.sigma[(c, c)] = S::one();
        }
    }
}

impl<S: Scalar> Serialize for CorrelationModel<S> {
    fn serialize<Ser: serde::Serializer>(&self, ser: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        CorrelationDoc {
            version: CORRELATION_VERSION,
            dim: self.dim(),
            data: self.sigma.as_slice().to_vec(),
        }
        .serialize(ser)
    }
}

impl<'de, S: Scalar> Deserialize<'de> for CorrelationModel<S> {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let doc = CorrelationDoc::<S>::deserialize(de)?;
        let sigma = Matrix::from_row_major(doc.dim, doc.dim, doc.data)
            .map_err(serde::de::Error::custom)?;
        Ok(Self { sigma })
    }
}

/// Which expected second moment the M-step averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SecondMoment {
    /// `E[z z^T | z_o]`, including the conditional covariance of the
    /// missing block.
    Full,
    /// Outer product of the filled vector only.
    Plugin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once `||Σ_new - Σ||_F / ||Σ||_F` falls below this.
    pub rel_tol: f64,
    /// Added to the diagonal at every M-step.
    pub ridge: f64,
    /// Rescale each iterate to a correlation matrix. Turning this off gives
    /// plain zero-mean covariance EM.
    pub rescale: bool,
    pub plugin_moment: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            rel_tol: 1e-3,
            ridge: 1e-6,
            rescale: true,
            plugin_moment: false,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Spec("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Spec("rel_tol must be positive".into()));
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return Err(Error::Spec("ridge must be a nonnegative number".into()));
        }
        Ok(())
    }

    fn moment(&self) -> SecondMoment {
        if self.plugin_moment {
            SecondMoment::Plugin
        } else {
            SecondMoment::Full
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Observed-data log-likelihood of the starting point.
    pub initial_loglik: f64,
    pub loglik_trace: Vec<f64>,
    pub sigma_delta_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub fallback_columns: Vec<usize>,
}

/// Conditional distribution of `z_mis` given `z_obs` for one observation
/// pattern: `mean = Σ_mo Σ_oo⁻¹ z_o`, `cov = Σ_mm - Σ_mo Σ_oo⁻¹ Σ_om`.
#[derive(Debug, Clone)]
pub struct ConditionalSolver<S> {
    observed: Vec<usize>,
    missing: Vec<usize>,
    /// `Σ_oo⁻¹ Σ_om`, `|o| x |m|`.
    coef: Matrix<S>,
    cov: Option<Matrix<S>>,
    factor: Option<Cholesky<S>>,
    jitter: S,
}

impl<S: Scalar> ConditionalSolver<S> {
    pub fn new(
        sigma: &Matrix<S>,
        observed: &[usize],
        missing: &[usize],
        with_cov: bool,
    ) -> Result<Self> {
        if observed.iter().any(|o| missing.contains(o)) {
            return Err(Error::Contract(
                "observed and missing index sets overlap".into(),
            ));
        }
        let m = sigma.rows();
        if observed.iter().chain(missing).any(|&k| k >= m) {
            return Err(Error::Shape(format!("index outside a {m}-dim Σ")));
        }
        let s_mm = || sigma.select(missing, missing);
        if observed.is_empty() {
            return Ok(Self {
                observed: Vec::new(),
                missing: missing.to_vec(),
                coef: Matrix::zeros(0, missing.len()),
                cov: with_cov.then(s_mm),
                factor: None,
                jitter: S::zero(),
            });
        }
        let s_oo = sigma.select(observed, observed);
        let (factor, jitter) = s_oo.cholesky_with_jitter(&JITTER_SCHEDULE)?;
        let s_om = sigma.select(observed, missing);
        let coef = factor.solve_mat(&s_om);
        let cov = with_cov.then(|| {
            let mut c = s_mm();
            let (no, nm) = (observed.len(), missing.len());
            for a in 0..nm {
                for b in a..nm {
                    let mut s = S::zero();
                    for k in 0..no {
                        s += s_om[(k, a)] * coef[(k, b)];
                    }
                    let v = c[(a, b)] - s;
                    c[(a, b)] = v;
                    c[(b, a)] = v;
                }
            }
            c
        });
        Ok(Self {
            observed: observed.to_vec(),
            missing: missing.to_vec(),
            coef,
            cov,
            factor: Some(factor),
            jitter,
        })
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn missing(&self) -> &[usize] {
        &self.missing
    }

    /// Jitter that had to be added to `Σ_oo` for it to factor.
    pub fn jitter(&self) -> S {
        self.jitter
    }

    pub fn mean(&self, z_obs: &[S]) -> Vec<S> {
        debug_assert_eq!(z_obs.len(), self.observed.len());
        let nm = self.missing.len();
        let mut out = vec![S::zero(); nm];
        for (k, &z) in z_obs.iter().enumerate() {
            for (a, o) in out.iter_mut().enumerate() {
                *o += self.coef[(k, a)] * z;
            }
        }
        out
    }

    pub fn cov(&self) -> Option<&Matrix<S>> {
        self.cov.as_ref()
    }

    /// `log N(z_obs; 0, Σ_oo)`.
    pub fn observed_log_density(&self, z_obs: &[S]) -> S {
        match &self.factor {
            None => S::zero(),
            Some(f) => {
                let k = S::count(self.observed.len());
                -S::lit(0.5) * (k * S::lit(LN_2PI) + f.log_det() + f.quad_form(z_obs))
            }
        }
    }
}

/// Conditional mean and covariance of the `mis_idx` coordinates given
/// `z_obs` at `obs_idx`.
pub fn conditional_dist<S: Scalar>(
    sigma: &CorrelationModel<S>,
    obs_idx: &[usize],
    mis_idx: &[usize],
    z_obs: &[S],
) -> Result<(Vec<S>, Matrix<S>)> {
    if z_obs.len() != obs_idx.len() {
        return Err(Error::Shape(format!(
            "{} observed values for {} observed indices",
            z_obs.len(),
            obs_idx.len()
        )));
    }
    let solver = ConditionalSolver::new(&sigma.sigma, obs_idx, mis_idx, true)?;
    let mean = solver.mean(z_obs);
    Ok((mean, solver.cov.expect("requested")))
}

/// Rows bucketed by identical observation pattern, in a fixed order.
#[derive(Debug, Clone)]
pub struct PatternGroup {
    pub observed: Vec<usize>,
    pub missing: Vec<usize>,
    pub rows: Vec<usize>,
}

pub fn group_patterns<S: Scalar>(z: &MaskedMatrix<S>) -> Vec<PatternGroup> {
    let mut buckets: BTreeMap<&[bool], Vec<usize>> = BTreeMap::new();
    for i in 0..z.nrows() {
        buckets.entry(z.row_mask(i)).or_default().push(i);
    }
    buckets
        .into_iter()
        .map(|(pattern, rows)| PatternGroup {
            observed: (0..pattern.len()).filter(|&j| pattern[j]).collect(),
            missing: (0..pattern.len()).filter(|&j| !pattern[j]).collect(),
            rows,
        })
        .collect()
}

fn chunk_ranges(len: usize) -> Vec<std::ops::Range<usize>> {
    let chunks = REDUCE_CHUNKS.min(len).max(1);
    (0..chunks)
        .map(|c| (c * len / chunks)..((c + 1) * len / chunks))
        .collect()
}

fn observed_values<S: Scalar>(z: &MaskedMatrix<S>, row: usize, observed: &[usize]) -> Vec<S> {
    let vals = z.row_values(row);
    observed.iter().map(|&j| vals[j]).collect()
}

/// Adds the upper triangle of `v v^T` into `acc`.
#[inline]
fn add_outer_upper<S: Scalar>(acc: &mut Matrix<S>, v: &[S]) {
    let m = v.len();
    let data = acc.as_mut_slice();
    for a in 0..m {
        let va = v[a];
        if va == S::zero() {
            continue;
        }
        let row = &mut data[a * m..(a + 1) * m];
        for b in a..m {
            row[b] += va * v[b];
        }
    }
}

fn mirror_upper<S: Scalar>(acc: &mut Matrix<S>) {
    let m = acc.rows();
    for a in 0..m {
        for b in (a + 1)..m {
            acc[(b, a)] = acc[(a, b)];
        }
    }
}

/// Output of [`e_step`].
#[derive(Debug, Clone)]
pub struct EStep<S> {
    /// Input with every missing coordinate set to its conditional mean.
    pub filled: MaskedMatrix<S>,
    /// `Σ_i E[z_i z_i^T | z_i^o]`.
    pub moment_sum: Matrix<S>,
    pub n_rows: usize,
}

/// Conditional means for every missing cell plus the summed expected second
/// moments. Groups are processed in parallel; the reduction order is fixed.
pub fn e_step<S: Scalar>(
    z: &MaskedMatrix<S>,
    sigma: &CorrelationModel<S>,
    moment: SecondMoment,
) -> Result<EStep<S>> {
    let m = z.ncols();
    if sigma.dim() != m {
        return Err(Error::Shape(format!(
            "Σ is {}-dimensional, latent matrix has {m} columns",
            sigma.dim()
        )));
    }
    let groups = group_patterns(z);
    let with_cov = moment == SecondMoment::Full;

    type Partial<S> = (Matrix<S>, Vec<(usize, Vec<S>)>);
    let partials: Vec<Partial<S>> = chunk_ranges(groups.len())
        .into_par_iter()
        .map(|range| -> Result<Partial<S>> {
            let mut acc = Matrix::zeros(m, m);
            let mut rows_out = Vec::new();
            for g in &groups[range] {
                let solver = ConditionalSolver::new(sigma.sigma(), &g.observed, &g.missing, with_cov)
                    .map_err(|e| Error::Numerical(format!("row {}: {e}", g.rows[0])))?;
                for &r in &g.rows {
                    let z_o = observed_values(z, r, &g.observed);
                    let mean = solver.mean(&z_o);
                    let mut full = vec![S::zero(); m];
                    for (k, &j) in g.observed.iter().enumerate() {
                        full[j] = z_o[k];
                    }
                    for (a, &j) in g.missing.iter().enumerate() {
                        full[j] = mean[a];
                    }
                    add_outer_upper(&mut acc, &full);
                    rows_out.push((r, full));
                }
                if let Some(cov) = solver.cov() {
                    let count = S::count(g.rows.len());
                    for (a, &ja) in g.missing.iter().enumerate() {
                        for (b, &jb) in g.missing.iter().enumerate() {
                            if ja <= jb {
                                acc[(ja, jb)] += count * cov[(a, b)];
                            }
                        }
                    }
                }
            }
            Ok((acc, rows_out))
        })
        .collect::<Result<_>>()?;

    let mut moment_sum = Matrix::zeros(m, m);
    let mut filled_values = vec![S::zero(); z.nrows() * m];
    for (acc, rows) in partials {
        for (dst, src) in moment_sum.as_mut_slice().iter_mut().zip(acc.as_slice()) {
            *dst += *src;
        }
        for (r, full) in rows {
            filled_values[r * m..(r + 1) * m].copy_from_slice(&full);
        }
    }
    mirror_upper(&mut moment_sum);
    Ok(EStep {
        filled: MaskedMatrix::complete(z.nrows(), m, filled_values)?,
        moment_sum,
        n_rows: z.nrows(),
    })
}

/// Filled vector and expected second moment of a single row.
pub fn row_second_moment<S: Scalar>(
    sigma: &CorrelationModel<S>,
    row: &[Option<S>],
    moment: SecondMoment,
) -> Result<(Vec<S>, Matrix<S>)> {
    let observed: Vec<usize> = (0..row.len()).filter(|&j| row[j].is_some()).collect();
    let missing: Vec<usize> = (0..row.len()).filter(|&j| row[j].is_none()).collect();
    let z_o: Vec<S> = observed.iter().map(|&j| row[j].expect("observed")).collect();
    let solver = ConditionalSolver::new(sigma.sigma(), &observed, &missing, moment == SecondMoment::Full)?;
    let mean = solver.mean(&z_o);
    let mut full = vec![S::zero(); row.len()];
    for (k, &j) in observed.iter().enumerate() {
        full[j] = z_o[k];
    }
    for (a, &j) in missing.iter().enumerate() {
        full[j] = mean[a];
    }
    let mut out = Matrix::from_fn(row.len(), row.len(), |a, b| full[a] * full[b]);
    if let Some(cov) = solver.cov() {
        for (a, &ja) in missing.iter().enumerate() {
            for (b, &jb) in missing.iter().enumerate() {
                out[(ja, jb)] += cov[(a, b)];
            }
        }
    }
    Ok((full, out))
}

/// `(1/N) Σ_i E[z_i z_i^T | z_i^o] + ridge I`.
pub fn m_step<S: Scalar>(moments: &EStep<S>, ridge: S) -> Result<Matrix<S>> {
    if moments.n_rows == 0 {
        return Err(Error::Domain("M-step needs at least one row".into()));
    }
    let mut out = moments.moment_sum.clone();
    out.scale_in_place(S::count(moments.n_rows).recip());
    out.add_diagonal(ridge);
    Ok(out)
}

/// `D^{-1/2} Σ D^{-1/2}` with `D = diag(Σ)`.
pub fn scale_to_correlation<S: Scalar>(raw: &Matrix<S>) -> Result<CorrelationModel<S>> {
    if !raw.is_square() {
        return Err(Error::Shape("cannot rescale a non-square matrix".into()));
    }
    let m = raw.rows();
    let mut d = Vec::with_capacity(m);
    for i in 0..m {
        let v = raw[(i, i)];
        if !(v > S::zero()) || !v.is_finite() {
            return Err(Error::Numerical(format!(
                "diagonal entry {i} = {v} is not positive"
            )));
        }
        d.push(v.sqrt());
    }
    let mut out = Matrix::zeros(m, m);
    for i in 0..m {
        out[(i, i)] = S::one();
        for j in (i + 1)..m {
            let v = raw[(i, j)] / (d[i] * d[j]);
            let v = v.max(-S::one()).min(S::one());
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(CorrelationModel { sigma: out })
}

/// `Σ^(0)`: the rescaled second-moment matrix of the zero-filled data.
pub fn init_sigma<S: Scalar>(z: &MaskedMatrix<S>, ridge: S) -> Result<CorrelationModel<S>> {
    let m = z.ncols();
    if m == 0 {
        return Err(Error::Domain("latent matrix has no columns".into()));
    }
    if z.nrows() == 0 {
        return Err(Error::Domain("latent matrix has no rows".into()));
    }
    let rows: Vec<usize> = (0..z.nrows()).collect();
    let partials: Vec<Matrix<S>> = chunk_ranges(rows.len())
        .into_par_iter()
        .map(|range| {
            let mut acc = Matrix::zeros(m, m);
            let mut buf = vec![S::zero(); m];
            for r in range {
                for (j, b) in buf.iter_mut().enumerate() {
                    *b = z.get(r, j).unwrap_or(S::zero());
                }
                add_outer_upper(&mut acc, &buf);
            }
            acc
        })
        .collect();
    let mut sum = Matrix::zeros(m, m);
    for acc in partials {
        for (dst, src) in sum.as_mut_slice().iter_mut().zip(acc.as_slice()) {
            *dst += *src;
        }
    }
    mirror_upper(&mut sum);
    let est = EStep {
        filled: MaskedMatrix::complete(0, m, Vec::new())?,
        moment_sum: sum,
        n_rows: z.nrows(),
    };
    let mut raw = CorrelationModel::from_matrix_unchecked(m_step(&est, ridge)?);
    raw.pin_identity(&fallback_columns(z));
    scale_to_correlation(raw.sigma())
}

/// Columns with no observed cells.
pub fn fallback_columns<S: Scalar>(z: &MaskedMatrix<S>) -> Vec<usize> {
    (0..z.ncols())
        .filter(|&j| z.column_observed_count(j) == 0)
        .collect()
}

/// `(1/N) Σ_i log N(z_i^o; 0, Σ_{o_i o_i})`. Rows without observations
/// contribute zero.
pub fn observed_loglik<S: Scalar>(z: &MaskedMatrix<S>, sigma: &CorrelationModel<S>) -> Result<S> {
    if sigma.dim() != z.ncols() {
        return Err(Error::Shape(format!(
            "Σ is {}-dimensional, latent matrix has {} columns",
            sigma.dim(),
            z.ncols()
        )));
    }
    if z.nrows() == 0 {
        return Err(Error::Domain("latent matrix has no rows".into()));
    }
    let groups = group_patterns(z);
    let partials: Vec<S> = chunk_ranges(groups.len())
        .into_par_iter()
        .map(|range| -> Result<S> {
            let mut acc = S::zero();
            for g in &groups[range] {
                if g.observed.is_empty() {
                    continue;
                }
                let s_oo = sigma.sigma().select(&g.observed, &g.observed);
                let factor = s_oo.cholesky().ok_or_else(|| {
                    Error::Numerical(format!(
                        "Σ_oo for row {} is not positive definite",
                        g.rows[0]
                    ))
                })?;
                let k = S::count(g.observed.len());
                let constant = k * S::lit(LN_2PI) + factor.log_det();
                for &r in &g.rows {
                    let z_o = observed_values(z, r, &g.observed);
                    acc += -S::lit(0.5) * (constant + factor.quad_form(&z_o));
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let total: S = partials.into_iter().fold(S::zero(), |a, b| a + b);
    Ok(total / S::count(z.nrows()))
}

/// Runs EM from [`init_sigma`] until the relative Frobenius change of `Σ`
/// drops below `rel_tol` or `max_iters` is reached.
pub fn fit_em<S: Scalar>(
    z: &MaskedMatrix<S>,
    config: &EmConfig,
) -> Result<(CorrelationModel<S>, FitDiagnostics)> {
    config.validate()?;
    let m = z.ncols();
    if m == 0 || z.nrows() == 0 {
        return Err(Error::Domain(format!(
            "EM needs a nonempty latent matrix, got {}x{m}",
            z.nrows()
        )));
    }
    let fallback = fallback_columns(z);
    if m == 1 {
        let sigma = CorrelationModel::identity(1);
        let initial_loglik = observed_loglik(z, &sigma)?.as_f64();
        return Ok((
            sigma,
            FitDiagnostics {
                initial_loglik,
                converged: true,
                fallback_columns: fallback,
                ..FitDiagnostics::default()
            },
        ));
    }
    let ridge = S::lit(config.ridge);
    let mut sigma = init_sigma(z, ridge)?;
    let mut diag = FitDiagnostics {
        initial_loglik: observed_loglik(z, &sigma)
            .map_err(|e| e.in_stage("em iteration 0"))?
            .as_f64(),
        fallback_columns: fallback.clone(),
        ..FitDiagnostics::default()
    };
    for iter in 1..=config.max_iters {
        let stage = |e: Error| Error::Numerical(format!("em iteration {iter}: {e}"));
        let est = e_step(z, &sigma, config.moment()).map_err(stage)?;
        let raw = m_step(&est, ridge).map_err(stage)?;
        let mut next = if config.rescale {
            scale_to_correlation(&raw).map_err(stage)?
        } else {
            CorrelationModel::from_matrix_unchecked(raw)
        };
        next.pin_identity(&fallback);
        let delta = next.sigma.frobenius_distance(&sigma.sigma) / sigma.sigma.frobenius_norm();
        sigma = next;
        diag.loglik_trace
            .push(observed_loglik(z, &sigma).map_err(stage)?.as_f64());
        diag.sigma_delta_trace.push(delta.as_f64());
        diag.iterations_run = iter;
        log::debug!("em iteration {iter}: delta {delta}");
        if delta < S::lit(config.rel_tol) {
            diag.converged = true;
            break;
        }
    }
    Ok((sigma, diag))
}
