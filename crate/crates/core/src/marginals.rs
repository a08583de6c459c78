//! Per-column marginal models and the copula transform `z = Φ⁻¹(P_j(v))`.
//!
//! Continuous columns use an empirical CDF with `rank / (n + 1)` plotting
//! positions, so every probability stays inside `(0, 1)`. Ordinal columns use
//! cumulative level frequencies and invert by interval membership: level `k`
//! is returned when `P(k-1) < Φ(z) <= P(k)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, ColumnSpec, MaskedMatrix, UnfoldedMatrix};
use crate::error::{Error, Result};
use crate::normal::{std_normal_cdf, std_normal_quantile};
use crate::scalar::Scalar;

pub const MARGINALS_VERSION: u32 = 1;

/// Interpolation positions this close to an order statistic snap onto it.
const NODE_SNAP: f64 = 1e-9;

/// Empirical CDF over a column's observed training values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct EmpiricalMarginal<S> {
    sorted_values: Vec<S>,
}

impl<S: Scalar> EmpiricalMarginal<S> {
    pub fn fit(values: &[S]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("empirical marginal needs at least one value".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("empirical marginal given a non-finite value".into()));
        }
        let mut sorted_values = values.to_vec();
        sorted_values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(Self { sorted_values })
    }

    pub fn n(&self) -> usize {
        self.sorted_values.len()
    }

    pub fn sorted_values(&self) -> &[S] {
        &self.sorted_values
    }

    pub fn min(&self) -> S {
        self.sorted_values[0]
    }

    pub fn max(&self) -> S {
        self.sorted_values[self.n() - 1]
    }

    /// `#{v_i <= x} / (n + 1)`; ties take the largest rank. Inputs below the
    /// sample minimum get half a step so the result never reaches 0.
    pub fn cdf(&self, x: S) -> S {
        let below = self.sorted_values.partition_point(|&v| v <= x);
        let rank = if below == 0 {
            S::lit(0.5)
        } else {
            S::count(below)
        };
        rank / S::count(self.n() + 1)
    }

    /// Piecewise-linear inverse through the points `(i / (n + 1), x_(i))`,
    /// clamped to `[min, max]`.
    pub fn quantile(&self, u: S) -> S {
        let n = self.n();
        let h = u * S::count(n + 1);
        if !(h > S::one()) {
            return self.min();
        }
        if h >= S::count(n) {
            return self.max();
        }
        let nearest = h.round();
        if (h - nearest).abs() <= S::lit(NODE_SNAP) {
            let r = nearest.to_usize().expect("in range");
            return self.sorted_values[r - 1];
        }
        let lo = h.floor();
        let frac = h - lo;
        let lo = lo.to_usize().expect("in range");
        let a = self.sorted_values[lo - 1];
        let b = self.sorted_values[lo];
        a + frac * (b - a)
    }
}

/// Cumulative level frequencies of an ordinal column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct OrdinalMarginal<S> {
    levels: Vec<S>,
    cum_probs: Vec<S>,
    n: usize,
}

impl<S: Scalar> OrdinalMarginal<S> {
    pub fn fit(values: &[S], levels: &[S], feature: &str) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("ordinal marginal needs at least one value".into()));
        }
        if levels.is_empty() || !levels.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Spec(format!(
                "ordinal levels of {feature:?} must be non-empty and strictly increasing"
            )));
        }
        let mut counts = vec![0usize; levels.len()];
        for &v in values {
            match levels.iter().position(|&l| l == v) {
                Some(k) => counts[k] += 1,
                None => {
                    return Err(Error::UndeclaredLevel {
                        feature: feature.to_owned(),
                        value: v.as_f64(),
                    })
                }
            }
        }
        let n = values.len();
        let mut running = 0usize;
        let mut cum_probs: Vec<S> = counts
            .iter()
            .map(|&c| {
                running += c;
                S::count(running) / S::count(n)
            })
            .collect();
        *cum_probs.last_mut().expect("non-empty") = S::one();
        Ok(Self {
            levels: levels.to_vec(),
            cum_probs,
            n,
        })
    }

    pub fn levels(&self) -> &[S] {
        &self.levels
    }

    pub fn cum_probs(&self) -> &[S] {
        &self.cum_probs
    }

    fn lower(&self, k: usize) -> S {
        if k == 0 {
            S::zero()
        } else {
            self.cum_probs[k - 1]
        }
    }

    /// Probability assigned to a level on the way into latent space: the
    /// midpoint of its CDF interval. Zero-frequency levels sit on the
    /// interval boundary, kept half a count away from 0 and 1.
    pub fn level_probability(&self, value: S, feature: &str) -> Result<S> {
        let k = self
            .levels
            .iter()
            .position(|&l| l == value)
            .ok_or_else(|| Error::UndeclaredLevel {
                feature: feature.to_owned(),
                value: value.as_f64(),
            })?;
        let lo = self.lower(k);
        let hi = self.cum_probs[k];
        if hi > lo {
            return Ok((lo + hi) * S::lit(0.5));
        }
        let edge = S::lit(0.5) / S::count(self.n);
        Ok(lo.max(edge).min(S::one() - edge))
    }

    /// Level `k` with `P(k-1) < u <= P(k)`, skipping zero-frequency levels.
    pub fn level_for(&self, u: S) -> S {
        let k = self
            .cum_probs
            .partition_point(|&c| c < u || c <= S::zero());
        self.levels[k.min(self.levels.len() - 1)]
    }
}

/// Marginal model of one unfolded column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "S: Scalar")]
pub enum Marginal<S> {
    Continuous(EmpiricalMarginal<S>),
    Ordinal(OrdinalMarginal<S>),
    /// No training observations: identity into latent space, constant out.
    Fallback { fill: S },
}

impl<S: Scalar> Marginal<S> {
    /// `F_j(v)`.
    pub fn to_latent(&self, v: S, feature: &str) -> Result<S> {
        match self {
            Marginal::Continuous(m) => std_normal_quantile(m.cdf(v)),
            Marginal::Ordinal(m) => std_normal_quantile(m.level_probability(v, feature)?),
            Marginal::Fallback { .. } => Ok(v),
        }
    }

    /// `F_j⁻¹(z)`.
    pub fn from_latent(&self, z: S) -> S {
        match self {
            Marginal::Continuous(m) => m.quantile(std_normal_cdf(z)),
            Marginal::Ordinal(m) => m.level_for(std_normal_cdf(z)),
            Marginal::Fallback { fill } => *fill,
        }
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self, Marginal::Fallback { .. })
    }
}

/// Fits one marginal from a column's observed values.
pub fn fit_marginal<S: Scalar>(values: &[S], spec: &ColumnSpec) -> Result<Marginal<S>> {
    match spec.kind {
        ColumnKind::Continuous => Ok(Marginal::Continuous(EmpiricalMarginal::fit(values)?)),
        ColumnKind::Ordinal => {
            let levels: Vec<S> = spec
                .ordinal_levels
                .as_deref()
                .unwrap_or_default()
                .iter()
                .map(|&l| S::lit(l))
                .collect();
            Ok(Marginal::Ordinal(OrdinalMarginal::fit(
                values,
                &levels,
                &spec.feature_name,
            )?))
        }
    }
}

/// Heuristic for a continuous-declared column that might be ordinal: at most
/// 20 distinct values, all integral.
pub fn looks_ordinal<S: Scalar>(values: &[S]) -> bool {
    if values.is_empty() || values.iter().any(|v| v.fract() != S::zero()) {
        return false;
    }
    let mut distinct: Vec<S> = values.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    distinct.dedup();
    distinct.len() <= 20
}

/// One marginal per unfolded column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct MarginalSet<S> {
    pub version: u32,
    pub feature_names: Vec<String>,
    /// Feature each column belongs to.
    pub column_features: Vec<usize>,
    pub columns: Vec<Marginal<S>>,
}

impl<S: Scalar> MarginalSet<S> {
    /// Fits every column of `v` from its observed cells. `specs` is indexed by
    /// feature and must cover all features of `v`.
    pub fn fit(v: &UnfoldedMatrix<S>, specs: &[ColumnSpec]) -> Result<Self> {
        if specs.len() != v.n_features {
            return Err(Error::Shape(format!(
                "{} column specs for {} features",
                specs.len(),
                v.n_features
            )));
        }
        for (f, spec) in specs.iter().enumerate() {
            if spec.feature_name != v.feature_names[f] {
                return Err(Error::Spec(format!(
                    "spec {f} is for {:?}, feature is {:?}",
                    spec.feature_name, v.feature_names[f]
                )));
            }
            spec.validate()?;
        }
        let column_features: Vec<usize> = v.column_index.iter().map(|k| k.feature).collect();
        let columns = (0..v.ncols())
            .into_par_iter()
            .map(|j| {
                let spec = &specs[column_features[j]];
                let values = v.matrix.column_observed(j);
                if values.is_empty() {
                    let fill = match (&spec.kind, spec.ordinal_levels.as_deref()) {
                        (ColumnKind::Ordinal, Some(levels)) if !levels.is_empty() => {
                            S::lit(levels[(levels.len() - 1) / 2])
                        }
                        _ => S::zero(),
                    };
                    Ok(Marginal::Fallback { fill })
                } else {
                    fit_marginal(&values, spec)
                }
            })
            .collect::<Result<Vec<_>>>()?;

        for (f, spec) in specs.iter().enumerate() {
            if spec.kind != ColumnKind::Continuous {
                continue;
            }
            let pooled: Vec<S> = (0..v.ncols())
                .filter(|&j| column_features[j] == f)
                .flat_map(|j| v.matrix.column_observed(j))
                .collect();
            if looks_ordinal(&pooled) {
                log::info!(
                    "feature {:?} has few integral values; consider declaring it ordinal",
                    spec.feature_name
                );
            }
        }
        Ok(Self {
            version: MARGINALS_VERSION,
            feature_names: v.feature_names.clone(),
            column_features,
            columns,
        })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn fallback_columns(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| self.columns[j].is_fallback())
            .collect()
    }

    fn feature_of(&self, j: usize) -> &str {
        &self.feature_names[self.column_features[j]]
    }

    /// Latent matrix with the same mask as `v`.
    pub fn to_latent(&self, v: &MaskedMatrix<S>) -> Result<MaskedMatrix<S>> {
        if v.ncols() != self.len() {
            return Err(Error::Shape(format!(
                "matrix has {} columns, marginal set has {}",
                v.ncols(),
                self.len()
            )));
        }
        let m = self.len();
        let rows: Vec<Vec<S>> = (0..v.nrows())
            .into_par_iter()
            .map(|i| {
                (0..m)
                    .map(|j| match v.get(i, j) {
                        Some(x) => self.columns[j].to_latent(x, self.feature_of(j)),
                        None => Ok(S::nan()),
                    })
                    .collect::<Result<Vec<S>>>()
            })
            .collect::<Result<_>>()?;
        MaskedMatrix::new(v.nrows(), m, rows.concat(), v.mask().to_vec())
    }

    /// Inverts every present cell of a latent matrix.
    pub fn from_latent(&self, z: &MaskedMatrix<S>) -> Result<MaskedMatrix<S>> {
        if z.ncols() != self.len() {
            return Err(Error::Shape(format!(
                "latent matrix has {} columns, marginal set has {}",
                z.ncols(),
                self.len()
            )));
        }
        let m = self.len();
        let rows: Vec<Vec<S>> = (0..z.nrows())
            .into_par_iter()
            .map(|i| {
                (0..m)
                    .map(|j| match z.get(i, j) {
                        Some(x) => self.columns[j].from_latent(x),
                        None => S::nan(),
                    })
                    .collect()
            })
            .collect();
        MaskedMatrix::new(z.nrows(), m, rows.concat(), z.mask().to_vec())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(text)?;
        if set.version != MARGINALS_VERSION {
            return Err(Error::Contract(format!(
                "marginal set version {} is not supported",
                set.version
            )));
        }
        if set.columns.len() != set.column_features.len() {
            return Err(Error::Shape("marginal set column count mismatch".into()));
        }
        Ok(set)
    }
}

pub fn to_latent<S: Scalar>(v: &UnfoldedMatrix<S>, m: &MarginalSet<S>) -> Result<MaskedMatrix<S>> {
    m.to_latent(&v.matrix)
}

pub fn from_latent<S: Scalar>(z: &MaskedMatrix<S>, m: &MarginalSet<S>) -> Result<MaskedMatrix<S>> {
    m.from_latent(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{unfold, MtsTensor};

    #[test]
    fn ecdf_plotting_positions() {
        let m = EmpiricalMarginal::<f64>::fit(&[3.0, 1.0, 4.0, 2.0]).unwrap();
        for (x, p) in [(1.0, 0.2), (2.0, 0.4), (3.0, 0.6), (4.0, 0.8)] {
            assert!((m.cdf(x) - p).abs() < 1e-15);
        }
        let single = EmpiricalMarginal::fit(&[7.0]).unwrap();
        assert_eq!(single.cdf(7.0), 0.5);
    }

    #[test]
    fn ecdf_ties_take_max_rank_and_stay_open() {
        let m = EmpiricalMarginal::<f64>::fit(&[1.0, 2.0, 2.0, 3.0]).unwrap();
        assert!((m.cdf(2.0) - 0.6).abs() < 1e-15);
        assert!(m.cdf(-100.0) > 0.0);
        assert!(m.cdf(100.0) < 1.0);
    }

    #[test]
    fn quantile_clamps_and_interpolates() {
        let m = EmpiricalMarginal::<f64>::fit(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.quantile(0.01), 1.0);
        assert_eq!(m.quantile(0.99), 4.0);
        assert!((m.quantile(0.5) - 2.5).abs() < 1e-12);
        assert_eq!(m.quantile(0.4), 2.0);
    }

    #[test]
    fn latent_of_second_value() {
        let spec = ColumnSpec::continuous("x");
        let m = fit_marginal(&[1.0, 2.0, 3.0, 4.0], &spec).unwrap();
        let z: f64 = m.to_latent(2.0, "x").unwrap();
        assert!((z - (-0.253_347_103_135_799_7)).abs() < 1e-9);
        let sym = fit_marginal::<f64>(&[1.0, 2.0, 3.0], &spec).unwrap();
        assert!(sym.to_latent(2.0, "x").unwrap().abs() < 1e-15);
    }

    #[test]
    fn ordinal_frequencies_and_interval_rule() {
        let spec = ColumnSpec::ordinal_k("o", 3).unwrap();
        let m = match fit_marginal(&[1.0, 1.0, 2.0, 3.0], &spec).unwrap() {
            Marginal::Ordinal(m) => m,
            other => panic!("{other:?}"),
        };
        assert_eq!(m.cum_probs(), &[0.5, 0.75, 1.0]);
        let marg = Marginal::Ordinal(m);
        assert_eq!(marg.from_latent(0.0), 1.0);
        let z06 = std_normal_quantile(0.6).unwrap();
        let z09 = std_normal_quantile(0.9).unwrap();
        assert_eq!(marg.from_latent(z06), 2.0);
        assert_eq!(marg.from_latent(z09), 3.0);
        for k in [1.0, 2.0, 3.0] {
            assert_eq!(marg.from_latent(marg.to_latent(k, "o").unwrap()), k);
        }
    }

    #[test]
    fn ordinal_rejects_undeclared_values() {
        let spec = ColumnSpec::ordinal_k("o", 3).unwrap();
        let err = fit_marginal(&[1.0, 4.0], &spec).unwrap_err();
        match err {
            Error::UndeclaredLevel { value, feature } => {
                assert_eq!(value, 4.0);
                assert_eq!(feature, "o");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ordinal_zero_frequency_levels_are_skipped() {
        let spec = ColumnSpec::ordinal_k("o", 4).unwrap();
        let marg = fit_marginal(&[2.0, 2.0, 4.0], &spec).unwrap();
        let z1: f64 = marg.to_latent(1.0, "o").unwrap();
        let z3: f64 = marg.to_latent(3.0, "o").unwrap();
        assert!(z1.is_finite() && z3.is_finite());
        for i in -60..=60 {
            let level = marg.from_latent(i as f64 * 0.1);
            assert!(level == 2.0 || level == 4.0);
        }
    }

    #[test]
    fn fully_missing_row_stays_missing() {
        let mut x = MtsTensor::from_fn(3, 2, 1, |i, t, _| (i + t) as f64).unwrap();
        x.set(1, 0, 0, None);
        x.set(1, 1, 0, None);
        let u = unfold(&x);
        let set = MarginalSet::fit(&u, &[ColumnSpec::continuous("f0")]).unwrap();
        let z = to_latent(&u, &set).unwrap();
        assert_eq!(z.row_mask(1), &[false, false]);
        assert!(z.row_mask(0).iter().all(|&m| m));
    }

    #[test]
    fn unobserved_column_falls_back() {
        let mut x = MtsTensor::from_fn(3, 2, 1, |i, t, _| (i + t) as f64).unwrap();
        for i in 0..3 {
            x.set(i, 1, 0, None);
        }
        let set = MarginalSet::fit(&unfold(&x), &[ColumnSpec::continuous("f0")]).unwrap();
        assert_eq!(set.fallback_columns(), vec![1]);
        assert_eq!(set.columns[1].from_latent(1.3), 0.0);
        assert_eq!(set.columns[1].to_latent(0.7, "f0").unwrap(), 0.7);
    }

    #[test]
    fn ordinal_heuristic() {
        assert!(looks_ordinal(&[1.0, 2.0, 2.0, 3.0]));
        assert!(!looks_ordinal(&[1.0, 2.5]));
        let many: Vec<f64> = (0..25).map(|i| i as f64).collect();
        assert!(!looks_ordinal(&many));
    }

    #[test]
    fn json_round_trip() {
        let x = MtsTensor::from_fn(4, 2, 2, |i, t, f| if f == 1 { (1 + (i + t) % 3) as f64 } else { i as f64 * 0.3 }).unwrap();
        let specs = [ColumnSpec::continuous("f0"), ColumnSpec::ordinal_k("f1", 3).unwrap()];
        let set = MarginalSet::fit(&unfold(&x), &specs).unwrap();
        let back = MarginalSet::<f64>::from_json(&set.to_json().unwrap()).unwrap();
        assert_eq!(back, set);
    }
}
