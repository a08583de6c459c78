//! Reference imputers the copula model is compared against.

use crate::data::MtsTensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_means<S: Scalar>(x: &MtsTensor<S>, feature_means: &[S]) -> Result<()> {
    if feature_means.len() != x.n_features() {
        return Err(Error::Shape(format!(
            "{} feature means for {} features",
            feature_means.len(),
            x.n_features()
        )));
    }
    Ok(())
}

/// Last observation carried forward along time, per sample and feature.
/// Leading gaps take the first later observation; series with no
/// observation at all take the feature's training mean.
pub fn baseline_locf<S: Scalar>(x: &MtsTensor<S>, feature_means: &[S]) -> Result<MtsTensor<S>> {
    check_means(x, feature_means)?;
    let mut out = x.clone();
    for i in 0..x.n_samples() {
        for f in 0..x.n_features() {
            let first = (0..x.n_steps()).find_map(|t| x.get(i, t, f));
            let mut carry = first.unwrap_or(feature_means[f]);
            for t in 0..x.n_steps() {
                match x.get(i, t, f) {
                    Some(v) => carry = v,
                    None => out.set(i, t, f, Some(carry)),
                }
            }
        }
    }
    Ok(out)
}

/// Every missing cell takes its feature's training mean.
pub fn baseline_mean<S: Scalar>(x: &MtsTensor<S>, feature_means: &[S]) -> Result<MtsTensor<S>> {
    check_means(x, feature_means)?;
    let mut out = x.clone();
    for i in 0..x.n_samples() {
        for t in 0..x.n_steps() {
            for f in 0..x.n_features() {
                if !x.is_observed(i, t, f) {
                    out.set(i, t, f, Some(feature_means[f]));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(vals: &[Option<f64>]) -> MtsTensor<f64> {
        let mut x = MtsTensor::from_fn(1, vals.len(), 1, |_, _, _| 0.0).unwrap();
        for (t, v) in vals.iter().enumerate() {
            x.set(0, t, 0, *v);
        }
        x
    }

    fn values(x: &MtsTensor<f64>) -> Vec<f64> {
        (0..x.n_steps()).map(|t| x.get(0, t, 0).unwrap()).collect()
    }

    #[test]
    fn carries_forward() {
        let x = series(&[Some(1.0), None, None, Some(4.0)]);
        assert_eq!(values(&baseline_locf(&x, &[0.0]).unwrap()), vec![1.0, 1.0, 1.0, 4.0]);
    }

    #[test]
    fn leading_gap_fills_backward() {
        let x = series(&[None, None, Some(3.0)]);
        assert_eq!(values(&baseline_locf(&x, &[0.0]).unwrap()), vec![3.0, 3.0, 3.0]);
    }

    #[test]
    fn empty_series_takes_mean() {
        let x = series(&[None, None, None]);
        assert_eq!(values(&baseline_locf(&x, &[0.5]).unwrap()), vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn mean_fill() {
        let x = series(&[Some(2.0), None, Some(-1.0)]);
        assert_eq!(values(&baseline_mean(&x, &[0.0]).unwrap()), vec![2.0, 0.0, -1.0]);
        let complete = series(&[Some(1.0), Some(2.0)]);
        assert_eq!(baseline_mean(&complete, &[9.0]).unwrap(), complete);
        assert!(baseline_mean(&complete, &[]).is_err());
    }
}
