use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Error summary over a set of held-out cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    /// `Σ|p - t| / Σ|t|`; absent when every truth value is zero.
    pub mre: Option<f64>,
    pub rmse: f64,
    pub n_evaluated: usize,
}

pub fn compute_metrics<S: Scalar>(predicted: &[S], truth: &[S]) -> Result<Metrics> {
    if predicted.len() != truth.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} truth values",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Contract("metrics need at least one cell".into()));
    }
    let mut abs_err = 0.0;
    let mut sq_err = 0.0;
    let mut abs_truth = 0.0;
    for (&p, &t) in predicted.iter().zip(truth) {
        let (p, t) = (p.as_f64(), t.as_f64());
        let d = p - t;
        abs_err += d.abs();
        sq_err += d * d;
        abs_truth += t.abs();
    }
    let n = predicted.len() as f64;
    Ok(Metrics {
        mae: abs_err / n,
        mre: (abs_truth > 0.0).then(|| abs_err / abs_truth),
        rmse: (sq_err / n).sqrt(),
        n_evaluated: predicted.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_prediction() {
        let m = compute_metrics(&[1.0, -2.0], &[1.0, -2.0]).unwrap();
        assert_eq!((m.mae, m.mre, m.rmse), (0.0, Some(0.0), 0.0));
    }

    #[test]
    fn hand_example() {
        let m = compute_metrics(&[1.0, 3.0], &[2.0, 5.0]).unwrap();
        assert!((m.mae - 1.5).abs() < 1e-15);
        assert!((m.mre.unwrap() - 3.0 / 7.0).abs() < 1e-15);
        assert!((m.rmse - 2.5_f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.n_evaluated, 2);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(compute_metrics(&[1.0], &[1.0, 2.0]).is_err());
        assert!(compute_metrics::<f64>(&[], &[]).is_err());
        assert_eq!(compute_metrics(&[1.0], &[0.0]).unwrap().mre, None);
    }

    proptest! {
        #[test]
        fn mae_never_exceeds_rmse(pairs in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 1..50)) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = compute_metrics(&p, &t).unwrap();
            prop_assert!(m.mae <= m.rmse * (1.0 + 1e-12) + 1e-12);
        }
    }
}
