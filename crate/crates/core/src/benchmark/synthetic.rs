//! Gaussian-copula data with a known latent correlation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::copula::CorrelationModel;
use crate::data::{mask_mcar, patient_column, unfold, ColumnSpec, MtsTensor};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::normal::std_normal_cdf;
use crate::scalar::Scalar;

/// Latent correlation over the unfolded columns `j = f * T + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatentStructure {
    /// `Σ_jk = rho^|j - k|`.
    Ar1 { rho: f64 },
    /// Equicorrelated blocks of `size` consecutive columns.
    Block { size: usize, rho: f64 },
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalFamily {
    Gaussian,
    /// `exp(z)`.
    LogNormal,
    /// Equiprobable levels `1..=levels`.
    Ordinal { levels: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub n_steps: usize,
    pub n_features: usize,
    pub structure: LatentStructure,
    /// One family per feature, or a single entry applied to all.
    pub marginals: Vec<MarginalFamily>,
    /// Fraction of cells hidden from the returned observation tensor.
    pub missing_rate: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn dim(&self) -> usize {
        self.n_steps * self.n_features
    }

    pub fn family(&self, f: usize) -> MarginalFamily {
        if self.marginals.len() == 1 {
            self.marginals[0]
        } else {
            self.marginals[f]
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        (0..self.n_features).map(|f| format!("x{f}")).collect()
    }

    /// Column declarations matching the marginal families.
    pub fn column_specs(&self) -> Vec<ColumnSpec> {
        self.feature_names()
            .into_iter()
            .enumerate()
            .map(|(f, name)| match self.family(f) {
                MarginalFamily::Ordinal { levels } => {
                    ColumnSpec::ordinal_k(name, levels).expect("levels >= 1")
                }
                _ => ColumnSpec::continuous(name),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_steps == 0 || self.n_features == 0 {
            return Err(Error::Spec("synthetic dimensions must be positive".into()));
        }
        if self.marginals.len() != 1 && self.marginals.len() != self.n_features {
            return Err(Error::Spec(format!(
                "{} marginal families for {} features",
                self.marginals.len(),
                self.n_features
            )));
        }
        if self
            .marginals
            .iter()
            .any(|m| matches!(m, MarginalFamily::Ordinal { levels: 0 }))
        {
            return Err(Error::Spec("ordinal family needs at least one level".into()));
        }
        if !(0.0..=1.0).contains(&self.missing_rate) {
            return Err(Error::Spec("missing rate must lie in [0, 1]".into()));
        }
        match self.structure {
            LatentStructure::Ar1 { rho } | LatentStructure::Block { rho, .. }
                if !(rho > -1.0 && rho < 1.0) =>
            {
                Err(Error::Spec(format!("rho = {rho} must lie in (-1, 1)")))
            }
            LatentStructure::Block { size: 0, .. } => {
                Err(Error::Spec("block size must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// The latent correlation the generator samples from.
    pub fn true_sigma<S: Scalar>(&self) -> Result<Matrix<S>> {
        self.validate()?;
        let m = self.dim();
        let sigma = Matrix::from_fn(m, m, |j, k| {
            if j == k {
                return S::one();
            }
            let v = match self.structure {
                LatentStructure::Ar1 { rho } => rho.powi(j.abs_diff(k) as i32),
                LatentStructure::Block { size, rho } => {
                    if j / size == k / size {
                        rho
                    } else {
                        0.0
                    }
                }
                LatentStructure::Identity => 0.0,
            };
            S::lit(v)
        });
        if sigma.cholesky().is_none() {
            return Err(Error::Spec(format!(
                "latent structure {:?} is not positive definite at dimension {m}",
                self.structure
            )));
        }
        Ok(sigma)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData<S> {
    /// Ground truth with the generator's MCAR mask applied.
    pub observed: MtsTensor<S>,
    pub truth: MtsTensor<S>,
    pub sigma: CorrelationModel<S>,
}

fn push_forward(family: MarginalFamily, z: f64) -> f64 {
    match family {
        MarginalFamily::Gaussian => z,
        MarginalFamily::LogNormal => z.exp(),
        MarginalFamily::Ordinal { levels } => {
            let k = (levels as f64 * std_normal_cdf(z)).floor() as usize;
            (k.min(levels - 1) + 1) as f64
        }
    }
}

/// Draws latent rows from `N(0, Σ_true)`, maps each through its feature's
/// marginal family and hides `missing_rate` of the cells at random.
pub fn generate_synthetic<S: Scalar>(spec: &SyntheticSpec) -> Result<SyntheticData<S>> {
    let sigma: Matrix<f64> = spec.true_sigma()?;
    let chol = sigma.cholesky().expect("validated positive definite");
    let lower = chol.lower();
    let (n, t_len, f_len) = (spec.n_samples, spec.n_steps, spec.n_features);
    let m = spec.dim();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut eps = vec![0.0; m];
    let mut z = vec![0.0; m];
    let mut values = vec![S::zero(); n * t_len * f_len];
    for i in 0..n {
        for e in eps.iter_mut() {
            *e = StandardNormal.sample(&mut rng);
        }
        for (a, za) in z.iter_mut().enumerate() {
            *za = (0..=a).map(|b| lower[(a, b)] * eps[b]).sum();
        }
        for t in 0..t_len {
            for f in 0..f_len {
                let v = push_forward(spec.family(f), z[patient_column(t_len, t, f)]);
                values[(i * t_len + t) * f_len + f] = S::lit(v);
            }
        }
    }
    let truth = MtsTensor::new(
        n,
        t_len,
        f_len,
        values,
        vec![true; n * t_len * f_len],
        spec.feature_names(),
    )?;
    let (masked, _) = mask_mcar(&unfold(&truth), spec.missing_rate, spec.seed ^ 0x9e37_79b9_7f4a_7c15)?;
    let sigma = CorrelationModel::from_matrix_unchecked(Matrix::from_row_major(
        m,
        m,
        sigma.as_slice().iter().map(|&v| S::lit(v)).collect(),
    )?);
    Ok(SyntheticData {
        observed: masked.refold(),
        truth,
        sigma,
    })
}
