use proptest::prelude::*;
use tgc::benchmark::{baseline_locf, baseline_mean};
use tgc::data::{default_feature_names, mask_mcar, standardize, unfold, unfold_timewise, StandardizationParams};
use tgc::{fit, ColumnSpec, EmConfig, Layout, MtsTensor};

fn tensor_strategy() -> impl Strategy<Value = MtsTensor<f64>> {
    (1usize..6, 1usize..5, 1usize..4).prop_flat_map(|(n, t, f)| {
        let len = n * t * f;
        (
            prop::collection::vec(-1e6f64..1e6, len),
            prop::collection::vec(prop::bool::weighted(0.7), len),
        )
            .prop_map(move |(values, mask)| {
                let values = values
                    .into_iter()
                    .zip(&mask)
                    .map(|(v, &m)| if m { v } else { f64::NAN })
                    .collect();
                MtsTensor::new(n, t, f, values, mask, default_feature_names(f)).unwrap()
            })
    })
}

fn same_bits(a: &MtsTensor<f64>, b: &MtsTensor<f64>) -> bool {
    a.mask() == b.mask()
        && a.values()
            .iter()
            .zip(b.values())
            .zip(a.mask())
            .all(|((x, y), &m)| !m || x.to_bits() == y.to_bits())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn unfold_refold_is_exact(x in tensor_strategy()) {
        let u = unfold(&x);
        prop_assert_eq!(u.nrows(), x.n_samples());
        prop_assert_eq!(u.ncols(), x.n_steps() * x.n_features());
        prop_assert!(same_bits(&u.refold(), &x));
        let w = unfold_timewise(&x);
        prop_assert_eq!(w.nrows(), x.n_samples() * x.n_steps());
        prop_assert!(same_bits(&w.refold(), &x));
    }

    #[test]
    fn mask_mcar_counts_and_nesting(x in tensor_strategy(), rate in 0.0f64..=1.0, seed in any::<u64>()) {
        let u = unfold(&x);
        let obs = u.matrix.observed_count();
        let (masked, held) = mask_mcar(&u, rate, seed).unwrap();
        prop_assert_eq!(held.len(), (rate * obs as f64).round() as usize);
        prop_assert_eq!(masked.matrix.observed_count(), obs - held.len());
        for c in &held {
            prop_assert!(u.matrix.is_observed(c.row, c.col));
            prop_assert!(!masked.matrix.is_observed(c.row, c.col));
            prop_assert_eq!(u.matrix.get(c.row, c.col), Some(c.value));
        }
        let (again, held_again) = mask_mcar(&u, rate, seed).unwrap();
        prop_assert_eq!(&held, &held_again);
        prop_assert!(again.matrix.same_observed(&masked.matrix));
        let (_, smaller) = mask_mcar(&u, rate / 2.0, seed).unwrap();
        prop_assert!(smaller.iter().all(|c| held.contains(c)));
    }

    #[test]
    fn destandardize_inverts_standardize(x in tensor_strategy()) {
        let u = unfold(&x);
        let (z, params) = standardize(&u, None).unwrap();
        let back = params.destandardize(&z).unwrap();
        for i in 0..u.nrows() {
            for j in 0..u.ncols() {
                match (u.matrix.get(i, j), back.matrix.get(i, j)) {
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0)),
                    (None, None) => {}
                    _ => prop_assert!(false, "mask changed"),
                }
            }
        }
        let (again, _) = standardize(&z, Some(&StandardizationParams::fit(&z))).unwrap();
        for (a, b) in z.matrix.row_values(0).iter().zip(again.matrix.row_values(0)) {
            if a.is_finite() {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

fn poisoned(sentinel: f64) -> MtsTensor<f64> {
    let (n, t, f) = (30, 4, 3);
    let mut values = Vec::new();
    let mut mask = Vec::new();
    for i in 0..n {
        for s in 0..t {
            for k in 0..f {
                let v = ((i * 7 + s * 3 + k) as f64 * 0.61).sin() + s as f64 * 0.2;
                let seen = (i + 2 * s + k) % 4 != 0 && !(k == 2 && s == 3);
                values.push(if seen { v } else { sentinel });
                mask.push(seen);
            }
        }
    }
    MtsTensor::new(n, t, f, values, mask, default_feature_names(f)).unwrap()
}

#[test]
fn unobserved_values_are_never_read() {
    let specs = [ColumnSpec::continuous("f0")];
    let reference = poisoned(f64::NAN);
    for layout in [Layout::PatientRows, Layout::TimeRows] {
        let base = fit(&reference, &specs, &EmConfig::default(), layout).unwrap();
        let base_out = base.impute(&reference).unwrap().completed;
        for sentinel in [1e300, -7.0, f64::INFINITY, 0.0] {
            let x = poisoned(sentinel);
            let model = fit(&x, &specs, &EmConfig::default(), layout).unwrap();
            assert_eq!(model, base, "sentinel {sentinel}");
            let out = model.impute(&x).unwrap().completed;
            assert!(same_bits(&out, &base_out) && out.is_complete());
        }
    }
    let means = vec![0.1, 0.2, 0.3];
    for sentinel in [1e300, -7.0] {
        let x = poisoned(sentinel);
        assert!(same_bits(&baseline_locf(&x, &means).unwrap(), &baseline_locf(&reference, &means).unwrap()));
        assert!(same_bits(&baseline_mean(&x, &means).unwrap(), &baseline_mean(&reference, &means).unwrap()));
    }
}
