mod common;

use common::{normal_vec, rng};
use rand::Rng;
use tgc::data::ColumnSpec;
use tgc::marginals::{fit_marginal, Marginal};

fn random_column(r: &mut rand_chacha::ChaCha8Rng, c: usize) -> (Vec<f64>, ColumnSpec) {
    let n = r.random_range(1..60);
    if c % 3 == 2 {
        let k = r.random_range(2..7);
        let levels: Vec<f64> = (0..k).map(|l| l as f64 * 2.5 - 1.0).collect();
        let vals = (0..n).map(|_| levels[r.random_range(0..k)]).collect();
        (vals, ColumnSpec::ordinal("o", levels).unwrap())
    } else {
        let scale = r.random_range(0.1..100.0);
        let mut vals: Vec<f64> = normal_vec(r, n).into_iter().map(|z| (z * scale).exp()).collect();
        // Inject ties.
        if n > 3 {
            vals[1] = vals[0];
            vals[3] = vals[0];
        }
        (vals, ColumnSpec::continuous("c"))
    }
}

#[test]
fn round_trips_on_training_support() {
    let mut r = rng(2024);
    for c in 0..50 {
        let (vals, spec) = random_column(&mut r, c);
        let m: Marginal<f64> = fit_marginal(&vals, &spec).unwrap();
        for &v in &vals {
            let back = m.from_latent(m.to_latent(v, "x").unwrap());
            match m {
                Marginal::Ordinal(_) => assert_eq!(back, v, "column {c}"),
                _ => assert!((back - v).abs() <= 1e-9 * v.abs().max(1.0), "column {c}: {v} -> {back}"),
            }
        }
    }
}

#[test]
fn latent_values_are_finite_and_monotone() {
    let mut r = rng(7);
    for c in 0..30 {
        let (vals, spec) = random_column(&mut r, c);
        let m: Marginal<f64> = fit_marginal(&vals, &spec).unwrap();
        let mut probes = vals.clone();
        if !matches!(m, Marginal::Ordinal(_)) {
            probes.extend([-1e300, -1.0, 0.0, 1e-300, 1e300]);
        }
        probes.sort_by(f64::total_cmp);
        let zs: Vec<f64> = probes.iter().map(|&v| m.to_latent(v, "x").unwrap()).collect();
        assert!(zs.iter().all(|z| z.is_finite()));
        assert!(zs.windows(2).all(|w| w[0] <= w[1]), "column {c}");
        let mut prev = f64::NEG_INFINITY;
        for i in -800..=800 {
            let v = m.from_latent(i as f64 * 0.01);
            assert!(v.is_finite() && v >= prev);
            prev = v;
        }
    }
}

#[test]
fn inverse_clamps_outside_the_support() {
    let m: Marginal<f64> = fit_marginal(&[3.0, 1.0, 2.0], &ColumnSpec::continuous("c")).unwrap();
    assert_eq!(m.from_latent(-40.0), 1.0);
    assert_eq!(m.from_latent(40.0), 3.0);
}

#[test]
fn push_forward_is_roughly_standard_normal() {
    let mut r = rng(99);
    let samples = [
        normal_vec(&mut r, 10_000).into_iter().map(f64::exp).collect::<Vec<_>>(),
        (0..10_000).map(|_| r.random_range(-3.0..5.0)).collect(),
        (0..10_000).map(|_| -r.random::<f64>().ln()).collect(),
    ];
    for vals in samples {
        let m: Marginal<f64> = fit_marginal(&vals, &ColumnSpec::continuous("c")).unwrap();
        let z: Vec<f64> = vals.iter().map(|&v| m.to_latent(v, "c").unwrap()).collect();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let sd = (z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() <= 0.05, "mean {mean}");
        assert!((0.9..=1.1).contains(&sd), "sd {sd}");
    }
}

#[test]
fn f32_marginals_work() {
    let vals: Vec<f32> = (0..40).map(|i| (i as f32 * 0.37).sin() * 3.0).collect();
    let m: Marginal<f32> = fit_marginal(&vals, &ColumnSpec::continuous("c")).unwrap();
    for &v in &vals {
        let back = m.from_latent(m.to_latent(v, "c").unwrap());
        assert!((back - v).abs() < 1e-4, "{v} -> {back}");
    }
}
