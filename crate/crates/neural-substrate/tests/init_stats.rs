//! Initialization statistics: zero biases and FiLM tables, truncated
//! normal weights with the documented scale, seed determinism.

use neural_substrate::{init_params, truncated_normal, ModelConfig, ParamKind, TrunkKind};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Std of a ±2σ truncated normal relative to σ:
/// sqrt(1 − 4φ(2) / (2Φ(2) − 1)) ≈ 0.8796.
const TRUNC_STD_FACTOR: f64 = 0.8796;

#[test]
fn biases_and_film_tables_start_at_zero() {
    let cfg = ModelConfig::default();
    let film_cfg = ModelConfig {
        trunk: TrunkKind::FilmLstm,
        ..cfg.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut set = init_params::<f32, _>(&cfg, &film_cfg, &mut rng);
    for (name, t, kind) in set.tensors_mut() {
        match kind {
            ParamKind::Bias | ParamKind::Film => {
                assert!(t.data().iter().all(|&v| v == 0.0), "{} not zero", name);
            }
            ParamKind::Weight => {
                assert!(t.data().iter().any(|&v| v != 0.0), "{} left zero", name);
            }
        }
    }
}

#[test]
fn weight_scale_matches_fan_in_rule() {
    let cfg = ModelConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut set = init_params::<f32, _>(&cfg, &cfg, &mut rng);
    for (name, t, kind) in set.tensors_mut() {
        if kind != ParamKind::Weight {
            continue;
        }
        let shape = t.shape().to_vec();
        let fan_in: usize = shape[..shape.len() - 1].iter().product();
        let sigma = 1.0 / (fan_in as f64).sqrt();
        let n = t.len() as f64;

        // Hard truncation bound.
        for &v in t.data() {
            assert!(
                (v as f64).abs() <= 2.0 * sigma + 1e-12,
                "{}: {} outside ±2σ",
                name,
                v
            );
        }
        // Empirical std within 5% on tensors large enough to estimate it.
        if t.len() >= 1000 {
            let mean: f64 = t.data().iter().map(|&v| v as f64).sum::<f64>() / n;
            let var: f64 =
                t.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
            let expected = TRUNC_STD_FACTOR * sigma;
            assert!(
                (var.sqrt() - expected).abs() < 0.05 * expected,
                "{}: std {} vs expected {}",
                name,
                var.sqrt(),
                expected
            );
        }
    }
}

#[test]
fn truncated_normal_stays_inside_two_sigma() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sigma = 0.25;
    let mut acc = 0.0;
    for _ in 0..20_000 {
        let x = truncated_normal(&mut rng, sigma);
        assert!(x.abs() <= 2.0 * sigma);
        acc += x * x;
    }
    let std = (acc / 20_000.0f64).sqrt();
    let expected = TRUNC_STD_FACTOR * sigma;
    assert!((std - expected).abs() < 0.02 * expected);
}

#[test]
fn initialization_is_seed_deterministic() {
    let cfg = ModelConfig::default();
    let film_cfg = ModelConfig {
        trunk: TrunkKind::FilmLstm,
        ..cfg.clone()
    };
    let mut a = init_params::<f32, _>(&cfg, &film_cfg, &mut ChaCha8Rng::seed_from_u64(9));
    let mut b = init_params::<f32, _>(&cfg, &film_cfg, &mut ChaCha8Rng::seed_from_u64(9));
    let mut c = init_params::<f32, _>(&cfg, &film_cfg, &mut ChaCha8Rng::seed_from_u64(10));

    let flat = |set: &mut neural_substrate::ParamSet<f32>| -> Vec<f32> {
        set.tensors_mut()
            .into_iter()
            .flat_map(|(_, t, _)| t.data().to_vec())
            .collect()
    };
    assert_eq!(flat(&mut a), flat(&mut b));
    assert_ne!(flat(&mut a), flat(&mut c));
}
