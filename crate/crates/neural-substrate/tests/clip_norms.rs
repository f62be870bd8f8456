//! Column-norm clipping: per-unit rescaling, bias and FiLM exemption,
//! exact idempotence.

use neural_substrate::{
    clip_column_norms, init_params, ModelConfig, ParamKind, Tensor, TrunkKind,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn column_sumsq(t: &Tensor<f32>, col: usize) -> f64 {
    let shape = t.shape();
    let cols = *shape.last().unwrap();
    let rows: usize = shape[..shape.len() - 1].iter().product();
    (0..rows)
        .map(|r| {
            let v = t.data()[r * cols + col] as f64;
            v * v
        })
        .sum()
}

#[test]
fn oversized_columns_are_rescaled_to_unit_norm() {
    let mut t: Tensor<f32> = Tensor::from_vec(&[2, 2], vec![2.0, 0.3, 0.0, 0.4]);
    clip_column_norms(vec![("w".into(), &mut t, ParamKind::Weight)]);
    // Column 0 had norm 2: rescaled to 1. Column 1 had norm 0.5: untouched.
    assert!((column_sumsq(&t, 0) - 1.0).abs() < 1e-6);
    assert_eq!(t.data()[1], 0.3);
    assert_eq!(t.data()[3], 0.4);
    assert!((t.data()[0] - 1.0).abs() < 1e-6);
    assert_eq!(t.data()[2], 0.0);
}

#[test]
fn biases_and_film_tables_are_never_clipped() {
    let mut b: Tensor<f32> = Tensor::from_vec(&[3], vec![5.0, -7.0, 2.0]);
    let mut film: Tensor<f32> = Tensor::from_vec(&[2, 2], vec![4.0, 4.0, 4.0, 4.0]);
    clip_column_norms(vec![
        ("b".into(), &mut b, ParamKind::Bias),
        ("film".into(), &mut film, ParamKind::Film),
    ]);
    assert_eq!(b.data(), &[5.0, -7.0, 2.0]);
    assert_eq!(film.data(), &[4.0, 4.0, 4.0, 4.0]);
}

#[test]
fn every_weight_column_is_bounded_after_clipping() {
    let cfg = ModelConfig::default();
    let film_cfg = ModelConfig {
        trunk: TrunkKind::FilmLstm,
        ..cfg.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut set = init_params::<f32, _>(&cfg, &film_cfg, &mut rng);
    // Inflate everything so clipping is exercised on every tensor.
    for (_, t, _) in set.tensors_mut() {
        for v in t.data_mut() {
            *v = 3.0 * (*v + 0.01 * rng.gen::<f32>());
        }
    }
    clip_column_norms(set.tensors_mut());
    for (name, t, kind) in set.tensors_mut() {
        if kind != ParamKind::Weight {
            continue;
        }
        let cols = *t.shape().last().unwrap();
        for c in 0..cols {
            let sumsq = column_sumsq(t, c);
            assert!(
                sumsq <= 1.0 + 1e-6,
                "{} column {}: ‖w‖² = {}",
                name,
                c,
                sumsq
            );
        }
    }
}

#[test]
fn clipping_is_exactly_idempotent() {
    let cfg = ModelConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut set = init_params::<f32, _>(&cfg, &cfg, &mut rng);
    for (_, t, _) in set.tensors_mut() {
        for v in t.data_mut() {
            *v *= 40.0;
        }
    }
    clip_column_norms(set.tensors_mut());
    let once: Vec<u32> = set
        .tensors_mut()
        .into_iter()
        .flat_map(|(_, t, _)| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        .collect();
    clip_column_norms(set.tensors_mut());
    let twice: Vec<u32> = set
        .tensors_mut()
        .into_iter()
        .flat_map(|(_, t, _)| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        .collect();
    assert_eq!(once, twice);
}
