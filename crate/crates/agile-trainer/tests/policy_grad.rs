//! Finite-difference verification of the policy objective and unit checks
//! of the optimizer arithmetic.

use agile_trainer::{verify_policy_objective, OptimConfig, RmsProp};
use neural_substrate::{ParamKind, Tensor};

#[test]
fn policy_objective_gradient_matches_finite_differences() {
    for case in verify_policy_objective() {
        assert!(
            case.report.pass,
            "{}: max rel err {:.3e} at flat index {} over {} parameters",
            case.name, case.report.max_rel_err, case.report.worst_index, case.report.n
        );
        assert!(
            case.report.n > 300,
            "{}: only {} parameters checked",
            case.name,
            case.report.n
        );
    }
}

fn traverse(t: &mut Tensor<f64>) -> Vec<(String, &mut Tensor<f64>, ParamKind)> {
    vec![("w".into(), t, ParamKind::Weight)]
}

#[test]
fn rmsprop_follows_the_update_rule() {
    let cfg = OptimConfig { lr: 0.1, decay: 0.5, epsilon: 1e-8, clip: 1000.0 };
    let mut opt = RmsProp::<f64>::new(cfg);
    let mut p = Tensor::from_vec(&[2], vec![1.0, 2.0]);
    let mut g = Tensor::from_vec(&[2], vec![3.0, 4.0]);

    let norm = opt.step(traverse(&mut p), traverse(&mut g));
    assert!((norm - 5.0).abs() < 1e-12);
    // m = 0.5 * g^2; p -= lr * g / sqrt(m + eps).
    let m: [f64; 2] = [4.5, 8.0];
    let want = [
        1.0 - 0.1 * 3.0 / (m[0] + 1e-8).sqrt(),
        2.0 - 0.1 * 4.0 / (m[1] + 1e-8).sqrt(),
    ];
    assert!((p.data()[0] - want[0]).abs() < 1e-12);
    assert!((p.data()[1] - want[1]).abs() < 1e-12);

    // Second step with the same gradient: the accumulator decays.
    let p1 = [p.data()[0], p.data()[1]];
    opt.step(traverse(&mut p), traverse(&mut g));
    let m2: [f64; 2] = [0.5 * m[0] + 0.5 * 9.0, 0.5 * m[1] + 0.5 * 16.0];
    let want2 = [
        p1[0] - 0.1 * 3.0 / (m2[0] + 1e-8).sqrt(),
        p1[1] - 0.1 * 4.0 / (m2[1] + 1e-8).sqrt(),
    ];
    assert!((p.data()[0] - want2[0]).abs() < 1e-12);
    assert!((p.data()[1] - want2[1]).abs() < 1e-12);
}

#[test]
fn rmsprop_clips_before_accumulating() {
    let cfg = OptimConfig { lr: 0.1, decay: 0.5, epsilon: 0.0, clip: 1.0 };
    let mut opt = RmsProp::<f64>::new(cfg);
    let mut p = Tensor::from_vec(&[2], vec![0.0, 0.0]);
    let mut g = Tensor::from_vec(&[2], vec![3.0, 4.0]);

    let norm = opt.step(traverse(&mut p), traverse(&mut g));
    assert!((norm - 5.0).abs() < 1e-12, "reported norm is pre-clip");
    // Clipped gradient is [0.6, 0.8]; with zero initial accumulator the
    // update direction has unit-magnitude components scaled by sqrt(2)
    // because m = 0.5 * g'^2.
    let gc: [f64; 2] = [0.6, 0.8];
    for i in 0..2 {
        let m = 0.5 * gc[i] * gc[i];
        let want = -0.1 * gc[i] / m.sqrt();
        assert!((p.data()[i] - want).abs() < 1e-12);
    }
}

#[test]
fn rmsprop_leaves_small_gradients_alone() {
    let cfg = OptimConfig { lr: 1.0, decay: 0.0, epsilon: 0.0, clip: 10.0 };
    let mut opt = RmsProp::<f64>::new(cfg);
    let mut p = Tensor::from_vec(&[1], vec![0.0]);
    let mut g = Tensor::from_vec(&[1], vec![0.25]);
    opt.step(traverse(&mut p), traverse(&mut g));
    // decay 0: m = g^2, so the step is exactly -lr * sign(g).
    assert!((p.data()[0] + 1.0).abs() < 1e-12);
}
