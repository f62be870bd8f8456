//! Central finite-difference gradient verification.
//!
//! The independent oracle for every analytic backward pass: perturb each
//! coordinate by `h = 1e-5 * max(1, |x|)`, difference the loss, and
//! require `|fd − analytic| ≤ 1e-9 + 1e-4 * max(|fd|, |analytic|)`
//! elementwise. Meaningful only at f64.

use crate::model::ParamKind;
use crate::tensor::{Scalar, Tensor};

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient<G: FnMut(&[f64]) -> f64>(mut f: G, x: &[f64]) -> Vec<f64> {
    let mut xv = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let h = 1e-5 * xv[i].abs().max(1.0);
        let orig = xv[i];
        xv[i] = orig + h;
        let fp = f(&xv);
        xv[i] = orig - h;
        let fm = f(&xv);
        xv[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Worst-case elementwise comparison of two gradients.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub n: usize,
    pub max_abs_diff: f64,
    /// Largest relative error among elements that fail the absolute floor.
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub pass: bool,
}

/// Compares per element with tolerance `1e-9 + 1e-4 * max(|a|, |b|)`.
pub fn compare_grads(analytic: &[f64], numeric: &[f64]) -> GradCheckReport {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    let mut report = GradCheckReport {
        n: analytic.len(),
        max_abs_diff: 0.0,
        max_rel_err: 0.0,
        worst_index: 0,
        pass: true,
    };
    for (i, (&a, &b)) in analytic.iter().zip(numeric).enumerate() {
        let diff = (a - b).abs();
        let scale = a.abs().max(b.abs());
        let tol = 1e-9 + 1e-4 * scale;
        let rel = if scale > 0.0 { diff / scale } else { 0.0 };
        if diff > report.max_abs_diff {
            report.max_abs_diff = diff;
        }
        if rel > report.max_rel_err && diff > 1e-9 {
            report.max_rel_err = rel;
            report.worst_index = i;
        }
        if diff > tol {
            report.pass = false;
        }
    }
    report
}

/// Panics with a diagnostic when the gradients disagree.
pub fn assert_grads_match(analytic: &[f64], numeric: &[f64], what: &str) {
    let report = compare_grads(analytic, numeric);
    assert!(
        report.pass,
        "{}: gradient check failed over {} elements: max_abs_diff={:.3e}, \
         max_rel_err={:.3e} at index {} (analytic={:.6e}, numeric={:.6e})",
        what,
        report.n,
        report.max_abs_diff,
        report.max_rel_err,
        report.worst_index,
        analytic.get(report.worst_index).copied().unwrap_or(f64::NAN),
        numeric.get(report.worst_index).copied().unwrap_or(f64::NAN),
    );
}

/// Flattens a parameter traversal into one f64 vector.
pub fn get_flat<F: Scalar>(tensors: Vec<(String, &mut Tensor<F>, ParamKind)>) -> Vec<f64> {
    let mut flat = Vec::new();
    for (_, t, _) in tensors {
        flat.extend(t.data().iter().map(|v| v.to_f64()));
    }
    flat
}

/// Writes a flat f64 vector back through a parameter traversal.
pub fn set_flat<F: Scalar>(tensors: Vec<(String, &mut Tensor<F>, ParamKind)>, flat: &[f64]) {
    let mut at = 0;
    for (_, t, _) in tensors {
        for v in t.data_mut() {
            *v = F::from_f64(flat[at]);
            at += 1;
        }
    }
    assert_eq!(at, flat.len(), "flat vector length mismatch");
}
