//! Architectural gradient verification: stem, single modules, full
//! module-tree compositions, the FiLM-LSTM trunk, and all four heads,
//! each against central finite differences at f64 on reduced widths.

use neural_substrate::verify::{
    verify_disc_head, verify_film_lstm, verify_module_binary, verify_module_unary,
    verify_nmn_composition, verify_nmn_goto, verify_policy_heads, verify_stem,
};
use neural_substrate::{TrunkKind, VerifyCase};

fn assert_case(case: VerifyCase) {
    assert!(
        case.report.pass,
        "{}: max_abs_diff={:.3e}, max_rel_err={:.3e} over {} elements",
        case.name, case.report.max_abs_diff, case.report.max_rel_err, case.report.n
    );
    // Non-vacuous: the flattened gradient must have real content.
    assert!(case.report.n > 100, "{}: suspiciously small check", case.name);
}

#[test]
fn stem_gradients_match_finite_differences() {
    assert_case(verify_stem());
}

#[test]
fn single_module_gradients_match_finite_differences() {
    assert_case(verify_module_binary());
    assert_case(verify_module_unary());
}

#[test]
fn five_module_composition_gradients_match_finite_differences() {
    assert_case(verify_nmn_composition());
}

#[test]
fn goto_composition_gradients_match_finite_differences() {
    assert_case(verify_nmn_goto());
}

#[test]
fn film_lstm_gradients_match_finite_differences() {
    assert_case(verify_film_lstm());
}

#[test]
fn policy_head_gradients_match_finite_differences() {
    assert_case(verify_policy_heads(TrunkKind::Nmn));
    assert_case(verify_policy_heads(TrunkKind::FilmLstm));
}

#[test]
fn disc_head_gradients_match_finite_differences() {
    assert_case(verify_disc_head(TrunkKind::Nmn));
    assert_case(verify_disc_head(TrunkKind::FilmLstm));
}
