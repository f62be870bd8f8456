//! Held-out instruction splits.

use instruction_lang::Instruction;
use rand::seq::SliceRandom;
use rand::Rng;

/// Split instructions into disjoint (train, test) sides. The test side gets
/// `round(fraction * n)` instructions chosen by a seeded shuffle; both
/// sides preserve the input order.
pub fn heldout_split(
    instructions: &[Instruction],
    fraction: f64,
    rng: &mut impl Rng,
) -> (Vec<Instruction>, Vec<Instruction>) {
    assert!(
        fraction > 0.0 && fraction < 1.0,
        "fraction must be in (0, 1)"
    );
    let n = instructions.len();
    let n_test = (fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut is_test = vec![false; n];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let mut train = Vec::with_capacity(n - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (i, instr) in instructions.iter().enumerate() {
        if is_test[i] {
            test.push(*instr);
        } else {
            train.push(*instr);
        }
    }
    (train, test)
}
