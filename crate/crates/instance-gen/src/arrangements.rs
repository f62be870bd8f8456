//! Arrangements-task instance generator: half four-block episodes with
//! colorless instructions, half eight-block episodes with a color named.

use crate::TaskInstance;
use gridlu_env::{initial_state, Block, ColorId, GridPos, Shape, NUM_CELLS};
use instruction_lang::{ArrInstruction, ArrangementWord, Instruction};
use rand::seq::SliceRandom;
use rand::Rng;

/// Sample an Arrangements training instance. With probability one half:
/// four same-colored rect blocks and the agent in unique random cells, with
/// a uniform colorless arrangement word; otherwise four blocks each of two
/// distinct colors plus the agent in unique cells, with a uniform word
/// naming one of the two colors.
pub fn sample_arrangements_instance(rng: &mut impl Rng) -> TaskInstance {
    let word = *ArrangementWord::ALL.choose(rng).unwrap();
    if rng.gen_bool(0.5) {
        let color = *ColorId::ALL.choose(rng).unwrap();
        let cells = rand::seq::index::sample(rng, NUM_CELLS, 5);
        let blocks: Vec<(GridPos, Block)> = (0..4)
            .map(|i| (GridPos::from_index(cells.index(i)), Block::new(color, Shape::Rect)))
            .collect();
        let agent = GridPos::from_index(cells.index(4));
        TaskInstance {
            instruction: Instruction::Arrangement(ArrInstruction { word, color: None }),
            initial: initial_state(&blocks, agent).expect("unique cells"),
        }
    } else {
        let mut colors = ColorId::ALL;
        colors.shuffle(rng);
        let (ca, cb) = (colors[0], colors[1]);
        let cells = rand::seq::index::sample(rng, NUM_CELLS, 9);
        let mut blocks = Vec::with_capacity(8);
        for i in 0..4 {
            blocks.push((GridPos::from_index(cells.index(i)), Block::new(ca, Shape::Rect)));
        }
        for i in 4..8 {
            blocks.push((GridPos::from_index(cells.index(i)), Block::new(cb, Shape::Rect)));
        }
        let agent = GridPos::from_index(cells.index(8));
        let named = if rng.gen_bool(0.5) { ca } else { cb };
        TaskInstance {
            instruction: Instruction::Arrangement(ArrInstruction {
                word,
                color: Some(named),
            }),
            initial: initial_state(&blocks, agent).expect("unique cells"),
        }
    }
}
