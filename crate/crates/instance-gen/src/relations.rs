//! Relations-task generators: joint grammar + environment expansion with
//! rejection sampling, and the constructive goal-state sampler.

use crate::{GenOptions, TaskInstance};
use gridlu_env::{initial_state, Block, ColorId, GridPos, Shape, WorldState, NUM_CELLS};
use instruction_lang::{Descriptor, Instruction, Operand, RelInstruction, Relation};
use rand::seq::SliceRandom;
use rand::Rng;
use reward_semantics::{holds, relation_offset};

/// Probability of expanding the go-to branch before rejection sampling.
///
/// The two families survive the sanity checks at different rates (bring-to
/// draws lose more instances to identical-descriptor and block-collision
/// rejections), so the raw branch probability is calibrated such that
/// accepted instances are 25% go-to, matching the published instance
/// distribution. Calibrated over 4,000,000 accepted samples; the accepted
/// go-to fraction check lives in the acceptance suite.
pub const DEFAULT_GOTO_PROBABILITY: f64 = 0.2297;

const RETRY_GUARD: u32 = 10_000;

fn sample_descriptor(rng: &mut impl Rng) -> Descriptor {
    // Grammar expansion: obj -> Color(c, obj_part2) | Shape(s, SCENE), each
    // branch uniform; obj_part2 -> Shape(s, SCENE) | SCENE, each uniform.
    if rng.gen_bool(0.5) {
        let color = Some(*ColorId::ALL.choose(rng).unwrap());
        let shape = if rng.gen_bool(0.5) {
            Some(*Shape::ALL.choose(rng).unwrap())
        } else {
            None
        };
        Descriptor::new(color, shape).unwrap()
    } else {
        Descriptor::new(None, Some(*Shape::ALL.choose(rng).unwrap())).unwrap()
    }
}

/// Fill a descriptor's unspecified fields uniformly to get a concrete block.
fn materialize(d: &Descriptor, rng: &mut impl Rng) -> Block {
    Block::new(
        d.color.unwrap_or_else(|| *ColorId::ALL.choose(rng).unwrap()),
        d.shape.unwrap_or_else(|| *Shape::ALL.choose(rng).unwrap()),
    )
}

fn random_kind(rng: &mut impl Rng) -> Block {
    Block::new(
        *ColorId::ALL.choose(rng).unwrap(),
        *Shape::ALL.choose(rng).unwrap(),
    )
}

fn all_identical(blocks: &[Block]) -> bool {
    blocks.windows(2).all(|w| w[0] == w[1])
}

/// One joint draw of (instruction, objects); `None` when the draw is
/// rejected (identical bring-to descriptors).
fn draw_instruction(rng: &mut impl Rng, goto_probability: f64) -> Option<(RelInstruction, Vec<Descriptor>)> {
    if rng.gen_bool(goto_probability) {
        let relation = *Relation::ALL.choose(rng).unwrap();
        let d = sample_descriptor(rng);
        let instr = if rng.gen_bool(0.5) {
            RelInstruction::new(relation, Operand::Agent, Operand::Object(d)).unwrap()
        } else {
            RelInstruction::new(relation, Operand::Object(d), Operand::Agent).unwrap()
        };
        Some((instr, vec![d]))
    } else {
        let relation = *Relation::DIRECTIONAL.choose(rng).unwrap();
        let left = sample_descriptor(rng);
        let right = sample_descriptor(rng);
        if left == right {
            return None;
        }
        let instr =
            RelInstruction::new(relation, Operand::Object(left), Operand::Object(right)).unwrap();
        Some((instr, vec![left, right]))
    }
}

/// Sample a Relations training instance by rejection: expand the grammar
/// jointly with object generation, add one uniform distractor, place all
/// blocks and the agent uniformly over the 25 cells, and redraw on any
/// sanity-check failure (two blocks in one cell, all blocks identical, or
/// an already-solved start when enabled).
pub fn sample_relations_instance(rng: &mut impl Rng, opts: &GenOptions) -> TaskInstance {
    for _ in 0..RETRY_GUARD {
        let Some((instr, descriptors)) = draw_instruction(rng, opts.goto_probability) else {
            continue;
        };
        if !opts.filter.accepts(&Instruction::Relation(instr)) {
            continue;
        }
        let mut kinds: Vec<Block> = descriptors.iter().map(|d| materialize(d, rng)).collect();
        kinds.push(random_kind(rng));
        if all_identical(&kinds) {
            continue;
        }
        let positions: Vec<GridPos> = kinds
            .iter()
            .map(|_| GridPos::from_index(rng.gen_range(0..NUM_CELLS)))
            .collect();
        let distinct = positions
            .iter()
            .enumerate()
            .all(|(i, p)| positions[i + 1..].iter().all(|q| q != p));
        if !distinct {
            continue;
        }
        let blocks: Vec<(GridPos, Block)> =
            positions.into_iter().zip(kinds.into_iter()).collect();
        let agent = GridPos::from_index(rng.gen_range(0..NUM_CELLS));
        let state = initial_state(&blocks, agent).expect("distinct cells");
        if opts.reject_solved_starts && holds(&instr, &state) {
            continue;
        }
        return TaskInstance {
            instruction: Instruction::Relation(instr),
            initial: state,
        };
    }
    panic!("generator fault: {RETRY_GUARD} rejections in sample_relations_instance");
}

/// All ordered cell pairs (p1, p2) with p1 = p2 + offset(relation).
fn relation_pairs(relation: Relation) -> Vec<(GridPos, GridPos)> {
    let (dc, dr) = relation_offset(relation);
    GridPos::all()
        .filter_map(|p2| p2.try_offset(dc, dr).map(|p1| (p1, p2)))
        .collect()
}

/// Constructively sample a goal state of a relation instruction: place the
/// two entities in a uniformly chosen cell pair satisfying the relation,
/// plus a distractor and the agent as in instance sampling. Verified with
/// `holds` before returning.
pub fn sample_relations_goal(instr: &RelInstruction, rng: &mut impl Rng) -> WorldState {
    for _ in 0..RETRY_GUARD {
        let pairs = relation_pairs(instr.relation);
        let &(p1, p2) = pairs.choose(rng).expect("5x5 grid has pairs for every relation");
        let state = match (&instr.left, &instr.right) {
            (Operand::Object(dl), Operand::Object(dr)) => {
                let b1 = materialize(dl, rng);
                let b2 = materialize(dr, rng);
                let open: Vec<GridPos> =
                    GridPos::all().filter(|p| *p != p1 && *p != p2).collect();
                let pd = *open.choose(rng).unwrap();
                let bd = random_kind(rng);
                if all_identical(&[b1, b2, bd]) {
                    continue;
                }
                let agent = GridPos::from_index(rng.gen_range(0..NUM_CELLS));
                initial_state(&[(p1, b1), (p2, b2), (pd, bd)], agent).expect("distinct cells")
            }
            (Operand::Agent, Operand::Object(d)) | (Operand::Object(d), Operand::Agent) => {
                let (agent_pos, obj_pos) = if instr.left == Operand::Agent {
                    (p1, p2)
                } else {
                    (p2, p1)
                };
                let b = materialize(d, rng);
                let bd = random_kind(rng);
                if all_identical(&[b, bd]) {
                    continue;
                }
                let open: Vec<GridPos> = GridPos::all().filter(|p| *p != obj_pos).collect();
                let pd = *open.choose(rng).unwrap();
                initial_state(&[(obj_pos, b), (pd, bd)], agent_pos).expect("distinct cells")
            }
            (Operand::Agent, Operand::Agent) => unreachable!("rejected by construction"),
        };
        assert!(
            holds(instr, &state),
            "constructed goal fails holds: {instr:?} {state}"
        );
        return state;
    }
    panic!("generator fault: {RETRY_GUARD} rejections in sample_relations_goal");
}
