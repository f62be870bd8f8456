//! Property tests for the goal checkers: oracle agreement, relation
//! symmetries, arrangement symmetry invariance, sampler postconditions, and
//! the placement enumeration.

use gridlu_env::{Block, ColorId, GridPos, Shape, WorldState};
use instruction_lang::{
    enumerate_arrangements, enumerate_relations, ArrInstruction, Instruction, RelInstruction,
    Relation,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use reward_semantics::{
    check_arrangement, holds, oracle, sample_arrangement_goal, Symmetry, TemplateSet,
};
use std::collections::BTreeSet;

fn random_state(rng: &mut ChaCha8Rng) -> WorldState {
    let n_blocks = rng.gen_range(0..=8);
    let mut cells: Vec<usize> = (0..25).collect();
    cells.shuffle(rng);
    let blocks: Vec<(GridPos, Block)> = cells[..n_blocks]
        .iter()
        .map(|&i| {
            (
                GridPos::from_index(i),
                Block::new(
                    *ColorId::ALL.choose(rng).unwrap(),
                    *Shape::ALL.choose(rng).unwrap(),
                ),
            )
        })
        .collect();
    let agent = GridPos::from_index(rng.gen_range(0..25));
    WorldState::new(&blocks, agent, None).unwrap()
}

fn random_relation_instruction(rng: &mut ChaCha8Rng) -> RelInstruction {
    let all = enumerate_relations();
    match all[rng.gen_range(0..all.len())] {
        Instruction::Relation(r) => r,
        _ => unreachable!(),
    }
}

#[test]
fn holds_agrees_with_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    // 1,000 random states per relation, random instruction of that relation.
    for relation in Relation::ALL {
        let instrs: Vec<RelInstruction> = enumerate_relations()
            .into_iter()
            .filter_map(|i| match i {
                Instruction::Relation(r) if r.relation == relation => Some(r),
                _ => None,
            })
            .collect();
        for _ in 0..1000 {
            let s = random_state(&mut rng);
            let instr = instrs[rng.gen_range(0..instrs.len())];
            assert_eq!(
                holds(&instr, &s),
                oracle::holds_brute_force(&instr, &s),
                "disagreement on {instr:?} in {s}"
            );
        }
    }
}

#[test]
fn directional_relations_are_mirror_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mirror = |r: Relation| match r {
        Relation::NorthFrom => Relation::SouthFrom,
        Relation::SouthFrom => Relation::NorthFrom,
        Relation::EastFrom => Relation::WestFrom,
        Relation::WestFrom => Relation::EastFrom,
        Relation::SameLocation => Relation::SameLocation,
    };
    for _ in 0..4000 {
        let s = random_state(&mut rng);
        let instr = random_relation_instruction(&mut rng);
        let flipped =
            RelInstruction::new(mirror(instr.relation), instr.right, instr.left).unwrap();
        assert_eq!(holds(&instr, &s), holds(&flipped, &s));
    }
}

fn map_state(s: &WorldState, sym: Symmetry) -> WorldState {
    // Conjugate a symmetry about the grid center (2,2).
    let map_pos = |p: GridPos| {
        let (x, y) = sym.apply((p.col as i8 - 2, p.row as i8 - 2));
        GridPos::new((x + 2) as u8, (y + 2) as u8)
    };
    let blocks: Vec<(GridPos, Block)> = s.blocks().map(|(p, b)| (map_pos(p), b)).collect();
    WorldState::new(&blocks, map_pos(s.agent.pos), s.agent.carried).unwrap()
}

#[test]
fn check_arrangement_is_symmetry_invariant() {
    let t = TemplateSet::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let instrs: Vec<ArrInstruction> = enumerate_arrangements()
        .into_iter()
        .map(|i| match i {
            Instruction::Arrangement(a) => a,
            _ => unreachable!(),
        })
        .collect();
    for _ in 0..1500 {
        // Bias toward states with many rects so successes actually occur.
        let mut cells: Vec<usize> = (0..25).collect();
        cells.shuffle(&mut rng);
        let n = rng.gen_range(4..=9);
        let color = *ColorId::ALL.choose(&mut rng).unwrap();
        let blocks: Vec<(GridPos, Block)> = cells[..n]
            .iter()
            .map(|&i| {
                let c = if rng.gen_bool(0.8) {
                    color
                } else {
                    *ColorId::ALL.choose(&mut rng).unwrap()
                };
                (GridPos::from_index(i), Block::new(c, Shape::Rect))
            })
            .collect();
        let s = WorldState::new(&blocks, GridPos::from_index(cells[n]), None).unwrap();
        let instr = instrs[rng.gen_range(0..instrs.len())];
        let base = check_arrangement(&instr, &s, &t).success;
        for sym in Symmetry::ALL {
            let mapped = map_state(&s, sym);
            assert_eq!(
                check_arrangement(&instr, &mapped, &t).success,
                base,
                "symmetry {sym:?} changed the verdict for {instr:?}"
            );
        }
    }
}

#[test]
fn sampled_goals_always_pass_the_checker() {
    let t = TemplateSet::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let instrs = enumerate_arrangements();
    for _ in 0..2000 {
        let instr = match instrs[rng.gen_range(0..instrs.len())] {
            Instruction::Arrangement(a) => a,
            _ => unreachable!(),
        };
        let n_distractors = if rng.gen_bool(0.5) { 4 } else { 0 };
        let s = sample_arrangement_goal(&instr, n_distractors, &mut rng, &t).unwrap();
        assert!(check_arrangement(&instr, &s, &t).success, "{instr:?} {s}");
        let expected_blocks = 4 + n_distractors;
        assert_eq!(s.blocks().count(), expected_blocks);
        assert_eq!(s.block_at(s.agent.pos), None);
    }
}

#[test]
fn square_samples_cover_exactly_16_translations() {
    let t = TemplateSet::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let instr = ArrInstruction {
        word: instruction_lang::ArrangementWord::Square,
        color: Some(ColorId::Red),
    };
    let mut seen: BTreeSet<Vec<GridPos>> = BTreeSet::new();
    for _ in 0..2000 {
        let s = sample_arrangement_goal(&instr, 0, &mut rng, &t).unwrap();
        let mut cells: Vec<GridPos> = s.blocks().map(|(p, _)| p).collect();
        cells.sort();
        seen.insert(cells);
    }
    assert_eq!(seen.len(), 16);
}

#[test]
fn placements_are_unique_in_bounds_4_sets() {
    let t = TemplateSet::builtin();
    for word in instruction_lang::ArrangementWord::ALL {
        let sets = t.placement_sets(word);
        let unique: BTreeSet<&Vec<GridPos>> = sets.iter().collect();
        assert_eq!(unique.len(), sets.len(), "{word:?} has duplicate placements");
        for cells in sets {
            assert_eq!(cells.len(), 4);
            let distinct: BTreeSet<&GridPos> = cells.iter().collect();
            assert_eq!(distinct.len(), 4);
        }
        assert!(!sets.is_empty(), "{word:?} has no placements");
    }
}

#[test]
fn predicate_words_agree_with_their_definitions() {
    let t = TemplateSet::builtin();
    // Connected: every placement is edge-connected; Disconnected: no
    // placement has an adjacent pair; and the two lists are disjoint.
    let adj = |a: GridPos, b: GridPos| a.col.abs_diff(b.col) + a.row.abs_diff(b.row) == 1;
    for cells in t.placement_sets(instruction_lang::ArrangementWord::Disconnected) {
        for (i, a) in cells.iter().enumerate() {
            for b in &cells[i + 1..] {
                assert!(!adj(*a, *b));
            }
        }
    }
    for cells in t.placement_sets(instruction_lang::ArrangementWord::Connected) {
        let mut reach = vec![cells[0]];
        loop {
            let before = reach.len();
            for c in cells {
                if !reach.contains(c) && reach.iter().any(|r| adj(*r, *c)) {
                    reach.push(*c);
                }
            }
            if reach.len() == before {
                break;
            }
        }
        assert_eq!(reach.len(), 4, "disconnected set in Connected placements");
    }
}
