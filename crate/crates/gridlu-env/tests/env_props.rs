//! Randomized property tests for the environment: totality of `step`,
//! block-multiset conservation, render injectivity, and serialization
//! round-trips, all over seeded random states.

use gridlu_env::{
    initial_state, render, step, Action, Block, ColorId, EnvModifier, GridPos, Shape, WorldState,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

fn random_state(rng: &mut ChaCha8Rng) -> WorldState {
    let n_blocks = rng.gen_range(0..=6);
    let mut cells: Vec<usize> = (0..25).collect();
    cells.shuffle(rng);
    let blocks: Vec<(GridPos, Block)> = cells[..n_blocks]
        .iter()
        .map(|&i| {
            let color = *ColorId::ALL.choose(rng).unwrap();
            let shape = *Shape::ALL.choose(rng).unwrap();
            (GridPos::from_index(i), Block::new(color, shape))
        })
        .collect();
    let carry = rng.gen_bool(0.3);
    let agent = if carry {
        // A carrying agent must stand on an empty cell.
        GridPos::from_index(cells[n_blocks])
    } else {
        GridPos::from_index(rng.gen_range(0..25))
    };
    let carried = if carry {
        Some(Block::new(
            *ColorId::ALL.choose(rng).unwrap(),
            *Shape::ALL.choose(rng).unwrap(),
        ))
    } else {
        None
    };
    WorldState::new(&blocks, agent, carried).unwrap()
}

fn random_action(rng: &mut ChaCha8Rng) -> Action {
    *Action::ALL.choose(rng).unwrap()
}

#[test]
fn block_multiset_conserved_under_random_walks() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let mut s = random_state(&mut rng);
        let census = s.block_census();
        let modifier = if rng.gen_bool(0.5) {
            EnvModifier::immovable_red_rects()
        } else {
            EnvModifier::NONE
        };
        for _ in 0..60 {
            s = step(&s, random_action(&mut rng), &modifier);
            assert_eq!(s.block_census(), census);
        }
    }
}

#[test]
fn step_preserves_state_validity() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let mut s = random_state(&mut rng);
        for _ in 0..60 {
            s = step(&s, random_action(&mut rng), &EnvModifier::NONE);
            if s.agent.carried.is_some() {
                assert_eq!(s.block_at(s.agent.pos), None);
            }
            // Re-constructing from parts must succeed: no cell holds two blocks.
            let blocks: Vec<_> = s.blocks().collect();
            WorldState::new(&blocks, s.agent.pos, s.agent.carried).unwrap();
        }
    }
}

#[test]
fn render_is_injective_on_sampled_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut seen: HashMap<Vec<u8>, WorldState> = HashMap::new();
    for _ in 0..3000 {
        let s = random_state(&mut rng);
        let img = render(&s);
        if let Some(prev) = seen.get(&img.data) {
            assert_eq!(*prev, s, "distinct states rendered identically");
        } else {
            seen.insert(img.data, s);
        }
    }
}

#[test]
fn serialization_round_trips_on_sampled_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..2000 {
        let s = random_state(&mut rng);
        let line = s.to_string();
        assert_eq!(line.parse::<WorldState>().unwrap(), s);
    }
}

#[test]
fn carried_block_kind_is_visible_in_pixels() {
    // Same agent cell, same placed blocks, different carried kind: the image
    // must differ (the carried sprite makes rendering injective).
    let agent = GridPos::new(2, 3);
    for a in Shape::ALL {
        for b in Shape::ALL {
            if a == b {
                continue;
            }
            let s1 = WorldState::new(&[], agent, Some(Block::new(ColorId::Red, a))).unwrap();
            let s2 = WorldState::new(&[], agent, Some(Block::new(ColorId::Red, b))).unwrap();
            assert_ne!(render(&s1).data, render(&s2).data);
        }
    }
}

#[test]
fn interact_never_stacks_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..500 {
        let s = random_state(&mut rng);
        let next = step(&s, Action::Interact, &EnvModifier::NONE);
        let placed_before = s.blocks().count();
        let placed_after = next.blocks().count();
        match (s.agent.carried, s.block_at(s.agent.pos)) {
            (Some(_), _) => assert_eq!(placed_after, placed_before + 1),
            (None, Some(_)) => assert_eq!(placed_after, placed_before - 1),
            (None, None) => assert_eq!(next, s),
        }
    }
}
