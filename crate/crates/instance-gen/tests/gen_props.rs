//! Generator property tests: rejection-sampling postconditions, the go-to
//! fraction, goal-sampler verification against both checker routes, dataset
//! round-trips, and split arithmetic.

use gridlu_env::{ColorId, GridPos, Shape};
use instance_gen::{
    build_dataset, heldout_split, sample_arrangements_instance, sample_relations_goal,
    sample_relations_instance, ExpertDataset, GenOptions, InstanceStream, InstructionFilter, Task,
};
use instruction_lang::{enumerate_relations, Instruction, Operand};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use reward_semantics::{binomial, holds, oracle, relation_offset, success, TemplateSet};

#[test]
fn relations_instances_satisfy_sanity_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let opts = GenOptions::default();
    for _ in 0..20_000 {
        let inst = sample_relations_instance(&mut rng, &opts);
        let Instruction::Relation(r) = inst.instruction else {
            panic!("relations stream yielded a non-relation instruction")
        };
        let n_blocks = inst.initial.blocks().count();
        if r.mentions_agent() {
            assert_eq!(n_blocks, 2, "go-to instances carry object + distractor");
        } else {
            assert_eq!(n_blocks, 3, "bring-to instances carry two objects + distractor");
        }
        // Not already solved (default options) and never all-identical kinds.
        assert!(!holds(&r, &inst.initial));
        let kinds: Vec<_> = inst.initial.blocks().map(|(_, b)| b).collect();
        assert!(kinds.windows(2).any(|w| w[0] != w[1]));
        assert!(inst.initial.agent.carried.is_none());
    }
}

#[test]
fn accepted_goto_fraction_is_one_quarter() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let opts = GenOptions::default();
    let n = 100_000;
    let mut go_to = 0usize;
    for _ in 0..n {
        let inst = sample_relations_instance(&mut rng, &opts);
        if let Instruction::Relation(r) = inst.instruction {
            if r.mentions_agent() {
                go_to += 1;
            }
        }
    }
    let fraction = go_to as f64 / n as f64;
    assert!(
        (fraction - 0.25).abs() <= 0.01,
        "go-to fraction {fraction} outside 0.25 +/- 0.01"
    );
}

#[test]
fn relation_goals_pass_both_checker_routes() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let instrs = enumerate_relations();
    for _ in 0..10_000 {
        let instr = match instrs[rng.gen_range(0..instrs.len())] {
            Instruction::Relation(r) => r,
            _ => unreachable!(),
        };
        let goal = sample_relations_goal(&instr, &mut rng);
        assert!(holds(&instr, &goal));
        assert!(oracle::holds_brute_force(&instr, &goal));
    }
}

#[test]
fn bring_to_goal_geometry_is_exact() {
    // For the fully specified red-circle-north-of-blue-rect instruction the
    // sampled pair must always be a red circle directly above a blue rect.
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let instr = match instruction_lang::parse(
        "NorthFrom(Color('red', Shape('circle', SCENE)), Color('blue', Shape('rect', SCENE)))",
    )
    .unwrap()
    {
        Instruction::Relation(r) => r,
        _ => unreachable!(),
    };
    for _ in 0..2000 {
        let goal = sample_relations_goal(&instr, &mut rng);
        let red_circles: Vec<GridPos> = goal
            .blocks()
            .filter(|(_, b)| b.color == ColorId::Red && b.shape == Shape::Circle)
            .map(|(p, _)| p)
            .collect();
        let blue_rects: Vec<GridPos> = goal
            .blocks()
            .filter(|(_, b)| b.color == ColorId::Blue && b.shape == Shape::Rect)
            .map(|(p, _)| p)
            .collect();
        let (dc, dr) = relation_offset(instr.relation);
        assert!(
            red_circles.iter().any(|rc| blue_rects
                .iter()
                .any(|br| br.try_offset(dc, dr) == Some(*rc))),
            "no adjacent pair in {goal}"
        );
    }
}

#[test]
fn same_location_goals_put_agent_on_object() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let instr = match instruction_lang::parse("SameLocation(AGENT, Shape('circle', SCENE))")
        .unwrap()
    {
        Instruction::Relation(r) => r,
        _ => unreachable!(),
    };
    for _ in 0..500 {
        let goal = sample_relations_goal(&instr, &mut rng);
        let under_agent = goal.block_at(goal.agent.pos);
        assert!(matches!(under_agent, Some(b) if b.shape == Shape::Circle));
        assert!(goal.agent.carried.is_none());
    }
}

#[test]
fn arrangements_instances_follow_the_episode_regime() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let mut four = 0usize;
    let n = 20_000;
    for _ in 0..n {
        let inst = sample_arrangements_instance(&mut rng);
        let Instruction::Arrangement(a) = inst.instruction else {
            panic!("arrangements stream yielded a non-arrangement instruction")
        };
        let blocks: Vec<_> = inst.initial.blocks().collect();
        assert!(blocks.iter().all(|(_, b)| b.shape == Shape::Rect));
        // All positions unique, including the agent's.
        assert_eq!(inst.initial.block_at(inst.initial.agent.pos), None);
        match blocks.len() {
            4 => {
                four += 1;
                assert!(a.color.is_none());
                let c0 = blocks[0].1.color;
                assert!(blocks.iter().all(|(_, b)| b.color == c0));
            }
            8 => {
                let named = a.color.expect("8-block instances name a color");
                let mut counts = [0usize; 3];
                for (_, b) in &blocks {
                    counts[b.color as usize] += 1;
                }
                assert_eq!(counts.iter().filter(|&&c| c == 4).count(), 2);
                assert_eq!(counts[named as usize], 4);
            }
            other => panic!("unexpected block count {other}"),
        }
    }
    let fraction = four as f64 / n as f64;
    assert!((fraction - 0.5).abs() < 0.02, "4-block share {fraction}");
}

#[test]
fn dataset_round_trip_is_bit_exact() {
    let templates = TemplateSet::builtin();
    let dir = tempfile::tempdir().unwrap();
    for (task, n) in [(Task::Relations, 300), (Task::Arrangements, 150)] {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let ds = build_dataset(task, n, &mut rng, 37, &GenOptions::default(), &templates);
        assert_eq!(ds.examples.len(), n);
        for ex in &ds.examples {
            assert!(success(&ex.instruction, &ex.goal, &templates));
        }
        let path = dir.path().join(format!("{}.tsv", task.name()));
        ds.write(&path).unwrap();
        let bytes1 = std::fs::read(&path).unwrap();
        let loaded = ExpertDataset::load(&path, &templates).unwrap();
        assert_eq!(loaded, ds);
        loaded.write(&path).unwrap();
        let bytes2 = std::fs::read(&path).unwrap();
        assert_eq!(bytes1, bytes2);
    }
}

#[test]
fn corrupted_datasets_are_rejected() {
    let templates = TemplateSet::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(38);
    let ds = build_dataset(
        Task::Relations,
        5,
        &mut rng,
        38,
        &GenOptions::default(),
        &templates,
    );
    let good = ds.to_file_string();
    // Break a goal state: move every block off the line's truth by swapping
    // an example's state for an empty grid.
    let mut lines: Vec<&str> = good.lines().collect();
    let empty = format!("{}|0,0,..", "..".repeat(25));
    let first_example = lines[1].split('\t').next().unwrap().to_string();
    let broken_line = format!("{first_example}\t{empty}");
    lines[1] = &broken_line;
    let broken = lines.join("\n") + "\n";
    assert!(ExpertDataset::from_file_string(&broken, &templates).is_err());
    // Wrong count in header.
    let wrong_count = good.replacen("count=5", "count=6", 1);
    assert!(ExpertDataset::from_file_string(&wrong_count, &templates).is_err());
}

#[test]
fn heldout_split_arithmetic_and_determinism() {
    let instructions = enumerate_relations();
    let mut rng1 = ChaCha8Rng::seed_from_u64(39);
    let (train1, test1) = heldout_split(&instructions, 0.10, &mut rng1);
    assert_eq!(train1.len(), 891);
    assert_eq!(test1.len(), 99);
    let train_set: std::collections::HashSet<String> =
        train1.iter().map(|i| i.to_string()).collect();
    for t in &test1 {
        assert!(!train_set.contains(&t.to_string()));
    }
    let mut rng2 = ChaCha8Rng::seed_from_u64(39);
    let (train2, test2) = heldout_split(&instructions, 0.10, &mut rng2);
    assert_eq!(train1, train2);
    assert_eq!(test1, test2);
}

#[test]
fn filters_restrict_streams() {
    let mut stream = InstanceStream::new(
        Task::Relations,
        40,
        GenOptions {
            filter: InstructionFilter::RedRectBringTo,
            ..GenOptions::default()
        },
    );
    for _ in 0..200 {
        let inst = stream.next_instance();
        let Instruction::Relation(r) = inst.instruction else {
            unreachable!()
        };
        assert!(!r.mentions_agent());
        let descriptors: Vec<_> = [r.left, r.right]
            .into_iter()
            .map(|op| match op {
                Operand::Object(d) => d,
                Operand::Agent => panic!("agent in bring-to"),
            })
            .collect();
        assert!(descriptors
            .iter()
            .all(|d| d.color.is_some() && d.shape.is_some()));
        let red_rects = descriptors
            .iter()
            .filter(|d| d.color == Some(ColorId::Red) && d.shape == Some(Shape::Rect))
            .count();
        assert_eq!(red_rects, 1);
    }
}

#[test]
fn stream_determinism() {
    let opts = GenOptions::default();
    let mut a = InstanceStream::new(Task::Relations, 41, opts.clone());
    let mut b = InstanceStream::new(Task::Relations, 41, opts);
    for _ in 0..500 {
        assert_eq!(a.next_instance(), b.next_instance());
    }
}

#[test]
fn initial_arrangement_count_lower_bound() {
    // Distinct bring-to starts: 840 instructions x C(25,3) placements x 9
    // distractor kinds exceeds the published 1.7e7 lower bound.
    let count = 840u64 * binomial(25, 3) * 9;
    assert!(count >= 17_000_000, "got {count}");
}
