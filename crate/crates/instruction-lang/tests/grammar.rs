//! Grammar-level tests: enumeration counts, uniqueness, and print/parse
//! round-trips over the complete instruction sets.

use instruction_lang::{
    enumerate_arrangements, enumerate_descriptors, enumerate_relations, parse, tokenize,
    Instruction,
};
use std::collections::HashSet;

#[test]
fn descriptor_count_is_15() {
    let d = enumerate_descriptors();
    assert_eq!(d.len(), 15);
    assert_eq!(d.iter().collect::<HashSet<_>>().len(), 15);
}

#[test]
fn relation_instruction_counts() {
    let all = enumerate_relations();
    assert_eq!(all.len(), 990);
    let go_to = all
        .iter()
        .filter(|i| match i {
            Instruction::Relation(r) => r.mentions_agent(),
            _ => unreachable!(),
        })
        .count();
    assert_eq!(go_to, 150);
    assert_eq!(all.len() - go_to, 840);
}

#[test]
fn relation_instructions_are_unique() {
    let all = enumerate_relations();
    let texts: HashSet<String> = all.iter().map(|i| i.to_string()).collect();
    assert_eq!(texts.len(), 990);
}

#[test]
fn arrangement_count_is_36_and_unique() {
    let all = enumerate_arrangements();
    assert_eq!(all.len(), 36);
    let texts: HashSet<String> = all.iter().map(|i| i.to_string()).collect();
    assert_eq!(texts.len(), 36);
}

#[test]
fn print_parse_round_trips_every_instruction() {
    for instr in enumerate_relations().iter().chain(&enumerate_arrangements()) {
        let text = instr.to_string();
        let back = parse(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert_eq!(back, *instr, "round-trip failed for {text}");
    }
}

#[test]
fn tokenization_is_injective_over_all_instructions() {
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    for instr in enumerate_relations().iter().chain(&enumerate_arrangements()) {
        assert!(
            seen.insert(tokenize(instr)),
            "token stream collision at {instr}"
        );
    }
}

#[test]
fn canonical_text_never_uses_square() {
    for instr in enumerate_relations() {
        let text = instr.to_string();
        assert!(!text.contains("square"), "printer leaked alias in {text}");
    }
}
