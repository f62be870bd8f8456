//! Flat tokenization of instructions for sequence encoders.
//!
//! An instruction flattens to the identifiers that carry meaning: the head
//! word, then each operand left to right, where the agent contributes
//! `AGENT` and a descriptor contributes its color word then its shape word
//! (either may be absent). Structural tokens (`Color`, `Shape`, `SCENE`,
//! parentheses, quotes) are dropped: operand order plus the fixed
//! color-before-shape order keeps the stream unambiguous. Examples:
//!
//! `NorthFrom(Color('red', Shape('circle', SCENE)), AGENT)`
//!   -> `[NorthFrom, red, circle, AGENT]`
//! `Snake(AGENT, Color('blue', SCENE))` -> `[Snake, AGENT, blue]`

use crate::print::{color_name, relation_name, shape_name};
use crate::{ArrangementWord, Instruction, Operand, Relation};

/// The token vocabulary, in fixed index order: 5 relation words, 9
/// arrangement words, `AGENT`, 3 colors, 3 shapes.
pub const VOCAB: [&str; 21] = [
    "NorthFrom",
    "SouthFrom",
    "EastFrom",
    "WestFrom",
    "SameLocation",
    "Square",
    "Line",
    "Dline",
    "Triangle",
    "Circle",
    "Eel",
    "Snake",
    "Connected",
    "Disconnected",
    "AGENT",
    "red",
    "green",
    "blue",
    "circle",
    "rect",
    "triangle",
];

/// Index of a vocabulary word. Panics on words outside the vocabulary.
pub fn vocab_index(word: &str) -> usize {
    VOCAB
        .iter()
        .position(|&w| w == word)
        .unwrap_or_else(|| panic!("word {word:?} is not in the vocabulary"))
}

fn relation_index(r: Relation) -> usize {
    vocab_index(relation_name(r))
}

fn word_index(w: ArrangementWord) -> usize {
    vocab_index(w.name())
}

fn push_operand(out: &mut Vec<usize>, op: Operand) {
    match op {
        Operand::Agent => out.push(vocab_index("AGENT")),
        Operand::Object(d) => {
            if let Some(c) = d.color {
                out.push(vocab_index(color_name(c)));
            }
            if let Some(s) = d.shape {
                out.push(vocab_index(shape_name(s)));
            }
        }
    }
}

/// Flatten an instruction into vocabulary indices.
pub fn tokenize(instr: &Instruction) -> Vec<usize> {
    let mut out = Vec::with_capacity(6);
    match instr {
        Instruction::Relation(r) => {
            out.push(relation_index(r.relation));
            push_operand(&mut out, r.left);
            push_operand(&mut out, r.right);
        }
        Instruction::Arrangement(a) => {
            out.push(word_index(a.word));
            out.push(vocab_index("AGENT"));
            if let Some(c) = a.color {
                out.push(vocab_index(color_name(c)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse;

    #[test]
    fn vocabulary_has_no_duplicates() {
        for (i, a) in VOCAB.iter().enumerate() {
            for b in &VOCAB[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn tokenization_examples() {
        let i1 = parse("NorthFrom(Color('red', Shape('circle', SCENE)), AGENT)").unwrap();
        assert_eq!(
            tokenize(&i1),
            vec![
                vocab_index("NorthFrom"),
                vocab_index("red"),
                vocab_index("circle"),
                vocab_index("AGENT")
            ]
        );
        let i2 = parse("Snake(AGENT, Color('blue', SCENE))").unwrap();
        assert_eq!(
            tokenize(&i2),
            vec![
                vocab_index("Snake"),
                vocab_index("AGENT"),
                vocab_index("blue")
            ]
        );
    }

    #[test]
    fn agent_side_changes_the_stream() {
        let left = parse("EastFrom(AGENT, Shape('rect', SCENE))").unwrap();
        let right = parse("EastFrom(Shape('rect', SCENE), AGENT)").unwrap();
        assert_ne!(tokenize(&left), tokenize(&right));
    }
}
