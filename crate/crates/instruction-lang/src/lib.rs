//! The GridLU instruction language: abstract syntax, a canonical printer,
//! a recursive-descent parser, exhaustive enumerators, and the flat
//! tokenization used by sequence encoders.
//!
//! Two instruction families exist. Relation instructions assert a spatial
//! relation between two entities, each the agent or a block matching a
//! descriptor, e.g. `NorthFrom(Color('red', Shape('circle', SCENE)), AGENT)`.
//! Arrangement instructions ask for four blocks forming a named shape,
//! optionally color-restricted, e.g. `Snake(AGENT, Color('blue', SCENE))`.
//!
//! Well-formedness beyond the grammar: a descriptor names at least one
//! attribute; a relation instruction mentions the agent on exactly one side,
//! or relates two distinct object descriptors; `SameLocation` requires the
//! agent on one side.

mod enumerate;
mod parse;
mod print;
mod token;

pub use enumerate::{enumerate_arrangements, enumerate_descriptors, enumerate_relations};
pub use parse::{parse, ParseError};
pub use token::{tokenize, vocab_index, VOCAB};

use gridlu_env::{Block, ColorId, Shape};
use thiserror::Error;

/// Spatial relation between two entities. The first four are directional;
/// `SameLocation` holds when both entities share a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    NorthFrom,
    SouthFrom,
    EastFrom,
    WestFrom,
    SameLocation,
}

impl Relation {
    pub const ALL: [Relation; 5] = [
        Relation::NorthFrom,
        Relation::SouthFrom,
        Relation::EastFrom,
        Relation::WestFrom,
        Relation::SameLocation,
    ];
    /// The relations allowed between two block descriptors.
    pub const DIRECTIONAL: [Relation; 4] = [
        Relation::NorthFrom,
        Relation::SouthFrom,
        Relation::EastFrom,
        Relation::WestFrom,
    ];
}

/// A block descriptor: color and/or shape, at least one present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Descriptor {
    pub color: Option<ColorId>,
    pub shape: Option<Shape>,
}

impl Descriptor {
    pub fn new(color: Option<ColorId>, shape: Option<Shape>) -> Result<Self, SemanticError> {
        if color.is_none() && shape.is_none() {
            return Err(SemanticError::EmptyDescriptor);
        }
        Ok(Descriptor { color, shape })
    }

    /// Does a concrete block satisfy this descriptor?
    pub fn matches(&self, block: Block) -> bool {
        self.color.map_or(true, |c| c == block.color)
            && self.shape.map_or(true, |s| s == block.shape)
    }
}

/// One side of a relation instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Agent,
    Object(Descriptor),
}

/// A relation instruction. Construct through `new` to enforce
/// well-formedness; `parse` and the enumerators only build valid values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RelInstruction {
    pub relation: Relation,
    pub left: Operand,
    pub right: Operand,
}

impl RelInstruction {
    pub fn new(relation: Relation, left: Operand, right: Operand) -> Result<Self, SemanticError> {
        let instr = RelInstruction {
            relation,
            left,
            right,
        };
        instr.check()?;
        Ok(instr)
    }

    pub fn check(&self) -> Result<(), SemanticError> {
        match (self.left, self.right) {
            (Operand::Agent, Operand::Agent) => Err(SemanticError::TwoAgents),
            (Operand::Object(a), Operand::Object(b)) => {
                if self.relation == Relation::SameLocation {
                    Err(SemanticError::SameLocationWithoutAgent)
                } else if a == b {
                    Err(SemanticError::IdenticalOperands)
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// True for the go-to family (the agent is one operand).
    pub fn mentions_agent(&self) -> bool {
        self.left == Operand::Agent || self.right == Operand::Agent
    }
}

/// The nine arrangement words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArrangementWord {
    Square,
    Line,
    Dline,
    Triangle,
    Circle,
    Eel,
    Snake,
    Connected,
    Disconnected,
}

impl ArrangementWord {
    pub const ALL: [ArrangementWord; 9] = [
        ArrangementWord::Square,
        ArrangementWord::Line,
        ArrangementWord::Dline,
        ArrangementWord::Triangle,
        ArrangementWord::Circle,
        ArrangementWord::Eel,
        ArrangementWord::Snake,
        ArrangementWord::Connected,
        ArrangementWord::Disconnected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArrangementWord::Square => "Square",
            ArrangementWord::Line => "Line",
            ArrangementWord::Dline => "Dline",
            ArrangementWord::Triangle => "Triangle",
            ArrangementWord::Circle => "Circle",
            ArrangementWord::Eel => "Eel",
            ArrangementWord::Snake => "Snake",
            ArrangementWord::Connected => "Connected",
            ArrangementWord::Disconnected => "Disconnected",
        }
    }
}

/// An arrangement instruction: a word plus an optional color restriction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArrInstruction {
    pub word: ArrangementWord,
    pub color: Option<ColorId>,
}

/// Any instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instruction {
    Relation(RelInstruction),
    Arrangement(ArrInstruction),
}

/// Violations of instruction well-formedness.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SemanticError {
    #[error("descriptor names neither color nor shape")]
    EmptyDescriptor,
    #[error("relation instruction mentions the agent on both sides")]
    TwoAgents,
    #[error("SameLocation requires the agent as one operand")]
    SameLocationWithoutAgent,
    #[error("relation instruction repeats the same descriptor on both sides")]
    IdenticalOperands,
}
