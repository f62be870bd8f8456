//! Canonical instruction text. `parse` accepts exactly this form (plus
//! whitespace and quote variations), so printing then parsing is identity.

use crate::{ArrInstruction, Descriptor, Instruction, Operand, RelInstruction, Relation};
use gridlu_env::{ColorId, Shape};
use std::fmt;

pub(crate) fn color_name(c: ColorId) -> &'static str {
    match c {
        ColorId::Red => "red",
        ColorId::Green => "green",
        ColorId::Blue => "blue",
    }
}

pub(crate) fn shape_name(s: Shape) -> &'static str {
    match s {
        Shape::Circle => "circle",
        Shape::Rect => "rect",
        Shape::Triangle => "triangle",
    }
}

pub(crate) fn relation_name(r: Relation) -> &'static str {
    match r {
        Relation::NorthFrom => "NorthFrom",
        Relation::SouthFrom => "SouthFrom",
        Relation::EastFrom => "EastFrom",
        Relation::WestFrom => "WestFrom",
        Relation::SameLocation => "SameLocation",
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.color, self.shape) {
            (Some(c), Some(s)) => write!(
                f,
                "Color('{}', Shape('{}', SCENE))",
                color_name(c),
                shape_name(s)
            ),
            (Some(c), None) => write!(f, "Color('{}', SCENE)", color_name(c)),
            (None, Some(s)) => write!(f, "Shape('{}', SCENE)", shape_name(s)),
            (None, None) => write!(f, "SCENE"),
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Agent => f.write_str("AGENT"),
            Operand::Object(d) => d.fmt(f),
        }
    }
}

impl fmt::Display for RelInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({}, {})",
            relation_name(self.relation),
            self.left,
            self.right
        )
    }
}

impl fmt::Display for ArrInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.color {
            None => write!(f, "{}(AGENT, SCENE)", self.word.name()),
            Some(c) => write!(
                f,
                "{}(AGENT, Color('{}', SCENE))",
                self.word.name(),
                color_name(c)
            ),
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Relation(r) => r.fmt(f),
            Instruction::Arrangement(a) => a.fmt(f),
        }
    }
}
