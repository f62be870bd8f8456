//! Exhaustive instruction enumerators with a fixed, documented order.

use crate::{
    ArrInstruction, ArrangementWord, Descriptor, Instruction, Operand, RelInstruction, Relation,
};
use gridlu_env::{ColorId, Shape};

/// All 15 object descriptors: the 9 color+shape forms in (color, shape)
/// lexicographic order, then the 3 color-only forms, then the 3 shape-only
/// forms.
pub fn enumerate_descriptors() -> Vec<Descriptor> {
    let mut out = Vec::with_capacity(15);
    for color in ColorId::ALL {
        for shape in Shape::ALL {
            out.push(Descriptor {
                color: Some(color),
                shape: Some(shape),
            });
        }
    }
    for color in ColorId::ALL {
        out.push(Descriptor {
            color: Some(color),
            shape: None,
        });
    }
    for shape in Shape::ALL {
        out.push(Descriptor {
            color: None,
            shape: Some(shape),
        });
    }
    out
}

/// All 990 relation instructions: the 150 go-to forms (agent on the left,
/// then on the right, per relation), followed by the 840 bring-to forms.
pub fn enumerate_relations() -> Vec<Instruction> {
    let descriptors = enumerate_descriptors();
    let mut out = Vec::with_capacity(990);
    for relation in Relation::ALL {
        for &d in &descriptors {
            out.push(RelInstruction::new(relation, Operand::Agent, Operand::Object(d)).unwrap());
        }
        for &d in &descriptors {
            out.push(RelInstruction::new(relation, Operand::Object(d), Operand::Agent).unwrap());
        }
    }
    for relation in Relation::DIRECTIONAL {
        for &left in &descriptors {
            for &right in &descriptors {
                if left != right {
                    out.push(
                        RelInstruction::new(relation, Operand::Object(left), Operand::Object(right))
                            .unwrap(),
                    );
                }
            }
        }
    }
    out.into_iter().map(Instruction::Relation).collect()
}

/// All 36 arrangement instructions: the 9 colorless forms in word order,
/// then each word with each color.
pub fn enumerate_arrangements() -> Vec<Instruction> {
    let mut out = Vec::with_capacity(36);
    for word in ArrangementWord::ALL {
        out.push(ArrInstruction { word, color: None });
    }
    for word in ArrangementWord::ALL {
        for color in ColorId::ALL {
            out.push(ArrInstruction {
                word,
                color: Some(color),
            });
        }
    }
    out.into_iter().map(Instruction::Arrangement).collect()
}
