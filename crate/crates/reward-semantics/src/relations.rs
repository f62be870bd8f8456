//! Relation-instruction semantics.

use crate::arrangements::{check_arrangement, TemplateSet};
use gridlu_env::{Block, GridPos, WorldState};
use instruction_lang::{Descriptor, Instruction, Operand, RelInstruction, Relation};

/// Cell offset (dcol, drow) asserted by a relation: the instruction
/// `Rel(e1, e2)` holds when `pos(e1) = pos(e2) + offset(Rel)`. Row 0 is the
/// north edge, so NorthFrom means "one row up".
pub fn relation_offset(r: Relation) -> (i8, i8) {
    match r {
        Relation::NorthFrom => (0, -1),
        Relation::SouthFrom => (0, 1),
        Relation::EastFrom => (1, 0),
        Relation::WestFrom => (-1, 0),
        Relation::SameLocation => (0, 0),
    }
}

/// Does a block satisfy a descriptor?
pub fn matches(d: &Descriptor, b: Block) -> bool {
    d.matches(b)
}

/// An entity that can satisfy a relation operand: the agent, or a placed
/// block identified by its cell. A carried block occupies no cell and is
/// never an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Entity {
    Agent(GridPos),
    Placed(GridPos, Block),
}

impl Entity {
    fn pos(self) -> GridPos {
        match self {
            Entity::Agent(p) => p,
            Entity::Placed(p, _) => p,
        }
    }

    fn satisfies(self, op: &Operand) -> bool {
        match (op, self) {
            (Operand::Agent, Entity::Agent(_)) => true,
            (Operand::Object(d), Entity::Placed(_, b)) => d.matches(b),
            _ => false,
        }
    }
}

fn entities(s: &WorldState) -> Vec<Entity> {
    let mut out = Vec::with_capacity(1 + s.blocks().count());
    out.push(Entity::Agent(s.agent.pos));
    out.extend(s.blocks().map(|(p, b)| Entity::Placed(p, b)));
    out
}

/// Is the relation instruction satisfied in this state? True iff two
/// distinct entities e1, e2 satisfy the operands with
/// `pos(e1) = pos(e2) + offset(relation)`.
pub fn holds(instr: &RelInstruction, s: &WorldState) -> bool {
    let (dc, dr) = relation_offset(instr.relation);
    let all = entities(s);
    for (i, e1) in all.iter().enumerate() {
        if !e1.satisfies(&instr.left) {
            continue;
        }
        for (j, e2) in all.iter().enumerate() {
            if i == j || !e2.satisfies(&instr.right) {
                continue;
            }
            if e2.pos().try_offset(dc, dr) == Some(e1.pos()) {
                return true;
            }
        }
    }
    false
}

/// Ground-truth episode success: the final state is a goal state of the
/// instruction.
pub fn success(instr: &Instruction, final_state: &WorldState, templates: &TemplateSet) -> bool {
    match instr {
        Instruction::Relation(r) => holds(r, final_state),
        Instruction::Arrangement(a) => check_arrangement(a, final_state, templates).success,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gridlu_env::{initial_state, ColorId, Shape, WorldState};
    use instruction_lang::parse;

    fn rel(text: &str) -> RelInstruction {
        match parse(text).unwrap() {
            Instruction::Relation(r) => r,
            _ => panic!("not a relation instruction"),
        }
    }

    fn two_block_state() -> WorldState {
        // Red circle at (2,1), blue rect directly south of it at (2,2).
        initial_state(
            &[
                (
                    GridPos::new(2, 1),
                    Block::new(ColorId::Red, Shape::Circle),
                ),
                (GridPos::new(2, 2), Block::new(ColorId::Blue, Shape::Rect)),
            ],
            GridPos::new(0, 0),
        )
        .unwrap()
    }

    #[test]
    fn directional_offsets_negate_in_pairs() {
        let (nc, nr) = relation_offset(Relation::NorthFrom);
        let (sc, sr) = relation_offset(Relation::SouthFrom);
        assert_eq!((nc, nr), (-sc, -sr));
        let (ec, er) = relation_offset(Relation::EastFrom);
        let (wc, wr) = relation_offset(Relation::WestFrom);
        assert_eq!((ec, er), (-wc, -wr));
        assert_eq!(relation_offset(Relation::SameLocation), (0, 0));
    }

    #[test]
    fn red_circle_above_blue_rect() {
        let s = two_block_state();
        let instr = rel(
            "NorthFrom(Color('red', Shape('circle', SCENE)), Color('blue', Shape('rect', SCENE)))",
        );
        assert!(holds(&instr, &s));
        let flipped = rel(
            "SouthFrom(Color('blue', Shape('rect', SCENE)), Color('red', Shape('circle', SCENE)))",
        );
        assert!(holds(&flipped, &s));
        let wrong = rel(
            "EastFrom(Color('red', Shape('circle', SCENE)), Color('blue', Shape('rect', SCENE)))",
        );
        assert!(!holds(&wrong, &s));
    }

    #[test]
    fn distant_blocks_do_not_satisfy_adjacency() {
        let s = initial_state(
            &[
                (
                    GridPos::new(0, 0),
                    Block::new(ColorId::Red, Shape::Circle),
                ),
                (GridPos::new(4, 4), Block::new(ColorId::Blue, Shape::Rect)),
            ],
            GridPos::new(2, 2),
        )
        .unwrap();
        let instr = rel(
            "NorthFrom(Color('red', Shape('circle', SCENE)), Color('blue', Shape('rect', SCENE)))",
        );
        assert!(!holds(&instr, &s));
    }

    #[test]
    fn agent_on_a_block_satisfies_same_location() {
        let p = GridPos::new(3, 3);
        let s = initial_state(&[(p, Block::new(ColorId::Green, Shape::Circle))], p).unwrap();
        let instr = rel("SameLocation(AGENT, Shape('circle', SCENE))");
        assert!(holds(&instr, &s));
    }

    #[test]
    fn carried_blocks_are_not_entities() {
        let p = GridPos::new(3, 3);
        let s = WorldState::new(&[], p, Some(Block::new(ColorId::Green, Shape::Circle))).unwrap();
        let instr = rel("SameLocation(AGENT, Shape('circle', SCENE))");
        assert!(!holds(&instr, &s));
    }

    #[test]
    fn same_block_cannot_serve_both_sides() {
        // One green circle: it matches both descriptors, but a single entity
        // cannot be e1 and e2 at once, so SameLocation-style overlap via one
        // block must not arise; here tested with a color/shape split pair.
        let p = GridPos::new(1, 1);
        let s = initial_state(&[(p, Block::new(ColorId::Green, Shape::Circle))], GridPos::new(4, 4))
            .unwrap();
        // EastFrom(green, circle) with offset (1,0) over the same block.
        let instr = rel("EastFrom(Color('green', SCENE), Shape('circle', SCENE))");
        assert!(!holds(&instr, &s));
    }
}
