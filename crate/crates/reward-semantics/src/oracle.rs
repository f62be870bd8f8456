//! Reference implementations used by tests and the `verify` command.
//!
//! These are written directly from the definitions, independently of the
//! main code paths, and deliberately share no helper code with them: the
//! main checker is validated by exact agreement with these oracles.

use gridlu_env::{Block, GridPos, WorldState};
use instruction_lang::{Operand, RelInstruction, Relation};

fn offset_of(r: Relation) -> (i8, i8) {
    // NorthFrom(e1, e2): e1 sits one row north (row - 1) of e2.
    match r {
        Relation::NorthFrom => (0, -1),
        Relation::SouthFrom => (0, 1),
        Relation::EastFrom => (1, 0),
        Relation::WestFrom => (-1, 0),
        Relation::SameLocation => (0, 0),
    }
}

/// Brute-force `holds`: enumerate every ordered pair of distinct entities
/// (the agent plus each placed block) and test operand match and position
/// offset directly.
pub fn holds_brute_force(instr: &RelInstruction, s: &WorldState) -> bool {
    // Entity table: index 0 is the agent, the rest are placed blocks.
    let mut positions: Vec<GridPos> = vec![s.agent.pos];
    let mut blocks: Vec<Option<Block>> = vec![None];
    for (p, b) in s.blocks() {
        positions.push(p);
        blocks.push(Some(b));
    }
    let matches_operand = |op: &Operand, i: usize| -> bool {
        match (op, blocks[i]) {
            (Operand::Agent, None) => true,
            (Operand::Object(d), Some(b)) => {
                d.color.map_or(true, |c| c == b.color) && d.shape.map_or(true, |s| s == b.shape)
            }
            _ => false,
        }
    };
    let (dc, dr) = offset_of(instr.relation);
    for e1 in 0..positions.len() {
        for e2 in 0..positions.len() {
            if e1 == e2 {
                continue;
            }
            if !matches_operand(&instr.left, e1) || !matches_operand(&instr.right, e2) {
                continue;
            }
            let p1 = positions[e1];
            let p2 = positions[e2];
            if p1.col as i16 == p2.col as i16 + dc as i16
                && p1.row as i16 == p2.row as i16 + dr as i16
            {
                return true;
            }
        }
    }
    false
}
