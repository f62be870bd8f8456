//! Line-oriented world-state serialization.
//!
//! Format: 25 two-character cell codes in row-major order, a `|` separator,
//! then `col,row,carry` for the agent. A cell code is a color initial
//! (`r`/`g`/`b`) followed by a shape initial (`c`/`r`/`t`); empty cells and
//! an empty hand are written `..`. Example:
//!
//! `..rc..........gt.................................|2,0,..`
//!
//! The encoding is one line of ASCII, round-trips exactly, and rejects
//! malformed input with a positioned error.

use crate::state::{Block, ColorId, GridPos, Shape, WorldState, GRID_SIZE, NUM_CELLS};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StateParseError {
    #[error("state line must be 50 cell chars, '|', and an agent field; got length {0}")]
    WrongShape(usize),
    #[error("bad cell code {code:?} at cell {cell}")]
    BadCellCode { cell: usize, code: String },
    #[error("bad agent field {0:?}")]
    BadAgent(String),
    #[error("agent carries a block but stands on one at col {0}, row {1}")]
    CarryOverBlock(u8, u8),
}

fn color_char(c: ColorId) -> char {
    match c {
        ColorId::Red => 'r',
        ColorId::Green => 'g',
        ColorId::Blue => 'b',
    }
}

fn shape_char(s: Shape) -> char {
    match s {
        Shape::Circle => 'c',
        Shape::Rect => 'r',
        Shape::Triangle => 't',
    }
}

fn parse_color(c: char) -> Option<ColorId> {
    match c {
        'r' => Some(ColorId::Red),
        'g' => Some(ColorId::Green),
        'b' => Some(ColorId::Blue),
        _ => None,
    }
}

fn parse_shape(c: char) -> Option<Shape> {
    match c {
        'c' => Some(Shape::Circle),
        'r' => Some(Shape::Rect),
        't' => Some(Shape::Triangle),
        _ => None,
    }
}

fn push_code(out: &mut String, block: Option<Block>) {
    match block {
        None => out.push_str(".."),
        Some(b) => {
            out.push(color_char(b.color));
            out.push(shape_char(b.shape));
        }
    }
}

fn parse_code(code: &str, cell: usize) -> Result<Option<Block>, StateParseError> {
    let bad = || StateParseError::BadCellCode {
        cell,
        code: code.to_string(),
    };
    let mut chars = code.chars();
    let (a, b) = (chars.next().ok_or_else(bad)?, chars.next().ok_or_else(bad)?);
    if a == '.' && b == '.' {
        return Ok(None);
    }
    let color = parse_color(a).ok_or_else(bad)?;
    let shape = parse_shape(b).ok_or_else(bad)?;
    Ok(Some(Block { color, shape }))
}

impl fmt::Display for WorldState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut line = String::with_capacity(NUM_CELLS * 2 + 8);
        for i in 0..NUM_CELLS {
            push_code(&mut line, self.block_at(GridPos::from_index(i)));
        }
        line.push('|');
        line.push_str(&format!("{},{},", self.agent.pos.col, self.agent.pos.row));
        push_code(&mut line, self.agent.carried);
        f.write_str(&line)
    }
}

impl FromStr for WorldState {
    type Err = StateParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let cells_len = NUM_CELLS * 2;
        let bytes = s.as_bytes();
        if !s.is_ascii() || bytes.len() <= cells_len || bytes[cells_len] != b'|' {
            return Err(StateParseError::WrongShape(bytes.len()));
        }
        let mut cells = [None; NUM_CELLS];
        for (i, cell) in cells.iter_mut().enumerate() {
            *cell = parse_code(&s[i * 2..i * 2 + 2], i)?;
        }
        let agent_str = &s[cells_len + 1..];
        let bad_agent = || StateParseError::BadAgent(agent_str.to_string());
        let mut parts = agent_str.split(',');
        let col: u8 = parts
            .next()
            .and_then(|p| p.parse().ok())
            .ok_or_else(bad_agent)?;
        let row: u8 = parts
            .next()
            .and_then(|p| p.parse().ok())
            .ok_or_else(bad_agent)?;
        let carry_str = parts.next().ok_or_else(bad_agent)?;
        if parts.next().is_some() || col >= GRID_SIZE || row >= GRID_SIZE || carry_str.len() != 2 {
            return Err(bad_agent());
        }
        let carried = parse_code(carry_str, NUM_CELLS).map_err(|_| bad_agent())?;
        let pos = GridPos::new(col, row);
        if carried.is_some() && cells[pos.index()].is_some() {
            return Err(StateParseError::CarryOverBlock(col, row));
        }
        let placed: Vec<(GridPos, Block)> = cells
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.map(|b| (GridPos::from_index(i), b)))
            .collect();
        Ok(WorldState::new(&placed, pos, carried).expect("validated above"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::initial_state;

    #[test]
    fn display_then_parse_round_trips() {
        let s = WorldState::new(
            &[
                (GridPos::new(1, 0), Block::new(ColorId::Red, Shape::Circle)),
                (
                    GridPos::new(3, 2),
                    Block::new(ColorId::Blue, Shape::Triangle),
                ),
            ],
            GridPos::new(4, 4),
            Some(Block::new(ColorId::Green, Shape::Rect)),
        )
        .unwrap();
        let line = s.to_string();
        let back: WorldState = line.parse().unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn parse_rejects_bad_cell_code() {
        let s = initial_state(&[], GridPos::new(0, 0)).unwrap();
        let mut line = s.to_string();
        line.replace_range(0..2, "xq");
        let err = line.parse::<WorldState>().unwrap_err();
        assert_eq!(
            err,
            StateParseError::BadCellCode {
                cell: 0,
                code: "xq".to_string()
            }
        );
    }

    #[test]
    fn parse_rejects_off_grid_agent() {
        let s = initial_state(&[], GridPos::new(0, 0)).unwrap();
        let line = s.to_string().replace("|0,0,..", "|0,7,..");
        assert!(matches!(
            line.parse::<WorldState>(),
            Err(StateParseError::BadAgent(_))
        ));
    }

    #[test]
    fn parse_rejects_carry_over_block() {
        let line = format!("rc{}|0,0,gt", "..".repeat(24));
        assert_eq!(
            line.parse::<WorldState>().unwrap_err(),
            StateParseError::CarryOverBlock(0, 0)
        );
    }

    #[test]
    fn agent_field_shape_is_checked() {
        for bad in ["0,0", "0,0,", "0,0,...", "0,0,..,x", "a,0,.."] {
            let line = format!("{}|{}", "..".repeat(25), bad);
            assert!(line.parse::<WorldState>().is_err(), "accepted {bad:?}");
        }
    }
}
