//! GridLU: a deterministic 5x5 block world.
//!
//! The world is a 5x5 grid of cells surrounded by an impassable wall ring.
//! Each cell holds at most one block (a colored shape); a single agent walks
//! the grid, picks blocks up, carries them, and drops them. Dynamics are a
//! pure function of (state, action): no randomness, no hidden state.
//!
//! The crate also provides the canonical pixel renderer (a 56x56 RGB image
//! that is injective over reachable states) and a compact line-oriented
//! serialization of world states used by dataset files.

mod render;
mod serial;
mod state;

pub use render::{render, Image, IMAGE_HEIGHT, IMAGE_WIDTH, PATCH};
pub use serial::StateParseError;
pub use state::{
    initial_state, step, Action, AgentState, Block, BlockSet, ColorId, EnvModifier, GridPos,
    InitError, Shape, WorldState, GRID_SIZE, NUM_CELLS,
};
