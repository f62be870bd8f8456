//! Core world types and the transition function.

use thiserror::Error;

/// Side length of the walkable grid.
pub const GRID_SIZE: u8 = 5;
/// Number of walkable cells.
pub const NUM_CELLS: usize = (GRID_SIZE as usize) * (GRID_SIZE as usize);

/// Block shape. `Rect` is the square block; the instruction language calls it `rect`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Shape {
    Circle,
    Rect,
    Triangle,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Circle, Shape::Rect, Shape::Triangle];
}

/// Block color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ColorId {
    Red,
    Green,
    Blue,
}

impl ColorId {
    pub const ALL: [ColorId; 3] = [ColorId::Red, ColorId::Green, ColorId::Blue];
}

/// A block kind: one of the 9 color x shape combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Block {
    pub color: ColorId,
    pub shape: Shape,
}

impl Block {
    pub fn new(color: ColorId, shape: Shape) -> Self {
        Block { color, shape }
    }

    /// All 9 block kinds in (color, shape) lexicographic order.
    pub fn all_kinds() -> impl Iterator<Item = Block> {
        ColorId::ALL
            .into_iter()
            .flat_map(|c| Shape::ALL.into_iter().map(move |s| Block::new(c, s)))
    }

    /// Dense index in 0..9, consistent with `all_kinds` order.
    pub fn kind_index(self) -> usize {
        self.color as usize * 3 + self.shape as usize
    }
}

/// A walkable cell position. `col` grows eastward, `row` grows southward;
/// row 0 is the north edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridPos {
    pub col: u8,
    pub row: u8,
}

impl GridPos {
    /// Construct a position, panicking outside the grid. Use `try_offset`
    /// for arithmetic that may leave the grid.
    pub fn new(col: u8, row: u8) -> Self {
        assert!(col < GRID_SIZE && row < GRID_SIZE, "position off-grid");
        GridPos { col, row }
    }

    /// Dense row-major cell index in 0..25.
    pub fn index(self) -> usize {
        self.row as usize * GRID_SIZE as usize + self.col as usize
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < NUM_CELLS);
        GridPos {
            col: (i % GRID_SIZE as usize) as u8,
            row: (i / GRID_SIZE as usize) as u8,
        }
    }

    /// The cell at `self + (dc, dr)`, or `None` if it lies in the wall.
    pub fn try_offset(self, dc: i8, dr: i8) -> Option<GridPos> {
        let col = self.col as i16 + dc as i16;
        let row = self.row as i16 + dr as i16;
        if (0..GRID_SIZE as i16).contains(&col) && (0..GRID_SIZE as i16).contains(&row) {
            Some(GridPos {
                col: col as u8,
                row: row as u8,
            })
        } else {
            None
        }
    }

    pub fn all() -> impl Iterator<Item = GridPos> {
        (0..NUM_CELLS).map(GridPos::from_index)
    }
}

/// Agent position plus what it is carrying (at most one block).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AgentState {
    pub pos: GridPos,
    pub carried: Option<Block>,
}

/// Full world state: cell contents plus the agent.
///
/// Invariants, preserved by every constructor and by `step`:
/// each cell holds at most one block (by representation); if the agent
/// carries a block, its own cell is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WorldState {
    cells: [Option<Block>; NUM_CELLS],
    pub agent: AgentState,
}

/// Errors from `initial_state`.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum InitError {
    #[error("two blocks placed at {0:?}")]
    Overlap(GridPos),
    #[error("agent at {0:?} carries a block but stands on one")]
    CarryOverBlock(GridPos),
}

impl WorldState {
    /// Build a state from block placements and an agent. Rejects placements
    /// that stack two blocks or put a carrying agent on top of a block.
    pub fn new(
        blocks: &[(GridPos, Block)],
        agent_pos: GridPos,
        carried: Option<Block>,
    ) -> Result<Self, InitError> {
        let mut cells = [None; NUM_CELLS];
        for &(pos, block) in blocks {
            if cells[pos.index()].is_some() {
                return Err(InitError::Overlap(pos));
            }
            cells[pos.index()] = Some(block);
        }
        if carried.is_some() && cells[agent_pos.index()].is_some() {
            return Err(InitError::CarryOverBlock(agent_pos));
        }
        Ok(WorldState {
            cells,
            agent: AgentState {
                pos: agent_pos,
                carried,
            },
        })
    }

    pub fn block_at(&self, pos: GridPos) -> Option<Block> {
        self.cells[pos.index()]
    }

    /// Placed blocks in row-major cell order. Carried blocks are not included.
    pub fn blocks(&self) -> impl Iterator<Item = (GridPos, Block)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.map(|b| (GridPos::from_index(i), b)))
    }

    /// Multiset of all block kinds in the world, placed and carried,
    /// as counts indexed by `Block::kind_index`.
    pub fn block_census(&self) -> [u8; 9] {
        let mut counts = [0u8; 9];
        for (_, b) in self.blocks() {
            counts[b.kind_index()] += 1;
        }
        if let Some(b) = self.agent.carried {
            counts[b.kind_index()] += 1;
        }
        counts
    }
}

/// Agent actions. `ALL` fixes the index order used by policy heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Interact,
    Noop,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::Interact,
        Action::Noop,
    ];

    pub fn index(self) -> usize {
        Action::ALL.iter().position(|&a| a == self).unwrap()
    }
}

/// A set of block kinds, used by `EnvModifier` to mark blocks immovable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlockSet(u16);

impl BlockSet {
    pub const EMPTY: BlockSet = BlockSet(0);

    pub fn with(mut self, block: Block) -> Self {
        self.0 |= 1 << block.kind_index();
        self
    }

    pub fn contains(self, block: Block) -> bool {
        self.0 & (1 << block.kind_index()) != 0
    }
}

/// Optional tweak of world dynamics, fixed for a whole episode.
/// Blocks in `immovable` cannot be picked up; everything else is unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EnvModifier {
    pub immovable: BlockSet,
}

impl EnvModifier {
    pub const NONE: EnvModifier = EnvModifier {
        immovable: BlockSet::EMPTY,
    };

    /// The red-square drop-out modifier: red rect blocks cannot be lifted.
    pub fn immovable_red_rects() -> Self {
        EnvModifier {
            immovable: BlockSet::EMPTY.with(Block::new(ColorId::Red, Shape::Rect)),
        }
    }
}

/// Construct a start state from block placements and an agent position.
/// The agent starts empty-handed; it may share a cell with a block.
pub fn initial_state(blocks: &[(GridPos, Block)], agent_pos: GridPos) -> Result<WorldState, InitError> {
    WorldState::new(blocks, agent_pos, None)
}

/// The transition function. Total: every (state, action) pair yields a
/// successor; actions that cannot apply leave the state unchanged.
///
/// Movement: a free agent may enter any cell; a carrying agent may only
/// enter empty cells; the wall ring blocks everyone.
/// Interact: a free agent on a block picks it up unless the modifier marks
/// it immovable; a carrying agent drops into its own cell (always empty
/// while carrying, so a drop never fails).
pub fn step(state: &WorldState, action: Action, modifier: &EnvModifier) -> WorldState {
    let mut next = *state;
    match action {
        Action::Noop => {}
        Action::Up | Action::Down | Action::Left | Action::Right => {
            let (dc, dr) = match action {
                Action::Up => (0, -1),
                Action::Down => (0, 1),
                Action::Left => (-1, 0),
                Action::Right => (1, 0),
                _ => unreachable!(),
            };
            if let Some(target) = state.agent.pos.try_offset(dc, dr) {
                let blocked = state.agent.carried.is_some() && state.block_at(target).is_some();
                if !blocked {
                    next.agent.pos = target;
                }
            }
        }
        Action::Interact => match state.agent.carried {
            None => {
                if let Some(block) = state.block_at(state.agent.pos) {
                    if !modifier.immovable.contains(block) {
                        next.cells[state.agent.pos.index()] = None;
                        next.agent.carried = Some(block);
                    }
                }
            }
            Some(block) => {
                debug_assert!(state.block_at(state.agent.pos).is_none());
                next.cells[state.agent.pos.index()] = Some(block);
                next.agent.carried = None;
            }
        },
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rr() -> Block {
        Block::new(ColorId::Red, Shape::Rect)
    }

    #[test]
    fn pickup_and_drop_round_trip() {
        let p = GridPos::new(2, 2);
        let s0 = initial_state(&[(p, rr())], p).unwrap();
        let s1 = step(&s0, Action::Interact, &EnvModifier::NONE);
        assert_eq!(s1.agent.carried, Some(rr()));
        assert_eq!(s1.block_at(p), None);
        let s2 = step(&s1, Action::Interact, &EnvModifier::NONE);
        assert_eq!(s2, s0);
    }

    #[test]
    fn carrying_agent_blocked_by_occupied_cell() {
        let here = GridPos::new(1, 1);
        let there = GridPos::new(2, 1);
        let s0 = WorldState::new(&[(there, rr())], here, Some(rr())).unwrap();
        let s1 = step(&s0, Action::Right, &EnvModifier::NONE);
        assert_eq!(s1, s0);
        let s2 = step(&s0, Action::Left, &EnvModifier::NONE);
        assert_eq!(s2.agent.pos, GridPos::new(0, 1));
    }

    #[test]
    fn free_agent_walks_over_blocks() {
        let here = GridPos::new(1, 1);
        let there = GridPos::new(2, 1);
        let s0 = initial_state(&[(there, rr())], here).unwrap();
        let s1 = step(&s0, Action::Right, &EnvModifier::NONE);
        assert_eq!(s1.agent.pos, there);
        assert_eq!(s1.block_at(there), Some(rr()));
    }

    #[test]
    fn walls_stop_movement() {
        let s0 = initial_state(&[], GridPos::new(0, 0)).unwrap();
        assert_eq!(step(&s0, Action::Up, &EnvModifier::NONE), s0);
        assert_eq!(step(&s0, Action::Left, &EnvModifier::NONE), s0);
        let s1 = step(&s0, Action::Down, &EnvModifier::NONE);
        assert_eq!(s1.agent.pos, GridPos::new(0, 1));
    }

    #[test]
    fn immovable_block_cannot_be_lifted() {
        let p = GridPos::new(3, 4);
        let s0 = initial_state(&[(p, rr())], p).unwrap();
        let m = EnvModifier::immovable_red_rects();
        let s1 = step(&s0, Action::Interact, &m);
        assert_eq!(s1, s0);
        let green = Block::new(ColorId::Green, Shape::Rect);
        let s2 = initial_state(&[(p, green)], p).unwrap();
        let s3 = step(&s2, Action::Interact, &m);
        assert_eq!(s3.agent.carried, Some(green));
    }

    #[test]
    fn overlapping_blocks_rejected() {
        let p = GridPos::new(0, 0);
        let err = initial_state(&[(p, rr()), (p, rr())], GridPos::new(1, 1));
        assert_eq!(err.unwrap_err(), InitError::Overlap(p));
    }
}
