//! Arrangement-instruction semantics: templates, transforms, the goal
//! checker, the goal-state sampler, and the counting arithmetic.

use gridlu_env::{Block, ColorId, GridPos, Shape, WorldState, GRID_SIZE, NUM_CELLS};
use instruction_lang::{ArrInstruction, ArrangementWord};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeSet;
use thiserror::Error;

/// The 8 grid symmetries (dihedral group of the square): four rotations,
/// each optionally preceded by a horizontal flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    Flip,
    FlipRot90,
    FlipRot180,
    FlipRot270,
}

impl Symmetry {
    pub const ALL: [Symmetry; 8] = [
        Symmetry::Identity,
        Symmetry::Rot90,
        Symmetry::Rot180,
        Symmetry::Rot270,
        Symmetry::Flip,
        Symmetry::FlipRot90,
        Symmetry::FlipRot180,
        Symmetry::FlipRot270,
    ];

    /// Apply to a relative cell offset.
    pub fn apply(self, (x, y): (i8, i8)) -> (i8, i8) {
        match self {
            Symmetry::Identity => (x, y),
            Symmetry::Rot90 => (y, -x),
            Symmetry::Rot180 => (-x, -y),
            Symmetry::Rot270 => (-y, x),
            Symmetry::Flip => (-x, y),
            Symmetry::FlipRot90 => (y, x),
            Symmetry::FlipRot180 => (x, -y),
            Symmetry::FlipRot270 => (-y, -x),
        }
    }
}

/// A symmetry composed with a translation; the transform group under which
/// templates are matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransformOp {
    pub symmetry: Symmetry,
    pub dx: i8,
    pub dy: i8,
}

impl TransformOp {
    /// Apply to a set of relative cells; `None` if any image cell leaves the
    /// grid.
    pub fn apply(&self, cells: &[(i8, i8)]) -> Option<Vec<GridPos>> {
        let mut out = Vec::with_capacity(cells.len());
        for &c in cells {
            let (x, y) = self.symmetry.apply(c);
            let (x, y) = (x as i16 + self.dx as i16, y as i16 + self.dy as i16);
            if !(0..GRID_SIZE as i16).contains(&x) || !(0..GRID_SIZE as i16).contains(&y) {
                return None;
            }
            out.push(GridPos::new(x as u8, y as u8));
        }
        Some(out)
    }
}

/// How a word's goal sets are defined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateKind {
    /// Matched as transforms of one or more canonical 4-cell sets.
    Exact(Vec<Vec<(i8, i8)>>),
    /// Any edge-connected 4-cell set.
    EdgeConnected,
    /// Any 4-cell set with no two cells edge-adjacent.
    PairwiseNonadjacent,
}

/// Template record for one arrangement word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormTemplate {
    pub word: ArrangementWord,
    pub kind: TemplateKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateParseError {
    #[error("template file must start with '# arrangement-templates v1'")]
    MissingVersion,
    #[error("line {0}: {1}")]
    Malformed(usize, String),
    #[error("word {0} defined twice")]
    Duplicate(String),
    #[error("word {0} has no template record")]
    Missing(String),
}

/// Result of an arrangement goal check. `matched_cells` is the first
/// matching placement in the checker's fixed search order, present iff
/// `success`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalCheckResult {
    pub success: bool,
    pub matched_cells: Option<Vec<GridPos>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlacementError {
    #[error("word {0:?} has no legal placement")]
    NoPlacement(ArrangementWord),
}

fn cell_mask(cells: &[GridPos]) -> u32 {
    cells.iter().fold(0u32, |m, p| m | 1 << p.index())
}

fn edge_connected(cells: &[GridPos]) -> bool {
    let mut seen = [false; 4];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for (j, c) in cells.iter().enumerate() {
            if !seen[j] && manhattan(cells[i], *c) == 1 {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count == cells.len()
}

fn pairwise_nonadjacent(cells: &[GridPos]) -> bool {
    for (i, a) in cells.iter().enumerate() {
        for b in &cells[i + 1..] {
            if manhattan(*a, *b) == 1 {
                return false;
            }
        }
    }
    true
}

fn manhattan(a: GridPos, b: GridPos) -> u8 {
    a.col.abs_diff(b.col) + a.row.abs_diff(b.row)
}

/// All 9 templates with their placement lists precomputed. Placements are
/// deduplicated as sets and stored in lexicographic cell order, which fixes
/// the checker's deterministic search order.
#[derive(Debug)]
pub struct TemplateSet {
    templates: Vec<FormTemplate>,
    placements: Vec<Vec<Vec<GridPos>>>,
    masks: Vec<Vec<u32>>,
}

impl TemplateSet {
    /// The built-in template data file.
    pub fn builtin() -> Self {
        Self::from_str(include_str!("../data/templates.txt"))
            .expect("built-in template file is valid")
    }

    /// Parse a template data file and precompute placements.
    pub fn from_str(text: &str) -> Result<Self, TemplateParseError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first.trim() == "# arrangement-templates v1" => {}
            _ => return Err(TemplateParseError::MissingVersion),
        }
        let mut templates: Vec<Option<FormTemplate>> = vec![None; ArrangementWord::ALL.len()];
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let err = |msg: &str| TemplateParseError::Malformed(lineno, msg.to_string());
            let mut fields = line.split_whitespace();
            let word_name = fields.next().ok_or_else(|| err("missing word"))?;
            let word = ArrangementWord::ALL
                .into_iter()
                .find(|w| w.name() == word_name)
                .ok_or_else(|| err(&format!("unknown word {word_name:?}")))?;
            let kind_name = fields.next().ok_or_else(|| err("missing kind"))?;
            let kind = match kind_name {
                "exact" => {
                    let mut variants = Vec::new();
                    for group in fields {
                        let mut cells = Vec::new();
                        for pair in group.split(';') {
                            let (x, y) = pair
                                .split_once(',')
                                .ok_or_else(|| err(&format!("bad cell {pair:?}")))?;
                            let x: i8 = x
                                .parse()
                                .map_err(|_| err(&format!("bad cell {pair:?}")))?;
                            let y: i8 = y
                                .parse()
                                .map_err(|_| err(&format!("bad cell {pair:?}")))?;
                            if !(0..GRID_SIZE as i8).contains(&x)
                                || !(0..GRID_SIZE as i8).contains(&y)
                            {
                                return Err(err(&format!("cell {pair:?} outside footprint")));
                            }
                            cells.push((x, y));
                        }
                        if cells.len() != 4 {
                            return Err(err("template cell set must have exactly 4 cells"));
                        }
                        variants.push(cells);
                    }
                    if variants.is_empty() {
                        return Err(err("exact template needs at least one cell set"));
                    }
                    TemplateKind::Exact(variants)
                }
                "predicate" => match fields.next() {
                    Some("edge-connected") => TemplateKind::EdgeConnected,
                    Some("pairwise-nonadjacent") => TemplateKind::PairwiseNonadjacent,
                    other => return Err(err(&format!("unknown predicate {other:?}"))),
                },
                other => return Err(err(&format!("unknown kind {other:?}"))),
            };
            let slot = ArrangementWord::ALL
                .iter()
                .position(|w| *w == word)
                .unwrap();
            if templates[slot].is_some() {
                return Err(TemplateParseError::Duplicate(word_name.to_string()));
            }
            templates[slot] = Some(FormTemplate { word, kind });
        }
        let templates: Vec<FormTemplate> = templates
            .into_iter()
            .zip(ArrangementWord::ALL)
            .map(|(t, w)| t.ok_or_else(|| TemplateParseError::Missing(w.name().to_string())))
            .collect::<Result<_, _>>()?;
        let placements: Vec<Vec<Vec<GridPos>>> =
            templates.iter().map(enumerate_placements).collect();
        let masks = placements
            .iter()
            .map(|sets| sets.iter().map(|s| cell_mask(s)).collect())
            .collect();
        Ok(TemplateSet {
            templates,
            placements,
            masks,
        })
    }

    pub fn template(&self, word: ArrangementWord) -> &FormTemplate {
        &self.templates[word as usize]
    }

    /// All distinct in-bounds placements of the word, each a sorted 4-cell
    /// set, in lexicographic order.
    pub fn placement_sets(&self, word: ArrangementWord) -> &[Vec<GridPos>] {
        &self.placements[word as usize]
    }

    /// Number of distinct placements (Table "possible arrangement
    /// positions" column, as computed from the chosen templates).
    pub fn placement_count(&self, word: ArrangementWord) -> usize {
        self.placements[word as usize].len()
    }

    fn placement_masks(&self, word: ArrangementWord) -> &[u32] {
        &self.masks[word as usize]
    }
}

/// Exhaustively enumerate a template's distinct placements.
fn enumerate_placements(template: &FormTemplate) -> Vec<Vec<GridPos>> {
    let mut out: BTreeSet<Vec<GridPos>> = BTreeSet::new();
    match &template.kind {
        TemplateKind::Exact(variants) => {
            for cells in variants {
                for symmetry in Symmetry::ALL {
                    for dx in -(GRID_SIZE as i8)..=(GRID_SIZE as i8) {
                        for dy in -(GRID_SIZE as i8)..=(GRID_SIZE as i8) {
                            let op = TransformOp { symmetry, dx, dy };
                            if let Some(mut placed) = op.apply(cells) {
                                placed.sort();
                                out.insert(placed);
                            }
                        }
                    }
                }
            }
        }
        TemplateKind::EdgeConnected | TemplateKind::PairwiseNonadjacent => {
            let pred: fn(&[GridPos]) -> bool = match template.kind {
                TemplateKind::EdgeConnected => edge_connected,
                _ => pairwise_nonadjacent,
            };
            for a in 0..NUM_CELLS {
                for b in a + 1..NUM_CELLS {
                    for c in b + 1..NUM_CELLS {
                        for d in c + 1..NUM_CELLS {
                            let cells = vec![
                                GridPos::from_index(a),
                                GridPos::from_index(b),
                                GridPos::from_index(c),
                                GridPos::from_index(d),
                            ];
                            if pred(&cells) {
                                out.insert(cells);
                            }
                        }
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Decide an arrangement instruction: some 4 placed blocks, all `Rect` and
/// all one color (the instruction's color when specified), must form a
/// placement of the word. Other blocks and the agent are unconstrained.
pub fn check_arrangement(
    instr: &ArrInstruction,
    s: &WorldState,
    templates: &TemplateSet,
) -> GoalCheckResult {
    let colors: &[ColorId] = match instr.color {
        Some(ref c) => std::slice::from_ref(c),
        None => &ColorId::ALL,
    };
    for &color in colors {
        let mut mask = 0u32;
        for (pos, block) in s.blocks() {
            if block.shape == Shape::Rect && block.color == color {
                mask |= 1 << pos.index();
            }
        }
        if mask.count_ones() < 4 {
            continue;
        }
        for (i, &pm) in templates.placement_masks(instr.word).iter().enumerate() {
            if pm & mask == pm {
                return GoalCheckResult {
                    success: true,
                    matched_cells: Some(templates.placement_sets(instr.word)[i].clone()),
                };
            }
        }
    }
    GoalCheckResult {
        success: false,
        matched_cells: None,
    }
}

/// Sample a goal state for an arrangement instruction: a uniformly chosen
/// placement of 4 same-colored rects, optionally 4 distractor rects of one
/// other color on uniformly chosen remaining cells, and the agent uniform
/// over block-free cells.
pub fn sample_arrangement_goal(
    instr: &ArrInstruction,
    n_distractors: usize,
    rng: &mut impl Rng,
    templates: &TemplateSet,
) -> Result<WorldState, PlacementError> {
    assert!(
        n_distractors == 0 || n_distractors == 4,
        "goal states use 0 or 4 distractors"
    );
    let sets = templates.placement_sets(instr.word);
    if sets.is_empty() {
        return Err(PlacementError::NoPlacement(instr.word));
    }
    let color = instr
        .color
        .unwrap_or_else(|| *ColorId::ALL.choose(rng).unwrap());
    let target = &sets[rng.gen_range(0..sets.len())];
    let mut blocks: Vec<(GridPos, Block)> = target
        .iter()
        .map(|&p| (p, Block::new(color, Shape::Rect)))
        .collect();
    if n_distractors == 4 {
        let others: Vec<ColorId> = ColorId::ALL.into_iter().filter(|&c| c != color).collect();
        let dcolor = *others.choose(rng).unwrap();
        let free: Vec<GridPos> = GridPos::all().filter(|p| !target.contains(p)).collect();
        for i in rand::seq::index::sample(rng, free.len(), 4) {
            blocks.push((free[i], Block::new(dcolor, Shape::Rect)));
        }
    }
    let occupied: Vec<GridPos> = blocks.iter().map(|&(p, _)| p).collect();
    let open: Vec<GridPos> = GridPos::all().filter(|p| !occupied.contains(p)).collect();
    let agent = *open.choose(rng).unwrap();
    let state = WorldState::new(&blocks, agent, None).expect("cells are distinct");
    debug_assert!(check_arrangement(instr, &state, templates).success);
    Ok(state)
}

/// Exact binomial coefficient in u64 arithmetic.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of distinct goal states for a word given its placement count:
/// placements x 3 colors x 25 agent cells x C(21,4) distractor placements
/// x 2 distractor colors.
pub fn count_goal_states(_word: ArrangementWord, positions: u64) -> u64 {
    positions * 3 * 25 * binomial(21, 4) * 2
}
