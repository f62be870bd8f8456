//! Golden-image test pinning the frozen render palette and sprites.
//!
//! The reference state covers every sprite family: all three shapes, all
//! three colors, and a carrying agent. Regenerate the golden file (after a
//! deliberate palette change) with
//! `cargo test -p gridlu-env -- --ignored write_golden`.

use gridlu_env::{render, Block, ColorId, GridPos, Shape, WorldState};

fn reference_state() -> WorldState {
    WorldState::new(
        &[
            (GridPos::new(0, 0), Block::new(ColorId::Red, Shape::Circle)),
            (GridPos::new(2, 0), Block::new(ColorId::Green, Shape::Rect)),
            (
                GridPos::new(4, 0),
                Block::new(ColorId::Blue, Shape::Triangle),
            ),
            (GridPos::new(1, 2), Block::new(ColorId::Blue, Shape::Rect)),
            (
                GridPos::new(3, 4),
                Block::new(ColorId::Red, Shape::Triangle),
            ),
        ],
        GridPos::new(2, 2),
        Some(Block::new(ColorId::Green, Shape::Circle)),
    )
    .unwrap()
}

#[test]
fn golden_render_matches_reference() {
    let got = render(&reference_state()).to_ppm();
    let want: &[u8] = include_bytes!("golden/render_reference.ppm");
    assert_eq!(got, want, "render output drifted from the golden image");
}

#[test]
#[ignore = "writes the golden file; run only to regenerate it"]
fn write_golden() {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/golden/render_reference.ppm"
    );
    std::fs::write(path, render(&reference_state()).to_ppm()).unwrap();
}
