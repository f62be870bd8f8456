//! Pixel renderer: world state -> 56x56 RGB image.
//!
//! The visible canvas is the 5x5 grid plus the one-cell wall ring (7x7
//! cells), each cell an 8x8 pixel patch. The palette and sprite masks below
//! are frozen; golden-image tests pin them. Rendering is injective on valid
//! states: placed blocks appear as full-size shape sprites, the agent as a
//! one-pixel border ring in its cell (white when free, yellow when
//! carrying), and a carried block as a small sprite inside the ring, so
//! distinct states always produce distinct images.

use crate::state::{Block, ColorId, GridPos, Shape, WorldState, GRID_SIZE};

/// Pixels per cell patch.
pub const PATCH: usize = 8;
/// Rendered image width in pixels (7 cells: wall + 5 grid + wall).
pub const IMAGE_WIDTH: usize = (GRID_SIZE as usize + 2) * PATCH;
/// Rendered image height in pixels.
pub const IMAGE_HEIGHT: usize = IMAGE_WIDTH;

const FLOOR: [u8; 3] = [0, 0, 0];
const WALL: [u8; 3] = [96, 96, 96];
const AGENT_FREE: [u8; 3] = [255, 255, 255];
const AGENT_CARRY: [u8; 3] = [255, 216, 0];

fn color_rgb(c: ColorId) -> [u8; 3] {
    match c {
        ColorId::Red => [224, 48, 48],
        ColorId::Green => [48, 208, 48],
        ColorId::Blue => [64, 96, 240],
    }
}

// 8x8 sprite masks, one byte per row, bit 7 = leftmost pixel.
// All art stays inside the 6x6 interior so it never collides with the
// one-pixel agent ring.
const CIRCLE_MASK: [u8; 8] = [
    0b0000_0000,
    0b0011_1100,
    0b0111_1110,
    0b0111_1110,
    0b0111_1110,
    0b0111_1110,
    0b0011_1100,
    0b0000_0000,
];
const RECT_MASK: [u8; 8] = [
    0b0000_0000,
    0b0111_1110,
    0b0111_1110,
    0b0111_1110,
    0b0111_1110,
    0b0111_1110,
    0b0111_1110,
    0b0000_0000,
];
const TRIANGLE_MASK: [u8; 8] = [
    0b0000_0000,
    0b0001_1000,
    0b0001_1000,
    0b0011_1100,
    0b0011_1100,
    0b0111_1110,
    0b0111_1110,
    0b0000_0000,
];

// 4x4 sprites for a carried block, drawn at the patch center; low nibble,
// bit 3 = leftmost pixel.
const MINI_CIRCLE: [u8; 4] = [0b0110, 0b1111, 0b1111, 0b0110];
const MINI_RECT: [u8; 4] = [0b1111, 0b1111, 0b1111, 0b1111];
const MINI_TRIANGLE: [u8; 4] = [0b0010, 0b0110, 0b1111, 0b1111];

fn shape_mask(s: Shape) -> &'static [u8; 8] {
    match s {
        Shape::Circle => &CIRCLE_MASK,
        Shape::Rect => &RECT_MASK,
        Shape::Triangle => &TRIANGLE_MASK,
    }
}

fn mini_mask(s: Shape) -> &'static [u8; 4] {
    match s {
        Shape::Circle => &MINI_CIRCLE,
        Shape::Rect => &MINI_RECT,
        Shape::Triangle => &MINI_TRIANGLE,
    }
}

/// An RGB image, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub data: Vec<u8>,
}

impl Image {
    fn filled(rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(IMAGE_WIDTH * IMAGE_HEIGHT * 3);
        for _ in 0..IMAGE_WIDTH * IMAGE_HEIGHT {
            data.extend_from_slice(&rgb);
        }
        Image { data }
    }

    fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let at = (y * IMAGE_WIDTH + x) * 3;
        self.data[at..at + 3].copy_from_slice(&rgb);
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let at = (y * IMAGE_WIDTH + x) * 3;
        [self.data[at], self.data[at + 1], self.data[at + 2]]
    }

    /// Serialize as a binary PPM (P6) file body.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", IMAGE_WIDTH, IMAGE_HEIGHT).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

/// Top-left pixel of the patch for a grid cell (offset by the wall ring).
fn patch_origin(pos: GridPos) -> (usize, usize) {
    (
        (pos.col as usize + 1) * PATCH,
        (pos.row as usize + 1) * PATCH,
    )
}

fn draw_block(img: &mut Image, pos: GridPos, block: Block) {
    let (x0, y0) = patch_origin(pos);
    let rgb = color_rgb(block.color);
    let mask = shape_mask(block.shape);
    for (dy, row) in mask.iter().enumerate() {
        for dx in 0..PATCH {
            if row & (1 << (7 - dx)) != 0 {
                img.put(x0 + dx, y0 + dy, rgb);
            }
        }
    }
}

fn draw_carried(img: &mut Image, pos: GridPos, block: Block) {
    let (x0, y0) = patch_origin(pos);
    let rgb = color_rgb(block.color);
    let mask = mini_mask(block.shape);
    for (dy, row) in mask.iter().enumerate() {
        for dx in 0..4 {
            if row & (1 << (3 - dx)) != 0 {
                img.put(x0 + 2 + dx, y0 + 2 + dy, rgb);
            }
        }
    }
}

fn draw_agent_ring(img: &mut Image, pos: GridPos, rgb: [u8; 3]) {
    let (x0, y0) = patch_origin(pos);
    for d in 0..PATCH {
        img.put(x0 + d, y0, rgb);
        img.put(x0 + d, y0 + PATCH - 1, rgb);
        img.put(x0, y0 + d, rgb);
        img.put(x0 + PATCH - 1, y0 + d, rgb);
    }
}

/// Render a world state to pixels.
pub fn render(state: &WorldState) -> Image {
    let mut img = Image::filled(WALL);
    for pos in GridPos::all() {
        let (x0, y0) = patch_origin(pos);
        for dy in 0..PATCH {
            for dx in 0..PATCH {
                img.put(x0 + dx, y0 + dy, FLOOR);
            }
        }
    }
    for (pos, block) in state.blocks() {
        draw_block(&mut img, pos, block);
    }
    match state.agent.carried {
        None => draw_agent_ring(&mut img, state.agent.pos, AGENT_FREE),
        Some(block) => {
            draw_carried(&mut img, state.agent.pos, block);
            draw_agent_ring(&mut img, state.agent.pos, AGENT_CARRY);
        }
    }
    img
}
