//! Rasterizer: one object on a uniform background, 64x64 RGB.
//!
//! Pure function of the scene; pixel coverage comes from a 2x2 subsample of
//! point-in-shape tests, giving lightly antialiased edges. A view can be
//! centered anywhere in world coordinates (grasp patches center on the
//! candidate grasp point); points outside the canvas are plain background.

use crate::data::{Image, IMAGE_SIDE};
use crate::world::geometry::Placed;
use crate::world::WorldObject;

pub const BACKGROUND: [f64; 3] = [0.08, 0.08, 0.10];

const SUBSAMPLE_OFFSETS: [f64; 2] = [0.25, 0.75];

/// Render the world as seen by a 64x64 window centered at `center`.
pub fn render_view(object: &WorldObject, center: [f64; 2]) -> Image {
    let half = IMAGE_SIDE as f64 / 2.0;
    let placed = Placed { shape: &object.shape, pose: &object.pose };
    let mut rgb = vec![0.0; IMAGE_SIDE * IMAGE_SIDE * 3];
    for row in 0..IMAGE_SIDE {
        for col in 0..IMAGE_SIDE {
            let mut hits = 0u32;
            for oy in SUBSAMPLE_OFFSETS {
                for ox in SUBSAMPLE_OFFSETS {
                    let wx = center[0] - half + col as f64 + ox;
                    let wy = center[1] - half + row as f64 + oy;
                    if placed.contains([wx, wy]) {
                        hits += 1;
                    }
                }
            }
            let coverage = hits as f64 / 4.0;
            let base = (row * IMAGE_SIDE + col) * 3;
            for c in 0..3 {
                rgb[base + c] = BACKGROUND[c] + coverage * (object.color[c] - BACKGROUND[c]);
            }
        }
    }
    Image::from_rgb_f64(&rgb).expect("render buffer has the right size")
}

/// Render the full canvas (window centered on the canvas center).
pub fn render(object: &WorldObject) -> Image {
    let half = IMAGE_SIDE as f64 / 2.0;
    render_view(object, [half, half])
}

/// A canvas with no object: uniform background.
pub fn render_empty() -> Image {
    let mut rgb = vec![0.0; IMAGE_SIDE * IMAGE_SIDE * 3];
    for px in rgb.chunks_exact_mut(3) {
        px.copy_from_slice(&BACKGROUND);
    }
    Image::from_rgb_f64(&rgb).expect("render buffer has the right size")
}
