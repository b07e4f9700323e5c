//! Deterministic rasterization of a [`WorldState`] into the 32×32 RGB
//! observation. Layout is row-major with interleaved channels, row 0 at the
//! top of the scene (world y = 1).

use super::{Observation, Rect, WorldState, GOOD_BIN, ITEM_MASS, SOURCE, TRASH_BIN};

pub const IMG_W: usize = 32;
pub const IMG_H: usize = 32;
pub const IMG_C: usize = 3;
pub const IMG_PIXELS: usize = IMG_W * IMG_H * IMG_C;

/// Discs are drawn slightly larger than the physical item radius so that
/// every item covers at least one pixel center at this resolution.
const ITEM_DRAW_RADIUS: f64 = 0.028;
const EFFECTOR_DRAW_RADIUS: f64 = 0.045;

const BG: [f32; 3] = [0.12, 0.12, 0.16];
const SOURCE_TINT: [f32; 3] = [0.20, 0.20, 0.26];
const TRASH_BIN_COLOR: [f32; 3] = [0.50, 0.16, 0.16];
const GOOD_BIN_COLOR: [f32; 3] = [0.16, 0.35, 0.55];
const TRASH_ITEM: [f32; 3] = [0.95, 0.75, 0.15];
const GOOD_ITEM: [f32; 3] = [0.25, 0.85, 0.35];
const EFFECTOR: [f32; 3] = [1.0, 1.0, 1.0];

#[inline]
fn pixel_center(col: usize, row: usize) -> (f64, f64) {
    (
        (col as f64 + 0.5) / IMG_W as f64,
        1.0 - (row as f64 + 0.5) / IMG_H as f64,
    )
}

fn fill_rect(img: &mut [f32], rect: Rect, color: [f32; 3]) {
    for row in 0..IMG_H {
        for col in 0..IMG_W {
            if rect.contains(pixel_center(col, row)) {
                let base = (row * IMG_W + col) * IMG_C;
                img[base..base + 3].copy_from_slice(&color);
            }
        }
    }
}

fn fill_disc(img: &mut [f32], center: (f64, f64), radius: f64, color: [f32; 3]) {
    for row in 0..IMG_H {
        for col in 0..IMG_W {
            let (x, y) = pixel_center(col, row);
            let (dx, dy) = (x - center.0, y - center.1);
            if dx * dx + dy * dy <= radius * radius {
                let base = (row * IMG_W + col) * IMG_C;
                img[base..base + 3].copy_from_slice(&color);
            }
        }
    }
}

/// Raw image channel of the observation.
pub fn render_image(state: &WorldState) -> Vec<f32> {
    let mut img = Vec::with_capacity(IMG_PIXELS);
    for _ in 0..IMG_W * IMG_H {
        img.extend_from_slice(&BG);
    }
    fill_rect(&mut img, SOURCE, SOURCE_TINT);
    fill_rect(&mut img, TRASH_BIN, TRASH_BIN_COLOR);
    fill_rect(&mut img, GOOD_BIN, GOOD_BIN_COLOR);
    for item in &state.items {
        let color = match item.class {
            super::ItemClass::Good => GOOD_ITEM,
            super::ItemClass::Trash => TRASH_ITEM,
        };
        fill_disc(&mut img, item.xy, ITEM_DRAW_RADIUS, color);
    }
    fill_disc(&mut img, state.effector, EFFECTOR_DRAW_RADIUS, EFFECTOR);
    img
}

/// Set of pixel indices an effector disc at `center` can touch; used by the
/// render-locality tests.
#[cfg(test)]
pub(crate) fn disc_footprint(center: (f64, f64), radius: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for row in 0..IMG_H {
        for col in 0..IMG_W {
            let (x, y) = pixel_center(col, row);
            let (dx, dy) = (x - center.0, y - center.1);
            if dx * dx + dy * dy <= radius * radius {
                out.push(row * IMG_W + col);
            }
        }
    }
    out
}

/// Full multimodal observation for the current state.
pub fn render(state: &WorldState) -> Observation {
    Observation {
        image: render_image(state),
        robot_state: [state.effector.0, state.effector.1, state.grip],
        contact: if state.held.is_some() { ITEM_MASS * state.grip } else { 0.0 },
        instruction_id: state.task_id,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{reset, Action, step};
    use super::*;

    #[test]
    fn identical_states_render_identically() {
        let s = reset(21, 0, 6).unwrap();
        assert_eq!(render(&s), render(&s));
        let t = reset(21, 0, 6).unwrap();
        assert_eq!(render(&s).image, render(&t).image);
    }

    #[test]
    fn every_item_is_visible() {
        let s = reset(33, 0, 15).unwrap();
        let with = render_image(&s);
        let mut empty = s.clone();
        empty.items.clear();
        let without = render_image(&empty);
        // Removing all items must change at least n pixels (one per item
        // minimum; items may share pixels only if adjacent).
        let changed = with.iter().zip(&without).filter(|(a, b)| a != b).count();
        assert!(changed >= s.items.len(), "only {changed} pixels changed");
    }

    #[test]
    fn zero_item_scene_contains_only_scene_colors() {
        let mut s = reset(3, 0, 1).unwrap();
        s.items.clear();
        let img = render_image(&s);
        let allowed = [BG, SOURCE_TINT, TRASH_BIN_COLOR, GOOD_BIN_COLOR, EFFECTOR];
        for px in img.chunks(3) {
            assert!(
                allowed.iter().any(|c| c == px),
                "unexpected color {px:?}"
            );
        }
    }

    #[test]
    fn effector_move_touches_only_disc_footprints() {
        let mut s = reset(8, 0, 4).unwrap();
        s.effector = (0.5, 0.5);
        let before = render_image(&s);
        let (moved, _) = step(&s, &Action::new(1.0 / 32.0, 0.0, 0.0).unwrap()).unwrap();
        let after = render_image(&moved);
        let mut allowed: Vec<usize> = disc_footprint(s.effector, EFFECTOR_DRAW_RADIUS);
        allowed.extend(disc_footprint(moved.effector, EFFECTOR_DRAW_RADIUS));
        for (i, (a, b)) in before.chunks(3).zip(after.chunks(3)).enumerate() {
            if a != b {
                assert!(allowed.contains(&i), "pixel {i} outside both footprints changed");
            }
        }
    }

    #[test]
    fn moving_one_item_touches_only_its_footprints() {
        let s = reset(14, 0, 5).unwrap();
        let before = render_image(&s);
        let mut moved = s.clone();
        let old = moved.items[2].xy;
        moved.items[2].xy = (old.0 + 0.06, old.1 - 0.04);
        let after = render_image(&moved);
        let mut allowed = disc_footprint(old, ITEM_DRAW_RADIUS);
        allowed.extend(disc_footprint(moved.items[2].xy, ITEM_DRAW_RADIUS));
        for (i, (a, b)) in before.chunks(3).zip(after.chunks(3)).enumerate() {
            if a != b {
                assert!(allowed.contains(&i), "pixel {i} changed outside footprint union");
            }
        }
    }

    #[test]
    fn contact_reflects_grip_and_held_state() {
        let mut s = reset(2, 0, 2).unwrap();
        assert_eq!(render(&s).contact, 0.0);
        s.held = Some(0);
        s.grip = 0.8;
        assert!((render(&s).contact - 0.8).abs() < 1e-15);
        assert_eq!(render(&s).instruction_id, 0);
        assert_eq!(render(&s).robot_state, [0.5, 0.9, 0.8]);
    }
}
