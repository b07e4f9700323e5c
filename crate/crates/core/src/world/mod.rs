//! Deterministic 2D bin-sorting simulator.
//!
//! A point effector moves in the unit square. Items of two classes start in
//! a source region and must be carried to the class-matched bin: trash to
//! the left bin, good items to the right bin. The simulator emits telemetry
//! events (collisions, drops, sorts, success, deadlock) that later supervise
//! the reward model, and renders a 32×32 RGB observation.
//!
//! Everything is a pure function of `(seed, action sequence)`; identical
//! inputs give bitwise-identical states, events and renders.

mod episode;
mod expert;
mod render;

pub use episode::{run_expert_episode, EpisodeRecord, StepRecord};
pub use expert::scripted_expert;
pub use render::{render, render_image, IMG_C, IMG_H, IMG_PIXELS, IMG_W};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::rng_from_seed;

pub const MAX_STEP: f64 = 0.05;
pub const ITEM_RADIUS: f64 = 0.02;
pub const GRASP_RADIUS: f64 = 0.03;
pub const HOME: (f64, f64) = (0.5, 0.9);
pub const ITEM_MASS: f64 = 1.0;
pub const EPISODE_CAP: usize = 600;
pub const DEADLOCK_WINDOW: usize = 60;
pub const DEADLOCK_DIAG: f64 = 0.08;
pub const N_INSTRUCTIONS: u32 = 4;

/// Source region where items spawn.
pub const SOURCE: Rect = Rect { x0: 0.25, x1: 0.75, y0: 0.55, y1: 0.85 };
/// Left bin receives trash.
pub const TRASH_BIN: Rect = Rect { x0: 0.02, x1: 0.20, y0: 0.10, y1: 0.40 };
/// Right bin receives good items.
pub const GOOD_BIN: Rect = Rect { x0: 0.80, x1: 0.98, y0: 0.10, y1: 0.40 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, p: (f64, f64)) -> bool {
        p.0 >= self.x0 && p.0 <= self.x1 && p.1 >= self.y0 && p.1 <= self.y1
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemClass {
    Good,
    Trash,
}

impl ItemClass {
    pub fn bin(&self) -> Rect {
        match self {
            ItemClass::Good => GOOD_BIN,
            ItemClass::Trash => TRASH_BIN,
        }
    }

    pub fn other_bin(&self) -> Rect {
        match self {
            ItemClass::Good => TRASH_BIN,
            ItemClass::Trash => GOOD_BIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub xy: (f64, f64),
    pub class: ItemClass,
    pub sorted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub effector: (f64, f64),
    pub grip: f64,
    pub held: Option<usize>,
    pub items: Vec<Item>,
    pub tick: u64,
    pub rng_state: u64,
    pub task_id: u32,
}

impl WorldState {
    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn sorted_count(&self) -> usize {
        self.items.iter().filter(|i| i.sorted).count()
    }
}

/// Relative effector command. Displacements are clipped to ±[`MAX_STEP`] and
/// the grip command to [0, 1] at construction, before dynamics see them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub dx: f64,
    pub dy: f64,
    pub grip_cmd: f64,
}

impl Action {
    pub fn new(dx: f64, dy: f64, grip_cmd: f64) -> Result<Self> {
        if !(dx.is_finite() && dy.is_finite() && grip_cmd.is_finite()) {
            return Err(Error::NonFinite("Action".into()));
        }
        Ok(Action {
            dx: dx.clamp(-MAX_STEP, MAX_STEP),
            dy: dy.clamp(-MAX_STEP, MAX_STEP),
            grip_cmd: grip_cmd.clamp(0.0, 1.0),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    WallCollision,
    DropOutside,
    WrongBin,
    ItemSorted,
    TaskSuccess,
    Deadlock,
}

impl EventKind {
    /// Failure events, as opposed to progress/terminal events.
    pub fn is_failure(&self) -> bool {
        matches!(
            self,
            EventKind::WallCollision | EventKind::DropOutside | EventKind::WrongBin | EventKind::Deadlock
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetryEvent {
    pub tick: u64,
    pub kind: EventKind,
}

/// The multimodal observation: rendered image, exact robot state, a contact
/// scalar (item mass × grip while holding) and the instruction id.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub image: Vec<f32>,
    pub robot_state: [f64; 3],
    pub contact: f64,
    pub instruction_id: u32,
}

/// Places `n_items` in the source region without overlap and parks the
/// effector at home. Deterministic in `seed`.
pub fn reset(seed: u64, task_id: u32, n_items: usize) -> Result<WorldState> {
    if n_items < 1 || n_items > 15 {
        return Err(Error::InvalidArg(format!(
            "n_items must be in [1, 15], got {n_items}"
        )));
    }
    if task_id >= N_INSTRUCTIONS {
        return Err(Error::InvalidArg(format!(
            "task_id must be in [0, {}], got {task_id}",
            N_INSTRUCTIONS - 1
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut items: Vec<Item> = Vec::with_capacity(n_items);
    for _ in 0..n_items {
        let mut placed = false;
        for _try in 0..1000 {
            let x = rng.gen_range(SOURCE.x0..=SOURCE.x1);
            let y = rng.gen_range(SOURCE.y0..=SOURCE.y1);
            let clear = items.iter().all(|it| {
                let (dx, dy) = (it.xy.0 - x, it.xy.1 - y);
                (dx * dx + dy * dy).sqrt() >= 2.0 * ITEM_RADIUS
            });
            if clear {
                let class = if rng.gen_bool(0.5) { ItemClass::Good } else { ItemClass::Trash };
                items.push(Item { xy: (x, y), class, sorted: false });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Sim(format!(
                "could not place item {} without overlap after 1000 tries",
                items.len()
            )));
        }
    }
    Ok(WorldState {
        effector: HOME,
        grip: 0.0,
        held: None,
        items,
        tick: 0,
        rng_state: seed,
        task_id,
    })
}

/// The six bin-wall segments: left, right and bottom edge of each bin. The
/// top edge is the opening.
fn bin_walls() -> [((f64, f64), (f64, f64)); 6] {
    let w = |r: Rect| {
        [
            ((r.x0, r.y0), (r.x0, r.y1)),
            ((r.x1, r.y0), (r.x1, r.y1)),
            ((r.x0, r.y0), (r.x1, r.y0)),
        ]
    };
    let t = w(TRASH_BIN);
    let g = w(GOOD_BIN);
    [t[0], t[1], t[2], g[0], g[1], g[2]]
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Proper segment intersection test; collinear touches do not count, which
/// is the right call for a path skimming exactly along a wall.
fn segments_cross(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn crosses_bin_wall(from: (f64, f64), to: (f64, f64)) -> bool {
    bin_walls().iter().any(|(a, b)| segments_cross(from, to, *a, *b))
}

/// Advances the world by one tick.
///
/// Order of effects: the effector moves by the clipped displacement (a held
/// item moves with it); crossing a bin wall while holding emits
/// `wall_collision`; then the grip command is applied — `> 0.5` grasps the
/// nearest unsorted item within [`GRASP_RADIUS`], `<= 0.5` releases a held
/// item, emitting `item_sorted` / `wrong_bin` / `drop_outside` depending on
/// where the release lands. Sorting the last item emits `task_success`.
pub fn step(state: &WorldState, action: &Action) -> Result<(WorldState, Vec<TelemetryEvent>)> {
    if !(action.dx.is_finite() && action.dy.is_finite() && action.grip_cmd.is_finite()) {
        return Err(Error::NonFinite("step action".into()));
    }
    let mut next = state.clone();
    let mut events = Vec::new();
    let tick = state.tick;

    let from = state.effector;
    let to = (
        (from.0 + action.dx.clamp(-MAX_STEP, MAX_STEP)).clamp(0.0, 1.0),
        (from.1 + action.dy.clamp(-MAX_STEP, MAX_STEP)).clamp(0.0, 1.0),
    );
    if state.held.is_some() && crosses_bin_wall(from, to) {
        events.push(TelemetryEvent { tick, kind: EventKind::WallCollision });
    }
    next.effector = to;
    next.grip = action.grip_cmd.clamp(0.0, 1.0);
    if let Some(i) = next.held {
        next.items[i].xy = to;
    }

    if action.grip_cmd > 0.5 {
        if next.held.is_none() {
            let mut best: Option<(usize, f64)> = None;
            for (i, item) in next.items.iter().enumerate() {
                if item.sorted {
                    continue;
                }
                let (dx, dy) = (item.xy.0 - to.0, item.xy.1 - to.1);
                let d = (dx * dx + dy * dy).sqrt();
                if d <= GRASP_RADIUS && best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((i, d));
                }
            }
            if let Some((i, _)) = best {
                next.held = Some(i);
                next.items[i].xy = to;
            }
        }
    } else if let Some(i) = next.held.take() {
        let class = next.items[i].class;
        if class.bin().contains(to) {
            next.items[i].sorted = true;
            events.push(TelemetryEvent { tick, kind: EventKind::ItemSorted });
            if next.items.iter().all(|it| it.sorted) {
                events.push(TelemetryEvent { tick, kind: EventKind::TaskSuccess });
            }
        } else if class.other_bin().contains(to) {
            events.push(TelemetryEvent { tick, kind: EventKind::WrongBin });
        } else {
            events.push(TelemetryEvent { tick, kind: EventKind::DropOutside });
        }
    }

    next.tick += 1;
    Ok((next, events))
}

/// Fraction of items sorted into their matching bin.
pub fn progress(state: &WorldState) -> f64 {
    state.sorted_count() as f64 / state.items.len() as f64
}

/// Deadlock: no item was sorted anywhere in the window AND the effector's
/// bounding box over the window has a diagonal shorter than
/// [`DEADLOCK_DIAG`]. The window must be exactly `window_len` states.
pub fn detect_deadlock(recent: &[WorldState], window_len: usize) -> Result<bool> {
    if recent.len() != window_len {
        return Err(Error::InvalidArg(format!(
            "deadlock window must be exactly {window_len} states, got {}",
            recent.len()
        )));
    }
    let first_sorted = recent[0].sorted_count();
    let last_sorted = recent[recent.len() - 1].sorted_count();
    if last_sorted > first_sorted {
        return Ok(false);
    }
    let mut min = (f64::INFINITY, f64::INFINITY);
    let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for s in recent {
        min.0 = min.0.min(s.effector.0);
        min.1 = min.1.min(s.effector.1);
        max.0 = max.0.max(s.effector.0);
        max.1 = max.1.max(s.effector.1);
    }
    let diag = ((max.0 - min.0).powi(2) + (max.1 - min.1).powi(2)).sqrt();
    Ok(diag < DEADLOCK_DIAG)
}
