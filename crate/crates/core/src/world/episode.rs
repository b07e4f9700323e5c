//! Episode records and their JSONL serialization.
//!
//! One line of JSON per step, between a header line `{task_id, seed,
//! n_items}` and a footer line `{success, progress_trace}`. The image
//! channel is stored as base64 over the raw little-endian f32 bytes.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{
    detect_deadlock, progress, render, reset, scripted_expert, step, Action, EventKind,
    Observation, TelemetryEvent, WorldState, DEADLOCK_WINDOW, IMG_PIXELS, ITEM_MASS,
};
use crate::error::{Error, Result};
use crate::util::{mix_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub tick: u64,
    pub obs: Observation,
    pub action: Action,
    pub events: Vec<TelemetryEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub task_id: u32,
    pub seed: u64,
    pub n_items: usize,
    pub steps: Vec<StepRecord>,
    pub success: bool,
    pub progress_trace: Vec<f64>,
}

impl EpisodeRecord {
    /// Telemetry events of the whole episode in tick order.
    pub fn all_events(&self) -> impl Iterator<Item = &TelemetryEvent> {
        self.steps.iter().flat_map(|s| s.events.iter())
    }

    pub fn has_failure_event(&self) -> bool {
        self.all_events().any(|e| e.kind.is_failure())
    }
}

/// Runs the scripted expert from a fresh reset until success or the tick
/// cap. With `record_obs` false the image channel is left empty — the cheap
/// mode used by statistics that only need events and outcomes.
pub fn run_expert_episode(
    seed: u64,
    task_id: u32,
    n_items: usize,
    noise_level: f64,
    cap: usize,
    record_obs: bool,
) -> Result<EpisodeRecord> {
    if !(0.0..=1.0).contains(&noise_level) {
        return Err(Error::InvalidArg(format!(
            "noise_level must be in [0, 1], got {noise_level}"
        )));
    }
    let mut state = reset(seed, task_id, n_items)?;
    let mut rng = rng_from_seed(mix_seed(seed, 0xE0E0));
    let mut steps = Vec::new();
    let mut progress_trace = Vec::new();
    let mut window: VecDeque<WorldState> = VecDeque::with_capacity(DEADLOCK_WINDOW);
    let mut success = false;

    while (state.tick as usize) < cap && !success {
        let obs = if record_obs {
            render(&state)
        } else {
            Observation {
                image: Vec::new(),
                robot_state: [state.effector.0, state.effector.1, state.grip],
                contact: if state.held.is_some() { ITEM_MASS * state.grip } else { 0.0 },
                instruction_id: state.task_id,
            }
        };
        let action = scripted_expert(&state, noise_level, &mut rng);
        let tick = state.tick;
        let (next, mut events) = step(&state, &action)?;

        window.push_back(next.clone());
        if window.len() > DEADLOCK_WINDOW {
            window.pop_front();
        }
        if window.len() == DEADLOCK_WINDOW {
            let snapshot: Vec<WorldState> = window.iter().cloned().collect();
            if detect_deadlock(&snapshot, DEADLOCK_WINDOW)? {
                events.push(TelemetryEvent { tick, kind: EventKind::Deadlock });
                window.clear();
            }
        }

        success = events.iter().any(|e| e.kind == EventKind::TaskSuccess);
        progress_trace.push(progress(&next));
        steps.push(StepRecord { tick, obs, action, events });
        state = next;
    }

    Ok(EpisodeRecord {
        task_id,
        seed,
        n_items,
        steps,
        success,
        progress_trace,
    })
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    task_id: u32,
    seed: u64,
    n_items: usize,
}

#[derive(Serialize, Deserialize)]
struct ObsLine {
    image_b64: String,
    robot_state: [f64; 3],
    contact: f64,
    instruction_id: u32,
}

#[derive(Serialize, Deserialize)]
struct StepLine {
    tick: u64,
    obs: ObsLine,
    action: Action,
    events: Vec<EventKind>,
}

#[derive(Serialize, Deserialize)]
struct FooterLine {
    success: bool,
    progress_trace: Vec<f64>,
}

fn image_to_b64(image: &[f32]) -> String {
    let mut bytes = Vec::with_capacity(image.len() * 4);
    for v in image {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    B64.encode(bytes)
}

fn image_from_b64(s: &str) -> Result<Vec<f32>> {
    let bytes = B64
        .decode(s)
        .map_err(|e| Error::Format(format!("bad image base64: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Format("image byte length not a multiple of 4".into()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl EpisodeRecord {
    pub fn write_jsonl<W: Write>(&self, w: &mut W) -> Result<()> {
        let header = HeaderLine {
            task_id: self.task_id,
            seed: self.seed,
            n_items: self.n_items,
        };
        serde_json::to_writer(&mut *w, &header)?;
        w.write_all(b"\n")?;
        for s in &self.steps {
            let line = StepLine {
                tick: s.tick,
                obs: ObsLine {
                    image_b64: image_to_b64(&s.obs.image),
                    robot_state: s.obs.robot_state,
                    contact: s.obs.contact,
                    instruction_id: s.obs.instruction_id,
                },
                action: s.action,
                events: s.events.iter().map(|e| e.kind).collect(),
            };
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
        }
        let footer = FooterLine {
            success: self.success,
            progress_trace: self.progress_trace.clone(),
        };
        serde_json::to_writer(&mut *w, &footer)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: &mut R) -> Result<Self> {
        let mut lines = r.lines();
        let header: HeaderLine = match lines.next() {
            Some(l) => serde_json::from_str(&l?)?,
            None => return Err(Error::Format("empty episode file".into())),
        };
        let mut steps = Vec::new();
        let mut footer: Option<FooterLine> = None;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if let Ok(step) = serde_json::from_str::<StepLine>(&line) {
                let image = image_from_b64(&step.obs.image_b64)?;
                if !image.is_empty() && image.len() != IMG_PIXELS {
                    return Err(Error::Format(format!(
                        "image has {} values, expected {IMG_PIXELS}",
                        image.len()
                    )));
                }
                steps.push(StepRecord {
                    tick: step.tick,
                    obs: Observation {
                        image,
                        robot_state: step.obs.robot_state,
                        contact: step.obs.contact,
                        instruction_id: step.obs.instruction_id,
                    },
                    action: step.action,
                    events: step
                        .events
                        .iter()
                        .map(|k| TelemetryEvent { tick: step.tick, kind: *k })
                        .collect(),
                });
            } else {
                footer = Some(serde_json::from_str(&line)?);
                break;
            }
        }
        let footer = footer.ok_or_else(|| Error::Format("episode file missing footer".into()))?;
        Ok(EpisodeRecord {
            task_id: header.task_id,
            seed: header.seed,
            n_items: header.n_items,
            steps,
            success: footer.success,
            progress_trace: footer.progress_trace,
        })
    }
}
