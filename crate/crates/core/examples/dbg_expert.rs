use planloop::world::*;
use std::collections::HashMap;

fn main() {
    let mut hist: HashMap<String, usize> = HashMap::new();
    let mut with_fail = 0;
    let mut succ = 0;
    let mut ticks_sum = 0usize;
    let mut hold_low = 0usize; // ticks holding with y in wall band
    let mut hold_total = 0usize;
    for seed in 0..50u64 {
        let ep = run_expert_episode(1000 + seed, 0, 5, 0.8, EPISODE_CAP, false).unwrap();
        let mut has = false;
        for s in &ep.steps {
            for e in &s.events {
                *hist.entry(format!("{:?}", e.kind)).or_default() += 1;
                if matches!(e.kind, EventKind::WallCollision | EventKind::DropOutside) { has = true; }
            }
            // robot_state carries effector y; contact>0 means holding
            if s.obs.contact > 0.0 {
                hold_total += 1;
                if s.obs.robot_state[1] < 0.42 { hold_low += 1; }
            }
        }
        if has { with_fail += 1; }
        if ep.success { succ += 1; }
        ticks_sum += ep.steps.len();
    }
    println!("episodes with wall/drop: {with_fail}/50, success {succ}/50, mean ticks {}", ticks_sum / 50);
    println!("events: {hist:?}");
    println!("holding ticks: {hold_total}, of which low-zone: {hold_low}");
}
