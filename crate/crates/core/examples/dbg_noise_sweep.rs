use planloop::world::*;
fn main() {
    for noise in [0.0, 0.1, 0.2, 0.5, 0.65, 0.9] {
        let mut with_fail = 0;
        let mut succ = 0;
        let mut collisions = 0;
        let mut ticks = 0;
        for seed in 0..40u64 {
            let ep = run_expert_episode(500 + seed, 0, 5, noise, EPISODE_CAP, false).unwrap();
            if ep.steps.iter().any(|s| s.events.iter().any(|e| matches!(e.kind, EventKind::WallCollision | EventKind::DropOutside))) { with_fail += 1; }
            collisions += ep.steps.iter().flat_map(|s| &s.events).filter(|e| e.kind.is_failure()).count();
            if ep.success { succ += 1; }
            ticks += ep.steps.len();
        }
        println!("noise {noise}: fail-episodes {with_fail}/40 success {succ}/40 fail-events {collisions} mean-ticks {}", ticks/40);
    }
}
