use planloop::world::*;
use planloop::util::{mix_seed, rng_from_seed};
use rand::Rng;

fn main() {
    // Prototype of the collection schedule: 70% clean (noise 0-0.2, 3-8 items),
    // 30% noisy (noise 0.5-0.9, 8-14 items).
    let mut rng = rng_from_seed(1234);
    let (mut fails, mut events, mut n_total) = (0, 0, 0);
    let n_eps = 200;
    for i in 0..n_eps as u64 {
        let seed = mix_seed(42, i);
        let (noise, n_items) = if rng.gen_bool(0.7) {
            (rng.gen_range(0.0..=0.2), rng.gen_range(3..=8))
        } else {
            ({ let u: f64 = rng.gen(); 0.5 + 0.4 * u.sqrt() }, rng.gen_range(12..=15))
        };
        let ep = run_expert_episode(seed, 0, n_items, noise, EPISODE_CAP, false).unwrap();
        if !ep.success { fails += 1; }
        if ep.has_failure_event() { events += 1; }
        n_total += ep.steps.len();
    }
    println!("failure episodes {fails}/{n_eps} ({:.2}), with fail events {events}, mean ticks {}", fails as f64 / n_eps as f64, n_total / n_eps as usize);
}
