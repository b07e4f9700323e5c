use planloop::world::*;
fn main() {
    for (noise, n) in [(0.5, 8), (0.7, 8), (0.9, 8), (0.5, 10), (0.7, 10), (0.9, 10), (0.9, 12)] {
        let mut succ = 0;
        let mut ticks = 0;
        for seed in 0..30u64 {
            let ep = run_expert_episode(900 + seed, 0, n, noise, EPISODE_CAP, false).unwrap();
            if ep.success { succ += 1; }
            ticks += ep.steps.len();
        }
        println!("noise {noise} n={n}: success {succ}/30 mean-ticks {}", ticks/30);
    }
}
