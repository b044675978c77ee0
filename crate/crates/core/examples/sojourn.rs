//! Sojourn time of a tagged user among n·b others, scaled by n.
use mobnet::experiments::{initial_state, Config, HeavyTrafficLadder};
use mobnet::network::{simulate_tagged, TaggedOptions};
use mobnet::stats::{ks_one_sample, mean_se};
use mobnet::StreamKey;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = Config::from_toml(
        "[mobility]\nq = [[-1.0, 1.0], [1.0, -1.0]]\n[ladder]\nlambda = 1.0\nalpha = 1.0\nn_values = [20]\n[rng]\nseed = 2\n",
    )?;
    let ladder = HeavyTrafficLadder::from_config(&config)?;
    let n = ladder.largest();
    let params = ladder.params(n)?;
    let y = initial_state(n as f64, ladder.mobility().pi());
    let scaled: Vec<f64> = (0..500)
        .filter_map(|r| {
            let run = simulate_tagged(&params, &y, 0, 1e4 * n as f64, StreamKey::new(2, r), TaggedOptions::default()).ok()?;
            run.record.sojourn.map(|s| s / n as f64)
        })
        .collect();
    let m = mean_se(&scaled);
    let ks = ks_one_sample(&scaled, |x| if x <= 0.0 { 0.0 } else { 1.0 - (-x).exp() });
    println!("chi/n: mean {:.3} ± {:.3} (limit 1), KS vs Exp(1) = {:.4}", m.mean, m.se, ks.statistic);
    Ok(())
}
