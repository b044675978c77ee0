//! Scaled queue length along the heavy-traffic ladder against the reflected
//! Brownian motion marginal.
use mobnet::diffusion::{rbm_marginal_cdf, RbmParams};
use mobnet::experiments::{Config, HeavyTrafficLadder};
use mobnet::network::simulate_coupled;
use mobnet::path::{rescale, PiecewisePath};
use mobnet::stats::ks_one_sample;
use mobnet::StreamKey;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = Config::from_toml(
        "[mobility]\nq = [[-1.0, 1.0], [1.0, -1.0]]\n[ladder]\nlambda = 1.0\nalpha = 1.0\nn_values = [5, 10, 20]\n[rng]\nseed = 3\n",
    )?;
    let ladder = HeavyTrafficLadder::from_config(&config)?;
    let rbm = RbmParams::new(ladder.lambda, ladder.alpha)?;
    for &n in &ladder.n_values {
        let params = ladder.params(n)?;
        let xs: Vec<f64> = (0..400)
            .map(|r| {
                let b = simulate_coupled(&params, &[0, 0], (n as f64).powi(2), StreamKey::new(3, r)).unwrap();
                rescale(&b.open_path, n).norm_at(1.0)
            })
            .collect();
        let ks = ks_one_sample(&xs, |x| rbm_marginal_cdf(&rbm, 1.0, x).unwrap());
        println!("n = {n:>2}: KS(|X_n(1)|, RBM) = {:.4} (p = {:.3})", ks.statistic, ks.p_value);
    }
    Ok(())
}
