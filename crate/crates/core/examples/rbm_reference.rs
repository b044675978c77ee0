//! Reflected Brownian motion: closed-form marginal against bridge-corrected
//! Euler sampling, and the Poisson Chernoff bound.
use mobnet::diffusion::{poisson_tail, poisson_tail_bound, rbm_marginal_cdf, rbm_sample_marginal, rbm_stationary_cdf, RbmParams, Reflection};
use mobnet::{StreamClass, StreamKey};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = RbmParams::new(1.0, 1.0)?;
    let mut rng = StreamKey::root(5).stream(StreamClass::Diffusion);
    let draws: Vec<f64> = (0..20_000).map(|_| rbm_sample_marginal(&p, 1.0 / 16.0, 16, Reflection::Bridge, &mut rng)).collect();
    for x in [0.25, 0.5, 1.0, 2.0] {
        let emp = draws.iter().filter(|&&w| w <= x).count() as f64 / draws.len() as f64;
        println!(
            "x = {x}: P(W_1 <= x) = {:.4}, Monte Carlo {emp:.4}, stationary {:.4}",
            rbm_marginal_cdf(&p, 1.0, x)?,
            rbm_stationary_cdf(&p, x)?
        );
    }
    for (u, v) in [(5.0, 10.0), (20.0, 30.0), (100.0, 130.0)] {
        println!("P(Poisson({u}) >= {v}) = {:.3e} <= {:.3e}", poisson_tail(u, v as u64), poisson_tail_bound(u, v)?);
    }
    Ok(())
}
