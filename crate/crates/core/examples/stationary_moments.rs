//! Regenerative estimates of the stationary queue length moments, scaled by
//! n, against r!/α^r.
use mobnet::experiments::{Config, HeavyTrafficLadder};
use mobnet::network::{check_balance_identity, sample_stationary, StationaryOptions};
use mobnet::StreamKey;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = Config::from_toml(
        "[mobility]\nq = [[-1.0, 1.0], [1.0, -1.0]]\n[ladder]\nlambda = 1.0\nalpha = 1.0\nn_values = [10]\n[rng]\nseed = 8\n",
    )?;
    let ladder = HeavyTrafficLadder::from_config(&config)?;
    let n = ladder.largest();
    let est = sample_stationary(&ladder.params(n)?, StreamKey::root(8), StationaryOptions { cycles: 20_000, ..Default::default() })?;
    for (r, target) in [(1, 1.0), (2, 2.0), (3, 6.0)] {
        let m = est.moment(r);
        let scale = (n as f64).powi(r as i32);
        println!("E|X|^{r}/n^{r} = {:.3} ± {:.3} (target {target})", m.mean / scale, m.se / scale);
    }
    for m in 1..=3 {
        let b = check_balance_identity(&est, m)?;
        println!("balance residual at level {m}: {:.2e} (se {:.1e})", b.residual, b.se);
    }
    Ok(())
}
