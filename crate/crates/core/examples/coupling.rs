//! One coupled realization of the open network, the closed network and the
//! dominating M/M/1 queue, with every pathwise inequality checked.
use mobnet::network::{simulate_coupled, verify_coupling, NetworkParams};
use mobnet::path::PiecewisePath;
use mobnet::{MobilityProfile, StreamKey};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mobility = MobilityProfile::uniform(3, 1.0)?;
    let pi = mobility.pi().to_vec();
    let params = NetworkParams::new(mobility, vec![0.3, 0.2, 0.1], vec![0.3, 0.2, 0.2], None)?;
    let b = simulate_coupled(&params, &[10, 5, 0], 50.0, StreamKey::root(1))?;
    for t in [0.0, 10.0, 25.0, 50.0] {
        println!(
            "t = {t:>4}: open {:?}, closed {:?}, M/M/1 {}",
            b.open_path.eval(t),
            b.closed_path.eval(t),
            b.mm1_path.norm_at(t)
        );
    }
    let check = verify_coupling(&b, &pi);
    println!("{} assertions at {} event times, violations: {:?}", check.assertions, check.event_times, check.violations);
    Ok(())
}
