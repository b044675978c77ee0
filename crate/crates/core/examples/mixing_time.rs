//! Mixing profile and mixing times of a single mobile user.
use mobnet::MobilityProfile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let q = MobilityProfile::from_rows(&[vec![-2.0, 1.5, 0.5], vec![0.2, -0.3, 0.1], vec![1.0, 1.0, -2.0]])?;
    println!("pi = {:?}, spectral gap = {:.4}", q.pi(), q.gamma());
    for t in [0.0, 0.5, 1.0, 2.0, 4.0] {
        println!("delta({t}) = {:.5}", q.delta(t)?);
    }
    for eps in [0.2, 0.1, 0.05, 0.01] {
        println!("tau({eps}) = {:.4}", q.mixing_time(eps)?);
    }
    Ok(())
}
