//! The spectral functional F, its homogeneity along e^{tQ}, and the exact
//! expectation of the integral martingale from a corner start.
use mobnet::martingale::{check_homogeneity, IntegralMartingale, SimplexGeometry, SpectralDecomposition};
use mobnet::MobilityProfile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let q = MobilityProfile::from_rows(&[vec![-1.0, 1.0], vec![2.0, -2.0]])?;
    let spec = SpectralDecomposition::new(&q)?;
    let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
    println!("gamma = {}, homogeneity error = {:.2e}", spec.gamma(), check_homogeneity(&spec, &q, &[0.9, 0.1], &times)?);
    let m = IntegralMartingale::new(&spec, &SimplexGeometry::from_profile(&q), 1.0, 1e-10)?;
    let y = [10, 0];
    println!("M_1(0) = {:.4}", m.value(&y, 0.0)?);
    for t in [0.5, 1.0, 2.0] {
        println!("E M_1({t}) = {:.4}", m.expected_value(&q, &y, t)?);
    }
    println!("bound over |x| = 10: {:.4}", m.bound(10)?);
    Ok(())
}
