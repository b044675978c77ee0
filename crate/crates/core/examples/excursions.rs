//! Excursions above a level of a reflected Brownian path: left endpoints,
//! durations and heights.
use mobnet::diffusion::{rbm_sample_path, RbmParams, Reflection};
use mobnet::path::excursion_inventory;
use mobnet::StreamKey;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = RbmParams::new(1.0, 0.5)?;
    let path = rbm_sample_path(&p, 20.0, 1e-3, Reflection::Projected, StreamKey::root(6))?;
    for (i, e) in excursion_inventory(&path, 0.5).iter().enumerate().take(10) {
        let end = e.t0_after.map_or("censored".to_string(), |t| format!("{t:.3}"));
        println!("#{i}: g = {:.3}, up at {:.3}, back to 0 at {end}, height {:.3}", e.g_eps, e.t_up, e.max_height);
    }
    Ok(())
}
