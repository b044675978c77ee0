//! Closed and open systems started far from the ray {cπ} homogenize in a
//! time of the order of the mixing time.
use mobnet::experiments::{run_homogenization, Config};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = Config::from_toml(
        r#"
[mobility]
q = [[-1.0, 1.0], [1.0, -1.0]]
[ladder]
lambda = 1.0
alpha = 1.0
n_values = [40]
[experiment]
reps = 300
eps_grid = [0.1, 0.2]
initial_states = [[500, 0], [2000, 0]]
[rng]
seed = 4
"#,
    )?;
    let report = run_homogenization(&config)?;
    report.write_verdicts(std::io::stdout())?;
    Ok(())
}
