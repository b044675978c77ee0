use super::{check_initial, CountsEngine, EventLog, NetworkError, NetworkParams, DEFAULT_EVENT_BUDGET};
use crate::path::StatePath;
use crate::rng::{StreamClass, StreamKey};

#[derive(Debug, Clone, Copy)]
pub struct OpenOptions {
    pub event_budget: u64,
    /// Keep `(state, rate)` for every event, for rate bookkeeping checks.
    pub record_rates: bool,
}

impl Default for OpenOptions {
    fn default() -> Self {
        Self { event_budget: DEFAULT_EVENT_BUDGET, record_rates: false }
    }
}

#[derive(Debug, Clone)]
pub struct OpenRun {
    pub log: EventLog,
    /// State before each event and the total rate its holding time was drawn at.
    pub rates: Vec<(Vec<u32>, f64)>,
}

impl OpenRun {
    pub fn path(&self) -> StatePath {
        self.log.to_path()
    }
}

/// Simulates the open network from `initial` on `[0, horizon]`.
pub fn simulate_open(
    params: &NetworkParams,
    initial: &[u32],
    horizon: f64,
    key: StreamKey,
    options: OpenOptions,
) -> Result<OpenRun, NetworkError> {
    check_initial(params, initial, horizon)?;
    let mut rng = key.stream(StreamClass::Clock);
    let mut engine = CountsEngine::new(params, initial);
    let mut log = EventLog::new(initial.to_vec());
    let mut rates = Vec::new();
    let mut t = 0.0;
    let mut events = 0u64;
    while let Some((dt, rate, kind)) = engine.next_event(&mut rng) {
        t += dt;
        if t > horizon {
            break;
        }
        events += 1;
        if events > options.event_budget {
            return Err(NetworkError::EventBudgetExceeded(options.event_budget));
        }
        if options.record_rates {
            rates.push((engine.state().to_vec(), rate));
        }
        engine.apply(kind);
        log.push(t, kind);
    }
    log.set_horizon(horizon);
    Ok(OpenRun { log, rates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::MobilityProfile;
    use crate::network::EventKind;

    fn params(lambda: Vec<f64>, mu: Vec<f64>) -> NetworkParams {
        NetworkParams::new(MobilityProfile::two_state(1.0, 2.0).unwrap(), lambda, mu, None).unwrap()
    }

    #[test]
    fn closed_dynamics_conserve_users() {
        let p = params(vec![0.0, 0.0], vec![0.0, 0.0]);
        let run = simulate_open(&p, &[3, 1], 50.0, StreamKey::root(1), OpenOptions::default()).unwrap();
        assert!(run.log.len() > 10);
        run.log.replay(|_, s| assert_eq!(s.iter().sum::<u32>(), 4));
        assert!(run.log.kinds().iter().all(|k| matches!(k, EventKind::Move { .. })));
    }

    #[test]
    fn rate_bookkeeping_is_exact() {
        // integer rates keep every sum exact in floating point
        let m = MobilityProfile::from_rows(&[vec![-3.0, 1.0, 2.0], vec![1.0, -1.0, 0.0], vec![2.0, 2.0, -4.0]]).unwrap();
        let p = NetworkParams::new(m, vec![1.0, 2.0, 0.0], vec![3.0, 1.0, 5.0], None).unwrap();
        let opts = OpenOptions { record_rates: true, ..Default::default() };
        let run = simulate_open(&p, &[2, 0, 1], 20.0, StreamKey::root(9), opts).unwrap();
        assert!(run.rates.len() > 100);
        let q_diag = [3u64, 1, 4];
        let mu = [3u64, 1, 5];
        for (y, rate) in &run.rates {
            let mut expected = 3u64;
            for k in 0..3 {
                if y[k] > 0 {
                    expected += mu[k] + y[k] as u64 * q_diag[k];
                }
            }
            assert_eq!(*rate, expected as f64);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let p = params(vec![0.5, 0.5], vec![1.0, 1.0]);
        let a = simulate_open(&p, &[1, 1], 100.0, StreamKey::new(4, 2), OpenOptions::default()).unwrap();
        let b = simulate_open(&p, &[1, 1], 100.0, StreamKey::new(4, 2), OpenOptions::default()).unwrap();
        assert_eq!(a.log, b.log);
        let c = simulate_open(&p, &[1, 1], 100.0, StreamKey::new(4, 3), OpenOptions::default()).unwrap();
        assert_ne!(a.log, c.log);
    }

    #[test]
    fn errors() {
        let p = params(vec![0.5, 0.5], vec![1.0, 1.0]);
        assert!(matches!(simulate_open(&p, &[1], 1.0, StreamKey::root(0), OpenOptions::default()), Err(NetworkError::DimensionMismatch { .. })));
        assert!(matches!(simulate_open(&p, &[1, 1], 0.0, StreamKey::root(0), OpenOptions::default()), Err(NetworkError::ZeroHorizon(_))));
        let opts = OpenOptions { event_budget: 5, ..Default::default() };
        assert!(matches!(simulate_open(&p, &[1, 1], 1e6, StreamKey::root(0), opts), Err(NetworkError::EventBudgetExceeded(5))));
    }

    #[test]
    fn pure_arrivals_are_poisson() {
        let p = params(vec![1.0, 0.0], vec![0.0, 0.0]);
        let horizon = 10.0;
        let counts: Vec<f64> = (0..2000)
            .map(|r| {
                let run = simulate_open(&p, &[0, 0], horizon, StreamKey::new(5, r), OpenOptions::default()).unwrap();
                run.log.final_state().iter().sum::<u32>() as f64
            })
            .collect();
        let s = crate::stats::mean_se(&counts);
        assert!((s.mean - horizon).abs() <= 3.0 * s.se, "mean {} se {}", s.mean, s.se);
    }
}
