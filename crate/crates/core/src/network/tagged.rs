//! A marked initial user and its processor-sharing service.

use super::{check_initial, CountsEngine, EventKind, EventLog, NetworkError, NetworkParams, DEFAULT_EVENT_BUDGET};
use crate::mobility::NodeTrajectory;
use crate::rng::{StreamClass, StreamKey};
use rand::Rng;
use rand_distr::Exp1;

#[derive(Debug, Clone, Copy)]
enum Pick {
    Arrival(usize),
    Departure(usize),
    Move(usize),
    TagMove,
}

#[derive(Debug, Clone, Copy)]
pub struct TaggedOptions {
    /// End the run when the tagged user leaves.
    pub stop_at_departure: bool,
    pub event_budget: u64,
}

impl Default for TaggedOptions {
    fn default() -> Self {
        Self { stop_at_departure: true, event_budget: DEFAULT_EVENT_BUDGET }
    }
}

/// Trajectory and service of the tagged user.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedUserRecord {
    pub trajectory: NodeTrajectory,
    /// `E_n`.
    pub requirement: f64,
    /// Knots `(t, s_n(t))` of the piecewise-linear service curve.
    pub service_knots: Vec<(f64, f64)>,
    /// `χ_n`, if reached before the horizon.
    pub sojourn: Option<f64>,
}

impl TaggedUserRecord {
    /// `s_n(t)`, held constant after the last knot.
    pub fn service_at(&self, t: f64) -> f64 {
        let knots = &self.service_knots;
        let i = knots.partition_point(|k| k.0 <= t);
        if i == 0 {
            return 0.0;
        }
        if i == knots.len() {
            return knots[i - 1].1;
        }
        let (t0, s0) = knots[i - 1];
        let (t1, s1) = knots[i];
        s0 + (s1 - s0) * (t - t0) / (t1 - t0)
    }
}

#[derive(Debug, Clone)]
pub struct TaggedRun {
    pub log: EventLog,
    pub record: TaggedUserRecord,
}

/// Simulates the open network with one marked user initially at `tagged_node`.
///
/// The marked user has a unit-mean exponential requirement `E_n` and receives
/// `μ_k / x_k` while at node `k`; it leaves exactly when its attained service
/// reaches `E_n`. Other users are memoryless, so their departure rate at `k`
/// is `μ_k (x_k − 1{tag at k}) / x_k`.
pub fn simulate_tagged(
    params: &NetworkParams,
    initial: &[u32],
    tagged_node: usize,
    horizon: f64,
    key: StreamKey,
    options: TaggedOptions,
) -> Result<TaggedRun, NetworkError> {
    check_initial(params, initial, horizon)?;
    if initial[tagged_node] == 0 {
        return Err(NetworkError::EmptyTagNode(tagged_node));
    }
    let requirement: f64 = key.stream(StreamClass::Requirements).sample(Exp1);
    let mut rng = key.stream(StreamClass::Clock);
    let k = params.nodes();
    let mobility = params.mobility();
    let exit: Vec<f64> = (0..k).map(|i| mobility.exit_rate(i)).collect();
    let lambda = params.lambda_k();
    let mu = params.mu_k();

    let mut y = initial.to_vec();
    let mut log = EventLog::new(initial.to_vec());
    let mut tag = tagged_node;
    let mut traj = NodeTrajectory { times: vec![0.0], nodes: vec![tag] };
    let mut knots = vec![(0.0, 0.0)];
    let mut s = 0.0;
    let mut t = 0.0;
    let mut events = 0u64;
    let mut sojourn = None;

    loop {
        let bump = |events: &mut u64| {
            *events += 1;
            if *events > options.event_budget {
                Err(NetworkError::EventBudgetExceeded(options.event_budget))
            } else {
                Ok(())
            }
        };
        if sojourn.is_some() {
            if options.stop_at_departure {
                break;
            }
            let engine = CountsEngine::new(params, &y);
            let Some((dt, _, kind)) = engine.next_event(&mut rng) else { break };
            t += dt;
            if t > horizon {
                break;
            }
            bump(&mut events)?;
            kind.apply(&mut y);
            log.push(t, kind);
            continue;
        }

        let own = |i: usize| if i == tag { 1.0 } else { 0.0 };
        let mut rate = params.lambda_total() + exit[tag];
        for i in 0..k {
            if y[i] > 0 {
                let others = y[i] as f64 - own(i);
                rate += mu[i] * others / y[i] as f64 + others * exit[i];
            }
        }
        let e: f64 = rng.sample(Exp1);
        let dt = if rate > 0.0 { e / rate } else { f64::INFINITY };
        let slope = mu[tag] / y[tag] as f64;
        if slope > 0.0 && s + slope * dt >= requirement {
            let chi = t + (requirement - s) / slope;
            if chi <= horizon {
                bump(&mut events)?;
                t = chi;
                s = requirement;
                knots.push((t, s));
                y[tag] -= 1;
                log.push(t, EventKind::Departure { node: tag as u16 });
                sojourn = Some(chi);
                continue;
            }
        }
        if t + dt > horizon {
            s += slope * (horizon - t);
            knots.push((horizon, s));
            break;
        }
        bump(&mut events)?;
        t += dt;
        s += slope * dt;
        knots.push((t, s));

        let mut u = rng.random::<f64>() * rate;
        let mut last = None;
        'select: {
            for (i, &l) in lambda.iter().enumerate() {
                if l > 0.0 {
                    last = Some(Pick::Arrival(i));
                    if u < l {
                        break 'select;
                    }
                    u -= l;
                }
            }
            for i in (0..k).filter(|&i| y[i] > 0) {
                let r = mu[i] * (y[i] as f64 - own(i)) / y[i] as f64;
                if r > 0.0 {
                    last = Some(Pick::Departure(i));
                    if u < r {
                        break 'select;
                    }
                    u -= r;
                }
            }
            for i in 0..k {
                let r = (y[i] as f64 - own(i)) * exit[i];
                if r > 0.0 {
                    last = Some(Pick::Move(i));
                    if u < r {
                        break 'select;
                    }
                    u -= r;
                }
            }
            if exit[tag] > 0.0 {
                last = Some(Pick::TagMove);
            }
        }
        let kind = match last {
            Some(Pick::Arrival(i)) => EventKind::Arrival { node: i as u16 },
            Some(Pick::Departure(i)) => EventKind::Departure { node: i as u16 },
            Some(Pick::Move(i)) => {
                let to = mobility.sample_destination(i, &mut rng);
                EventKind::Move { from: i as u16, to: to as u16 }
            }
            Some(Pick::TagMove) => {
                let from = tag;
                tag = mobility.sample_destination(from, &mut rng);
                traj.times.push(t);
                traj.nodes.push(tag);
                EventKind::Move { from: from as u16, to: tag as u16 }
            }
            None => continue,
        };
        kind.apply(&mut y);
        log.push(t, kind);
    }
    log.set_horizon(if options.stop_at_departure { sojourn.unwrap_or(horizon) } else { horizon });
    Ok(TaggedRun { log, record: TaggedUserRecord { trajectory: traj, requirement, service_knots: knots, sojourn } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::MobilityProfile;
    use crate::stats::ks_one_sample;

    #[test]
    fn lone_user_gets_full_capacity() {
        let m = MobilityProfile::two_state(1.0, 1.0).unwrap();
        let p = NetworkParams::new(m, vec![0.0, 0.0], vec![2.0, 2.0], None).unwrap();
        let run = simulate_tagged(&p, &[1, 0], 0, 100.0, StreamKey::root(5), TaggedOptions::default()).unwrap();
        let r = &run.record;
        let chi = r.sojourn.unwrap();
        assert!((chi - r.requirement / 2.0).abs() < 1e-12);
        assert!((r.service_at(chi / 2.0) - r.requirement / 2.0).abs() < 1e-12);
        assert_eq!(run.log.final_state(), &[0, 0]);
    }

    #[test]
    fn shared_node_halves_service() {
        let m = MobilityProfile::two_state(1e-9, 1e-9).unwrap();
        let p = NetworkParams::new(m, vec![0.0, 0.0], vec![1.0, 0.0], None).unwrap();
        // with μ at node 1 only, the other user leaves at rate 1/2 while co-located
        let run = simulate_tagged(&p, &[2, 0], 0, 1e3, StreamKey::root(8), TaggedOptions::default()).unwrap();
        let knots = &run.record.service_knots;
        let (t1, s1) = knots[1];
        assert!((s1 - 0.5 * t1).abs() < 1e-12);
    }

    #[test]
    fn empty_tag_node() {
        let m = MobilityProfile::two_state(1.0, 1.0).unwrap();
        let p = NetworkParams::new(m, vec![0.0, 0.0], vec![1.0, 1.0], None).unwrap();
        assert!(matches!(
            simulate_tagged(&p, &[0, 3], 0, 10.0, StreamKey::root(0), TaggedOptions::default()),
            Err(NetworkError::EmptyTagNode(0))
        ));
    }

    #[test]
    fn lone_user_sojourn_is_exponential() {
        let m = MobilityProfile::two_state(1.0, 3.0).unwrap();
        let mu = 1.5;
        let p = NetworkParams::new(m, vec![0.0, 0.0], vec![mu, mu], None).unwrap();
        let chis: Vec<f64> = (0..10_000)
            .map(|r| {
                simulate_tagged(&p, &[1, 0], 0, 1e4, StreamKey::new(3, r), TaggedOptions::default())
                    .unwrap()
                    .record
                    .sojourn
                    .unwrap()
            })
            .collect();
        let ks = ks_one_sample(&chis, |x| 1.0 - (-mu * x).exp());
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn service_curve_is_monotone_with_bounded_slope() {
        let m = MobilityProfile::uniform(3, 0.7).unwrap();
        let p = NetworkParams::new(m, vec![0.4, 0.4, 0.4], vec![1.0, 2.0, 0.5], None).unwrap();
        let opts = TaggedOptions { stop_at_departure: false, ..Default::default() };
        for rep in 0..50 {
            let run = simulate_tagged(&p, &[2, 1, 3], 2, 40.0, StreamKey::new(6, rep), opts).unwrap();
            let r = &run.record;
            assert_eq!(r.service_knots[0], (0.0, 0.0));
            for w in r.service_knots.windows(2) {
                let dt = w[1].0 - w[0].0;
                let ds = w[1].1 - w[0].1;
                assert!(ds >= 0.0 && ds <= 2.0 * dt + 1e-12);
            }
            if let Some(chi) = r.sojourn {
                assert!((r.service_at(chi) - r.requirement).abs() < 1e-9);
            }
        }
    }
}
