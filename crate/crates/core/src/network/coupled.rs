//! Joint construction of the open system, the closed system and the
//! dominated M/M/1 queue on shared arrival, departure and mobility primitives.

use super::{check_initial, EventKind, EventLog, NetworkError, NetworkParams, DEFAULT_EVENT_BUDGET};
use crate::path::{all_coords_positive_until, PathBuilder, PiecewisePath, StatePath};
use crate::rng::{StreamClass, StreamKey};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

/// Paths realized on one set of primitives.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingBundle {
    pub initial: Vec<u32>,
    /// `x_n`.
    pub open_path: StatePath,
    /// `x'_n`: the initial users only, ignoring arrivals and departures.
    pub closed_path: StatePath,
    /// `ℓ̃_n = ‖x_n(0)‖ + a_n − d_n`.
    pub walk_path: StatePath,
    /// `ℓ_n`, the reflection of `ℓ̃_n`.
    pub mm1_path: StatePath,
    /// Event times of `a_{n,k}`, per node.
    pub arrival_events: Vec<Vec<f64>>,
    /// Event times of `d_{n,k}`, per node.
    pub departure_events: Vec<Vec<f64>>,
    pub open_log: EventLog,
    pub key: StreamKey,
}

fn poisson_times(rate: f64, horizon: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let mut t = 0.0;
    loop {
        let e: f64 = rng.sample(Exp1);
        t += e / rate;
        if t > horizon {
            return out;
        }
        out.push(t);
    }
}

fn merge_streams(streams: &[Vec<f64>]) -> Vec<(f64, u16)> {
    let mut all: Vec<(f64, u16)> =
        streams.iter().enumerate().flat_map(|(k, s)| s.iter().map(move |&t| (t, k as u16))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all
}

#[derive(Debug, Clone, Copy)]
struct User {
    node: u16,
    pos: u32,
    present: bool,
    initial: bool,
}

struct Population {
    users: Vec<User>,
    initial_at: Vec<Vec<u32>>,
    arrived_at: Vec<Vec<u32>>,
}

impl Population {
    fn list(&mut self, initial: bool, node: u16) -> &mut Vec<u32> {
        if initial {
            &mut self.initial_at[node as usize]
        } else {
            &mut self.arrived_at[node as usize]
        }
    }

    fn insert(&mut self, id: u32, node: u16) {
        let initial = self.users[id as usize].initial;
        let list = self.list(initial, node);
        list.push(id);
        let pos = (list.len() - 1) as u32;
        let u = &mut self.users[id as usize];
        u.node = node;
        u.pos = pos;
        u.present = true;
    }

    fn remove(&mut self, id: u32) {
        let User { node, pos, initial, .. } = self.users[id as usize];
        let list = self.list(initial, node);
        list.swap_remove(pos as usize);
        if let Some(&moved) = list.get(pos as usize) {
            self.users[moved as usize].pos = pos;
        }
        self.users[id as usize].present = false;
    }

    fn count(&self, node: usize) -> usize {
        self.initial_at[node].len() + self.arrived_at[node].len()
    }
}

/// Realizes the coupled processes on `[0, horizon]`.
///
/// Initial users follow trajectories sampled in advance and shared by the
/// open and closed systems. Users that arrive later move through a
/// competing-exponential clock. A potential departure at an empty node leaves
/// `x_n` unchanged but still decrements `ℓ̃_n`.
pub fn simulate_coupled(
    params: &NetworkParams,
    initial: &[u32],
    horizon: f64,
    key: StreamKey,
) -> Result<CouplingBundle, NetworkError> {
    check_initial(params, initial, horizon)?;
    let k = params.nodes();
    let mobility = params.mobility();

    let mut arr_rng = key.stream(StreamClass::Arrivals);
    let arrival_events: Vec<Vec<f64>> = params.lambda_k().iter().map(|&l| poisson_times(l, horizon, &mut arr_rng)).collect();
    let mut dep_rng = key.stream(StreamClass::Departures);
    let departure_events: Vec<Vec<f64>> = params.mu_k().iter().map(|&m| poisson_times(m, horizon, &mut dep_rng)).collect();
    let arrivals = merge_streams(&arrival_events);
    let departures = merge_streams(&departure_events);

    let mut pop = Population { users: Vec::new(), initial_at: vec![Vec::new(); k], arrived_at: vec![Vec::new(); k] };
    let mut jumps: Vec<(f64, u32, u16)> = Vec::new();
    let mut traj_rng = key.stream(StreamClass::Trajectories);
    for (node, &c) in initial.iter().enumerate() {
        for _ in 0..c {
            let id = pop.users.len() as u32;
            pop.users.push(User { node: node as u16, pos: 0, present: false, initial: true });
            pop.insert(id, node as u16);
            let tr = mobility.sample_trajectory(node, horizon, &mut traj_rng);
            jumps.extend(tr.times[1..].iter().zip(&tr.nodes[1..]).map(|(&t, &to)| (t, id, to as u16)));
        }
    }
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut closed_node: Vec<u16> = pop.users.iter().map(|u| u.node).collect();

    let mut move_rng = key.stream(StreamClass::Mobility);
    let mut sel_rng = key.stream(StreamClass::Selection);
    let exit: Vec<f64> = (0..k).map(|i| mobility.exit_rate(i)).collect();

    let mut x: Vec<u32> = initial.to_vec();
    let mut xc: Vec<u32> = initial.to_vec();
    let n0: i64 = initial.iter().map(|&c| c as i64).sum();
    let mut walk = n0;
    let mut walk_inf = n0;

    let mut log = EventLog::new(initial.to_vec());
    let as_f64 = |v: &[u32]| v.iter().map(|&c| c as f64).collect::<Vec<_>>();
    let mut closed_b = PathBuilder::new(k);
    closed_b.push(0.0, &as_f64(&xc));
    let mut walk_b = PathBuilder::new(1);
    walk_b.push(0.0, &[walk as f64]);
    let mut mm1_b = PathBuilder::new(1);
    mm1_b.push(0.0, &[(walk - walk_inf.min(0)) as f64]);

    let (mut ia, mut id, mut ij) = (0usize, 0usize, 0usize);
    let mut t = 0.0;
    let mut events = 0u64;
    loop {
        let move_rate: f64 = (0..k).map(|i| pop.arrived_at[i].len() as f64 * exit[i]).sum();
        let t_move = if move_rate > 0.0 {
            let e: f64 = move_rng.sample(Exp1);
            t + e / move_rate
        } else {
            f64::INFINITY
        };
        let t_arr = arrivals.get(ia).map_or(f64::INFINITY, |e| e.0);
        let t_dep = departures.get(id).map_or(f64::INFINITY, |e| e.0);
        let t_jump = jumps.get(ij).map_or(f64::INFINITY, |e| e.0);
        let next = t_move.min(t_arr).min(t_dep).min(t_jump);
        if next > horizon {
            break;
        }
        events += 1;
        if events > DEFAULT_EVENT_BUDGET {
            return Err(NetworkError::EventBudgetExceeded(DEFAULT_EVENT_BUDGET));
        }
        t = next;
        if t == t_arr {
            let node = arrivals[ia].1;
            ia += 1;
            let uid = pop.users.len() as u32;
            pop.users.push(User { node, pos: 0, present: false, initial: false });
            pop.insert(uid, node);
            x[node as usize] += 1;
            walk += 1;
            log.push(t, EventKind::Arrival { node });
        } else if t == t_dep {
            let node = departures[id].1;
            id += 1;
            walk -= 1;
            walk_inf = walk_inf.min(walk);
            let present = pop.count(node as usize);
            if present > 0 {
                let pick = sel_rng.random_range(0..present);
                let n_init = pop.initial_at[node as usize].len();
                let uid = if pick < n_init {
                    pop.initial_at[node as usize][pick]
                } else {
                    pop.arrived_at[node as usize][pick - n_init]
                };
                pop.remove(uid);
                x[node as usize] -= 1;
                log.push(t, EventKind::Departure { node });
            } else {
                log.push(t, EventKind::NullDeparture { node });
            }
        } else if t == t_jump {
            let (_, uid, to) = jumps[ij];
            ij += 1;
            let from = closed_node[uid as usize];
            closed_node[uid as usize] = to;
            xc[from as usize] -= 1;
            xc[to as usize] += 1;
            if pop.users[uid as usize].present {
                pop.remove(uid);
                pop.insert(uid, to);
                x[from as usize] -= 1;
                x[to as usize] += 1;
                log.push(t, EventKind::Move { from, to });
            }
        } else {
            let mut u = move_rng.random::<f64>() * move_rate;
            let mut from = 0;
            for i in 0..k {
                let r = pop.arrived_at[i].len() as f64 * exit[i];
                if r > 0.0 {
                    from = i;
                    if u < r {
                        break;
                    }
                    u -= r;
                }
            }
            let list = &pop.arrived_at[from];
            let uid = list[move_rng.random_range(0..list.len())];
            let to = mobility.sample_destination(from, &mut move_rng);
            pop.remove(uid);
            pop.insert(uid, to as u16);
            x[from] -= 1;
            x[to] += 1;
            log.push(t, EventKind::Move { from: from as u16, to: to as u16 });
        }
        closed_b.push(t, &as_f64(&xc));
        walk_b.push(t, &[walk as f64]);
        mm1_b.push(t, &[(walk - walk_inf.min(0)) as f64]);
    }
    log.set_horizon(horizon);
    Ok(CouplingBundle {
        initial: initial.to_vec(),
        open_path: log.to_path(),
        closed_path: closed_b.finish(horizon),
        walk_path: walk_b.finish(horizon),
        mm1_path: mm1_b.finish(horizon),
        arrival_events,
        departure_events,
        open_log: log,
        key,
    })
}

/// Outcome of [`verify_coupling`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CouplingCheck {
    pub event_times: usize,
    pub assertions: u64,
    pub violations: Vec<String>,
}

impl CouplingCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the pathwise coupling inequalities at every event time of the bundle.
///
/// With `a`, `d` the total arrival and potential-departure counts and `y` the
/// initial state:
/// `‖x‖ ≥ ℓ`, `‖x‖ = ℓ` up to the first time a node empties,
/// `−d ≤ x_k − x'_k ≤ a` and `−d ≤ ‖x‖ − ‖x'‖ ≤ a`, `‖x'‖ = ‖y‖`,
/// `ℓ̃ = ‖y‖ + a − d`, and `‖r − r'‖ ≤ 2K(a+d)/‖y‖`.
pub fn verify_coupling(bundle: &CouplingBundle, pi: &[f64]) -> CouplingCheck {
    let k = bundle.initial.len();
    let n0: i64 = bundle.initial.iter().map(|&c| c as i64).sum();
    let arrivals = merge_streams(&bundle.arrival_events);
    let departures = merge_streams(&bundle.departure_events);
    let mut times: Vec<f64> = bundle
        .open_path
        .times()
        .iter()
        .chain(bundle.closed_path.times())
        .chain(bundle.walk_path.times())
        .chain(bundle.mm1_path.times())
        .copied()
        .chain(arrivals.iter().map(|e| e.0))
        .chain(departures.iter().map(|e| e.0))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let t_tilde0 = all_coords_positive_until(&bundle.open_path).unwrap_or(f64::INFINITY);

    let mut check = CouplingCheck { event_times: times.len(), ..Default::default() };
    let fail = |check: &mut CouplingCheck, ok: bool, what: &str, t: f64| {
        check.assertions += 1;
        if !ok && check.violations.len() < 20 {
            check.violations.push(format!("{what} violated at t = {t}"));
        }
    };
    for &t in &times {
        let a = arrivals.partition_point(|e| e.0 <= t) as i64;
        let d = departures.partition_point(|e| e.0 <= t) as i64;
        let x: Vec<i64> = bundle.open_path.eval(t).iter().map(|&v| v as i64).collect();
        let xc: Vec<i64> = bundle.closed_path.eval(t).iter().map(|&v| v as i64).collect();
        let walk = bundle.walk_path.eval(t)[0] as i64;
        let ell = bundle.mm1_path.eval(t)[0] as i64;
        let nx: i64 = x.iter().sum();
        let nc: i64 = xc.iter().sum();

        fail(&mut check, walk == n0 + a - d, "walk identity", t);
        fail(&mut check, ell >= 0, "reflected walk nonnegative", t);
        fail(&mut check, nx >= ell, "open total dominates M/M/1", t);
        if t <= t_tilde0 {
            fail(&mut check, nx == ell, "equality before a node empties", t);
        }
        fail(&mut check, nc == n0, "closed system conserves users", t);
        for kk in 0..k {
            let diff = x[kk] - xc[kk];
            fail(&mut check, -d <= diff && diff <= a, "per-node closed coupling", t);
        }
        fail(&mut check, -d <= nx - nc && nx - nc <= a, "total closed coupling", t);
        if n0 > 0 {
            let ok = if nx > 0 {
                // ‖r − r'‖₁ ≤ 2K(a+d)/‖y‖, cleared of denominators
                let lhs: i128 = x.iter().zip(&xc).map(|(&xi, &ci)| ((xi * n0 - ci * nx) as i128).abs()).sum();
                lhs <= 2 * k as i128 * (a + d) as i128 * nx as i128
            } else {
                let gap: f64 = xc.iter().zip(pi).map(|(&ci, &p)| (p - ci as f64 / n0 as f64).abs()).sum();
                gap <= 2.0 * k as f64 * (a + d) as f64 / n0 as f64
            };
            fail(&mut check, ok, "ratio perturbation bound", t);
        }
    }
    check
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::MobilityProfile;
    use crate::path::reflect;

    fn params(lambda: f64, mu: f64) -> NetworkParams {
        let m = MobilityProfile::from_rows(&[vec![-1.0, 0.6, 0.4], vec![0.5, -0.5, 0.0], vec![1.0, 1.0, -2.0]]).unwrap();
        NetworkParams::from_totals(m, lambda, mu, &[1.0, 1.0, 1.0], &[1.0, 2.0, 1.0], None).unwrap()
    }

    #[test]
    fn no_exogenous_events_means_identical_systems() {
        let p = params(0.0, 0.0);
        let b = simulate_coupled(&p, &[3, 2, 1], 30.0, StreamKey::root(2)).unwrap();
        assert_eq!(b.open_path, b.closed_path);
        assert!(verify_coupling(&b, p.mobility().pi()).passed());
    }

    #[test]
    fn invariants_hold() {
        let p = params(2.0, 3.0);
        for rep in 0..20 {
            let b = simulate_coupled(&p, &[4, 0, 2], 40.0, StreamKey::new(11, rep)).unwrap();
            let c = verify_coupling(&b, p.mobility().pi());
            assert!(c.passed(), "{:?}", c.violations);
            assert!(c.assertions > 100);
            assert_eq!(reflect(&b.walk_path).unwrap(), b.mm1_path);
        }
    }

    #[test]
    fn bit_identical_per_seed() {
        let p = params(1.0, 1.5);
        let a = simulate_coupled(&p, &[2, 2, 2], 20.0, StreamKey::new(1, 7)).unwrap();
        let b = simulate_coupled(&p, &[2, 2, 2], 20.0, StreamKey::new(1, 7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupted_bundle_is_caught() {
        let p = params(2.0, 3.0);
        let mut b = simulate_coupled(&p, &[4, 1, 2], 10.0, StreamKey::root(3)).unwrap();
        b.arrival_events[0].push(0.0);
        b.arrival_events[0].sort_by(f64::total_cmp);
        assert!(!verify_coupling(&b, p.mobility().pi()).passed());
    }
}
