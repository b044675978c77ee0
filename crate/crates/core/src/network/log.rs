//! Compressed event logs with periodic full-state checkpoints.

use crate::path::{PathBuilder, StatePath};

/// Full state is stored after every this many events.
pub const CHECKPOINT_INTERVAL: usize = 1 << 16;

/// A single transition of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Arrival { node: u16 },
    Departure { node: u16 },
    /// A potential departure at an empty node; the state does not change.
    NullDeparture { node: u16 },
    Move { from: u16, to: u16 },
}

impl EventKind {
    pub fn apply(&self, state: &mut [u32]) {
        match *self {
            EventKind::Arrival { node } => state[node as usize] += 1,
            EventKind::Departure { node } => state[node as usize] -= 1,
            EventKind::NullDeparture { .. } => {}
            EventKind::Move { from, to } => {
                state[from as usize] -= 1;
                state[to as usize] += 1;
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Arrival { .. } => "arrival",
            EventKind::Departure { .. } => "departure",
            EventKind::NullDeparture { .. } => "null_departure",
            EventKind::Move { .. } => "move",
        }
    }

    /// `(node_from, node_to)`, with `None` for the outside world.
    pub fn endpoints(&self) -> (Option<u16>, Option<u16>) {
        match *self {
            EventKind::Arrival { node } => (None, Some(node)),
            EventKind::Departure { node } | EventKind::NullDeparture { node } => (Some(node), None),
            EventKind::Move { from, to } => (Some(from), Some(to)),
        }
    }
}

/// Event-time compressed trajectory of an `ℕ^K`-valued process.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    initial: Vec<u32>,
    current: Vec<u32>,
    times: Vec<f64>,
    kinds: Vec<EventKind>,
    checkpoints: Vec<Vec<u32>>,
    horizon: f64,
}

impl EventLog {
    pub fn new(initial: Vec<u32>) -> Self {
        Self {
            current: initial.clone(),
            checkpoints: vec![initial.clone()],
            initial,
            times: Vec::new(),
            kinds: Vec::new(),
            horizon: 0.0,
        }
    }

    pub fn push(&mut self, t: f64, kind: EventKind) {
        kind.apply(&mut self.current);
        self.times.push(t);
        self.kinds.push(kind);
        if self.times.len() % CHECKPOINT_INTERVAL == 0 {
            self.checkpoints.push(self.current.clone());
        }
    }

    pub fn set_horizon(&mut self, horizon: f64) {
        self.horizon = horizon;
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial(&self) -> &[u32] {
        &self.initial
    }

    pub fn final_state(&self) -> &[u32] {
        &self.current
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn kinds(&self) -> &[EventKind] {
        &self.kinds
    }

    /// State after all events at times `≤ t`, replayed from the nearest checkpoint.
    pub fn state_at(&self, t: f64) -> Vec<u32> {
        let n = self.times.partition_point(|&s| s <= t);
        let c = n / CHECKPOINT_INTERVAL;
        let mut state = self.checkpoints[c].clone();
        for kind in &self.kinds[c * CHECKPOINT_INTERVAL..n] {
            kind.apply(&mut state);
        }
        state
    }

    /// Calls `f(t, state)` for the initial state and after every event.
    pub fn replay(&self, mut f: impl FnMut(f64, &[u32])) {
        let mut state = self.initial.clone();
        f(0.0, &state);
        for (t, kind) in self.times.iter().zip(&self.kinds) {
            kind.apply(&mut state);
            f(*t, &state);
        }
    }

    /// Dense path; null events are merged away.
    pub fn to_path(&self) -> StatePath {
        let k = self.initial.len();
        let mut b = PathBuilder::with_capacity(k, self.len() + 1);
        let mut row = vec![0.0; k];
        self.replay(|t, s| {
            for (r, &c) in row.iter_mut().zip(s) {
                *r = c as f64;
            }
            b.push(t, &row);
        });
        b.finish(self.horizon)
    }

    /// `‖x‖` as a dense scalar path.
    pub fn total_path(&self) -> StatePath {
        let mut b = PathBuilder::with_capacity(1, self.len() + 1);
        self.replay(|t, s| b.push(t, &[s.iter().map(|&c| c as f64).sum()]));
        b.finish(self.horizon)
    }
}
