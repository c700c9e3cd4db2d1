//! Threat models: Byzantine advisors fabricating misleading Q-vectors, and
//! inference attackers reconstructing an advisor's greedy policy from the
//! advice they receive.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::agent::{max_value, QTable, QVector};
use crate::env::{Action, Cell, GridConfig, N_ACTIONS};
use crate::error::{config_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ByzantineConfig {
    pub fraction: f64,
    pub noise_center: f64,
    pub noise_spread: f64,
}

impl ByzantineConfig {
    /// Noise centred on the goal reward with a spread of a tenth of it.
    pub fn for_goal_reward(fraction: f64, phi_goal: f64) -> Self {
        Self {
            fraction,
            noise_center: phi_goal,
            noise_spread: 0.1 * phi_goal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(config_err(format!(
                "attacker fraction must be in [0, 1], got {}",
                self.fraction
            )));
        }
        if !(self.noise_center.is_finite() && self.noise_center > 0.0) {
            return Err(config_err("byzantine noise centre must be positive"));
        }
        if !(self.noise_spread.is_finite() && self.noise_spread >= 0.0) {
            return Err(config_err("byzantine noise spread must be non-negative"));
        }
        Ok(())
    }

    /// One draw from `Normal(center, spread)` truncated to `(0, ∞)`.
    fn noise<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let Ok(normal) = Normal::new(self.noise_center, self.noise_spread) else {
            return self.noise_center;
        };
        for _ in 0..64 {
            let v = normal.sample(rng);
            if v > 0.0 {
                return v;
            }
        }
        self.noise_center
    }
}

/// Number of attackers for a population of `n_agents`.
pub fn attacker_count(fraction: f64, n_agents: usize) -> usize {
    ((fraction * n_agents as f64).round() as usize).min(n_agents)
}

/// The action that leaves the advisee farthest (Chebyshev) from the goal;
/// ties are broken uniformly.
pub fn misleading_action<R: Rng + ?Sized>(advisee: Cell, grid: &GridConfig, rng: &mut R) -> Action {
    let dist = Action::ALL.map(|a| grid.resolve(advisee, a).chebyshev(grid.goal));
    let best = *dist.iter().max().expect("four actions");
    let candidates: Vec<Action> = Action::ALL
        .into_iter()
        .zip(dist)
        .filter(|(_, d)| *d == best)
        .map(|(a, _)| a)
        .collect();
    candidates[rng.random_range(0..candidates.len())]
}

/// Builds a false advice vector promoting `misleading`.
///
/// The attacker's own values are shuffled, the largest one is moved onto the
/// misleading action, and a positive reward-scale draw is added there so the
/// misleading action is the strict maximum.
pub fn fabricate_vector<R: Rng + ?Sized>(
    own: &QVector,
    misleading: Action,
    cfg: &ByzantineConfig,
    rng: &mut R,
) -> QVector {
    let mut out = *own;
    out.shuffle(rng);
    let m = misleading.index();
    let top = (0..N_ACTIONS)
        .max_by(|a, b| out[*a].total_cmp(&out[*b]))
        .expect("four actions");
    out.swap(m, top);
    out[m] += cfg.noise(rng);
    out
}

/// Full Byzantine response for an advisee standing at `advisee`.
pub fn fabricate_advice<R: Rng + ?Sized>(
    attacker_q: &QVector,
    advisee: Cell,
    grid: &GridConfig,
    cfg: &ByzantineConfig,
    rng: &mut R,
) -> QVector {
    let a_m = misleading_action(advisee, grid, rng);
    fabricate_vector(attacker_q, a_m, cfg, rng)
}

/// Running value frequencies for one vector position.
#[derive(Debug, Clone, Default)]
struct PositionTally {
    // value bits -> (count, index of last observation)
    counts: HashMap<u64, (u32, u32)>,
}

impl PositionTally {
    fn observe(&mut self, v: f64, seq: u32) {
        let e = self.counts.entry(v.to_bits()).or_insert((0, 0));
        e.0 += 1;
        e.1 = seq;
    }

    /// Most frequent value; ties go to the most recently observed.
    fn mode(&self) -> Option<f64> {
        self.counts
            .iter()
            .max_by_key(|(_, (count, last))| (*count, *last))
            .map(|(bits, _)| f64::from_bits(*bits))
    }
}

#[derive(Debug, Clone, Default)]
struct StateLog {
    responses: Vec<QVector>,
    tallies: [PositionTally; N_ACTIONS],
}

/// What one attacker has learned about one target advisor.
#[derive(Debug, Clone)]
pub struct InferenceAttackState {
    pub target_advisor: usize,
    logs: Vec<StateLog>,
    reconstructed: Vec<Option<Action>>,
    queries: u64,
}

impl InferenceAttackState {
    pub fn new(target_advisor: usize, n_states: usize) -> Self {
        Self {
            target_advisor,
            logs: vec![StateLog::default(); n_states],
            reconstructed: vec![None; n_states],
            queries: 0,
        }
    }

    pub fn query_log(&self, state: usize) -> &[QVector] {
        &self.logs[state].responses
    }

    pub fn reconstructed(&self, state: usize) -> Option<Action> {
        self.reconstructed[state]
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    /// Per-position mode of everything logged for `state`.
    pub fn mode_vector(&self, state: usize) -> Option<QVector> {
        let log = &self.logs[state];
        if log.responses.is_empty() {
            return None;
        }
        let mut out = [0.0; N_ACTIONS];
        for (o, t) in out.iter_mut().zip(&log.tallies) {
            *o = t.mode()?;
        }
        Some(out)
    }

    /// Logs a received (non-refusal) response and refreshes the guess for
    /// `state`. Argmax ties resolve to the lowest action index.
    pub fn infer_step(&mut self, response: &QVector, state: usize) {
        let log = &mut self.logs[state];
        let seq = log.responses.len() as u32;
        log.responses.push(*response);
        for (t, v) in log.tallies.iter_mut().zip(response) {
            t.observe(*v, seq);
        }
        self.queries += 1;
        let modes = self.mode_vector(state).expect("non-empty log");
        let m = max_value(&modes);
        self.reconstructed[state] = modes
            .iter()
            .position(|v| *v == m)
            .and_then(Action::from_index);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessRate {
    pub pct: f64,
    pub correct: usize,
    pub qualifying: usize,
    pub insufficient_data: bool,
}

impl SuccessRate {
    fn from_counts(correct: usize, qualifying: usize) -> Self {
        if qualifying == 0 {
            return Self {
                pct: 0.0,
                correct: 0,
                qualifying: 0,
                insufficient_data: true,
            };
        }
        Self {
            pct: 100.0 * correct as f64 / qualifying as f64,
            correct,
            qualifying,
            insufficient_data: false,
        }
    }

    /// Pools several per-target rates into one.
    pub fn pooled<'a>(rates: impl IntoIterator<Item = &'a SuccessRate>) -> Self {
        let (c, q) = rates
            .into_iter()
            .fold((0, 0), |(c, q), r| (c + r.correct, q + r.qualifying));
        Self::from_counts(c, q)
    }
}

/// Share of states (logged at least once, with a unique true greedy action)
/// whose greedy action the attacker recovered.
pub fn attack_success_rate(attack: &InferenceAttackState, truth: &QTable) -> SuccessRate {
    let mut correct = 0;
    let mut qualifying = 0;
    for state in 0..truth.n_states() {
        if attack.logs[state].responses.is_empty() {
            continue;
        }
        let Some(true_action) = truth.unique_greedy(state) else {
            continue;
        };
        qualifying += 1;
        correct += usize::from(attack.reconstructed[state] == Some(true_action));
    }
    SuccessRate::from_counts(correct, qualifying)
}
