//! Tabular Q-learning for a single agent.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, N_ACTIONS};
use crate::error::{config_err, BrnesError, Result};

pub type QVector = [f64; N_ACTIONS];

/// Dense action-value table indexed by state id. Zero-initialised.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<QVector>,
}

impl QTable {
    pub fn new(n_states: usize) -> Self {
        Self {
            values: vec![[0.0; N_ACTIONS]; n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, state: usize) -> &QVector {
        &self.values[state]
    }

    pub fn row_mut(&mut self, state: usize) -> &mut QVector {
        &mut self.values[state]
    }

    pub fn get(&self, state: usize, action: Action) -> f64 {
        self.values[state][action.index()]
    }

    pub fn max(&self, state: usize) -> f64 {
        max_value(&self.values[state])
    }

    /// The unique greedy action, or `None` when the maximum is tied.
    pub fn unique_greedy(&self, state: usize) -> Option<Action> {
        unique_argmax(&self.values[state]).and_then(Action::from_index)
    }

    /// Writes `state,left,right,up,down` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state", "left", "right", "up", "down"])?;
        for (s, row) in self.values.iter().enumerate() {
            let mut rec = vec![s.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| BrnesError::Io {
            path: path.to_owned(),
            source,
        })?;
        self.write_csv(file).map_err(|source| BrnesError::Csv {
            path: path.to_owned(),
            source,
        })
    }
}

pub fn max_value(v: &QVector) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn unique_argmax(v: &QVector) -> Option<usize> {
    let m = max_value(v);
    let mut hits = v.iter().enumerate().filter(|(_, x)| **x == m);
    let first = hits.next()?.0;
    hits.next().is_none().then_some(first)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub alpha: f64,
    pub epsilon_explore: f64,
    pub gamma: f64,
    pub w: f64,
    pub kappa: f64,
    pub tau: u64,
    pub tau_prime: u64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            alpha: 0.10,
            epsilon_explore: 0.08,
            gamma: 0.80,
            w: 0.85,
            kappa: 0.1,
            tau: 100,
            tau_prime: 100_000,
        }
    }
}

impl AgentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(config_err(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        for (name, v) in [
            ("epsilon_explore", self.epsilon_explore),
            ("gamma", self.gamma),
            ("w", self.w),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(config_err(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if !self.kappa.is_finite() {
            return Err(config_err("kappa must be finite"));
        }
        if self.tau > self.tau_prime {
            return Err(config_err(format!(
                "tau ({}) exceeds tau_prime ({})",
                self.tau, self.tau_prime
            )));
        }
        Ok(())
    }
}

/// Visit counts and the two communication budgets of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentLedger {
    visit_count: Vec<u64>,
    pub advisee_budget: u64,
    pub advisee_budget_total: u64,
    pub advisor_budget: u64,
    pub advisor_budget_total: u64,
}

impl AgentLedger {
    pub fn new(n_states: usize, advisee_total: u64, advisor_total: u64) -> Self {
        Self {
            visit_count: vec![0; n_states],
            advisee_budget: advisee_total,
            advisee_budget_total: advisee_total,
            advisor_budget: advisor_total,
            advisor_budget_total: advisor_total,
        }
    }

    pub fn visits(&self, state: usize) -> u64 {
        self.visit_count[state]
    }

    pub fn record_visit(&mut self, state: usize) {
        self.visit_count[state] += 1;
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visit_count
    }

    /// Spends one unit of the advice-seeking budget. Returns false when empty.
    pub fn spend_advisee(&mut self) -> bool {
        match self.advisee_budget.checked_sub(1) {
            Some(b) => {
                self.advisee_budget = b;
                true
            }
            None => false,
        }
    }

    /// Spends one unit of the advice-giving budget. Returns false when empty.
    pub fn spend_advisor(&mut self) -> bool {
        match self.advisor_budget.checked_sub(1) {
            Some(b) => {
                self.advisor_budget = b;
                true
            }
            None => false,
        }
    }
}

/// ε-greedy selection with uniform tie-breaking among maximisers.
pub fn select_action<R: Rng + ?Sized>(q: &QVector, epsilon_explore: f64, rng: &mut R) -> Action {
    if epsilon_explore > 0.0 && rng.random::<f64>() < epsilon_explore {
        return Action::ALL[rng.random_range(0..N_ACTIONS)];
    }
    greedy_action(q, rng)
}

pub fn greedy_action<R: Rng + ?Sized>(q: &QVector, rng: &mut R) -> Action {
    let m = max_value(q);
    let mut best = [0usize; N_ACTIONS];
    let mut n = 0;
    for (i, v) in q.iter().enumerate() {
        if *v == m {
            best[n] = i;
            n += 1;
        }
    }
    let pick = if n == 1 {
        best[0]
    } else {
        best[rng.random_range(0..n)]
    };
    Action::ALL[pick]
}

/// One-step Q-learning backup. Returns the new value of `Q(state, action)`.
pub fn q_update(
    q: &mut QTable,
    state: usize,
    action: Action,
    reward: f64,
    next_state: usize,
    params: &AgentParams,
) -> Result<f64> {
    if !reward.is_finite() {
        return Err(BrnesError::Numeric(format!("reward {reward}")));
    }
    let target = reward + params.gamma * q.max(next_state);
    let entry = &mut q.row_mut(state)[action.index()];
    *entry = (1.0 - params.alpha) * *entry + params.alpha * target;
    if !entry.is_finite() {
        return Err(BrnesError::Numeric(format!(
            "Q({state}, {action:?}) = {entry}"
        )));
    }
    Ok(*entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn params(alpha: f64, gamma: f64) -> AgentParams {
        AgentParams {
            alpha,
            gamma,
            ..AgentParams::default()
        }
    }

    #[test]
    fn pure_argmax() {
        let mut rng = seeded(0);
        for _ in 0..100 {
            assert_eq!(
                select_action(&[0.1, 0.9, 0.2, 0.0], 0.0, &mut rng),
                Action::Right
            );
        }
    }

    fn frequencies(q: QVector, eps: f64) -> [f64; 4] {
        let mut rng = seeded(42);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            counts[select_action(&q, eps, &mut rng).index()] += 1;
        }
        counts.map(|c| c as f64 / n as f64)
    }

    #[test]
    fn full_exploration_is_uniform() {
        for f in frequencies([5.0, 0.0, 0.0, 0.0], 1.0) {
            assert!((f - 0.25).abs() < 0.006, "{f}");
        }
    }

    #[test]
    fn ties_break_uniformly() {
        for f in frequencies([0.3; 4], 0.0) {
            assert!((f - 0.25).abs() < 0.006, "{f}");
        }
        let f = frequencies([1.0, 0.0, 1.0, 0.0], 0.0);
        assert!((f[0] - 0.5).abs() < 0.008 && (f[2] - 0.5).abs() < 0.008);
        assert_eq!(f[1] + f[3], 0.0);
    }

    #[test]
    fn q_update_arithmetic() {
        let mut q = QTable::new(4);
        let p = params(0.1, 0.8);
        assert!((q_update(&mut q, 0, Action::Left, 10.0, 1, &p).unwrap() - 1.0).abs() < 1e-12);

        let mut q = QTable::new(4);
        q.row_mut(0)[0] = 1.0;
        q.row_mut(1)[2] = 1.0;
        let v = q_update(&mut q, 0, Action::Left, 0.0, 1, &p).unwrap();
        assert!((v - 0.98).abs() < 1e-12);
        // only the updated entry changed
        assert_eq!(q.row(1), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(&q.row(0)[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_learning_rate_is_inert() {
        let mut q = QTable::new(2);
        q.row_mut(0)[1] = 0.7;
        q.row_mut(1)[3] = 9.0;
        let p = AgentParams {
            alpha: 0.0,
            ..AgentParams::default()
        };
        let before = q.clone();
        q_update(&mut q, 0, Action::Right, 10.0, 1, &p).unwrap();
        assert_eq!(q, before);
    }

    #[test]
    fn non_finite_reward_is_rejected() {
        let mut q = QTable::new(2);
        let err =
            q_update(&mut q, 0, Action::Up, f64::NAN, 1, &AgentParams::default()).unwrap_err();
        assert!(matches!(err, BrnesError::Numeric(_)));
    }

    #[test]
    fn visit_counting() {
        let mut ledger = AgentLedger::new(10, 100_000, 10_000);
        ledger.record_visit(3);
        ledger.record_visit(3);
        assert_eq!(ledger.visits(3), 2);
        assert_eq!(ledger.visits(4), 0);
        for _ in 0..148 {
            ledger.record_visit(3);
        }
        let p = AgentParams::default();
        assert!(p.tau <= ledger.visits(3));
    }

    #[test]
    fn budgets_never_go_negative() {
        let mut ledger = AgentLedger::new(1, 1, 0);
        assert!(ledger.spend_advisee());
        assert!(!ledger.spend_advisee());
        assert!(!ledger.spend_advisor());
        assert_eq!((ledger.advisee_budget, ledger.advisor_budget), (0, 0));
    }

    #[test]
    fn params_validation() {
        assert!(AgentParams::default().validate().is_ok());
        assert!(AgentParams {
            alpha: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(AgentParams {
            w: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(AgentParams {
            tau: 10,
            tau_prime: 5,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn csv_snapshot_layout() {
        let mut q = QTable::new(2);
        q.row_mut(1)[1] = 0.5;
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "state,left,right,up,down\n0,0,0,0,0\n1,0,0.5,0,0\n"
        );
    }

    fn qvec() -> impl Strategy<Value = QVector> {
        prop::array::uniform4(-20.0f64..20.0)
    }

    proptest! {
        #[test]
        fn update_contracts_toward_target(row in qvec(), next in qvec(), a in 0usize..4, r in -2.0f64..10.0, alpha in 0.01f64..1.0, gamma in 0.0f64..1.0) {
            let mut q = QTable::new(2);
            *q.row_mut(0) = row;
            *q.row_mut(1) = next;
            let p = params(alpha, gamma);
            let target = r + gamma * max_value(&next);
            let old = row[a];
            let new = q_update(&mut q, 0, Action::ALL[a], r, 1, &p).unwrap();
            let lhs = (new - target).abs();
            let rhs = (1.0 - alpha) * (old - target).abs();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
        }

        #[test]
        fn greedy_returns_a_maximiser(row in qvec(), seed in any::<u64>()) {
            let a = select_action(&row, 0.0, &mut seeded(seed));
            prop_assert_eq!(row[a.index()], max_value(&row));
        }

        #[test]
        fn greedy_set_is_scale_invariant(row in qvec(), c in 0.01f64..100.0) {
            let scaled = row.map(|v| v * c);
            let set = |v: &QVector| { let m = max_value(v); v.iter().map(|x| *x == m).collect::<Vec<_>>() };
            // scaling can merge values that differ by less than an ulp; skip near-ties
            let mut sorted = row;
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            prop_assume!(sorted[0] == sorted[1] || sorted[0] - sorted[1] > 1e-9);
            prop_assert_eq!(set(&row), set(&scaled));
        }
    }
}
