//! Python bindings: the protocol formulas, GRR perturbation and whole
//! scenario runs.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use brnes::agent::QVector;
use brnes::harness::output::{emit_csv, EmitOptions};
use brnes::harness::{run_scenario, AttackKind, RunOutput, Scale, ScenarioConfig, Variant};
use brnes::protocol::{self, PrivacyParams};
use brnes::rng::seeded;
use brnes::BrnesError;

fn py_err(e: BrnesError) -> PyErr {
    match e {
        BrnesError::Io { .. } | BrnesError::Csv { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyfunction]
#[pyo3(signature = (visits, budget, budget_total, tau = 100, tau_prime = 100_000))]
fn ehc(visits: u64, budget: u64, budget_total: u64, tau: u64, tau_prime: u64) -> PyResult<f64> {
    if budget_total == 0 || budget > budget_total {
        return Err(PyValueError::new_err(
            "need 0 <= budget <= budget_total, budget_total > 0",
        ));
    }
    Ok(protocol::ehc(visits, budget, budget_total, tau, tau_prime))
}

#[pyfunction]
fn egc(advisor_visits: u64, advisee_visits: u64, budget: u64, budget_total: u64) -> PyResult<f64> {
    if budget_total == 0 || budget > budget_total {
        return Err(PyValueError::new_err(
            "need 0 <= budget <= budget_total, budget_total > 0",
        ));
    }
    Ok(protocol::egc(
        advisor_visits,
        advisee_visits,
        budget,
        budget_total,
    ))
}

#[pyfunction]
fn zone_radius(height: usize, width: usize, n_agents: usize) -> PyResult<f64> {
    protocol::zone_radius(height, width, n_agents).map_err(py_err)
}

#[pyfunction]
fn best_advice(responses: Vec<QVector>) -> PyResult<QVector> {
    protocol::best_advice(&responses).map_err(py_err)
}

#[pyfunction]
fn weighted_aggregate(own: QVector, advice: QVector, w: f64) -> PyResult<QVector> {
    if !(0.0..=1.0).contains(&w) {
        return Err(PyValueError::new_err(format!("weight {w} outside [0, 1]")));
    }
    Ok(protocol::weighted_aggregate(&own, &advice, w))
}

#[pyfunction]
fn keep_probability(epsilon: f64) -> PyResult<f64> {
    Ok(PrivacyParams::new(epsilon)
        .map_err(py_err)?
        .keep_probability())
}

/// Perturbs `q` `count` times with a fresh generator seeded by `seed`.
#[pyfunction]
#[pyo3(signature = (q, epsilon, seed = 0, count = 1))]
fn grr_perturb(q: QVector, epsilon: f64, seed: u64, count: usize) -> PyResult<Vec<QVector>> {
    let privacy = PrivacyParams::new(epsilon).map_err(py_err)?;
    let mut rng = seeded(seed);
    Ok((0..count)
        .map(|_| protocol::grr_perturb(&q, &privacy, &mut rng))
        .collect())
}

#[pyclass(module = "pybrnes")]
struct Scenario {
    cfg: ScenarioConfig,
}

#[pymethods]
impl Scenario {
    #[new]
    #[pyo3(signature = (scale = "medium", variant = "brnes", attack = "none", attackers = 0.0, epsilon = 1.0, episodes = 1000, seed = 0, no_ldp = false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        scale: &str,
        variant: &str,
        attack: &str,
        attackers: f64,
        epsilon: f64,
        episodes: usize,
        seed: u64,
        no_ldp: bool,
    ) -> PyResult<Self> {
        let mut cfg = ScenarioConfig::new(
            Scale::parse(scale).map_err(py_err)?,
            Variant::parse(variant).map_err(py_err)?,
        )
        .with_attack(AttackKind::parse(attack).map_err(py_err)?, attackers)
        .with_epsilon(epsilon)
        .with_episodes(episodes)
        .with_seed(seed);
        cfg.options.disable_ldp = no_ldp;
        cfg.validate().map_err(py_err)?;
        Ok(Self { cfg })
    }

    /// The fully resolved configuration as JSON.
    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.cfg).expect("config serialises")
    }

    fn run(&self, py: Python<'_>) -> PyResult<RunResult> {
        let cfg = self.cfg.clone();
        let out = py.detach(move || run_scenario(&cfg)).map_err(py_err)?;
        Ok(RunResult { out })
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario({:?}, {}, {:?} x {}, eps={}, episodes={}, seed={})",
            self.cfg.scale,
            self.cfg.variant.name(),
            self.cfg.attacker_kind,
            self.cfg.attacker_fraction,
            self.cfg.privacy_epsilon,
            self.cfg.episodes,
            self.cfg.master_seed
        )
    }
}

#[pyclass(module = "pybrnes")]
struct RunResult {
    out: RunOutput,
}

#[pymethods]
impl RunResult {
    /// Per-episode columns: sg, reward, delta_q_mean, tg_cumulative,
    /// advice_requests, advice_responses.
    fn metrics(&self) -> HashMap<&'static str, Vec<f64>> {
        let m = &self.out.metrics;
        let col =
            |f: fn(&brnes::harness::MetricsRecord) -> f64| m.iter().map(f).collect::<Vec<f64>>();
        HashMap::from([
            ("sg", col(|r| r.sg)),
            ("reward", col(|r| r.reward)),
            ("delta_q_mean", col(|r| r.delta_q_mean)),
            ("tg_cumulative", col(|r| r.tg_cumulative)),
            ("advice_requests", col(|r| r.advice_requests as f64)),
            ("advice_responses", col(|r| r.advice_responses as f64)),
        ])
    }

    /// Visit counts as rows of the grid.
    fn heatmap(&self) -> Vec<Vec<u64>> {
        let (h, w, _, _) = self.out.config.scale.dimensions();
        let mut grid = vec![vec![0; w]; h];
        for r in &self.out.heatmap {
            grid[r.y][r.x] = r.visit_count;
        }
        grid
    }

    /// `(episode, attacker_id, success_rate_pct)` for inference runs.
    fn inference(&self) -> Vec<(usize, usize, f64)> {
        self.out
            .inference
            .iter()
            .map(|r| (r.episode, r.attacker_id, r.success_rate_pct))
            .collect()
    }

    fn roles(&self) -> Vec<String> {
        self.out
            .roles
            .iter()
            .map(|r| format!("{r:?}").to_lowercase())
            .collect()
    }

    fn q_table(&self, agent: usize) -> PyResult<Vec<QVector>> {
        let q = self
            .out
            .q_tables
            .get(agent)
            .ok_or_else(|| PyValueError::new_err(format!("no agent {agent}")))?;
        Ok((0..q.n_states()).map(|s| *q.row(s)).collect())
    }

    #[pyo3(signature = (out_dir, timing = true))]
    fn write_csv(&self, out_dir: PathBuf, timing: bool) -> PyResult<Vec<PathBuf>> {
        emit_csv(
            &self.out,
            &out_dir,
            EmitOptions {
                timing,
                q_tables: false,
            },
        )
        .map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.out.metrics.len()
    }
}

#[pymodule]
fn pybrnes(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(ehc, m)?)?;
    m.add_function(wrap_pyfunction!(egc, m)?)?;
    m.add_function(wrap_pyfunction!(zone_radius, m)?)?;
    m.add_function(wrap_pyfunction!(best_advice, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(keep_probability, m)?)?;
    m.add_function(wrap_pyfunction!(grr_perturb, m)?)?;
    m.add_class::<Scenario>()?;
    m.add_class::<RunResult>()?;
    Ok(())
}
