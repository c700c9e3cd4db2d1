//! Per-episode records and the series statistics used to judge runs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub episode: usize,
    /// Mean steps-to-goal over agents; agents that never arrive count the cap.
    pub sg: f64,
    /// Mean total episode reward over agents.
    pub reward: f64,
    /// Mean change of the acted-on Q entry over the episode's transitions.
    pub delta_q_mean: f64,
    /// Wall-clock seconds since the run started.
    pub tg_cumulative: f64,
    pub advice_requests: u64,
    pub advice_responses: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeatmapRecord {
    pub x: usize,
    pub y: usize,
    pub visit_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRecord {
    pub episode: usize,
    pub attacker_id: usize,
    pub queries_issued: u64,
    pub qualifying_states: usize,
    pub success_rate_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdviceLogRecord {
    pub episode: usize,
    pub step: usize,
    pub advisee: usize,
    pub advisor: usize,
    pub state: usize,
    pub gave_advice: bool,
    pub perturbed: bool,
}

/// Trailing moving average; early points average what is available.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Smoothed ΔQ series.
pub fn convergence_series(records: &[MetricsRecord], window: usize) -> Vec<f64> {
    let raw: Vec<f64> = records.iter().map(|r| r.delta_q_mean).collect();
    moving_average(&raw, window)
}

/// First index from which `|series|` stays below `threshold` to the end.
pub fn settles_below(series: &[f64], threshold: f64) -> Option<usize> {
    let last_bad = series.iter().rposition(|v| v.abs() >= threshold);
    match last_bad {
        None if series.is_empty() => None,
        None => Some(0),
        Some(i) if i + 1 < series.len() => Some(i + 1),
        Some(_) => None,
    }
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values.iter().copied());
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

/// Mean SG over episodes with 1-based indices in `first..=last`.
pub fn mean_sg(records: &[MetricsRecord], first: usize, last: usize) -> f64 {
    mean(
        records
            .iter()
            .filter(|r| (first..=last).contains(&(r.episode + 1)))
            .map(|r| r.sg),
    )
}

pub fn mean_reward(records: &[MetricsRecord], first: usize, last: usize) -> f64 {
    mean(
        records
            .iter()
            .filter(|r| (first..=last).contains(&(r.episode + 1)))
            .map(|r| r.reward),
    )
}

/// Mean over the last `n` records of a field.
pub fn tail_mean(
    records: &[MetricsRecord],
    n: usize,
    field: impl Fn(&MetricsRecord) -> f64,
) -> f64 {
    let start = records.len().saturating_sub(n);
    mean(records[start..].iter().map(field))
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut r = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (ranks(a), ranks(b));
    let (ma, mb) = (mean(ra.iter().copied()), mean(rb.iter().copied()));
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - ma) * (y - mb);
        da += (x - ma).powi(2);
        db += (y - mb).powi(2);
    }
    num / (da * db).sqrt()
}

/// First episode whose smoothed SG is at or below `plateau`, with the
/// wall-clock time at that point. Runs that never get there report their
/// total time.
pub fn time_to_plateau(
    records: &[MetricsRecord],
    plateau: f64,
    window: usize,
) -> (Option<usize>, f64) {
    let sg: Vec<f64> = records.iter().map(|r| r.sg).collect();
    let smooth = moving_average(&sg, window);
    match smooth.iter().position(|v| *v <= plateau) {
        Some(i) => (Some(i), records[i].tg_cumulative),
        None => (None, records.last().map_or(0.0, |r| r.tg_cumulative)),
    }
}
