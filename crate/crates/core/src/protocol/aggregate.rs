//! Best-advice averaging and weighted aggregation into the advisee's table.

use crate::agent::QVector;
use crate::env::N_ACTIONS;
use crate::error::{BrnesError, Result};

/// Per-action mean of the received advice vectors.
pub fn best_advice(responses: &[QVector]) -> Result<QVector> {
    if responses.is_empty() {
        return Err(BrnesError::Contract(
            "best_advice needs at least one response".into(),
        ));
    }
    let mut sum = [0.0; N_ACTIONS];
    for r in responses {
        for (s, v) in sum.iter_mut().zip(r) {
            *s += v;
        }
    }
    let k = responses.len() as f64;
    Ok(sum.map(|s| s / k))
}

/// `w·own + (1 - w)·advice`, element-wise.
pub fn weighted_aggregate(own: &QVector, advice: &QVector, w: f64) -> QVector {
    let mut out = [0.0; N_ACTIONS];
    for i in 0..N_ACTIONS {
        out[i] = w * own[i] + (1.0 - w) * advice[i];
    }
    out
}
