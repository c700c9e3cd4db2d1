//! Generalized randomized response over the entries of one Q-vector.
//!
//! Each entry is released independently: it is kept with probability
//! `p = e^(ε/n) / (d + e^(ε/n) - 1)` and otherwise replaced by the value at
//! one of the other `d - 1` positions, chosen uniformly. Every entry is
//! therefore `ε/n`-LDP and the whole vector `ε`-LDP by sequential
//! composition.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::QVector;
use crate::env::N_ACTIONS;
use crate::error::{config_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub n_sensitivity: usize,
    pub domain_size: usize,
}

impl PrivacyParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        let p = Self {
            epsilon,
            n_sensitivity: N_ACTIONS,
            domain_size: N_ACTIONS,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(config_err(format!(
                "privacy epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.n_sensitivity != N_ACTIONS || self.domain_size != N_ACTIONS {
            return Err(config_err(
                "sensitivity and domain size must equal the action count",
            ));
        }
        Ok(())
    }

    fn scaled(&self) -> f64 {
        (self.epsilon / self.n_sensitivity as f64).exp()
    }

    pub fn keep_probability(&self) -> f64 {
        let e = self.scaled();
        e / (self.domain_size as f64 + e - 1.0)
    }

    /// Probability of emitting one specific alternative.
    pub fn swap_probability(&self) -> f64 {
        1.0 / (self.domain_size as f64 + self.scaled() - 1.0)
    }
}

pub fn grr_perturb<R: Rng + ?Sized>(q: &QVector, privacy: &PrivacyParams, rng: &mut R) -> QVector {
    if q.iter().all(|v| *v == q[0]) {
        return *q;
    }
    let keep = privacy.keep_probability();
    let mut out = *q;
    for (i, slot) in out.iter_mut().enumerate() {
        if rng.random::<f64>() <= keep {
            continue;
        }
        // uniform over the other positions
        let mut j = rng.random_range(0..N_ACTIONS - 1);
        if j >= i {
            j += 1;
        }
        *slot = q[j];
    }
    out
}
