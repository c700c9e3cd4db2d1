//! Visit- and budget-based confidence for seeking (EHC) and giving (EGC)
//! advice.

fn budget_ratio(budget: u64, budget_total: u64) -> f64 {
    debug_assert!(budget_total > 0 && budget <= budget_total);
    (budget as f64 / budget_total as f64).sqrt()
}

/// Harvesting confidence `P^a`: `sqrt(B/B_tot) / sqrt(n)` while
/// `tau <= n <= tau_prime`, zero otherwise.
pub fn ehc(visits: u64, budget: u64, budget_total: u64, tau: u64, tau_prime: u64) -> f64 {
    if visits == 0 || visits < tau || visits > tau_prime {
        return 0.0;
    }
    budget_ratio(budget, budget_total) / (visits as f64).sqrt()
}

/// An advisee asks for advice iff `0 < P^a < kappa`.
pub fn seeks_advice(p_a: f64, kappa: f64) -> bool {
    p_a > 0.0 && p_a < kappa
}

/// Giving confidence `P^g`: `1 - sqrt(B/B_tot) / sqrt(n_advisor)` when the
/// advisor has strictly more visits than the advisee, zero otherwise.
pub fn egc(advisor_visits: u64, advisee_visits: u64, budget: u64, budget_total: u64) -> f64 {
    if advisor_visits <= advisee_visits {
        return 0.0;
    }
    1.0 - budget_ratio(budget, budget_total) / (advisor_visits as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ehc_examples() {
        assert_eq!(ehc(50, 100_000, 100_000, 100, 100_000), 0.0);
        let p = ehc(100, 100_000, 100_000, 100, 100_000);
        assert!((p - 0.1).abs() < 1e-15);
        assert!(!seeks_advice(p, 0.1));
        let p = ehc(400, 25_000, 100_000, 100, 100_000);
        assert!((p - 0.025).abs() < 1e-15);
        assert!(seeks_advice(p, 0.1));
        assert_eq!(ehc(200_000, 100_000, 100_000, 100, 100_000), 0.0);
        assert_eq!(ehc(0, 100_000, 100_000, 0, 100_000), 0.0);
    }

    #[test]
    fn drained_advisee_budget_disables_seeking() {
        let p = ehc(500, 0, 100_000, 100, 100_000);
        assert_eq!(p, 0.0);
        assert!(!seeks_advice(p, 0.1));
    }

    #[test]
    fn egc_examples() {
        assert!((egc(4, 2, 10_000, 10_000) - 0.5).abs() < 1e-15);
        assert_eq!(egc(2, 5, 10_000, 10_000), 0.0);
        assert!((egc(10_000, 0, 2_500, 10_000) - 0.995).abs() < 1e-15);
        assert_eq!(egc(1, 0, 10_000, 10_000), 0.0);
    }
}
