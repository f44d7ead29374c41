use serde::{Deserialize, Serialize};

/// Family-wise significance level.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolmAdjusted {
    pub raw: f64,
    pub adjusted: f64,
    pub significant: bool,
}

/// Holm step-down adjustment. Results come back in input order.
///
/// With `p_(1) ≤ … ≤ p_(m)` the adjusted value at rank `k` is
/// `max_{j ≤ k} min(1, (m − j + 1) · p_(j))`.
pub fn holm_correct(p_values: &[f64]) -> Vec<HolmAdjusted> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    // stable: ties keep input order
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * p_values[i]).min(1.0);
        running = running.max(scaled);
        adjusted[i] = running;
    }
    p_values
        .iter()
        .zip(adjusted)
        .map(|(&raw, adjusted)| HolmAdjusted { raw, adjusted, significant: adjusted < ALPHA })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adjusted(p: &[f64]) -> Vec<f64> {
        holm_correct(p).iter().map(|h| h.adjusted).collect()
    }

    #[test]
    fn single_value_is_unchanged() {
        assert_eq!(adjusted(&[0.02]), vec![0.02]);
    }

    #[test]
    fn hand_stepped_example() {
        assert_eq!(adjusted(&[0.01, 0.04, 0.03]), vec![0.03, 0.06, 0.06]);
        let flags: Vec<bool> = holm_correct(&[0.01, 0.04, 0.03]).iter().map(|h| h.significant).collect();
        assert_eq!(flags, vec![true, false, false]);
    }

    #[test]
    fn all_ones() {
        let r = holm_correct(&[1.0, 1.0, 1.0, 1.0]);
        assert!(r.iter().all(|h| h.adjusted == 1.0 && !h.significant));
    }

    #[test]
    fn empty_input() {
        assert!(holm_correct(&[]).is_empty());
    }
}
