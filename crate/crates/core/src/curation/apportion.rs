//! Largest-remainder apportionment of integer quotas from fractional shares.

use crate::error::{Error, Result};

/// Splits `n` units across weights by largest remainder: floor the exact
/// shares, then hand the leftover units to the largest fractional parts
/// (ties to the lower index). Quotas always sum to exactly `n`.
pub fn largest_remainder(n: usize, weights: &[f64]) -> Result<Vec<usize>> {
    if weights.is_empty() {
        return Err(Error::data("apportionment needs at least one weight"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::data("apportionment weights must be finite and >= 0"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::data("apportionment weights sum to zero"));
    }
    let mut quotas = Vec::with_capacity(weights.len());
    let mut fracs = Vec::with_capacity(weights.len());
    let mut assigned = 0usize;
    for &w in weights {
        let share = n as f64 * w / total;
        let q = share.floor() as usize;
        quotas.push(q);
        fracs.push(share - q as f64);
        assigned += q;
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| fracs[b].total_cmp(&fracs[a]).then(a.cmp(&b)));
    // 0 <= n - assigned < len, since every fractional part is < 1.
    for &i in order.iter().take(n - assigned) {
        quotas[i] += 1;
    }
    Ok(quotas)
}

/// Apportionment with per-slot capacity caps: any quota a slot cannot absorb
/// is redistributed over the slots with capacity left, proportionally to
/// their weights (equal shares when those weights are all zero). Errors when
/// the caps cannot absorb `n` at all.
pub fn capped_apportion(n: usize, weights: &[f64], caps: &[usize]) -> Result<Vec<usize>> {
    debug_assert_eq!(weights.len(), caps.len());
    if caps.iter().sum::<usize>() < n {
        return Err(Error::data(format!(
            "cannot draw {n} items from a pool of {}",
            caps.iter().sum::<usize>()
        )));
    }
    let mut take: Vec<usize> = largest_remainder(n, weights)?
        .into_iter()
        .zip(caps)
        .map(|(q, &c)| q.min(c))
        .collect();
    loop {
        let deficit = n - take.iter().sum::<usize>();
        if deficit == 0 {
            return Ok(take);
        }
        let open: Vec<usize> = (0..caps.len()).filter(|&i| take[i] < caps[i]).collect();
        let mut w: Vec<f64> = open.iter().map(|&i| weights[i]).collect();
        if w.iter().sum::<f64>() <= 0.0 {
            w = vec![1.0; open.len()];
        }
        for (slot, extra) in open.iter().zip(largest_remainder(deficit, &w)?) {
            take[*slot] = (take[*slot] + extra).min(caps[*slot]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotas_sum_to_n_and_match_the_reference_split() {
        let ratios = [0.032, 0.104, 0.251, 0.485, 0.128];
        let q = largest_remainder(1000, &ratios).unwrap();
        assert_eq!(q, vec![32, 104, 251, 485, 128]);
        assert_eq!(q.iter().sum::<usize>(), 1000);
    }

    #[test]
    fn equal_weights_differ_by_at_most_one() {
        let q = largest_remainder(100, &[1.0; 7]).unwrap();
        assert_eq!(q.iter().sum::<usize>(), 100);
        let (lo, hi) = (q.iter().min().unwrap(), q.iter().max().unwrap());
        assert!(hi - lo <= 1, "{q:?}");
        // Ties go to lower indices.
        assert_eq!(q, vec![15, 15, 14, 14, 14, 14, 14]);
    }

    #[test]
    fn remainder_units_follow_fractional_parts() {
        // Shares: 2.5, 1.25, 1.25 -> floors 2,1,1; remainder unit to index 0.
        let q = largest_remainder(5, &[0.5, 0.25, 0.25]).unwrap();
        assert_eq!(q, vec![3, 1, 1]);
    }

    #[test]
    fn invalid_weights_are_rejected() {
        assert!(largest_remainder(5, &[]).is_err());
        assert!(largest_remainder(5, &[0.0, 0.0]).is_err());
        assert!(largest_remainder(5, &[1.0, -0.1]).is_err());
        assert!(largest_remainder(5, &[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn caps_redistribute_to_open_slots() {
        // Target 10 with 60/40 split, but slot 0 holds at most 2.
        let q = capped_apportion(10, &[0.6, 0.4], &[2, 100]).unwrap();
        assert_eq!(q, vec![2, 8]);
        // A zero-cap slot's whole quota moves.
        let q = capped_apportion(10, &[0.5, 0.4, 0.1], &[0, 10, 10]).unwrap();
        assert_eq!(q.iter().sum::<usize>(), 10);
        assert_eq!(q[0], 0);
    }

    #[test]
    fn zero_weight_open_slots_share_equally() {
        // All target mass sits in the capped slot; the rest split the spill.
        let q = capped_apportion(9, &[1.0, 0.0, 0.0], &[3, 5, 5]).unwrap();
        assert_eq!(q, vec![3, 3, 3]);
    }

    #[test]
    fn insufficient_capacity_errors() {
        let err = capped_apportion(10, &[1.0, 1.0], &[4, 5]).unwrap_err();
        assert!(err.to_string().contains("pool of 9"), "{err}");
    }

    #[test]
    fn exact_fit_consumes_every_slot() {
        let q = capped_apportion(9, &[1.0, 1.0], &[4, 5]).unwrap();
        assert_eq!(q, vec![4, 5]);
    }
}
