//! Nested subsets for quantity scaling.

use crate::error::{Error, Result};
use crate::rng::{shuffle, stream};

/// One seeded shuffle of the pool, cut at each requested size. Smaller
/// subsets are strict prefixes of larger ones, so scaling studies vary only
/// quantity, never composition.
pub fn quantity_subsets(pool: &[String], sizes: &[usize], seed: u64) -> Result<Vec<Vec<String>>> {
    if sizes.is_empty() {
        return Err(Error::data("no subset sizes given"));
    }
    for w in sizes.windows(2) {
        if w[1] < w[0] {
            return Err(Error::data(format!(
                "subset sizes must be non-decreasing, got {} after {}",
                w[1], w[0]
            )));
        }
    }
    let largest = *sizes.last().expect("non-empty");
    if largest > pool.len() {
        return Err(Error::data(format!(
            "largest subset ({largest}) exceeds pool ({})",
            pool.len()
        )));
    }
    if sizes[0] == 0 {
        return Err(Error::data("subset sizes must be >= 1"));
    }
    let mut order: Vec<String> = pool.to_vec();
    order.sort_unstable();
    shuffle(&mut order, &mut stream(seed, "quantity", &[]));
    Ok(sizes.iter().map(|&s| order[..s].to_vec()).collect())
}
