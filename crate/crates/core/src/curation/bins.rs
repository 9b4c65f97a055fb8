//! Difficulty bins over confidence scores and ratio-targeted sampling.

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusManifest;
use crate::error::{Error, Result};
use crate::rng::{shuffle, stream};

use super::apportion::{capped_apportion, largest_remainder};

/// Confidence cut points. Bins follow the half-open convention
/// [0, b0), [b0, b1), ..., [b_last, 1.0] with the top bin closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub boundaries: Vec<f64>,
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec {
            boundaries: vec![0.80, 0.90, 0.95, 0.97],
        }
    }
}

impl BinSpec {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        let spec = BinSpec { boundaries };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.boundaries.is_empty() {
            return Err(Error::data("bin boundaries must be non-empty"));
        }
        for w in self.boundaries.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::data(format!(
                    "bin boundaries must be strictly ascending, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if self.boundaries[0] <= 0.0 || *self.boundaries.last().unwrap() >= 1.0 {
            return Err(Error::data("bin boundaries must lie strictly inside (0, 1)"));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// Bin index for a confidence in [0, 1].
    pub fn bin_of(&self, c: f64) -> usize {
        self.boundaries.iter().filter(|&&b| b <= c).count()
    }

    /// Human-readable interval, e.g. "0.95-0.97"; used as a condition label.
    pub fn label(&self, bin: usize) -> String {
        let lo = if bin == 0 { 0.0 } else { self.boundaries[bin - 1] };
        let hi = if bin == self.boundaries.len() {
            1.0
        } else {
            self.boundaries[bin]
        };
        format!("{lo:.2}-{hi:.2}")
    }
}

/// Per-bin target fractions, aligned with a BinSpec's bins in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRatios {
    pub fractions: Vec<f64>,
}

impl Default for BinRatios {
    fn default() -> Self {
        BinRatios {
            fractions: vec![0.032, 0.104, 0.251, 0.485, 0.128],
        }
    }
}

impl BinRatios {
    pub fn validate(&self, spec: &BinSpec) -> Result<()> {
        if self.fractions.len() != spec.n_bins() {
            return Err(Error::data(format!(
                "{} ratio entries for {} bins",
                self.fractions.len(),
                spec.n_bins()
            )));
        }
        if self.fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::data("bin ratios must be finite and >= 0"));
        }
        let total: f64 = self.fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::data(format!("bin ratios sum to {total}, expected 1")));
        }
        Ok(())
    }
}

/// Sample ids partitioned by confidence bin. Ids are kept sorted so results
/// depend on the id set, never on manifest record order.
#[derive(Debug, Clone)]
pub struct BinnedSamples {
    pub spec: BinSpec,
    pub ids: Vec<Vec<String>>,
    /// Fraction of samples per bin; sums to 1 over a non-empty manifest.
    pub histogram: Vec<f64>,
}

impl BinnedSamples {
    pub fn total(&self) -> usize {
        self.ids.iter().map(Vec::len).sum()
    }
}

pub fn bin_by_confidence(manifest: &CorpusManifest, spec: &BinSpec) -> Result<BinnedSamples> {
    spec.validate()?;
    let mut ids: Vec<Vec<String>> = vec![Vec::new(); spec.n_bins()];
    for rec in &manifest.records {
        let c = rec
            .confidence
            .ok_or_else(|| Error::data(format!("record {} is unscored", rec.id)))?;
        ids[spec.bin_of(c)].push(rec.id.clone());
    }
    for bin in ids.iter_mut() {
        bin.sort_unstable();
    }
    let n = manifest.records.len().max(1);
    let histogram = ids.iter().map(|b| b.len() as f64 / n as f64).collect();
    Ok(BinnedSamples {
        spec: spec.clone(),
        ids,
        histogram,
    })
}

/// Draws exactly `n` ids honoring the per-bin target ratios. A bin holding
/// fewer samples than its quota yields what it has; the deficit moves to the
/// other bins in proportion to their ratios (logged, never silent).
pub fn sample_by_ratios(
    binned: &BinnedSamples,
    ratios: &BinRatios,
    n: usize,
    seed: u64,
) -> Result<Vec<String>> {
    ratios.validate(&binned.spec)?;
    if n == 0 {
        return Err(Error::data("sample size must be >= 1"));
    }
    let caps: Vec<usize> = binned.ids.iter().map(Vec::len).collect();
    let quotas = largest_remainder(n, &ratios.fractions)?;
    let take = capped_apportion(n, &ratios.fractions, &caps)?;
    let mut out = Vec::with_capacity(n);
    for (bin, take_b) in take.iter().enumerate() {
        if *take_b < quotas[bin] {
            log::warn!(
                "bin {} ({}) short by {} of its quota {}; redistributed",
                bin,
                binned.spec.label(bin),
                quotas[bin] - take_b,
                quotas[bin]
            );
        }
        let mut order = binned.ids[bin].clone();
        shuffle(&mut order, &mut stream(seed, "bin-draw", &[bin as u64]));
        out.extend(order.into_iter().take(*take_b));
    }
    Ok(out)
}
