//! Visual style parameters applied on top of raw glyph bitmaps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One rendering style. A corpus draws each sample's style round-robin, so S
/// styles partition the corpus into S visually coherent families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleSpec {
    pub style_id: u32,
    /// Horizontal slant in pixels per row, in [-0.3, 0.3].
    pub shear: f64,
    /// Dilation radius in pixels, 0 or 1 (Chebyshev neighborhood).
    pub thickness: u8,
    /// Default additive Gaussian noise std in [0, 0.5]. A generation-time
    /// difficulty profile may override this per style with a sigma range.
    pub noise_sigma: f64,
    /// Multiplicative intensity factor in [0.3, 1.0].
    pub contrast: f64,
    /// Swap ink and background after contrast.
    pub invert: bool,
}

impl StyleSpec {
    pub fn validate(&self) -> Result<()> {
        let style = self.style_id;
        if !(-0.3..=0.3).contains(&self.shear) {
            return Err(Error::data(format!(
                "style {style}: shear {} outside [-0.3, 0.3]",
                self.shear
            )));
        }
        if self.thickness > 1 {
            return Err(Error::data(format!(
                "style {style}: thickness {} outside {{0, 1}}",
                self.thickness
            )));
        }
        if !(0.0..=0.5).contains(&self.noise_sigma) {
            return Err(Error::data(format!(
                "style {style}: noise_sigma {} outside [0, 0.5]",
                self.noise_sigma
            )));
        }
        if !(0.3..=1.0).contains(&self.contrast) {
            return Err(Error::data(format!(
                "style {style}: contrast {} outside [0.3, 1.0]",
                self.contrast
            )));
        }
        Ok(())
    }

    /// A deterministic lattice of `count` styles spanning the parameter
    /// ranges: shear sweeps -0.3..0.3, contrast sweeps 1.0..0.3, thickness
    /// alternates, and every fourth style is inverted. Used by the CLI where
    /// styles are requested by count rather than spelled out.
    pub fn spread(count: usize) -> Vec<StyleSpec> {
        assert!(count >= 1, "at least one style");
        let span = count.saturating_sub(1).max(1) as f64;
        (0..count)
            .map(|i| {
                let t = i as f64 / span;
                StyleSpec {
                    style_id: i as u32,
                    shear: if count == 1 { 0.0 } else { -0.3 + 0.6 * t },
                    thickness: (i % 2) as u8,
                    noise_sigma: 0.0,
                    contrast: if count == 1 { 1.0 } else { 1.0 - 0.7 * t },
                    invert: i % 4 == 3,
                }
            })
            .collect()
    }
}
