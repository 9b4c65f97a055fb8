//! Glyph atlas: one small bitmap per (style, symbol).
//!
//! Each symbol owns a stroke skeleton drawn from a per-symbol stream; each
//! style renders that skeleton with its own offset and endpoint jitter.
//! Styles therefore share a recognizable core shape per symbol (keeping the
//! task learnable) while remaining visually distinct (keeping styles
//! separable).

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::stream;

use super::vocab::Vocabulary;

/// Minimum fraction of differing pixels between two symbols of one style.
/// Generation rejects and resamples colliding glyphs; 10% keeps V=26, S<=8
/// learnable.
const MIN_SYMBOL_DIFF: f64 = 0.10;

/// Minimum fraction of differing pixels for the same symbol across styles.
/// Looser than the symbol threshold: cross-style variants deliberately share
/// a skeleton, and style transforms add further separation at render time.
const MIN_STYLE_DIFF: f64 = 0.05;

const MAX_ATTEMPTS: usize = 500;

/// Attempt index from which a decorative serif stroke is added to escape
/// persistent collisions.
const SERIF_FROM_ATTEMPT: usize = 20;

type Stroke = ((i64, i64), (i64, i64));

#[derive(Debug, Clone)]
pub struct GlyphAtlas {
    pub cell_height: usize,
    pub cell_width: usize,
    pub seed: u64,
    vocab_size: usize,
    /// style_id -> per-symbol bitmaps (row-major, intensities in {0, 1}).
    bitmaps: BTreeMap<u32, Vec<Vec<f64>>>,
}

impl GlyphAtlas {
    /// Builds bitmaps for every (style, symbol) pair. Deterministic in
    /// (seed, style set, vocabulary): rebuilding is bit-identical.
    pub fn build(
        vocab: &Vocabulary,
        style_ids: &[u32],
        cell_height: usize,
        cell_width: usize,
        seed: u64,
    ) -> Result<Self> {
        if cell_height < 6 || cell_width < 4 {
            return Err(Error::data(format!(
                "glyph cell {cell_height}x{cell_width} too small to draw in"
            )));
        }
        let skeletons: Vec<Vec<Stroke>> = (0..vocab.len())
            .map(|sym| {
                let mut rng = stream(seed, "skeleton", &[sym as u64]);
                draw_skeleton(&mut rng, cell_height, cell_width)
            })
            .collect();

        let mut bitmaps: BTreeMap<u32, Vec<Vec<f64>>> = BTreeMap::new();
        for &style in style_ids {
            let mut style_glyphs: Vec<Vec<f64>> = Vec::with_capacity(vocab.len());
            for sym in 0..vocab.len() {
                let glyph = accept_glyph(
                    &skeletons[sym],
                    seed,
                    style,
                    sym,
                    cell_height,
                    cell_width,
                    &style_glyphs,
                    bitmaps.values().map(|g| &g[sym]),
                )?;
                style_glyphs.push(glyph);
            }
            bitmaps.insert(style, style_glyphs);
        }
        Ok(GlyphAtlas {
            cell_height,
            cell_width,
            seed,
            vocab_size: vocab.len(),
            bitmaps,
        })
    }

    /// Bitmap for (style, symbol index), row-major. Both must exist; the
    /// atlas is always built for the full style set of a corpus.
    pub fn glyph(&self, style_id: u32, symbol_index: usize) -> &[f64] {
        assert!(symbol_index < self.vocab_size, "symbol index out of range");
        &self
            .bitmaps
            .get(&style_id)
            .unwrap_or_else(|| panic!("style {style_id} not in atlas"))[symbol_index]
    }

    pub fn styles(&self) -> impl Iterator<Item = u32> + '_ {
        self.bitmaps.keys().copied()
    }
}

/// Draws the accepted glyph for one (style, symbol): retries with fresh
/// jitter until it clears the collision thresholds against earlier symbols
/// of this style and the same symbol in earlier styles.
#[allow(clippy::too_many_arguments)]
fn accept_glyph<'a>(
    skeleton: &[Stroke],
    seed: u64,
    style: u32,
    sym: usize,
    h: usize,
    w: usize,
    earlier_symbols: &[Vec<f64>],
    same_symbol_other_styles: impl Iterator<Item = &'a Vec<f64>> + Clone,
) -> Result<Vec<f64>> {
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream(seed, "glyph", &[u64::from(style), sym as u64, attempt as u64]);
        let glyph = render_skeleton(skeleton, &mut rng, h, w, attempt >= SERIF_FROM_ATTEMPT);
        let clashes_symbol = earlier_symbols
            .iter()
            .any(|g| pixel_diff_fraction(&glyph, g) < MIN_SYMBOL_DIFF);
        let clashes_style = same_symbol_other_styles
            .clone()
            .any(|g| pixel_diff_fraction(&glyph, g) < MIN_STYLE_DIFF);
        if !clashes_symbol && !clashes_style {
            return Ok(glyph);
        }
    }
    Err(Error::data(format!(
        "no distinct glyph for style {style}, symbol {sym} after {MAX_ATTEMPTS} attempts; \
         vocabulary too large for the cell size"
    )))
}

fn pixel_diff_fraction(a: &[f64], b: &[f64]) -> f64 {
    let differing = a
        .iter()
        .zip(b)
        .filter(|(x, y)| (**x - **y).abs() > 0.5)
        .count();
    differing as f64 / a.len() as f64
}

/// 3 or 4 strokes, each spanning at least 4 pixels, endpoints inset one
/// pixel from the cell border so dilation and shear keep most ink inside.
fn draw_skeleton(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Vec<Stroke> {
    let n = rng.gen_range(3..=4usize);
    (0..n)
        .map(|_| {
            // Redraw short strokes: spans under 4 px contribute too little
            // ink to keep symbols distinguishable.
            for _ in 0..100 {
                let r0 = rng.gen_range(1..=(h as i64 - 2));
                let c0 = rng.gen_range(1..=(w as i64 - 2));
                let r1 = rng.gen_range(1..=(h as i64 - 2));
                let c1 = rng.gen_range(1..=(w as i64 - 2));
                if (r1 - r0).abs().max((c1 - c0).abs()) >= 4 {
                    return ((r0, c0), (r1, c1));
                }
            }
            ((1, 1), (h as i64 - 2, w as i64 - 2))
        })
        .collect()
}

/// Plots the skeleton shifted by a whole-glyph offset (rows -2..=2, cols
/// -1..=1) with each endpoint further jittered by -1..=1. `serif` adds one
/// short decorative stroke, used only when plain jitter keeps colliding.
fn render_skeleton(
    skeleton: &[Stroke],
    rng: &mut ChaCha8Rng,
    h: usize,
    w: usize,
    serif: bool,
) -> Vec<f64> {
    let mut cell = vec![0.0f64; h * w];
    let global_dr = rng.gen_range(-2..=2i64);
    let global_dc = rng.gen_range(-1..=1i64);
    for &((r0, c0), (r1, c1)) in skeleton {
        let jr0 = (r0 + global_dr + rng.gen_range(-1..=1i64)).clamp(0, h as i64 - 1);
        let jc0 = (c0 + global_dc + rng.gen_range(-1..=1i64)).clamp(0, w as i64 - 1);
        let jr1 = (r1 + global_dr + rng.gen_range(-1..=1i64)).clamp(0, h as i64 - 1);
        let jc1 = (c1 + global_dc + rng.gen_range(-1..=1i64)).clamp(0, w as i64 - 1);
        plot_line(&mut cell, w, (jr0, jc0), (jr1, jc1));
    }
    if serif {
        let r = rng.gen_range(1..=(h as i64 - 2));
        let c = rng.gen_range(1..=(w as i64 - 2));
        let (dr, dc) = [(0, 1), (0, -1), (1, 0), (-1, 0)][rng.gen_range(0..4usize)];
        let r1 = (r + 2 * dr).clamp(0, h as i64 - 1);
        let c1 = (c + 2 * dc).clamp(0, w as i64 - 1);
        plot_line(&mut cell, w, (r, c), (r1, c1));
    }
    cell
}

fn plot_line(cell: &mut [f64], w: usize, (r0, c0): (i64, i64), (r1, c1): (i64, i64)) {
    let steps = (r1 - r0).abs().max((c1 - c0).abs()) + 1;
    for s in 0..steps {
        let t = if steps == 1 {
            0.0
        } else {
            s as f64 / (steps - 1) as f64
        };
        let r = (r0 as f64 + t * (r1 - r0) as f64).round() as i64;
        let c = (c0 as f64 + t * (c1 - c0) as f64).round() as i64;
        cell[r as usize * w + c as usize] = 1.0;
    }
}
