//! Text-line rendering: glyph concatenation plus the style transform chain.
//!
//! Pipeline order is fixed and observable in stored corpora:
//! concatenate -> shear -> dilate -> contrast -> invert -> noise -> clip.

use rand_chacha::ChaCha8Rng;

use crate::rng::gaussian;

use super::atlas::GlyphAtlas;
use super::image::Image;
use super::style::StyleSpec;

/// Renders `label` (as symbol indices) in the given style. `sigma` is the
/// additive Gaussian noise std for this sample; `rng` is consumed only for
/// noise (row-major, one draw per pixel), and only when `sigma > 0`.
///
/// The image is `atlas.cell_height` tall and `label.len() * atlas.cell_width`
/// wide; shear displaces rows inside that canvas rather than growing it.
pub fn render_line(
    atlas: &GlyphAtlas,
    style: &StyleSpec,
    label: &[usize],
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Image {
    assert!(!label.is_empty(), "labels are non-empty by contract");
    let h = atlas.cell_height;
    let w_cell = atlas.cell_width;
    let width = label.len() * w_cell;

    let mut img = Image::zeros(h, width);
    for (pos, &sym) in label.iter().enumerate() {
        let glyph = atlas.glyph(style.style_id, sym);
        for r in 0..h {
            for c in 0..w_cell {
                img.set(r, pos * w_cell + c, glyph[r * w_cell + c]);
            }
        }
    }

    if style.shear != 0.0 {
        img = shear_rows(&img, style.shear);
    }
    if style.thickness == 1 {
        img = dilate(&img);
    }
    if style.contrast != 1.0 {
        for p in &mut img.pixels {
            *p *= style.contrast;
        }
    }
    if style.invert {
        for p in &mut img.pixels {
            *p = 1.0 - *p;
        }
    }
    if sigma > 0.0 {
        for p in &mut img.pixels {
            *p = (*p + sigma * gaussian(rng)).clamp(0.0, 1.0);
        }
    }
    img
}

/// Shifts each row horizontally by round(shear * (row - middle)); pixels
/// pushed past the border are dropped, exposed pixels become background.
fn shear_rows(src: &Image, shear: f64) -> Image {
    let mut dst = Image::zeros(src.height, src.width);
    let middle = (src.height as f64 - 1.0) / 2.0;
    for r in 0..src.height {
        let offset = (shear * (r as f64 - middle)).round() as i64;
        for c in 0..src.width {
            let sc = c as i64 - offset;
            if (0..src.width as i64).contains(&sc) {
                dst.set(r, c, src.get(r, sc as usize));
            }
        }
    }
    dst
}

/// 3x3 max filter (dilation with Chebyshev radius 1).
fn dilate(src: &Image) -> Image {
    let mut dst = Image::zeros(src.height, src.width);
    for r in 0..src.height {
        for c in 0..src.width {
            let mut m = 0.0f64;
            for dr in -1i64..=1 {
               for dc in -1i64..=1 {
                    let rr = r as i64 + dr;
                    let cc = c as i64 + dc;
                    if (0..src.height as i64).contains(&rr) && (0..src.width as i64).contains(&cc) {
                        m = m.max(src.get(rr as usize, cc as usize));
                    }
                }
            }
            dst.set(r, c, m);
        }
    }
    dst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::vocab::Vocabulary;
    use crate::rng::stream;

    fn setup() -> (GlyphAtlas, Vec<StyleSpec>) {
        let v = Vocabulary::new("abcd").unwrap();
        let styles = StyleSpec::spread(4);
        let ids: Vec<u32> = styles.iter().map(|s| s.style_id).collect();
        let atlas = GlyphAtlas::build(&v, &ids, 16, 8, 7).unwrap();
        (atlas, styles)
    }

    #[test]
    fn width_is_label_length_times_cell_width() {
        let (atlas, styles) = setup();
        let mut rng = stream(0, "t", &[]);
        let img = render_line(&atlas, &styles[0], &[0, 1, 2], 0.0, &mut rng);
        assert_eq!(img.width, 24);
        assert_eq!(img.height, 16);
    }

    #[test]
    fn pixels_stay_in_unit_range_even_under_heavy_noise() {
        let (atlas, styles) = setup();
        for sigma in [0.0, 0.25, 0.5] {
            let mut rng = stream(1, "t", &[]);
            let img = render_line(&atlas, &styles[1], &[3, 0], sigma, &mut rng);
            assert!(
                img.pixels.iter().all(|&p| (0.0..=1.0).contains(&p)),
                "sigma {sigma} leaked out of range"
            );
        }
    }

    #[test]
    fn zero_noise_render_is_deterministic_without_consuming_rng() {
        let (atlas, styles) = setup();
        let mut rng = stream(2, "t", &[]);
        let before = rand::Rng::gen::<u64>(&mut rng.clone());
        let a = render_line(&atlas, &styles[2], &[1], 0.0, &mut rng);
        let after = rand::Rng::gen::<u64>(&mut rng);
        assert_eq!(before, after, "sigma=0 must not consume noise draws");
        let mut rng2 = stream(2, "t", &[]);
        let b = render_line(&atlas, &styles[2], &[1], 0.0, &mut rng2);
        assert_eq!(a, b);
    }

    #[test]
    fn styles_are_separable_at_zero_noise() {
        let (atlas, styles) = setup();
        let label = [0usize, 1, 2, 3];
        let renders: Vec<Image> = styles
            .iter()
            .map(|s| render_line(&atlas, s, &label, 0.0, &mut stream(3, "t", &[])))
            .collect();
        for i in 0..renders.len() {
            for j in 0..i {
                let d = renders[i].mean_abs_diff(&renders[j]);
                assert!(
                    d > 0.02,
                    "styles {i} and {j} nearly identical (mean abs diff {d:.4})"
                );
            }
        }
    }

    #[test]
    fn invert_flips_background_to_bright() {
        let (atlas, styles) = setup();
        let mut rng = stream(4, "t", &[]);
        let inv = &styles[3];
        assert!(inv.invert, "spread style 3 is the inverted one");
        let img = render_line(&atlas, inv, &[0], 0.0, &mut rng);
        let mean = img.pixels.iter().sum::<f64>() / img.pixels.len() as f64;
        assert!(mean > 0.5, "inverted style should be mostly bright, got {mean}");
    }

    #[test]
    fn dilation_only_grows_ink() {
        let (atlas, styles) = setup();
        let mut plain = styles[0].clone();
        plain.thickness = 0;
        let mut thick = styles[0].clone();
        thick.thickness = 1;
        let mut rng = stream(5, "t", &[]);
        let a = render_line(&atlas, &plain, &[2, 2], 0.0, &mut rng);
        let b = render_line(&atlas, &thick, &[2, 2], 0.0, &mut rng);
        for (x, y) in a.pixels.iter().zip(&b.pixels) {
            assert!(y >= x, "dilation must not erase ink");
        }
        assert!(b.pixels.iter().sum::<f64>() > a.pixels.iter().sum::<f64>());
    }
}
