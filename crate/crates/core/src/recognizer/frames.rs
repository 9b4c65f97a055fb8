//! Sliding-window frame extraction over line images.

use serde::{Deserialize, Serialize};

use crate::corpus::Image;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub window_width: usize,
    pub stride: usize,
    pub cell_height: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            window_width: 8,
            stride: 4,
            cell_height: 16,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride < 1 || self.window_width < self.stride {
            return Err(Error::data(format!(
                "frame config needs window_width >= stride >= 1, got {} and {}",
                self.window_width, self.stride
            )));
        }
        if self.cell_height == 0 {
            return Err(Error::data("cell_height must be positive"));
        }
        Ok(())
    }

    /// Flattened frame dimension: window_width * cell_height pixels.
    pub fn input_dim(&self) -> usize {
        self.window_width * self.cell_height
    }

    /// Frames for an image `width` pixels wide:
    /// T = floor((W_padded - window) / stride) + 1, W_padded = max(W, window).
    pub fn frame_count(&self, width: usize) -> usize {
        let padded = width.max(self.window_width);
        (padded - self.window_width) / self.stride + 1
    }
}

/// Frame sequence: `t` rows of `dim` values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frames {
    pub t: usize,
    pub dim: usize,
    data: Vec<f64>,
}

impl Frames {
    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub(crate) fn from_raw(t: usize, dim: usize, data: Vec<f64>) -> Frames {
        debug_assert_eq!(data.len(), t * dim);
        Frames { t, dim, data }
    }
}

/// Slices the image into overlapping windows. Images narrower than the
/// window are right-padded with zeros; frames are flattened row-major
/// (window row, then window column).
pub fn extract_frames(image: &Image, cfg: &FrameConfig) -> Result<Frames> {
    cfg.validate()?;
    if image.height != cfg.cell_height {
        return Err(Error::data(format!(
            "image height {} does not match frame cell_height {}",
            image.height, cfg.cell_height
        )));
    }
    let t = cfg.frame_count(image.width);
    let dim = cfg.input_dim();
    let mut data = vec![0.0f64; t * dim];
    for frame in 0..t {
        let start_col = frame * cfg.stride;
        for r in 0..cfg.cell_height {
            for wc in 0..cfg.window_width {
                let c = start_col + wc;
                if c < image.width {
                    data[frame * dim + r * cfg.window_width + wc] = image.get(r, c);
                }
            }
        }
    }
    Ok(Frames { t, dim, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(width: usize) -> Image {
        let mut img = Image::zeros(16, width);
        for (i, p) in img.pixels.iter_mut().enumerate() {
            *p = ((i % 7) as f64) / 7.0;
        }
        img
    }

    #[test]
    fn frame_count_formula() {
        let cfg = FrameConfig::default();
        assert_eq!(cfg.frame_count(8), 1);
        assert_eq!(cfg.frame_count(16), 3);
        assert_eq!(cfg.frame_count(5), 1, "narrow images pad up to the window");
        assert_eq!(cfg.frame_count(64), 15);
    }

    #[test]
    fn narrow_images_are_right_padded_with_zeros() {
        let cfg = FrameConfig::default();
        let img = image(5);
        let frames = extract_frames(&img, &cfg).unwrap();
        assert_eq!(frames.t, 1);
        let row = frames.row(0);
        for r in 0..16 {
            for wc in 0..8 {
                let v = row[r * 8 + wc];
                if wc >= 5 {
                    assert_eq!(v, 0.0, "padded column {wc} must be zero");
                } else {
                    assert_eq!(v, img.get(r, wc));
                }
            }
        }
    }

    #[test]
    fn windows_overlap_by_stride() {
        let cfg = FrameConfig::default();
        let img = image(16);
        let frames = extract_frames(&img, &cfg).unwrap();
        assert_eq!(frames.t, 3);
        // Frame 1 starts at column 4: its first window column equals
        // the image's column 4.
        assert_eq!(frames.row(1)[0], img.get(0, 4));
        assert_eq!(frames.row(2)[0], img.get(0, 8));
    }

    #[test]
    fn height_mismatch_is_an_error() {
        let cfg = FrameConfig::default();
        let img = Image::zeros(8, 10);
        assert!(extract_frames(&img, &cfg).is_err());
    }

    #[test]
    fn bad_configs_are_rejected() {
        let cfg = FrameConfig {
            window_width: 2,
            stride: 4,
            cell_height: 16,
        };
        assert!(cfg.validate().is_err());
        let cfg = FrameConfig {
            window_width: 8,
            stride: 0,
            cell_height: 16,
        };
        assert!(cfg.validate().is_err());
    }
}
