//! Grayscale images and binary PGM (P5) I/O.
//!
//! Pixels live in [0, 1] in memory and are quantized to one byte on disk via
//! round(p * 255). PGM was chosen over anything fancier because it is
//! bit-exact, diffable with standard tools, and needs no dependencies.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grayscale image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn zeros(height: usize, width: usize) -> Self {
        Image {
            height,
            width,
            pixels: vec![0.0; height * width],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * self.width + col] = value;
    }

    /// Mean absolute per-pixel difference; images must share dimensions.
    pub fn mean_abs_diff(&self, other: &Image) -> f64 {
        assert_eq!(self.height, other.height);
        assert_eq!(self.width, other.width);
        let total: f64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b).abs())
            .sum();
        total / self.pixels.len() as f64
    }

    /// Quantizes to the byte grid the file format uses. Round-trips exactly
    /// through PGM once an image has been quantized.
    pub fn quantize(&mut self) {
        for p in &mut self.pixels {
            *p = f64::from(quantize_byte(*p)) / 255.0;
        }
    }
}

#[inline]
fn quantize_byte(p: f64) -> u8 {
    (p * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Writes a binary PGM (P5, maxval 255).
pub fn write_pgm(path: &Path, image: &Image) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    write!(w, "P5\n{} {}\n255\n", image.width, image.height).map_err(io)?;
    let bytes: Vec<u8> = image.pixels.iter().map(|&p| quantize_byte(p)).collect();
    w.write_all(&bytes).map_err(io)?;
    w.flush().map_err(io)
}

/// Reads a binary PGM written by [`write_pgm`] (or any P5 file with
/// maxval 255 and `#` comments).
pub fn read_pgm(path: &Path) -> Result<Image> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;

    let bad = |msg: &str| Error::data(format!("{}: {msg}", path.display()));
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Option<String> {
        // Skip whitespace and # comments between header tokens.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (pos > start).then(|| String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if token(&bytes).as_deref() != Some("P5") {
        return Err(bad("not a binary PGM (missing P5 magic)"));
    }
    let width: usize = token(&bytes)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad width"))?;
    let height: usize = token(&bytes)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad height"))?;
    let maxval: usize = token(&bytes)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad maxval"))?;
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    // Exactly one whitespace byte separates the header from pixel data.
    pos += 1;
    let need = width * height;
    if bytes.len() < pos + need {
        return Err(bad("truncated pixel data"));
    }
    let pixels = bytes[pos..pos + need]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    Ok(Image {
        height,
        width,
        pixels,
    })
}
