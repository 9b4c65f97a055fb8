//! Per-sample feature vectors for diversity clustering.
//!
//! Two pluggable extractors: the recognizer's own hidden layer (mean over
//! frames, the default) and a model-free downsampled-pixel fallback. Both
//! are deterministic functions of the image, so embedding files are stable
//! across reruns and job counts.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{read_pgm, CorpusManifest, Image};
use crate::error::{Error, Result};

use super::frames::{extract_frames, FrameConfig};
use super::model::ModelParams;
use super::par::par_map;

/// Pixel extractor pools the image to this fixed grid (rows x cols).
const POOL_ROWS: usize = 8;
const POOL_COLS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedKind {
    /// Mean over frames of the model's post-relu hidden activations;
    /// dimension = the model's hidden size.
    Hidden,
    /// Image average-pooled to 8x16 and flattened row-major; dimension 128.
    /// Needs no model.
    #[default]
    Pixel,
}

impl EmbedKind {
    pub fn parse(s: &str) -> Result<EmbedKind> {
        match s {
            "hidden" => Ok(EmbedKind::Hidden),
            "pixel" => Ok(EmbedKind::Pixel),
            other => Err(Error::usage(format!(
                "unknown embedding kind {other:?} (expected hidden or pixel)"
            ))),
        }
    }
}

/// One vector per manifest record, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub dim: usize,
    pub data: Vec<f32>,
}

impl Embeddings {
    pub fn count(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn pixel_embedding(image: &Image) -> Vec<f32> {
    let mut out = Vec::with_capacity(POOL_ROWS * POOL_COLS);
    for r in 0..POOL_ROWS {
        let r_lo = r * image.height / POOL_ROWS;
        let r_hi = (((r + 1) * image.height / POOL_ROWS).max(r_lo + 1)).min(image.height);
        for c in 0..POOL_COLS {
            let c_lo = c * image.width / POOL_COLS;
            let c_hi = (((c + 1) * image.width / POOL_COLS).max(c_lo + 1)).min(image.width);
            let mut sum = 0.0f64;
            for rr in r_lo..r_hi {
                for cc in c_lo..c_hi {
                    sum += image.get(rr, cc);
                }
            }
            out.push((sum / ((r_hi - r_lo) * (c_hi - c_lo)) as f64) as f32);
        }
    }
    out
}

fn hidden_embedding(
    params: &ModelParams,
    image: &Image,
    frame_cfg: &FrameConfig,
) -> Result<Vec<f32>> {
    let frames = extract_frames(image, frame_cfg)?;
    let pass = params.forward_cached(&frames)?;
    let mut mean = vec![0.0f64; params.hidden];
    for t in 0..pass.hidden.t {
        for (m, &h) in mean.iter_mut().zip(pass.hidden.row(t)) {
            *m += h;
        }
    }
    let inv = 1.0 / pass.hidden.t as f64;
    Ok(mean.into_iter().map(|m| (m * inv) as f32).collect())
}

/// Embeds every record of the manifest, in manifest order. `params` is
/// required for the hidden extractor and ignored by the pixel one.
pub fn embed_dataset(
    params: Option<&ModelParams>,
    manifest: &CorpusManifest,
    kind: EmbedKind,
    frame_cfg: &FrameConfig,
    jobs: usize,
) -> Result<Embeddings> {
    let dim = match kind {
        EmbedKind::Pixel => POOL_ROWS * POOL_COLS,
        EmbedKind::Hidden => {
            let p = params.ok_or_else(|| {
                Error::data("hidden embeddings need a model; pass a checkpoint or use pixel")
            })?;
            p.validate()?;
            frame_cfg.validate()?;
            if p.vocab != manifest.header.vocabulary {
                return Err(Error::data(
                    "model vocabulary does not match manifest vocabulary",
                ));
            }
            if p.input_dim != frame_cfg.input_dim() {
                return Err(Error::data(format!(
                    "model input dim {} does not match frame config dim {}",
                    p.input_dim,
                    frame_cfg.input_dim()
                )));
            }
            p.hidden
        }
    };
    let rows = par_map(manifest.records.len(), jobs, |i| {
        let image = read_pgm(&manifest.resolve_image_path(&manifest.records[i]))?;
        match kind {
            EmbedKind::Pixel => Ok(pixel_embedding(&image)),
            EmbedKind::Hidden => hidden_embedding(params.unwrap(), &image, frame_cfg),
        }
    })?;
    let mut data = Vec::with_capacity(rows.len() * dim);
    for row in rows {
        debug_assert_eq!(row.len(), dim);
        data.extend_from_slice(&row);
    }
    Ok(Embeddings { dim, data })
}

/// Binary layout: u32 count, u32 dim, then count*dim little-endian f32.
pub fn write_embeddings(path: &Path, emb: &Embeddings) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + emb.data.len() * 4);
    bytes.extend_from_slice(&(emb.count() as u32).to_le_bytes());
    bytes.extend_from_slice(&(emb.dim as u32).to_le_bytes());
    for v in &emb.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: &Path) -> Result<Embeddings> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(Error::data(format!(
            "embedding file {} too short for its header",
            path.display()
        )));
    }
    let count = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let want = 8 + count * dim * 4;
    if bytes.len() != want {
        return Err(Error::data(format!(
            "embedding file {}: expected {want} bytes for {count}x{dim}, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let data = bytes[8..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(Embeddings { dim, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, GenerateSpec, StyleSpec, Vocabulary};

    fn fixture() -> (tempfile::TempDir, CorpusManifest, ModelParams) {
        let tmp = tempfile::tempdir().unwrap();
        let vocab = Vocabulary::new("abc").unwrap();
        let spec = GenerateSpec::new(10, StyleSpec::spread(2), vocab.clone(), 6);
        let manifest = generate_corpus(&spec, tmp.path(), None).unwrap();
        let params = ModelParams::init(&vocab, &FrameConfig::default(), 24, 2);
        (tmp, manifest, params)
    }

    #[test]
    fn dimensions_follow_the_extractor() {
        let (_tmp, manifest, params) = fixture();
        let cfg = FrameConfig::default();
        let hidden = embed_dataset(Some(&params), &manifest, EmbedKind::Hidden, &cfg, 1).unwrap();
        assert_eq!(hidden.dim, 24);
        assert_eq!(hidden.count(), manifest.records.len());
        let pixel = embed_dataset(None, &manifest, EmbedKind::Pixel, &cfg, 1).unwrap();
        assert_eq!(pixel.dim, 128);
        assert_eq!(pixel.count(), manifest.records.len());
    }

    #[test]
    fn identical_images_embed_identically() {
        let (_tmp, mut manifest, params) = fixture();
        // Point the second record at the first record's image.
        manifest.records[1].image_path = manifest.records[0].image_path.clone();
        let cfg = FrameConfig::default();
        for (kind, p) in [(EmbedKind::Hidden, Some(&params)), (EmbedKind::Pixel, None)] {
            let emb = embed_dataset(p, &manifest, kind, &cfg, 1).unwrap();
            assert_eq!(emb.vector(0), emb.vector(1), "{kind:?}");
            assert_ne!(emb.vector(0), emb.vector(2), "{kind:?}");
        }
    }

    #[test]
    fn job_count_does_not_change_bytes() {
        let (_tmp, manifest, params) = fixture();
        let cfg = FrameConfig::default();
        let a = embed_dataset(Some(&params), &manifest, EmbedKind::Hidden, &cfg, 1).unwrap();
        let b = embed_dataset(Some(&params), &manifest, EmbedKind::Hidden, &cfg, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hidden_embedding_matches_a_direct_forward_pass() {
        let (_tmp, manifest, params) = fixture();
        let cfg = FrameConfig::default();
        let emb = embed_dataset(Some(&params), &manifest, EmbedKind::Hidden, &cfg, 1).unwrap();
        let image = read_pgm(&manifest.resolve_image_path(&manifest.records[0])).unwrap();
        let frames = extract_frames(&image, &cfg).unwrap();
        let pass = params.forward_cached(&frames).unwrap();
        for (j, &got) in emb.vector(0).iter().enumerate() {
            let mean: f64 = (0..pass.hidden.t).map(|t| pass.hidden.row(t)[j]).sum::<f64>()
                / pass.hidden.t as f64;
            assert!((got as f64 - mean).abs() < 1e-6);
        }
    }

    #[test]
    fn pixel_pooling_of_a_flat_image_is_flat() {
        let mut img = Image::zeros(16, 24);
        for p in img.pixels.iter_mut() {
            *p = 0.375;
        }
        let v = pixel_embedding(&img);
        assert_eq!(v.len(), 128);
        assert!(v.iter().all(|&x| (x - 0.375).abs() < 1e-7));
    }

    #[test]
    fn narrow_images_still_fill_every_bucket() {
        // Width 8 is narrower than the 16 pooling columns.
        let mut img = Image::zeros(16, 8);
        img.set(0, 0, 1.0);
        let v = pixel_embedding(&img);
        assert_eq!(v.len(), 128);
        assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn hidden_kind_requires_a_model_and_matching_vocab() {
        let (_tmp, manifest, _) = fixture();
        let cfg = FrameConfig::default();
        assert!(embed_dataset(None, &manifest, EmbedKind::Hidden, &cfg, 1).is_err());
        let other = ModelParams::init(&Vocabulary::new("xy").unwrap(), &cfg, 8, 0);
        let err = embed_dataset(Some(&other), &manifest, EmbedKind::Hidden, &cfg, 1).unwrap_err();
        assert!(err.to_string().contains("vocabulary"), "{err}");
    }

    #[test]
    fn embeddings_round_trip_exactly() {
        let tmp = tempfile::tempdir().unwrap();
        let emb = Embeddings {
            dim: 3,
            data: vec![0.5, -1.25, 3.0e-7, 0.0, 1.0, f32::MIN_POSITIVE],
        };
        let path = tmp.path().join("e.bin");
        write_embeddings(&path, &emb).unwrap();
        let back = read_embeddings(&path).unwrap();
        assert_eq!(emb, back);
        assert_eq!(back.count(), 2);

        std::fs::write(&path, [1, 0, 0, 0, 9, 0, 0, 0, 1, 2]).unwrap();
        assert!(read_embeddings(&path).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(EmbedKind::parse("hidden").unwrap(), EmbedKind::Hidden);
        assert_eq!(EmbedKind::parse("pixel").unwrap(), EmbedKind::Pixel);
        assert!(EmbedKind::parse("clip").is_err());
    }
}
