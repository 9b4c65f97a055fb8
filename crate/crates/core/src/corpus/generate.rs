//! Corpus generation: draws labels, renders images, writes the corpus dir.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provenance::Provenance;
use crate::rng::stream;

use super::atlas::GlyphAtlas;
use super::image::{write_pgm, Image};
use super::manifest::{
    write_manifest, CorpusManifest, ManifestHeader, SampleRecord, Split,
};
use super::render::render_line;
use super::style::StyleSpec;
use super::vocab::Vocabulary;
use super::{CELL_HEIGHT, CELL_WIDTH, L_MAX};

/// Everything that determines a corpus. Two equal specs produce
/// byte-identical corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSpec {
    pub n: usize,
    pub styles: Vec<StyleSpec>,
    pub vocab: Vocabulary,
    /// Inclusive label length range, within [1, L_MAX].
    pub label_len: (usize, usize),
    /// Per-style noise sigma range; styles absent here use their own
    /// `noise_sigma` as a degenerate range. This is the corpus's true
    /// difficulty knob, independent of visual style.
    pub difficulty_profile: BTreeMap<u32, (f64, f64)>,
    /// Fraction of samples marked `split=eval` (every k-th sample).
    pub eval_fraction: f64,
    pub seed: u64,
    pub cell_height: usize,
    pub cell_width: usize,
}

impl GenerateSpec {
    pub fn new(n: usize, styles: Vec<StyleSpec>, vocab: Vocabulary, seed: u64) -> Self {
        GenerateSpec {
            n,
            styles,
            vocab,
            label_len: (1, L_MAX),
            difficulty_profile: BTreeMap::new(),
            eval_fraction: 0.0,
            seed,
            cell_height: CELL_HEIGHT,
            cell_width: CELL_WIDTH,
        }
    }

    /// Sets one sigma range for every style.
    pub fn with_sigma_range(mut self, lo: f64, hi: f64) -> Self {
        self.difficulty_profile = self
            .styles
            .iter()
            .map(|s| (s.style_id, (lo, hi)))
            .collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::data("corpus size must be at least 1"));
        }
        if self.styles.is_empty() {
            return Err(Error::data("at least one style is required"));
        }
        let (lo, hi) = self.label_len;
        if lo < 1 || hi > L_MAX || lo > hi {
            return Err(Error::data(format!(
                "label_len ({lo}, {hi}) outside 1..={L_MAX} or empty"
            )));
        }
        let mut ids = std::collections::BTreeSet::new();
        for s in &self.styles {
            s.validate()?;
            if !ids.insert(s.style_id) {
                return Err(Error::data(format!("duplicate style id {}", s.style_id)));
            }
        }
        for (&sid, &(a, b)) in &self.difficulty_profile {
            if !ids.contains(&sid) {
                return Err(Error::data(format!(
                    "difficulty profile names unknown style {sid}"
                )));
            }
            if !(0.0..=0.5).contains(&a) || !(0.0..=0.5).contains(&b) || a > b {
                return Err(Error::data(format!(
                    "difficulty profile for style {sid}: range ({a}, {b}) invalid"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.eval_fraction) {
            return Err(Error::data(format!(
                "eval_fraction {} outside [0, 1]",
                self.eval_fraction
            )));
        }
        Ok(())
    }

    fn style_for(&self, index: usize) -> &StyleSpec {
        &self.styles[index % self.styles.len()]
    }

    fn sigma_range(&self, style: &StyleSpec) -> (f64, f64) {
        self.difficulty_profile
            .get(&style.style_id)
            .copied()
            .unwrap_or((style.noise_sigma, style.noise_sigma))
    }

    fn split_for(&self, index: usize) -> Split {
        if self.eval_fraction <= 0.0 {
            return Split::Train;
        }
        let every = (1.0 / self.eval_fraction).round().max(1.0) as usize;
        if index % every == every - 1 {
            Split::Eval
        } else {
            Split::Train
        }
    }
}

/// The label/style/noise draw for one sample (everything but pixels).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDraw {
    pub id: String,
    pub label: String,
    pub style_id: u32,
    pub sigma: f64,
    pub split: Split,
}

/// Regenerates sample `index` of a spec from scratch. This is the purity
/// contract: the result matches the stored corpus file bit for bit (after
/// quantization), no matter which other samples were generated around it.
///
/// Draw order from the per-sample stream is frozen: label length, label
/// characters, sigma, then noise (row-major, only when sigma > 0).
pub fn render_for_index(
    spec: &GenerateSpec,
    atlas: &GlyphAtlas,
    index: usize,
) -> (SampleDraw, Image) {
    let style = spec.style_for(index);
    let mut rng = stream(spec.seed, "corpus", &[index as u64]);

    let (len_lo, len_hi) = spec.label_len;
    let len = rng.gen_range(len_lo..=len_hi);
    let label_indices: Vec<usize> = (0..len).map(|_| rng.gen_range(0..spec.vocab.len())).collect();
    let (lo, hi) = spec.sigma_range(style);
    let sigma = lo + rng.gen::<f64>() * (hi - lo);

    let image = render_line(atlas, style, &label_indices, sigma, &mut rng);
    let label: String = label_indices
        .iter()
        .map(|&i| spec.vocab.symbol(i).expect("indices drawn in range"))
        .collect();
    let draw = SampleDraw {
        id: format!("s{index:07}"),
        label,
        style_id: style.style_id,
        sigma,
        split: spec.split_for(index),
    };
    (draw, image)
}

/// Generates the corpus directory: `img/*.pgm`, `manifest.jsonl`, and a
/// provenance block when one is supplied.
pub fn generate_corpus(
    spec: &GenerateSpec,
    out_dir: &Path,
    provenance: Option<Provenance>,
) -> Result<CorpusManifest> {
    spec.validate()?;
    let img_dir = out_dir.join("img");
    std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;

    let style_ids: Vec<u32> = spec.styles.iter().map(|s| s.style_id).collect();
    let atlas = GlyphAtlas::build(
        &spec.vocab,
        &style_ids,
        spec.cell_height,
        spec.cell_width,
        spec.seed,
    )?;

    let mut records = Vec::with_capacity(spec.n);
    for index in 0..spec.n {
        let (draw, image) = render_for_index(spec, &atlas, index);
        let rel = format!("img/{}.pgm", draw.id);
        write_pgm(&out_dir.join(&rel), &image)?;
        records.push(SampleRecord {
            id: draw.id,
            image_path: rel,
            label: draw.label,
            style_id: draw.style_id,
            noise_sigma: draw.sigma,
            corrupted: false,
            split: draw.split,
            confidence: None,
        });
    }

    let mut header = ManifestHeader::new(
        spec.vocab.clone(),
        spec.cell_height,
        spec.cell_width,
        spec.seed,
    );
    header.provenance = provenance.clone();
    let manifest = CorpusManifest::new(header, records, out_dir.to_path_buf());
    write_manifest(&manifest, &out_dir.join("manifest.jsonl"))?;
    if let Some(p) = &provenance {
        p.write_into(out_dir)?;
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::image::read_pgm;

    fn spec(n: usize) -> GenerateSpec {
        GenerateSpec::new(
            n,
            StyleSpec::spread(4),
            Vocabulary::new("abcdef").unwrap(),
            7,
        )
    }

    #[test]
    fn round_robin_balances_styles_exactly() {
        let tmp = tempfile::tempdir().unwrap();
        let m = generate_corpus(&spec(100), tmp.path(), None).unwrap();
        let mut counts = BTreeMap::new();
        for r in &m.records {
            *counts.entry(r.style_id).or_insert(0usize) += 1;
        }
        assert_eq!(counts.values().copied().collect::<Vec<_>>(), vec![25, 25, 25, 25]);
    }

    #[test]
    fn generation_is_byte_identical_across_runs() {
        let tmp_a = tempfile::tempdir().unwrap();
        let tmp_b = tempfile::tempdir().unwrap();
        let s = spec(20).with_sigma_range(0.0, 0.3);
        generate_corpus(&s, tmp_a.path(), None).unwrap();
        generate_corpus(&s, tmp_b.path(), None).unwrap();
        let ma = std::fs::read(tmp_a.path().join("manifest.jsonl")).unwrap();
        let mb = std::fs::read(tmp_b.path().join("manifest.jsonl")).unwrap();
        assert_eq!(ma, mb, "manifests differ across identical runs");
        for i in 0..20 {
            let name = format!("img/s{i:07}.pgm");
            let ia = std::fs::read(tmp_a.path().join(&name)).unwrap();
            let ib = std::fs::read(tmp_b.path().join(&name)).unwrap();
            assert_eq!(ia, ib, "{name} differs across identical runs");
        }
    }

    #[test]
    fn single_sample_regeneration_matches_stored_file() {
        let tmp = tempfile::tempdir().unwrap();
        let s = spec(12).with_sigma_range(0.1, 0.4);
        let m = generate_corpus(&s, tmp.path(), None).unwrap();
        let ids: Vec<u32> = s.styles.iter().map(|st| st.style_id).collect();
        let atlas = GlyphAtlas::build(&s.vocab, &ids, s.cell_height, s.cell_width, s.seed).unwrap();
        for index in [0usize, 5, 11] {
            let (draw, mut image) = render_for_index(&s, &atlas, index);
            image.quantize();
            let stored = read_pgm(&m.resolve_image_path(&m.records[index])).unwrap();
            assert_eq!(image, stored, "sample {index} not reproducible in isolation");
            assert_eq!(draw.label, m.records[index].label);
        }
    }

    #[test]
    fn width_tracks_label_length() {
        let tmp = tempfile::tempdir().unwrap();
        let mut s = spec(1);
        s.label_len = (3, 3);
        let m = generate_corpus(&s, tmp.path(), None).unwrap();
        let img = read_pgm(&m.resolve_image_path(&m.records[0])).unwrap();
        assert_eq!(img.width, 24, "3 glyphs at cell width 8");
        assert_eq!(m.records[0].label.chars().count(), 3);
    }

    #[test]
    fn eval_fraction_marks_every_kth_sample() {
        let tmp = tempfile::tempdir().unwrap();
        let mut s = spec(20);
        s.eval_fraction = 0.2;
        let m = generate_corpus(&s, tmp.path(), None).unwrap();
        let evals: Vec<usize> = m
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == Split::Eval)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(evals, vec![4, 9, 14, 19]);
    }

    #[test]
    fn labels_use_only_vocabulary_symbols_and_lengths_in_range() {
        let tmp = tempfile::tempdir().unwrap();
        let mut s = spec(60);
        s.label_len = (2, 5);
        let m = generate_corpus(&s, tmp.path(), None).unwrap();
        for r in &m.records {
            let len = r.label.chars().count();
            assert!((2..=5).contains(&len), "label {:?} length out of range", r.label);
            assert!(s.vocab.encode(&r.label).is_ok());
            assert!(!r.corrupted);
        }
    }

    #[test]
    fn validation_catches_bad_specs() {
        let mut s = spec(10);
        s.label_len = (0, 3);
        assert!(s.validate().is_err());
        let mut s = spec(10);
        s.label_len = (1, 9);
        assert!(s.validate().is_err());
        let mut s = spec(10);
        s.styles[1].style_id = 0;
        assert!(s.validate().is_err());
        let mut s = spec(10);
        s.difficulty_profile.insert(99, (0.0, 0.1));
        assert!(s.validate().is_err());
        let mut s = spec(0);
        s.n = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn sigma_is_drawn_inside_the_profile_range() {
        let tmp = tempfile::tempdir().unwrap();
        let s = spec(40).with_sigma_range(0.2, 0.3);
        let m = generate_corpus(&s, tmp.path(), None).unwrap();
        for r in &m.records {
            assert!(
                (0.2..=0.3).contains(&r.noise_sigma),
                "sigma {} escaped the profile range",
                r.noise_sigma
            );
        }
    }
}
