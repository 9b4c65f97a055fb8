//! Difficulty scoring: run the model over a corpus and record confidences.

use std::io::Write;
use std::path::Path;

use crate::corpus::{read_pgm, CorpusManifest};
use crate::error::{Error, Result};

use crate::metrics::EvalPair;

use super::decode::{confidence, greedy_decode};
use super::frames::{extract_frames, FrameConfig};
use super::model::ModelParams;
use super::par::par_map;

/// Returns the manifest with every record's confidence filled in from the
/// model. Records are processed one image at a time (nothing but the result
/// vector is held in memory) and re-scoring an already scored manifest
/// overwrites the field with identical values. `jobs` threads split the
/// records; output does not depend on the split.
pub fn score_dataset(
    params: &ModelParams,
    manifest: &CorpusManifest,
    frame_cfg: &FrameConfig,
    jobs: usize,
) -> Result<CorpusManifest> {
    params.validate()?;
    frame_cfg.validate()?;
    if params.vocab != manifest.header.vocabulary {
        return Err(Error::data(
            "model vocabulary does not match manifest vocabulary",
        ));
    }
    if params.input_dim != frame_cfg.input_dim() {
        return Err(Error::data(format!(
            "model input dim {} does not match frame config dim {}",
            params.input_dim,
            frame_cfg.input_dim()
        )));
    }
    let scores = par_map(manifest.records.len(), jobs, |i| {
        let rec = &manifest.records[i];
        let image = read_pgm(&manifest.resolve_image_path(rec))?;
        let frames = extract_frames(&image, frame_cfg)?;
        let logits = params.forward(&frames)?;
        Ok(confidence(&logits, &params.vocab).value)
    })?;
    let mut scored = manifest.clone();
    for (rec, c) in scored.records.iter_mut().zip(scores) {
        debug_assert!((0.0..=1.0).contains(&c));
        rec.confidence = Some(c);
    }
    Ok(scored)
}

/// Greedy-decodes every record into an evaluation pair (category = style
/// id), ready for the metrics rollups. Same parallelism contract as
/// [`score_dataset`].
pub fn predict_dataset(
    params: &ModelParams,
    manifest: &CorpusManifest,
    frame_cfg: &FrameConfig,
    jobs: usize,
) -> Result<Vec<EvalPair>> {
    params.validate()?;
    frame_cfg.validate()?;
    if params.vocab != manifest.header.vocabulary {
        return Err(Error::data(
            "model vocabulary does not match manifest vocabulary",
        ));
    }
    if params.input_dim != frame_cfg.input_dim() {
        return Err(Error::data(format!(
            "model input dim {} does not match frame config dim {}",
            params.input_dim,
            frame_cfg.input_dim()
        )));
    }
    par_map(manifest.records.len(), jobs, |i| {
        let rec = &manifest.records[i];
        let image = read_pgm(&manifest.resolve_image_path(rec))?;
        let frames = extract_frames(&image, frame_cfg)?;
        let logits = params.forward(&frames)?;
        let (prediction, _) = greedy_decode(&logits, &params.vocab);
        Ok(EvalPair {
            id: rec.id.clone(),
            category: rec.style_id.to_string(),
            reference: rec.label.clone(),
            prediction,
        })
    })
}

/// Writes `id,confidence` rows for every scored record.
pub fn write_scores_csv(path: &Path, manifest: &CorpusManifest) -> Result<()> {
    let mut out = String::from("id,confidence\n");
    for rec in &manifest.records {
        let c = rec
            .confidence
            .ok_or_else(|| Error::data(format!("record {} has no confidence", rec.id)))?;
        out.push_str(&format!("{},{}\n", rec.id, c));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, GenerateSpec, StyleSpec, Vocabulary};

    fn scored_fixture() -> (tempfile::TempDir, CorpusManifest, ModelParams) {
        let tmp = tempfile::tempdir().unwrap();
        let vocab = Vocabulary::new("abc").unwrap();
        let spec = GenerateSpec::new(12, StyleSpec::spread(2), vocab.clone(), 5);
        let manifest = generate_corpus(&spec, tmp.path(), None).unwrap();
        let params = ModelParams::init(&vocab, &FrameConfig::default(), 16, 9);
        (tmp, manifest, params)
    }

    #[test]
    fn untrained_model_scores_everything_in_unit_range() {
        let (_tmp, manifest, params) = scored_fixture();
        let scored = score_dataset(&params, &manifest, &FrameConfig::default(), 1).unwrap();
        assert_eq!(scored.records.len(), manifest.records.len());
        for rec in &scored.records {
            let c = rec.confidence.unwrap();
            assert!((0.0..=1.0).contains(&c), "{}: {c}", rec.id);
        }
    }

    #[test]
    fn rescoring_is_idempotent_and_job_count_is_invisible() {
        let (_tmp, manifest, params) = scored_fixture();
        let once = score_dataset(&params, &manifest, &FrameConfig::default(), 1).unwrap();
        let twice = score_dataset(&params, &once, &FrameConfig::default(), 1).unwrap();
        let parallel = score_dataset(&params, &manifest, &FrameConfig::default(), 4).unwrap();
        for ((a, b), c) in once
            .records
            .iter()
            .zip(&twice.records)
            .zip(&parallel.records)
        {
            assert_eq!(a.confidence, b.confidence);
            assert_eq!(a.confidence, c.confidence);
        }
    }

    #[test]
    fn predictions_pair_every_record_with_its_label() {
        let (_tmp, manifest, params) = scored_fixture();
        let pairs = predict_dataset(&params, &manifest, &FrameConfig::default(), 2).unwrap();
        assert_eq!(pairs.len(), manifest.records.len());
        for (pair, rec) in pairs.iter().zip(&manifest.records) {
            assert_eq!(pair.id, rec.id);
            assert_eq!(pair.reference, rec.label);
            assert_eq!(pair.category, rec.style_id.to_string());
            // Untrained predictions are usually empty, but always in-vocab.
            assert!(pair.prediction.chars().all(|c| params.vocab.index_of(c).is_some()));
        }
        let sequential = predict_dataset(&params, &manifest, &FrameConfig::default(), 1).unwrap();
        assert_eq!(pairs, sequential);
    }

    #[test]
    fn vocab_mismatch_is_rejected() {
        let (_tmp, manifest, _) = scored_fixture();
        let other = Vocabulary::new("xyz").unwrap();
        let params = ModelParams::init(&other, &FrameConfig::default(), 16, 9);
        let err = score_dataset(&params, &manifest, &FrameConfig::default(), 1).unwrap_err();
        assert!(err.to_string().contains("vocabulary"), "{err}");
    }

    #[test]
    fn scores_csv_lists_every_record() {
        let (_tmp, manifest, params) = scored_fixture();
        let scored = score_dataset(&params, &manifest, &FrameConfig::default(), 2).unwrap();
        let path = _tmp.path().join("scores.csv");
        write_scores_csv(&path, &scored).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "id,confidence");
        assert_eq!(lines.len(), 1 + scored.records.len());
        assert!(lines[1].starts_with("s0000000,"));

        let err = write_scores_csv(&path, &manifest).unwrap_err();
        assert!(err.to_string().contains("no confidence"), "{err}");
    }
}
