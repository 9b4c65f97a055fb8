//! Aggregate metrics over (reference, prediction) pairs, grouped by category.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::edit::normalized_edit_distance;

/// One evaluated sample: what the label said vs what the model decoded.
/// `category` is free-form (style id, confidence bin, corpus name).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub id: String,
    pub category: String,
    pub reference: String,
    pub prediction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub n: usize,
    pub exact_match: f64,
    pub one_minus_edit_dist: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub exact_match: f64,
    pub one_minus_edit_dist: f64,
    pub weighted_accuracy: f64,
    pub per_category: BTreeMap<String, CategoryMetrics>,
    /// Weights used for `weighted_accuracy` (normalized to sum 1).
    pub weights: BTreeMap<String, f64>,
}

/// Compensated (Kahan) mean; keeps long low-magnitude sums honest.
/// Compensated mean, so aggregation order and batching cannot shift results.
pub fn kahan_mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut n = 0usize;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Fraction of pairs where prediction equals reference exactly.
pub fn exact_match(pairs: &[EvalPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::data("exact_match on an empty pair set"));
    }
    let hits = pairs
        .iter()
        .filter(|p| p.prediction == p.reference)
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Mean of `1 - normalized_edit_distance` over the pairs.
pub fn one_minus_edit_dist(pairs: &[EvalPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::data("one_minus_edit_dist on an empty pair set"));
    }
    Ok(kahan_mean(
        pairs
            .iter()
            .map(|p| 1.0 - normalized_edit_distance(&p.reference, &p.prediction)),
    )
    .expect("non-empty"))
}

/// Weighted mean of per-category accuracies. Every category present in
/// `accuracies` must have a weight; silently dropping a category would bias
/// the rollup, so a missing weight is an error.
pub fn weighted_accuracy(
    accuracies: &BTreeMap<String, f64>,
    weights: &BTreeMap<String, f64>,
) -> Result<f64> {
    if accuracies.is_empty() {
        return Err(Error::data("weighted_accuracy over no categories"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (cat, &acc) in accuracies {
        let w = *weights
            .get(cat)
            .ok_or_else(|| Error::data(format!("no weight for category {cat:?}")))?;
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::data(format!("weight for {cat:?} must be >= 0, got {w}")));
        }
        num += w * acc;
        den += w;
    }
    if den <= 0.0 {
        return Err(Error::data("weights sum to zero"));
    }
    Ok(num / den)
}

/// Builds the full report. When `weights` is `None`, categories are weighted
/// by their share of the pair set.
pub fn build_report(
    pairs: &[EvalPair],
    weights: Option<&BTreeMap<String, f64>>,
) -> Result<MetricReport> {
    if pairs.is_empty() {
        return Err(Error::data("cannot report on an empty pair set"));
    }
    let mut by_cat: BTreeMap<String, Vec<&EvalPair>> = BTreeMap::new();
    for p in pairs {
        by_cat.entry(p.category.clone()).or_default().push(p);
    }

    let mut per_category = BTreeMap::new();
    let mut accs = BTreeMap::new();
    for (cat, members) in &by_cat {
        let owned: Vec<EvalPair> = members.iter().map(|p| (*p).clone()).collect();
        let em = exact_match(&owned)?;
        per_category.insert(
            cat.clone(),
            CategoryMetrics {
                n: owned.len(),
                exact_match: em,
                one_minus_edit_dist: one_minus_edit_dist(&owned)?,
            },
        );
        accs.insert(cat.clone(), em);
    }

    let used_weights: BTreeMap<String, f64> = match weights {
        Some(w) => w.clone(),
        None => by_cat
            .iter()
            .map(|(cat, members)| (cat.clone(), members.len() as f64 / pairs.len() as f64))
            .collect(),
    };
    let wa = weighted_accuracy(&accs, &used_weights)?;

    let total: f64 = used_weights.values().sum();
    let normalized: BTreeMap<String, f64> = used_weights
        .iter()
        .map(|(k, v)| (k.clone(), v / total))
        .collect();

    Ok(MetricReport {
        n: pairs.len(),
        exact_match: exact_match(pairs)?,
        one_minus_edit_dist: one_minus_edit_dist(pairs)?,
        weighted_accuracy: wa,
        per_category,
        weights: normalized,
    })
}

/// Reads `id,category,reference,prediction` rows (quoted CSV).
pub fn read_pairs_csv(path: &Path) -> Result<Vec<EvalPair>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for row in reader.deserialize::<EvalPair>() {
        out.push(row.map_err(|e| csv_err(path, e))?);
    }
    Ok(out)
}

pub fn write_pairs_csv(path: &Path, pairs: &[EvalPair]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for p in pairs {
        writer.serialize(p).map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Writes the report as pretty JSON.
pub fn write_report(path: &Path, report: &MetricReport) -> Result<()> {
    let body = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
}

/// Writes the per-category table as a flat CSV, one row per category.
pub fn write_category_csv(path: &Path, report: &MetricReport) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    writer
        .write_record(["category", "n", "exact_match", "one_minus_edit_dist", "weight"])
        .map_err(|e| csv_err(path, e))?;
    for (cat, m) in &report.per_category {
        let weight = report.weights.get(cat).copied().unwrap_or(0.0);
        writer
            .write_record([
                cat.as_str(),
                &m.n.to_string(),
                &m.exact_match.to_string(),
                &m.one_minus_edit_dist.to_string(),
                &weight.to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::data(format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: &str, cat: &str, r: &str, p: &str) -> EvalPair {
        EvalPair {
            id: id.into(),
            category: cat.into(),
            reference: r.into(),
            prediction: p.into(),
        }
    }

    #[test]
    fn exact_match_counts_only_identical() {
        let pairs = vec![pair("1", "x", "a", "a"), pair("2", "x", "b", "c")];
        assert_eq!(exact_match(&pairs).unwrap(), 0.5);
        assert!(exact_match(&[]).is_err());
    }

    #[test]
    fn one_minus_edit_dist_on_mixed_pairs() {
        let pairs = vec![
            pair("1", "x", "abc", "abc"), // ned 0
            pair("2", "x", "ab", ""),     // ned 1
        ];
        let got = one_minus_edit_dist(&pairs).unwrap();
        assert!((got - 0.5).abs() < 1e-15);
    }

    #[test]
    fn weighted_accuracy_frozen_example() {
        let accs: BTreeMap<String, f64> =
            [("A".into(), 1.0), ("B".into(), 0.5)].into_iter().collect();
        let weights: BTreeMap<String, f64> =
            [("A".into(), 1.0), ("B".into(), 3.0)].into_iter().collect();
        let got = weighted_accuracy(&accs, &weights).unwrap();
        assert!((got - 0.625).abs() < 1e-15);
    }

    #[test]
    fn missing_weight_is_an_error_not_a_drop() {
        let accs: BTreeMap<String, f64> =
            [("A".into(), 1.0), ("B".into(), 0.5)].into_iter().collect();
        let weights: BTreeMap<String, f64> = [("A".into(), 1.0)].into_iter().collect();
        let err = weighted_accuracy(&accs, &weights).unwrap_err();
        assert!(err.to_string().contains('B'), "error should name the category");
    }

    #[test]
    fn default_weights_are_category_proportions() {
        let pairs = vec![
            pair("1", "A", "a", "a"),
            pair("2", "A", "a", "a"),
            pair("3", "A", "a", "b"),
            pair("4", "B", "a", "a"),
        ];
        let report = build_report(&pairs, None).unwrap();
        assert!((report.weights["A"] - 0.75).abs() < 1e-15);
        assert!((report.weights["B"] - 0.25).abs() < 1e-15);
        // A: 2/3, B: 1 -> 0.75 * 2/3 + 0.25 * 1 = 0.75
        assert!((report.weighted_accuracy - 0.75).abs() < 1e-15);
        assert_eq!(report.per_category["A"].n, 3);
    }

    #[test]
    fn pairs_csv_round_trips_with_quoting() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        let pairs = vec![
            pair("1", "style,0", "a\"b", "a\nb"),
            pair("2", "style1", "plain", "plain"),
        ];
        write_pairs_csv(&path, &pairs).unwrap();
        let back = read_pairs_csv(&path).unwrap();
        assert_eq!(pairs, back);
    }

    #[test]
    fn category_csv_lists_every_category_with_its_weight() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("per_category.csv");
        let pairs = vec![
            pair("1", "A", "a", "a"),
            pair("2", "A", "a", "b"),
            pair("3", "B", "a", "a"),
        ];
        let report = build_report(&pairs, None).unwrap();
        write_category_csv(&path, &report).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "category,n,exact_match,one_minus_edit_dist,weight");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("A,2,0.5,"));
        assert!(lines[2].starts_with("B,1,1,"));
    }
}
