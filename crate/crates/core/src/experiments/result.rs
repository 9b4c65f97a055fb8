//! Result rows and analysis-ready report artifacts.
//!
//! `results.csv` carries only reproducible columns, so rerunning a study
//! yields a byte-identical file; wall-clock timings live in `timings.csv`.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::kahan_mean;

/// One trained-and-evaluated condition, or a skipped one (`skipped` holds
/// the condition's available population when it fell short of the budget).
#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub study: String,
    pub condition: String,
    pub replicate: usize,
    pub train_size: usize,
    pub exact_match: Option<f64>,
    pub one_minus_edit_dist: Option<f64>,
    pub wall_seconds: f64,
    pub seed: u64,
    pub skipped: Option<usize>,
}

impl AblationResult {
    pub fn is_skipped(&self) -> bool {
        self.skipped.is_some()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Deterministic result table: `study,condition,replicate,train_size,
/// exact_match,one_minus_edit_dist,seed,skipped`.
pub fn write_results_csv(path: &Path, results: &[AblationResult]) -> Result<()> {
    let mut out =
        String::from("study,condition,replicate,train_size,exact_match,one_minus_edit_dist,seed,skipped\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.study,
            r.condition,
            r.replicate,
            r.train_size,
            opt(r.exact_match),
            opt(r.one_minus_edit_dist),
            r.seed,
            r.skipped.map(|p| p.to_string()).unwrap_or_default(),
        ));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// Wall-clock sidecar, intentionally separate from the reproducible table.
pub fn write_timings_csv(path: &Path, results: &[AblationResult]) -> Result<()> {
    let mut out = String::from("study,condition,replicate,wall_seconds\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{:.3}\n",
            r.study, r.condition, r.replicate, r.wall_seconds
        ));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_results_csv`]; wall_seconds comes back as 0.
pub fn read_results_csv(path: &Path) -> Result<Vec<AblationResult>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    let bad = |lineno: usize, msg: &str| {
        Error::data(format!("{}:{}: {msg}", path.display(), lineno + 1))
    };
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line != "study,condition,replicate,train_size,exact_match,one_minus_edit_dist,seed,skipped" {
                return Err(bad(lineno, "unrecognized header"));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(bad(lineno, "expected 8 fields"));
        }
        let parse_opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(lineno, "bad metric"))
            }
        };
        rows.push(AblationResult {
            study: fields[0].to_string(),
            condition: fields[1].to_string(),
            replicate: fields[2].parse().map_err(|_| bad(lineno, "bad replicate"))?,
            train_size: fields[3].parse().map_err(|_| bad(lineno, "bad train_size"))?,
            exact_match: parse_opt(fields[4])?,
            one_minus_edit_dist: parse_opt(fields[5])?,
            wall_seconds: 0.0,
            seed: fields[6].parse().map_err(|_| bad(lineno, "bad seed"))?,
            skipped: if fields[7].is_empty() {
                None
            } else {
                Some(fields[7].parse().map_err(|_| bad(lineno, "bad skipped"))?)
            },
        });
    }
    Ok(rows)
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        // Tied values share the mean of the ranks they span (1-based).
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let ma = kahan_mean(a.iter().copied()).expect("pearson over a non-empty series");
    let mb = kahan_mean(b.iter().copied()).expect("pearson over a non-empty series");
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    let denom = (va * vb).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    cov / denom
}

/// Spearman rank correlation with average ranks for ties; a constant series
/// correlates at 0 by convention.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "paired series");
    if xs.len() < 2 {
        return 0.0;
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Per-study trend statistics over the mean exact-match across replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    /// Conditions in emission order, skipped ones included.
    pub conditions: Vec<String>,
    /// Mean exact-match per condition, aligned with `conditions`; null for
    /// skipped conditions.
    pub mean_exact_match: Vec<Option<f64>>,
    pub replicates: usize,
    /// Condition with the highest mean exact-match (first on ties).
    pub peak_condition: Option<String>,
    /// Spearman correlation between condition order and mean exact-match,
    /// over non-skipped conditions; null with fewer than two points.
    pub spearman_order_vs_exact_match: Option<f64>,
    /// mean(last non-skipped condition) - mean(first non-skipped condition).
    pub endpoint_delta: Option<f64>,
    pub skipped: Vec<String>,
}

/// Groups rows by study and reduces replicates to per-condition means.
/// Condition order follows first appearance in `results`.
pub fn summarize(results: &[AblationResult]) -> Result<BTreeMap<String, StudySummary>> {
    if results.is_empty() {
        return Err(Error::data("no result rows to summarize"));
    }
    let mut order: Vec<(&str, Vec<&str>)> = Vec::new();
    for r in results {
        let study = match order.iter_mut().find(|(s, _)| *s == r.study) {
            Some(entry) => entry,
            None => {
                order.push((&r.study, Vec::new()));
                order.last_mut().expect("just pushed")
            }
        };
        if !study.1.contains(&r.condition.as_str()) {
            study.1.push(&r.condition);
        }
    }

    let mut out = BTreeMap::new();
    for (study, conditions) in order {
        let mut means: Vec<Option<f64>> = Vec::new();
        let mut skipped = Vec::new();
        let mut replicates = 0;
        for cond in &conditions {
            let rows: Vec<&AblationResult> = results
                .iter()
                .filter(|r| r.study == study && r.condition == *cond)
                .collect();
            replicates = replicates.max(rows.len());
            if rows.iter().any(|r| r.is_skipped()) {
                skipped.push(cond.to_string());
                means.push(None);
                continue;
            }
            let ems: Vec<f64> = rows
                .iter()
                .map(|r| {
                    r.exact_match.ok_or_else(|| {
                        Error::data(format!(
                            "row {study}/{cond}/{} has no metric and is not skipped",
                            r.replicate
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            means.push(kahan_mean(ems.iter().copied()));
        }

        let present: Vec<(usize, f64)> = means
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.map(|v| (i, v)))
            .collect();
        let peak_condition = present
            .iter()
            .max_by(|(ia, a), (ib, b)| a.total_cmp(b).then(ib.cmp(ia)))
            .map(|&(i, _)| conditions[i].to_string());
        let spearman_order_vs_exact_match = if present.len() >= 2 {
            let xs: Vec<f64> = present.iter().map(|&(i, _)| i as f64).collect();
            let ys: Vec<f64> = present.iter().map(|&(_, v)| v).collect();
            Some(spearman(&xs, &ys))
        } else {
            None
        };
        let endpoint_delta = if present.len() >= 2 {
            Some(present.last().expect("len >= 2").1 - present[0].1)
        } else {
            None
        };
        out.insert(
            study.to_string(),
            StudySummary {
                conditions: conditions.iter().map(|c| c.to_string()).collect(),
                mean_exact_match: means,
                replicates,
                peak_condition,
                spearman_order_vs_exact_match,
                endpoint_delta,
                skipped,
            },
        );
    }
    Ok(out)
}

/// Writes `results.csv`, `timings.csv`, `summary.json`, and one plot-ready
/// long-format CSV per study under `plots/`.
pub fn emit_report(results: &[AblationResult], out_dir: &Path) -> Result<()> {
    if results.is_empty() {
        return Err(Error::data("no result rows to report"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_results_csv(&out_dir.join("results.csv"), results)?;
    write_timings_csv(&out_dir.join("timings.csv"), results)?;

    let summary = summarize(results)?;
    let path = out_dir.join("summary.json");
    let body = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&path, body + "\n").map_err(|e| Error::io(&path, e))?;

    let plots = out_dir.join("plots");
    std::fs::create_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;
    for study in summary.keys() {
        let mut out = String::from(
            "condition_index,condition,replicate,train_size,exact_match,one_minus_edit_dist\n",
        );
        let conditions = &summary[study].conditions;
        for r in results.iter().filter(|r| &r.study == study) {
            if r.is_skipped() {
                continue;
            }
            let idx = conditions
                .iter()
                .position(|c| c == &r.condition)
                .expect("condition seen during summarize");
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                idx,
                r.condition,
                r.replicate,
                r.train_size,
                opt(r.exact_match),
                opt(r.one_minus_edit_dist),
            ));
        }
        let path = plots.join(format!("{study}.csv"));
        std::fs::File::create(&path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
