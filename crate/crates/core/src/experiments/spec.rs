//! Study specifications: which data axis is manipulated, over which corpus.

use serde::{Deserialize, Serialize};

use crate::corpus::GenerateSpec;
use crate::curation::BinSpec;
use crate::error::{Error, Result};
use crate::recognizer::{FrameConfig, TrainConfig};

fn default_boundaries() -> Vec<f64> {
    vec![0.5, 0.7, 0.8, 0.85, 0.9, 0.93, 0.95, 0.97]
}

fn default_rates() -> Vec<f64> {
    vec![0.0, 0.05, 0.10, 0.15, 0.20]
}

fn default_coverage() -> Vec<usize> {
    vec![10, 20, 30, 40, 50]
}

fn default_k() -> usize {
    50
}

fn default_sizes() -> Vec<usize> {
    vec![1000, 2000, 3000, 4000, 5000]
}

fn default_replicates() -> usize {
    1
}

/// The manipulated axis and its ordered conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "study", rename_all = "snake_case")]
pub enum StudyKind {
    /// One condition per confidence bin over these boundaries (nine bins by
    /// default), each trained on `fixed_budget` samples from that bin only.
    Difficulty {
        #[serde(default = "default_boundaries")]
        boundaries: Vec<f64>,
    },
    /// One condition per label-noise rate, all injected into one base subset.
    Accuracy {
        #[serde(default = "default_rates")]
        rates: Vec<f64>,
    },
    /// One condition per cluster-coverage count m of the pool's k clusters.
    Diversity {
        #[serde(default = "default_coverage")]
        coverage: Vec<usize>,
        #[serde(default = "default_k")]
        k: usize,
    },
    /// One condition per training-set size, drawn as nested prefixes.
    Quantity {
        #[serde(default = "default_sizes")]
        sizes: Vec<usize>,
    },
}

impl StudyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::Difficulty { .. } => "difficulty",
            StudyKind::Accuracy { .. } => "accuracy",
            StudyKind::Diversity { .. } => "diversity",
            StudyKind::Quantity { .. } => "quantity",
        }
    }

    pub fn n_conditions(&self) -> usize {
        match self {
            StudyKind::Difficulty { boundaries } => boundaries.len() + 1,
            StudyKind::Accuracy { rates } => rates.len(),
            StudyKind::Diversity { coverage, .. } => coverage.len(),
            StudyKind::Quantity { sizes } => sizes.len(),
        }
    }
}

/// A complete, reproducible study: rerunning the same spec into any
/// directory yields the same metric rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    #[serde(flatten)]
    pub kind: StudyKind,
    /// Per-condition training-set size; required except for quantity, whose
    /// sizes are the conditions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_budget: Option<usize>,
    /// The pool every condition draws from. Its `n` bounds what the study
    /// can spend; its difficulty profile shapes the confidence spectrum.
    pub corpus: GenerateSpec,
    /// Number of extra samples generated alongside the pool and held out as
    /// the shared eval split. The study renders `corpus.n + eval_size`
    /// samples in one pass so both splits share a glyph atlas; the tail
    /// `eval_size` records never enter any training set.
    pub eval_size: usize,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub frame: FrameConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
}

fn ascending(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::data(format!("{name} must be non-empty")));
    }
    for w in values.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::data(format!(
                "{name} must be strictly ascending, got {} after {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

impl StudySpec {
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            StudyKind::Quantity { sizes } => {
                if self.fixed_budget.is_some() {
                    return Err(Error::data(
                        "quantity study takes its sizes from the conditions; drop fixed_budget",
                    ));
                }
                if sizes.is_empty() {
                    return Err(Error::data("sizes must be non-empty"));
                }
                if sizes[0] == 0 {
                    return Err(Error::data("sizes must be >= 1"));
                }
                for w in sizes.windows(2) {
                    if w[1] < w[0] {
                        return Err(Error::data(format!(
                            "sizes must be non-decreasing, got {} after {}",
                            w[1], w[0]
                        )));
                    }
                }
                if *sizes.last().expect("non-empty") > self.corpus.n {
                    return Err(Error::data(format!(
                        "largest size {} exceeds the pool of {}",
                        sizes.last().expect("non-empty"),
                        self.corpus.n
                    )));
                }
            }
            kind => {
                let budget = self.fixed_budget.ok_or_else(|| {
                    Error::data(format!("{} study requires fixed_budget", kind.name()))
                })?;
                if budget == 0 {
                    return Err(Error::data("fixed_budget must be >= 1"));
                }
                if budget > self.corpus.n {
                    return Err(Error::data(format!(
                        "fixed_budget {budget} exceeds the pool of {}",
                        self.corpus.n
                    )));
                }
                match kind {
                    StudyKind::Difficulty { boundaries } => {
                        BinSpec::new(boundaries.clone())?;
                    }
                    StudyKind::Accuracy { rates } => {
                        ascending("rates", rates)?;
                        if rates.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                            return Err(Error::data("noise rates must lie in [0, 1]"));
                        }
                    }
                    StudyKind::Diversity { coverage, k } => {
                        if coverage.is_empty() {
                            return Err(Error::data("coverage must be non-empty"));
                        }
                        if coverage[0] == 0 {
                            return Err(Error::data("coverage counts must be >= 1"));
                        }
                        for w in coverage.windows(2) {
                            if w[1] <= w[0] {
                                return Err(Error::data(format!(
                                    "coverage must be strictly ascending, got {} after {}",
                                    w[1], w[0]
                                )));
                            }
                        }
                        if *coverage.last().expect("non-empty") > *k {
                            return Err(Error::data(format!(
                                "coverage {} exceeds k = {k}",
                                coverage.last().expect("non-empty")
                            )));
                        }
                        if *k > self.corpus.n {
                            return Err(Error::data(format!(
                                "k = {k} exceeds the pool of {}",
                                self.corpus.n
                            )));
                        }
                    }
                    StudyKind::Quantity { .. } => unreachable!("handled above"),
                }
            }
        }
        if self.eval_size == 0 {
            return Err(Error::data("eval_size must be >= 1"));
        }
        if self.replicates == 0 {
            return Err(Error::data("replicates must be >= 1"));
        }
        if self.corpus.eval_fraction != 0.0 {
            return Err(Error::data(
                "the study holds out its own eval split; set corpus.eval_fraction to 0",
            ));
        }
        self.corpus.validate()?;
        self.train.validate()?;
        self.frame.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{StyleSpec, Vocabulary};

    fn base_spec(kind: StudyKind) -> StudySpec {
        StudySpec {
            kind,
            fixed_budget: Some(100),
            corpus: GenerateSpec::new(500, StyleSpec::spread(2), Vocabulary::new("abc").unwrap(), 1),
            eval_size: 50,
            train: TrainConfig::default(),
            frame: FrameConfig::default(),
            seed: 0,
            replicates: 1,
        }
    }

    #[test]
    fn defaults_give_nine_difficulty_bins() {
        let corpus =
            GenerateSpec::new(500, StyleSpec::spread(2), Vocabulary::new("abc").unwrap(), 1);
        let json = format!(
            r#"{{"study":"difficulty","fixed_budget":100,"eval_size":50,"corpus":{}}}"#,
            serde_json::to_string(&corpus).unwrap()
        );
        let spec: StudySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec.kind.name(), "difficulty");
        assert_eq!(spec.kind.n_conditions(), 9);
        assert_eq!(spec.replicates, 1);
        spec.validate().unwrap();
    }

    #[test]
    fn study_tag_round_trips() {
        for kind in [
            StudyKind::Difficulty {
                boundaries: default_boundaries(),
            },
            StudyKind::Accuracy {
                rates: default_rates(),
            },
            StudyKind::Diversity {
                coverage: default_coverage(),
                k: 50,
            },
            StudyKind::Quantity {
                sizes: default_sizes(),
            },
        ] {
            let mut spec = base_spec(kind.clone());
            if matches!(kind, StudyKind::Quantity { .. }) {
                spec.fixed_budget = None;
                spec.corpus.n = 6000;
            }
            let json = serde_json::to_string(&spec).unwrap();
            assert!(json.contains(&format!("\"study\":\"{}\"", kind.name())), "{json}");
            let back: StudySpec = serde_json::from_str(&json).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn budget_rules_differ_by_study() {
        let mut q = base_spec(StudyKind::Quantity { sizes: vec![100, 200] });
        assert!(q.validate().is_err(), "quantity rejects fixed_budget");
        q.fixed_budget = None;
        q.validate().unwrap();

        let mut a = base_spec(StudyKind::Accuracy { rates: vec![0.0, 0.1] });
        a.fixed_budget = None;
        assert!(a.validate().is_err(), "accuracy requires fixed_budget");
        a.fixed_budget = Some(600);
        assert!(a.validate().is_err(), "budget cannot exceed the pool");
    }

    #[test]
    fn condition_lists_are_checked() {
        assert!(base_spec(StudyKind::Accuracy { rates: vec![0.1, 0.1] })
            .validate()
            .is_err());
        assert!(base_spec(StudyKind::Accuracy { rates: vec![0.1, 1.5] })
            .validate()
            .is_err());
        assert!(base_spec(StudyKind::Diversity {
            coverage: vec![10, 60],
            k: 50
        })
        .validate()
        .is_err());
        assert!(base_spec(StudyKind::Difficulty {
            boundaries: vec![0.9, 0.5]
        })
        .validate()
        .is_err());
        let mut q = base_spec(StudyKind::Quantity {
            sizes: vec![200, 100],
        });
        q.fixed_budget = None;
        assert!(q.validate().is_err());
    }

    #[test]
    fn eval_fraction_must_be_zero() {
        let mut spec = base_spec(StudyKind::Accuracy { rates: vec![0.0, 0.1] });
        spec.corpus.eval_fraction = 0.1;
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains("eval_fraction"), "{err}");
    }
}
