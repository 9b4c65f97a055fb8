//! Provenance blocks stamped into every artifact.
//!
//! An artifact must be explainable months later from its own bytes: which
//! command produced it, under which effective config, from which seed. No
//! timestamps or hostnames appear here; artifacts from identical inputs must
//! be byte-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Format version shared by all artifacts this build writes.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// The command line that produced the artifact, argv joined by spaces.
    pub command: String,
    /// FNV-64 of the effective config JSON, hex encoded.
    pub config_hash: String,
    pub seed: u64,
    pub format_version: u32,
}

impl Provenance {
    pub fn new(command: impl Into<String>, config_json: &str, seed: u64) -> Self {
        Provenance {
            command: command.into(),
            config_hash: format!("{:016x}", crate::rng::hash64(0, config_json, &[])),
            seed,
            format_version: FORMAT_VERSION,
        }
    }

    /// Provenance for artifacts produced through the library API.
    pub fn library(op: &str, seed: u64) -> Self {
        Provenance::new(format!("lib:{op}"), "{}", seed)
    }

    /// Writes `provenance.json` into `dir`.
    pub fn write_into(&self, dir: &Path) -> Result<()> {
        let path = dir.join("provenance.json");
        let body = serde_json::to_string_pretty(self).expect("provenance serializes");
        std::fs::write(&path, body + "\n").map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_hash_tracks_content() {
        let a = Provenance::new("curalab generate", "{\"n\":10}", 7);
        let b = Provenance::new("curalab generate", "{\"n\":10}", 7);
        let c = Provenance::new("curalab generate", "{\"n\":11}", 7);
        assert_eq!(a, b);
        assert_ne!(a.config_hash, c.config_hash);
    }

    #[test]
    fn round_trips_through_json() {
        let p = Provenance::new("curalab train", "{}", 42);
        let s = serde_json::to_string(&p).unwrap();
        let q: Provenance = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
