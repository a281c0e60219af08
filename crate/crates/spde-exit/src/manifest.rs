//! Run manifests: the provenance record every output file points back to.
//!
//! A manifest captures what a run *was* (command, canonical config and its
//! hash, seed, noise stream algorithm, the full constants ledger) and what
//! it *produced* (per-output body checksums). The manifest id hashes only
//! the identity half, so a byte-identical re-run reproduces the same id and
//! the same body checksums while the wall-clock field is free to differ.
//! Bounds are never reported without their constants: the runner refuses to
//! write a bounds table unless the ledger is recorded first.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::BoundConstants;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::noise::STREAM_ALGORITHM;

pub const MANIFEST_SCHEMA: &str = "manifest/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub software_version: String,
    pub command: String,
    pub config_sha256: String,
    /// Canonical re-serialization of the parsed config.
    pub config_canonical: String,
    pub seed: u64,
    pub stream_algorithm: String,
    /// Constants ledger backing any bound in the outputs.
    pub constants: BTreeMap<String, f64>,
    /// How each constant was obtained (constructive fit, user override, ...).
    pub constant_provenance: BTreeMap<String, String>,
    /// Output file name -> body sha256 (header lines excluded).
    pub outputs: BTreeMap<String, String>,
    /// Seconds since the Unix epoch at manifest creation; not part of the
    /// manifest id.
    pub wallclock_unix: u64,
}

/// The fields the manifest id covers, in one fixed serialization.
#[derive(Serialize)]
struct IdentityView<'a> {
    schema: &'a str,
    software_version: &'a str,
    command: &'a str,
    config_sha256: &'a str,
    seed: u64,
    stream_algorithm: &'a str,
    constants: &'a BTreeMap<String, f64>,
    constant_provenance: &'a BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        let wallclock_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            schema: MANIFEST_SCHEMA.into(),
            software_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: cfg.sha256(),
            config_canonical: cfg.canonical(),
            seed: cfg.run.seed,
            stream_algorithm: STREAM_ALGORITHM.into(),
            constants: BTreeMap::new(),
            constant_provenance: BTreeMap::new(),
            outputs: BTreeMap::new(),
            wallclock_unix,
        }
    }

    /// Fold the full constants ledger (values and provenance) into the
    /// manifest identity.
    pub fn record_constants(&mut self, c: &BoundConstants) {
        for (name, value) in c.ledger() {
            self.constants.insert(name, value);
        }
        for (name, src) in &c.provenance {
            self.constant_provenance.insert(name.clone(), src.clone());
        }
    }

    pub fn record_output(&mut self, name: &str, body_sha256: String) {
        self.outputs.insert(name.to_string(), body_sha256);
    }

    /// Stable identity of the run: everything except wall-clock and the
    /// output list (outputs are derived from the identity, not part of it).
    pub fn manifest_id(&self) -> String {
        let view = IdentityView {
            schema: &self.schema,
            software_version: &self.software_version,
            command: &self.command,
            config_sha256: &self.config_sha256,
            seed: self.seed,
            stream_algorithm: &self.stream_algorithm,
            constants: &self.constants,
            constant_provenance: &self.constant_provenance,
        };
        let json = serde_json::to_string(&view).expect("manifest identity serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        format!("{:x}", hasher.finalize())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(Error::Format(format!(
                "manifest schema {:?}, this build reads {MANIFEST_SCHEMA:?}",
                m.schema
            )));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::tests_support::full_config;
    use crate::grid::WeightParams;

    #[test]
    fn id_ignores_wallclock_and_outputs_but_not_identity() {
        let cfg = full_config();
        let mut a = RunManifest::new("bounds", &cfg);
        let mut b = RunManifest::new("bounds", &cfg);
        b.wallclock_unix = a.wallclock_unix + 1000;
        b.record_output("table.csv", "deadbeef".into());
        assert_eq!(a.manifest_id(), b.manifest_id());

        let mut other_cmd = RunManifest::new("sweep", &cfg);
        other_cmd.wallclock_unix = a.wallclock_unix;
        assert_ne!(a.manifest_id(), other_cmd.manifest_id());

        let mut other_seed = cfg.clone();
        other_seed.run.seed += 1;
        let c = RunManifest::new("bounds", &other_seed);
        assert_ne!(a.manifest_id(), c.manifest_id());

        // The constants ledger is part of the identity.
        let id_before = a.manifest_id();
        a.constants.insert("k1".into(), 2.5);
        assert_ne!(id_before, a.manifest_id());
    }

    #[test]
    fn constants_ledger_round_trips_through_the_manifest() {
        let cfg = full_config();
        let exp = cfg.build().unwrap();
        let w = WeightParams::new(1.0, 0.25, 0.5).unwrap();
        let c = BoundConstants::constructive(
            &exp.model,
            &exp.grid,
            &w,
            0.5,
            cfg.solver.epsilon,
            cfg.run.seed,
            &cfg.bound_overrides(),
        )
        .unwrap();
        let mut m = RunManifest::new("bounds", &cfg);
        m.record_constants(&c);
        for (name, value) in c.ledger() {
            assert_eq!(m.constants.get(&name), Some(&value), "constant {name}");
        }
        assert!(!m.constant_provenance.is_empty());
    }

    #[test]
    fn json_round_trip_preserves_everything() {
        let cfg = full_config();
        let mut m = RunManifest::new("exit-prob", &cfg);
        m.record_output("exit.csv", "abc123".into());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        m.save(&path).unwrap();
        let back = RunManifest::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.manifest_id(), m.manifest_id());
        // A schema from the future is refused rather than misread.
        let mut future = back.clone();
        future.schema = "manifest/v99".into();
        future.save(&path).unwrap();
        assert!(RunManifest::load(&path).is_err());
    }
}
