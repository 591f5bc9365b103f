//! Run configuration: one TOML file, dotted-key overrides, and a stable
//! fingerprint of the resolved result.

use std::path::{Path, PathBuf};

use bpsplan::dataset::{AugmentConfig, BoostConfig, ExtendConfig, HardSampleConfig};
use bpsplan::multistart::SolverParams;
use bpsplan::net::{MlpConfig, TrainConfig};
use bpsplan::robot::RobotModel;
use bpsplan::worldgen::WorldSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// `sphere_bot`, `planar_arm4`, or a robot file relative to the config.
    pub robot: String,
    pub worlds: WorldsConfig,
    pub solver: SolverParams,
    pub generate: GenerateConfig,
    pub augment: AugmentConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub refine: RefineConfig,
    pub bench: BenchConfig,
    pub bps_study: StudyConfig,
}

/// Noise worlds are drawn at consecutive seeds from `first_seed`; unusable
/// ones are skipped until `train + test` usable worlds are found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldsConfig {
    pub first_seed: u64,
    pub train: usize,
    pub test: usize,
    pub noise_frequency: f64,
    pub threshold: f64,
    pub shape: Vec<usize>,
    pub voxel_size: f64,
    /// Stop after this many seeds without enough usable worlds.
    pub max_seeds: u64,
}

impl WorldsConfig {
    pub fn spec(&self, seed: u64) -> WorldSpec {
        WorldSpec {
            seed,
            noise_frequency: self.noise_frequency,
            threshold: self.threshold,
            shape: self.shape.clone(),
            voxel_size: self.voxel_size,
            rotation: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub train_samples: usize,
    pub test_samples: usize,
    pub max_candidates: usize,
    pub seed: u64,
}

impl GenerateConfig {
    /// Train and test draws use separate streams.
    pub fn hard_sample_config(&self, test: bool) -> HardSampleConfig {
        HardSampleConfig {
            count: if test { self.test_samples } else { self.train_samples },
            max_candidates: self.max_candidates,
            seed: bpsplan::rng::hash_words([self.seed, test as u64]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Target number of hexagonally packed basis points.
    pub bps_points: usize,
    pub mlp: MlpConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    /// Clean rounds in the pipeline, each followed by re-augmentation and
    /// retraining.
    pub clean_rounds: usize,
    /// Weight training samples by their stored hardness (see `boost`).
    pub boost_training: bool,
    pub boost: BoostConfig,
    pub extend: ExtendConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Random multi-starts per task, not counting the straight line.
    pub n_starts: usize,
    /// Largest iteration budget reported.
    pub budget: usize,
    pub seed: u64,
    pub histogram_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub sizes: Vec<usize>,
    pub epochs: usize,
    /// Descent iterations after the prediction.
    pub budget: usize,
}

impl Config {
    /// Reads `path` and applies `key.path=value` overrides before schema
    /// validation, so misspelled keys fail either way.
    pub fn load(path: &Path, overrides: &[String]) -> CliResult<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut table: Table = text
            .parse()
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: Config = table
            .try_into()
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        config.validate()?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.solver.validate()?;
        self.train.validate()?;
        let w = &self.worlds;
        self.worlds.spec(w.first_seed).validate()?;
        if w.train == 0 {
            return Err(CliError::Usage("worlds.train must be positive".into()));
        }
        if self.bench.n_starts == 0 || self.bench.budget == 0 || self.bench.histogram_bins == 0 {
            return Err(CliError::Usage("bench counts must be positive".into()));
        }
        if self.model.bps_points < 4 {
            return Err(CliError::Usage("model.bps_points must be at least 4".into()));
        }
        if self.augment.rotations.iter().any(|k| !(1..=3).contains(k)) {
            return Err(CliError::Usage("augment.rotations take 1 to 3 quarter turns".into()));
        }
        Ok(())
    }

    pub fn robot(&self, base: &Path) -> CliResult<RobotModel> {
        let spec = match self.robot.as_str() {
            "sphere_bot" | "planar_arm4" => self.robot.clone(),
            p => base.join(p).to_string_lossy().into_owned(),
        };
        Ok(RobotModel::by_name_or_path(&spec)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// All seeds in one line, for output headers.
    pub fn seeds_line(&self) -> String {
        format!(
            "worlds={} generate={} init={} shuffle={} extend={} bench={}",
            self.worlds.first_seed,
            self.generate.seed,
            self.model.mlp.init_seed,
            self.train.shuffle_seed,
            self.refine.extend.seed,
            self.bench.seed
        )
    }
}

/// `a.b.c=value`; the value is parsed as a TOML literal and falls back to a
/// bare string.
pub fn apply_override(table: &mut Table, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override '{assignment}' is not key=value")))?;
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("bad override key '{key}'")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("override '{key}': '{part}' is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke() -> (Config, PathBuf) {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml");
        Config::load(&path, &[]).unwrap()
    }

    #[test]
    fn overrides_replace_nested_values() {
        let mut t: Table = "[a]\nb = 1\n".parse().unwrap();
        apply_override(&mut t, "a.b=2.5").unwrap();
        apply_override(&mut t, "a.c=auto").unwrap();
        apply_override(&mut t, "d.e=[1, 2]").unwrap();
        assert_eq!(t["a"]["b"].as_float(), Some(2.5));
        assert_eq!(t["a"]["c"].as_str(), Some("auto"));
        assert_eq!(t["d"]["e"].as_array().unwrap().len(), 2);
        assert!(apply_override(&mut t, "a.b").is_err());
        assert!(apply_override(&mut t, "a.b.c=1").is_err());
        assert!(apply_override(&mut t, "a..b=1").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml");
        for bad in ["solver.descent.alpah=0.1", "colour=1", "bench.n_starts=0"] {
            assert!(Config::load(&path, &[bad.to_string()]).is_err(), "{bad}");
        }
    }

    #[test]
    fn fingerprint_tracks_content() {
        let (c, _) = smoke();
        let fp = c.fingerprint();
        assert_eq!(fp.len(), 16);
        assert_eq!(fp, smoke().0.fingerprint());
        let mut d = c.clone();
        d.bench.seed += 1;
        assert_ne!(d.fingerprint(), fp);
        let back: Config = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }
}
