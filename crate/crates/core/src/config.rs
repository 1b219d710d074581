//! Run configuration: a flat `key = value` file, an optional JSON override
//! and the `FLATLAB_SEED` environment variable, applied in that order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::budget::{LengthPolicy, ProfileParams};
use crate::convergence::SuiteConfig;
use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

pub const SEED_ENV: &str = "FLATLAB_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub m: usize,
    pub schedule: Vec<f64>,
    pub seeds: Vec<u64>,
    pub sample_size: usize,
    pub profile_params: ProfileParams,
    pub tolerances: Tolerances,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            m: 2,
            schedule: vec![0.7, 0.5, 0.35],
            seeds: vec![7],
            sample_size: 2000,
            profile_params: ProfileParams::default(),
            tolerances: Tolerances::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {s:?}")))
        })
        .collect()
}

fn one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    /// Parses `key = value` lines over the defaults. Blank lines and `#`
    /// comments are ignored; unknown keys are an error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected key = value",
                    n + 1
                )));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "m" => c.m = one(key, value)?,
                "schedule" => c.schedule = list(key, value)?,
                "seeds" | "seed" => c.seeds = list(key, value)?,
                "sample_size" => c.sample_size = one(key, value)?,
                "rho0_factor" => c.profile_params.rho0_factor = one(key, value)?,
                "length_policy" => {
                    c.profile_params.length_policy = match value {
                        "thread_length" => LengthPolicy::ThreadLength,
                        "at_least_minimal" => LengthPolicy::AtLeastMinimal,
                        _ => {
                            return Err(Error::Config(format!(
                                "length_policy: unknown policy {value:?}"
                            )))
                        }
                    }
                }
                "tol_algebraic" => c.tolerances.algebraic = one(key, value)?,
                "tol_metric" => c.tolerances.metric = one(key, value)?,
                "tol_search" => c.tolerances.search = one(key, value)?,
                "output_dir" => c.output_dir = PathBuf::from(value),
                _ => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key {key:?}",
                        n + 1
                    )))
                }
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Merges a JSON object over this configuration; nested objects merge
    /// field by field.
    pub fn apply_json(&self, json: &str) -> Result<Self> {
        let patch: serde_json::Value =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("override: {e}")))?;
        if !patch.is_object() {
            return Err(Error::Config("override must be a JSON object".into()));
        }
        let mut base = serde_json::to_value(self)?;
        merge(&mut base, patch);
        serde_json::from_value(base).map_err(|e| Error::Config(format!("override: {e}")))
    }

    /// Replaces the seed list with the value of `FLATLAB_SEED` when set.
    pub fn apply_env(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seeds = vec![one(SEED_ENV, v.trim())?];
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Validation(format!("m = {} must be >= 2", self.m)));
        }
        if self.sample_size == 0 {
            return Err(Error::Validation("sample_size must be >= 1".into()));
        }
        if self.schedule.is_empty() || self.seeds.is_empty() {
            return Err(Error::Validation(
                "schedule and seeds must be nonempty".into(),
            ));
        }
        if self.schedule.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::Validation(
                "schedule entries must be positive".into(),
            ));
        }
        if self.schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Validation(
                "eps schedule must be strictly decreasing".into(),
            ));
        }
        let f = self.profile_params.rho0_factor;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Validation(format!(
                "rho0_factor = {f} must lie in (0, 1)"
            )));
        }
        Ok(())
    }

    pub fn suite(&self) -> SuiteConfig {
        SuiteConfig {
            m: self.m,
            schedule: self.schedule.clone(),
            seeds: self.seeds.clone(),
            sample_size: self.sample_size,
            profile_params: self.profile_params,
            tolerances: self.tolerances,
        }
    }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let c = RunConfig::parse(
            "# demo\nm = 3\nschedule = 0.9, 0.6\nseeds = 1,2\nsample_size=50\nrho0_factor = 0.1\n\
             length_policy = thread_length\ntol_metric = 1e-9\noutput_dir = runs\n",
        )
        .unwrap();
        assert_eq!(c.m, 3);
        assert_eq!(c.schedule, vec![0.9, 0.6]);
        assert_eq!(c.seeds, vec![1, 2]);
        assert_eq!(c.sample_size, 50);
        assert_eq!(c.profile_params.length_policy, LengthPolicy::ThreadLength);
        assert_eq!(c.tolerances.metric, 1e-9);
        assert_eq!(c.output_dir, PathBuf::from("runs"));
        c.validate().unwrap();
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            RunConfig::parse("colour = red"),
            Err(Error::Config(_))
        ));
        assert!(matches!(RunConfig::parse("m = two"), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::parse("just words"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn json_override_merges() {
        let c = RunConfig::default()
            .apply_json(r#"{"m": 4, "profile_params": {"rho0_factor": 0.5}}"#)
            .unwrap();
        assert_eq!(c.m, 4);
        assert_eq!(c.profile_params.rho0_factor, 0.5);
        assert_eq!(c.profile_params.length_policy, LengthPolicy::AtLeastMinimal);
        assert!(RunConfig::default().apply_json("[1]").is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig {
            schedule: vec![0.5, 0.5],
            ..RunConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Validation(_))));
        c.schedule = vec![0.5];
        c.m = 1;
        assert!(c.validate().is_err());
        c.m = 2;
        c.sample_size = 0;
        assert!(c.validate().is_err());
    }
}
