//! Strict JSON run configuration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use fiscal_svar::ingest::{ColumnSchema, RateTransform, ENDOGENOUS_LABELS};
use fiscal_svar::QuarterRange;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Output directory used when neither the flag, the config nor the
/// environment names one.
pub const DEFAULT_OUTPUT_DIR: &str = "fiscal-svar-out";
pub const OUTPUT_DIR_ENV: &str = "FISCAL_SVAR_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountryEntry {
    /// Short code used in file names, e.g. `CZ`.
    pub code: String,
    /// Level data; relative paths resolve against the config file.
    pub csv: PathBuf,
    /// Column header in the table; defaults to the code.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub schema: ColumnSchema,
}

impl CountryEntry {
    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.code)
    }
}

fn default_lag_order() -> usize {
    4
}

fn default_horizon() -> usize {
    20
}

fn default_ordering() -> Vec<String> {
    ENDOGENOUS_LABELS.iter().map(|s| s.to_string()).collect()
}

fn default_replications() -> usize {
    1000
}

fn default_band_levels() -> Vec<f64> {
    vec![68.0, 90.0]
}

fn default_plots() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub countries: Vec<CountryEntry>,
    #[serde(default)]
    pub window: QuarterRange,
    #[serde(default = "default_lag_order")]
    pub lag_order: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_ordering")]
    pub ordering: Vec<String>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_band_levels")]
    pub band_levels: Vec<f64>,
    #[serde(default)]
    pub rate_transform: RateTransform,
    #[serde(default = "default_plots")]
    pub plots: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Thread count for the whole run. Never affects results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// Fields that determine the numbers in the output bundle.
#[derive(Serialize)]
struct HashedFields<'a> {
    countries: &'a [CountryEntry],
    window: &'a QuarterRange,
    lag_order: usize,
    horizon: usize,
    ordering: &'a [String],
    replications: usize,
    seed: u64,
    band_levels: &'a [f64],
    rate_transform: RateTransform,
    plots: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.countries.is_empty() {
            return bad("`countries` must list at least one country".into());
        }
        let mut codes = BTreeSet::new();
        for c in &self.countries {
            if c.code.is_empty()
                || !c
                    .code
                    .chars()
                    .all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-')
            {
                return bad(format!(
                    "country code `{}` must be non-empty ASCII letters, digits, `_` or `-`",
                    c.code
                ));
            }
            if !codes.insert(c.code.as_str()) {
                return bad(format!("country code `{}` is listed twice", c.code));
            }
        }
        if !self.window.is_well_formed() {
            return bad(format!(
                "`window` runs backwards: {} to {}",
                self.window.start, self.window.end
            ));
        }
        if self.lag_order == 0 {
            return bad("`lag_order` must be at least 1".into());
        }
        if self.horizon == 0 {
            return bad("`horizon` must be at least 1".into());
        }
        if self.replications == 0 {
            return bad("`replications` must be at least 1".into());
        }
        if self.workers == Some(0) {
            return bad("`workers` must be at least 1".into());
        }
        let mut sorted = self.ordering.clone();
        sorted.sort();
        let mut expected = default_ordering();
        expected.sort();
        if sorted != expected {
            return bad(format!("`ordering` must be a permutation of {:?}", ENDOGENOUS_LABELS));
        }
        if let Some(l) = self.band_levels.iter().find(|l| !(**l > 0.0 && **l < 100.0)) {
            return bad(format!("band level {l} is outside (0, 100)"));
        }
        for required in [68.0, 90.0] {
            if !self.band_levels.contains(&required) {
                return bad(format!(
                    "`band_levels` must include {required} for the significance stars"
                ));
            }
        }
        Ok(())
    }

    /// SHA-256 over the effective settings, ignoring where output goes and
    /// how many threads compute it.
    pub fn hash(&self) -> String {
        let fields = HashedFields {
            countries: &self.countries,
            window: &self.window,
            lag_order: self.lag_order,
            horizon: self.horizon,
            ordering: &self.ordering,
            replications: self.replications,
            seed: self.seed,
            band_levels: &self.band_levels,
            rate_transform: self.rate_transform,
            plots: self.plots,
        };
        let bytes = serde_json::to_vec(&fields).expect("config serializes");
        hex(&Sha256::digest(&bytes))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Command-line overrides layered on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub horizon: Option<usize>,
    pub countries: Option<Vec<String>>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Directory containing the config file.
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = RunConfig::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    pub fn apply(mut self, overrides: &Overrides) -> Result<Self, CliError> {
        let c = &mut self.config;
        if let Some(seed) = overrides.seed {
            c.seed = seed;
        }
        if let Some(r) = overrides.replications {
            c.replications = r;
        }
        if let Some(h) = overrides.horizon {
            c.horizon = h;
        }
        if let Some(w) = overrides.workers {
            c.workers = Some(w);
        }
        if let Some(filter) = &overrides.countries {
            if let Some(unknown) = filter.iter().find(|f| !c.countries.iter().any(|e| &e.code == *f)) {
                return Err(CliError::Config(format!("--countries names unknown code `{unknown}`")));
            }
            c.countries.retain(|e| filter.contains(&e.code));
        }
        c.validate()?;
        Ok(self)
    }

    pub fn csv_path(&self, entry: &CountryEntry) -> PathBuf {
        if entry.csv.is_absolute() {
            entry.csv.clone()
        } else {
            self.base_dir.join(&entry.csv)
        }
    }

    /// Flag, then config file, then environment, then the built-in default.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(dir) = flag {
            return dir.to_path_buf();
        }
        if let Some(dir) = &self.config.output_dir {
            return if dir.is_absolute() {
                dir.clone()
            } else {
                self.base_dir.join(dir)
            };
        }
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => PathBuf::from(DEFAULT_OUTPUT_DIR),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"countries": [{"code": "CZ", "csv": "cz.csv"}]}"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.lag_order, 4);
        assert_eq!(c.horizon, 20);
        assert_eq!(c.replications, 1000);
        assert_eq!(c.band_levels, vec![68.0, 90.0]);
        assert_eq!(c.ordering, vec!["G", "T", "Y", "i"]);
        assert_eq!(c.window, QuarterRange::default());
        assert_eq!(c.countries[0].schema, ColumnSchema::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_json(r#"{"countries": [], "lags": 4}"#).unwrap_err();
        assert!(err.to_string().contains("lags"), "{err}");
        assert_eq!(err.exit_code(), 2);
        let nested = r#"{"countries": [{"code": "CZ", "csv": "a.csv", "schema": {"gpd": "x"}}]}"#;
        assert!(RunConfig::from_json(nested).unwrap_err().to_string().contains("gpd"));
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = RunConfig::from_json("{\n  \"countries\": [\n  }").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn invariants() {
        for bad in [
            r#"{"countries": []}"#,
            r#"{"countries": [{"code": "CZ", "csv": "a"}], "horizon": 0}"#,
            r#"{"countries": [{"code": "CZ", "csv": "a"}], "window": {"start": "2019-Q1", "end": "2000-Q1"}}"#,
            r#"{"countries": [{"code": "CZ", "csv": "a"}], "band_levels": [68]}"#,
            r#"{"countries": [{"code": "CZ", "csv": "a"}], "ordering": ["G", "Y", "T"]}"#,
            r#"{"countries": [{"code": "CZ", "csv": "a"}, {"code": "CZ", "csv": "b"}]}"#,
            r#"{"countries": [{"code": "../x", "csv": "a"}]}"#,
        ] {
            assert!(matches!(RunConfig::from_json(bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn hash_tracks_meaningful_fields_only() {
        let base = RunConfig::from_json(MINIMAL).unwrap();
        let spelled = RunConfig::from_json(
            r#"{"countries": [{"code": "CZ", "csv": "cz.csv"}], "lag_order": 4, "horizon": 20,
                "replications": 1000, "seed": 0, "band_levels": [68, 90],
                "window": {"start": "1999-Q1", "end": "2019-Q4"}, "output_dir": "elsewhere", "workers": 8}"#,
        )
        .unwrap();
        assert_eq!(base.hash(), spelled.hash());
        assert_eq!(base.hash().len(), 64);

        let mut changed = base.clone();
        changed.seed = 1;
        assert_ne!(base.hash(), changed.hash());
        let mut changed = base.clone();
        changed.countries[0].schema.gdp = "GDP".into();
        assert_ne!(base.hash(), changed.hash());
        let mut changed = base.clone();
        changed.rate_transform = RateTransform::Level;
        assert_ne!(base.hash(), changed.hash());
    }

    #[test]
    fn overrides_and_filter() {
        let loaded = LoadedConfig {
            config: RunConfig::from_json(
                r#"{"countries": [{"code": "CZ", "csv": "a"}, {"code": "HU", "csv": "/abs/b"}]}"#,
            )
            .unwrap(),
            base_dir: PathBuf::from("/data"),
        };
        assert_eq!(loaded.csv_path(&loaded.config.countries[0]), PathBuf::from("/data/a"));
        assert_eq!(loaded.csv_path(&loaded.config.countries[1]), PathBuf::from("/abs/b"));
        let o = Overrides {
            seed: Some(7),
            replications: Some(50),
            horizon: Some(8),
            countries: Some(vec!["HU".into()]),
            workers: Some(2),
        };
        let applied = loaded.clone().apply(&o).unwrap();
        assert_eq!(applied.config.seed, 7);
        assert_eq!(applied.config.countries.len(), 1);
        assert_eq!(applied.config.countries[0].code, "HU");
        let unknown = Overrides {
            countries: Some(vec!["SK".into()]),
            ..Overrides::default()
        };
        assert_eq!(loaded.clone().apply(&unknown).unwrap_err().exit_code(), 2);
        let zero = Overrides {
            horizon: Some(0),
            ..Overrides::default()
        };
        assert!(loaded.apply(&zero).is_err());
    }
}
