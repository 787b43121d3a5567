//! Per-country orchestration and the on-disk report bundle.

use std::fs;
use std::path::{Path, PathBuf};

use fiscal_svar::analysis::{analyze, AnalysisConfig, AnalysisError, CountryAnalysis};
use fiscal_svar::ingest::{build_panel_with, load_csv, PanelOptions, TransformedPanel};
use fiscal_svar::{BootstrapConfig, QuarterRange};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, CountryEntry, LoadedConfig};
use crate::report::{emit_plot, emit_table, write_irf_csv, write_multiplier_csv, PlotData, TableColumn};
use crate::CliError;

/// A country whose data loaded and transformed cleanly.
#[derive(Debug, Clone)]
pub struct PreparedCountry {
    pub entry: CountryEntry,
    pub csv_path: PathBuf,
    pub csv_sha256: String,
    pub panel: TransformedPanel,
}

/// Reads and transforms every country's data. No estimation.
pub fn prepare(loaded: &LoadedConfig) -> Result<Vec<PreparedCountry>, CliError> {
    let config = &loaded.config;
    let options = PanelOptions {
        rate_transform: config.rate_transform,
    };
    config
        .countries
        .iter()
        .map(|entry| {
            let data_error = |message: String| CliError::Data {
                country: entry.code.clone(),
                message,
            };
            let csv_path = loaded.csv_path(entry);
            let bytes =
                fs::read(&csv_path).map_err(|e| data_error(format!("cannot read {}: {e}", csv_path.display())))?;
            let dataset = load_csv(&csv_path, &entry.schema, &entry.code)
                .map_err(|e| data_error(format!("{}: {e}", csv_path.display())))?;
            let panel = build_panel_with(&dataset, config.window, &options).map_err(|e| data_error(e.to_string()))?;
            Ok(PreparedCountry {
                entry: entry.clone(),
                csv_path,
                csv_sha256: hex(&Sha256::digest(&bytes)),
                panel,
            })
        })
        .collect()
}

/// Bootstrap seed for one country, derived from the master seed and code so
/// countries draw independent streams and filtering does not shift them.
pub fn country_seed(master: u64, code: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(code.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRecord {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountryManifest {
    pub code: String,
    pub name: String,
    pub csv_sha256: String,
    pub bootstrap_seed: u64,
    pub first_quarter: String,
    pub last_quarter: String,
    pub observations: usize,
    pub effective_observations: usize,
    pub max_modulus: f64,
    pub stable: bool,
    pub replications_used: usize,
    pub failed_replications: usize,
    pub unstable_replications: usize,
    pub failures: Vec<FailureRecord>,
}

/// Everything needed to tell which inputs produced a bundle. Contains no
/// timestamps or thread counts so identical runs write identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub window: QuarterRange,
    pub lag_order: usize,
    pub horizon: usize,
    pub ordering: Vec<String>,
    pub replications: usize,
    pub band_levels: Vec<f64>,
    pub countries: Vec<CountryManifest>,
    pub files: Vec<String>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub table_text: String,
    pub manifest: Manifest,
    pub analyses: Vec<(CountryEntry, CountryAnalysis)>,
}

fn analysis_config(loaded: &LoadedConfig, code: &str) -> AnalysisConfig {
    let c = &loaded.config;
    AnalysisConfig {
        lags: c.lag_order,
        ordering: c.ordering.clone(),
        bootstrap: BootstrapConfig {
            replications: c.replications,
            seed: country_seed(c.seed, code),
            levels: c.band_levels.clone(),
            horizon: c.horizon,
            // Parallelism comes from the pool the pipeline runs in.
            workers: None,
        },
    }
}

fn inference_error(code: &str, e: AnalysisError) -> CliError {
    CliError::Inference {
        country: code.to_string(),
        message: e.to_string(),
    }
}

fn analyze_all(loaded: &LoadedConfig, prepared: &[PreparedCountry]) -> Result<Vec<CountryAnalysis>, CliError> {
    let run = || {
        prepared
            .par_iter()
            .map(|p| {
                analyze(&p.panel, &analysis_config(loaded, &p.entry.code))
                    .map_err(|e| inference_error(&p.entry.code, e))
            })
            .collect::<Result<Vec<_>, _>>()
    };
    match loaded.config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {n} workers: {e}")))?
            .install(run),
        None => run(),
    }
}

struct BundleWriter {
    dir: PathBuf,
    files: Vec<String>,
}

impl BundleWriter {
    fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
        CliError::Io(format!("cannot write {}: {e}", path.display()))
    }

    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Self::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Runs every country and writes the bundle into `out_dir`.
pub fn run_pipeline(loaded: &LoadedConfig, out_dir: &Path) -> Result<RunSummary, CliError> {
    let config = &loaded.config;
    let prepared = prepare(loaded)?;
    let analyses = analyze_all(loaded, &prepared)?;

    fs::create_dir_all(out_dir).map_err(|e| BundleWriter::io(out_dir, e))?;
    if config.plots {
        let plots = out_dir.join("plots");
        fs::create_dir_all(&plots).map_err(|e| BundleWriter::io(&plots, e))?;
    }
    let mut out = BundleWriter {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    let report = |e: crate::report::ReportError| CliError::Io(e.to_string());

    let mut countries = Vec::new();
    for (p, a) in prepared.iter().zip(&analyses) {
        let code = &p.entry.code;
        let b = &a.bootstrap;

        let mut buf = Vec::new();
        write_irf_csv(&a.irfs, &b.response_bands, &b.cumulative_bands, &mut buf).map_err(report)?;
        out.bytes(&format!("irf_{code}.csv"), &buf)?;
        let mut buf = Vec::new();
        write_multiplier_csv(&a.multipliers, &mut buf).map_err(report)?;
        out.bytes(&format!("multipliers_{code}.csv"), &buf)?;

        if config.plots {
            let name = format!("plots/multipliers_{code}.svg");
            let plot = PlotData::multipliers(
                format!("{}: cumulative multiplier", p.entry.display_name()),
                &a.multipliers,
            )
            .map_err(report)?;
            emit_plot(&plot, &out_dir.join(&name)).map_err(report)?;
            out.files.push(name);
            for (v, label) in a.irfs.labels().iter().enumerate() {
                let name = format!("plots/irf_{code}_{label}.svg");
                let title = format!("{}: response of {label} to a spending shock", p.entry.display_name());
                let plot = PlotData::response(title, &a.irfs, v, &b.response_bands[v]).map_err(report)?;
                emit_plot(&plot, &out_dir.join(&name)).map_err(report)?;
                out.files.push(name);
            }
        }

        let panel = &a.panel;
        countries.push(CountryManifest {
            code: code.clone(),
            name: p.entry.display_name().to_string(),
            csv_sha256: p.csv_sha256.clone(),
            bootstrap_seed: country_seed(config.seed, code),
            first_quarter: panel.start().to_string(),
            last_quarter: panel.start().offset(panel.rows() as i64 - 1).to_string(),
            observations: panel.rows(),
            effective_observations: a.estimate.sample_size(),
            max_modulus: a.stability.max_modulus,
            stable: a.stability.stable,
            replications_used: b.replications.len(),
            failed_replications: b.failed.len(),
            unstable_replications: b.unstable,
            failures: b
                .failed
                .iter()
                .map(|f| FailureRecord {
                    index: f.index,
                    reason: f.reason.clone(),
                })
                .collect(),
        });
    }

    let columns: Vec<TableColumn<'_>> = prepared
        .iter()
        .zip(&analyses)
        .map(|(p, a)| TableColumn {
            header: p.entry.display_name().to_string(),
            path: &a.multipliers,
        })
        .collect();
    let table = emit_table(&columns).map_err(report)?;
    out.bytes("table1.txt", table.text.as_bytes())?;
    out.bytes("table1.csv", table.csv.as_bytes())?;

    out.files.push("manifest.json".into());
    out.files.sort();
    let manifest = Manifest {
        tool: "fiscal-svar".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config.hash(),
        seed: config.seed,
        window: config.window,
        lag_order: config.lag_order,
        horizon: config.horizon,
        ordering: config.ordering.clone(),
        replications: config.replications,
        band_levels: config.band_levels.clone(),
        countries,
        files: out.files.clone(),
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    let path = out_dir.join("manifest.json");
    fs::write(&path, json).map_err(|e| BundleWriter::io(&path, e))?;

    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        table_text: table.text,
        manifest,
        analyses: prepared.into_iter().map(|p| p.entry).zip(analyses).collect(),
    })
}

/// Human-readable summary of what a run would do.
pub fn validate(loaded: &LoadedConfig) -> Result<String, CliError> {
    let prepared = prepare(loaded)?;
    let c = &loaded.config;
    let mut s = format!(
        "config OK ({} countries)\n  window: {} to {}\n  p={} H={} reps={} seed={}\n  ordering: {}\n  band levels: {:?}\n  rate: {:?}\n  config hash: {}\n",
        prepared.len(),
        c.window.start,
        c.window.end,
        c.lag_order,
        c.horizon,
        c.replications,
        c.seed,
        c.ordering.join(", "),
        c.band_levels,
        c.rate_transform,
        c.hash(),
    );
    for p in &prepared {
        s.push_str(&format!(
            "  {} ({}): {} rows from {}\n",
            p.entry.code,
            p.entry.display_name(),
            p.panel.rows(),
            p.csv_path.display()
        ));
    }
    Ok(s)
}
