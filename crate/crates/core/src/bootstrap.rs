//! Residual bootstrap: resample VAR innovations by row, rebuild the panel
//! recursively, re-estimate, and collect percentile bands for impulse
//! responses and multipliers.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::TransformedPanel;
use crate::svar::{identify_cholesky, irf, multiplier_path, SvarError};
use crate::var::{estimate_var, stability, VarError, VarEstimate};

/// Replication failure share above which inference is abandoned.
pub const MAX_FAILURE_SHARE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BootstrapError {
    #[error("invalid bootstrap configuration: {0}")]
    Config(String),
    #[error("no samples at horizon {0}")]
    EmptySamples(usize),
    #[error("band level {0}% is required but missing")]
    MissingLevel(f64),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("point estimate failed: {0}")]
    Estimate(#[from] VarError),
    #[error("point identification failed: {0}")]
    Identify(#[from] SvarError),
    #[error("{failed} of {total} bootstrap replications failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

/// Table-style significance marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Significance {
    #[default]
    None,
    /// 68% band excludes zero.
    Weak,
    /// 90% band excludes zero.
    Strong,
}

impl Significance {
    pub fn stars(self) -> &'static str {
        match self {
            Significance::None => "",
            Significance::Weak => "*",
            Significance::Strong => "**",
        }
    }

    pub fn from_stars(s: &str) -> Option<Self> {
        match s {
            "" => Some(Significance::None),
            "*" => Some(Significance::Weak),
            "**" => Some(Significance::Strong),
            _ => None,
        }
    }
}

impl Serialize for Significance {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.stars())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandLevel {
    /// Coverage in percent, e.g. 90.0.
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Percentile bands per coverage level, sorted by ascending level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bands {
    pub levels: Vec<BandLevel>,
}

impl Bands {
    pub fn level(&self, level: f64) -> Option<&BandLevel> {
        self.levels.iter().find(|b| b.level == level)
    }

    pub fn horizons(&self) -> usize {
        self.levels.first().map_or(0, |b| b.lower.len())
    }
}

/// Linear interpolation between order statistics at 1-based position
/// `q (n - 1) + 1`. `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

fn check_levels(levels: &[f64]) -> Result<(), BootstrapError> {
    if levels.is_empty() {
        return Err(BootstrapError::Config("at least one band level required".into()));
    }
    match levels.iter().find(|l| !(**l > 0.0 && **l < 100.0)) {
        Some(l) => Err(BootstrapError::Config(format!(
            "band level {l} must lie strictly between 0 and 100"
        ))),
        None => Ok(()),
    }
}

/// Central percentile bands: level `L` spans the `(100-L)/2` and `(100+L)/2`
/// percentiles of each horizon's samples.
pub fn quantile_bands(samples: &[Vec<f64>], levels: &[f64]) -> Result<Bands, BootstrapError> {
    check_levels(levels)?;
    let mut sorted = Vec::with_capacity(samples.len());
    for (h, s) in samples.iter().enumerate() {
        if s.is_empty() {
            return Err(BootstrapError::EmptySamples(h));
        }
        let mut s = s.clone();
        s.sort_by(f64::total_cmp);
        sorted.push(s);
    }
    let mut levels = levels.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let levels = levels
        .into_iter()
        .map(|level| {
            let lo_q = (100.0 - level) / 200.0;
            let hi_q = (100.0 + level) / 200.0;
            BandLevel {
                level,
                lower: sorted.iter().map(|s| quantile_sorted(s, lo_q)).collect(),
                upper: sorted.iter().map(|s| quantile_sorted(s, hi_q)).collect(),
            }
        })
        .collect();
    Ok(Bands { levels })
}

fn excludes_zero(band: &BandLevel, h: usize) -> bool {
    band.lower[h] > 0.0 || band.upper[h] < 0.0
}

/// `**` when the 90% band excludes zero, otherwise `*` when the 68% band does.
pub fn significance_flags(bands: &Bands, point: &[f64]) -> Result<Vec<Significance>, BootstrapError> {
    let wide = bands.level(90.0).ok_or(BootstrapError::MissingLevel(90.0))?;
    let narrow = bands.level(68.0).ok_or(BootstrapError::MissingLevel(68.0))?;
    if wide.lower.len() != point.len() || narrow.lower.len() != point.len() {
        return Err(BootstrapError::Shape(format!(
            "bands cover {} horizons, point estimate has {}",
            wide.lower.len(),
            point.len()
        )));
    }
    Ok((0..point.len())
        .map(|h| {
            if excludes_zero(wide, h) {
                Significance::Strong
            } else if excludes_zero(narrow, h) {
                Significance::Weak
            } else {
                Significance::None
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub seed: u64,
    /// Band coverage levels in percent.
    pub levels: Vec<f64>,
    pub horizon: usize,
    /// Worker threads; `None` uses the ambient rayon pool. Results do not
    /// depend on this value.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replications: 1000,
            seed: 0,
            levels: vec![68.0, 90.0],
            horizon: 20,
            workers: None,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), BootstrapError> {
        if self.replications == 0 {
            return Err(BootstrapError::Config("replications must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(BootstrapError::Config("horizon must be at least 1".into()));
        }
        check_levels(&self.levels)
    }
}

/// Which VAR to fit and which columns define the multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub lags: usize,
    /// Column of government spending; also the shock index.
    pub spending: usize,
    pub output: usize,
}

impl ModelConfig {
    /// Locates `G` and `Y` by label.
    pub fn for_panel(panel: &TransformedPanel, lags: usize) -> Option<Self> {
        Some(Self {
            lags,
            spending: panel.index_of("G")?,
            output: panel.index_of("Y")?,
        })
    }
}

/// Independent generator for replication `index`, keyed by a hash of
/// `(seed, index)` so the stream does not depend on scheduling.
pub fn substream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Draws whole rows with replacement, keeping cross-equation correlation.
pub fn resample_residuals<R: Rng + ?Sized>(residuals: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
    let n = residuals.nrows();
    let mut out = DMatrix::zeros(n, residuals.ncols());
    if n == 0 {
        return out;
    }
    for r in 0..n {
        let src = rng.random_range(0..n);
        out.set_row(r, &residuals.row(src));
    }
    out
}

/// Rebuilds `X*` recursively from the estimated coefficients and the
/// supplied innovations. The first `p` rows and all controls are taken from
/// `observed`.
pub fn simulate_bootstrap_series(
    estimate: &VarEstimate,
    resampled: &DMatrix<f64>,
    observed: &TransformedPanel,
) -> Result<TransformedPanel, BootstrapError> {
    let p = estimate.lags();
    let k = estimate.n_endogenous();
    let rows = observed.rows();
    if observed.n_endogenous() != k
        || observed.n_exogenous() != estimate.exog_coef().ncols()
        || rows < p
        || resampled.shape() != (rows - p, k)
    {
        return Err(BootstrapError::Shape(format!(
            "innovations {}x{} and panel {}x{} (+{} controls) do not match a VAR({p}) in {k} variables",
            resampled.nrows(),
            resampled.ncols(),
            rows,
            observed.n_endogenous(),
            observed.n_exogenous()
        )));
    }
    let z = observed.z();
    let mut x = DMatrix::zeros(rows, k);
    x.rows_mut(0, p).copy_from(&observed.x().rows(0, p));
    for t in p..rows {
        let mut next = estimate.constant().clone();
        for (i, gamma) in estimate.gammas().iter().enumerate() {
            next += gamma * x.row(t - i - 1).transpose();
        }
        next += estimate.exog_coef() * z.row(t).transpose();
        next += resampled.row(t - p).transpose();
        x.set_row(t, &next.transpose());
    }
    observed
        .with_endogenous(x)
        .map_err(|e| BootstrapError::Shape(e.to_string()))
}

/// Output of one successful replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: usize,
    pub multipliers: Vec<f64>,
    /// (H+1) x k responses to the spending shock.
    pub responses: DMatrix<f64>,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedReplication {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// Successful replications, sorted by index.
    pub replications: Vec<Replication>,
    pub failed: Vec<FailedReplication>,
    /// Successful replications whose re-estimated VAR is explosive.
    pub unstable: usize,
    /// Multiplier bands for quarters 1..=H.
    pub multiplier_bands: Bands,
    /// Per variable, bands over h = 0..=H.
    pub response_bands: Vec<Bands>,
    pub cumulative_bands: Vec<Bands>,
}

impl BootstrapResult {
    pub fn attempted(&self) -> usize {
        self.replications.len() + self.failed.len()
    }
}

/// Full residual bootstrap around the panel's own point estimate.
pub fn bootstrap_inference(
    panel: &TransformedPanel,
    config: &BootstrapConfig,
    model: &ModelConfig,
) -> Result<BootstrapResult, BootstrapError> {
    let estimate = estimate_var(panel, model.lags)?;
    bootstrap_from_estimate(panel, &estimate, config, model)
}

/// As [`bootstrap_inference`], reusing an already fitted estimate.
pub fn bootstrap_from_estimate(
    panel: &TransformedPanel,
    estimate: &VarEstimate,
    config: &BootstrapConfig,
    model: &ModelConfig,
) -> Result<BootstrapResult, BootstrapError> {
    config.validate()?;
    let k = panel.n_endogenous();
    if model.spending >= k || model.output >= k {
        return Err(BootstrapError::Shape(format!(
            "spending/output indices ({}, {}) out of range for {k} variables",
            model.spending, model.output
        )));
    }
    let run = || {
        (0..config.replications)
            .into_par_iter()
            .map(|index| {
                replicate(panel, estimate, config, model, index).map_err(|reason| FailedReplication { index, reason })
            })
            .collect::<Vec<_>>()
    };
    let outcomes = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| BootstrapError::Pool(e.to_string()))?
            .install(run),
        None => run(),
    };

    let mut replications = Vec::with_capacity(outcomes.len());
    let mut failed = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(r) => replications.push(r),
            Err(f) => failed.push(f),
        }
    }
    if failed.len() as f64 > MAX_FAILURE_SHARE * config.replications as f64 {
        return Err(BootstrapError::TooManyFailures {
            failed: failed.len(),
            total: config.replications,
        });
    }
    if !failed.is_empty() {
        log::warn!(
            "{} of {} bootstrap replications failed and were excluded",
            failed.len(),
            config.replications
        );
    }
    let unstable = replications.iter().filter(|r| !r.stable).count();

    let h = config.horizon;
    let multiplier_samples: Vec<Vec<f64>> = (0..h)
        .map(|i| replications.iter().map(|r| r.multipliers[i]).collect())
        .collect();
    let multiplier_bands = quantile_bands(&multiplier_samples, &config.levels)?;
    let mut response_bands = Vec::with_capacity(k);
    let mut cumulative_bands = Vec::with_capacity(k);
    for v in 0..k {
        let mut responses = vec![Vec::with_capacity(replications.len()); h + 1];
        let mut cumulative = vec![Vec::with_capacity(replications.len()); h + 1];
        for r in &replications {
            let mut sum = 0.0;
            for step in 0..=h {
                let value = r.responses[(step, v)];
                sum += value;
                responses[step].push(value);
                cumulative[step].push(sum);
            }
        }
        response_bands.push(quantile_bands(&responses, &config.levels)?);
        cumulative_bands.push(quantile_bands(&cumulative, &config.levels)?);
    }

    Ok(BootstrapResult {
        replications,
        failed,
        unstable,
        multiplier_bands,
        response_bands,
        cumulative_bands,
    })
}

fn replicate(
    panel: &TransformedPanel,
    estimate: &VarEstimate,
    config: &BootstrapConfig,
    model: &ModelConfig,
    index: usize,
) -> Result<Replication, String> {
    let mut rng = substream_rng(config.seed, index as u64);
    let innovations = resample_residuals(estimate.residuals(), &mut rng);
    let simulated = simulate_bootstrap_series(estimate, &innovations, panel).map_err(|e| e.to_string())?;
    let refit = estimate_var(&simulated, model.lags).map_err(|e| e.to_string())?;
    let structural = identify_cholesky(refit.sigma(), simulated.labels()).map_err(|e| e.to_string())?;
    let irfs = irf(&refit, &structural, config.horizon, model.spending).map_err(|e| e.to_string())?;
    let path = multiplier_path(&irfs, model.spending, model.output, config.horizon).map_err(|e| e.to_string())?;
    Ok(Replication {
        index,
        multipliers: path.values().to_vec(),
        responses: irfs.responses().clone(),
        stable: stability(&refit).stable,
    })
}
