//! Point estimate plus bootstrap bands for one country panel.

use thiserror::Error;

use crate::bootstrap::{bootstrap_from_estimate, BootstrapConfig, BootstrapError, BootstrapResult, ModelConfig};
use crate::ingest::{PanelError, TransformedPanel, ENDOGENOUS_LABELS};
use crate::svar::{identify_cholesky, irf, multiplier_path, IrfSet, MultiplierPath, StructuralModel, SvarError};
use crate::var::{estimate_var, stability, Stability, VarError, VarEstimate};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("estimation failed: {0}")]
    Estimate(#[from] VarError),
    #[error("identification failed: {0}")]
    Identify(#[from] SvarError),
    #[error("inference failed: {0}")]
    Bootstrap(#[from] BootstrapError),
    #[error("panel has no `{0}` column")]
    MissingVariable(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub lags: usize,
    /// Identification order; the panel is permuted into it.
    pub ordering: Vec<String>,
    pub bootstrap: BootstrapConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            lags: 4,
            ordering: ENDOGENOUS_LABELS.iter().map(|s| s.to_string()).collect(),
            bootstrap: BootstrapConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CountryAnalysis {
    /// The panel in identification order.
    pub panel: TransformedPanel,
    pub estimate: VarEstimate,
    pub stability: Stability,
    pub model: StructuralModel,
    pub irfs: IrfSet,
    pub multipliers: MultiplierPath,
    pub bootstrap: BootstrapResult,
    pub spending: usize,
    pub output: usize,
}

/// Estimates, identifies, computes responses to a one-standard-deviation
/// spending shock, and attaches bootstrap bands.
pub fn analyze(panel: &TransformedPanel, config: &AnalysisConfig) -> Result<CountryAnalysis, AnalysisError> {
    let panel = panel.reorder(&config.ordering)?;
    let spending = panel.index_of("G").ok_or(AnalysisError::MissingVariable("G"))?;
    let output = panel.index_of("Y").ok_or(AnalysisError::MissingVariable("Y"))?;
    let horizon = config.bootstrap.horizon;

    let estimate = estimate_var(&panel, config.lags)?;
    let stability = stability(&estimate);
    if !stability.stable {
        log::warn!(
            "point estimate is not stable (max modulus {:.4})",
            stability.max_modulus
        );
    }
    let model = identify_cholesky(estimate.sigma(), panel.labels())?;
    let irfs = irf(&estimate, &model, horizon, spending)?;
    let point = multiplier_path(&irfs, spending, output, horizon)?;

    let model_config = ModelConfig {
        lags: config.lags,
        spending,
        output,
    };
    let bootstrap = bootstrap_from_estimate(&panel, &estimate, &config.bootstrap, &model_config)?;
    let multipliers = point.with_bands(bootstrap.multiplier_bands.clone())?;
    Ok(CountryAnalysis {
        panel,
        estimate,
        stability,
        model,
        irfs,
        multipliers,
        bootstrap,
        spending,
        output,
    })
}
