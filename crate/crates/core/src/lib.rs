//! Structural VAR toolkit for government-spending shocks.
//!
//! Level data are turned into changes scaled by lagged output, a reduced-form
//! VAR(p) is fitted by least squares, the spending shock is identified by a
//! Cholesky factorisation with spending ordered first, and cumulative
//! multipliers are read off the cumulated impulse responses. Inference uses a
//! residual bootstrap with percentile bands.

pub mod analysis;
pub mod bootstrap;
pub mod dgp;
pub mod ingest;
pub mod series;
pub mod svar;
pub mod var;

pub use analysis::{analyze, AnalysisConfig, AnalysisError, CountryAnalysis};
pub use bootstrap::{
    bootstrap_inference, quantile_bands, resample_residuals, significance_flags, simulate_bootstrap_series, BandLevel,
    Bands, BootstrapConfig, BootstrapError, BootstrapResult, ModelConfig, Significance,
};
pub use dgp::{analytic_irf, monte_carlo_recovery, simulate_var, DgpError, DgpSpec, EstimatorConfig, RecoveryReport};
pub use ingest::{build_panel, load_csv, ColumnSchema, IngestError, MacroDataset, TransformedPanel};
pub use series::{Quarter, QuarterRange, QuarterlySeries, SeriesError, Unit};
pub use svar::{identify_cholesky, irf, multiplier_path, IrfSet, MultiplierPath, StructuralModel, SvarError};
pub use var::{estimate_var, residual_cov, stability, Stability, VarError, VarEstimate};
