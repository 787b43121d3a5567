//! Synthetic VAR data with known structural parameters, closed-form impulse
//! responses computed from the true coefficients, and Monte Carlo recovery
//! experiments built on top of them.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bootstrap::{bootstrap_from_estimate, quantile_sorted, substream_rng, BootstrapConfig, ModelConfig};
use crate::ingest::{MacroDataset, TransformedPanel, ENDOGENOUS_LABELS, EXOGENOUS_LABELS};
use crate::series::{Quarter, QuarterlySeries, Unit};
use crate::svar::{identify_cholesky, irf, multiplier_path, IrfSet};
use crate::var::{companion_matrix, estimate_var, spectral_radius};

fn default_burn_in() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DgpError {
    #[error("invalid DGP: {0}")]
    Spec(String),
    #[error("true process is not stable (max companion modulus {0:.6})")]
    Unstable(f64),
    #[error("analytic multiplier undefined at horizon {horizon}: cumulative spending response {value:e}")]
    Degenerate { horizon: usize, value: f64 },
    #[error("invalid estimator configuration: {0}")]
    Estimator(String),
    #[error("synthetic levels: {0}")]
    Levels(String),
}

/// True parameters of a simulated VAR with recursive structural shocks.
/// Matrices are written row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub constant: Vec<f64>,
    /// `lags[i]` multiplies `X_{t-i-1}`.
    pub lags: Vec<Vec<Vec<f64>>>,
    /// Lower-triangular impact matrix `B`.
    pub impact: Vec<Vec<f64>>,
    /// k x m loadings on i.i.d. standard normal controls.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exog_coef: Option<Vec<Vec<f64>>>,
    pub sample_length: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

fn rows_to_matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>, DgpError> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(DgpError::Spec(format!("{what} must be {nrows} x {ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

impl DgpSpec {
    /// A four-variable `[G, T, Y, i]` process in which spending is
    /// persistent and output responds positively to it. Stable, with
    /// quarterly magnitudes comparable to real data.
    pub fn fiscal_reference(sample_length: usize, seed: u64) -> Self {
        let lag1 = vec![
            vec![0.50, 0.00, 0.10, 0.00],
            vec![0.10, 0.30, 0.20, 0.00],
            vec![0.30, -0.10, 0.40, -0.05],
            vec![0.00, 0.00, 0.20, 0.50],
        ];
        let impact = vec![
            vec![0.015, 0.0, 0.0, 0.0],
            vec![0.003, 0.008, 0.0, 0.0],
            vec![0.006, 0.002, 0.008, 0.0],
            vec![0.001, 0.001, 0.003, 0.020],
        ];
        Self {
            constant: vec![0.002, 0.001, 0.004, 0.0],
            lags: vec![lag1],
            impact,
            exog_coef: None,
            sample_length,
            burn_in: default_burn_in(),
            seed,
            labels: None,
        }
    }

    pub fn n_endogenous(&self) -> usize {
        self.constant.len()
    }

    pub fn labels(&self) -> Vec<String> {
        match &self.labels {
            Some(l) => l.clone(),
            None if self.n_endogenous() == 4 => ENDOGENOUS_LABELS.iter().map(|s| s.to_string()).collect(),
            None => (0..self.n_endogenous()).map(|i| format!("x{i}")).collect(),
        }
    }

    pub fn gammas(&self) -> Result<Vec<DMatrix<f64>>, DgpError> {
        let k = self.n_endogenous();
        self.lags
            .iter()
            .enumerate()
            .map(|(i, g)| rows_to_matrix(g, k, k, &format!("lag matrix {}", i + 1)))
            .collect()
    }

    pub fn impact_matrix(&self) -> Result<DMatrix<f64>, DgpError> {
        let k = self.n_endogenous();
        rows_to_matrix(&self.impact, k, k, "impact matrix")
    }

    pub fn exog_matrix(&self) -> Result<DMatrix<f64>, DgpError> {
        let k = self.n_endogenous();
        match &self.exog_coef {
            None => Ok(DMatrix::zeros(k, 0)),
            Some(rows) => {
                let m = rows.first().map_or(0, |r| r.len());
                rows_to_matrix(rows, k, m, "exogenous coefficients")
            }
        }
    }

    /// Largest modulus among companion eigenvalues of the true process.
    pub fn max_modulus(&self) -> Result<f64, DgpError> {
        Ok(spectral_radius(&companion_matrix(&self.gammas()?)))
    }

    /// Checks shapes, the triangular impact pattern and stability.
    /// A zero diagonal is accepted so that degenerate processes can be simulated.
    pub fn validate(&self) -> Result<(), DgpError> {
        let k = self.n_endogenous();
        if k == 0 {
            return Err(DgpError::Spec("at least one variable required".into()));
        }
        if self.lags.is_empty() {
            return Err(DgpError::Spec("at least one lag matrix required".into()));
        }
        if self.sample_length == 0 {
            return Err(DgpError::Spec("sample_length must be positive".into()));
        }
        if self.labels().len() != k {
            return Err(DgpError::Spec(format!(
                "{} labels for {k} variables",
                self.labels().len()
            )));
        }
        let b = self.impact_matrix()?;
        self.exog_matrix()?;
        for i in 0..k {
            if b[(i, i)] < 0.0 {
                return Err(DgpError::Spec(format!("impact diagonal entry {i} is negative")));
            }
            if (i + 1..k).any(|j| b[(i, j)] != 0.0) {
                return Err(DgpError::Spec("impact matrix must be lower triangular".into()));
            }
        }
        let modulus = self.max_modulus()?;
        if modulus.is_nan() || modulus >= 1.0 {
            return Err(DgpError::Unstable(modulus));
        }
        Ok(())
    }
}

/// Simulates `X_t = c + sum Gamma_i X_{t-i} + D z_t + B e_t` from a zero
/// state, discarding the burn-in.
pub fn simulate_var(spec: &DgpSpec) -> Result<TransformedPanel, DgpError> {
    spec.validate()?;
    let k = spec.n_endogenous();
    let p = spec.lags.len();
    let gammas = spec.gammas()?;
    let b = spec.impact_matrix()?;
    let d = spec.exog_matrix()?;
    let m = d.ncols();
    let c = DVector::from_column_slice(&spec.constant);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.burn_in + spec.sample_length;
    let mut x = DMatrix::zeros(total, k);
    let mut z = DMatrix::zeros(total, m);
    for t in 0..total {
        let eps = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
        for j in 0..m {
            z[(t, j)] = StandardNormal.sample(&mut rng);
        }
        let mut next = &c + &b * eps + &d * z.row(t).transpose();
        for (i, gamma) in gammas.iter().enumerate().take(p) {
            if t > i {
                next += gamma * x.row(t - i - 1).transpose();
            }
        }
        x.set_row(t, &next.transpose());
    }
    let keep = |mat: DMatrix<f64>| mat.rows(spec.burn_in, spec.sample_length).into_owned();
    let exog_labels = if m == EXOGENOUS_LABELS.len() {
        EXOGENOUS_LABELS.iter().map(|s| s.to_string()).collect()
    } else {
        (0..m).map(|j| format!("z{j}")).collect()
    };
    TransformedPanel::new(
        Quarter::new(2000, 1).expect("valid quarter"),
        spec.labels(),
        keep(x),
        exog_labels,
        keep(z),
    )
    .map_err(|e| DgpError::Spec(e.to_string()))
}

/// Exact responses from the true parameters via the moving-average
/// recursion `Psi_h = sum_i Gamma_i Psi_{h-i}`, `Psi_0 = I`.
pub fn analytic_irf(spec: &DgpSpec, horizon: usize, shock: usize) -> Result<IrfSet, DgpError> {
    let k = spec.n_endogenous();
    if shock >= k {
        return Err(DgpError::Spec(format!("shock {shock} out of range for {k} variables")));
    }
    let gammas = spec.gammas()?;
    let b = spec.impact_matrix()?;
    let mut psi: Vec<DMatrix<f64>> = vec![DMatrix::identity(k, k)];
    for h in 1..=horizon {
        let mut next = DMatrix::zeros(k, k);
        for (i, gamma) in gammas.iter().enumerate() {
            if h > i {
                next += gamma * &psi[h - i - 1];
            }
        }
        psi.push(next);
    }
    let shock_column = b.column(shock).into_owned();
    let mut responses = DMatrix::zeros(horizon + 1, k);
    for (h, p) in psi.iter().enumerate() {
        responses.set_row(h, &(p * &shock_column).transpose());
    }
    Ok(IrfSet::from_responses(shock, spec.labels(), responses))
}

/// True cumulative multipliers for quarters 1..=H.
pub fn analytic_multipliers(
    spec: &DgpSpec,
    horizon: usize,
    spending: usize,
    output: usize,
) -> Result<Vec<f64>, DgpError> {
    let irfs = analytic_irf(spec, horizon, spending)?;
    let r = irfs.responses();
    let (mut g, mut y) = (0.0, 0.0);
    (0..horizon)
        .map(|j| {
            g += r[(j, spending)];
            y += r[(j, output)];
            if g.abs() <= 1e-12 {
                Err(DgpError::Degenerate {
                    horizon: j + 1,
                    value: g,
                })
            } else {
                Ok(y / g)
            }
        })
        .collect()
}

/// Settings for fitting each simulated sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorConfig {
    pub lags: usize,
    pub horizon: usize,
    pub spending: usize,
    pub output: usize,
    /// Bootstrap replications per trial; 0 skips coverage.
    pub replications: usize,
    pub levels: Vec<f64>,
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            lags: 4,
            horizon: 20,
            spending: 0,
            output: 2,
            replications: 0,
            levels: vec![68.0, 90.0],
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCoverage {
    pub level: f64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonRecovery {
    pub horizon: usize,
    pub analytic: f64,
    pub median_bias: f64,
    pub median_abs_error: f64,
    pub rmse: f64,
    /// Empty when no bootstrap was run.
    pub coverage: Vec<LevelCoverage>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub trials: usize,
    pub sample_length: usize,
    pub estimator: EstimatorConfig,
    pub failures: Vec<TrialFailure>,
    pub horizons: Vec<HorizonRecovery>,
    /// Per-trial multiplier estimates, `None` for failed trials.
    pub estimates: Vec<Option<Vec<f64>>>,
}

impl RecoveryReport {
    pub fn at(&self, horizon: usize) -> Option<&HorizonRecovery> {
        self.horizons.iter().find(|h| h.horizon == horizon)
    }
}

struct TrialOutcome {
    multipliers: Vec<f64>,
    /// Per level, per horizon: band contains the truth.
    covered: Vec<Vec<bool>>,
}

fn run_trial(spec: &DgpSpec, estimator: &EstimatorConfig, truth: &[f64], trial: usize) -> Result<TrialOutcome, String> {
    let mut seeds = substream_rng(spec.seed, trial as u64);
    let sample_spec = DgpSpec {
        seed: seeds.next_u64(),
        ..spec.clone()
    };
    let bootstrap_seed = seeds.next_u64();
    let panel = simulate_var(&sample_spec).map_err(|e| e.to_string())?;
    let estimate = estimate_var(&panel, estimator.lags).map_err(|e| e.to_string())?;
    let model = identify_cholesky(estimate.sigma(), panel.labels()).map_err(|e| e.to_string())?;
    let irfs = irf(&estimate, &model, estimator.horizon, estimator.spending).map_err(|e| e.to_string())?;
    let path =
        multiplier_path(&irfs, estimator.spending, estimator.output, estimator.horizon).map_err(|e| e.to_string())?;

    let mut covered = Vec::new();
    if estimator.replications > 0 {
        let config = BootstrapConfig {
            replications: estimator.replications,
            seed: bootstrap_seed,
            levels: estimator.levels.clone(),
            horizon: estimator.horizon,
            workers: None,
        };
        let model = ModelConfig {
            lags: estimator.lags,
            spending: estimator.spending,
            output: estimator.output,
        };
        let result = bootstrap_from_estimate(&panel, &estimate, &config, &model).map_err(|e| e.to_string())?;
        covered = result
            .multiplier_bands
            .levels
            .iter()
            .map(|band| {
                truth
                    .iter()
                    .enumerate()
                    .map(|(h, &t)| band.lower[h] <= t && t <= band.upper[h])
                    .collect()
            })
            .collect();
    }
    Ok(TrialOutcome {
        multipliers: path.values().to_vec(),
        covered,
    })
}

/// Repeats simulate, estimate, identify and (optionally) bootstrap
/// `n_trials` times and compares the estimated multipliers with the truth.
pub fn monte_carlo_recovery(
    spec: &DgpSpec,
    n_trials: usize,
    estimator: &EstimatorConfig,
) -> Result<RecoveryReport, DgpError> {
    spec.validate()?;
    if n_trials == 0 {
        return Err(DgpError::Estimator("n_trials must be at least 1".into()));
    }
    if estimator.horizon == 0 || estimator.lags == 0 {
        return Err(DgpError::Estimator("lags and horizon must be at least 1".into()));
    }
    let truth = analytic_multipliers(spec, estimator.horizon, estimator.spending, estimator.output)?;

    let run = || {
        (0..n_trials)
            .into_par_iter()
            .map(|trial| run_trial(spec, estimator, &truth, trial))
            .collect::<Vec<_>>()
    };
    let outcomes = match estimator.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| DgpError::Estimator(e.to_string()))?
            .install(run),
        None => run(),
    };

    let mut failures = Vec::new();
    let mut estimates = Vec::with_capacity(n_trials);
    let mut successes = Vec::new();
    for (trial, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                estimates.push(Some(o.multipliers.clone()));
                successes.push(o);
            }
            Err(reason) => {
                estimates.push(None);
                failures.push(TrialFailure { trial, reason });
            }
        }
    }

    let mut levels = estimator.levels.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let horizons = truth
        .iter()
        .enumerate()
        .map(|(h, &analytic)| {
            let errors: Vec<f64> = successes.iter().map(|o| o.multipliers[h] - analytic).collect();
            let median = |mut v: Vec<f64>| {
                if v.is_empty() {
                    return f64::NAN;
                }
                v.sort_by(f64::total_cmp);
                quantile_sorted(&v, 0.5)
            };
            let n = errors.len() as f64;
            let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
            let coverage = if estimator.replications > 0 {
                levels
                    .iter()
                    .enumerate()
                    .map(|(li, &level)| LevelCoverage {
                        level,
                        share: successes.iter().filter(|o| o.covered[li][h]).count() as f64 / n,
                    })
                    .collect()
            } else {
                Vec::new()
            };
            HorizonRecovery {
                horizon: h + 1,
                analytic,
                median_bias: median(errors.clone()),
                median_abs_error: median(errors.iter().map(|e| e.abs()).collect()),
                rmse,
                coverage,
            }
        })
        .collect();

    Ok(RecoveryReport {
        trials: n_trials,
        sample_length: spec.sample_length,
        estimator: estimator.clone(),
        failures,
        horizons,
        estimates,
    })
}

/// Level data whose transformed panel reproduces `panel`.
///
/// `panel` must carry `G, T, Y, i` (rate in first differences). When it has
/// the three standard controls they are inverted too; otherwise US series
/// are drawn from `seed`. Prices grow 0.6% per quarter and subsidies are 3%
/// of nominal output; neither affects the rebuilt panel.
pub fn synthetic_dataset(panel: &TransformedPanel, country: &str, seed: u64) -> Result<MacroDataset, DgpError> {
    let col = |label: &str| {
        panel
            .index_of(label)
            .ok_or_else(|| DgpError::Levels(format!("panel has no `{label}` column")))
    };
    let (gi, ti, yi, ii) = (col("G")?, col("T")?, col("Y")?, col("i")?);
    let x = panel.x();
    let n = panel.rows();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let controls: DMatrix<f64> = if panel.exog_labels() == EXOGENOUS_LABELS {
        panel.z().clone()
    } else {
        DMatrix::from_fn(n, 3, |_, c| match c {
            0 => 0.006 + 0.005 * normal(),
            1 => 2.0 + 0.5 * normal(),
            _ => 0.25 * normal(),
        })
    };

    let mut cpi = vec![100.0];
    let mut y = vec![1000.0];
    let mut g = vec![200.0];
    let mut t = vec![80.0];
    let mut rate = vec![3.0];
    let mut us_gdp = vec![20_000.0];
    let mut us_inflation = vec![2.0];
    let mut us_rate = vec![2.0];
    let positive = |v: f64| v > 0.0;
    for r in 0..n {
        let y_prev = y[r];
        let growth = x[(r, yi)];
        if !positive(1.0 + growth) || !positive(1.0 + controls[(r, 0)]) {
            return Err(DgpError::Levels(format!(
                "growth at row {r} drives a level non-positive"
            )));
        }
        cpi.push(cpi[r] * 1.006);
        y.push(y_prev * (1.0 + growth));
        g.push(g[r] + x[(r, gi)] * y_prev);
        t.push(t[r] + x[(r, ti)] * y_prev);
        rate.push(rate[r] + x[(r, ii)]);
        us_gdp.push(us_gdp[r] * (1.0 + controls[(r, 0)]));
        us_inflation.push(controls[(r, 1)]);
        us_rate.push(us_rate[r] + controls[(r, 2)]);
    }

    let nominal = |real: &[f64]| -> Vec<f64> { real.iter().zip(&cpi).map(|(v, p)| v * p).collect() };
    let gdp_nominal = nominal(&y);
    let subsidies: Vec<f64> = gdp_nominal.iter().map(|v| 0.03 * v).collect();
    let total: Vec<f64> = nominal(&g).iter().zip(&subsidies).map(|(g, s)| g + s).collect();

    let start = panel.start().offset(-1);
    let series = |values: Vec<f64>, unit: Unit| {
        QuarterlySeries::new(start, values, unit).map_err(|e| DgpError::Levels(e.to_string()))
    };
    Ok(MacroDataset {
        country: country.to_string(),
        total_expenditure: series(total, Unit::LevelCurrency)?,
        subsidies: series(subsidies, Unit::LevelCurrency)?,
        vat: series(nominal(&t), Unit::LevelCurrency)?,
        gdp: series(gdp_nominal, Unit::LevelCurrency)?,
        cpi: series(cpi.clone(), Unit::Index)?,
        short_rate: series(rate, Unit::RatePercent)?,
        us_gdp: series(us_gdp, Unit::LevelCurrency)?,
        us_inflation: series(us_inflation, Unit::RatePercent)?,
        us_short_rate: series(us_rate, Unit::RatePercent)?,
    })
}
