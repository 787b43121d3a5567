//! Recursive identification, impulse responses and cumulative multipliers.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::bootstrap::{Bands, Significance};
use crate::var::VarEstimate;

/// Smallest admissible magnitude of a cumulative spending response.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SvarError {
    #[error("covariance matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("shock index {shock} out of range for {k} variables")]
    Shock { shock: usize, k: usize },
    #[error("cumulative spending response is degenerate at horizon {horizon} ({value:e})")]
    DegenerateDenominator { horizon: usize, value: f64 },
}

/// Impact matrix `B` in `u_t = B e_t`, lower triangular in `ordering`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralModel {
    impact: DMatrix<f64>,
    ordering: Vec<String>,
}

impl StructuralModel {
    pub fn impact(&self) -> &DMatrix<f64> {
        &self.impact
    }

    pub fn ordering(&self) -> &[String] {
        &self.ordering
    }

    /// Wraps a known lower-triangular impact matrix.
    pub fn from_impact(impact: DMatrix<f64>, ordering: Vec<String>) -> Result<Self, SvarError> {
        let k = impact.nrows();
        if impact.ncols() != k || ordering.len() != k {
            return Err(SvarError::Shape(format!(
                "impact {}x{} with {} labels",
                impact.nrows(),
                impact.ncols(),
                ordering.len()
            )));
        }
        if (0..k).any(|i| (i + 1..k).any(|j| impact[(i, j)] != 0.0)) {
            return Err(SvarError::Shape("impact matrix is not lower triangular".into()));
        }
        Ok(Self { impact, ordering })
    }
}

/// Lower Cholesky factor of `sigma`. The first variable in `ordering` reacts
/// to no other structural shock within the quarter.
///
/// Any pivot `<= 0` is an error; tiny negative pivots are not repaired. The
/// reported pivot index is 1-based.
pub fn identify_cholesky<S: AsRef<str>>(sigma: &DMatrix<f64>, ordering: &[S]) -> Result<StructuralModel, SvarError> {
    let k = sigma.nrows();
    if sigma.ncols() != k || ordering.len() != k {
        return Err(SvarError::Shape(format!(
            "covariance {}x{} with {} labels",
            sigma.nrows(),
            sigma.ncols(),
            ordering.len()
        )));
    }
    let mut l = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let mut pivot = sigma[(j, j)];
        for c in 0..j {
            pivot -= l[(j, c)] * l[(j, c)];
        }
        if pivot.is_nan() || pivot <= 0.0 {
            return Err(SvarError::NotPositiveDefinite {
                pivot: j + 1,
                value: pivot,
            });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in j + 1..k {
            let mut s = sigma[(i, j)];
            for c in 0..j {
                s -= l[(i, c)] * l[(j, c)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(StructuralModel {
        impact: l,
        ordering: ordering.iter().map(|s| s.as_ref().to_string()).collect(),
    })
}

/// Responses of every variable to one structural shock, h = 0..=horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct IrfSet {
    shock: usize,
    labels: Vec<String>,
    responses: DMatrix<f64>,
    cumulative: DMatrix<f64>,
}

impl IrfSet {
    /// Builds the set from per-horizon responses, filling the running sums.
    pub fn from_responses(shock: usize, labels: Vec<String>, responses: DMatrix<f64>) -> Self {
        let mut cumulative = responses.clone();
        for h in 1..cumulative.nrows() {
            for v in 0..cumulative.ncols() {
                cumulative[(h, v)] = cumulative[(h - 1, v)] + responses[(h, v)];
            }
        }
        Self {
            shock,
            labels,
            responses,
            cumulative,
        }
    }

    pub fn shock(&self) -> usize {
        self.shock
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn horizon(&self) -> usize {
        self.responses.nrows() - 1
    }

    /// (H+1) x k responses of the differenced variables.
    pub fn responses(&self) -> &DMatrix<f64> {
        &self.responses
    }

    /// Running sums of `responses`: the level responses.
    pub fn cumulative(&self) -> &DMatrix<f64> {
        &self.cumulative
    }
}

/// Impulse responses `J F^h J' B e_shock` for h = 0..=horizon, with the
/// matrix power applied one step at a time.
pub fn irf(estimate: &VarEstimate, model: &StructuralModel, horizon: usize, shock: usize) -> Result<IrfSet, SvarError> {
    let k = estimate.n_endogenous();
    if model.impact.nrows() != k {
        return Err(SvarError::Shape(format!(
            "impact matrix is {}x{}, estimate has {k} variables",
            model.impact.nrows(),
            model.impact.ncols()
        )));
    }
    if shock >= k {
        return Err(SvarError::Shock { shock, k });
    }
    let f = estimate.companion();
    let mut state = DVector::zeros(f.nrows());
    state.rows_mut(0, k).copy_from(&model.impact.column(shock));
    let mut responses = DMatrix::zeros(horizon + 1, k);
    responses.set_row(0, &state.rows(0, k).transpose());
    for h in 1..=horizon {
        state = f * &state;
        responses.set_row(h, &state.rows(0, k).transpose());
    }
    Ok(IrfSet::from_responses(shock, model.ordering.clone(), responses))
}

/// Cumulative multipliers for quarters 1..=H with optional inference bands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierPath {
    values: Vec<f64>,
    bands: Option<Bands>,
    stars: Vec<Significance>,
}

impl MultiplierPath {
    pub fn point(values: Vec<f64>) -> Self {
        let stars = vec![Significance::None; values.len()];
        Self {
            values,
            bands: None,
            stars,
        }
    }

    /// Attaches bootstrap bands and derives the significance flags.
    pub fn with_bands(self, bands: Bands) -> Result<Self, crate::bootstrap::BootstrapError> {
        let stars = crate::bootstrap::significance_flags(&bands, &self.values)?;
        Ok(Self {
            values: self.values,
            bands: Some(bands),
            stars,
        })
    }

    /// `values()[h - 1]` is the multiplier for quarter `h`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn bands(&self) -> Option<&Bands> {
        self.bands.as_ref()
    }

    pub fn stars(&self) -> &[Significance] {
        &self.stars
    }
}

/// `m_h = sum_{j<h} dY_j / sum_{j<h} dG_j` for h = 1..=H.
pub fn multiplier_path(
    irfs: &IrfSet,
    g_index: usize,
    y_index: usize,
    horizon: usize,
) -> Result<MultiplierPath, SvarError> {
    let k = irfs.responses.ncols();
    if g_index >= k || y_index >= k {
        return Err(SvarError::Shape(format!(
            "variable index out of range ({g_index}, {y_index}) for {k} variables"
        )));
    }
    if horizon == 0 || horizon > irfs.responses.nrows() {
        return Err(SvarError::Shape(format!(
            "multiplier horizon {horizon} needs responses for h = 0..{}, have 0..={}",
            horizon.saturating_sub(1),
            irfs.horizon()
        )));
    }
    let cumulative = &irfs.cumulative;
    (1..=horizon)
        .map(|h| {
            let g = cumulative[(h - 1, g_index)];
            if g.is_nan() || g.abs() <= DENOMINATOR_FLOOR {
                return Err(SvarError::DegenerateDenominator { horizon: h, value: g });
            }
            Ok(cumulative[(h - 1, y_index)] / g)
        })
        .collect::<Result<Vec<_>, _>>()
        .map(MultiplierPath::point)
}
