//! Reduced-form VAR(p) with intercept and contemporaneous exogenous controls,
//! estimated equation by equation with a QR least-squares solve.

use nalgebra::{DMatrix, DVector, Schur};
use thiserror::Error;

use crate::ingest::TransformedPanel;

/// Relative threshold on `|R_ii| / max |R_jj|` below which the design is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VarError {
    #[error("lag order must be at least 1")]
    LagOrder,
    #[error("sample too small: {rows} rows for {lags} lags and {regressors} regressors per equation")]
    SampleSize {
        rows: usize,
        lags: usize,
        regressors: usize,
    },
    #[error("regressors are collinear (regressor column {column})")]
    Rank { column: usize },
    #[error("{rows} residual rows leave no degrees of freedom for {regressors} regressors")]
    DegreesOfFreedom { rows: usize, regressors: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarEstimate {
    lags: usize,
    constant: DVector<f64>,
    gammas: Vec<DMatrix<f64>>,
    exog_coef: DMatrix<f64>,
    residuals: DMatrix<f64>,
    sigma: DMatrix<f64>,
    companion: DMatrix<f64>,
    n_regressors: usize,
}

impl VarEstimate {
    /// Assembles an estimate from known coefficients. Used for closed-form
    /// checks and simulation; `residuals` may be empty.
    pub fn from_parts(
        constant: DVector<f64>,
        gammas: Vec<DMatrix<f64>>,
        exog_coef: DMatrix<f64>,
        residuals: DMatrix<f64>,
        sigma: DMatrix<f64>,
    ) -> Self {
        let k = constant.len();
        let lags = gammas.len();
        assert!(lags >= 1, "at least one lag matrix required");
        assert!(gammas.iter().all(|g| g.shape() == (k, k)), "lag matrices must be k x k");
        assert_eq!(exog_coef.nrows(), k, "exogenous coefficients must have k rows");
        assert_eq!(sigma.shape(), (k, k), "covariance must be k x k");
        let companion = companion_matrix(&gammas);
        Self {
            lags,
            n_regressors: 1 + k * lags + exog_coef.ncols(),
            constant,
            gammas,
            exog_coef,
            residuals,
            sigma,
            companion,
        }
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    pub fn n_endogenous(&self) -> usize {
        self.constant.len()
    }

    pub fn constant(&self) -> &DVector<f64> {
        &self.constant
    }

    /// `gammas()[i]` multiplies `X_{t-i-1}`.
    pub fn gammas(&self) -> &[DMatrix<f64>] {
        &self.gammas
    }

    /// k x m coefficients on the contemporaneous controls.
    pub fn exog_coef(&self) -> &DMatrix<f64> {
        &self.exog_coef
    }

    /// (T - p) x k reduced-form innovations.
    pub fn residuals(&self) -> &DMatrix<f64> {
        &self.residuals
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn companion(&self) -> &DMatrix<f64> {
        &self.companion
    }

    pub fn sample_size(&self) -> usize {
        self.residuals.nrows()
    }

    pub fn n_regressors(&self) -> usize {
        self.n_regressors
    }

    /// One-step prediction `c + sum_i Gamma_i X_{t-i} + D Z_t` for every row
    /// `t >= p` of the panel.
    pub fn fitted(&self, panel: &TransformedPanel) -> DMatrix<f64> {
        let p = self.lags;
        let x = panel.x();
        let z = panel.z();
        let k = self.n_endogenous();
        let mut out = DMatrix::zeros(x.nrows().saturating_sub(p), k);
        for t in p..x.nrows() {
            let mut row = self.constant.clone();
            for (i, gamma) in self.gammas.iter().enumerate() {
                row += gamma * x.row(t - i - 1).transpose();
            }
            row += &self.exog_coef * z.row(t).transpose();
            out.set_row(t - p, &row.transpose());
        }
        out
    }
}

/// Regressor matrix `[1, X_{t-1}, ..., X_{t-p}, Z_t]` for `t = p..T`.
pub fn design_matrix(panel: &TransformedPanel, lags: usize) -> DMatrix<f64> {
    let x = panel.x();
    let z = panel.z();
    let k = x.ncols();
    let rows = x.nrows().saturating_sub(lags);
    let cols = 1 + k * lags + z.ncols();
    DMatrix::from_fn(rows, cols, |r, c| {
        let t = r + lags;
        if c == 0 {
            1.0
        } else if c <= k * lags {
            let lag = (c - 1) / k + 1;
            x[(t - lag, (c - 1) % k)]
        } else {
            z[(t, c - 1 - k * lags)]
        }
    })
}

/// Stacks lag matrices into the kp x kp companion form.
pub fn companion_matrix(gammas: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = gammas.len();
    let k = gammas.first().map_or(0, |g| g.nrows());
    let mut f = DMatrix::zeros(k * p, k * p);
    for (i, gamma) in gammas.iter().enumerate() {
        f.view_mut((0, i * k), (k, k)).copy_from(gamma);
    }
    for j in 0..k * p.saturating_sub(1) {
        f[(k + j, j)] = 1.0;
    }
    f
}

pub fn estimate_var(panel: &TransformedPanel, lags: usize) -> Result<VarEstimate, VarError> {
    if lags == 0 {
        return Err(VarError::LagOrder);
    }
    let k = panel.n_endogenous();
    let m = panel.n_exogenous();
    let n_reg = 1 + k * lags + m;
    let rows = panel.rows();
    if rows <= lags || rows - lags <= n_reg {
        return Err(VarError::SampleSize {
            rows,
            lags,
            regressors: n_reg,
        });
    }

    let w = design_matrix(panel, lags);
    let y = panel.x().rows(lags, rows - lags).into_owned();
    let coef = least_squares(&w, &y)?;

    let residuals = &y - &w * &coef;
    let sigma = residual_cov(&residuals, n_reg)?;

    let constant = coef.row(0).transpose();
    let gammas = (0..lags)
        .map(|i| coef.rows(1 + i * k, k).transpose())
        .collect::<Vec<_>>();
    let exog_coef = coef.rows(1 + k * lags, m).transpose();
    Ok(VarEstimate::from_parts(constant, gammas, exog_coef, residuals, sigma))
}

/// Solves `min ||W B - Y||` column by column through a thin QR of `W`.
fn least_squares(w: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>, VarError> {
    let qr = w.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = r.diagonal().iter().map(|v| v.abs()).collect();
    let scale = diag.iter().cloned().fold(0.0, f64::max);
    if let Some(column) = diag.iter().position(|&d| d.is_nan() || d <= RANK_TOLERANCE * scale) {
        return Err(VarError::Rank { column });
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty).ok_or(VarError::Rank { column: 0 })
}

/// `U'U / (rows - n_regressors)`, exactly symmetric.
pub fn residual_cov(residuals: &DMatrix<f64>, n_regressors: usize) -> Result<DMatrix<f64>, VarError> {
    let rows = residuals.nrows();
    if rows <= n_regressors {
        return Err(VarError::DegreesOfFreedom {
            rows,
            regressors: n_regressors,
        });
    }
    let k = residuals.ncols();
    let dof = (rows - n_regressors) as f64;
    let mut sigma = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let s = residuals.column(i).dot(&residuals.column(j)) / dof;
            sigma[(i, j)] = s;
            sigma[(j, i)] = s;
        }
    }
    Ok(sigma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub max_modulus: f64,
    pub stable: bool,
}

/// Largest eigenvalue modulus of the companion matrix.
pub fn stability(estimate: &VarEstimate) -> Stability {
    let max_modulus = spectral_radius(estimate.companion());
    Stability {
        max_modulus,
        stable: max_modulus < 1.0,
    }
}

/// Largest eigenvalue modulus of a square matrix.
///
/// Uses a real Schur decomposition with a bounded iteration count. Defective
/// matrices (e.g. nilpotent companion blocks) can stall the QR sweep; those
/// fall back to Gelfand's formula `||A^n||^(1/n)` with `n = 2^40`.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let max_iter = 1000 * m.nrows().max(1);
    for eps in [f64::EPSILON, 1e-12, 1e-9] {
        if let Some(schur) = Schur::try_new(m.clone(), eps, max_iter) {
            return schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        }
    }
    // Repeated squaring with renormalisation: track log ||A^(2^j)||.
    let mut power = m.clone();
    let mut log_norm = 0.0;
    let mut exponent = 1.0;
    for _ in 0..40 {
        let norm = power.norm();
        if norm == 0.0 {
            return 0.0;
        }
        power /= norm;
        log_norm = 2.0 * (log_norm + norm.ln());
        exponent *= 2.0;
        power = &power * &power;
    }
    let norm = power.norm();
    if norm == 0.0 {
        return 0.0;
    }
    ((log_norm + norm.ln()) / exponent).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Quarter;

    fn panel(x: DMatrix<f64>, z: DMatrix<f64>) -> TransformedPanel {
        let labels = (0..x.ncols()).map(|i| format!("x{i}")).collect();
        let exog = (0..z.ncols()).map(|i| format!("z{i}")).collect();
        TransformedPanel::new(Quarter::new(2000, 1).unwrap(), labels, x, exog, z).unwrap()
    }

    /// Small deterministic pseudo-noise, independent of the rand stack.
    fn noise(n: usize, k: usize, salt: u64) -> DMatrix<f64> {
        let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ salt;
        DMatrix::from_fn(n, k, |_, _| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    }

    fn simulate(gamma: &DMatrix<f64>, eps: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(eps.nrows(), eps.ncols());
        for t in 1..eps.nrows() {
            let next = gamma * x.row(t - 1).transpose() + eps.row(t).transpose();
            x.set_row(t, &next.transpose());
        }
        x
    }

    #[test]
    fn residual_cov_hand_values() {
        let u = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
        let s = residual_cov(&u, 0).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(residual_cov(&DMatrix::zeros(10, 3), 2).unwrap(), DMatrix::zeros(3, 3));
        assert!(matches!(
            residual_cov(&DMatrix::zeros(2, 2), 2),
            Err(VarError::DegreesOfFreedom { rows: 2, regressors: 2 })
        ));
    }

    #[test]
    fn companion_layout() {
        let g1 = DMatrix::from_element(2, 2, 1.0);
        let g2 = DMatrix::from_element(2, 2, 2.0);
        let f = companion_matrix(&[g1, g2]);
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 1.0, 2.0, 2.0, //
                1.0, 1.0, 2.0, 2.0, //
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0,
            ],
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn too_few_rows() {
        let p = panel(noise(10, 4, 1), DMatrix::zeros(10, 0));
        assert!(matches!(estimate_var(&p, 4), Err(VarError::SampleSize { .. })));
        assert!(matches!(estimate_var(&p, 0), Err(VarError::LagOrder)));
    }

    #[test]
    fn duplicate_exogenous_column_is_rank_error() {
        let z1 = noise(200, 1, 7);
        let z = DMatrix::from_fn(200, 2, |r, _| z1[(r, 0)]);
        let p = panel(noise(200, 2, 3), z);
        assert!(matches!(estimate_var(&p, 2), Err(VarError::Rank { .. })));
    }

    #[test]
    fn fitted_plus_residuals_reconstructs_and_is_orthogonal() {
        let gamma = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.2, 0.3, -0.1, 0.0, 0.2, 0.4]);
        let x = simulate(&gamma, &noise(300, 3, 11));
        let p = panel(x.clone(), noise(300, 2, 5));
        let est = estimate_var(&p, 2).unwrap();
        let rebuilt = est.fitted(&p) + est.residuals();
        let observed = x.rows(2, 298);
        let scale = observed.amax();
        assert!((rebuilt - observed).amax() <= 1e-10 * scale);

        let w = design_matrix(&p, 2);
        let cross = w.transpose() * est.residuals();
        assert!(cross.amax() / (est.sample_size() as f64) < 1e-8);
        assert_eq!(est.n_regressors(), 1 + 3 * 2 + 2);
        assert_eq!(est.sample_size(), 298);
        let sigma = est.sigma();
        assert_eq!(sigma, &sigma.transpose());
        assert!(sigma.clone().symmetric_eigenvalues().min() >= -1e-10);
    }

    #[test]
    fn estimates_are_close_to_truth_on_long_sample() {
        let gamma = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.3]);
        let x = simulate(&gamma, &noise(20_000, 2, 99));
        let est = estimate_var(&panel(x, DMatrix::zeros(20_000, 0)), 1).unwrap();
        assert!((&est.gammas()[0] - &gamma).amax() < 0.03);
    }

    #[test]
    fn stability_of_diagonal_systems() {
        let est = |scale: f64, lags: usize| {
            let mut gammas = vec![DMatrix::zeros(3, 3); lags];
            gammas[0] = DMatrix::identity(3, 3) * scale;
            VarEstimate::from_parts(
                DVector::zeros(3),
                gammas,
                DMatrix::zeros(3, 0),
                DMatrix::zeros(0, 3),
                DMatrix::identity(3, 3),
            )
        };
        let zero = stability(&est(0.0, 4));
        assert_eq!(zero.max_modulus, 0.0);
        assert!(zero.stable);
        assert!((stability(&est(0.5, 1)).max_modulus - 0.5).abs() < 1e-12);
        let unstable = stability(&est(1.1, 1));
        assert!((unstable.max_modulus - 1.1).abs() < 1e-12);
        assert!(!unstable.stable);
    }

    #[test]
    fn defective_companion_does_not_stall() {
        // Nilpotent: a single nonzero entry above a shift structure.
        let mut gammas = vec![DMatrix::zeros(3, 3); 4];
        gammas[3][(0, 2)] = 1e-3;
        let f = companion_matrix(&gammas);
        assert!(spectral_radius(&f) < 0.2);
        let shift = companion_matrix(&vec![DMatrix::zeros(3, 3); 4]);
        assert!(spectral_radius(&shift) < 1e-6);
    }

    #[test]
    fn var1_companion_eigenvalues_match_gamma() {
        let gamma = DMatrix::from_row_slice(2, 2, &[0.6, 0.3, -0.2, 0.1]);
        let est = VarEstimate::from_parts(
            DVector::zeros(2),
            vec![gamma.clone()],
            DMatrix::zeros(2, 0),
            DMatrix::zeros(0, 2),
            DMatrix::identity(2, 2),
        );
        // Eigenvalues of [[a, b], [c, d]] from the characteristic polynomial.
        let (a, b, c, d) = (0.6, 0.3, -0.2, 0.1);
        let tr = a + d;
        let det: f64 = a * d - b * c;
        let disc = tr * tr / 4.0 - det;
        let modulus = if disc < 0.0 {
            det.sqrt()
        } else {
            (tr / 2.0).abs() + disc.sqrt()
        };
        assert!((stability(&est).max_modulus - modulus).abs() < 1e-12);
    }
}
