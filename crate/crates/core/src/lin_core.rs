//! Ridge-regression sufficient statistics and linear confidence bounds.
//!
//! A [`DesignState`] keeps `V = λI + Σ x xᵀ`, its inverse and `b = Σ x y`.
//! The inverse is maintained with Sherman–Morrison rank-one updates and
//! re-derived from `V` every [`REINVERT_EVERY`] updates to bound drift.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CobraError, Result};

/// Number of rank-one updates between full re-inversions of the Gram matrix.
pub const REINVERT_EVERY: usize = 512;

/// A context-arm feature vector, reported or true.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVec(DVector<f64>);

impl FeatureVec {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(coords))
    }

    pub fn from_vector(v: DVector<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(CobraError::InvalidArgument(
                "feature vector must have at least one coordinate".into(),
            ));
        }
        if let Some(i) = v.iter().position(|c| !c.is_finite()) {
            return Err(CobraError::InvalidArgument(format!(
                "feature coordinate {i} is not finite"
            )));
        }
        Ok(FeatureVec(v))
    }

    pub fn zeros(dim: usize) -> Self {
        FeatureVec(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// `k · x`; `k` must be finite.
    pub fn scaled(&self, k: f64) -> FeatureVec {
        debug_assert!(k.is_finite());
        FeatureVec(&self.0 * k)
    }

    pub fn dot(&self, v: &DVector<f64>) -> f64 {
        self.0.dot(v)
    }

    /// Checks `‖x‖₂ ≤ bound`.
    pub fn check_bound(&self, bound: f64) -> Result<()> {
        let n = self.norm();
        if n > bound {
            return Err(CobraError::InvalidArgument(format!(
                "feature norm {n} exceeds bound {bound}"
            )));
        }
        Ok(())
    }
}

/// Parameters of the confidence ellipsoid radius and the TS inflation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceParams {
    /// Sub-Gaussian noise scale `R`.
    pub noise_scale: f64,
    pub dim: usize,
    pub lambda: f64,
    pub delta: f64,
    /// Bound `S` on `‖θ⋆‖₂`.
    pub param_bound: f64,
    /// Bound `L` on `‖x‖₂`.
    pub feature_bound: f64,
}

impl ConfidenceParams {
    pub fn new(
        noise_scale: f64,
        dim: usize,
        lambda: f64,
        delta: f64,
        param_bound: f64,
        feature_bound: f64,
    ) -> Result<Self> {
        let p = ConfidenceParams {
            noise_scale,
            dim,
            lambda,
            delta,
            param_bound,
            feature_bound,
        };
        p.validate()?;
        Ok(p)
    }

    /// `R = 0` is accepted (noiseless rewards); everything else must be positive.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(CobraError::InvalidArgument(what.to_string()));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return bad("noise scale must be finite and >= 0");
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return bad("lambda must be finite and > 0");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.param_bound.is_finite() && self.param_bound > 0.0) {
            return bad("parameter bound S must be finite and > 0");
        }
        if !(self.feature_bound.is_finite() && self.feature_bound > 0.0) {
            return bad("feature bound L must be finite and > 0");
        }
        Ok(())
    }

    /// Ellipsoid radius after `t` observations:
    /// `R √(d log((1 + t L²/λ)/δ)) + √λ S`.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha_with_delta(t, self.delta)
    }

    /// [`alpha`](Self::alpha) with a caller-supplied failure probability.
    pub fn alpha_with_delta(&self, t: usize, delta: f64) -> f64 {
        let l2 = self.feature_bound * self.feature_bound;
        let arg = (1.0 + t as f64 * l2 / self.lambda) / delta;
        self.noise_scale * (self.dim as f64 * arg.ln()).max(0.0).sqrt()
            + self.lambda.sqrt() * self.param_bound
    }

    /// Radius of the leave-one-out ellipsoid for an agent pulled `pull_count`
    /// times out of `t` observations; uses `t - pull_count` effective samples.
    pub fn loo_alpha(&self, t: usize, pull_count: usize) -> Result<f64> {
        self.loo_alpha_with_delta(t, pull_count, self.delta)
    }

    pub fn loo_alpha_with_delta(&self, t: usize, pull_count: usize, delta: f64) -> Result<f64> {
        if pull_count > t {
            return Err(CobraError::InvalidArgument(format!(
                "pull count {pull_count} exceeds round count {t}"
            )));
        }
        Ok(self.alpha_with_delta(t - pull_count, delta))
    }

    /// TS inflation `R √(9 d log(t/δ))`; the log argument is clamped to at
    /// least `e` so early rounds stay well defined.
    pub fn beta(&self, t: usize) -> f64 {
        let arg = (t as f64 / self.delta).max(std::f64::consts::E);
        self.noise_scale * (9.0 * self.dim as f64 * arg.ln()).sqrt()
    }
}

/// Ridge estimate `θ̂ = V⁻¹ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEstimate {
    pub mean: DVector<f64>,
    pub source_count: usize,
}

impl ThetaEstimate {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn predict(&self, x: &FeatureVec) -> Result<f64> {
        check_dim(self.dim(), x.dim())?;
        Ok(x.dot(&self.mean))
    }
}

/// Running ridge-regression statistics for one observation pool.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignState {
    dim: usize,
    lambda: f64,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    moment: DVector<f64>,
    count: usize,
    since_reinvert: usize,
}

impl DesignState {
    /// `V = λI`, `V⁻¹ = I/λ`, `b = 0`.
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(CobraError::InvalidArgument("dim must be >= 1".into()));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(CobraError::InvalidArgument(
                "lambda must be finite and > 0".into(),
            ));
        }
        Ok(DesignState {
            dim,
            lambda,
            gram: DMatrix::identity(dim, dim) * lambda,
            gram_inv: DMatrix::identity(dim, dim) / lambda,
            moment: DVector::zeros(dim),
            count: 0,
            since_reinvert: 0,
        })
    }

    /// Builds a state from already-accumulated statistics, inverting `gram`
    /// directly. Fails if `gram` is not positive definite.
    pub fn from_parts(
        lambda: f64,
        gram: DMatrix<f64>,
        moment: DVector<f64>,
        count: usize,
    ) -> Result<Self> {
        let dim = moment.len();
        if gram.nrows() != dim || gram.ncols() != dim {
            return Err(CobraError::InvalidArgument(format!(
                "gram is {}x{}, moment has {dim} entries",
                gram.nrows(),
                gram.ncols()
            )));
        }
        let gram_inv = invert_spd(&gram)?;
        Ok(DesignState {
            dim,
            lambda,
            gram,
            gram_inv,
            moment,
            count,
            since_reinvert: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inv(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.moment
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Absorbs one observation `(x, y)`.
    pub fn update(&mut self, x: &FeatureVec, y: f64) -> Result<()> {
        check_dim(self.dim, x.dim())?;
        if !y.is_finite() {
            return Err(CobraError::InvalidArgument("reward must be finite".into()));
        }
        let x = x.as_vector();
        self.gram.ger(1.0, x, x, 1.0);
        self.moment.axpy(y, x, 1.0);
        self.count += 1;
        self.since_reinvert += 1;

        if self.since_reinvert >= REINVERT_EVERY {
            self.gram_inv = invert_spd(&self.gram)?;
            self.since_reinvert = 0;
        } else {
            // (V + xxᵀ)⁻¹ = V⁻¹ − (V⁻¹x)(V⁻¹x)ᵀ / (1 + xᵀV⁻¹x)
            let u = &self.gram_inv * x;
            let denom = 1.0 + x.dot(&u);
            self.gram_inv.ger(-1.0 / denom, &u, &u, 1.0);
        }
        Ok(())
    }

    pub fn fit(&self) -> ThetaEstimate {
        ThetaEstimate {
            mean: &self.gram_inv * &self.moment,
            source_count: self.count,
        }
    }

    /// `‖x‖_{V⁻¹} = √(xᵀ V⁻¹ x)`.
    pub fn weighted_norm(&self, x: &FeatureVec) -> Result<f64> {
        check_dim(self.dim, x.dim())?;
        Ok(quad_form(&self.gram_inv, x.as_vector()).sqrt())
    }
}

/// Optimistic score `θ̂ᵀx + α‖x‖_{V⁻¹}`.
pub fn ucb_value(
    theta: &ThetaEstimate,
    x: &FeatureVec,
    alpha: f64,
    state: &DesignState,
) -> Result<f64> {
    check_dim(theta.dim(), state.dim())?;
    Ok(theta.predict(x)? + alpha * state.weighted_norm(x)?)
}

/// Pessimistic score `θ̂ᵀx − α‖x‖_{V⁻¹}`.
pub fn lcb_value(
    theta: &ThetaEstimate,
    x: &FeatureVec,
    alpha: f64,
    state: &DesignState,
) -> Result<f64> {
    check_dim(theta.dim(), state.dim())?;
    Ok(theta.predict(x)? - alpha * state.weighted_norm(x)?)
}

/// Draws `θ̃ ~ N(θ̂, β² V⁻¹)` as `θ̂ + β L z` with `L Lᵀ = V⁻¹`.
pub fn ts_draw<R: Rng + ?Sized>(
    theta: &ThetaEstimate,
    state: &DesignState,
    beta: f64,
    rng: &mut R,
) -> DVector<f64> {
    let z = DVector::from_iterator(
        state.dim,
        (0..state.dim).map(|_| rng.sample::<f64, _>(StandardNormal)),
    );
    if beta == 0.0 {
        return theta.mean.clone();
    }
    let chol = nalgebra::Cholesky::new(state.gram_inv.clone())
        .or_else(|| nalgebra::Cholesky::new(symmetrized(&state.gram_inv)))
        .expect("inverse of a positive definite gram is positive definite");
    &theta.mean + chol.l() * z * beta
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(CobraError::InvalidArgument(format!(
            "dimension mismatch: expected {expected}, got {got}"
        )));
    }
    Ok(())
}

pub(crate) fn quad_form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    // Clamp rounding noise so the square root stays real.
    x.dot(&(m * x)).max(0.0)
}

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn invert_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    nalgebra::Cholesky::new(symmetrized(m))
        .map(|c| c.inverse())
        .ok_or_else(|| CobraError::Consistency("gram matrix is not positive definite".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fv(c: &[f64]) -> FeatureVec {
        FeatureVec::new(c.to_vec()).unwrap()
    }

    fn default_params(l2: f64) -> ConfidenceParams {
        ConfidenceParams::new(0.1, 10, 0.01, 0.05, 1.0, l2.sqrt()).unwrap()
    }

    #[test]
    fn init_design_is_scaled_identity() {
        let s = DesignState::new(2, 1.0).unwrap();
        assert_eq!(s.gram(), &DMatrix::identity(2, 2));
        assert_eq!(s.gram_inv(), &DMatrix::identity(2, 2));
        assert_eq!(s.moment(), &DVector::zeros(2));
        assert_eq!(s.count(), 0);

        let s = DesignState::new(1, 0.01).unwrap();
        assert_abs_diff_eq!(s.gram()[(0, 0)], 0.01);
        assert_abs_diff_eq!(s.gram_inv()[(0, 0)], 100.0, epsilon = 1e-12);

        let s = DesignState::new(10, 0.01).unwrap();
        let eig = s.gram().clone().symmetric_eigen();
        assert_abs_diff_eq!(eig.eigenvalues.min(), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn init_design_rejects_bad_args() {
        assert!(DesignState::new(0, 1.0).is_err());
        assert!(DesignState::new(2, 0.0).is_err());
        assert!(DesignState::new(2, -1.0).is_err());
    }

    #[test]
    fn single_update_and_fit() {
        let mut s = DesignState::new(2, 1.0).unwrap();
        s.update(&fv(&[1.0, 0.0]), 1.0).unwrap();
        assert_eq!(s.gram(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
        assert_eq!(s.moment().as_slice(), &[1.0, 0.0]);
        let th = s.fit();
        assert_abs_diff_eq!(th.mean[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(th.mean[1], 0.0, epsilon = 1e-15);
        assert_eq!(th.source_count, 1);
    }

    #[test]
    fn zero_feature_update_only_counts() {
        let mut s = DesignState::new(3, 0.5).unwrap();
        let before = s.clone();
        s.update(&FeatureVec::zeros(3), 7.0).unwrap();
        assert_eq!(s.gram(), before.gram());
        assert_eq!(s.moment(), before.moment());
        assert_eq!(s.count(), 1);
    }

    #[test]
    fn update_rejects_dim_mismatch_and_nan() {
        let mut s = DesignState::new(2, 1.0).unwrap();
        assert!(s.update(&fv(&[1.0, 2.0, 3.0]), 1.0).is_err());
        assert!(s.update(&fv(&[1.0, 2.0]), f64::NAN).is_err());
        assert!(FeatureVec::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn fit_with_no_data_is_zero() {
        let s = DesignState::new(4, 0.01).unwrap();
        assert_eq!(s.fit().mean, DVector::zeros(4));
    }

    #[test]
    fn noiseless_regression_recovers_theta() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta = DVector::from_vec(vec![0.3, -0.2, 0.5, 0.1, 0.4]);
        let mut s = DesignState::new(5, 0.01).unwrap();
        for _ in 0..500 {
            let x = fv(&(0..5).map(|_| rng.random_range(0.0..2.0)).collect::<Vec<_>>());
            let y = x.dot(&theta);
            s.update(&x, y).unwrap();
        }
        assert!((s.fit().mean - theta).norm() <= 0.05);
    }

    #[test]
    fn alpha_values() {
        let p = default_params(40.0);
        assert_abs_diff_eq!(p.alpha(0), 0.6473, epsilon = 1e-3);
        assert_abs_diff_eq!(p.alpha(100), 1.3608, epsilon = 1e-3);
        let p0 = ConfidenceParams { noise_scale: 0.0, ..p };
        assert_eq!(p0.alpha(123), 0.01f64.sqrt() * 1.0);
    }

    #[test]
    fn loo_alpha_reductions_and_value() {
        let p = default_params(40.0);
        assert_eq!(p.loo_alpha(100, 100).unwrap(), p.alpha(0));
        assert_eq!(p.loo_alpha(100, 0).unwrap(), p.alpha(100));
        // 0.1·√(10·log((1 + 80·40/0.01)/0.05)) + 0.1
        assert_abs_diff_eq!(p.loo_alpha(100, 20).unwrap(), 1.351871, epsilon = 1e-5);
        assert!(p.loo_alpha(10, 11).is_err());
    }

    #[test]
    fn beta_values() {
        let p = default_params(40.0);
        assert_abs_diff_eq!(p.beta(100), 2.6148, epsilon = 1e-3);
        let p0 = ConfidenceParams { noise_scale: 0.0, ..p };
        assert_eq!(p0.beta(100), 0.0);
        assert!(p.beta(1).is_finite());
        let mut prev = 0.0;
        for t in 1..=10_000 {
            let b = p.beta(t);
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn weighted_norm_and_scores() {
        let mut s = DesignState::new(2, 1.0).unwrap();
        s.update(&fv(&[1.0, 0.0]), 1.0).unwrap(); // V⁻¹ = diag(0.5, 1)
        let x = fv(&[1.0, 0.0]);
        assert_abs_diff_eq!(s.weighted_norm(&x).unwrap(), 0.5f64.sqrt(), epsilon = 1e-12);
        assert_eq!(s.weighted_norm(&FeatureVec::zeros(2)).unwrap(), 0.0);

        let th = s.fit();
        assert_abs_diff_eq!(ucb_value(&th, &x, 1.0, &s).unwrap(), 1.2071, epsilon = 1e-4);
        assert_abs_diff_eq!(lcb_value(&th, &x, 1.0, &s).unwrap(), -0.2071, epsilon = 1e-4);
        assert_eq!(ucb_value(&th, &x, 0.0, &s).unwrap(), th.predict(&x).unwrap());
        assert_eq!(lcb_value(&th, &x, 0.0, &s).unwrap(), th.predict(&x).unwrap());
        assert_eq!(ucb_value(&th, &FeatureVec::zeros(2), 3.0, &s).unwrap(), 0.0);
        assert!(ucb_value(&th, &fv(&[1.0]), 1.0, &s).is_err());
    }

    #[test]
    fn weighted_norm_at_scalar_design() {
        let s = DesignState::new(3, 0.25).unwrap();
        let x = fv(&[1.0, -2.0, 2.0]);
        assert_abs_diff_eq!(s.weighted_norm(&x).unwrap(), 3.0 / 0.5, epsilon = 1e-12);
    }

    #[test]
    fn ts_draw_zero_beta_and_determinism() {
        let mut s = DesignState::new(3, 1.0).unwrap();
        s.update(&fv(&[1.0, 2.0, 0.5]), 0.7).unwrap();
        let th = s.fit();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(ts_draw(&th, &s, 0.0, &mut rng), th.mean);

        let a = ts_draw(&th, &s, 1.5, &mut ChaCha8Rng::seed_from_u64(9));
        let b = ts_draw(&th, &s, 1.5, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn ts_draw_moments() {
        // V = I (λ = 1, no data), β = 1: draws ~ N(θ̂, I).
        let s = DesignState::new(3, 1.0).unwrap();
        let th = ThetaEstimate {
            mean: DVector::from_vec(vec![0.2, -0.4, 1.0]),
            source_count: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 10_000;
        let draws: Vec<_> = (0..n).map(|_| ts_draw(&th, &s, 1.0, &mut rng)).collect();
        let mean = draws.iter().fold(DVector::zeros(3), |acc, d| acc + d) / n as f64;
        for i in 0..3 {
            assert!((mean[i] - th.mean[i]).abs() < 0.05);
        }
        let mut cov = DMatrix::<f64>::zeros(3, 3);
        for d in &draws {
            let c = d - &mean;
            cov += &c * c.transpose();
        }
        cov /= (n - 1) as f64;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - want).abs() < 0.05, "cov[{i},{j}] = {}", cov[(i, j)]);
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(ConfidenceParams::new(0.1, 10, 0.01, 1.0, 1.0, 1.0).is_err());
        assert!(ConfidenceParams::new(0.1, 10, 0.0, 0.05, 1.0, 1.0).is_err());
        assert!(ConfidenceParams::new(0.1, 0, 0.01, 0.05, 1.0, 1.0).is_err());
        assert!(ConfidenceParams::new(-0.1, 10, 0.01, 0.05, 1.0, 1.0).is_err());
        assert!(ConfidenceParams::new(0.0, 10, 0.01, 0.05, 1.0, 1.0).is_ok());
    }
}
