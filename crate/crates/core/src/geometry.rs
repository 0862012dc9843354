//! Batch regression model of a constant-velocity track.
//!
//! The track is observed at `N + 1` epochs τⱼ = j·δ, j = 0..=N. The stacked
//! position vector is modelled as `Z = X·b + ε` with `b = (x₁, y₁, vₓ, v_y)`.
//! `H = X(XᵀX)⁻¹Xᵀ` is the hat matrix, `M = I − H` the residual projector.
//! Both are block-diagonal in the coordinates, so every 2×2 block is a scalar
//! multiple of I₂ and the closed forms below are those scalars.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_param, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    n_scans: usize,
    dt: f64,
    lambda: f64,
}

impl ScanConfig {
    pub const MIN_SCANS: usize = 5;

    pub fn new(n_scans: usize, dt: f64, lambda: f64) -> Result<Self> {
        if n_scans < Self::MIN_SCANS {
            return Err(Error::InvalidParameter {
                name: "n_scans",
                value: n_scans as f64,
                reason: "at least 5 scans are required",
            });
        }
        check_param("dt", dt, dt > 0.0, "inter-scan time must be positive")?;
        check_param("lambda", lambda, lambda >= 0.0, "contamination distance must be nonnegative")?;
        Ok(Self { n_scans, dt, lambda })
    }

    /// N of the closed forms.
    pub fn n_scans(&self) -> usize {
        self.n_scans
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// λ/σ.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epochs(&self) -> usize {
        self.n_scans + 1
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.n_scans, self.dt, lambda)
    }

    pub(crate) fn check_index(&self, l: usize) -> Result<()> {
        if l > self.n_scans {
            Err(Error::IndexOutOfRange { index: l, max: self.n_scans })
        } else {
            Ok(())
        }
    }

    fn nf(&self) -> f64 {
        self.n_scans as f64
    }

    fn denom(&self) -> f64 {
        let n = self.nf();
        (n + 1.0) * (n + 2.0)
    }
}

/// Scans contaminated by a false measurement, with their offsets λ_{l_k}.
#[derive(Debug, Clone, PartialEq)]
pub struct FalseAssocSet {
    indices: Vec<usize>,
    lambdas: Vec<f64>,
}

impl FalseAssocSet {
    pub fn new(indices: Vec<usize>, lambdas: Vec<f64>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidSet("at least one index is required".into()));
        }
        if indices.len() != lambdas.len() {
            return Err(Error::InvalidSet(format!(
                "{} indices but {} offsets",
                indices.len(),
                lambdas.len()
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSet("indices must be strictly increasing".into()));
        }
        for &l in &lambdas {
            check_param("lambda", l, l >= 0.0, "offsets must be nonnegative")?;
        }
        Ok(Self { indices, lambdas })
    }

    /// Same offset on every scan.
    pub fn uniform(indices: Vec<usize>, lambda: f64) -> Result<Self> {
        let k = indices.len();
        Self::new(indices, vec![lambda; k])
    }

    /// The last `k` epochs N−k+1..=N, all at offset `lambda`.
    pub fn last_scans(k: usize, lambda: f64, config: &ScanConfig) -> Result<Self> {
        if k == 0 || k > config.epochs() {
            return Err(Error::InvalidSet(format!("K = {k} outside 1..={}", config.epochs())));
        }
        let n = config.n_scans();
        Self::uniform((n + 1 - k..=n).collect(), lambda)
    }

    pub fn validate(&self, config: &ScanConfig) -> Result<()> {
        self.indices.iter().try_for_each(|&l| config.check_index(l))
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, l: usize) -> bool {
        self.indices.binary_search(&l).is_ok()
    }

    pub fn with_lambdas(&self, lambdas: Vec<f64>) -> Result<Self> {
        Self::new(self.indices.clone(), lambdas)
    }
}

/// Design matrix 𝒳, 2(N+1)×4, column order (x₁, y₁, vₓ, v_y).
pub fn build_design(config: &ScanConfig) -> DMatrix<f64> {
    let times: Vec<f64> = (0..config.epochs()).map(|j| j as f64 * config.dt()).collect();
    design_for_times(&times)
}

/// Row pair j holds [I₂ | τⱼ I₂].
pub fn design_for_times(times: &[f64]) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(2 * times.len(), 4);
    for (j, &tau) in times.iter().enumerate() {
        x[(2 * j, 0)] = 1.0;
        x[(2 * j + 1, 1)] = 1.0;
        x[(2 * j, 2)] = tau;
        x[(2 * j + 1, 3)] = tau;
    }
    x
}

#[derive(Debug, Clone)]
pub struct RegressionGeometry {
    pub design: DMatrix<f64>,
    pub hat: DMatrix<f64>,
    pub projector: DMatrix<f64>,
}

pub fn build_projector(config: &ScanConfig) -> Result<RegressionGeometry> {
    let design = build_design(config);
    let normal = design.transpose() * &design;
    let eig = normal.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > 1e12 {
        return Err(Error::DegenerateGeometry { condition });
    }
    let chol = normal.cholesky().ok_or(Error::DegenerateGeometry { condition })?;
    let hat = &design * chol.solve(&design.transpose());
    let n = hat.nrows();
    let projector = DMatrix::identity(n, n) - &hat;
    Ok(RegressionGeometry { design, hat, projector })
}

impl RegressionGeometry {
    /// The (k, k') 2×2 block of the projector, returned as its (0,0) scalar
    /// together with the largest deviation from scalar·I₂.
    pub fn projector_block(&self, k: usize, kp: usize) -> (f64, f64) {
        block_scalar(&self.projector, k, kp)
    }

    /// Φ = ℳ Σ_com ℳᵀ with the blocks of `zeroed` removed from the identity.
    pub fn phi(&self, zeroed: &[usize]) -> DMatrix<f64> {
        let mut sigma = DMatrix::<f64>::identity(self.projector.nrows(), self.projector.ncols());
        for &l in zeroed {
            sigma[(2 * l, 2 * l)] = 0.0;
            sigma[(2 * l + 1, 2 * l + 1)] = 0.0;
        }
        &self.projector * sigma * self.projector.transpose()
    }

    pub fn max_abs_symmetry_defect(&self) -> f64 {
        (&self.projector - self.projector.transpose()).amax()
    }

    pub fn max_abs_idempotence_defect(&self) -> f64 {
        (&self.projector * &self.projector - &self.projector).amax()
    }

    pub fn max_abs_annihilation_defect(&self) -> f64 {
        (&self.projector * &self.design).amax()
    }

    pub fn trace(&self) -> f64 {
        self.projector.trace()
    }
}

pub(crate) fn block_scalar(m: &DMatrix<f64>, k: usize, kp: usize) -> (f64, f64) {
    let a = m[(2 * k, 2 * kp)];
    let defect = (m[(2 * k + 1, 2 * kp + 1)] - a)
        .abs()
        .max(m[(2 * k, 2 * kp + 1)].abs())
        .max(m[(2 * k + 1, 2 * kp)].abs());
    (a, defect)
}

/// Closed-form hat coefficient H_{l,l'} (per coordinate).
pub fn hat_cross(l: usize, lp: usize, config: &ScanConfig) -> Result<f64> {
    config.check_index(l)?;
    config.check_index(lp)?;
    let n = config.nf();
    let (a, b) = (l as f64, lp as f64);
    Ok(2.0 * (2.0 * n + 1.0 - 3.0 * a - 3.0 * b + 6.0 * a * b / n) / config.denom())
}

/// The stated Q₁, Q₂, Q₃ values (Q₂ carries 1/δ, Q₃ carries 1/δ²).
pub fn q_polynomials(l: usize, config: &ScanConfig) -> Result<(f64, f64, f64)> {
    config.check_index(l)?;
    let n = config.nf();
    let l = l as f64;
    let d = config.dt();
    let q1 = 4.0 * n.powi(3) - 50.0 * n * n + n * (48.0 * l - 18.0) + l * (24.0 - 36.0 * l) + 4.0;
    let q2 = -6.0 / d * (n * n - 5.0 * n - 2.0 + 4.0 * l * (1.0 + 1.0 / n - 3.0 * l / n));
    let q3 = 36.0 / (d * d) * (n / 3.0 - 1.0 + 2.0 / n * (1.0 / 3.0 + 2.0 * l - 2.0 * l / (n * n)));
    Ok((q1, q2, q3))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagBlockCoeffs {
    /// α_N(l) = H_ll − 1 = −ℳ_ll, in (−1, 0).
    pub alpha: f64,
    /// Exact Φ_ll coefficient H_ll(1 − H_ll) = −α(1 + α).
    pub beta: f64,
    /// The stated polynomial ratio (Q₁+2lδQ₂+l²δ²Q₃)/((N+1)²(N+2)²).
    pub beta_polynomial: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

pub fn diag_coeffs(l: usize, config: &ScanConfig) -> Result<DiagBlockCoeffs> {
    let h = hat_cross(l, l, config)?;
    let (q1, q2, q3) = q_polynomials(l, config)?;
    let lf = l as f64;
    let d = config.dt();
    let beta_polynomial = (q1 + 2.0 * lf * d * q2 + lf * lf * d * d * q3) / config.denom().powi(2);
    Ok(DiagBlockCoeffs {
        alpha: h - 1.0,
        beta: h * (1.0 - h),
        beta_polynomial,
        q1,
        q2,
        q3,
    })
}

/// α_N(l_k, l_k') = 1_{k=k'} − H_{l_k,l_k'} = ℳ_{l_k,l_k'}.
pub fn cross_alpha(l: usize, lp: usize, config: &ScanConfig) -> Result<f64> {
    let ind = if l == lp { 1.0 } else { 0.0 };
    Ok(ind - hat_cross(l, lp, config)?)
}

/// Starred sums over the epochs outside the false-association set, with the
/// δ factors applied (so the θ combination is δ-invariant).
pub fn q_star(fa: &FalseAssocSet, config: &ScanConfig) -> Result<(f64, f64, f64)> {
    fa.validate(config)?;
    let n = config.nf();
    let d = config.dt();
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    for j in 0..=config.n_scans() {
        if fa.contains(j) {
            continue;
        }
        let jf = j as f64;
        let u = 4.0 * n + 2.0 - 6.0 * jf;
        let v = 1.0 - 2.0 * jf / n;
        s1 += u * u;
        s2 += u * v;
        s3 += v * v;
    }
    Ok((s1, -6.0 / d * s2, 36.0 / (d * d) * s3))
}

/// θ(l_k, l_k') = Σ_{j∉FA} H_{l_k j} H_{j l_k'}.
pub fn cross_theta(l: usize, lp: usize, fa: &FalseAssocSet, config: &ScanConfig) -> Result<f64> {
    if !fa.contains(l) {
        return Err(Error::IndexNotInSet(l));
    }
    if !fa.contains(lp) {
        return Err(Error::IndexNotInSet(lp));
    }
    let (q1, q2, q3) = q_star(fa, config)?;
    let d = config.dt();
    let (a, b) = (l as f64, lp as f64);
    Ok((q1 + (a + b) * d * q2 + a * b * d * d * q3) / config.denom().powi(2))
}

/// Residual cost ‖ℳz‖² through the thin orthonormal basis of the design.
#[derive(Debug, Clone)]
pub struct ResidualCost {
    q: DMatrix<f64>,
}

impl ResidualCost {
    pub fn new(config: &ScanConfig) -> Self {
        let q = build_design(config).qr().q();
        Self { q }
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn cost(&self, z: &DVector<f64>) -> f64 {
        let coef = self.q.tr_mul(z);
        let fitted = &self.q * coef;
        (z - fitted).norm_squared()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn design_rows() {
        let two = design_for_times(&[0.0, 1.0]);
        let expect = DMatrix::from_row_slice(4, 4, &[1., 0., 0., 0., 0., 1., 0., 0., 1., 0., 1., 0., 0., 1., 0., 1.]);
        assert_eq!(two, expect);
        let c = ScanConfig::new(5, 1.0, 0.0).unwrap();
        let x = build_design(&c);
        assert_eq!(x.nrows(), 12);
        assert_eq!(x.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(x.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(x.row(2).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(x.row(3).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0, 1.0]);
        let c2 = ScanConfig::new(5, 2.0, 0.0).unwrap();
        assert_eq!(build_design(&c2)[(4, 2)], 4.0);
        assert_eq!(x.clone().svd(false, false).rank(1e-10), 4);
    }

    #[test]
    fn config_validation() {
        assert!(ScanConfig::new(4, 1.0, 0.0).is_err());
        assert!(ScanConfig::new(5, 0.0, 0.0).is_err());
        assert!(ScanConfig::new(5, 1.0, -0.1).is_err());
        assert!(ScanConfig::new(5, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn trace_n10() {
        let g = build_projector(&ScanConfig::new(10, 1.0, 0.0).unwrap()).unwrap();
        // 11 epochs, 2 coordinates, 4 parameters
        assert_abs_diff_eq!(g.trace(), 18.0, epsilon = 1e-10);
    }

    #[test]
    fn stated_q1_at_zero() {
        let c = ScanConfig::new(17, 0.5, 0.0).unwrap();
        let n = 17f64;
        let (q1, _, _) = q_polynomials(0, &c).unwrap();
        assert_eq!(q1, 4.0 * n.powi(3) - 50.0 * n * n - 18.0 * n + 4.0);
    }

    #[test]
    fn alpha_last_scan() {
        for n in [5usize, 10, 40, 1000] {
            let c = ScanConfig::new(n, 1.0, 0.0).unwrap();
            let nf = n as f64;
            let a = diag_coeffs(n, &c).unwrap().alpha;
            assert_abs_diff_eq!(a, nf * (1.0 - nf) / ((nf + 1.0) * (nf + 2.0)), epsilon = 1e-14);
        }
        let big = ScanConfig::new(100_000, 1.0, 0.0).unwrap();
        assert!(diag_coeffs(100_000, &big).unwrap().alpha < -0.9999);
    }

    #[test]
    fn index_checks() {
        let c = ScanConfig::new(10, 1.0, 0.0).unwrap();
        assert!(diag_coeffs(11, &c).is_err());
        assert!(cross_alpha(0, 11, &c).is_err());
        let fa = FalseAssocSet::uniform(vec![3, 4], 1.0).unwrap();
        assert_eq!(cross_theta(3, 5, &fa, &c), Err(Error::IndexNotInSet(5)));
        assert!(FalseAssocSet::uniform(vec![4, 3], 1.0).is_err());
        assert!(FalseAssocSet::new(vec![4], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn removing_index_changes_q1_star() {
        let c = ScanConfig::new(20, 1.0, 0.0).unwrap();
        let small = FalseAssocSet::uniform(vec![3], 0.0).unwrap();
        let big = FalseAssocSet::uniform(vec![3, 7], 0.0).unwrap();
        let (a, _, _) = q_star(&small, &c).unwrap();
        let (b, _, _) = q_star(&big, &c).unwrap();
        assert_abs_diff_eq!(a - b, (4.0 * 20.0 + 2.0 - 42.0f64).powi(2), epsilon = 1e-9);
    }

    #[test]
    fn residual_cost_matches_projector() {
        let c = ScanConfig::new(12, 0.7, 0.0).unwrap();
        let g = build_projector(&c).unwrap();
        let rc = ResidualCost::new(&c);
        let z = DVector::from_fn(rc.dim(), |i, _| ((i * 37 % 11) as f64 - 5.0) * 0.3);
        let direct = (z.transpose() * &g.projector * &z)[(0, 0)];
        assert_abs_diff_eq!(rc.cost(&z), direct, epsilon = 1e-10);
    }
}
