//! Special functions and quadrature rules.
//!
//! `erfc_tail` is the *upper-tail* normal probability, not the classical
//! complementary error function. Every other module goes through it.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const MAX_GH_ORDER: usize = 256;

/// Upper-tail mass of the standard normal beyond `x`: ∫ₓ^∞ 𝒩(0,1).
///
/// Equals `½·erfc(x/√2)` in the classical convention.
pub fn erfc_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    erfc_tail(-x)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Gauss–Hermite rule for the probabilists' weight, ∫f d𝒩(0,1) ≈ Σwᵢf(xᵢ).
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch: eigen-decomposition of the Jacobi matrix of the monic
    /// probabilists' Hermite recurrence (off-diagonal √i).
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > MAX_GH_ORDER {
            return Err(Error::UnsupportedOrder(order));
        }
        let mut jac = DMatrix::<f64>::zeros(order, order);
        for i in 1..order {
            let b = (i as f64).sqrt();
            jac[(i, i - 1)] = b;
            jac[(i - 1, i)] = b;
        }
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // symmetrise: the rule is exactly symmetric about 0
        for k in 0..order / 2 {
            let j = order - 1 - k;
            let x = 0.5 * (pairs[j].0 - pairs[k].0);
            let w = 0.5 * (pairs[j].1 + pairs[k].1);
            pairs[k] = (-x, w);
            pairs[j] = (x, w);
        }
        if order % 2 == 1 {
            pairs[order / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// E[f(X)], X ~ 𝒩(0,1).
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// E[f(X)], X ~ 𝒩(mean, sd²).
    pub fn expect_normal<F: Fn(f64) -> f64>(&self, mean: f64, sd: f64, f: F) -> f64 {
        self.expect(|z| f(mean + sd * z))
    }

    /// E[f(X, Y)] for independent standard normals (tensor rule).
    pub fn expect_2d<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        let mut acc = 0.0;
        for (&x, &wx) in self.nodes.iter().zip(&self.weights) {
            for (&y, &wy) in self.nodes.iter().zip(&self.weights) {
                acc += wx * wy * f(x, y);
            }
        }
        acc
    }
}

/// Gauss–Legendre nodes and weights on [a, b] (Newton on the Legendre recurrence).
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 || order > 4096 {
        return Err(Error::UnsupportedOrder(order));
    }
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let xm = 0.5 * (b + a);
    let xl = 0.5 * (b - a);
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp;
        loop {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = xm - xl * z;
        x[n - 1 - i] = xm + xl * z;
        w[i] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    Ok((x, w))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Integral {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * GK_WK[7];
    let mut gauss = fc * GK_WG[3];
    for j in 0..7 {
        let dx = h * GK_X[j];
        let s = f(c - dx) + f(c + dx);
        kron += GK_WK[j] * s;
        if j % 2 == 1 {
            gauss += GK_WG[j / 2] * s;
        }
    }
    Integral {
        value: kron * h,
        error: ((kron - gauss) * h).abs(),
    }
}

pub const MAX_SUBINTERVALS: usize = 4000;

/// Globally adaptive Gauss–Kronrod (7/15) integration: the sub-interval with
/// the largest error estimate is bisected until the summed error is below
/// `abs_tol` (or below 1e-14 relative to the value).
///
/// Fails with [`Error::NonConvergence`] carrying the best estimate once
/// [`MAX_SUBINTERVALS`] pieces are in use.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
pub fn adaptive_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<Integral> {
    if !(abs_tol > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter {
            name: "abs_tol",
            value: abs_tol,
            reason: "tolerance must be positive and bounds finite",
        });
    }
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0 });
    }
    let first = gk15(&f, a, b);
    let mut pieces = vec![(a, b, first)];
    loop {
        let value: f64 = pieces.iter().map(|p| p.2.value).sum();
        let error: f64 = pieces.iter().map(|p| p.2.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::NonConvergence { estimate: value, error });
        }
        if error <= abs_tol || error <= 1e-14 * value.abs() {
            return Ok(Integral { value, error });
        }
        if pieces.len() >= MAX_SUBINTERVALS {
            return Err(Error::NonConvergence { estimate: value, error });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::NonConvergence { estimate: value, error });
        }
        pieces.push((lo, mid, gk15(&f, lo, mid)));
        pieces.push((mid, hi, gk15(&f, mid, hi)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn erfc_symmetry_and_centre() {
        assert_eq!(erfc_tail(0.0), 0.5);
        for x in [0.1, 0.7, 1.96, 3.5] {
            assert_abs_diff_eq!(erfc_tail(-x), 1.0 - erfc_tail(x), epsilon = 1e-15);
        }
        assert!(erfc_tail(40.0) == 0.0 && erfc_tail(-40.0) == 1.0);
    }

    #[test]
    fn hermite_moments() {
        let gh = GaussHermite::new(40).unwrap();
        assert_abs_diff_eq!(gh.expect(|_| 1.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(gh.expect(|x| x * x), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gh.expect(|x| x.powi(4)), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gh.expect(|x| x.powi(3)), 0.0, epsilon = 1e-12);
        assert!(GaussHermite::new(0).is_err());
        assert!(GaussHermite::new(MAX_GH_ORDER + 1).is_err());
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10, -1.0, 2.0).unwrap();
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(7)).sum();
        assert_abs_diff_eq!(v, (2f64.powi(8) - 1.0) / 8.0, epsilon = 1e-11);
    }

    #[test]
    fn adaptive_known_integrals() {
        let chi2 = adaptive_integrate(|v| 0.5 * (-v / 2.0).exp(), 0.0, 80.0, 1e-10).unwrap();
        assert_abs_diff_eq!(chi2.value, 1.0, epsilon = 1e-8);
        let s = adaptive_integrate(|t| (t / 2.0).sin().powi(2), 0.0, 2.0 * std::f64::consts::PI, 1e-12).unwrap();
        assert_abs_diff_eq!(s.value, std::f64::consts::PI, epsilon = 1e-10);
    }

    #[test]
    fn adaptive_vs_hermite() {
        let gh = GaussHermite::new(64).unwrap();
        let f = |x: f64| erfc_tail(0.3 * x - 0.4);
        let by_gh = gh.expect(f);
        let by_ak = adaptive_integrate(|x| f(x) * normal_pdf(x), -12.0, 12.0, 1e-12).unwrap();
        assert_abs_diff_eq!(by_gh, by_ak.value, epsilon = 1e-8);
    }

    #[test]
    fn adaptive_reports_failure_on_singularity() {
        let r = adaptive_integrate(|x| 1.0 / x, 0.0, 1.0, 1e-12);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }
}
