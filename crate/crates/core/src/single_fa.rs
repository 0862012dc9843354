//! One false measurement at scan `l`, offset `fa = (0, −λ)` from the truth.
//!
//! Conditionally on the noise `e` at scan `l`, the cost difference
//! Δ = C_fa − C_ca is normal with mean α(‖e‖² − λ²) and variance
//! 4β‖e − fa‖². Everything here is an expectation of that law over `e`.

use std::f64::consts::PI;

use nalgebra::Vector2;

use crate::error::{check_param, Error, Result};
use crate::geometry::{diag_coeffs, ScanConfig};
use crate::quadrature::{adaptive_integrate, erfc_tail, gauss_legendre, normal_cdf, GaussHermite};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostDiffLaw {
    pub mean: f64,
    pub variance: f64,
}

impl CostDiffLaw {
    /// P(Δ ≥ 0); a degenerate law at 0 counts as a tie won by the correct track.
    pub fn prob_nonnegative(&self) -> f64 {
        if self.variance > 0.0 {
            erfc_tail(-self.mean / self.variance.sqrt())
        } else if self.mean >= 0.0 {
            1.0
        } else {
            0.0
        }
    }
}

fn fa_point(lambda: f64) -> Vector2<f64> {
    Vector2::new(0.0, -lambda)
}

pub fn conditional_law(e: &Vector2<f64>, l: usize, config: &ScanConfig) -> Result<CostDiffLaw> {
    let c = diag_coeffs(l, config)?;
    let lam = config.lambda();
    Ok(CostDiffLaw {
        mean: c.alpha * (e.norm_squared() - lam * lam),
        variance: 4.0 * c.beta * (e - fa_point(lam)).norm_squared(),
    })
}

pub fn conditional_probability(e: &Vector2<f64>, l: usize, config: &ScanConfig) -> Result<f64> {
    Ok(conditional_law(e, l, config)?.prob_nonnegative())
}

/// f(x, y) = (x² + y² − λ²)/‖e − fa‖.
pub fn f_ratio(e: &Vector2<f64>, lambda: f64) -> f64 {
    (e.norm_squared() - lambda * lambda) / (e - fa_point(lambda)).norm()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactReport {
    pub value: f64,
    pub order: usize,
    /// |difference| between the last two orders.
    pub error: f64,
}

const EXACT_ORDERS: [usize; 4] = [48, 96, 192, 384];
const EXACT_TOL: f64 = 1e-9;

/// E over e ~ 𝒩(0, I₂) of P(Δ ≥ 0 | e), with order escalation.
pub fn exact_probability(l: usize, config: &ScanConfig) -> Result<f64> {
    exact_report(l, config).map(|r| r.value)
}

pub fn exact_report(l: usize, config: &ScanConfig) -> Result<ExactReport> {
    let mut prev = exact_probability_with_order(l, config, EXACT_ORDERS[0])?;
    let mut err = f64::INFINITY;
    for &order in &EXACT_ORDERS[1..] {
        let cur = exact_probability_with_order(l, config, order)?;
        err = (cur - prev).abs();
        if err <= EXACT_TOL {
            return Ok(ExactReport { value: cur, order, error: err });
        }
        prev = cur;
    }
    Err(Error::NonConvergence { estimate: prev, error: err })
}

/// One polar product rule centred on the false point: e = fa + ρ(cos φ, sin φ).
///
/// There f = ρ − 2λ sin φ and ‖e‖² = (ρ − λ sin φ)² + λ² cos² φ, so the
/// integrand Φ(−f/s)·ρ·𝒩(e) is smooth; `order` periodic-trapezoid nodes in φ
/// and `order` Gauss–Legendre nodes in ρ ∈ [0, λ + 12].
pub fn exact_probability_with_order(l: usize, config: &ScanConfig, order: usize) -> Result<f64> {
    let c = diag_coeffs(l, config)?;
    let lam = config.lambda();
    let s = 2.0 * c.beta.sqrt() / c.alpha.abs();
    let (rho, w_rho) = gauss_legendre(order, 0.0, lam + 12.0)?;
    let mut acc = 0.0;
    for k in 0..order {
        let phi = 2.0 * PI * k as f64 / order as f64;
        let (sn, cs) = phi.sin_cos();
        let cc = lam * lam * cs * cs;
        let mut inner = 0.0;
        for (&r, &w) in rho.iter().zip(&w_rho) {
            let t = r - lam * sn;
            let dens = (-0.5 * (t * t + cc)).exp();
            if dens == 0.0 {
                continue;
            }
            inner += w * r * dens * erfc_tail((r - 2.0 * lam * sn) / s);
        }
        acc += inner;
    }
    // trapezoid weight 2π/order times the 1/(2π) density constant
    Ok((acc / order as f64).clamp(0.0, 1.0))
}

/// Least-squares weights of nested unit-mass boxes approximating 𝒩(0,1).
///
/// Box i has half-width κi/n and height n/(2κi).
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorApprox {
    pub n_steps: usize,
    pub support_k: f64,
    pub gammas: Vec<f64>,
    pub sums: GammaSums,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSums {
    /// Σγᵢ
    pub sum: f64,
    /// Σiγᵢ
    pub sum_i: f64,
    /// Σγᵢ/i
    pub sum_inv_i: f64,
    /// Σi²γᵢ
    pub sum_i2: f64,
}

impl GammaSums {
    fn from(g: &[f64]) -> Self {
        let mut s = GammaSums { sum: 0.0, sum_i: 0.0, sum_inv_i: 0.0, sum_i2: 0.0 };
        for (k, &v) in g.iter().enumerate() {
            let i = (k + 1) as f64;
            s.sum += v;
            s.sum_i += i * v;
            s.sum_inv_i += v / i;
            s.sum_i2 += i * i * v;
        }
        s
    }
}

pub fn fit_gammas(n_steps: usize, support_k: f64) -> Result<IndicatorApprox> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter {
            name: "n_steps",
            value: 0.0,
            reason: "at least one step is required",
        });
    }
    check_param("support_k", support_k, support_k > 0.0, "support must be positive")?;
    let gram = gram_matrix(n_steps, support_k);
    let rhs = nalgebra::DVector::from_vec(projections(n_steps, support_k));
    let chol = gram.cholesky().ok_or(Error::SingularGram { n_steps })?;
    let gammas: Vec<f64> = chol.solve(&rhs).iter().copied().collect();
    let sums = GammaSums::from(&gammas);
    Ok(IndicatorApprox { n_steps, support_k, gammas, sums })
}

/// ⟨φᵢ, φⱼ⟩ = n/(2κ·max(i, j)).
pub fn gram_matrix(n: usize, k: f64) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(n, n, |i, j| n as f64 / (2.0 * k * (i.max(j) + 1) as f64))
}

/// ⟨g, φᵢ⟩ = (n/(2κi))·(2Φ(κi/n) − 1).
pub fn projections(n: usize, k: f64) -> Vec<f64> {
    (1..=n)
        .map(|i| {
            let w = k * i as f64 / n as f64;
            (2.0 * normal_cdf(w) - 1.0) / (2.0 * w)
        })
        .collect()
}

impl IndicatorApprox {
    pub fn default_fit() -> Self {
        fit_gammas(10, 3.0).expect("default indicator fit")
    }

    fn half_width(&self, i: usize) -> f64 {
        self.support_k * i as f64 / self.n_steps as f64
    }

    /// Σγᵢφᵢ(u).
    pub fn density(&self, u: f64) -> f64 {
        (1..=self.n_steps)
            .filter(|&i| u.abs() <= self.half_width(i))
            .map(|i| self.gammas[i - 1] / (2.0 * self.half_width(i)))
            .sum()
    }

    /// γ through the tridiagonal inverse of [1/max(i,j)].
    pub fn gammas_tridiagonal(&self) -> Vec<f64> {
        let n = self.n_steps;
        let b = projections(n, self.support_k);
        let scale = n as f64 / (2.0 * self.support_k);
        (1..=n)
            .map(|i| {
                let fi = i as f64;
                let prev = if i > 1 { -(fi - 1.0) * fi * b[i - 2] } else { 0.0 };
                let (diag, next) = if i < n {
                    (2.0 * fi * fi * b[i - 1], -fi * (fi + 1.0) * b[i])
                } else {
                    (fi * fi * b[i - 1], 0.0)
                };
                (prev + diag + next) / scale
            })
            .collect()
    }

    /// The stated recursion γᵢ = i(i−1)⟨g,φ_{i−1}−φᵢ⟩ − i(i+1)⟨g,φᵢ−φ_{i+1}⟩
    /// with φ₀ = φ_{n+1} = 0, evaluated literally.
    pub fn gammas_stated_recursion(&self) -> Vec<f64> {
        let n = self.n_steps;
        let b = projections(n, self.support_k);
        let at = |i: usize| if i == 0 || i > n { 0.0 } else { b[i - 1] };
        (1..=n)
            .map(|i| {
                let fi = i as f64;
                fi * (fi - 1.0) * (at(i - 1) - at(i)) - fi * (fi + 1.0) * (at(i) - at(i + 1))
            })
            .collect()
    }

    /// ‖g − Σγᵢφᵢ‖₂; at the least-squares optimum this is ‖g‖² − γ·⟨g,φ⟩.
    pub fn reconstruction_error(&self) -> f64 {
        let b = projections(self.n_steps, self.support_k);
        let g2 = 1.0 / (2.0 * PI.sqrt());
        let fit: f64 = self.gammas.iter().zip(&b).map(|(g, b)| g * b).sum();
        (g2 - fit).max(0.0).sqrt()
    }

    /// slo = (1/2π)(6/n·Σiγᵢ − Σγᵢ/i).
    pub fn slope(&self) -> f64 {
        (6.0 / self.n_steps as f64 * self.sums.sum_i - self.sums.sum_inv_i) / (2.0 * PI)
    }
}

/// η_{i,N} = −2κi√β/(nα) (the stated −6i√β/(nα) at κ = 3).
pub fn eta(i: usize, l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<f64> {
    let c = diag_coeffs(l, config)?;
    Ok(-2.0 * approx.support_k * i as f64 * c.beta.sqrt() / (approx.n_steps as f64 * c.alpha))
}

/// Box bounds b_sup, b_inf of the i-th box around the conditional mean.
pub fn box_bounds(e: &Vector2<f64>, i: usize, l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<(f64, f64)> {
    let law = conditional_law(e, l, config)?;
    let half = approx.half_width(i) * law.variance.sqrt();
    Ok((law.mean + half, law.mean - half))
}

/// First line of the indicator decomposition:
/// Σγᵢ[b_sup·1(b_sup≥0) − b_inf·1(b_inf≥0)]/(2(κi/n)·den), den = 2√β‖e−fa‖.
pub fn prop1_box_form(e: &Vector2<f64>, l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<f64> {
    let den = conditional_law(e, l, config)?.variance.sqrt();
    let mut acc = 0.0;
    for i in 1..=approx.n_steps {
        let (bs, bi) = box_bounds(e, i, l, config, approx)?;
        let pos = |b: f64| if b >= 0.0 { b } else { 0.0 };
        acc += approx.gammas[i - 1] * (pos(bs) - pos(bi)) / (2.0 * approx.half_width(i) * den);
    }
    Ok(acc)
}

/// Second line, with the indicators rewritten as f ≤ ±η.
pub fn prop1_split_form(e: &Vector2<f64>, l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<f64> {
    let c = diag_coeffs(l, config)?;
    let f = f_ratio(e, config.lambda());
    let n = approx.n_steps as f64;
    let lead = n / (4.0 * approx.support_k) * c.alpha / c.beta.sqrt() * f;
    let mut acc = 0.0;
    for i in 1..=approx.n_steps {
        let h = eta(i, l, config, approx)?;
        let sup = if f <= h { 1.0 } else { 0.0 };
        let inf = if f <= -h { 1.0 } else { 0.0 };
        let g = approx.gammas[i - 1];
        acc += 0.5 * g * (sup + inf) + lead * g / i as f64 * (sup - inf);
    }
    Ok(acc)
}

/// offset + (a + bλ + cλ²)·e^{−λ²/2}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTailPoly {
    pub offset: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GaussianTailPoly {
    pub fn eval(&self, lambda: f64) -> f64 {
        self.offset + (self.a + self.b * lambda + self.c * lambda * lambda) * (-0.5 * lambda * lambda).exp()
    }

    /// Expectation over λ ~ 𝒩(λ₀, σ₀²): the Gaussian factor tilts λ to
    /// 𝒩(λ₀/(σ₀²+1), σ₀²/(σ₀²+1)).
    pub fn expectation(&self, rl: &RandomLambda) -> f64 {
        let v = rl.sigma0 * rl.sigma0 + 1.0;
        let lbar = rl.lambda0 / v;
        let s2 = rl.sigma0 * rl.sigma0 / v;
        self.offset
            + (self.a + self.b * lbar + self.c * (lbar * lbar + s2)) * (-rl.lambda0 * rl.lambda0 / (2.0 * v)).exp()
                / v.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampedProbability {
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
}

impl ClampedProbability {
    pub fn new(raw: f64) -> Self {
        let value = raw.clamp(0.0, 1.0);
        Self { value, raw, clamped: value != raw }
    }
}

/// Coefficients a, b, c of the stated closed form.
pub fn prop2_coeffs(l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<GaussianTailPoly> {
    let c = diag_coeffs(l, config)?;
    let r = c.beta.sqrt() / c.alpha;
    let r2 = c.beta / (c.alpha * c.alpha);
    let n = approx.n_steps as f64;
    let s = approx.sums;
    Ok(GaussianTailPoly {
        offset: 1.0,
        a: -(1.0 + r * s.sum_inv_i + 66.0 * PI / (32.0 * n * n) * r2 * s.sum_i2) / (2.0 * PI),
        b: 6.0 / n * r * s.sum_i / (2.0 * PI),
        c: 15.0 / (16.0 * n * n) * r2 * s.sum_i2,
    })
}

pub fn closed_form_probability(l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<ClampedProbability> {
    Ok(ClampedProbability::new(prop2_coeffs(l, config, approx)?.eval(config.lambda())))
}

pub fn first_order_coeffs(l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<GaussianTailPoly> {
    let c = diag_coeffs(l, config)?;
    Ok(GaussianTailPoly {
        offset: 1.0,
        a: -(1.0 - approx.slope() * c.beta.sqrt() / c.alpha),
        b: 0.0,
        c: 0.0,
    })
}

/// 1 − (1 − slo·√β/α)·e^{−λ²/2}.
pub fn first_order_probability(l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<f64> {
    Ok(first_order_coeffs(l, config, approx)?.eval(config.lambda()))
}

/// Σγᵢ(1 − e^{−λ²/2}) + (κ²/3)(1 − λ²)e^{−λ²/2}(β/α²)Σi²γᵢ/n².
///
/// Box i accepts the fraction (1/2η)∫_{−η}^{η}F of the mass, where
/// F(t) = P(f ≤ t); expanding F to second order at 0 with
/// F(0) = 1 − e^{−λ²/2} and F''(0) = (1 − λ²)e^{−λ²/2}/2 gives this form.
pub fn second_order_coeffs(l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<GaussianTailPoly> {
    let c = diag_coeffs(l, config)?;
    let n = approx.n_steps as f64;
    let k = approx.support_k;
    let corr = k * k / 3.0 * c.beta / (c.alpha * c.alpha) * approx.sums.sum_i2 / (n * n);
    Ok(GaussianTailPoly {
        offset: approx.sums.sum,
        a: -approx.sums.sum + corr,
        b: 0.0,
        c: -corr,
    })
}

pub fn second_order_probability(l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<ClampedProbability> {
    Ok(ClampedProbability::new(second_order_coeffs(l, config, approx)?.eval(config.lambda())))
}

/// Stated Aᵢ = [−2 + (2λ/π − 2)η + (λ² − 1)η²/4]·e^{−λ²/2}.
pub fn a_integral(i: usize, l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<f64> {
    let h = eta(i, l, config, approx)?;
    let lam = config.lambda();
    Ok((-2.0 + (2.0 * lam / PI - 2.0) * h + (lam * lam - 1.0) * h * h / 4.0) * (-0.5 * lam * lam).exp())
}

/// Stated Bᵢ = ((1 − 2λ²)/2π)·e^{−λ²/2}·(η³/3)·π.
pub fn b_integral(i: usize, l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<f64> {
    let h = eta(i, l, config, approx)?;
    let lam = config.lambda();
    Ok((1.0 - 2.0 * lam * lam) / (2.0 * PI) * (-0.5 * lam * lam).exp() * h.powi(3) / 3.0 * PI)
}

/// Stated value of (α/√β)(n/12)Σ(γᵢ/i)Bᵢ: 3(1−2λ²)e^{−λ²/2}(β/α²)Σi²γᵢ/(32n²).
pub fn b_term_stated(l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<f64> {
    let c = diag_coeffs(l, config)?;
    let lam = config.lambda();
    let n = approx.n_steps as f64;
    Ok(3.0 * (1.0 - 2.0 * lam * lam) * (-0.5 * lam * lam).exp() * c.beta / (c.alpha * c.alpha) * approx.sums.sum_i2
        / (32.0 * n * n))
}

/// Σ(γᵢ/2)(2 + Aᵢ) + (α/√β)(n/(4κ))Σ(γᵢ/i)Bᵢ from the stated Aᵢ, Bᵢ.
///
/// The stated Aᵢ drops the constant 2 of the full integral; it is restored here.
pub fn assembled_probability(l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<f64> {
    let c = diag_coeffs(l, config)?;
    let n = approx.n_steps as f64;
    let lead = c.alpha / c.beta.sqrt() * n / (4.0 * approx.support_k);
    let mut acc = 0.0;
    for i in 1..=approx.n_steps {
        let g = approx.gammas[i - 1];
        acc += 0.5 * g * (2.0 + a_integral(i, l, config, approx)?) + lead * g / i as f64 * b_integral(i, l, config, approx)?;
    }
    Ok(acc)
}

// e = fa + ρ(cos φ, sin φ); with c = λ sin φ, ‖e‖² = (ρ − c)² + λ²cos²φ.
// ∫₀^U ρ e^{−(ρ−c)²/2} dρ
fn radial_mass(c: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let g = |t: f64| (-0.5 * t * t).exp();
    g(c) - g(u - c) + c * (2.0 * PI).sqrt() * (normal_cdf(u - c) - normal_cdf(-c))
}

// ∫_L^U ρ(ρ − 2c) e^{−(ρ−c)²/2} dρ, 0 ≤ L ≤ U
fn radial_f_moment(c: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let prim = |r: f64| {
        let t = r - c;
        -t * (-0.5 * t * t).exp() + (1.0 - c * c) * (2.0 * PI).sqrt() * normal_cdf(t)
    };
    prim(hi) - prim(lo)
}

fn angular<F: Fn(f64) -> f64>(lambda: f64, inner: F) -> Result<f64> {
    let f = |phi: f64| {
        let (s, c) = phi.sin_cos();
        (-0.5 * lambda * lambda * c * c).exp() * inner(lambda * s) / (2.0 * PI)
    };
    // split at the quarter points so the kinks of the clipped limits fall inside pieces
    let mut total = 0.0;
    for q in 0..4 {
        let a = q as f64 * PI / 2.0;
        total += adaptive_integrate(f, a, a + PI / 2.0, 1e-13)?.value;
    }
    Ok(total)
}

/// P(f ≤ t) for e ~ 𝒩(0, I₂), by 1-D quadrature over the angle.
pub fn f_cdf(t: f64, lambda: f64) -> Result<f64> {
    angular(lambda, |c| radial_mass(c, 2.0 * c + t))
}

/// Numeric Aᵢ = ∫𝒩[1(f ≤ η) + 1(f ≤ −η)].
pub fn a_integral_numeric(i: usize, l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<f64> {
    let h = eta(i, l, config, approx)?;
    Ok(f_cdf(h, config.lambda())? + f_cdf(-h, config.lambda())?)
}

/// Numeric Bᵢ = ∫_{−η < f ≤ η} 𝒩·f.
pub fn b_integral_numeric(i: usize, l: usize, config: &ScanConfig, approx: &IndicatorApprox) -> Result<f64> {
    let h = eta(i, l, config, approx)?;
    angular(config.lambda(), |c| {
        let lo = (2.0 * c - h).max(0.0);
        let hi = (2.0 * c + h).max(0.0);
        radial_f_moment(c, lo, hi)
    })
}

/// Contamination distance drawn per trial from 𝒩(λ₀, σ₀²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomLambda {
    pub lambda0: f64,
    pub sigma0: f64,
}

impl RandomLambda {
    pub fn new(lambda0: f64, sigma0: f64) -> Result<Self> {
        check_param("lambda0", lambda0, true, "must be finite")?;
        check_param("sigma0", sigma0, sigma0 >= 0.0, "must be nonnegative")?;
        Ok(Self { lambda0, sigma0 })
    }
}

/// Stated closed form averaged over λ.
pub fn random_lambda_probability(
    rl: &RandomLambda,
    l: usize,
    config: &ScanConfig,
    approx: &IndicatorApprox,
) -> Result<ClampedProbability> {
    Ok(ClampedProbability::new(prop2_coeffs(l, config, approx)?.expectation(rl)))
}

/// The stated large-N value 1 − e^{−λ̄₀²/2}/(2π√(σ₀²+1)).
pub fn random_lambda_stated_limit(rl: &RandomLambda) -> f64 {
    let v = rl.sigma0 * rl.sigma0 + 1.0;
    let lbar = rl.lambda0 / v;
    1.0 - (-0.5 * lbar * lbar).exp() / (2.0 * PI * v.sqrt())
}

/// E_λ[exact_probability(|λ|)] by 48-point Gauss–Hermite over λ.
pub fn random_lambda_exact(rl: &RandomLambda, l: usize, config: &ScanConfig) -> Result<f64> {
    if rl.sigma0 == 0.0 {
        return exact_probability(l, &config.with_lambda(rl.lambda0.abs())?);
    }
    let gh = GaussHermite::new(48)?;
    let mut acc = 0.0;
    for (&z, &w) in gh.nodes.iter().zip(&gh.weights) {
        let lam = (rl.lambda0 + rl.sigma0 * z).abs();
        acc += w * exact_probability(l, &config.with_lambda(lam)?)?;
    }
    Ok(acc)
}

/// Cartesian tensor Gauss–Hermite evaluation of the same expectation. The
/// integrand jumps at e = fa, so this converges slowly; kept for comparison.
pub fn exact_probability_cartesian(l: usize, config: &ScanConfig, order: usize) -> Result<f64> {
    let gh = GaussHermite::new(order)?;
    let mut acc = 0.0;
    for (&x, &wx) in gh.nodes.iter().zip(&gh.weights) {
        for (&y, &wy) in gh.nodes.iter().zip(&gh.weights) {
            acc += wx * wy * conditional_probability(&Vector2::new(x, y), l, config)?;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(n: usize, lam: f64) -> ScanConfig {
        ScanConfig::new(n, 1.0, lam).unwrap()
    }

    #[test]
    fn law_at_false_point_is_degenerate() {
        let c = cfg(20, 1.7);
        let law = conditional_law(&Vector2::new(0.0, -1.7), 20, &c).unwrap();
        assert_abs_diff_eq!(law.mean, 0.0, epsilon = 1e-14);
        assert_eq!(law.variance, 0.0);
        let at0 = conditional_law(&Vector2::zeros(), 20, &c).unwrap();
        let alpha = diag_coeffs(20, &c).unwrap().alpha;
        assert_abs_diff_eq!(at0.mean, -alpha * 1.7 * 1.7, epsilon = 1e-14);
        assert!(at0.mean > 0.0);
    }

    #[test]
    fn exact_reference_values() {
        let refs = [
            (5, 1.0, 0.431753450994),
            (20, 0.0, 0.133693037248),
            (20, 2.0, 0.795499435728),
            (40, 1.0, 0.396444965783),
            (40, 2.0, 0.827011033562),
            (40, 3.0, 0.977338851859),
            (200, 2.0, 0.856651223431),
        ];
        for (n, lam, p) in refs {
            let v = exact_probability(n, &cfg(n, lam)).unwrap();
            assert_abs_diff_eq!(v, p, epsilon = 1e-9);
        }
    }

    #[test]
    fn exact_far_contamination() {
        assert!(exact_probability(40, &cfg(40, 8.0)).unwrap() >= 0.999);
    }

    #[test]
    fn exact_order_32_vs_64() {
        for n in [20, 40] {
            for lam in [1.0, 2.0, 3.0] {
                let c = cfg(n, lam);
                let a = exact_probability_with_order(n, &c, 32).unwrap();
                let b = exact_probability_with_order(n, &c, 64).unwrap();
                assert!((a - b).abs() <= 1e-6, "N={n} λ={lam}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn gamma_single_box() {
        let g = fit_gammas(1, 3.0).unwrap();
        assert_abs_diff_eq!(g.gammas[0], 0.9973002039367398, epsilon = 1e-12);
    }

    #[test]
    fn gamma_reference_n10() {
        let g = fit_gammas(10, 3.0).unwrap();
        let expect = [0.02015, 0.07057, 0.12722, 0.16582, 0.17386, 0.15373, 0.11759, 0.07898, 0.04704, 0.04234];
        for (a, b) in g.gammas.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-5);
        }
        assert_abs_diff_eq!(g.sums.sum, 0.9973002039367398, epsilon = 1e-12);
        assert_abs_diff_eq!(g.slope(), 0.468547, epsilon = 1e-5);
    }

    #[test]
    fn gamma_tridiagonal_matches_solve() {
        for n in [1, 2, 5, 10, 17] {
            let g = fit_gammas(n, 3.0).unwrap();
            for (a, b) in g.gammas.iter().zip(g.gammas_tridiagonal()) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn gram_with_min_is_not_positive_definite() {
        let n = 6;
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| n as f64 / (6.0 * (i.min(j) + 1) as f64));
        assert!(m.cholesky().is_none());
    }

    #[test]
    fn prop1_lines_agree() {
        let approx = IndicatorApprox::default_fit();
        let c = cfg(30, 1.8);
        for k in 0..200 {
            let t = k as f64 * 0.37;
            let e = Vector2::new(2.5 * t.sin(), 2.0 * (1.3 * t).cos() - 0.5);
            let a = prop1_box_form(&e, 17, &c, &approx).unwrap();
            let b = prop1_split_form(&e, 17, &c, &approx).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn box_bound_equivalences() {
        let approx = IndicatorApprox::default_fit();
        let c = cfg(25, 2.2);
        for k in 0..100 {
            let t = k as f64 * 0.61;
            let e = Vector2::new(1.9 * t.cos(), 2.4 * (0.7 * t).sin() - 1.0);
            let f = f_ratio(&e, 2.2);
            for i in 1..=10 {
                let (bs, bi) = box_bounds(&e, i, 25, &c, &approx).unwrap();
                let h = eta(i, 25, &c, &approx).unwrap();
                assert_eq!(bs >= 0.0, f <= h);
                assert_eq!(bi >= 0.0, f <= -h);
            }
        }
    }

    #[test]
    fn prop2_far_lambda() {
        let approx = IndicatorApprox::default_fit();
        let p = closed_form_probability(40, &cfg(40, 6.0), &approx).unwrap();
        assert!((p.value - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn prop2_correction_at_zero_is_a() {
        let approx = IndicatorApprox::default_fit();
        let c = cfg(40, 0.0);
        let poly = prop2_coeffs(40, &c, &approx).unwrap();
        let p = closed_form_probability(40, &c, &approx).unwrap();
        assert!(poly.a.is_finite());
        assert_abs_diff_eq!(p.raw - 1.0, poly.a, epsilon = 1e-15);
    }

    #[test]
    fn first_order_limits() {
        let approx = IndicatorApprox::default_fit();
        let big = cfg(100_000, 2.0);
        let p = first_order_probability(100_000, &big, &approx).unwrap();
        assert_abs_diff_eq!(p, 1.0 - (-2.0f64).exp(), epsilon = 1e-2);
        let mut prev = 0.0;
        for n in [10, 20, 40, 80, 160] {
            let v = first_order_probability(n, &cfg(n, 2.0), &approx).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn ab_at_zero_eta_and_sign_flip() {
        // η → 0 is reached as N → ∞
        let approx = IndicatorApprox::default_fit();
        let c = cfg(5_000_000, 1.3);
        let e = (-0.5f64 * 1.3 * 1.3).exp();
        assert!(b_integral(1, 5_000_000, &c, &approx).unwrap().abs() < 1e-9);
        assert_abs_diff_eq!(a_integral(1, 5_000_000, &c, &approx).unwrap(), -2.0 * e, epsilon = 1e-3);
        let below = cfg(40, 0.7);
        let above = cfg(40, 0.72);
        assert!(b_integral(3, 40, &below, &approx).unwrap() > 0.0);
        assert!(b_integral(3, 40, &above, &approx).unwrap() < 0.0);
    }

    #[test]
    fn f_cdf_at_zero_is_disc_mass() {
        for lam in [0.5, 1.0, 2.0, 3.0] {
            assert_abs_diff_eq!(f_cdf(0.0, lam).unwrap(), 1.0 - (-0.5f64 * lam * lam).exp(), epsilon = 1e-10);
        }
    }

    #[test]
    fn random_lambda_degenerate() {
        let approx = IndicatorApprox::default_fit();
        let c = cfg(40, 2.3);
        let rl = RandomLambda::new(2.3, 0.0).unwrap();
        let a = random_lambda_probability(&rl, 40, &c, &approx).unwrap();
        let b = closed_form_probability(40, &c, &approx).unwrap();
        assert_abs_diff_eq!(a.raw, b.raw, epsilon = 1e-14);
        assert!(RandomLambda::new(1.0, -1.0).is_err());
    }

    #[test]
    fn tail_poly_expectation_matches_hermite() {
        let p = GaussianTailPoly { offset: 0.3, a: -0.7, b: 0.4, c: 0.2 };
        let rl = RandomLambda::new(1.4, 1.7).unwrap();
        let gh = GaussHermite::new(80).unwrap();
        let direct = gh.expect_normal(rl.lambda0, rl.sigma0, |l| p.eval(l));
        assert_abs_diff_eq!(p.expectation(&rl), direct, epsilon = 1e-12);
    }
}
