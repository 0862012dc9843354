//! K false measurements: compound-law approximations of P(Δ ≥ 0).
//!
//! With e the stacked noises of the contaminated scans, m₁ = eᵀℳe − faᵀℳfa
//! and v₁ = 4(e − fa)ᵀΘ(e − fa) (blocks restricted to the false-association
//! set). Conditionally Δ ~ 𝒩(−m₁, v₁). Treating m₁ ~ 𝒩(m₀, σ₀²) independent
//! of v₁ gives P = E[erfc(m₀/√(σ₀² + v₁))] over a chosen law of v₁.

use std::f64::consts::PI;

use crate::error::{check_param, Error, Result};
use crate::geometry::{cross_alpha, cross_theta, ScanConfig};
use crate::quadrature::{adaptive_integrate, erfc_tail, normal_cdf, normal_pdf};

pub use crate::geometry::FalseAssocSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentParams {
    pub m0: f64,
    pub sigma0_sq: f64,
    pub v0: f64,
    pub s0_sq: f64,
}

/// Which expressions to use for σ₀² and s₀² (m₀ and v₀ agree in all three).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MomentVariant {
    /// σ₀² = 4(ΣΣα)², s₀² = 2[ΣΣθ(1+λ)(1+λ')][ΣΣθ], the squared-sum form.
    SquaredSum,
    /// σ₀² = 4ΣΣα², s₀² = 64Σθ_kk²(1 + λ_k²), diagonal terms only.
    DiagonalOnly,
    /// σ₀² = 4ΣΣα², s₀² = 64ΣΣθ² + 64λᵀΘ²λ: the definitional moments.
    #[default]
    Exact,
}

pub fn alpha_matrix(fa: &FalseAssocSet, config: &ScanConfig) -> Result<Vec<Vec<f64>>> {
    let idx = fa.indices();
    idx.iter()
        .map(|&a| idx.iter().map(|&b| cross_alpha(a, b, config)).collect())
        .collect()
}

pub fn theta_matrix(fa: &FalseAssocSet, config: &ScanConfig) -> Result<Vec<Vec<f64>>> {
    let idx = fa.indices();
    idx.iter()
        .map(|&a| idx.iter().map(|&b| cross_theta(a, b, fa, config)).collect())
        .collect()
}

pub fn moment_params(fa: &FalseAssocSet, config: &ScanConfig, variant: MomentVariant) -> Result<MomentParams> {
    fa.validate(config)?;
    let al = alpha_matrix(fa, config)?;
    let th = theta_matrix(fa, config)?;
    let lam = fa.lambdas();
    let k = fa.len();

    let mut m0 = 0.0;
    let mut v0 = 0.0;
    let (mut sum_a, mut sum_a2, mut sum_t, mut sum_t2) = (0.0, 0.0, 0.0, 0.0);
    let mut sq_s = 0.0;
    for i in 0..k {
        m0 += 2.0 * al[i][i];
        v0 += 8.0 * th[i][i];
        for j in 0..k {
            m0 -= al[i][j] * lam[i] * lam[j];
            v0 += 4.0 * th[i][j] * lam[i] * lam[j];
            sum_a += al[i][j];
            sum_a2 += al[i][j] * al[i][j];
            sum_t += th[i][j];
            sum_t2 += th[i][j] * th[i][j];
            sq_s += th[i][j] * (1.0 + lam[i]) * (1.0 + lam[j]);
        }
    }
    // λᵀΘ²λ
    let th_lam: Vec<f64> = (0..k).map(|i| (0..k).map(|j| th[i][j] * lam[j]).sum()).collect();
    let quad: f64 = th_lam.iter().map(|x| x * x).sum();

    let (sigma0_sq, s0_sq) = match variant {
        MomentVariant::SquaredSum => (4.0 * sum_a * sum_a, 2.0 * sq_s * sum_t),
        MomentVariant::DiagonalOnly => (
            4.0 * sum_a2,
            64.0 * (0..k).map(|i| th[i][i] * th[i][i] * (1.0 + lam[i] * lam[i])).sum::<f64>(),
        ),
        MomentVariant::Exact => (4.0 * sum_a2, 64.0 * sum_t2 + 64.0 * quad),
    };
    Ok(MomentParams { m0, sigma0_sq, v0, s0_sq })
}

/// Law of the conditional variance v₁.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VLaw {
    /// χ² with `dof` degrees of freedom (2K).
    Chi2 { dof: f64 },
    /// 𝒩(mean, var) restricted to v > floor and renormalised.
    Normal { mean: f64, var: f64, floor: f64 },
    Exponential { rate: f64 },
    Point(f64),
}

impl VLaw {
    pub fn normal_from(mp: &MomentParams) -> Self {
        VLaw::Normal { mean: mp.v0, var: mp.s0_sq, floor: -mp.sigma0_sq }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            VLaw::Chi2 { dof } => (0.0, dof + 15.0 * (2.0 * dof).sqrt() + 60.0),
            VLaw::Normal { mean, var, floor } => {
                let sd = var.sqrt();
                ((mean - 12.0 * sd).max(floor), (mean + 12.0 * sd).max(floor))
            }
            VLaw::Exponential { rate } => (0.0, 50.0 / rate),
            VLaw::Point(v) => (v, v),
        }
    }

    /// Mass of the unrestricted law kept by the support (1 except for Normal).
    fn kept_mass(&self) -> f64 {
        match *self {
            VLaw::Normal { mean, var, floor } if var > 0.0 => normal_cdf((mean - floor) / var.sqrt()),
            _ => 1.0,
        }
    }

    pub fn pdf(&self, v: f64) -> f64 {
        match *self {
            VLaw::Chi2 { dof } => {
                if v <= 0.0 {
                    return 0.0;
                }
                let k = dof / 2.0;
                ((k - 1.0) * v.ln() - v / 2.0 - k * std::f64::consts::LN_2 - libm::lgamma(k)).exp()
            }
            VLaw::Normal { mean, var, floor } => {
                if v <= floor || var <= 0.0 {
                    return 0.0;
                }
                let sd = var.sqrt();
                normal_pdf((v - mean) / sd) / sd / self.kept_mass()
            }
            VLaw::Exponential { rate } => {
                if v < 0.0 {
                    0.0
                } else {
                    rate * (-rate * v).exp()
                }
            }
            VLaw::Point(_) => 0.0,
        }
    }

    /// E[f(v₁)].
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F, abs_tol: f64) -> Result<f64> {
        if let VLaw::Point(v) = *self {
            return Ok(f(v));
        }
        if let VLaw::Normal { mean, var, .. } = *self {
            if var <= 0.0 {
                return Ok(f(mean));
            }
        }
        let (a, b) = self.support();
        if b <= a {
            return Err(Error::NonConvergence { estimate: f64::NAN, error: f64::INFINITY });
        }
        Ok(adaptive_integrate(|v| f(v) * self.pdf(v), a, b, abs_tol)?.value)
    }
}

fn conditional_tail(mp: &MomentParams, v: f64) -> f64 {
    let var = mp.sigma0_sq + v;
    if var > 0.0 {
        erfc_tail(mp.m0 / var.sqrt())
    } else if mp.m0 <= 0.0 {
        1.0
    } else {
        0.0
    }
}

const V_TOL: f64 = 1e-10;

/// v₁ ~ χ²(2K).
pub fn prob_chi2(k: usize, mp: &MomentParams) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter { name: "K", value: 0.0, reason: "K must be at least 1" });
    }
    let law = VLaw::Chi2 { dof: 2.0 * k as f64 };
    Ok(law.expect(|v| conditional_tail(mp, v), V_TOL)?.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalApprox {
    pub value: f64,
    /// 𝒩(v₀, s₀²) mass on v₁ ≤ 0.
    pub mass_nonpositive: f64,
    pub unreliable: bool,
}

/// v₁ ~ 𝒩(v₀, s₀²), restricted to v₁ > −σ₀².
pub fn prob_normal(mp: &MomentParams) -> Result<NormalApprox> {
    let mass_nonpositive = if mp.s0_sq > 0.0 {
        normal_cdf(-mp.v0 / mp.s0_sq.sqrt())
    } else if mp.v0 <= 0.0 {
        1.0
    } else {
        0.0
    };
    let value = VLaw::normal_from(mp).expect(|v| conditional_tail(mp, v), V_TOL)?.clamp(0.0, 1.0);
    Ok(NormalApprox { value, mass_nonpositive, unreliable: mass_nonpositive > 0.05 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialApprox {
    /// Adaptive quadrature (the oracle).
    pub value: f64,
    /// Stated recursion for I_{2n+1} seeded with the quadrature I₁.
    pub series_recursion: f64,
    /// Same series with every I_{2n+1} computed by quadrature.
    pub series_moments: f64,
    /// The stated two-term erf expression.
    pub stated_final: f64,
    pub discrepancy: f64,
    pub diagnostic: Option<String>,
}

/// v₁ ~ Exp(rate).
pub fn prob_exponential(mp: &MomentParams, rate: f64, series_terms: usize) -> Result<ExponentialApprox> {
    check_param("rate", rate, rate > 0.0, "rate must be positive")?;
    if series_terms == 0 {
        return Err(Error::InvalidParameter { name: "series_terms", value: 0.0, reason: "need at least one term" });
    }
    let law = VLaw::Exponential { rate };
    let value = law.expect(|v| conditional_tail(mp, v), V_TOL)?.clamp(0.0, 1.0);

    // series moments are diagnostics only; overflow there must not sink the value
    let moment = |p: i32| law.expect(|v| (mp.m0 / (mp.sigma0_sq + v).sqrt()).powi(p), 1e-12).unwrap_or(f64::NAN);
    let i1 = moment(1);
    let sigma0 = mp.sigma0_sq.sqrt();
    let m0 = mp.m0;
    let coef = |n: usize| {
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign / (libm::tgamma(n as f64 + 1.0) * (2 * n + 1) as f64)
    };

    let mut diag = Vec::new();
    let mut rec = 0.0;
    let mut mom = 0.0;
    let mut i_rec = i1;
    let mut last_rec = 0.0;
    let mut last_mom = 0.0;
    for n in 0..series_terms {
        if n > 0 {
            let p = (2 * n + 1) as i32;
            i_rec = rate * m0.powi(p) - rate * m0 * m0 * sigma0.powi(p - 2) * i_rec;
        }
        let i_mom = moment((2 * n + 1) as i32);
        last_rec = coef(n) * i_rec;
        last_mom = coef(n) * i_mom;
        rec += last_rec;
        mom += last_mom;
    }
    let scale = 2.0 / PI.sqrt();
    let mut series_recursion = 1.0 - scale * rec;
    let mut series_moments = 1.0 - scale * mom;
    if !series_recursion.is_finite() || last_rec.abs() > 1e-6 {
        diag.push(format!("recursion series not converged (last term {last_rec:.3e})"));
        series_recursion = f64::NAN;
    }
    if !series_moments.is_finite() || last_mom.abs() > 1e-6 {
        diag.push(format!("moment series not converged (last term {last_mom:.3e})"));
        series_moments = f64::NAN;
    }
    let x = rate * m0.powi(4) * sigma0;
    let stated_final = 1.0 - (libm::erf(1.0) - libm::erf(-x)) / x
        + libm::erf(rate * m0 * m0 * sigma0) / (m0 * m0 * rate * mp.sigma0_sq) * i1;
    Ok(ExponentialApprox {
        value,
        series_recursion,
        series_moments,
        stated_final,
        discrepancy: series_recursion - value,
        diagnostic: if diag.is_empty() { None } else { Some(diag.join("; ")) },
    })
}

/// Density of Δ after integrating the conditional law over v₁:
/// h(Δ) = ∫𝒩(−m₀, σ₀² + v)(Δ)·g(v) dv.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompoundDensity {
    pub mp: MomentParams,
    pub law: VLaw,
}

pub fn compound_density(mp: &MomentParams, law: VLaw) -> CompoundDensity {
    CompoundDensity { mp: *mp, law }
}

impl CompoundDensity {
    fn gauss(&self, delta: f64, v: f64) -> f64 {
        let var = self.mp.sigma0_sq + v;
        if var <= 0.0 {
            return 0.0;
        }
        let sd = var.sqrt();
        normal_pdf((delta + self.mp.m0) / sd) / sd
    }

    pub fn density(&self, delta: f64) -> Result<f64> {
        self.law.expect(|v| self.gauss(delta, v), 1e-12)
    }

    fn span(&self) -> (f64, f64) {
        let (_, vmax) = self.law.support();
        let sd = (self.mp.sigma0_sq + vmax.max(0.0)).sqrt();
        (-self.mp.m0 - 14.0 * sd, -self.mp.m0 + 14.0 * sd)
    }

    fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let err = std::cell::Cell::new(None);
        let v = adaptive_integrate(
            |d| match self.density(d) {
                Ok(x) => x,
                Err(e) => {
                    err.set(Some(e));
                    0.0
                }
            },
            a,
            b,
            1e-9,
        )?;
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(v.value),
        }
    }

    pub fn total_mass(&self) -> Result<f64> {
        let (a, b) = self.span();
        self.integrate(a, b)
    }

    /// P(Δ ≥ 0) by integrating the density.
    pub fn tail_probability(&self) -> Result<f64> {
        let (a, b) = self.span();
        self.integrate(a.max(0.0), b)
    }
}
