//! Stated forms measured against their oracles.
//!
//! Each [`Finding`] pairs a value computed from a stated expression with the
//! value an independent route gives for the same quantity. The report is
//! descriptive; pass/fail thresholds live in the test suite.

use std::fmt::Write as _;

use crate::dtmc::{self, AssocDtmc};
use crate::error::Result;
use crate::geometry::{build_projector, diag_coeffs, FalseAssocSet, ScanConfig};
use crate::mc::{self, TrialPlan};
use crate::multi_fa::{self, MomentVariant};
use crate::single_fa::{self, IndicatorApprox, RandomLambda};

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub topic: &'static str,
    pub case: String,
    pub stated: f64,
    pub reference: f64,
}

impl Finding {
    pub fn abs_diff(&self) -> f64 {
        (self.stated - self.reference).abs()
    }

    pub fn rel_diff(&self) -> f64 {
        self.abs_diff() / self.reference.abs().max(f64::MIN_POSITIVE)
    }
}

fn push(out: &mut Vec<Finding>, topic: &'static str, case: String, stated: f64, reference: f64) {
    out.push(Finding { topic, case, stated, reference });
}

/// Projector blocks: closed-form ℳ_ll and the β coefficients against the
/// numeric projector and Φ_ll, for l ∈ {1, ⌈N/2⌉, N}.
pub fn geometry_findings() -> Result<Vec<Finding>> {
    let mut out = Vec::new();
    for n in [10, 20, 40] {
        let cfg = ScanConfig::new(n, 1.0, 0.0)?;
        let geo = build_projector(&cfg)?;
        for l in [1, n.div_ceil(2), n] {
            let c = diag_coeffs(l, &cfg)?;
            let (m_ll, _) = geo.projector_block(l, l);
            let phi = geo.phi(&[l]);
            let phi_ll = phi[(2 * l, 2 * l)];
            push(&mut out, "M_ll closed form", format!("N={n} l={l}"), -c.alpha, m_ll);
            push(&mut out, "beta exact h(1-h) vs Phi_ll", format!("N={n} l={l}"), c.beta, phi_ll);
            push(&mut out, "beta stated polynomial vs Phi_ll", format!("N={n} l={l}"), c.beta_polynomial, phi_ll);
        }
    }
    Ok(out)
}

/// Indicator weights, Aᵢ/Bᵢ and the closed forms at the last scan.
pub fn single_fa_findings() -> Result<Vec<Finding>> {
    let mut out = Vec::new();
    let approx = IndicatorApprox::default_fit();
    let rec = approx.gammas_stated_recursion();
    let n = approx.n_steps;
    push(&mut out, "gamma stated recursion (i=1)", "n=10 k=3".into(), rec[0], approx.gammas[0]);
    push(&mut out, "gamma stated recursion (i=n)", "n=10 k=3".into(), rec[n - 1], approx.gammas[n - 1]);
    let cfg = ScanConfig::new(40, 1.0, 2.0)?;
    push(
        &mut out,
        "B_1 stated vs numeric",
        "N=40 lambda=2".into(),
        single_fa::b_integral(1, 40, &cfg, &approx)?,
        single_fa::b_integral_numeric(1, 40, &cfg, &approx)?,
    );
    push(
        &mut out,
        "A_1 stated (+2) vs numeric",
        "N=40 lambda=2".into(),
        single_fa::a_integral(1, 40, &cfg, &approx)? + 2.0,
        single_fa::a_integral_numeric(1, 40, &cfg, &approx)?,
    );
    for n_scans in [30, 40, 60, 100] {
        for lam in [1.5, 2.0, 2.5] {
            let cfg = ScanConfig::new(n_scans, 1.0, lam)?;
            let exact = single_fa::exact_probability(n_scans, &cfg)?;
            let case = format!("N={n_scans} lambda={lam}");
            push(&mut out, "prop2 vs exact", case.clone(), single_fa::closed_form_probability(n_scans, &cfg, &approx)?.value, exact);
            push(&mut out, "second-order vs exact", case.clone(), single_fa::second_order_probability(n_scans, &cfg, &approx)?.value, exact);
            push(&mut out, "assembled A/B vs exact", case.clone(), single_fa::assembled_probability(n_scans, &cfg, &approx)?, exact);
            if n_scans == 100 {
                let asym = 1.0 - (-0.5 * lam * lam).exp() / (2.0 * std::f64::consts::PI);
                push(&mut out, "prop2 vs stated asymptote", case, single_fa::closed_form_probability(n_scans, &cfg, &approx)?.value, asym);
            }
        }
    }
    for (l0, s0) in [(1.5, 1.0), (2.5, 1.0), (1.5, 3.0), (2.5, 3.0)] {
        let cfg = ScanConfig::new(40, 1.0, l0)?;
        let rl = RandomLambda::new(l0, s0)?;
        let exact = single_fa::random_lambda_exact(&rl, 40, &cfg)?;
        let case = format!("N=40 lambda0={l0} sigma0={s0}");
        push(&mut out, "random-lambda formula vs exact average", case.clone(), single_fa::random_lambda_probability(&rl, 40, &cfg, &approx)?.value, exact);
        push(&mut out, "random-lambda stated limit vs exact average", case, single_fa::random_lambda_stated_limit(&rl), exact);
    }
    Ok(out)
}

/// Moment variants against Monte Carlo moments of m₁, v₁, and the exponential
/// series against quadrature.
pub fn multi_fa_findings(trials: u64, seed: u64) -> Result<Vec<Finding>> {
    let mut out = Vec::new();
    let cfg = ScanConfig::new(40, 1.0, 2.0)?;
    for k in [1, 2, 4] {
        let fa = FalseAssocSet::last_scans(k, 2.0, &cfg)?;
        let est = mc::simulate_multi_fa(&TrialPlan::multi(cfg, fa.clone(), trials, seed)?)?;
        for (name, v) in [("squared-sum", MomentVariant::SquaredSum), ("diagonal-only", MomentVariant::DiagonalOnly), ("exact", MomentVariant::Exact)] {
            let mp = multi_fa::moment_params(&fa, &cfg, v)?;
            let case = format!("N=40 K={k} lambda=2 variant={name}");
            push(&mut out, "sigma0^2 vs MC var(m1)", case.clone(), mp.sigma0_sq, est.m1.var);
            push(&mut out, "s0^2 vs MC var(v1)", case, mp.s0_sq, est.v1.var);
        }
        let mp = multi_fa::moment_params(&fa, &cfg, MomentVariant::Exact)?;
        push(&mut out, "m0 vs MC mean(m1)", format!("N=40 K={k} lambda=2"), mp.m0, est.m1.mean);
        push(&mut out, "v0 vs MC mean(v1)", format!("N=40 K={k} lambda=2"), mp.v0, est.v1.mean);
    }
    let fa = FalseAssocSet::last_scans(2, 2.0, &cfg)?;
    let mp = multi_fa::moment_params(&fa, &cfg, MomentVariant::Exact)?;
    for rate in [0.05, 0.5, 2.0] {
        let e = multi_fa::prob_exponential(&mp, rate, 10)?;
        let case = format!("N=40 K=2 lambda=2 rate={rate}");
        push(&mut out, "exponential stated recursion vs quadrature", case.clone(), e.series_recursion, e.value);
        push(&mut out, "exponential stated final vs quadrature", case, e.stated_final, e.value);
    }
    Ok(out)
}

/// Stated reach formula and expansion against matrix powering.
pub fn dtmc_findings() -> Result<Vec<Finding>> {
    let mut out = Vec::new();
    for p in [0.05, 0.1, 0.3] {
        let d = AssocDtmc::new(p)?;
        for n in [5, 20, 50] {
            let r = dtmc::reach_probability(&d, n)?;
            let case = format!("p_fa={p} n={n}");
            push(&mut out, "reach stated vs matrix power", case.clone(), r.stated, r.power);
            push(&mut out, "reach expansion (n+1)p^2+p/3 vs matrix power", case.clone(), r.expansion_stated, r.power);
            let sym = dtmc::q_power_symmetric(&d, n)?;
            let direct = dtmc::transient_block(&d).pow(n);
            push(&mut out, "symmetric Q^n (1,1) vs direct", case, sym[(0, 0)], direct[(0, 0)]);
        }
    }
    Ok(out)
}

/// Every finding; `trials` sets the Monte Carlo moment runs.
pub fn collect(trials: u64, seed: u64) -> Result<Vec<Finding>> {
    let mut all = geometry_findings()?;
    all.extend(single_fa_findings()?);
    all.extend(multi_fa_findings(trials, seed)?);
    all.extend(dtmc_findings()?);
    Ok(all)
}

/// Markdown tables, one per topic in order of first appearance.
pub fn to_markdown(findings: &[Finding]) -> String {
    let mut s = String::from("# Stated forms vs oracles\n");
    let mut topics: Vec<&str> = Vec::new();
    for f in findings {
        if !topics.contains(&f.topic) {
            topics.push(f.topic);
        }
    }
    for topic in topics {
        let _ = write!(s, "\n## {topic}\n\n| case | stated | reference | abs diff | rel diff |\n|---|---|---|---|---|\n");
        for f in findings.iter().filter(|f| f.topic == topic) {
            let _ = writeln!(s, "| {} | {:.10} | {:.10} | {:.3e} | {:.3e} |", f.case, f.stated, f.reference, f.abs_diff(), f.rel_diff());
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_report_shape() {
        let g = geometry_findings().unwrap();
        assert_eq!(g.len(), 27);
        for f in g.iter().filter(|f| f.topic == "M_ll closed form") {
            assert!(f.abs_diff() < 1e-10, "{f:?}");
        }
        let md = to_markdown(&g);
        assert!(md.contains("## beta stated polynomial vs Phi_ll"));
    }
}
