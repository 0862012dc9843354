//! Module invariants as properties over randomised inputs, plus the grid checks.

use approx::assert_abs_diff_eq;
use nalgebra::{DVector, RowVector4, Vector2};
use proptest::prelude::*;
use track_purity::dtmc::{self, AssocDtmc, KWindowChain};
use track_purity::geometry::{build_projector, diag_coeffs};
use track_purity::mc::{self, McEstimate, TrialPlan};
use track_purity::multi_fa::{self, moment_params, MomentVariant, VLaw};
use track_purity::quadrature::erfc_tail;
use track_purity::single_fa::{self, IndicatorApprox};
use track_purity::{FalseAssocSet, ScanConfig};

fn cfg(n: usize, lam: f64) -> ScanConfig {
    ScanConfig::new(n, 1.0, lam).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn projector_identities(n in 5usize..=80, dt in 0.05f64..5.0) {
        let c = ScanConfig::new(n, dt, 0.0).unwrap();
        let geo = build_projector(&c).unwrap();
        prop_assert!(geo.max_abs_symmetry_defect() <= 1e-10);
        prop_assert!(geo.max_abs_idempotence_defect() <= 1e-10);
        prop_assert!(geo.max_abs_annihilation_defect() <= 1e-10);
        prop_assert!((geo.trace() - (2 * c.epochs() - 4) as f64).abs() <= 1e-9);
    }

    #[test]
    fn closed_block_matches_numeric(n in 5usize..=80, frac in 0.0f64..=1.0, dt in 0.1f64..3.0) {
        let c = ScanConfig::new(n, dt, 0.0).unwrap();
        let l = (frac * n as f64).round() as usize;
        let (m, defect) = build_projector(&c).unwrap().projector_block(l, l);
        prop_assert!(defect <= 1e-8);
        prop_assert!((m + diag_coeffs(l, &c).unwrap().alpha).abs() <= 1e-8);
    }

    #[test]
    fn phi_quadratic_form_is_beta_times_norm(
        n in 5usize..=60,
        frac in 0.0f64..=1.0,
        ex in -4.0f64..4.0,
        ey in -4.0f64..4.0,
        lam in 0.0f64..5.0,
    ) {
        let c = cfg(n, lam);
        let l = (frac * n as f64).round() as usize;
        let geo = build_projector(&c).unwrap();
        let mut v = DVector::zeros(2 * c.epochs());
        v[2 * l] = ex;
        v[2 * l + 1] = ey + lam;
        let q = (v.transpose() * geo.phi(&[l]) * &v)[(0, 0)];
        let want = diag_coeffs(l, &c).unwrap().beta * (ex * ex + (ey + lam).powi(2));
        prop_assert!((q - want).abs() <= 1e-8, "{} vs {}", q, want);
    }

    #[test]
    fn diag_coeffs_independent_of_dt(n in 5usize..=100, frac in 0.0f64..=1.0, d1 in 0.05f64..10.0, d2 in 0.05f64..10.0) {
        let l = (frac * n as f64).round() as usize;
        let a = diag_coeffs(l, &ScanConfig::new(n, d1, 0.0).unwrap()).unwrap();
        let b = diag_coeffs(l, &ScanConfig::new(n, d2, 0.0).unwrap()).unwrap();
        prop_assert!((a.alpha - b.alpha).abs() <= 1e-14);
        prop_assert!((a.beta - b.beta).abs() <= 1e-14);
        prop_assert!((a.beta_polynomial - b.beta_polynomial).abs() <= 1e-12 * a.beta_polynomial.abs().max(1.0));
    }

    #[test]
    fn prop1_box_and_split_forms_agree(
        x in -4.0f64..4.0,
        y in -4.0f64..4.0,
        n in 10usize..=80,
        lam in 0.0f64..5.0,
        steps in 1usize..=20,
    ) {
        let c = cfg(n, lam);
        let approx = single_fa::fit_gammas(steps, 3.0).unwrap();
        let e = Vector2::new(x, y);
        let a = single_fa::prop1_box_form(&e, n, &c, &approx).unwrap();
        let b = single_fa::prop1_split_form(&e, n, &c, &approx).unwrap();
        prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
    }

    #[test]
    fn mc_stderr_formula(successes in 0u64..=5000, extra in 1u64..5000) {
        let trials = successes + extra;
        let e = McEstimate::from_counts(successes, trials);
        let p = successes as f64 / trials as f64;
        prop_assert_eq!(e.p_hat, p);
        prop_assert!((e.stderr - (p * (1.0 - p) / trials as f64).sqrt()).abs() <= 1e-15);
    }

    #[test]
    fn dtmc_factorisation(p in 0.001f64..0.999) {
        let d = AssocDtmc::new(p).unwrap();
        let (v, w) = dtmc::factorization(&d).unwrap();
        let p2 = dtmc::build_chains(&d).p2;
        prop_assert!((v * w - p2 * p2).amax() <= 1e-12);
        prop_assert!((w * p2 - w).amax() <= 1e-12);
    }

    #[test]
    fn dtmc_power_law(p in 0.0f64..=1.0, n in 2u32..40) {
        let d = AssocDtmc::new(p).unwrap();
        prop_assert!((dtmc::chain_power(&d, n) - dtmc::chain_power(&d, 2)).amax() <= 1e-12);
    }

    #[test]
    fn reach_nondecreasing(p in 0.0f64..0.95, dp in 0.0f64..0.04, n in 0u32..60) {
        let a = dtmc::reach_probability(&AssocDtmc::new(p).unwrap(), n).unwrap();
        let longer = dtmc::reach_probability(&AssocDtmc::new(p).unwrap(), n + 1).unwrap();
        let likelier = dtmc::reach_probability(&AssocDtmc::new(p + dp).unwrap(), n).unwrap();
        prop_assert!(longer.power >= a.power - 1e-15);
        prop_assert!(likelier.power >= a.power - 1e-15);
        prop_assert!((a.spectral - a.power).abs() <= 1e-10);
    }

    #[test]
    fn window_chain_is_stochastic(k in 1usize..=5, p in 0.0f64..=1.0, absorbing: bool, steps in 0u32..30) {
        let ch = KWindowChain::new(k, p, absorbing).unwrap();
        for r in 0..ch.states() {
            prop_assert!((ch.transition.row(r).sum() - 1.0).abs() <= 1e-12);
        }
        prop_assert!((ch.evolve(0, steps).sum() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn false_assoc_indices_strictly_increasing(a in 0usize..=40, b in 0usize..=40) {
        let r = FalseAssocSet::uniform(vec![a, b], 1.0);
        prop_assert_eq!(r.is_ok(), a < b);
    }
}

#[test]
fn window_chain_k2_is_the_four_state_chain() {
    for p in [0.0, 0.1, 0.45, 1.0] {
        let ch = KWindowChain::new(2, p, false).unwrap();
        let p2 = dtmc::build_chains(&AssocDtmc::new(p).unwrap()).p2;
        for r in 0..4 {
            for c in 0..4 {
                assert_abs_diff_eq!(ch.transition[(r, c)], p2[(r, c)], epsilon = 1e-15);
            }
        }
        let x = RowVector4::new(1.0, 0.0, 0.0, 0.0) * dtmc::chain_power(&AssocDtmc::new(p).unwrap(), 3);
        let y = ch.evolve(0, 3);
        for s in 0..4 {
            assert_abs_diff_eq!(x[s], y[s], epsilon = 1e-15);
        }
    }
}

#[test]
fn exact_probability_nondecreasing_in_lambda() {
    for (n, l) in [(20, 20), (40, 40), (40, 20)] {
        let mut prev = 0.0;
        for i in 0..=50 {
            let lam = 1.0 + 0.1 * i as f64;
            let p = single_fa::exact_probability(l, &cfg(n, lam)).unwrap();
            assert!(p >= prev - 1e-9, "N={n} l={l} λ={lam}: {p} < {prev}");
            prev = p;
        }
    }
}

#[test]
fn closed_form_finite_at_lambda_zero() {
    let approx = IndicatorApprox::default_fit();
    for n in [10, 40, 100] {
        let p = single_fa::closed_form_probability(n, &cfg(n, 0.0), &approx).unwrap();
        let coeffs = single_fa::prop2_coeffs(n, &cfg(n, 0.0), &approx).unwrap();
        println!("N={n}: closed form at λ=0 raw {:.4} (a = {:.4})", p.raw, coeffs.a);
        assert!(p.raw.is_finite() && p.value.is_finite());
    }
}

#[test]
fn prop2_within_005_for_n_from_30() {
    let approx = IndicatorApprox::default_fit();
    let mut worst = (0f64, 0, 0.0);
    for n in (30..=100).step_by(10) {
        for k in 0..=10 {
            let lam = 1.5 + 0.1 * k as f64;
            let c = cfg(n, lam);
            let gap = (single_fa::closed_form_probability(n, &c, &approx).unwrap().value - single_fa::exact_probability(n, &c).unwrap()).abs();
            if gap > worst.0 {
                worst = (gap, n, lam);
            }
        }
    }
    println!("max |closed form − exact| for N ≥ 30, λ ∈ [1.5, 2.5]: {:.4} at N={} λ={:.1}", worst.0, worst.1, worst.2);
    assert!(worst.0 <= 0.05);
}

#[test]
fn exact_probability_nearly_flat_in_scan_index() {
    let c = cfg(40, 2.0);
    let last = single_fa::exact_probability(40, &c).unwrap();
    let worst = (1..=40).map(|l| (single_fa::exact_probability(l, &c).unwrap() - last).abs()).fold(0.0, f64::max);
    println!("max over l of |Ψ(l) − Ψ(N)| at N=40, λ=2: {worst:.4}");
    assert!(worst <= 0.03);
}

#[test]
fn multi_fa_k1_consistent_with_single() {
    let mut worst = [(0f64, 0f64); 2];
    for i in 0..=10 {
        let lam = 1.5 + 0.25 * i as f64;
        let c = cfg(40, lam);
        let fa = FalseAssocSet::last_scans(1, lam, &c).unwrap();
        let mp = moment_params(&fa, &c, MomentVariant::Exact).unwrap();
        let exact = single_fa::exact_probability(40, &c).unwrap();
        let gaps = [
            (multi_fa::prob_chi2(1, &mp).unwrap() - exact).abs(),
            (multi_fa::prob_normal(&mp).unwrap().value - exact).abs(),
        ];
        for (w, g) in worst.iter_mut().zip(gaps) {
            if g > w.0 {
                *w = (g, lam);
            }
        }
    }
    println!("K=1, N=40: max |chi2 − exact| = {:.4} at λ={}, max |normal − exact| = {:.4} at λ={}", worst[0].0, worst[0].1, worst[1].0, worst[1].1);
    assert!(worst[0].0 <= 0.1 && worst[1].0 <= 0.1);
}

#[test]
fn multi_fa_monotone_in_lambda() {
    for k in [1, 2, 4, 8] {
        let mut prev = [0.0f64; 3];
        for i in 0..=24 {
            let lam = 0.5 + 0.25 * i as f64;
            let c = cfg(40, lam);
            let fa = FalseAssocSet::last_scans(k, lam, &c).unwrap();
            let mp = moment_params(&fa, &c, MomentVariant::Exact).unwrap();
            let now = [
                multi_fa::prob_chi2(k, &mp).unwrap(),
                multi_fa::prob_normal(&mp).unwrap().value,
                multi_fa::prob_exponential(&mp, 0.5, 10).unwrap().value,
            ];
            for (j, (a, b)) in now.iter().zip(&prev).enumerate() {
                assert!(*a >= b - 1e-9, "K={k} λ={lam} variant {j}: {a} < {b}");
            }
            prev = now;
        }
    }
}

#[test]
fn multi_fa_large_lambda_limit_and_orientation() {
    for k in [1, 4, 8] {
        let c = cfg(40, 8.0);
        let fa = FalseAssocSet::last_scans(k, 8.0, &c).unwrap();
        let mp = moment_params(&fa, &c, MomentVariant::Exact).unwrap();
        let p = multi_fa::prob_chi2(k, &mp).unwrap();
        assert!(p > 1.0 - 1e-6, "K={k}: {p}");
        assert!(multi_fa::prob_normal(&mp).unwrap().value > 1.0 - 1e-6);
        let law = VLaw::Chi2 { dof: 2.0 * k as f64 };
        let other = law.expect(|v| erfc_tail(-mp.m0 / (mp.sigma0_sq + v).sqrt()), 1e-10).unwrap();
        assert_abs_diff_eq!(p + other, 1.0, epsilon = 1e-8);
    }
}

#[test]
fn k_effect_four_to_eight() {
    let c = cfg(40, 3.5);
    let p = |k: usize| {
        let mp = moment_params(&FalseAssocSet::last_scans(k, 3.5, &c).unwrap(), &c, MomentVariant::Exact).unwrap();
        (multi_fa::prob_chi2(k, &mp).unwrap(), multi_fa::prob_normal(&mp).unwrap().value)
    };
    let (c4, n4) = p(4);
    let (c8, n8) = p(8);
    assert!(c8 < c4 && n8 < n4);
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn mc_bit_reproducible_across_runs_and_threads() {
    let c = cfg(30, 2.0);
    let single = TrialPlan::single(c, 30, 20_000, 5).unwrap();
    let multi = TrialPlan::multi(c, FalseAssocSet::uniform(vec![4, 29, 30], 2.0).unwrap(), 20_000, 5).unwrap();
    let reference = (
        mc::simulate_single_fa(&single).unwrap(),
        mc::simulate_multi_fa(&multi).unwrap(),
        mc::simulate_window(3, 0.2, 50_000, 3, 5).unwrap(),
        mc::simulate_absorption(2, 0.2, 0, 5_000, 100_000, 5).unwrap(),
    );
    for threads in [1, 2, 3, 4] {
        let got = in_pool(threads, || {
            (
                mc::simulate_single_fa(&single).unwrap(),
                mc::simulate_multi_fa(&multi).unwrap(),
                mc::simulate_window(3, 0.2, 50_000, 3, 5).unwrap(),
                mc::simulate_absorption(2, 0.2, 0, 5_000, 100_000, 5).unwrap(),
            )
        });
        assert_eq!(got, reference, "threads = {threads}");
    }
}

#[test]
fn mc_stderr_halves_when_trials_quadruple() {
    let c = cfg(40, 2.0);
    let a = mc::simulate_single_fa(&TrialPlan::single(c, 40, 25_000, 8).unwrap()).unwrap();
    let b = mc::simulate_single_fa(&TrialPlan::single(c, 40, 100_000, 9).unwrap()).unwrap();
    let ratio = a.stderr / b.stderr;
    assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn oracle_does_not_use_closed_forms() {
    let src = include_str!("../src/mc.rs");
    let body = &src[..src.find("#[cfg(test)]").unwrap_or(src.len())];
    for banned in ["single_fa::", "multi_fa::", "diag_coeffs", "hat_cross", "cross_alpha", "cross_theta", "q_star", "stationary", "reach_probability"] {
        assert!(!body.contains(banned), "mc.rs mentions {banned}");
    }
}
