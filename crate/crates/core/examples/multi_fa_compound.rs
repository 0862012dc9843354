//! K false measurements on the last K scans: compound-law approximations
//! against Monte Carlo, and the moment parameters against sampled moments.

use track_purity::mc::{simulate_multi_fa, TrialPlan};
use track_purity::multi_fa::{moment_params, prob_chi2, prob_exponential, prob_normal, MomentVariant};
use track_purity::{FalseAssocSet, ScanConfig};

fn main() -> track_purity::Result<()> {
    let n = 40;
    for k in [2, 4, 8] {
        println!("K = {k}\nlambda   chi2      normal    exponential  mc");
        for lam in [1.0, 2.0, 3.0, 3.5, 4.0] {
            let cfg = ScanConfig::new(n, 1.0, lam)?;
            let fa = FalseAssocSet::last_scans(k, lam, &cfg)?;
            let mp = moment_params(&fa, &cfg, MomentVariant::Exact)?;
            let normal = prob_normal(&mp)?;
            let mc = simulate_multi_fa(&TrialPlan::multi(cfg, fa, 50_000, 3)?)?;
            println!(
                "{lam:5.2}   {:.5}   {:.5}{}  {:.5}      {:.5} ± {:.5}",
                prob_chi2(k, &mp)?,
                normal.value,
                if normal.unreliable { "*" } else { " " },
                prob_exponential(&mp, 0.5, 10)?.value,
                mc.estimate.p_hat,
                mc.estimate.stderr
            );
        }
    }
    let cfg = ScanConfig::new(n, 1.0, 2.0)?;
    let fa = FalseAssocSet::last_scans(2, 2.0, &cfg)?;
    let est = simulate_multi_fa(&TrialPlan::multi(cfg, fa.clone(), 100_000, 5)?)?;
    println!("\nK=2 lambda=2 moments (sampled: m1 mean {:.4}, var {:.4}; v1 mean {:.4}, var {:.4})", est.m1.mean, est.m1.var, est.v1.mean, est.v1.var);
    for v in [MomentVariant::SquaredSum, MomentVariant::DiagonalOnly, MomentVariant::Exact] {
        let mp = moment_params(&fa, &cfg, v)?;
        println!("{v:?}: m0 {:.4}  sigma0² {:.4}  v0 {:.4}  s0² {:.4}", mp.m0, mp.sigma0_sq, mp.v0, mp.s0_sq);
    }
    Ok(())
}
