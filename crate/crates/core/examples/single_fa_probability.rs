//! One false measurement at the last scan: exact probability, the stated
//! closed form, the second-order correction and the Monte Carlo oracle.

use track_purity::mc::{simulate_single_fa, TrialPlan};
use track_purity::single_fa::{closed_form_probability, exact_report, second_order_probability};
use track_purity::{IndicatorApprox, ScanConfig};

fn main() -> track_purity::Result<()> {
    let approx = IndicatorApprox::default_fit();
    let n = 40;
    println!("lambda   exact     prop2     2nd-order  mc (±stderr)");
    for lam in [1.0, 1.5, 2.0, 2.5, 3.0, 4.0] {
        let cfg = ScanConfig::new(n, 1.0, lam)?;
        let ex = exact_report(n, &cfg)?;
        let p2 = closed_form_probability(n, &cfg, &approx)?;
        let so = second_order_probability(n, &cfg, &approx)?;
        let mc = simulate_single_fa(&TrialPlan::single(cfg, n, 200_000, 7)?)?;
        println!("{lam:5.2}   {:.5}   {:.5}   {:.5}    {:.5} ± {:.5}", ex.value, p2.value, so.value, mc.p_hat, mc.stderr);
    }
    Ok(())
}
