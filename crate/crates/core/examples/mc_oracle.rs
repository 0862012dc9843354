//! Monte Carlo oracle properties: reproducibility, kinematic invariance and
//! the reduction of K = 1 to the single-scan simulation.

use track_purity::mc::{simulate_multi_fa, simulate_single_fa, Scenario, TrialPlan};
use track_purity::ScanConfig;

fn main() -> track_purity::Result<()> {
    let cfg = ScanConfig::new(20, 1.0, 2.0)?;
    let plan = TrialPlan::single(cfg, 20, 100_000, 2024)?;
    let still = simulate_single_fa(&plan)?;
    let moving = simulate_single_fa(&plan.clone().with_scenario(Scenario::with_speed(100.0)))?;
    println!("speed 0:   {still:?}\nspeed 100: {moving:?}");
    println!("identical: {}", still == moving);
    println!("K=1 via multi-FA path identical: {}", simulate_multi_fa(&plan)?.estimate == still);
    for trials in [25_000, 100_000, 400_000] {
        let e = simulate_single_fa(&TrialPlan::single(cfg, 20, trials, 1)?)?;
        println!("trials {trials:7}: p = {:.5}, stderr = {:.5}", e.p_hat, e.stderr);
    }
    Ok(())
}
