//! Contamination distance drawn per trial from a normal law.

use track_purity::mc::{simulate_single_fa, LambdaLaw, TrialPlan};
use track_purity::single_fa::{random_lambda_exact, random_lambda_stated_limit, random_lambda_probability, RandomLambda};
use track_purity::{IndicatorApprox, ScanConfig};

fn main() -> track_purity::Result<()> {
    let approx = IndicatorApprox::default_fit();
    let n = 40;
    println!("lambda0 sigma0   exact avg   formula   stated limit   mc");
    for (l0, s0) in [(1.5, 1.0), (2.5, 1.0), (1.5, 3.0), (2.5, 3.0)] {
        let cfg = ScanConfig::new(n, 1.0, l0)?;
        let rl = RandomLambda::new(l0, s0)?;
        let plan = TrialPlan::single(cfg, n, 200_000, 11)?.with_lambda_law(LambdaLaw::Normal { mean: l0, sd: s0 })?;
        let mc = simulate_single_fa(&plan)?;
        println!(
            "{l0:6.1} {s0:6.1}    {:.5}     {:.5}   {:.5}         {:.5} ± {:.5}",
            random_lambda_exact(&rl, n, &cfg)?,
            random_lambda_probability(&rl, n, &cfg, &approx)?.value,
            random_lambda_stated_limit(&rl),
            mc.p_hat,
            mc.stderr
        );
    }
    Ok(())
}
