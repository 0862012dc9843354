//! Runs a configured experiment programmatically and prints the CSV.

use track_purity::experiment::{evaluate, ExperimentSpec, Overrides};

const CONFIG: &str = "\
# K = 2 false scans at N = 40
experiment=multi-fa
k=2
lambda_min=1
lambda_max=4
lambda_step=0.5
trials=20000
";

fn main() -> track_purity::Result<()> {
    let spec = ExperimentSpec::from_str_with(CONFIG, &Overrides::default())?;
    print!("{}", evaluate(&spec)?.to_csv());
    let dtmc = ExperimentSpec::from_str_with("experiment=dtmc\np_fa_min=0.05\np_fa_max=0.3\np_fa_step=0.05\ntrials=20000", &Overrides::default())?;
    print!("\n{}", evaluate(&dtmc)?.to_csv());
    Ok(())
}
