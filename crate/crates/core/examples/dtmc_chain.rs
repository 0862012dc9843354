//! Markov chain over consecutive association decisions, checked against
//! direct simulation.

use nalgebra::Vector3;
use track_purity::dtmc::{chain_power, expected_transient_visits, mean_intervisit, reach_probability, stationary, AssocDtmc, KWindowChain};
use track_purity::mc::{simulate_absorption, simulate_dtmc, simulate_window};

fn main() -> track_purity::Result<()> {
    let d = AssocDtmc::new(0.1)?;
    println!("stationary pi = {:?}", stationary(&d)?.as_slice());
    println!("|P^7 − P^2| = {:.1e}", (chain_power(&d, 7) - chain_power(&d, 2)).amax());
    let sim = simulate_dtmc(&d, 1_000_000, 1, 1)?;
    println!("simulated occupancy = {:?}", sim.occupancy);
    println!("mean return to (4): closed {:.2}, simulated {:.2} ± {:.2}", mean_intervisit(&d, 3)?, sim.mean_return.unwrap_or(f64::NAN), sim.return_stderr);

    let start = Vector3::new(1.0, 0.0, 0.0);
    let abs = simulate_absorption(2, 0.1, 0, 100_000, 100_000, 2)?;
    let m = abs.mean().expect("absorbed runs");
    println!("E(N_a) from (1): closed {:.2}, simulated {:.2} ± {:.2}", expected_transient_visits(&d, &start)?, m.mean, m.mean_stderr);

    println!("\n  n   reach (spectral)  reach (power)  simulated");
    for n in [2u32, 5, 10, 20, 50] {
        let r = reach_probability(&d, n)?;
        let s = abs.reach_within(n as u64);
        println!("{n:3}   {:.10}      {:.10}   {:.5} ± {:.5}", r.spectral, r.power, s.p_hat, s.stderr);
    }

    let k3 = KWindowChain::new(3, 0.3, false)?;
    let dist = k3.evolve(0, 50);
    let sim3 = simulate_window(3, 0.3, 1_000_000, 1, 4)?;
    println!("\n3-window all-false occupancy: chain {:.5}, simulated {:.5} ± {:.5}", dist[k3.all_false()], sim3.occupancy[7], sim3.occupancy_stderr[7]);
    Ok(())
}
