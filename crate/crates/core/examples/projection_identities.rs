//! Hat/residual projector of the constant-velocity regression and the
//! closed-form block coefficients.

use track_purity::geometry::{build_projector, diag_coeffs, hat_cross};
use track_purity::ScanConfig;

fn main() -> track_purity::Result<()> {
    for n in [5, 10, 20, 40, 80] {
        let cfg = ScanConfig::new(n, 1.0, 0.0)?;
        let geo = build_projector(&cfg)?;
        println!(
            "N={n:3}  |M²−M|={:.1e}  |MX|={:.1e}  trace={:.12} (2·epochs−4 = {})",
            geo.max_abs_idempotence_defect(),
            geo.max_abs_annihilation_defect(),
            geo.trace(),
            2 * cfg.epochs() - 4
        );
    }
    let cfg = ScanConfig::new(40, 1.0, 0.0)?;
    let geo = build_projector(&cfg)?;
    println!("\n  l   H_ll closed   H_ll numeric   alpha       beta");
    for l in [0, 1, 20, 39, 40] {
        let c = diag_coeffs(l, &cfg)?;
        println!("{l:3}   {:.10}  {:.10}  {:+.6}  {:.6}", hat_cross(l, l, &cfg)?, geo.hat[(2 * l, 2 * l)], c.alpha, c.beta);
    }
    Ok(())
}
