//! The upper-tail erfc convention, Gauss–Hermite rules and adaptive
//! Gauss–Kronrod integration.

use track_purity::quadrature::{adaptive_integrate, erfc_tail, normal_pdf, GaussHermite};

fn main() -> track_purity::Result<()> {
    for x in [-2.0, 0.0, 1.0, 1.96, 3.0] {
        println!("erfc_tail({x:5.2}) = {:.12}", erfc_tail(x));
    }
    let gh = GaussHermite::new(40)?;
    println!("E[X²] = {:.14}, E[X⁴] = {:.14}", gh.expect(|x| x * x), gh.expect(|x| x.powi(4)));
    let chi2 = adaptive_integrate(|v| 0.5 * (-v / 2.0).exp(), 0.0, 80.0, 1e-10)?;
    println!("∫ chi²₂ density = {:.12} (error bound {:.1e})", chi2.value, chi2.error);
    let f = |x: f64| erfc_tail(0.3 * x - 0.4);
    let ak = adaptive_integrate(|x| f(x) * normal_pdf(x), -12.0, 12.0, 1e-12)?;
    println!("E[erfc(0.3X − 0.4)]: Hermite {:.12}, adaptive {:.12}", gh.expect(f), ak.value);
    match adaptive_integrate(|x| 1.0 / x, 0.0, 1.0, 1e-10) {
        Ok(r) => println!("1/x unexpectedly converged: {r:?}"),
        Err(e) => println!("1/x on [0,1]: {e}"),
    }
    Ok(())
}
