//! Least-squares box approximation of the normal density used by the
//! closed forms.

use track_purity::single_fa::fit_gammas;

fn main() -> track_purity::Result<()> {
    for (n, k) in [(5, 3.0), (10, 3.0), (20, 3.0), (10, 4.0)] {
        let a = fit_gammas(n, k)?;
        println!(
            "n={n:2} kappa={k}  L2 error={:.4}  sum gamma={:.6}  slope={:.6}",
            a.reconstruction_error(),
            a.sums.sum,
            a.slope()
        );
    }
    let a = fit_gammas(10, 3.0)?;
    println!("\n  i   gamma_i      tridiagonal   stated recursion");
    let tri = a.gammas_tridiagonal();
    let rec = a.gammas_stated_recursion();
    for i in 0..a.n_steps {
        println!("{:3}   {:+.8}  {:+.8}   {:+.8}", i + 1, a.gammas[i], tri[i], rec[i]);
    }
    println!("\n   u    phi(u)    approximation");
    for u in [0.0f64, 0.5, 1.0, 1.5, 2.0, 2.9] {
        println!("{u:4.1}   {:.5}   {:.5}", (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(), a.density(u));
    }
    Ok(())
}
