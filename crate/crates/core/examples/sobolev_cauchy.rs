//! Dirichlet eigenbasis of the disk and the H^{−α} Cauchy diagnostic for layering fields.

use std::f64::consts::PI;

use loopsoup::layering_fields::CoveringMethod;
use loopsoup::loop_measures::MeasureKind;
use loopsoup::sobolev::{build_basis, cauchy_diagnostic, sup_bound_fit, CauchyBudget};

fn main() -> loopsoup::Result<()> {
    let basis = build_basis(400)?;
    let fit = sup_bound_fit(&basis, 400);
    println!("{} modes, top eigenvalue {:.1}, sup-norm fit c = {:.3} (pass {})", basis.count(), basis.modes.last().unwrap().eigenvalue, fit.c, fit.pass);
    let budget = CauchyBudget { soups: 100, method: CoveringMethod::default(), ..Default::default() };
    let table = cauchy_diagnostic(0.25, PI / 2.0, MeasureKind::Disk, &[0.4, 0.2, 0.1, 0.05], 2.0, &budget)?;
    for r in &table.rows {
        println!("‖Φ_{:.3} − Φ_{:.3}‖ = {:.4e} ± {:.1e}", r.delta, r.delta_prime, r.mean_norm, r.std_error);
    }
    Ok(())
}
