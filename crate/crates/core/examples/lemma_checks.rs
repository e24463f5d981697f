//! Numerical checks of the integrability bounds and the disk conformal covariance.

use std::f64::consts::PI;

use loopsoup::geometry::{MoebiusMap, Point, TestFunction};
use loopsoup::integrability_checks::{check_conformal_covariance_disk, check_disk_triple_integral, massive_gap_bound};

fn main() -> loopsoup::Result<()> {
    let t = check_disk_triple_integral(0.8, 0.4, 0.4, 24)?;
    println!("triple integral {:.4} ≤ {:.4}: {}", t.computed, t.bound_or_reference, t.pass);
    println!("massive gap bound at m̄ = 1, R = 0.5: {:.4}", massive_gap_bound(1.0, 0.5));
    let f = MoebiusMap::new(Point::new(0.3, 0.0), 0.0)?;
    let phi = TestFunction::new(Point::new(0.1, 0.1), 0.3, 1.0)?;
    let c = check_conformal_covariance_disk(&f, &phi, 1.0, PI / 2.0, 24, 1e-10)?;
    println!("covariance: {:.10} vs {:.10}: {}", c.computed, c.bound_or_reference, c.pass);
    Ok(())
}
