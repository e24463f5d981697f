//! Chaos-by-chaos gaps between Poisson and Gaussian layering models along λ → ∞, β = ξ/√λ.

use loopsoup::chaos_convergence::{cil_diagnostic, standard_schedule, ChaosBudget};
use loopsoup::geometry::{Point, TestFunction};
use loopsoup::loop_measures::MeasureKind;

fn main() -> loopsoup::Result<()> {
    let xi = 0.2f64.sqrt();
    let phi = TestFunction::new(Point::ORIGIN, 0.5, 1.0)?;
    let budget = ChaosBudget { resolution: 16, q_max: 8, ..Default::default() };
    let schedule = standard_schedule(xi, &[4.0, 16.0, 64.0, 256.0]);
    for r in cil_diagnostic(xi, &schedule, &phi, 0.15, MeasureKind::Disk, &budget, false)? {
        let gaps: Vec<String> = r.terms.iter().take(3).map(|t| format!("{:.3e}", t.cross_l2_gap)).collect();
        println!("λ = {:>5}  mean gap {:.3e}  chaos gaps q=1..3 [{}]", r.lambda, r.mean_gap, gaps.join(", "));
    }
    Ok(())
}
