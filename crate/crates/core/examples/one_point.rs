//! Empirical one- and two-point functions of the disk layering field against the closed forms.

use std::f64::consts::PI;

use loopsoup::geometry::Point;
use loopsoup::layering_fields::{n_point_estimate, n_point_prediction, NPointBudget, NPointParams};
use loopsoup::loop_measures::{AlphaBudget, MeasureKind};

fn main() -> loopsoup::Result<()> {
    // Small Δ keeps the δ^{−2Δ} normalization tame enough for a quick run.
    let params = NPointParams::new(0.05, PI / 2.0, 0.1, MeasureKind::Disk);
    let budget = NPointBudget { soups: 20_000, seed: 1 };
    let z = Point::new(0.3, 0.0);
    let w = Point::new(-0.3, 0.0);
    for pts in [vec![z], vec![z, w]] {
        let est = n_point_estimate(&pts, &params, &budget)?;
        let pred = n_point_prediction(&pts, &params, &AlphaBudget::default())?;
        println!("n = {}: {:.5} ± {:.5}  closed form {:.5}", pts.len(), est.estimate.re, est.std_error, pred.value);
    }
    Ok(())
}
