//! Loop-measure masses for a few query shapes, closed form next to quadrature or Monte Carlo.

use loopsoup::geometry::{Ball, Point};
use loopsoup::loop_measures::{alpha, AlphaBudget, AlphaQuery, MeasureKind};

fn main() -> loopsoup::Result<()> {
    let budget = AlphaBudget::default();
    let z = Point::new(0.2, 0.0);
    let w = Point::new(-0.2, 0.0);
    let queries = [
        ("annulus (0.1, 1)", AlphaQuery::Annulus { z: Point::ORIGIN, delta: 0.1, r_max: 1.0 }),
        ("in domain, δ = 0.1", AlphaQuery::InDomain { z, delta: 0.1, v: Ball::UNIT }),
        ("two points, δ = 0.1", AlphaQuery::TwoPointDomain { z, t: w, delta: 0.1, v: Ball::UNIT }),
    ];
    for kind in [MeasureKind::Disk, MeasureKind::Loop] {
        for (label, q) in &queries {
            let a = alpha(q, kind, &budget)?;
            println!("{:<5} {label:<22} {:.6} ± {:.1e} ({:?})", kind.name(), a.value, a.std_error, a.method);
        }
    }
    Ok(())
}
