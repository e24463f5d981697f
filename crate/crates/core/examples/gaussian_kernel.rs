//! Assembles the disk kernel on a small grid and draws a Gaussian layering field.

use std::sync::Arc;

use loopsoup::gaussian_gmc::{kernel_matrix, sample_gaussian_field};
use loopsoup::geometry::{Domain, QuadratureGrid};
use loopsoup::loop_measures::{AlphaBudget, MeasureKind};

fn main() -> loopsoup::Result<()> {
    let grid = Arc::new(QuadratureGrid::unit_disk(8)?);
    let k = kernel_matrix(&grid, 0.1, MeasureKind::Disk, &Domain::unit_disk(), &AlphaBudget::default())?;
    println!("{} nodes, diagonal K(0,0) = {:.5}, PSD jitter {:.1e}", k.len(), k.entries[(0, 0)], k.jitter);
    let xi = 0.3;
    let draws = 2000;
    let mut mean = 0.0;
    for d in 0..draws {
        mean += sample_gaussian_field(&k, xi, 1, d)?.values[0].re;
    }
    let predicted = (-(xi * xi / 2.0) * k.entries[(0, 0)]).exp() * 0.1f64.powf(-2.0 * loopsoup::gaussian_gmc::gaussian_dimension(MeasureKind::Disk, xi));
    println!("mean of Re W at node 0 over {draws} draws: {:.4}, predicted {:.4}", mean / draws as f64, predicted);
    Ok(())
}
