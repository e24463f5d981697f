//! Dirichlet eigenbasis of 𝔻, negative Sobolev norms of sampled fields, and the
//! Cauchy-in-δ diagnostic on coupled soups.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, QuadratureGrid};
use crate::layering_fields::{field_sample, ConformalDimension, CoveringMethod, FieldSample};
use crate::loop_measures::{sample_soup, MeasureKind, SoupParams};
use crate::numerics::gauss_legendre_on;
use crate::rng::derive_seed;
use crate::special::{bessel_j, bessel_j_zeros};

/// u(r, θ) = c·J_n(j_{n,k}r)·cos(nθ) (or sin(nθ) when `sine`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub n: usize,
    pub k: usize,
    pub sine: bool,
    pub zero: f64,
    pub eigenvalue: f64,
    pub normalization: f64,
}

impl Mode {
    pub fn radial(&self, r: f64) -> f64 {
        self.normalization * bessel_j(self.n, self.zero * r)
    }

    pub fn angular(&self, theta: f64) -> f64 {
        let a = self.n as f64 * theta;
        if self.sine {
            a.sin()
        } else {
            a.cos()
        }
    }

    pub fn value(&self, z: Point) -> f64 {
        let r = z.norm();
        if r >= 1.0 {
            return 0.0;
        }
        self.radial(r) * self.angular(z.y.atan2(z.x))
    }

    /// sup over 𝔻 of |u|, from a fine radial scan (the angular factor peaks at 1).
    pub fn sup_norm(&self) -> f64 {
        let m = 4000;
        (0..=m).map(|i| self.radial(i as f64 / m as f64).abs()).fold(0.0, f64::max)
    }
}

/// The first modes of the Dirichlet Laplacian on 𝔻, sorted by eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenBasis {
    pub modes: Vec<Mode>,
}

/// Residual tolerance on |J_n(j_{n,k})|.
const ZERO_TOL: f64 = 1e-10;

fn modes_for_order(n: usize, bound: f64) -> Result<Vec<Mode>> {
    let kmax = ((bound - 0.5 * n as f64 + 0.25) / PI).ceil().max(1.0) as usize + 1;
    let zeros = bessel_j_zeros(n, kmax)?;
    let mut out = Vec::new();
    for (i, &j) in zeros.iter().enumerate() {
        if j > bound {
            break;
        }
        if bessel_j(n, j).abs() > ZERO_TOL {
            return Err(Error::NumericalFailure(format!("zero j_{{{n},{}}} = {j} fails the residual tolerance", i + 1)));
        }
        // ∫₀¹ J_n(jr)² r dr = J_{n+1}(j)²/2 and ∫cos² = π (2π for n = 0).
        let angular = if n == 0 { 2.0 * PI } else { PI };
        let normalization = (2.0 / angular).sqrt() / bessel_j(n + 1, j).abs();
        let m = Mode { n, k: i + 1, sine: false, zero: j, eigenvalue: j * j, normalization };
        out.push(m);
        if n > 0 {
            out.push(Mode { sine: true, ..m });
        }
    }
    Ok(out)
}

/// ∫₀¹ J_n(jr)² r dr·(angular mass), by Gauss–Legendre.
fn l2_norm_sqr(m: &Mode) -> f64 {
    let (x, w) = gauss_legendre_on(48 + m.zero.ceil() as usize, 0.0, 1.0);
    let radial: f64 = x.iter().zip(&w).map(|(r, w)| w * r * m.radial(*r).powi(2)).sum();
    radial * if m.n == 0 { 2.0 * PI } else { PI }
}

pub fn build_basis(count: usize) -> Result<EigenBasis> {
    if count < 1 {
        return Err(Error::InvalidParameter("basis needs at least one mode".into()));
    }
    // Weyl: N(L) ≈ L/4 − √L/2 on 𝔻.
    let c = count as f64;
    let mut bound_sqr = 4.0 * c + 8.0 * c.sqrt() + 50.0;
    loop {
        let bound = bound_sqr.sqrt();
        let orders = bound.floor() as usize + 1;
        let per_order: Vec<Vec<Mode>> = (0..orders).into_par_iter().map(|n| modes_for_order(n, bound)).collect::<Result<_>>()?;
        let mut modes: Vec<Mode> = per_order.into_iter().flatten().collect();
        if modes.len() >= count {
            modes.sort_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue).then(a.n.cmp(&b.n)).then(a.sine.cmp(&b.sine)));
            modes.truncate(count);
            for m in &modes {
                let e = (l2_norm_sqr(m) - 1.0).abs();
                if e > 1e-8 {
                    return Err(Error::NumericalFailure(format!("mode ({}, {}) has L² norm error {e:.2e}", m.n, m.k)));
                }
            }
            return Ok(EigenBasis { modes });
        }
        bound_sqr *= 1.3;
    }
}

impl EigenBasis {
    pub fn count(&self) -> usize {
        self.modes.len()
    }

    /// Gram matrix of the first `m` modes under a product rule: Gauss–Legendre in r,
    /// the trapezoid rule in θ (exact for the trigonometric factors).
    pub fn gram(&self, m: usize) -> DMatrix<f64> {
        let modes = &self.modes[..m.min(self.count())];
        let jmax = modes.iter().map(|m| m.zero).fold(0.0, f64::max);
        let nmax = modes.iter().map(|m| m.n).max().unwrap_or(0);
        let (rs, rw) = gauss_legendre_on(64 + 2 * jmax.ceil() as usize, 0.0, 1.0);
        let na = 4 * nmax + 8;
        let thetas: Vec<f64> = (0..na).map(|i| 2.0 * PI * i as f64 / na as f64).collect();
        let radial: Vec<Vec<f64>> = modes.iter().map(|m| rs.iter().map(|r| m.radial(*r)).collect()).collect();
        let angular: Vec<Vec<f64>> = modes.iter().map(|m| thetas.iter().map(|t| m.angular(*t)).collect()).collect();
        DMatrix::from_fn(modes.len(), modes.len(), |a, b| {
            let r: f64 = (0..rs.len()).map(|i| rw[i] * rs[i] * radial[a][i] * radial[b][i]).sum();
            let t: f64 = (0..na).map(|i| angular[a][i] * angular[b][i]).sum::<f64>() * 2.0 * PI / na as f64;
            r * t
        })
    }

    /// #{λ_i ≤ L}/L; meaningful only while the basis reaches past L.
    pub fn weyl_ratio(&self, level: f64) -> Result<f64> {
        let top = self.modes.last().map(|m| m.eigenvalue).unwrap_or(0.0);
        if level > top {
            return Err(Error::InvalidParameter(format!("basis stops at eigenvalue {top:.1} < {level}")));
        }
        Ok(self.modes.iter().filter(|m| m.eigenvalue <= level).count() as f64 / level)
    }

    /// Mode values at the grid nodes (nodes × modes).
    pub fn table(&self, grid: &Arc<QuadratureGrid>) -> ModeTable {
        let pts = grid.points();
        let cols: Vec<Vec<f64>> = self.modes.par_iter().map(|m| pts.iter().map(|z| m.value(*z)).collect()).collect();
        let values = DMatrix::from_fn(pts.len(), self.count(), |i, j| cols[j][i]);
        ModeTable { grid: grid.clone(), values, eigenvalues: self.modes.iter().map(|m| m.eigenvalue).collect() }
    }

    /// Cache format: one CSV row per mode.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "k", "sine", "zero", "eigenvalue", "normalization"])?;
        for m in &self.modes {
            w.write_record([
                m.n.to_string(),
                m.k.to_string(),
                u8::from(m.sine).to_string(),
                format!("{:.17e}", m.zero),
                format!("{:.17e}", m.eigenvalue),
                format!("{:.17e}", m.normalization),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<EigenBasis> {
        let mut r = csv::Reader::from_reader(input);
        let mut modes = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).ok_or_else(|| Error::Format(format!("basis row has {} fields", rec.len())));
            let num = |i: usize| -> Result<f64> { field(i)?.parse().map_err(|e| Error::Format(format!("{e}"))) };
            let int = |i: usize| -> Result<usize> { field(i)?.parse().map_err(|e| Error::Format(format!("{e}"))) };
            modes.push(Mode { n: int(0)?, k: int(1)?, sine: int(2)? == 1, zero: num(3)?, eigenvalue: num(4)?, normalization: num(5)? });
        }
        if modes.windows(2).any(|w| w[1].eigenvalue < w[0].eigenvalue) {
            return Err(Error::Format("basis cache is not sorted by eigenvalue".into()));
        }
        Ok(EigenBasis { modes })
    }
}

/// The basis evaluated on one grid.
#[derive(Clone, Debug)]
pub struct ModeTable {
    pub grid: Arc<QuadratureGrid>,
    pub values: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

impl ModeTable {
    /// a_i = Σ_z w_z·u_i(z)·f(z).
    pub fn coefficients(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        if f.len() != self.grid.len() {
            return Err(Error::GridMismatch { expected: self.grid.len(), found: f.len() });
        }
        let wf: Vec<Complex64> = f.iter().zip(self.grid.weights()).map(|(v, w)| v * *w).collect();
        Ok((0..self.values.ncols())
            .into_par_iter()
            .map(|j| self.values.column(j).iter().zip(&wf).map(|(u, v)| v * *u).sum())
            .collect())
    }

    pub fn norm(&self, f: &[Complex64], alpha: f64) -> Result<SobolevNorm> {
        Ok(norm_from_coefficients(&self.coefficients(f)?, &self.eigenvalues, alpha))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevNorm {
    pub alpha: f64,
    /// Σ_{i ≤ truncation} λ_i^{−α}|a_i|².
    pub value: f64,
    pub truncation: usize,
    pub tail_estimate: f64,
    /// The tail estimate exceeds 10% of the value.
    pub truncation_warning: bool,
}

/// Partial sum plus a Weyl-law tail: the mean |a_i|² over the last quarter of modes
/// times Σ_{λ > λ_M} λ^{−α} ≈ λ_M^{1−α}/(4(α − 1)).
pub fn norm_from_coefficients(a: &[Complex64], eigenvalues: &[f64], alpha: f64) -> SobolevNorm {
    let value: f64 = a.iter().zip(eigenvalues).map(|(c, l)| l.powf(-alpha) * c.norm_sqr()).sum();
    let m = a.len();
    let tail_estimate = if m >= 4 && alpha > 1.0 {
        let last = &a[3 * m / 4..];
        let mean = last.iter().map(|c| c.norm_sqr()).sum::<f64>() / last.len() as f64;
        mean * eigenvalues[m - 1].powf(1.0 - alpha) / (4.0 * (alpha - 1.0))
    } else {
        f64::INFINITY
    };
    SobolevNorm { alpha, value, truncation: m, tail_estimate, truncation_warning: tail_estimate > 0.1 * value }
}

pub fn sobolev_norm(field: &FieldSample, alpha: f64, basis: &EigenBasis) -> Result<SobolevNorm> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("Sobolev order α = {alpha} must be positive")));
    }
    basis.table(&field.grid).norm(&field.values, alpha)
}

/// Fit of ‖u_i‖_∞ ≤ c·λ_i^{1/4}: c from the first half of the modes, checked on the
/// second half with 5% slack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupBoundFit {
    pub c: f64,
    pub first_half_max: f64,
    pub second_half_max: f64,
    pub modes: usize,
    pub pass: bool,
}

pub fn sup_bound_fit(basis: &EigenBasis, modes: usize) -> SupBoundFit {
    let m = modes.min(basis.count());
    let ratios: Vec<f64> = basis.modes[..m].par_iter().map(|u| u.sup_norm() / u.eigenvalue.powf(0.25)).collect();
    let half = m / 2;
    let first = ratios[..half.max(1)].iter().cloned().fold(0.0, f64::max);
    let second = ratios[half..].iter().cloned().fold(0.0, f64::max);
    SupBoundFit { c: first.max(second), first_half_max: first, second_half_max: second, modes: m, pass: second <= 1.05 * first }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyBudget {
    pub soups: usize,
    pub seed: u64,
    /// Rings of the 𝔻 grid the fields live on.
    pub resolution: usize,
    pub modes: usize,
    pub method: CoveringMethod,
}

impl Default for CauchyBudget {
    fn default() -> Self {
        CauchyBudget { soups: 1000, seed: 1, resolution: 32, modes: 400, method: CoveringMethod::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyRow {
    pub delta: f64,
    pub delta_prime: f64,
    /// ⟨‖δ^{−2Δ}V^δ − δ′^{−2Δ}V^{δ′}‖²_{ℋ^{−α}}⟩.
    pub mean_norm: f64,
    pub std_error: f64,
    pub mean_tail_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyTable {
    pub lambda: f64,
    pub beta: f64,
    pub dimension: f64,
    pub alpha: f64,
    pub rows: Vec<CauchyRow>,
    /// Each row mean lies below its predecessor.
    pub decreasing: bool,
    pub soups: usize,
    pub seed: u64,
}

/// Pair norms for consecutive cutoffs. One soup per replicate is drawn at the
/// smallest cutoff; coarser soups are its restrictions, so the loops above the
/// larger cutoff are shared and the band between them is independent of them.
pub fn cauchy_diagnostic(lambda: f64, beta: f64, kind: MeasureKind, deltas: &[f64], alpha: f64, budget: &CauchyBudget) -> Result<CauchyTable> {
    let dim = ConformalDimension::new(kind, lambda, beta).value;
    if !(dim < 0.5) {
        return Err(Error::ParameterOutOfRange(format!("Δ = {dim} must be < 1/2 for the Cauchy diagnostic")));
    }
    if !(alpha > 1.5) {
        return Err(Error::ParameterOutOfRange(format!("Sobolev order α = {alpha} must exceed 3/2")));
    }
    if deltas.is_empty() || deltas.windows(2).any(|w| !(w[1] < w[0])) || !(deltas[deltas.len() - 1] > 0.0) {
        return Err(Error::InvalidParameter("cutoffs must be positive and strictly decreasing".into()));
    }
    if budget.soups < 2 {
        return Err(Error::InvalidParameter("need at least 2 soups".into()));
    }
    let basis = build_basis(budget.modes)?;
    let grid = Arc::new(QuadratureGrid::unit_disk(budget.resolution)?);
    let table = basis.table(&grid);
    let finest = deltas[deltas.len() - 1];
    let base = SoupParams::new(lambda, finest, kind, 0);
    let per_soup: Vec<Vec<(f64, f64)>> = (0..budget.soups)
        .into_par_iter()
        .map(|s| {
            let soup = sample_soup(&base.clone().with_seed(derive_seed(budget.seed, s as u64)))?;
            let coeffs: Vec<Vec<Complex64>> = deltas
                .iter()
                .map(|d| table.coefficients(&field_sample(&soup.with_cutoff(*d), &grid, beta, budget.method)?.values))
                .collect::<Result<_>>()?;
            Ok(coeffs
                .windows(2)
                .map(|w| {
                    let diff: Vec<Complex64> = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
                    let n = norm_from_coefficients(&diff, &table.eigenvalues, alpha);
                    (n.value, n.tail_estimate)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let n = budget.soups as f64;
    let rows: Vec<CauchyRow> = (0..deltas.len() - 1)
        .map(|k| {
            let xs: Vec<f64> = per_soup.iter().map(|r| r[k].0).collect();
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let tail = per_soup.iter().map(|r| r[k].1).sum::<f64>() / n;
            CauchyRow { delta: deltas[k], delta_prime: deltas[k + 1], mean_norm: mean, std_error: (var / n).sqrt(), mean_tail_estimate: tail }
        })
        .collect();
    let decreasing = rows.windows(2).all(|w| w[1].mean_norm < w[0].mean_norm);
    Ok(CauchyTable { lambda, beta, dimension: dim, alpha, rows, decreasing, soups: budget.soups, seed: budget.seed })
}
