//! Layering numbers N^δ(z), Poisson layering fields δ^{−2Δ}e^{iβN^δ} and their
//! n-point statistics.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point, QuadratureGrid, TestFunction};
use crate::hull::{winding_number, HullRaster};
use crate::loop_measures::{alpha, sample_soup, AlphaBudget, AlphaMethod, AlphaQuery, Loop, LoopShape, MarkedSoup, MeasureKind, SoupParams};
use crate::numerics::ComplexMean;
use crate::rng::derive_seed;

/// Scaling exponent Δ of the layering field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalDimension {
    pub value: f64,
    pub kind: MeasureKind,
    pub lambda: f64,
    pub beta: f64,
}

impl ConformalDimension {
    /// λ(1 − cos β)/10 for Brownian loops, λπ(1 − cos β)/2 for disks.
    pub fn new(kind: MeasureKind, lambda: f64, beta: f64) -> Self {
        let value = lambda * kind.eta() * (1.0 - beta.cos()) / 2.0;
        ConformalDimension { value, kind, lambda, beta }
    }
}

/// How a polyline loop decides whether it covers a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoveringMethod {
    /// Flood fill of a square raster over the loop's bounding box.
    FloodFill { resolution_factor: usize },
    /// Nonzero winding number; misses bounded pockets of winding zero.
    WindingNumber,
}

impl Default for CoveringMethod {
    fn default() -> Self {
        CoveringMethod::FloodFill { resolution_factor: 256 }
    }
}

impl CoveringMethod {
    pub fn validate(&self) -> Result<()> {
        if let CoveringMethod::FloodFill { resolution_factor } = self {
            if *resolution_factor < 64 {
                return Err(Error::InvalidParameter(format!("flood-fill resolution {resolution_factor} < 64")));
            }
        }
        Ok(())
    }
}

/// A loop prepared for repeated covering tests.
enum Cover<'a> {
    Disk { center: Point, radius: f64 },
    Raster(HullRaster),
    Winding(&'a [Point], [f64; 4]),
}

impl<'a> Cover<'a> {
    fn new(l: &'a Loop, method: CoveringMethod) -> Result<Self> {
        match l.shape() {
            LoopShape::DiskBoundary { center, radius } => Ok(Cover::Disk { center: *center, radius: *radius }),
            LoopShape::Polyline(p) => match method {
                CoveringMethod::FloodFill { resolution_factor } => Ok(Cover::Raster(HullRaster::build(p, resolution_factor)?)),
                CoveringMethod::WindingNumber => {
                    let b = l.bbox();
                    if !(b[1] > b[0] && b[3] > b[2]) {
                        return Err(Error::DegenerateLoop);
                    }
                    Ok(Cover::Winding(p, b))
                }
            },
        }
    }

    fn covers(&self, z: Point) -> bool {
        match self {
            Cover::Disk { center, radius } => z.dist_sqr(*center) <= radius * radius,
            Cover::Raster(r) => r.covers(z),
            Cover::Winding(p, b) => z.x >= b[0] && z.x <= b[1] && z.y >= b[2] && z.y <= b[3] && winding_number(p, z) != 0,
        }
    }
}

fn in_box(b: &[f64; 4], z: Point) -> bool {
    z.x >= b[0] && z.x <= b[1] && z.y >= b[2] && z.y <= b[3]
}

/// Whether `z` lies in the hull of `l`.
pub fn covers(l: &Loop, z: Point, method: CoveringMethod) -> Result<bool> {
    method.validate()?;
    Ok(Cover::new(l, method)?.covers(z))
}

/// N^δ(z): the sum of the marks of the loops covering z.
pub fn layering_number(soup: &MarkedSoup, z: Point, method: CoveringMethod) -> Result<i64> {
    soup.params.domain.check_point(z)?;
    method.validate()?;
    let mut n = 0i64;
    for l in &soup.loops {
        if !in_box(&l.curve.bbox(), z) {
            continue;
        }
        if Cover::new(&l.curve, method)?.covers(z) {
            n += l.mark as i64;
        }
    }
    Ok(n)
}

/// N^δ at every node of `grid`.
pub fn layering_numbers(soup: &MarkedSoup, grid: &QuadratureGrid, method: CoveringMethod) -> Result<Vec<i64>> {
    method.validate()?;
    let hits: Vec<Vec<(u32, i8)>> = soup
        .loops
        .par_iter()
        .map(|l| -> Result<Vec<(u32, i8)>> {
            let b = l.curve.bbox();
            let mut inside = Vec::new();
            grid.for_nodes_in_box(b[0], b[1], b[2], b[3], |i| inside.push(i));
            if inside.is_empty() {
                return Ok(Vec::new());
            }
            let cover = Cover::new(&l.curve, method)?;
            let pts = grid.points();
            Ok(inside.into_iter().filter(|&i| cover.covers(pts[i])).map(|i| (i as u32, l.mark)).collect())
        })
        .collect::<Result<_>>()?;
    let mut n = vec![0i64; grid.len()];
    for (i, m) in hits.into_iter().flatten() {
        n[i as usize] += m as i64;
    }
    Ok(n)
}

/// Counts of (loop, point) pairs on which the two covering methods disagree.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoveringBias {
    pub pairs_checked: usize,
    /// Covered by flood fill only: pockets of winding zero and raster slack.
    pub flood_only: usize,
    /// Covered by winding number only: raster error near the curve.
    pub winding_only: usize,
}

/// Compares flood fill at `resolution_factor` with the winding-number test on
/// every polyline loop of `soup` and every point of its bounding box.
pub fn covering_bias(soup: &MarkedSoup, points: &[Point], resolution_factor: usize) -> Result<CoveringBias> {
    let flood = CoveringMethod::FloodFill { resolution_factor };
    flood.validate()?;
    let mut out = CoveringBias::default();
    for l in &soup.loops {
        let LoopShape::Polyline(_) = l.curve.shape() else { continue };
        let b = l.curve.bbox();
        let local: Vec<Point> = points.iter().copied().filter(|z| in_box(&b, *z)).collect();
        if local.is_empty() {
            continue;
        }
        let f = Cover::new(&l.curve, flood)?;
        let w = Cover::new(&l.curve, CoveringMethod::WindingNumber)?;
        for z in local {
            let (a, c) = (f.covers(z), w.covers(z));
            out.pairs_checked += 1;
            out.flood_only += (a && !c) as usize;
            out.winding_only += (c && !a) as usize;
        }
    }
    Ok(out)
}

/// What produced a field sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FieldSource {
    Poisson { lambda: f64, beta: f64 },
    Gaussian { xi: f64 },
}

/// A renormalized field evaluated at the nodes of a quadrature grid.
#[derive(Clone, Debug)]
pub struct FieldSample {
    pub grid: Arc<QuadratureGrid>,
    pub values: Vec<Complex64>,
    pub delta: f64,
    /// −2Δ: the modulus of a Poisson layering field is δ^{normalization_exponent}.
    pub normalization_exponent: f64,
    pub source: FieldSource,
    pub measure: MeasureKind,
    pub seed: u64,
}

impl FieldSample {
    /// The same field with `f` applied to every value.
    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> FieldSample {
        FieldSample { values: self.values.iter().map(|v| f(*v)).collect(), ..self.clone() }
    }

    pub fn real_part(&self) -> FieldSample {
        self.map(|v| Complex64::new(v.re, 0.0))
    }

    pub fn imag_part(&self) -> FieldSample {
        self.map(|v| Complex64::new(v.im, 0.0))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..2.0 * PI).contains(&beta) {
        return Err(Error::ParameterOutOfRange(format!("β = {beta} must lie in [0, 2π)")));
    }
    Ok(())
}

/// δ^{−2Δ}·exp(iβN^δ) at every node of `grid`.
pub fn field_sample(soup: &MarkedSoup, grid: &Arc<QuadratureGrid>, beta: f64, method: CoveringMethod) -> Result<FieldSample> {
    check_beta(beta)?;
    let p = &soup.params;
    let dim = ConformalDimension::new(p.measure, p.lambda, beta);
    let exponent = -2.0 * dim.value;
    let modulus = p.delta.powf(exponent);
    let n = layering_numbers(soup, grid, method)?;
    let values = n.into_iter().map(|k| Complex64::from_polar(modulus, beta * k as f64)).collect();
    Ok(FieldSample {
        grid: grid.clone(),
        values,
        delta: p.delta,
        normalization_exponent: exponent,
        source: FieldSource::Poisson { lambda: p.lambda, beta },
        measure: p.measure,
        seed: p.seed,
    })
}

/// ∫ V(z)φ(z) dz by the grid quadrature.
pub fn pair(field: &FieldSample, phi: &TestFunction) -> Result<Complex64> {
    pair_values(&field.values, &field.grid, phi)
}

/// [`pair`] for raw node values.
pub fn pair_values(values: &[Complex64], grid: &QuadratureGrid, phi: &TestFunction) -> Result<Complex64> {
    if values.len() != grid.len() {
        return Err(Error::GridMismatch { expected: grid.len(), found: values.len() });
    }
    Ok(grid.nodes().zip(values).map(|((z, w), v)| v * (w * phi.value(z))).sum())
}

/// Model parameters of an n-point estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NPointParams {
    pub lambda: f64,
    pub beta: f64,
    pub delta: f64,
    pub measure: MeasureKind,
    pub domain: Domain,
    pub method: CoveringMethod,
}

impl NPointParams {
    pub fn new(lambda: f64, beta: f64, delta: f64, measure: MeasureKind) -> Self {
        NPointParams { lambda, beta, delta, measure, domain: Domain::unit_disk(), method: CoveringMethod::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NPointBudget {
    pub soups: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NPointEstimate {
    pub points: Vec<Point>,
    pub estimate: Complex64,
    pub std_error: f64,
    pub soups: usize,
    pub seed: u64,
}

fn check_points(points: &[Point], domain: &Domain) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("need at least one point".into()));
    }
    for (i, z) in points.iter().enumerate() {
        domain.check_point(*z)?;
        if points[..i].contains(z) {
            return Err(Error::InvalidParameter(format!("coincident points ({}, {})", z.x, z.y)));
        }
    }
    Ok(())
}

/// Monte Carlo mean of ∏_k δ^{−2Δ}e^{iβN^δ(z_k)} over independent soups.
///
/// Soups are restricted to loops that can reach the smallest ball about the
/// domain's center containing every z_k; the others cover none of the points.
pub fn n_point_estimate(points: &[Point], params: &NPointParams, budget: &NPointBudget) -> Result<NPointEstimate> {
    check_points(points, &params.domain)?;
    check_beta(params.beta)?;
    params.method.validate()?;
    if budget.soups < 2 {
        return Err(Error::InvalidParameter("n-point estimate needs at least 2 soups".into()));
    }
    let dim = ConformalDimension::new(params.measure, params.lambda, params.beta);
    let modulus = params.delta.powf(-2.0 * dim.value * points.len() as f64);
    let c = params.domain.bounding_ball().center;
    let reach = points.iter().map(|z| z.dist(c)).fold(0.0, f64::max) * (1.0 + 1e-12) + 1e-12;
    let mut base = SoupParams::new(params.lambda, params.delta, params.measure, 0).with_window(reach);
    base.domain = params.domain;
    let acc = (0..budget.soups)
        .into_par_iter()
        .map(|s| -> Result<ComplexMean> {
            let soup = sample_soup(&base.clone().with_seed(derive_seed(budget.seed, s as u64)))?;
            let mut total = 0i64;
            for z in points {
                total += layering_number(&soup, *z, params.method)?;
            }
            let mut m = ComplexMean::default();
            m.push(Complex64::from_polar(modulus, params.beta * total as f64));
            Ok(m)
        })
        .try_reduce(ComplexMean::default, |a, b| Ok(a.merge(b)))?;
    let std_error = if params.beta == 0.0 { 0.0 } else { acc.std_error() };
    Ok(NPointEstimate { points: points.to_vec(), estimate: acc.mean(), std_error, soups: budget.soups, seed: budget.seed })
}

/// A prediction with its numerical uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    pub std_error: f64,
    pub method: AlphaMethod,
}

/// The exact one- and two-point functions implied by the Poisson identity
/// ⟨e^{iβ·Σ marks}⟩ = e^{−λ·μ(1 − cos(kβ))}:
///
/// ⟨δ^{−2Δ}V(z)⟩ = δ^{−2Δ}e^{−λ(1−cos β)α_δ(z)},
/// ⟨V(z)V(w)⟩ = ⟨V(z)⟩⟨V(w)⟩·e^{λα_δ(z,w)[2(1−cos β) − (1−cos 2β)]}.
pub fn n_point_prediction(points: &[Point], params: &NPointParams, budget: &AlphaBudget) -> Result<Prediction> {
    check_points(points, &params.domain)?;
    check_beta(params.beta)?;
    if points.len() > 2 {
        return Err(Error::InvalidParameter(format!("closed forms cover n ≤ 2, got n = {}", points.len())));
    }
    let v = params.domain.bounding_ball();
    let (lambda, beta, delta, kind) = (params.lambda, params.beta, params.delta, params.measure);
    let dim = ConformalDimension::new(kind, lambda, beta).value;
    let c1 = 1.0 - beta.cos();
    let mut log_value = 0.0;
    let mut log_err = 0.0;
    let mut method = AlphaMethod::ClosedForm;
    for z in points {
        let a = alpha(&AlphaQuery::InDomain { z: *z, delta, v }, kind, budget)?;
        log_value += -2.0 * dim * delta.ln() - lambda * c1 * a.value;
        log_err += (lambda * c1 * a.std_error).powi(2);
        method = a.method;
    }
    if let [z, w] = points {
        let a = alpha(&AlphaQuery::TwoPointDomain { z: *z, t: *w, delta, v }, kind, budget)?;
        let c = 2.0 * c1 - (1.0 - (2.0 * beta).cos());
        log_value += lambda * a.value * c;
        log_err += (lambda * c * a.std_error).powi(2);
    }
    let value = log_value.exp();
    Ok(Prediction { value, std_error: value * log_err.sqrt(), method })
}

/// Writes `x, y, re, im` rows, one per grid node.
pub fn write_field_csv<W: Write>(field: &FieldSample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "re", "im"])?;
    for (z, v) in field.grid.points().iter().zip(&field.values) {
        w.write_record([z.x, z.y, v.re, v.im].map(|f| format!("{f:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one row per estimate; points are `x y` pairs separated by `;`.
pub fn write_npoint_csv<W: Write>(rows: &[NPointEstimate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["points", "estimate_re", "estimate_im", "std_error", "budget", "seed"])?;
    for r in rows {
        let pts: Vec<String> = r.points.iter().map(|p| format!("{:.16e} {:.16e}", p.x, p.y)).collect();
        w.write_record([
            pts.join(";"),
            format!("{:.16e}", r.estimate.re),
            format!("{:.16e}", r.estimate.im),
            format!("{:.16e}", r.std_error),
            r.soups.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Ball;
    use crate::loop_measures::{MarkedLoop, SoupParams};
    use approx::assert_relative_eq;

    fn square(h: f64) -> Loop {
        let c = [(-h, -h), (h, -h), (h, h), (-h, h)];
        let mut pts = Vec::new();
        for k in 0..4 {
            let (a, b) = (c[k], c[(k + 1) % 4]);
            for j in 0..4 {
                let s = j as f64 / 4.0;
                pts.push(Point::new(a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1)));
            }
        }
        pts.push(pts[0]);
        Loop::polyline(pts, 1.0).unwrap()
    }

    /// Goes around the ring 0.3 < |z| < 0.6 counterclockwise outside, then
    /// clockwise inside: the hole has winding 0 but is enclosed.
    fn pocket() -> Loop {
        let mut pts = Vec::new();
        for k in 0..=64 {
            pts.push(Point::polar(0.6, 2.0 * PI * k as f64 / 64.0));
        }
        for k in 0..=64 {
            pts.push(Point::polar(0.3, -2.0 * PI * k as f64 / 64.0));
        }
        pts.push(pts[0]);
        Loop::polyline(pts, 1.0).unwrap()
    }

    fn soup_of(loops: Vec<MarkedLoop>) -> MarkedSoup {
        MarkedSoup { loops, params: SoupParams::new(1.0, 0.1, MeasureKind::Loop, 0) }
    }

    #[test]
    fn conformal_dimensions() {
        assert_relative_eq!(ConformalDimension::new(MeasureKind::Loop, 2.0, PI).value, 0.4);
        assert_relative_eq!(ConformalDimension::new(MeasureKind::Massive { mass_bound: 1.0 }, 2.0, PI).value, 0.4);
        assert_relative_eq!(ConformalDimension::new(MeasureKind::Disk, 1.0, PI / 2.0).value, PI / 2.0);
    }

    #[test]
    fn covering_examples() {
        let d = Loop::disk(Point::ORIGIN, 0.5).unwrap();
        assert!(covers(&d, Point::new(0.3, 0.0), CoveringMethod::default()).unwrap());
        let s = square(0.5);
        assert!(covers(&s, Point::ORIGIN, CoveringMethod::default()).unwrap());
        assert!(covers(&s, Point::ORIGIN, CoveringMethod::WindingNumber).unwrap());
        let p = pocket();
        assert!(covers(&p, Point::ORIGIN, CoveringMethod::FloodFill { resolution_factor: 1024 }).unwrap());
        assert!(covers(&p, Point::ORIGIN, CoveringMethod::default()).unwrap());
        assert!(!covers(&p, Point::ORIGIN, CoveringMethod::WindingNumber).unwrap());
        assert!(matches!(
            covers(&s, Point::ORIGIN, CoveringMethod::FloodFill { resolution_factor: 32 }),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn flat_loop_is_degenerate() {
        let pts: Vec<Point> = (0..9).map(|k| Point::new(0.1 * (k % 5) as f64, 0.0)).chain([Point::ORIGIN]).collect();
        let l = Loop::polyline(pts, 1.0).unwrap();
        for m in [CoveringMethod::default(), CoveringMethod::WindingNumber] {
            assert!(matches!(covers(&l, Point::ORIGIN, m), Err(Error::DegenerateLoop)));
        }
    }

    #[test]
    fn layering_number_sums_marks() {
        let z = Point::new(0.05, 0.0);
        assert_eq!(layering_number(&soup_of(vec![]), z, CoveringMethod::default()).unwrap(), 0);
        let s = soup_of(vec![
            MarkedLoop { curve: square(0.5), mark: 1 },
            MarkedLoop { curve: Loop::disk(Point::ORIGIN, 0.2).unwrap(), mark: 1 },
            MarkedLoop { curve: Loop::disk(Point::new(0.5, 0.5), 0.1).unwrap(), mark: -1 },
        ]);
        assert_eq!(layering_number(&s, z, CoveringMethod::default()).unwrap(), 2);
        assert!(matches!(layering_number(&s, Point::new(1.0, 0.5), CoveringMethod::default()), Err(Error::PointOutsideDomain { .. })));
    }

    #[test]
    fn grid_numbers_match_pointwise() {
        let soup = sample_soup(&SoupParams::new(2.0, 0.25, MeasureKind::Loop, 3)).unwrap();
        let grid = QuadratureGrid::unit_disk(12).unwrap();
        for m in [CoveringMethod::default(), CoveringMethod::WindingNumber] {
            let all = layering_numbers(&soup, &grid, m).unwrap();
            for (i, z) in grid.points().iter().enumerate() {
                assert_eq!(all[i], layering_number(&soup, *z, m).unwrap());
            }
        }
    }

    #[test]
    fn disk_layering_number_moments() {
        let z = Point::ORIGIN;
        let delta = 0.5;
        let a = alpha(&AlphaQuery::InDomain { z, delta, v: Ball::UNIT }, MeasureKind::Disk, &AlphaBudget::default()).unwrap().value;
        let n = 10_000;
        let base = SoupParams::new(1.0, delta, MeasureKind::Disk, 0).with_window(1e-9);
        let xs: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|s| {
                let soup = sample_soup(&base.clone().with_seed(derive_seed(77, s))).unwrap();
                layering_number(&soup, z, CoveringMethod::default()).unwrap() as f64
            })
            .collect();
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let m2 = xs.iter().map(|x| x * x).sum::<f64>() / nf;
        let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / nf;
        // E N = 0, E N² = λα; the fourth moment sets the error of the second.
        assert!(mean.abs() < 3.0 * (m2 / nf).sqrt(), "mean {mean}");
        let se2 = ((m4 - m2 * m2) / nf).sqrt();
        assert!((m2 - a).abs() < 3.0 * se2, "var {m2} vs {a} ± {se2}");
    }

    #[test]
    fn field_modulus_and_flip() {
        let soup = sample_soup(&SoupParams::new(1.0, 0.2, MeasureKind::Disk, 5)).unwrap();
        let grid = Arc::new(QuadratureGrid::unit_disk(16).unwrap());
        let f = field_sample(&soup, &grid, 2.0, CoveringMethod::default()).unwrap();
        let dim = ConformalDimension::new(MeasureKind::Disk, 1.0, 2.0).value;
        assert_relative_eq!(f.normalization_exponent, -2.0 * dim);
        for v in &f.values {
            assert_relative_eq!(v.norm(), 0.2f64.powf(-2.0 * dim), max_relative = 1e-12);
        }
        let zero = field_sample(&soup, &grid, 0.0, CoveringMethod::default()).unwrap();
        assert!(zero.values.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        let phi = TestFunction::new(Point::new(0.1, 0.0), 0.5, 1.0).unwrap();
        let g = field_sample(&soup.flip_marks(), &grid, 2.0, CoveringMethod::default()).unwrap();
        let (a, b) = (pair(&f, &phi).unwrap(), pair(&g, &phi).unwrap());
        assert!((a.conj() - b).norm() < 1e-12 * a.norm().max(1.0));
        let split = pair(&f.real_part(), &phi).unwrap() + Complex64::i() * pair(&f.imag_part(), &phi).unwrap();
        assert!((split - a).norm() < 1e-12 * a.norm().max(1.0));
        assert!(matches!(field_sample(&soup, &grid, 2.0 * PI, CoveringMethod::default()), Err(Error::ParameterOutOfRange(_))));
    }

    #[test]
    fn pairing_of_constant_field() {
        let grid = Arc::new(QuadratureGrid::unit_disk(128).unwrap());
        let soup = soup_of(vec![]);
        let f = field_sample(&soup, &grid, 0.0, CoveringMethod::default()).unwrap();
        let phi = TestFunction::new(Point::ORIGIN, 0.6, 2.0).unwrap();
        // 2π∫₀^ρ φ(r) r dr by adaptive 1-D quadrature.
        let radial = crate::numerics::integrate_adaptive(|r| 2.0 * PI * r * phi.value(Point::new(r, 0.0)), 0.0, 0.6, 1e-14, 1e-12).value;
        assert_relative_eq!(pair(&f, &phi).unwrap().re, radial, max_relative = 1e-4);
        let zero = TestFunction::new(Point::ORIGIN, 0.6, 0.0).unwrap();
        assert_eq!(pair(&f, &zero).unwrap(), Complex64::new(0.0, 0.0));
        let short = FieldSample { values: vec![Complex64::new(1.0, 0.0)], ..f };
        assert!(matches!(pair(&short, &phi), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn flood_fill_contains_winding() {
        let soup = sample_soup(&SoupParams::new(3.0, 0.2, MeasureKind::Loop, 11)).unwrap();
        let grid = QuadratureGrid::unit_disk(24).unwrap();
        let bias = covering_bias(&soup, grid.points(), 256).unwrap();
        assert!(bias.pairs_checked > 0);
        assert_eq!(bias.winding_only, 0);
    }

    #[test]
    fn one_point_disk() {
        let params = NPointParams::new(1.0, PI, 0.1, MeasureKind::Disk);
        let est = n_point_estimate(&[Point::ORIGIN], &params, &NPointBudget { soups: 10_000, seed: 3 }).unwrap();
        let target = (-2.0 * PI * (2f64.ln() - 0.5)).exp();
        let pred = n_point_prediction(&[Point::ORIGIN], &params, &AlphaBudget::default()).unwrap();
        assert_relative_eq!(pred.value, target, max_relative = 1e-8);
        assert!((est.estimate.re - target).abs() < 3.0 * est.std_error, "{:?} vs {target}", est);
    }

    #[test]
    fn n_point_rejects_and_trivial_beta() {
        let p = NPointParams::new(1.0, 0.0, 0.1, MeasureKind::Disk);
        let b = NPointBudget { soups: 10, seed: 1 };
        let z = Point::new(0.2, 0.1);
        assert!(matches!(n_point_estimate(&[z, z], &p, &b), Err(Error::InvalidParameter(_))));
        let e = n_point_estimate(&[z, Point::ORIGIN], &p, &b).unwrap();
        assert_eq!(e.estimate, Complex64::new(1.0, 0.0));
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn csv_columns() {
        let grid = Arc::new(QuadratureGrid::unit_disk(2).unwrap());
        let f = field_sample(&soup_of(vec![]), &grid, 1.0, CoveringMethod::default()).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,re,im\n"));
        assert_eq!(text.lines().count(), grid.len() + 1);
    }
}
