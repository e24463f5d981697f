//! Unit-disk geometry: points, Möbius self-maps, bump test functions and the
//! concentric-ring quadrature grid shared by every other module.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };
    /// The point (0, 1).
    pub const ONE: Point = Point { x: 0.0, y: 1.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Point::new(r * theta.cos(), r * theta.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sqr(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist_sqr(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    pub fn from_complex(c: Complex64) -> Self {
        Point::new(c.re, c.im)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// A closed Euclidean ball, used for the sets U, V of the α-catalogue and for sampling windows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub const UNIT: Ball = Ball { center: Point::ORIGIN, radius: 1.0 };

    pub const fn new(center: Point, radius: f64) -> Self {
        Ball { center, radius }
    }

    pub fn contains(&self, z: Point) -> bool {
        z.dist_sqr(self.center) <= self.radius * self.radius
    }

    /// Whether `other` is a subset of `self`.
    pub fn contains_ball(&self, other: &Ball) -> bool {
        other.center.dist(self.center) + other.radius <= self.radius * (1.0 + 1e-12)
    }
}

/// f(w) = e^{iθ}(w − a)/(1 − ā w), a Möbius self-map of the unit disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoebiusMap {
    a_re: f64,
    a_im: f64,
    theta: f64,
}

impl MoebiusMap {
    pub fn new(a: Point, theta: f64) -> Result<Self> {
        if !a.is_finite() || !theta.is_finite() || a.norm() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "Möbius parameter needs |a| < 1 and finite θ, got a = ({}, {}), θ = {theta}",
                a.x, a.y
            )));
        }
        Ok(MoebiusMap { a_re: a.x, a_im: a.y, theta })
    }

    pub fn identity() -> Self {
        MoebiusMap { a_re: 0.0, a_im: 0.0, theta: 0.0 }
    }

    pub fn rotation(theta: f64) -> Self {
        MoebiusMap { a_re: 0.0, a_im: 0.0, theta }
    }

    pub fn a(&self) -> Point {
        Point::new(self.a_re, self.a_im)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn check(w: Point) -> Result<Complex64> {
        if !w.is_finite() || w.norm() >= 1.0 {
            return Err(Error::PointOutsideDomain { x: w.x, y: w.y });
        }
        Ok(w.to_complex())
    }

    pub fn apply(&self, w: Point) -> Result<Point> {
        let w = Self::check(w)?;
        let a = Complex64::new(self.a_re, self.a_im);
        let rot = Complex64::from_polar(1.0, self.theta);
        Ok(Point::from_complex(rot * (w - a) / (1.0 - a.conj() * w)))
    }

    /// |f′(w)| = (1 − |a|²)/|1 − ā w|².
    pub fn derivative_modulus(&self, w: Point) -> Result<f64> {
        let w = Self::check(w)?;
        let a = Complex64::new(self.a_re, self.a_im);
        Ok((1.0 - a.norm_sqr()) / (1.0 - a.conj() * w).norm_sqr())
    }

    pub fn inverse(&self) -> MoebiusMap {
        let a = Complex64::new(self.a_re, self.a_im);
        let b = -a * Complex64::from_polar(1.0, self.theta);
        MoebiusMap { a_re: b.re, a_im: b.im, theta: -self.theta }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainKind {
    UnitDisk,
    MoebiusImageOfUnitDisk,
}

/// The unit disk, or its image under a Möbius self-map. As a set both are 𝔻;
/// the map is carried along for pushing grids and test functions forward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub kind: DomainKind,
    pub moebius: Option<MoebiusMap>,
}

impl Domain {
    pub fn unit_disk() -> Self {
        Domain { kind: DomainKind::UnitDisk, moebius: None }
    }

    pub fn moebius_image(f: MoebiusMap) -> Self {
        Domain { kind: DomainKind::MoebiusImageOfUnitDisk, moebius: Some(f) }
    }

    pub fn contains(&self, z: Point) -> bool {
        z.is_finite() && z.norm() < 1.0
    }

    pub fn area(&self) -> f64 {
        PI
    }

    pub fn diameter(&self) -> f64 {
        2.0
    }

    pub fn bounding_ball(&self) -> Ball {
        Ball::UNIT
    }

    pub fn check_point(&self, z: Point) -> Result<()> {
        if self.contains(z) {
            Ok(())
        } else {
            Err(Error::PointOutsideDomain { x: z.x, y: z.y })
        }
    }
}

impl Default for Domain {
    fn default() -> Self {
        Domain::unit_disk()
    }
}

/// d_z, the distance from z to the boundary of the domain.
pub fn dist_to_boundary(z: Point, domain: &Domain) -> Result<f64> {
    domain.check_point(z)?;
    Ok(1.0 - z.norm())
}

/// d_{z,w} = min(d_z, |z − w|).
pub fn dist_restricted(z: Point, w: Point, domain: &Domain) -> Result<f64> {
    domain.check_point(w)?;
    Ok(dist_to_boundary(z, domain)?.min(z.dist(w)))
}

/// The standard bump amplitude·exp(−1/(1 − |z − c|²/ρ²)) supported on B(c, ρ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: Point,
    pub radius: f64,
    pub amplitude: f64,
}

impl TestFunction {
    pub fn new(center: Point, radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0) || !amplitude.is_finite() || !center.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "test function needs radius > 0 and finite amplitude, got radius {radius}, amplitude {amplitude}"
            )));
        }
        if center.norm() + radius > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "support B(({}, {}), {radius}) is not inside the unit disk",
                center.x, center.y
            )));
        }
        Ok(TestFunction { center, radius, amplitude })
    }

    pub fn support(&self) -> Ball {
        Ball::new(self.center, self.radius)
    }

    pub fn value(&self, z: Point) -> f64 {
        let s = z.dist_sqr(self.center) / (self.radius * self.radius);
        if s >= 1.0 {
            0.0
        } else {
            self.amplitude * (-1.0 / (1.0 - s)).exp()
        }
    }
}

/// One ring of the concentric-ring grid; node j sits at angle (j + phase)·2π/count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub radius: f64,
    pub count: usize,
    pub first: usize,
    pub phase: f64,
}

#[derive(Debug, Clone)]
struct BucketIndex {
    lo: f64,
    width: f64,
    side: usize,
    cells: Vec<Vec<u32>>,
}

/// Quadrature nodes with positive weights. Grids built by [`QuadratureGrid::unit_disk`]
/// keep their ring structure, which the layering code uses for fast disk covering.
#[derive(Debug)]
pub struct QuadratureGrid {
    points: Vec<Point>,
    weights: Vec<f64>,
    resolution: usize,
    rings: Option<Vec<Ring>>,
    index: OnceLock<BucketIndex>,
}

impl Clone for QuadratureGrid {
    fn clone(&self) -> Self {
        QuadratureGrid {
            points: self.points.clone(),
            weights: self.weights.clone(),
            resolution: self.resolution,
            rings: self.rings.clone(),
            index: OnceLock::new(),
        }
    }
}

impl QuadratureGrid {
    /// Concentric-ring midpoint rule on 𝔻 with `resolution` rings of equal width.
    pub fn unit_disk(resolution: usize) -> Result<Self> {
        Self::rings_up_to(resolution, resolution)
    }

    /// The first `keep` rings of the `resolution`-ring grid on 𝔻.
    fn rings_up_to(resolution: usize, keep: usize) -> Result<Self> {
        if resolution < 1 {
            return Err(Error::InvalidParameter("grid resolution must be ≥ 1".into()));
        }
        let n = resolution as f64;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut rings = Vec::with_capacity(keep);
        for k in 0..keep.min(resolution) {
            let radius = (k as f64 + 0.5) / n;
            let count = ((2.0 * PI * (k as f64 + 0.5)).round() as usize).max(3);
            let ring_area = PI * ((k + 1) * (k + 1) - k * k) as f64 / (n * n);
            let w = ring_area / count as f64;
            let phase = 0.5;
            rings.push(Ring { radius, count, first: points.len(), phase });
            for j in 0..count {
                let theta = (j as f64 + phase) * 2.0 * PI / count as f64;
                points.push(Point::polar(radius, theta));
                weights.push(w);
            }
        }
        Ok(QuadratureGrid { points, weights, resolution, rings: Some(rings), index: OnceLock::new() })
    }

    /// The rings of the `resolution`-ring grid of 𝔻 that lie within radius `rho`
    /// (plus one ring of margin), i.e. the part of the full grid that sees a support
    /// contained in B(0, rho).
    pub fn unit_disk_within(resolution: usize, rho: f64) -> Result<Self> {
        let keep = ((rho * resolution as f64).ceil() as usize + 1).min(resolution);
        Self::rings_up_to(resolution, keep)
    }

    /// An unstructured grid from explicit nodes.
    pub fn from_nodes(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::GridMismatch { expected: points.len(), found: weights.len() });
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParameter("grid weights must be positive".into()));
        }
        Ok(QuadratureGrid { points, weights, resolution: 0, rings: None, index: OnceLock::new() })
    }

    /// The nodes satisfying `keep`, with their weights, as an unstructured grid.
    pub fn restrict(&self, keep: impl Fn(Point) -> bool) -> QuadratureGrid {
        let (points, weights) = self.nodes().filter(|(z, _)| keep(*z)).unzip();
        QuadratureGrid { points, weights, resolution: self.resolution, rings: None, index: OnceLock::new() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rings(&self) -> Option<&[Ring]> {
        self.rings.as_deref()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn index(&self) -> &BucketIndex {
        self.index.get_or_init(|| {
            let mut lo = -1.0f64;
            let mut hi = 1.0f64;
            for p in &self.points {
                lo = lo.min(p.x).min(p.y);
                hi = hi.max(p.x).max(p.y);
            }
            let side = ((self.points.len() as f64).sqrt() / 2.0).ceil().clamp(1.0, 256.0) as usize;
            let width = (hi - lo) / side as f64 * (1.0 + 1e-12);
            let mut cells = vec![Vec::new(); side * side];
            for (i, p) in self.points.iter().enumerate() {
                let cx = (((p.x - lo) / width) as usize).min(side - 1);
                let cy = (((p.y - lo) / width) as usize).min(side - 1);
                cells[cy * side + cx].push(i as u32);
            }
            BucketIndex { lo, width, side, cells }
        })
    }

    /// Calls `f` with the index of every node whose coordinates lie in the box.
    pub fn for_nodes_in_box(&self, xmin: f64, xmax: f64, ymin: f64, ymax: f64, mut f: impl FnMut(usize)) {
        let idx = self.index();
        let cell = |v: f64| -> usize {
            let c = ((v - idx.lo) / idx.width).floor();
            c.clamp(0.0, (idx.side - 1) as f64) as usize
        };
        let (x0, x1, y0, y1) = (cell(xmin), cell(xmax), cell(ymin), cell(ymax));
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                for &i in &idx.cells[cy * idx.side + cx] {
                    let p = self.points[i as usize];
                    if p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax {
                        f(i as usize);
                    }
                }
            }
        }
    }
}

/// ∫ g dz over the grid, with g given by its node values.
pub fn integrate(values: &[Complex64], grid: &QuadratureGrid) -> Result<Complex64> {
    if values.len() != grid.len() {
        return Err(Error::GridMismatch { expected: grid.len(), found: values.len() });
    }
    Ok(values.iter().zip(grid.weights()).map(|(v, w)| v * *w).sum())
}

/// Real-valued version of [`integrate`].
pub fn integrate_real(values: &[f64], grid: &QuadratureGrid) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::GridMismatch { expected: grid.len(), found: values.len() });
    }
    Ok(values.iter().zip(grid.weights()).map(|(v, w)| v * w).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn boundary_distances() {
        let d = Domain::unit_disk();
        assert_eq!(dist_to_boundary(Point::ORIGIN, &d).unwrap(), 1.0);
        assert_relative_eq!(dist_to_boundary(Point::new(0.3, 0.0), &d).unwrap(), 0.7);
        assert_relative_eq!(dist_to_boundary(Point::new(0.3, 0.4), &d).unwrap(), 0.5);
        assert!(matches!(
            dist_to_boundary(Point::new(1.0, 0.1), &d),
            Err(Error::PointOutsideDomain { .. })
        ));
        assert_relative_eq!(dist_restricted(Point::ORIGIN, Point::new(0.2, 0.0), &d).unwrap(), 0.2);
        assert_relative_eq!(
            dist_restricted(Point::new(0.9, 0.0), Point::new(-0.9, 0.0), &d).unwrap(),
            0.1,
            epsilon = 1e-15
        );
        let z = Point::new(0.1, 0.2);
        assert_eq!(dist_restricted(z, z, &d).unwrap(), 0.0);
    }

    #[test]
    fn moebius_examples() {
        let id = MoebiusMap::identity();
        let w = Point::new(0.3, -0.2);
        assert_eq!(id.apply(w).unwrap(), w);
        assert_eq!(id.derivative_modulus(w).unwrap(), 1.0);
        let f = MoebiusMap::new(Point::new(0.5, 0.0), 0.0).unwrap();
        let f0 = f.apply(Point::ORIGIN).unwrap();
        assert_relative_eq!(f0.x, -0.5);
        assert_relative_eq!(f0.y, 0.0);
        assert_relative_eq!(f.derivative_modulus(Point::ORIGIN).unwrap(), 0.75);
        assert!(MoebiusMap::new(Point::new(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn bump_vanishes_at_support_boundary() {
        let phi = TestFunction::new(Point::new(0.1, 0.0), 0.5, 1.0).unwrap();
        for k in 0..64 {
            let theta = k as f64 * 2.0 * PI / 64.0;
            let z = phi.center + Point::polar(0.5 - 1e-4, theta);
            assert!(phi.value(z).abs() < 1e-8);
        }
        assert_relative_eq!(phi.value(phi.center), (-1.0f64).exp());
        assert!(TestFunction::new(Point::new(0.6, 0.0), 0.5, 1.0).is_err());
    }

    #[test]
    fn grid_area_and_gaussian() {
        let g = QuadratureGrid::unit_disk(256).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); g.len()];
        assert_relative_eq!(integrate(&ones, &g).unwrap().re, PI, max_relative = 5e-3);
        let zeros = vec![Complex64::new(0.0, 0.0); g.len()];
        assert_eq!(integrate(&zeros, &g).unwrap(), Complex64::new(0.0, 0.0));
        let gauss: Vec<Complex64> =
            g.points().iter().map(|p| Complex64::new((-p.norm_sqr()).exp(), 0.0)).collect();
        let exact = PI * (1.0 - (-1.0f64).exp());
        assert_relative_eq!(integrate(&gauss, &g).unwrap().re, exact, max_relative = 5e-3);
        assert!(matches!(integrate(&ones[1..], &g), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn lipschitz_convergence_under_halving() {
        let f = |p: Point| (p.x + 0.3).abs() + p.y.abs();
        let exact = {
            let g = QuadratureGrid::unit_disk(1024).unwrap();
            let v: Vec<f64> = g.points().iter().map(|p| f(*p)).collect();
            integrate_real(&v, &g).unwrap()
        };
        let err = |n: usize| {
            let g = QuadratureGrid::unit_disk(n).unwrap();
            let v: Vec<f64> = g.points().iter().map(|p| f(*p)).collect();
            (integrate_real(&v, &g).unwrap() - exact).abs()
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e2 <= 0.6 * e1 + 1e-6, "e(32) = {e1}, e(64) = {e2}");
    }

    #[test]
    fn bucket_query_matches_scan() {
        let g = QuadratureGrid::unit_disk(40).unwrap();
        let (x0, x1, y0, y1) = (-0.3, 0.45, 0.1, 0.7);
        let mut found = Vec::new();
        g.for_nodes_in_box(x0, x1, y0, y1, |i| found.push(i));
        found.sort();
        let scan: Vec<usize> = (0..g.len())
            .filter(|&i| {
                let p = g.points()[i];
                p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1
            })
            .collect();
        assert_eq!(found, scan);
    }
}
