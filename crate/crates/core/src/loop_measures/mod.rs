//! Loop measures μ^loop, μ^disk and μ^m: loops, marked soups and the α-quantities.

mod anchored;
pub mod bridge;
mod disk_quad;
pub mod snapshot;
mod soup;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist_to_boundary, Ball, Domain, Point};
use crate::hull::{convex_hull, hull_diameter, HullRaster};
use crate::special::hyp3f2_loop_integral;

pub use anchored::McEstimate;
pub use bridge::{sample_brownian_bridge_loop, steps_for};
pub use disk_quad::{disk_exclusive_tail, disk_soup_mass};
pub use soup::{sample_soup, sample_soup_in, SoupParams};

/// Which loop measure a computation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MeasureKind {
    Loop,
    Disk,
    /// Brownian loops killed at constant rate m̄² per unit time.
    Massive { mass_bound: f64 },
}

impl MeasureKind {
    pub fn massive(mass_bound: f64) -> Result<Self> {
        if !(mass_bound >= 0.0 && mass_bound.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass bound {mass_bound} must be a finite number ≥ 0")));
        }
        Ok(MeasureKind::Massive { mass_bound })
    }

    /// Coefficient η of the logarithmic short-distance singularity: 1/5 for Brownian loops, π for disks.
    pub fn eta(&self) -> f64 {
        match self {
            MeasureKind::Disk => PI,
            _ => 0.2,
        }
    }

    pub fn mass_bound(&self) -> Option<f64> {
        match self {
            MeasureKind::Massive { mass_bound } => Some(*mass_bound),
            _ => None,
        }
    }

    pub fn is_brownian(&self) -> bool {
        !matches!(self, MeasureKind::Disk)
    }

    pub fn name(&self) -> &'static str {
        match self {
            MeasureKind::Loop => "loop",
            MeasureKind::Disk => "disk",
            MeasureKind::Massive { .. } => "massive",
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if let MeasureKind::Massive { mass_bound } = self {
            MeasureKind::massive(*mass_bound)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LoopShape {
    /// Closed polyline; the last point repeats the first.
    Polyline(Vec<Point>),
    DiskBoundary { center: Point, radius: f64 },
}

/// An unrooted loop represented by any rooted representative.
#[derive(Clone, Debug, PartialEq)]
pub struct Loop {
    shape: LoopShape,
    time_length: f64,
    diameter: f64,
}

impl Loop {
    pub fn polyline(points: Vec<Point>, time_length: f64) -> Result<Self> {
        if points.len() < 8 {
            return Err(Error::InvalidParameter(format!("polyline loop needs ≥ 8 points, got {}", points.len())));
        }
        if points.first() != points.last() {
            return Err(Error::InvalidParameter("polyline loop is not closed".into()));
        }
        if !(time_length >= 0.0) || points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("polyline loop has non-finite data".into()));
        }
        let diameter = hull_diameter(&convex_hull(&points));
        if diameter <= 0.0 {
            return Err(Error::DegenerateLoop);
        }
        Ok(Loop { shape: LoopShape::Polyline(points), time_length, diameter })
    }

    pub fn disk(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(Error::InvalidParameter(format!("disk loop radius {radius} must be positive")));
        }
        Ok(Loop { shape: LoopShape::DiskBoundary { center, radius }, time_length: 0.0, diameter: 2.0 * radius })
    }

    pub(crate) fn from_parts(shape: LoopShape, time_length: f64, diameter: f64) -> Self {
        Loop { shape, time_length, diameter }
    }

    pub fn shape(&self) -> &LoopShape {
        &self.shape
    }

    pub fn time_length(&self) -> f64 {
        self.time_length
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Bounding box as (xmin, xmax, ymin, ymax).
    pub fn bbox(&self) -> [f64; 4] {
        match &self.shape {
            LoopShape::DiskBoundary { center, radius } => {
                [center.x - radius, center.x + radius, center.y - radius, center.y + radius]
            }
            LoopShape::Polyline(p) => p.iter().fold(
                [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY],
                |b, q| [b[0].min(q.x), b[1].max(q.x), b[2].min(q.y), b[3].max(q.y)],
            ),
        }
    }

    /// Whether the loop lies in the open ball `b`.
    pub fn inside_ball(&self, b: &Ball) -> bool {
        match &self.shape {
            LoopShape::DiskBoundary { center, radius } => center.dist(b.center) + radius < b.radius,
            LoopShape::Polyline(p) => {
                let r2 = b.radius * b.radius;
                p.iter().all(|q| q.dist_sqr(b.center) < r2)
            }
        }
    }

    /// Rasterized hull of a polyline loop.
    pub fn raster(&self, resolution: usize) -> Result<HullRaster> {
        match &self.shape {
            LoopShape::Polyline(p) => HullRaster::build(p, resolution),
            LoopShape::DiskBoundary { .. } => Err(Error::InvalidParameter("disk loops need no raster".into())),
        }
    }

    /// Canonical ordering key used when storing soups.
    pub(crate) fn sort_key(&self) -> (f64, f64, f64) {
        let b = self.bbox();
        (self.diameter, b[0], b[2])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarkedLoop {
    pub curve: Loop,
    pub mark: i8,
}

/// A Poisson collection of marked loops with the parameters that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkedSoup {
    pub loops: Vec<MarkedLoop>,
    pub params: SoupParams,
}

impl MarkedSoup {
    /// The soup with every mark negated.
    pub fn flip_marks(&self) -> MarkedSoup {
        let loops = self.loops.iter().map(|l| MarkedLoop { curve: l.curve.clone(), mark: -l.mark }).collect();
        MarkedSoup { loops, params: self.params.clone() }
    }

    /// Loops with diameter at least `delta` (the soup at a coarser cutoff).
    pub fn with_cutoff(&self, delta: f64) -> MarkedSoup {
        let loops = self.loops.iter().filter(|l| l.curve.diameter() >= delta).cloned().collect();
        let mut params = self.params.clone();
        params.delta = params.delta.max(delta);
        MarkedSoup { loops, params }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlphaMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaValue {
    pub value: f64,
    pub std_error: f64,
    pub method: AlphaMethod,
}

impl AlphaValue {
    pub fn exact(value: f64) -> Self {
        AlphaValue { value, std_error: 0.0, method: AlphaMethod::ClosedForm }
    }
}

/// A loop set whose measure is requested. Sets U, V are balls; z and w (or t)
/// are points; δ bounds are diameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AlphaQuery {
    /// z ∈ γ̄, δ ≤ diam ≤ R.
    Annulus { z: Point, delta: f64, r_max: f64 },
    /// z ∈ γ̄, diam ≥ δ, γ ⊂ V.
    InDomain { z: Point, delta: f64, v: Ball },
    /// z, w ∈ γ̄, δ′ ≤ diam ≤ δ, γ ⊂ V.
    TwoPointBand { z: Point, w: Point, delta_lo: f64, delta_hi: f64, v: Ball },
    /// z ∈ γ̄, γ ⊄ U, γ ⊂ V.
    NotInUInV { z: Point, u: Ball, v: Ball },
    /// z, t ∈ γ̄, diam ≥ δ, γ ⊂ V.
    TwoPointDomain { z: Point, t: Point, delta: f64, v: Ball },
    /// z ∈ γ̄, t ∉ γ̄, diam ≥ δ, γ ⊂ V.
    Exclusive { z: Point, t: Point, delta: f64, v: Ball },
    /// z ∈ γ̄, γ ⊄ V.
    NotInV { z: Point, v: Ball },
    /// z ∈ γ̄, w ∉ γ̄, γ ⊄ V.
    NotInVExclusive { z: Point, w: Point, v: Ball },
}

/// Effort for Monte Carlo α estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McBudget {
    /// Stop once this many sampled loops fall in the query's diameter band.
    pub accepted: usize,
    /// Root positions drawn per sampled loop shape.
    pub draws_per_shape: usize,
    pub max_proposals: u64,
    pub max_steps: usize,
    /// Multiplies the 256·t/δ² discretization rule.
    pub step_scale: f64,
    pub raster_resolution: usize,
    pub seed: u64,
}

impl Default for McBudget {
    fn default() -> Self {
        McBudget {
            accepted: 20_000,
            draws_per_shape: 8,
            max_proposals: 200_000_000,
            max_steps: 1 << 16,
            step_scale: 1.0,
            raster_resolution: 256,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaBudget {
    /// Forces a method when set; otherwise the cheapest exact route is used.
    pub method: Option<AlphaMethod>,
    pub quad_tol: f64,
    pub mc: McBudget,
}

impl Default for AlphaBudget {
    fn default() -> Self {
        AlphaBudget { method: None, quad_tol: 1e-10, mc: McBudget::default() }
    }
}

impl AlphaBudget {
    pub fn monte_carlo(mc: McBudget) -> Self {
        AlphaBudget { method: Some(AlphaMethod::MonteCarlo), quad_tol: 1e-10, mc }
    }
}

fn check_delta(d: f64, name: &str) -> Result<()> {
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} = {d} must be finite and ≥ 0")));
    }
    Ok(())
}

fn check_ball(b: &Ball) -> Result<()> {
    if !(b.radius > 0.0 && b.radius.is_finite() && b.center.is_finite()) {
        return Err(Error::InvalidParameter(format!("ball radius {} must be positive", b.radius)));
    }
    Ok(())
}

fn check_in(z: Point, b: &Ball) -> Result<()> {
    if !b.contains(z) {
        return Err(Error::PointOutsideDomain { x: z.x, y: z.y });
    }
    Ok(())
}

impl AlphaQuery {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AlphaQuery::Annulus { delta, r_max, .. } => {
                check_delta(delta, "delta")?;
                check_delta(r_max, "R")?;
                if delta > r_max {
                    return Err(Error::InvalidParameter(format!("annulus needs δ ≤ R, got {delta} > {r_max}")));
                }
            }
            AlphaQuery::InDomain { z, delta, v } => {
                check_delta(delta, "delta")?;
                check_ball(&v)?;
                check_in(z, &v)?;
            }
            AlphaQuery::TwoPointBand { z, w, delta_lo, delta_hi, v } => {
                check_delta(delta_lo, "delta'")?;
                check_delta(delta_hi, "delta")?;
                if delta_lo >= delta_hi {
                    return Err(Error::InvalidParameter(format!("need δ′ < δ, got {delta_lo} ≥ {delta_hi}")));
                }
                check_ball(&v)?;
                check_in(z, &v)?;
                check_in(w, &v)?;
            }
            AlphaQuery::NotInUInV { z, u, v } => {
                check_ball(&u)?;
                check_ball(&v)?;
                if !v.contains_ball(&u) {
                    return Err(Error::InvalidParameter("U must be contained in V".into()));
                }
                check_in(z, &v)?;
            }
            AlphaQuery::TwoPointDomain { z, t, delta, v } | AlphaQuery::Exclusive { z, t, delta, v } => {
                check_delta(delta, "delta")?;
                check_ball(&v)?;
                check_in(z, &v)?;
                check_in(t, &v)?;
            }
            AlphaQuery::NotInV { v, .. } => check_ball(&v)?,
            AlphaQuery::NotInVExclusive { z, w, v } => {
                check_ball(&v)?;
                if z == w {
                    return Err(Error::CoincidentPoints);
                }
            }
        }
        Ok(())
    }

    /// The point every loop of the set covers.
    pub fn anchor(&self) -> Point {
        match *self {
            AlphaQuery::Annulus { z, .. }
            | AlphaQuery::InDomain { z, .. }
            | AlphaQuery::TwoPointBand { z, .. }
            | AlphaQuery::NotInUInV { z, .. }
            | AlphaQuery::TwoPointDomain { z, .. }
            | AlphaQuery::Exclusive { z, .. }
            | AlphaQuery::NotInV { z, .. }
            | AlphaQuery::NotInVExclusive { z, .. } => z,
        }
    }

    /// Whether the set has infinite μ^loop / μ^disk mass; for massive loops only
    /// small-loop divergences count.
    fn divergence(&self, kind: MeasureKind) -> Option<String> {
        let brownian_or_disk = !matches!(kind, MeasureKind::Massive { .. });
        match *self {
            AlphaQuery::Annulus { delta, r_max, .. } if delta == 0.0 && r_max > 0.0 => {
                Some("annulus with δ = 0 covers arbitrarily small loops".into())
            }
            AlphaQuery::InDomain { delta, .. } if delta == 0.0 => Some("loops in D covering z with δ = 0".into()),
            AlphaQuery::TwoPointBand { z, w, delta_lo, .. } if delta_lo == 0.0 && z == w => {
                Some("coincident points with δ′ = 0".into())
            }
            AlphaQuery::NotInUInV { z, u, .. } if !u.contains(z) => {
                Some("z outside U: small loops around z are not contained in U".into())
            }
            AlphaQuery::TwoPointDomain { z, t, delta, .. } if delta == 0.0 && z == t => {
                Some("coincident points with δ = 0".into())
            }
            AlphaQuery::Exclusive { delta, .. } if delta == 0.0 => Some("exclusive set with δ = 0".into()),
            AlphaQuery::NotInV { z, v } => {
                if !v.contains(z) {
                    Some("z outside V: small loops around z leave V".into())
                } else if brownian_or_disk {
                    Some("scale-invariant measure of large loops covering z is infinite".into())
                } else {
                    None
                }
            }
            AlphaQuery::NotInVExclusive { z, v, .. } if !v.contains(z) => {
                Some("z outside V: small loops around z leave V".into())
            }
            _ => None,
        }
    }
}

/// μ*(query) by the cheapest exact route: closed form for annuli, quadrature for
/// disks, Monte Carlo otherwise (or the route forced in `budget.method`).
pub fn alpha(query: &AlphaQuery, kind: MeasureKind, budget: &AlphaBudget) -> Result<AlphaValue> {
    kind.validate()?;
    query.validate()?;
    if let Some(msg) = query.divergence(kind) {
        return Err(Error::DivergentQuery(msg));
    }
    let method = match budget.method {
        Some(m) => m,
        None => match (query, kind) {
            (AlphaQuery::Annulus { .. }, MeasureKind::Loop | MeasureKind::Disk) => AlphaMethod::ClosedForm,
            (_, MeasureKind::Disk) => AlphaMethod::Quadrature,
            _ => AlphaMethod::MonteCarlo,
        },
    };
    match method {
        AlphaMethod::ClosedForm => match (query, kind) {
            (AlphaQuery::Annulus { delta, r_max, .. }, MeasureKind::Loop | MeasureKind::Disk) => {
                if delta == r_max {
                    Ok(AlphaValue::exact(0.0))
                } else {
                    Ok(AlphaValue::exact(kind.eta() * (r_max / delta).ln()))
                }
            }
            _ => Err(Error::InvalidParameter(format!("no closed form for {query:?} under {}", kind.name()))),
        },
        AlphaMethod::Quadrature => {
            if kind != MeasureKind::Disk {
                return Err(Error::InvalidParameter("quadrature is available for the disk measure only".into()));
            }
            let v = disk_quad::disk_alpha(query, budget.quad_tol)?;
            Ok(AlphaValue { value: v.value, std_error: v.error, method: AlphaMethod::Quadrature })
        }
        AlphaMethod::MonteCarlo => {
            let est = anchored::estimate(query, kind, &budget.mc, Weighting::Survival)?;
            Ok(est.to_alpha())
        }
    }
}

/// How each sampled Brownian loop is weighted relative to μ^loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Weighting {
    /// e^{−m̄²t} for massive loops, 1 otherwise.
    Survival,
    /// 1 − e^{−m̄²t}: the measure μ̂ = μ^loop − μ^m.
    Killed,
}

/// Monte Carlo α for several nested variants at once; see [`McEstimate`].
pub fn alpha_monte_carlo(query: &AlphaQuery, kind: MeasureKind, mc: &McBudget) -> Result<McEstimate> {
    kind.validate()?;
    query.validate()?;
    if let Some(msg) = query.divergence(kind) {
        return Err(Error::DivergentQuery(msg));
    }
    anchored::estimate(query, kind, mc, Weighting::Survival)
}

/// Region over which α̂ is taken.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum HatRegion {
    /// diam(γ) ≤ R.
    Radius(f64),
    /// γ ⊂ V.
    Ball(Ball),
}

/// α̂ estimate with its values at each δ-floor, finest last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaHat {
    pub value: AlphaValue,
    pub floors: Vec<f64>,
    pub by_floor: Vec<f64>,
}

/// α̂_{0,R}(z) or α̂_{0,V}(z): the μ̂-mass of loops covering z, where dμ̂ = (1 − e^{−m̄²t})dμ^loop.
///
/// One shared sample is evaluated at the floors `floor_max·2^{−k}`, k < `n_floors`;
/// the δ → 0 limit adds a Richardson step assuming the O(δ²) small-loop mass of μ̂.
pub fn alpha_hat(z: Point, region: HatRegion, mass_bound: f64, floor_max: f64, n_floors: usize, mc: &McBudget) -> Result<AlphaHat> {
    MeasureKind::massive(mass_bound)?;
    if !(floor_max > 0.0) || n_floors == 0 {
        return Err(Error::InvalidParameter("alpha_hat needs a positive floor and at least one level".into()));
    }
    let floors: Vec<f64> = (0..n_floors).map(|k| floor_max * 0.5f64.powi(k as i32)).collect();
    if mass_bound == 0.0 {
        return Ok(AlphaHat { value: AlphaValue::exact(0.0), by_floor: vec![0.0; n_floors], floors });
    }
    let finest = *floors.last().unwrap();
    let query = match region {
        HatRegion::Radius(r) => {
            if !(r > finest) {
                return Err(Error::InvalidParameter(format!("R = {r} must exceed the δ-floor {finest}")));
            }
            AlphaQuery::Annulus { z, delta: finest, r_max: r }
        }
        HatRegion::Ball(v) => AlphaQuery::InDomain { z, delta: finest, v },
    };
    query.validate()?;
    let kind = MeasureKind::Massive { mass_bound };
    let mut mc = mc.clone();
    mc.max_steps = mc.max_steps.min(8192);
    let est = anchored::estimate_with_floors(&query, kind, &mc, Weighting::Killed, &floors)?;
    let by_floor = est.by_floor.clone();
    let n = by_floor.len();
    let value = if n >= 2 { by_floor[n - 1] + (by_floor[n - 1] - by_floor[n - 2]) / 3.0 } else { by_floor[0] };
    Ok(AlphaHat {
        value: AlphaValue { value, std_error: est.std_error * if n >= 2 { 4.0 / 3.0 } else { 1.0 }, method: AlphaMethod::MonteCarlo },
        floors,
        by_floor,
    })
}

/// ₃F₂(1, 4/3, 1; 5/3, 2; 1).
pub fn hyp3f2_loop_at_one() -> f64 {
    hyp3f2_loop_integral(0.0)
}

/// Closed form of Ψ^loop(z, 𝔻) obtained from the diagonal limit of the ₃F₂ kernel:
/// (1/5)·log(1 + |z|) − ₃F₂(…; 1)/10.
pub fn psi_loop_disk_closed_form(z: Point) -> Result<f64> {
    let d = dist_to_boundary(z, &Domain::unit_disk())?;
    Ok(0.2 * (2.0 - d).ln() - hyp3f2_loop_at_one() / 10.0)
}

/// Ψ*(z, D) = μ*(z ∈ γ̄, γ ⊄ B(z, d_z), γ ⊂ D) − α*_{¬B(𝟘,1)}(𝟘 | 𝟙); for massive
/// loops α̂_{0,D}(z) is subtracted from Ψ^loop.
pub fn psi_star(z: Point, kind: MeasureKind, domain: &Domain, budget: &AlphaBudget) -> Result<AlphaValue> {
    kind.validate()?;
    let d = dist_to_boundary(z, domain)?;
    let dball = domain.bounding_ball();
    let near = AlphaQuery::NotInUInV { z, u: Ball::new(z, d), v: dball };
    let far = AlphaQuery::NotInVExclusive { z: Point::ORIGIN, w: Point::ONE, v: Ball::UNIT };
    match kind {
        MeasureKind::Disk => {
            let a = alpha(&near, kind, budget)?;
            let b = alpha(&far, kind, budget)?;
            Ok(AlphaValue { value: a.value - b.value, std_error: a.std_error + b.std_error, method: AlphaMethod::Quadrature })
        }
        MeasureKind::Loop => {
            let mut bb = budget.clone();
            bb.method = Some(AlphaMethod::MonteCarlo);
            let a = alpha(&near, kind, &bb)?;
            bb.mc.seed = crate::rng::derive_seed(bb.mc.seed, 1);
            let b = alpha(&far, kind, &bb)?;
            Ok(AlphaValue {
                value: a.value - b.value,
                std_error: a.std_error.hypot(b.std_error),
                method: AlphaMethod::MonteCarlo,
            })
        }
        MeasureKind::Massive { mass_bound } => {
            let base = psi_star(z, MeasureKind::Loop, domain, budget)?;
            let hat = alpha_hat(z, HatRegion::Ball(dball), mass_bound, 0.05, 3, &budget.mc)?;
            Ok(AlphaValue {
                value: base.value - hat.value.value,
                std_error: base.std_error.hypot(hat.value.std_error),
                method: AlphaMethod::MonteCarlo,
            })
        }
    }
}

/// Monte Carlo estimate of μ^loop(z ∈ γ̄, a < diam ≤ b, t_γ > T) and the bound b²/(2T).
///
/// The event is rare for T ≫ b², so the run stops after `mc.max_proposals` even
/// when fewer than `mc.accepted` loops were kept.
pub fn concentration_check(a: f64, b: f64, big_t: f64, mc: &McBudget) -> Result<(McEstimate, f64)> {
    if !(a > 0.0 && a <= b && big_t > 0.0 && b.is_finite() && big_t.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < a ≤ b and T > 0, got a={a}, b={b}, T={big_t}")));
    }
    let bound = b * b / (2.0 * big_t);
    if a == b {
        return Ok((McEstimate { value: 0.0, std_error: 0.0, accepted: 0, proposals: 0, by_floor: Vec::new() }, bound));
    }
    let q = AlphaQuery::Annulus { z: Point::ORIGIN, delta: a, r_max: b };
    let est = anchored::estimate_filtered(&q, MeasureKind::Loop, mc, Weighting::Survival, big_t)?;
    Ok((est, bound))
}

/// Upper bound on the expected number (per unit λ) of loops with diam ≥ δ and
/// duration below t_min rooted in a region of area `area`:
/// (area/2π)·∫₀^{t_min} 4e^{−δ²/(8t)} t^{−2} dt = (area/2π)·(32/δ²)·e^{−δ²/(8t_min)}.
pub fn truncation_bias_bound(area: f64, delta: f64, t_min: f64) -> f64 {
    area / (2.0 * PI) * 32.0 / (delta * delta) * (-delta * delta / (8.0 * t_min)).exp()
}

/// Monte Carlo α at the configured discretization and at twice the steps, for
/// quantifying polyline under-resolution.
pub fn steps_doubling_study(query: &AlphaQuery, kind: MeasureKind, mc: &McBudget) -> Result<(McEstimate, McEstimate)> {
    let base = alpha_monte_carlo(query, kind, mc)?;
    let mut fine = mc.clone();
    fine.step_scale *= 2.0;
    let doubled = alpha_monte_carlo(query, kind, &fine)?;
    Ok((base, doubled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn annulus_closed_forms() {
        let b = AlphaBudget::default();
        let q = AlphaQuery::Annulus { z: Point::ORIGIN, delta: 0.1, r_max: 1.0 };
        let v = alpha(&q, MeasureKind::Loop, &b).unwrap();
        assert_eq!(v.method, AlphaMethod::ClosedForm);
        assert_relative_eq!(v.value, 0.460_517_018_598_809, epsilon = 1e-12);
        let empty = AlphaQuery::Annulus { z: Point::ORIGIN, delta: 0.3, r_max: 0.3 };
        assert_eq!(alpha(&empty, MeasureKind::Disk, &b).unwrap().value, 0.0);
        let zero = AlphaQuery::Annulus { z: Point::ORIGIN, delta: 0.0, r_max: 0.3 };
        assert!(matches!(alpha(&zero, MeasureKind::Loop, &b), Err(Error::DivergentQuery(_))));
    }

    #[test]
    fn divergent_queries() {
        let b = AlphaBudget::default();
        let q = AlphaQuery::InDomain { z: Point::ORIGIN, delta: 0.0, v: Ball::UNIT };
        assert!(matches!(alpha(&q, MeasureKind::Disk, &b), Err(Error::DivergentQuery(_))));
        let q = AlphaQuery::NotInV { z: Point::ORIGIN, v: Ball::UNIT };
        assert!(matches!(alpha(&q, MeasureKind::Loop, &b), Err(Error::DivergentQuery(_))));
    }

    #[test]
    fn truncation_bound_matches_quadrature() {
        let (area, delta, t_min) = (PI, 0.2, 0.04 / 50.0);
        let f = |t: f64| if t <= 0.0 { 0.0 } else { 4.0 * (-delta * delta / (8.0 * t)).exp() / (t * t) };
        let q = crate::numerics::integrate_adaptive(f, 0.0, t_min, 0.0, 1e-12).value;
        assert_relative_eq!(truncation_bias_bound(area, delta, t_min), area / (2.0 * PI) * q, max_relative = 1e-9);
    }

    #[test]
    fn massive_kind_validation() {
        assert!(MeasureKind::massive(-1.0).is_err());
        assert_eq!(MeasureKind::massive(0.5).unwrap().mass_bound(), Some(0.5));
        assert_eq!(MeasureKind::Disk.eta(), PI);
    }
}
