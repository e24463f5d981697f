//! Monte Carlo α by sampling loops anchored at the covered point.
//!
//! A loop is drawn as (shape, scale): the scale τ = log t (or log r for disks)
//! comes from a proposal density g over the range that can meet the query's
//! diameter band, the shape is a bridge rooted at the origin, and the loop is then
//! translated so that z falls at a uniform offset v inside the ball of radius
//! diam(shape) around the root. With the loop measure dy·dt/(2πt²) this gives every
//! draw the weight diam²/(2t·g(τ)), times the survival factor of massive loops.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bridge::{dyadic_levels, levy_bridge, steps_for};
use super::{AlphaMethod, AlphaQuery, AlphaValue, McBudget, MeasureKind, Weighting};
use crate::error::{Error, Result};
use crate::geometry::{Ball, Point};
use crate::hull::{convex_hull, hull_diameter, in_convex, HullRaster};
use crate::rng::stream_rng;

/// A Monte Carlo α estimate. `by_floor[k]` is the estimate with the lower diameter
/// bound replaced by `floors[k]` on the same draws (only for floor studies).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub accepted: usize,
    pub proposals: u64,
    pub by_floor: Vec<f64>,
}

impl McEstimate {
    pub fn to_alpha(&self) -> AlphaValue {
        AlphaValue { value: self.value, std_error: self.std_error, method: AlphaMethod::MonteCarlo }
    }

    fn zero(n_floors: usize) -> Self {
        McEstimate { value: 0.0, std_error: 0.0, accepted: 0, proposals: 0, by_floor: vec![0.0; n_floors] }
    }
}

/// The query as constraints on an anchored loop.
#[derive(Clone, Debug)]
struct Criteria {
    z: Point,
    lo: f64,
    hi: f64,
    inside: Option<Ball>,
    not_inside: Option<Ball>,
    covered: Option<Point>,
    uncovered: Option<Point>,
    min_time: f64,
}

fn criteria(q: &AlphaQuery) -> Criteria {
    let base = |z: Point, lo: f64, hi: f64| Criteria {
        z,
        lo,
        hi,
        inside: None,
        not_inside: None,
        covered: None,
        uncovered: None,
        min_time: 0.0,
    };
    match *q {
        AlphaQuery::Annulus { z, delta, r_max } => base(z, delta, r_max),
        AlphaQuery::InDomain { z, delta, v } => Criteria { inside: Some(v), ..base(z, delta, 2.0 * v.radius) },
        AlphaQuery::TwoPointBand { z, w, delta_lo, delta_hi, v } => Criteria {
            inside: Some(v),
            covered: Some(w),
            ..base(z, delta_lo.max(z.dist(w)), delta_hi.min(2.0 * v.radius))
        },
        AlphaQuery::NotInUInV { z, u, v } => Criteria {
            inside: Some(v),
            not_inside: Some(u),
            ..base(z, (u.radius - z.dist(u.center)).max(0.0), 2.0 * v.radius)
        },
        AlphaQuery::TwoPointDomain { z, t, delta, v } => Criteria {
            inside: Some(v),
            covered: if t == z { None } else { Some(t) },
            ..base(z, delta.max(z.dist(t)), 2.0 * v.radius)
        },
        AlphaQuery::Exclusive { z, t, delta, v } => {
            Criteria { inside: Some(v), uncovered: Some(t), ..base(z, delta, 2.0 * v.radius) }
        }
        AlphaQuery::NotInV { z, v } => {
            Criteria { not_inside: Some(v), ..base(z, (v.radius - z.dist(v.center)).max(0.0), f64::INFINITY) }
        }
        AlphaQuery::NotInVExclusive { z, w, v } => Criteria {
            not_inside: Some(v),
            uncovered: Some(w),
            ..base(z, (v.radius - z.dist(v.center)).max(0.0), f64::INFINITY)
        },
    }
}

/// Proposal density for the log-scale τ: uniform on [τ_lo, τ_mid], followed, when
/// the band is unbounded, by an exponential tail of rate 1/4 carrying half the mass.
#[derive(Clone, Copy, Debug)]
struct ScaleProposal {
    lo: f64,
    mid: f64,
    tail: bool,
}

const TAIL_RATE: f64 = 0.25;

impl ScaleProposal {
    fn sample(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let width = self.mid - self.lo;
        if !self.tail {
            return (self.lo + width * rng.random::<f64>(), 1.0 / width);
        }
        if rng.random::<f64>() < 0.5 {
            (self.lo + width * rng.random::<f64>(), 0.5 / width)
        } else {
            let e: f64 = Exp::new(TAIL_RATE).unwrap().sample(rng);
            (self.mid + e, 0.5 * TAIL_RATE * (-TAIL_RATE * e).exp())
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Acc {
    sum: f64,
    sum_sq: f64,
    accepted: usize,
    proposals: u64,
    floors: Vec<f64>,
}

impl Acc {
    fn new(n: usize) -> Self {
        Acc { floors: vec![0.0; n], ..Default::default() }
    }

    fn merge(mut self, o: Acc) -> Acc {
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.accepted += o.accepted;
        self.proposals += o.proposals;
        for (a, b) in self.floors.iter_mut().zip(o.floors) {
            *a += b;
        }
        self
    }
}

fn mass_weight(kind: MeasureKind, weighting: Weighting, t: f64) -> f64 {
    let m2 = kind.mass_bound().map_or(0.0, |m| m * m);
    match weighting {
        Weighting::Survival => (-m2 * t).exp(),
        Weighting::Killed => -(-m2 * t).exp_m1(),
    }
}

/// A sampled bridge shape rooted at the origin, with lazily built raster.
struct Shape {
    points: Vec<Point>,
    hull: Vec<Point>,
    raster: Option<HullRaster>,
    resolution: usize,
    failed: bool,
}

impl Shape {
    fn covers(&mut self, p: Point) -> bool {
        if !in_convex(&self.hull, p) {
            return false;
        }
        if self.raster.is_none() && !self.failed {
            match HullRaster::build(&self.points, self.resolution) {
                Ok(r) => self.raster = Some(r),
                Err(_) => self.failed = true,
            }
        }
        self.raster.as_ref().is_some_and(|r| r.covers(p))
    }
}

const CHUNK: u64 = 128;
const BATCH: u64 = 16;

fn chunk_brownian(c: &Criteria, kind: MeasureKind, mc: &McBudget, weighting: Weighting, floors: &[f64], chunk: u64) -> Acc {
    let mut rng = stream_rng(mc.seed, chunk);
    let tau_lo = (c.lo * c.lo / 50.0).ln().max(if c.min_time > 0.0 { c.min_time.ln() } else { f64::NEG_INFINITY });
    let prop = if c.hi.is_finite() {
        ScaleProposal { lo: tau_lo, mid: (8.0 * c.hi * c.hi).ln().max(tau_lo + 1.0), tail: false }
    } else {
        ScaleProposal { lo: tau_lo, mid: (8.0 * 16.0 * c.lo * c.lo).ln(), tail: true }
    };
    let k = mc.draws_per_shape.max(1);
    let mut acc = Acc::new(floors.len());
    for _ in 0..CHUNK {
        acc.proposals += 1;
        let (tau, g) = prop.sample(&mut rng);
        let t = tau.exp();
        let steps = steps_for(t, c.lo, mc.step_scale, mc.max_steps);
        let hi = c.hi;
        let mut bb = [0.0f64; 4];
        let shape = levy_bridge(&mut rng, t, dyadic_levels(steps), |p| {
            bb = [bb[0].min(p.x), bb[1].max(p.x), bb[2].min(p.y), bb[3].max(p.y)];
            (bb[1] - bb[0]).max(bb[3] - bb[2]) <= hi
        });
        let Some(points) = shape else { continue };
        let hull = convex_hull(&points);
        let d = hull_diameter(&hull);
        if d < c.lo || d > c.hi {
            continue;
        }
        acc.accepted += 1;
        if t <= c.min_time {
            continue;
        }
        let w_draw = d * d / (2.0 * t * g) / k as f64 * mass_weight(kind, weighting, t);
        let mut shape = Shape { points, hull, raster: None, resolution: mc.raster_resolution, failed: false };
        let mut x = 0.0;
        for _ in 0..k {
            let v = uniform_in_disk(&mut rng, d);
            if !anchored_draw_ok(c, &mut shape, v) {
                continue;
            }
            x += w_draw;
        }
        acc.sum += x;
        acc.sum_sq += x * x;
        for (f, s) in floors.iter().zip(acc.floors.iter_mut()) {
            if d >= *f {
                *s += x;
            }
        }
    }
    acc
}

fn uniform_in_disk(rng: &mut ChaCha8Rng, radius: f64) -> Point {
    loop {
        let x = 2.0 * rng.random::<f64>() - 1.0;
        let y = 2.0 * rng.random::<f64>() - 1.0;
        if x * x + y * y <= 1.0 {
            return Point::new(radius * x, radius * y);
        }
    }
}

/// With the root at y = z − v, test the query constraints on the translated shape.
fn anchored_draw_ok(c: &Criteria, shape: &mut Shape, v: Point) -> bool {
    if !in_convex(&shape.hull, v) {
        return false;
    }
    let y = c.z - v;
    if let Some(b) = c.inside {
        let r2 = b.radius * b.radius;
        if !shape.hull.iter().all(|h| (y + *h).dist_sqr(b.center) < r2) {
            return false;
        }
    }
    if let Some(b) = c.not_inside {
        let r2 = b.radius * b.radius;
        if shape.hull.iter().all(|h| (y + *h).dist_sqr(b.center) < r2) {
            return false;
        }
    }
    if let Some(w) = c.covered {
        if !shape.covers(w - y) {
            return false;
        }
    }
    if !shape.covers(v) {
        return false;
    }
    if let Some(w) = c.uncovered {
        if shape.covers(w - y) {
            return false;
        }
    }
    true
}

fn chunk_disk(c: &Criteria, mc: &McBudget, floors: &[f64], chunk: u64) -> Acc {
    let mut rng = stream_rng(mc.seed, chunk);
    let lo = (c.lo / 2.0).ln();
    let prop = if c.hi.is_finite() {
        ScaleProposal { lo, mid: (c.hi / 2.0).ln(), tail: false }
    } else {
        ScaleProposal { lo, mid: (4.0 * c.lo).ln(), tail: true }
    };
    let k = mc.draws_per_shape.max(1);
    let mut acc = Acc::new(floors.len());
    for _ in 0..CHUNK {
        acc.proposals += 1;
        let (tau, g) = prop.sample(&mut rng);
        let r = tau.exp();
        acc.accepted += 1;
        let w_draw = PI / g / k as f64;
        let mut x = 0.0;
        for _ in 0..k {
            let center = c.z - uniform_in_disk(&mut rng, r);
            if let Some(b) = c.inside {
                if center.dist(b.center) + r >= b.radius {
                    continue;
                }
            }
            if let Some(b) = c.not_inside {
                if center.dist(b.center) + r < b.radius {
                    continue;
                }
            }
            if c.covered.is_some_and(|w| w.dist(center) > r) || c.uncovered.is_some_and(|w| w.dist(center) <= r) {
                continue;
            }
            x += w_draw;
        }
        acc.sum += x;
        acc.sum_sq += x * x;
        for (f, s) in floors.iter().zip(acc.floors.iter_mut()) {
            if 2.0 * r >= *f {
                *s += x;
            }
        }
    }
    acc
}

fn run(c: &Criteria, kind: MeasureKind, mc: &McBudget, weighting: Weighting, floors: &[f64]) -> Result<McEstimate> {
    if !(c.lo > 0.0) {
        return Err(Error::DivergentQuery("Monte Carlo query needs a positive lower diameter".into()));
    }
    if c.lo >= c.hi {
        return Ok(McEstimate::zero(floors.len()));
    }
    if mc.accepted == 0 {
        return Err(Error::InvalidParameter("Monte Carlo budget needs accepted > 0".into()));
    }
    let mut total = Acc::new(floors.len());
    let mut next_chunk = 0u64;
    while total.accepted < mc.accepted {
        if total.proposals >= mc.max_proposals {
            // Duration-filtered events can be too rare to ever reach the target; the
            // proposal count then fixes the sample size.
            if c.min_time > 0.0 {
                break;
            }
            return Err(Error::BudgetExceeded(format!(
                "{} accepted loops after {} proposals (target {})",
                total.accepted, total.proposals, mc.accepted
            )));
        }
        let batch: Acc = (next_chunk..next_chunk + BATCH)
            .into_par_iter()
            .map(|ch| match kind {
                MeasureKind::Disk => chunk_disk(c, mc, floors, ch),
                _ => chunk_brownian(c, kind, mc, weighting, floors, ch),
            })
            .reduce(|| Acc::new(floors.len()), Acc::merge);
        next_chunk += BATCH;
        total = total.merge(batch);
    }
    let n = total.proposals as f64;
    let mean = total.sum / n;
    let var = (total.sum_sq / n - mean * mean).max(0.0);
    Ok(McEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        accepted: total.accepted,
        proposals: total.proposals,
        by_floor: total.floors.iter().map(|s| s / n).collect(),
    })
}

pub(super) fn estimate(q: &AlphaQuery, kind: MeasureKind, mc: &McBudget, weighting: Weighting) -> Result<McEstimate> {
    run(&criteria(q), kind, mc, weighting, &[])
}

pub(super) fn estimate_with_floors(
    q: &AlphaQuery,
    kind: MeasureKind,
    mc: &McBudget,
    weighting: Weighting,
    floors: &[f64],
) -> Result<McEstimate> {
    run(&criteria(q), kind, mc, weighting, floors)
}

pub(super) fn estimate_filtered(
    q: &AlphaQuery,
    kind: MeasureKind,
    mc: &McBudget,
    weighting: Weighting,
    min_time: f64,
) -> Result<McEstimate> {
    let mut c = criteria(q);
    c.min_time = min_time;
    run(&c, kind, mc, weighting, &[])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(accepted: usize) -> McBudget {
        McBudget { accepted, seed: 3, ..Default::default() }
    }

    #[test]
    fn disk_annulus_matches_closed_form() {
        let q = AlphaQuery::Annulus { z: Point::new(0.1, 0.0), delta: 0.2, r_max: 0.8 };
        let e = estimate(&q, MeasureKind::Disk, &budget(20_000), Weighting::Survival).unwrap();
        let exact = PI * 4f64.ln();
        assert!((e.value - exact).abs() < 4.0 * e.std_error + 1e-12, "{e:?} vs {exact}");
    }

    #[test]
    fn disk_domain_matches_quadrature() {
        let q = AlphaQuery::InDomain { z: Point::ORIGIN, delta: 1.0, v: Ball::UNIT };
        let e = estimate(&q, MeasureKind::Disk, &budget(40_000), Weighting::Survival).unwrap();
        let exact = PI * (2f64.ln() - 0.5);
        assert!((e.value - exact).abs() < 4.0 * e.std_error, "{e:?} vs {exact}");
    }

    #[test]
    fn deterministic_given_seed() {
        let q = AlphaQuery::Annulus { z: Point::ORIGIN, delta: 0.2, r_max: 0.4 };
        let a = estimate(&q, MeasureKind::Loop, &budget(300), Weighting::Survival).unwrap();
        let b = estimate(&q, MeasureKind::Loop, &budget(300), Weighting::Survival).unwrap();
        assert_eq!(a, b);
    }
}
