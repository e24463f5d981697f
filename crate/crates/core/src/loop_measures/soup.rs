//! Poisson soups of marked loops with a diameter cutoff.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bridge::{dyadic_levels, levy_bridge, steps_for};
use super::disk_quad::disk_soup_mass;
use super::{Loop, LoopShape, MarkedLoop, MarkedSoup, MeasureKind};
use crate::error::{Error, Result};
use crate::geometry::{Ball, Domain, Point};
use crate::hull::{convex_hull, hull_diameter};
use crate::rng::stream_rng;

/// Parameters of a cutoff soup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoupParams {
    pub lambda: f64,
    pub delta: f64,
    pub measure: MeasureKind,
    pub domain: Domain,
    /// Duration floor for Brownian loops.
    pub t_min: f64,
    pub seed: u64,
    /// Keep only loops whose hull can meet B(𝟘, ρ).
    pub window: Option<f64>,
    /// Largest expected candidate count accepted before sampling.
    pub max_candidates: f64,
    pub max_steps: usize,
    pub step_scale: f64,
}

impl SoupParams {
    /// Soup in 𝔻 with t_min = δ²/50 and no window.
    pub fn new(lambda: f64, delta: f64, measure: MeasureKind, seed: u64) -> Self {
        SoupParams {
            lambda,
            delta,
            measure,
            domain: Domain::unit_disk(),
            t_min: delta * delta / 50.0,
            seed,
            window: None,
            max_candidates: 5e7,
            max_steps: 1 << 16,
            step_scale: 1.0,
        }
    }

    pub fn with_window(mut self, rho: f64) -> Self {
        self.window = Some(rho);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        self.measure.validate()?;
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("λ = {} must be positive", self.lambda)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("δ = {} must be positive", self.delta)));
        }
        if self.measure.is_brownian() && !(self.t_min > 0.0 && self.t_min <= self.delta * self.delta / 50.0 * (1.0 + 1e-12)) {
            return Err(Error::InvalidParameter(format!("t_min = {} must lie in (0, δ²/50]", self.t_min)));
        }
        if let Some(rho) = self.window {
            if !(rho > 0.0) {
                return Err(Error::InvalidParameter(format!("window radius {rho} must be positive")));
            }
        }
        Ok(())
    }
}

/// Samples the cutoff soup λ·μ*_D restricted to diam ≥ δ, with i.i.d. ±1 marks.
pub fn sample_soup(params: &SoupParams) -> Result<MarkedSoup> {
    sample_soup_in(params, params.domain.bounding_ball())
}

/// As [`sample_soup`], with loops confined to the ball `container` instead of the domain.
///
/// Brownian loops: Poisson(λ·ρ²/(2t_min)) candidates, root uniform in the
/// container, duration t = t_min/U, bridge kept iff it stays inside and has
/// diam ≥ δ; massive loops are further kept iff an Exp(1) clock exceeds m̄²t.
/// Each candidate has its own random stream and draws its clock whatever the
/// kind, so loop and massive soups with the same seed are coupled pathwise.
///
/// Disks: exact sampling from λ·dy·dr/r³ on {2r ≥ δ, B(y, r) ⊂ container}.
pub fn sample_soup_in(params: &SoupParams, container: Ball) -> Result<MarkedSoup> {
    params.validate()?;
    let mut loops = match params.measure {
        MeasureKind::Disk => sample_disks(params, container)?,
        _ => sample_brownian(params, container)?,
    };
    loops.sort_by(|a, b| {
        let (ka, kb) = (a.curve.sort_key(), b.curve.sort_key());
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(ka.2.total_cmp(&kb.2))
    });
    Ok(MarkedSoup { loops, params: params.clone() })
}

fn poisson_count(mean: f64, params: &SoupParams) -> Result<u64> {
    if mean > params.max_candidates {
        return Err(Error::CandidateBudgetExceeded { mass: mean, cap: params.max_candidates });
    }
    if mean <= 0.0 {
        return Ok(0);
    }
    let mut rng = stream_rng(params.seed, 0);
    let n: f64 = Poisson::new(mean).map_err(|e| Error::NumericalFailure(e.to_string()))?.sample(&mut rng);
    Ok(n as u64)
}

fn uniform_in_ball(rng: &mut ChaCha8Rng, b: Ball) -> Point {
    loop {
        let x = 2.0 * rng.random::<f64>() - 1.0;
        let y = 2.0 * rng.random::<f64>() - 1.0;
        if x * x + y * y < 1.0 {
            return Point::new(b.center.x + b.radius * x, b.center.y + b.radius * y);
        }
    }
}

fn random_mark(rng: &mut ChaCha8Rng) -> i8 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

fn bbox_meets_ball(bb: [f64; 4], c: Point, rho: f64) -> bool {
    let dx = (bb[0] - c.x).max(0.0).max(c.x - bb[1]);
    let dy = (bb[2] - c.y).max(0.0).max(c.y - bb[3]);
    dx * dx + dy * dy < rho * rho
}

fn sample_brownian(params: &SoupParams, container: Ball) -> Result<Vec<MarkedLoop>> {
    let rho = container.radius;
    if params.delta >= 2.0 * rho {
        return Ok(Vec::new());
    }
    let mean = params.lambda * rho * rho / (2.0 * params.t_min);
    let n = poisson_count(mean, params)?;
    let m2 = params.measure.mass_bound().map_or(0.0, |m| m * m);
    let r2 = rho * rho;
    let loops = (0..n)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = stream_rng(params.seed, i + 1);
            let root = uniform_in_ball(&mut rng, container);
            let u: f64 = 1.0 - rng.random::<f64>();
            let t = params.t_min / u;
            let clock: f64 = Exp1.sample(&mut rng);
            let mark = random_mark(&mut rng);
            if clock <= m2 * t {
                return None;
            }
            let steps = steps_for(t, params.delta, params.step_scale, params.max_steps);
            let shape = levy_bridge(&mut rng, t, dyadic_levels(steps), |p| (root + p).dist_sqr(container.center) < r2)?;
            let points: Vec<Point> = shape.into_iter().map(|p| root + p).collect();
            let d = hull_diameter(&convex_hull(&points));
            if d < params.delta {
                return None;
            }
            let curve = Loop::from_parts(LoopShape::Polyline(points), t, d);
            if let Some(w) = params.window {
                if !bbox_meets_ball(curve.bbox(), container.center, w) {
                    return None;
                }
            }
            Some(MarkedLoop { curve, mark })
        })
        .collect();
    Ok(loops)
}

fn sample_disks(params: &SoupParams, container: Ball) -> Result<Vec<MarkedLoop>> {
    let rho0 = container.radius;
    let r0 = params.delta / (2.0 * rho0);
    if r0 >= 1.0 {
        return Ok(Vec::new());
    }
    let window = params.window.map(|w| w / rho0);
    let mean = params.lambda * disk_soup_mass(2.0 * r0, window);
    let n = poisson_count(mean, params)?;
    let reach = |r: f64| match window {
        Some(w) => (1.0 - r).min(w + r),
        None => 1.0 - r,
    };
    let peak = match window {
        Some(w) if (1.0 - w) / 2.0 >= r0 => (1.0 + w) / 2.0,
        _ => reach(r0),
    };
    let inv0 = 1.0 / (r0 * r0);
    let loops = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(params.seed, i + 1);
            let r = loop {
                let u: f64 = rng.random();
                let r = 1.0 / (inv0 - u * (inv0 - 1.0)).sqrt();
                let a = reach(r) / peak;
                if rng.random::<f64>() < a * a {
                    break r;
                }
            };
            let y = uniform_in_ball(&mut rng, Ball::new(Point::ORIGIN, reach(r)));
            let mark = random_mark(&mut rng);
            let center = container.center + y * rho0;
            MarkedLoop { curve: Loop::from_parts(LoopShape::DiskBoundary { center, radius: r * rho0 }, 0.0, 2.0 * r * rho0), mark }
        })
        .collect();
    Ok(loops)
}
