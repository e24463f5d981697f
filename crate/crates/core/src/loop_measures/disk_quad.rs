//! Disk-measure α by quadrature.
//!
//! A disk B(y, r) covers z iff y ∈ B(z, r) and lies in B(c, ρ) iff y ∈ B(c, ρ − r), so
//! for fixed r every query is an area of a Boolean combination of disks in the
//! y-plane, computed exactly. What remains is ∫ area(r)·r⁻³ dr, done adaptively in
//! log r with breakpoints at the radii where two of the disks become tangent.

use std::f64::consts::PI;

use super::AlphaQuery;
use crate::error::{Error, Result};
use crate::geometry::{Ball, Point};
use crate::numerics::{equal_disk_difference_area, integrate_adaptive_breaks, intersection_area, QuadResult};

/// The disk B(c, a + s·r) in the y-plane.
#[derive(Clone, Copy, Debug)]
struct RBall {
    c: Point,
    a: f64,
    s: f64,
}

impl RBall {
    fn covering(z: Point) -> Self {
        RBall { c: z, a: 0.0, s: 1.0 }
    }

    fn inside(v: Ball) -> Self {
        RBall { c: v.center, a: v.radius, s: -1.0 }
    }

    fn at(&self, r: f64) -> Ball {
        Ball::new(self.c, self.a + self.s * r)
    }
}

/// {y ∈ ∩pos ∖ ∪neg} for r in [lo, hi].
struct Region {
    pos: Vec<RBall>,
    neg: Vec<RBall>,
    lo: f64,
    hi: f64,
}

impl Region {
    fn area(&self, r: f64) -> f64 {
        let pos: Vec<Ball> = self.pos.iter().map(|b| b.at(r)).collect();
        if pos.iter().any(|b| b.radius <= 0.0) {
            return 0.0;
        }
        let neg: Vec<Ball> = self.neg.iter().map(|b| b.at(r)).filter(|b| b.radius > 0.0).collect();
        let mut total = 0.0;
        for mask in 0u32..(1 << neg.len()) {
            let mut set = pos.clone();
            for (k, b) in neg.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    set.push(*b);
                }
            }
            let a = intersection_area(&set);
            if mask.count_ones() % 2 == 0 {
                total += a;
            } else {
                total -= a;
            }
        }
        total.max(0.0)
    }

    /// Radii in (lo, hi) where two boundary circles become tangent or a radius vanishes.
    fn breakpoints(&self) -> Vec<f64> {
        let all: Vec<RBall> = self.pos.iter().chain(&self.neg).copied().collect();
        let mut out = Vec::new();
        let mut push = |r: f64| {
            if r.is_finite() && r > self.lo && r < self.hi {
                out.push(r);
            }
        };
        for b in &all {
            if b.s != 0.0 {
                push(-b.a / b.s);
            }
        }
        for (i, p) in all.iter().enumerate() {
            for q in &all[i + 1..] {
                let d = p.c.dist(q.c);
                // d = (a₁ + a₂) + (s₁ + s₂)r and d = ±((a₁ − a₂) + (s₁ − s₂)r)
                let ss = p.s + q.s;
                if ss != 0.0 {
                    push((d - p.a - q.a) / ss);
                }
                let sd = p.s - q.s;
                if sd != 0.0 {
                    push((d - (p.a - q.a)) / sd);
                    push((-d - (p.a - q.a)) / sd);
                }
            }
        }
        out
    }

    fn integrate(&self, tol: f64) -> QuadResult {
        let mut pts: Vec<f64> = vec![self.lo, self.hi];
        pts.extend(self.breakpoints());
        let mut logs: Vec<f64> = pts.iter().map(|r| r.ln()).collect();
        logs.sort_by(f64::total_cmp);
        logs.dedup();
        integrate_adaptive_breaks(
            |u| {
                let r = u.exp();
                self.area(r) / (r * r)
            },
            &logs,
            tol,
            tol,
            20_000,
        )
    }
}

/// μ^disk of a query, with its quadrature error estimate.
pub(super) fn disk_alpha(query: &AlphaQuery, tol: f64) -> Result<QuadResult> {
    let exact = |v: f64| QuadResult { value: v, error: 0.0, evaluations: 0 };
    let region = match *query {
        AlphaQuery::Annulus { delta, r_max, .. } => {
            if delta == r_max {
                return Ok(exact(0.0));
            }
            let r = Region { pos: vec![RBall::covering(Point::ORIGIN)], neg: vec![], lo: delta / 2.0, hi: r_max / 2.0 };
            return Ok(r.integrate(tol));
        }
        AlphaQuery::InDomain { z, delta, v } => {
            Region { pos: vec![RBall::covering(z), RBall::inside(v)], neg: vec![], lo: delta / 2.0, hi: v.radius }
        }
        AlphaQuery::TwoPointBand { z, w, delta_lo, delta_hi, v } => Region {
            pos: vec![RBall::covering(z), RBall::covering(w), RBall::inside(v)],
            neg: vec![],
            lo: (delta_lo / 2.0).max(z.dist(w) / 2.0),
            hi: (delta_hi / 2.0).min(v.radius),
        },
        AlphaQuery::NotInUInV { z, u, v } => Region {
            pos: vec![RBall::covering(z), RBall::inside(v)],
            neg: vec![RBall::inside(u)],
            lo: ((u.radius - z.dist(u.center)) / 2.0).max(0.0),
            hi: v.radius,
        },
        AlphaQuery::TwoPointDomain { z, t, delta, v } => Region {
            pos: vec![RBall::covering(z), RBall::covering(t), RBall::inside(v)],
            neg: vec![],
            lo: (delta / 2.0).max(z.dist(t) / 2.0),
            hi: v.radius,
        },
        AlphaQuery::Exclusive { z, t, delta, v } => Region {
            pos: vec![RBall::covering(z), RBall::inside(v)],
            neg: vec![RBall::covering(t)],
            lo: delta / 2.0,
            hi: v.radius,
        },
        AlphaQuery::NotInV { .. } => {
            return Err(Error::DivergentQuery("disk loops covering z and leaving V have infinite mass".into()))
        }
        AlphaQuery::NotInVExclusive { z, w, v } => {
            let d = z.dist(w);
            let lo = ((v.radius - z.dist(v.center)) / 2.0).max(0.0);
            let big = 2.0 * (v.radius + z.dist(v.center) + d);
            let near = Region { pos: vec![RBall::covering(z)], neg: vec![RBall::covering(w), RBall::inside(v)], lo, hi: big };
            let a = near.integrate(tol);
            let tail = tail_closed_form(d, big, tol);
            return Ok(QuadResult { value: a.value + tail.value, error: a.error + tail.error, evaluations: a.evaluations + tail.evaluations });
        }
    };
    if !(region.lo > 0.0) {
        return Err(Error::DivergentQuery(format!("{query:?} includes arbitrarily small disks")));
    }
    if region.hi <= region.lo {
        return Ok(exact(0.0));
    }
    Ok(region.integrate(tol))
}

/// ∫_R^∞ area(B(z, r) ∖ B(w, r))·r⁻³ dr with the equal-disk closed form, in s = 1/r.
fn tail_closed_form(d: f64, big: f64, tol: f64) -> QuadResult {
    integrate_adaptive_breaks(
        |s| if s <= 0.0 { 2.0 * d } else { equal_disk_difference_area(d, 1.0 / s) * s },
        &[0.0, 1.0 / big],
        tol,
        tol,
        2000,
    )
}

/// μ^disk_{ℝ²}(z ∈ γ̄, w ∉ γ̄, r_min ≤ radius ≤ r_max), from general disk-intersection areas.
pub fn disk_exclusive_tail(z: Point, w: Point, r_min: f64, r_max: f64) -> f64 {
    let r = Region { pos: vec![RBall::covering(z)], neg: vec![RBall::covering(w)], lo: r_min, hi: r_max };
    r.integrate(1e-12).value
}

/// Expected number (per unit λ) of disks B(y, r) ⊂ 𝔻 with 2r ≥ δ, and, when a
/// window ρ is given, meeting B(𝟘, ρ): ∫ π·min(1 − r, ρ + r)²·r⁻³ dr over [δ/2, 1].
pub fn disk_soup_mass(delta: f64, window: Option<f64>) -> f64 {
    let r0 = delta / 2.0;
    if r0 >= 1.0 {
        return 0.0;
    }
    // antiderivatives of (1 − r)²/r³ and (ρ + r)²/r³
    let g_in = |r: f64| -1.0 / (2.0 * r * r) + 2.0 / r + r.ln();
    let g_win = |rho: f64, r: f64| -rho * rho / (2.0 * r * r) - 2.0 * rho / r + r.ln();
    match window {
        None => PI * (g_in(1.0) - g_in(r0)),
        Some(rho) => {
            let split = ((1.0 - rho) / 2.0).clamp(r0, 1.0);
            PI * (g_win(rho, split) - g_win(rho, r0) + g_in(1.0) - g_in(split))
        }
    }
}
