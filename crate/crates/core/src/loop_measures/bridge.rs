//! Brownian bridge loops: a direct random-walk sampler and a dyadic (Lévy)
//! construction that can abandon a path as soon as a generated point fails a test.

use rand::Rng;
use rand_distr::StandardNormal;

use super::Loop;
use crate::error::{Error, Result};
use crate::geometry::Point;

/// Closed Brownian bridge of duration `t` rooted at `root`, sampled at the uniform
/// times k·t/steps as a Gaussian random walk minus its linear drift to the endpoint.
pub fn sample_brownian_bridge_loop<R: Rng + ?Sized>(root: Point, t: f64, steps: usize, rng: &mut R) -> Result<Loop> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("bridge duration t = {t} must be positive")));
    }
    if steps < 8 {
        return Err(Error::InvalidParameter(format!("bridge needs at least 8 steps, got {steps}")));
    }
    let sd = (t / steps as f64).sqrt();
    let mut walk = Vec::with_capacity(steps + 1);
    let (mut x, mut y) = (0.0, 0.0);
    walk.push((0.0, 0.0));
    for _ in 0..steps {
        x += sd * rng.sample::<f64, _>(StandardNormal);
        y += sd * rng.sample::<f64, _>(StandardNormal);
        walk.push((x, y));
    }
    let (ex, ey) = (x, y);
    let n = steps as f64;
    let mut pts: Vec<Point> = walk
        .iter()
        .enumerate()
        .map(|(k, &(wx, wy))| {
            let s = k as f64 / n;
            Point::new(root.x + wx - s * ex, root.y + wy - s * ey)
        })
        .collect();
    pts[steps] = root;
    Loop::polyline(pts, t)
}

/// Number of dyadic refinement levels L such that 8·2^L ≥ `steps`.
pub fn dyadic_levels(steps: usize) -> u32 {
    let mut l = 0;
    while 8usize << l < steps {
        l += 1;
    }
    l
}

/// Discretization rule for a loop of duration `t` resolved at spatial scale `delta`:
/// max(64, ⌈256·t/δ²⌉), rounded up to the dyadic size 8·2^L and capped at the
/// largest dyadic size not above `max_steps`.
pub fn steps_for(t: f64, delta: f64, step_scale: f64, max_steps: usize) -> usize {
    let raw = (256.0 * step_scale * t / (delta * delta)).ceil();
    let raw = if raw.is_finite() { raw.min(1e12) as usize } else { usize::MAX / 2 };
    let mut cap = 64usize;
    while cap * 2 <= max_steps {
        cap *= 2;
    }
    (8usize << dyadic_levels(raw.max(64))).min(cap)
}

/// Bridge of duration `t` rooted at the origin with 8·2^levels steps, built by
/// sampling 8 coarse points and then filling dyadic midpoints level by level.
///
/// `keep` sees every generated point; the first `false` abandons the path. Since
/// refinement only adds points, any test that is monotone under adding points
/// (staying in a set, bounded extent) is decided exactly.
pub(crate) fn levy_bridge<R: Rng + ?Sized>(
    rng: &mut R,
    t: f64,
    levels: u32,
    mut keep: impl FnMut(Point) -> bool,
) -> Option<Vec<Point>> {
    let n = 8usize << levels;
    let mut pts = vec![Point::ORIGIN; n + 1];
    let mut stride = n / 8;
    let coarse = 1.0 / 8.0;
    for k in 1..8 {
        let s_prev = (k - 1) as f64 * coarse;
        let s = k as f64 * coarse;
        let shrink = (1.0 - s) / (1.0 - s_prev);
        let sd = (t * coarse * shrink).sqrt();
        let prev = pts[(k - 1) * stride];
        let p = Point::new(
            prev.x * shrink + sd * rng.sample::<f64, _>(StandardNormal),
            prev.y * shrink + sd * rng.sample::<f64, _>(StandardNormal),
        );
        if !keep(p) {
            return None;
        }
        pts[k * stride] = p;
    }
    while stride > 1 {
        let h = stride as f64 / n as f64;
        let sd = (t * h / 4.0).sqrt();
        let half = stride / 2;
        let mut i = 0;
        while i < n {
            let (a, b) = (pts[i], pts[i + stride]);
            let p = Point::new(
                0.5 * (a.x + b.x) + sd * rng.sample::<f64, _>(StandardNormal),
                0.5 * (a.y + b.y) + sd * rng.sample::<f64, _>(StandardNormal),
            );
            if !keep(p) {
                return None;
            }
            pts[i + half] = p;
            i += stride;
        }
        stride = half;
    }
    Some(pts)
}
