//! Hulls of closed polylines: convex hull, diameter, winding number and a
//! rasterized filled hull (complement of the unbounded component).

use crate::error::{Error, Result};
use crate::geometry::Point;

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull in counter-clockwise order (Andrew's monotone chain), without a
/// repeated closing vertex. Collinear points are dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = if points.len() > 64 { outside_octagon(points) } else { points.to_vec() };
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Drops the points strictly inside the octagon spanned by the extreme points in
/// the directions x, y, x + y and x − y; none of them can be a hull vertex.
fn outside_octagon(points: &[Point]) -> Vec<Point> {
    let keys: [fn(Point) -> f64; 4] = [|p| p.x, |p| p.y, |p| p.x + p.y, |p| p.x - p.y];
    let mut ext = [Point::ORIGIN; 8];
    for (k, key) in keys.iter().enumerate() {
        let (mut lo, mut hi) = (points[0], points[0]);
        for &p in points {
            if key(p) < key(lo) {
                lo = p;
            }
            if key(p) > key(hi) {
                hi = p;
            }
        }
        ext[2 * k] = lo;
        ext[2 * k + 1] = hi;
    }
    let oct = convex_hull(&ext);
    if oct.len() < 3 {
        return points.to_vec();
    }
    let n = oct.len();
    let mut out: Vec<Point> = points
        .iter()
        .copied()
        .filter(|&p| !(0..n).all(|i| cross(oct[i], oct[(i + 1) % n], p) > 0.0))
        .collect();
    out.extend_from_slice(&oct);
    out
}

/// Maximal pairwise distance among the vertices of a convex polygon.
pub fn hull_diameter(hull: &[Point]) -> f64 {
    let n = hull.len();
    if n < 2 {
        return 0.0;
    }
    if n <= 64 {
        let mut best = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(hull[i].dist_sqr(hull[j]));
            }
        }
        return best.sqrt();
    }
    // rotating calipers
    let area2 = |i: usize, j: usize, k: usize| cross(hull[i], hull[j], hull[k]).abs();
    let mut best = 0.0f64;
    let mut j = 1;
    for i in 0..n {
        let i1 = (i + 1) % n;
        while area2(i, i1, (j + 1) % n) > area2(i, i1, j) {
            j = (j + 1) % n;
        }
        best = best.max(hull[i].dist_sqr(hull[j])).max(hull[i1].dist_sqr(hull[j]));
    }
    best.sqrt()
}

/// Euclidean diameter of a point set.
pub fn diameter(points: &[Point]) -> f64 {
    hull_diameter(&convex_hull(points))
}

/// Whether `z` lies in the closed convex polygon `hull` (counter-clockwise).
pub fn in_convex(hull: &[Point], z: Point) -> bool {
    let n = hull.len();
    if n < 3 {
        return false;
    }
    (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], z) >= 0.0)
}

/// Winding number of the closed polyline about `z`.
pub fn winding_number(poly: &[Point], z: Point) -> i32 {
    let mut w = 0;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if a.y <= z.y {
            if b.y > z.y && cross(a, b, z) > 0.0 {
                w += 1;
            }
        } else if b.y <= z.y && cross(a, b, z) < 0.0 {
            w -= 1;
        }
    }
    w
}

const OPEN: u8 = 0;
const WALL: u8 = 1;
const OUTSIDE: u8 = 2;

/// Filled hull of a closed polyline on a square raster.
///
/// The raster spans the bounding box inflated by one cell; wall cells are those
/// crossed by a segment, and every cell not reached by a 4-connected flood from
/// the border belongs to the hull.
#[derive(Clone, Debug)]
pub struct HullRaster {
    x0: f64,
    y0: f64,
    cell: f64,
    side: usize,
    bbox: [f64; 4],
    cells: Vec<u8>,
}

impl HullRaster {
    pub fn build(poly: &[Point], resolution: usize) -> Result<Self> {
        if resolution < 4 {
            return Err(Error::InvalidParameter(format!("raster resolution {resolution} < 4")));
        }
        let mut bbox = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for p in poly {
            bbox[0] = bbox[0].min(p.x);
            bbox[1] = bbox[1].max(p.x);
            bbox[2] = bbox[2].min(p.y);
            bbox[3] = bbox[3].max(p.y);
        }
        let (w, h) = (bbox[1] - bbox[0], bbox[3] - bbox[2]);
        if !(w > 0.0 && h > 0.0) {
            return Err(Error::DegenerateLoop);
        }
        let side = resolution;
        let cell = w.max(h) / (side - 2) as f64;
        let x0 = 0.5 * (bbox[0] + bbox[1]) - 0.5 * side as f64 * cell;
        let y0 = 0.5 * (bbox[2] + bbox[3]) - 0.5 * side as f64 * cell;
        let mut r = HullRaster { x0, y0, cell, side, bbox, cells: vec![OPEN; side * side] };
        let n = poly.len();
        for i in 0..n {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            r.draw_segment(a, b);
        }
        r.flood();
        Ok(r)
    }

    fn to_grid(&self, p: Point) -> (f64, f64) {
        ((p.x - self.x0) / self.cell, (p.y - self.y0) / self.cell)
    }

    fn clamp_index(&self, u: f64) -> i64 {
        (u.floor() as i64).clamp(0, self.side as i64 - 1)
    }

    fn mark(&mut self, ix: i64, iy: i64) {
        self.cells[iy as usize * self.side + ix as usize] = WALL;
    }

    /// Grid traversal of the cells crossed by segment a→b.
    fn draw_segment(&mut self, a: Point, b: Point) {
        let (u0, v0) = self.to_grid(a);
        let (u1, v1) = self.to_grid(b);
        let (mut ix, mut iy) = (self.clamp_index(u0), self.clamp_index(v0));
        let (ex, ey) = (self.clamp_index(u1), self.clamp_index(v1));
        self.mark(ix, iy);
        let (du, dv) = (u1 - u0, v1 - v0);
        let step_x = if du > 0.0 { 1 } else { -1 };
        let step_y = if dv > 0.0 { 1 } else { -1 };
        let mut t_max_x = if du > 0.0 {
            (ix as f64 + 1.0 - u0) / du
        } else if du < 0.0 {
            (u0 - ix as f64) / -du
        } else {
            f64::INFINITY
        };
        let mut t_max_y = if dv > 0.0 {
            (iy as f64 + 1.0 - v0) / dv
        } else if dv < 0.0 {
            (v0 - iy as f64) / -dv
        } else {
            f64::INFINITY
        };
        let t_dx = if du != 0.0 { 1.0 / du.abs() } else { f64::INFINITY };
        let t_dy = if dv != 0.0 { 1.0 / dv.abs() } else { f64::INFINITY };
        let steps = (ex - ix).abs() + (ey - iy).abs();
        for _ in 0..steps {
            if (ix, iy) == (ex, ey) {
                break;
            }
            if t_max_x < t_max_y {
                if ix == ex {
                    iy += step_y;
                    t_max_y += t_dy;
                } else {
                    ix += step_x;
                    t_max_x += t_dx;
                }
            } else if iy == ey {
                ix += step_x;
                t_max_x += t_dx;
            } else {
                iy += step_y;
                t_max_y += t_dy;
            }
            self.mark(ix, iy);
        }
        self.mark(ex, ey);
    }

    fn flood(&mut self) {
        let s = self.side;
        let mut stack: Vec<usize> = Vec::with_capacity(4 * s);
        let seed = |cells: &mut Vec<u8>, stack: &mut Vec<usize>, idx: usize| {
            if cells[idx] == OPEN {
                cells[idx] = OUTSIDE;
                stack.push(idx);
            }
        };
        for k in 0..s {
            seed(&mut self.cells, &mut stack, k);
            seed(&mut self.cells, &mut stack, (s - 1) * s + k);
            seed(&mut self.cells, &mut stack, k * s);
            seed(&mut self.cells, &mut stack, k * s + s - 1);
        }
        while let Some(idx) = stack.pop() {
            let (ix, iy) = (idx % s, idx / s);
            if ix > 0 {
                seed(&mut self.cells, &mut stack, idx - 1);
            }
            if ix + 1 < s {
                seed(&mut self.cells, &mut stack, idx + 1);
            }
            if iy > 0 {
                seed(&mut self.cells, &mut stack, idx - s);
            }
            if iy + 1 < s {
                seed(&mut self.cells, &mut stack, idx + s);
            }
        }
    }

    /// Whether `z` lies in the rasterized hull.
    pub fn covers(&self, z: Point) -> bool {
        if z.x < self.bbox[0] || z.x > self.bbox[1] || z.y < self.bbox[2] || z.y > self.bbox[3] {
            return false;
        }
        let (u, v) = self.to_grid(z);
        let (ix, iy) = (self.clamp_index(u) as usize, self.clamp_index(v) as usize);
        self.cells[iy * self.side + ix] != OUTSIDE
    }

    /// Area of the rasterized hull.
    pub fn covered_area(&self) -> f64 {
        let n = self.cells.iter().filter(|&&c| c != OUTSIDE).count();
        n as f64 * self.cell * self.cell
    }

    /// Bounding box of the polyline as (xmin, xmax, ymin, ymax).
    pub fn bbox(&self) -> [f64; 4] {
        self.bbox
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Point> {
        vec![Point::new(-1.0, -1.0), Point::new(1.0, -1.0), Point::new(1.0, 1.0), Point::new(-1.0, 1.0), Point::new(-1.0, -1.0)]
    }

    /// Outer circle counter-clockwise, inner circle clockwise: the inner disk has
    /// winding number 0 but is enclosed.
    fn pocket() -> Vec<Point> {
        let mut p = Vec::new();
        let m = 200;
        for k in 0..=m {
            p.push(Point::polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / m as f64));
        }
        for k in 0..=m {
            p.push(Point::polar(0.3, -2.0 * std::f64::consts::PI * k as f64 / m as f64));
        }
        p.push(Point::new(1.0, 0.0));
        p
    }

    #[test]
    fn square_covers_origin() {
        let sq = square();
        assert_eq!(winding_number(&sq, Point::ORIGIN), 1);
        let r = HullRaster::build(&sq, 256).unwrap();
        assert!(r.covers(Point::ORIGIN));
        assert!(!r.covers(Point::new(1.5, 0.0)));
        assert!((r.covered_area() - 4.0).abs() < 4.0 * 4.0 / 254.0 + 0.01);
    }

    #[test]
    fn pocket_is_in_hull_but_has_zero_winding() {
        let p = pocket();
        let z = Point::new(0.0, 0.05);
        assert_eq!(winding_number(&p, z), 0);
        assert!(HullRaster::build(&p, 1024).unwrap().covers(z));
        assert!(HullRaster::build(&p, 256).unwrap().covers(z));
    }

    #[test]
    fn degenerate() {
        let line = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 0.0)];
        assert!(matches!(HullRaster::build(&line, 256), Err(Error::DegenerateLoop)));
    }

    #[test]
    fn hull_and_diameter() {
        let pts: Vec<Point> = (0..500).map(|k| Point::polar(1.0 + 0.1 * (k % 7) as f64 / 7.0, k as f64 * 0.7)).collect();
        let h = convex_hull(&pts);
        let mut brute = 0.0f64;
        for a in &pts {
            for b in &pts {
                brute = brute.max(a.dist(*b));
            }
        }
        assert!((hull_diameter(&h) - brute).abs() < 1e-12);
        assert!(pts.iter().all(|p| in_convex(&h, *p)));
    }

    #[test]
    fn disk_area_converges() {
        let m = 4000;
        let c: Vec<Point> = (0..=m).map(|k| Point::polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / m as f64)).collect();
        let a = HullRaster::build(&c, 1024).unwrap().covered_area();
        assert!((a - std::f64::consts::PI).abs() < 0.02);
    }
}
