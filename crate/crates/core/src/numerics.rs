//! Quadrature rules and the exact area of an intersection of disks.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::geometry::{Ball, Point};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) integration over the partition given by
/// `breaks` (sorted, at least two entries). Bisects the worst piece until the summed
/// error estimate is below max(abs_tol, rel_tol·|value|) or `max_pieces` is reached.
pub fn integrate_adaptive_breaks(
    mut f: impl FnMut(f64) -> f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_pieces: usize,
) -> QuadResult {
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (v, e) = gk15(&mut f, w[0], w[1]);
            evaluations += 15;
            value += v;
            error += e;
            heap.push(Piece { a: w[0], b: w[1], value: v, error: e });
        }
    }
    while error > abs_tol.max(rel_tol * value.abs()) && heap.len() < max_pieces {
        let Some(p) = heap.pop() else { break };
        let m = 0.5 * (p.a + p.b);
        if !(m > p.a && m < p.b) {
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        evaluations += 30;
        value += v1 + v2 - p.value;
        error += e1 + e2 - p.error;
        heap.push(Piece { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Piece { a: m, b: p.b, value: v2, error: e2 });
    }
    // Re-sum to shed the drift of the running updates.
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum();
    QuadResult { value, error, evaluations }
}

pub fn integrate_adaptive(
    f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> QuadResult {
    integrate_adaptive_breaks(f, &[a, b], abs_tol, rel_tol, 4000)
}

/// Double-exponential quadrature of ∫₀¹ f(s) ds. The integrand receives both s and
/// 1 − s, each computed without cancellation, so endpoint singularities and
/// near-endpoint features are resolved.
pub fn tanh_sinh_unit(mut f: impl FnMut(f64, f64) -> f64, rel_tol: f64) -> QuadResult {
    const T_MAX: f64 = 4.5;
    let mut eval = |t: f64| -> f64 {
        let u = PI * t.sinh();
        let (s, sc) = if u >= 0.0 {
            let e = (-u).exp();
            (1.0 / (1.0 + e), e / (1.0 + e))
        } else {
            let e = u.exp();
            (e / (1.0 + e), 1.0 / (1.0 + e))
        };
        let w = PI * t.cosh() * s * sc;
        if w == 0.0 {
            0.0
        } else {
            f(s, sc) * w
        }
    };
    let mut evaluations = 0;
    let mut h = 0.5;
    let mut sum = eval(0.0);
    evaluations += 1;
    let mut k = 1;
    while k as f64 * h <= T_MAX {
        sum += eval(k as f64 * h) + eval(-(k as f64) * h);
        evaluations += 2;
        k += 1;
    }
    let mut value = sum * h;
    let mut error = f64::INFINITY;
    for _ in 0..10 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= T_MAX {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
            evaluations += 2;
            k += 2;
        }
        let next = sum * h;
        error = (next - value).abs();
        value = next;
        if error <= rel_tol * value.abs() {
            break;
        }
    }
    QuadResult { value, error, evaluations }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    (x.iter().map(|t| a + h * (t + 1.0)).collect(), w.iter().map(|v| v * h).collect())
}

fn normalize_angle(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * PI);
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

/// Intersects a sorted list of disjoint intervals in [0, 2π) with the circular arc
/// [lo, hi] (hi − lo < 2π).
fn intersect_arc(set: &[(f64, f64)], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let a = normalize_angle(lo);
    let b = a + (hi - lo);
    let mut parts = Vec::with_capacity(2);
    if b <= 2.0 * PI {
        parts.push((a, b));
    } else {
        parts.push((a, 2.0 * PI));
        parts.push((0.0, b - 2.0 * PI));
    }
    let mut out = Vec::new();
    for &(s0, s1) in set {
        for &(p0, p1) in &parts {
            let l = s0.max(p0);
            let r = s1.min(p1);
            if r > l {
                out.push((l, r));
            }
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

/// Exact area of the intersection of closed disks, by Green's theorem over the
/// boundary arcs of each disk that lie inside all the others.
pub fn intersection_area(disks: &[Ball]) -> f64 {
    if disks.is_empty() {
        return f64::INFINITY;
    }
    if disks.iter().any(|d| !(d.radius > 0.0)) {
        return 0.0;
    }
    // Drop duplicates so coincident circles are not counted twice.
    let mut ds: Vec<Ball> = Vec::with_capacity(disks.len());
    for d in disks {
        if !ds.iter().any(|e| {
            e.center.dist(d.center) <= 1e-15 * (1.0 + e.radius) && (e.radius - d.radius).abs() <= 1e-15 * e.radius
        }) {
            ds.push(*d);
        }
    }
    let mut area = 0.0;
    for (i, di) in ds.iter().enumerate() {
        let mut set = vec![(0.0, 2.0 * PI)];
        for (j, dj) in ds.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = di.center.dist(dj.center);
            if d >= di.radius + dj.radius {
                return 0.0;
            }
            if d + di.radius <= dj.radius {
                continue;
            }
            if d + dj.radius <= di.radius {
                set.clear();
                break;
            }
            let c = ((di.radius * di.radius + d * d - dj.radius * dj.radius) / (2.0 * di.radius * d)).clamp(-1.0, 1.0);
            let psi = c.acos();
            let phi = (dj.center.y - di.center.y).atan2(dj.center.x - di.center.x);
            set = intersect_arc(&set, phi - psi, phi + psi);
            if set.is_empty() {
                break;
            }
        }
        let (r, cx, cy) = (di.radius, di.center.x, di.center.y);
        for (a, b) in set {
            area += 0.5 * (r * r * (b - a) + r * cx * (b.sin() - a.sin()) - r * cy * (b.cos() - a.cos()));
        }
    }
    area.max(0.0)
}

/// Area of B(z, r) minus B(w, r) for two disks of equal radius r: 2r²·asin(d/2r) + (d/2)·√(4r² − d²).
pub fn equal_disk_difference_area(d: f64, r: f64) -> f64 {
    if d >= 2.0 * r {
        PI * r * r
    } else {
        2.0 * r * r * (d / (2.0 * r)).asin() + 0.5 * d * (4.0 * r * r - d * d).sqrt()
    }
}

/// Points are handy in tests of the area routine.
pub fn lens_area(a: Point, ra: f64, b: Point, rb: f64) -> f64 {
    let d = a.dist(b);
    if d >= ra + rb {
        return 0.0;
    }
    if d <= (ra - rb).abs() {
        let r = ra.min(rb);
        return PI * r * r;
    }
    let a1 = ((d * d + ra * ra - rb * rb) / (2.0 * d * ra)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + rb * rb - ra * ra) / (2.0 * d * rb)).clamp(-1.0, 1.0).acos();
    ra * ra * a1 + rb * rb * a2 - 0.5 * ((-d + ra + rb) * (d + ra - rb) * (d - ra + rb) * (d + ra + rb)).sqrt()
}

/// Mergeable running sums for the mean of complex samples.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ComplexMean {
    pub count: usize,
    pub sum: Complex64,
    pub sum_norm_sqr: f64,
}

impl ComplexMean {
    pub fn push(&mut self, x: Complex64) {
        self.count += 1;
        self.sum += x;
        self.sum_norm_sqr += x.norm_sqr();
    }

    pub fn merge(mut self, other: ComplexMean) -> ComplexMean {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_norm_sqr += other.sum_norm_sqr;
        self
    }

    pub fn mean(&self) -> Complex64 {
        if self.count == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            self.sum / self.count as f64
        }
    }

    /// Jackknife standard error of the mean, which for the sample mean reduces to
    /// sqrt(Σ|x − x̄|² / (n(n − 1))).
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        let n = self.count as f64;
        let ss = (self.sum_norm_sqr - self.sum.norm_sqr() / n).max(0.0);
        (ss / (n * (n - 1.0))).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gk_polynomial_and_smooth() {
        let r = integrate_adaptive(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14, 1e-14);
        assert_relative_eq!(r.value, 64.0 / 6.0 - 4.0, epsilon = 1e-12);
        let r = integrate_adaptive(|x| x.sqrt(), 0.0, 1.0, 1e-12, 1e-12);
        assert_relative_eq!(r.value, 2.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫ s^{-2/3}(1-s)^{-2/3} ds = B(1/3, 1/3)
        let r = tanh_sinh_unit(|s, c| s.powf(-2.0 / 3.0) * c.powf(-2.0 / 3.0), 1e-13);
        let exact = statrs::function::beta::beta(1.0 / 3.0, 1.0 / 3.0);
        assert_relative_eq!(r.value, exact, max_relative = 1e-11);
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert_relative_eq!(s, 2.0 / 19.0, epsilon = 1e-14);
    }

    #[test]
    fn two_disk_intersection_matches_lens_formula() {
        let cases = [(0.0, 0.3, 1.0, 0.8, 0.5), (0.1, -0.2, 0.4, 0.2, 0.35), (0.0, 0.0, 2.0, 0.5, 0.5)];
        for (ax, ay, ra, bx, rb) in cases {
            let a = Point::new(ax, ay);
            let b = Point::new(bx, 0.1);
            let got = intersection_area(&[Ball::new(a, ra), Ball::new(b, rb)]);
            assert_relative_eq!(got, lens_area(a, ra, b, rb), epsilon = 1e-13);
        }
        // nested
        let got = intersection_area(&[Ball::new(Point::ORIGIN, 1.0), Ball::new(Point::new(0.2, 0.1), 0.3)]);
        assert_relative_eq!(got, PI * 0.09, epsilon = 1e-14);
    }

    #[test]
    fn equal_radius_difference() {
        let r = 0.9;
        let d = 1.0;
        let lens = lens_area(Point::ORIGIN, r, Point::new(d, 0.0), r);
        assert_relative_eq!(equal_disk_difference_area(d, r), PI * r * r - lens, epsilon = 1e-13);
    }

    #[test]
    fn complex_mean_matches_leave_one_out_jackknife() {
        let xs: Vec<Complex64> = (0..9).map(|k| Complex64::new((k as f64).sin(), (k * k) as f64 / 7.0)).collect();
        let mut a = ComplexMean::default();
        let mut b = ComplexMean::default();
        for (k, x) in xs.iter().enumerate() {
            if k < 4 { a.push(*x) } else { b.push(*x) }
        }
        let m = a.merge(b);
        let n = xs.len() as f64;
        let total: Complex64 = xs.iter().sum();
        let mean = total / n;
        let jk: f64 = xs.iter().map(|x| ((total - x) / (n - 1.0) - mean).norm_sqr()).sum::<f64>() * (n - 1.0) / n;
        assert!((m.mean() - mean).norm() < 1e-14);
        assert!((m.std_error() - jk.sqrt()).abs() < 1e-12);
    }
}
