//! Special functions: the ₃F₂ of the disk loop kernel and Bessel functions of the first kind.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::numerics::tanh_sinh_unit;

/// Series of ₃F₂(a₁, a₂, a₃; b₁, b₂; x) for 0 ≤ x < 1.
///
/// Terms are summed until they drop below 1e−14 of the partial sum. For x > 0.95 the
/// partial sums are additionally passed through iterated Aitken Δ².
pub fn hyp3f2(a: [f64; 3], b: [f64; 2], x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::OutOfDomain(x));
    }
    const MAX_TERMS: usize = 1_000_000;
    let accelerate = x > 0.95;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut window: Vec<f64> = Vec::with_capacity(8);
    let mut previous = f64::NAN;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        term *= (a[0] + kf) * (a[1] + kf) * (a[2] + kf) / ((b[0] + kf) * (b[1] + kf) * (kf + 1.0)) * x;
        sum += term;
        if term.abs() < 1e-14 * sum.abs() {
            break;
        }
        if accelerate {
            if window.len() == 7 {
                window.remove(0);
            }
            window.push(sum);
            if window.len() == 7 {
                let acc = iterated_aitken(&window);
                if (acc - previous).abs() < 1e-15 * acc.abs() {
                    return Ok(acc);
                }
                previous = acc;
            }
        }
    }
    Ok(sum)
}

/// Repeated Aitken Δ² on a sequence of partial sums.
pub fn iterated_aitken(seq: &[f64]) -> f64 {
    let mut s = seq.to_vec();
    while s.len() >= 3 {
        let mut next = Vec::with_capacity(s.len() - 2);
        for i in 0..s.len() - 2 {
            let d1 = s[i + 2] - s[i + 1];
            let d2 = s[i + 2] - 2.0 * s[i + 1] + s[i];
            let v = s[i + 2] - d1 * d1 / d2;
            next.push(if d2 != 0.0 && v.is_finite() { v } else { s[i + 2] });
        }
        s = next;
    }
    *s.last().unwrap()
}

const LOOP_A: [f64; 3] = [1.0, 4.0 / 3.0, 1.0];
const LOOP_B: [f64; 2] = [5.0 / 3.0, 2.0];

/// ₃F₂(1, 4/3, 1; 5/3, 2; x) by its power series.
pub fn hyp3f2_series(x: f64) -> Result<f64> {
    hyp3f2(LOOP_A, LOOP_B, x)
}

/// ₃F₂(1, 4/3, 1; 5/3, 2; 1 − σ) for σ ∈ (0, 1], with σ passed directly so that
/// arguments within 1e−12 of 1 keep their digits.
///
/// Uses the series for 1 − σ ≤ 0.95 and otherwise the Euler-type representation
/// C·∫₀¹ s^{−2/3}(1 − s)^{−2/3}·(−ln(1 − xs)/x) ds with C = Γ(5/3)/(Γ(4/3)Γ(1/3)),
/// integrated by double-exponential quadrature.
pub fn hyp3f2_loop_complement(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::OutOfDomain(1.0 - sigma));
    }
    let x = 1.0 - sigma;
    if x <= 0.95 {
        return hyp3f2_series(x);
    }
    Ok(hyp3f2_loop_integral(sigma))
}

/// The integral representation of ₃F₂(1, 4/3, 1; 5/3, 2; 1 − σ), valid for σ ∈ [0, 1).
pub fn hyp3f2_loop_integral(sigma: f64) -> f64 {
    let x = 1.0 - sigma;
    let c = gamma(5.0 / 3.0) / (gamma(4.0 / 3.0) * gamma(1.0 / 3.0));
    let r = tanh_sinh_unit(
        |s, sc| {
            let y = x * s;
            let l = if y < 0.5 { -(-y).ln_1p() } else { -(sc + sigma * s).ln() };
            s.powf(-2.0 / 3.0) * sc.powf(-2.0 / 3.0) * l / x
        },
        1e-14,
    );
    c * r.value
}

/// J₀, …, J_nmax at x by Miller's backward recurrence normalized with J₀ + 2ΣJ₂ₖ = 1.
pub fn bessel_j_orders(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = nmax.max(ax.ceil() as usize);
    let mut m = top + 20 + (40.0 * top as f64).sqrt() as usize;
    m += m % 2;
    let (mut jp, mut j) = (0.0f64, 1e-30f64);
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        // j = J_k, jp = J_{k+1}
        let jm = 2.0 * k as f64 / ax * j - jp;
        jp = j;
        j = jm;
        let km1 = k - 1;
        if km1 <= nmax {
            out[km1] = j;
        }
        if km1 % 2 == 0 && km1 > 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    norm += j;
    for (k, v) in out.iter_mut().enumerate() {
        *v /= norm;
        if x < 0.0 && k % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

pub fn bessel_j(n: usize, x: f64) -> f64 {
    bessel_j_orders(n, x)[n]
}

/// J_n and J_n′ at x.
fn bessel_j_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let v = bessel_j_orders(n + 1, x);
    let d = if n == 0 { -v[1] } else { 0.5 * (v[n - 1] - v[n + 1]) };
    (v[n], d)
}

/// McMahon's large-zero expansion of j_{n,k}.
pub fn mcmahon_guess(n: usize, k: usize) -> f64 {
    let mu = 4.0 * (n * n) as f64;
    let beta = (k as f64 + 0.5 * n as f64 - 0.25) * std::f64::consts::PI;
    let e = 8.0 * beta;
    beta - (mu - 1.0) / e - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * e.powi(3))
}

/// The first `count` positive zeros of J_n.
///
/// Sign changes are bracketed on a 0.05-spaced scan starting at n (no zero lies
/// below); each zero is then polished by Newton's method from the McMahon guess,
/// falling back to bisection whenever a step leaves the bracket.
pub fn bessel_j_zeros(n: usize, count: usize) -> Result<Vec<f64>> {
    let mut zeros = Vec::with_capacity(count);
    let step = 0.05;
    let mut x0 = (n as f64).max(step);
    let mut f0 = bessel_j(n, x0);
    while zeros.len() < count {
        let x1 = x0 + step;
        let f1 = bessel_j(n, x1);
        if f0 == 0.0 {
            zeros.push(x0);
        } else if f0 * f1 < 0.0 {
            let k = zeros.len() + 1;
            zeros.push(polish_zero(n, x0, x1, mcmahon_guess(n, k))?);
        }
        x0 = x1;
        f0 = f1;
        if x0 > 1e4 {
            return Err(Error::NumericalFailure(format!("zero scan for J_{n} ran away")));
        }
    }
    Ok(zeros)
}

fn polish_zero(n: usize, mut lo: f64, mut hi: f64, guess: f64) -> Result<f64> {
    let flo = bessel_j(n, lo);
    let mut x = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
    for _ in 0..100 {
        let (f, d) = bessel_j_with_derivative(n, x);
        if f == 0.0 {
            return Ok(x);
        }
        if f * flo > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - f / d;
        let next = if newton > lo && newton < hi && d != 0.0 { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() < 1e-15 * x.max(1.0) {
            x = next;
            break;
        }
        x = next;
    }
    let r = bessel_j(n, x);
    if r.abs() >= 1e-10 {
        return Err(Error::NumericalFailure(format!("zero of J_{n} near {x} has residual {r:e}")));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn j0_power_series(x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            term *= -(x * x / 4.0) / (k * k) as f64;
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        sum
    }

    #[test]
    fn series_examples() {
        assert_eq!(hyp3f2_series(0.0).unwrap(), 1.0);
        // brute force, 400 terms with exact rational ratios
        let mut t = 1.0;
        let mut s = 1.0;
        for k in 0..400 {
            let kf = k as f64;
            t *= (1.0 + kf) * (4.0 / 3.0 + kf) / ((5.0 / 3.0 + kf) * (2.0 + kf)) * 0.5;
            s += t;
        }
        assert_relative_eq!(hyp3f2_series(0.5).unwrap(), s, max_relative = 1e-12);
        assert!(hyp3f2_series(1.0).is_err());
        assert!(hyp3f2_series(-0.1).is_err());
    }

    #[test]
    fn integral_representation_matches_series() {
        for &x in &[0.1, 0.5, 0.9, 0.95] {
            assert_relative_eq!(hyp3f2_loop_integral(1.0 - x), hyp3f2_series(x).unwrap(), max_relative = 1e-11);
        }
    }

    #[test]
    fn aitken_branch_matches_integral() {
        for &x in &[0.96, 0.99, 0.999] {
            let a = hyp3f2_series(x).unwrap();
            let b = hyp3f2_loop_integral(1.0 - x);
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn bessel_values() {
        // J0(1), J1(1), J5(10) reference values
        let v = bessel_j_orders(5, 1.0);
        assert_relative_eq!(v[0], 0.765_197_686_557_966_6, epsilon = 1e-14);
        assert_relative_eq!(v[1], 0.440_050_585_744_933_5, epsilon = 1e-14);
        assert_relative_eq!(bessel_j(5, 10.0), -0.234_061_528_186_793_7, epsilon = 1e-13);
        for &x in &[0.3, 2.0, 5.0, 7.5] {
            assert_relative_eq!(bessel_j(0, x), j0_power_series(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn first_zero_against_bisection() {
        let z = bessel_j_zeros(0, 1).unwrap()[0];
        let (mut lo, mut hi) = (2.0, 3.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if j0_power_series(m) > 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        assert!((z - 0.5 * (lo + hi)).abs() < 1e-10);
    }

    #[test]
    fn zeros_interlace() {
        let z0 = bessel_j_zeros(3, 6).unwrap();
        let z1 = bessel_j_zeros(4, 6).unwrap();
        for k in 0..5 {
            assert!(z0[k] < z1[k] && z1[k] < z0[k + 1]);
        }
        for z in z0.iter().chain(&z1) {
            assert!(bessel_j(3, *z).abs() < 1e-10 || bessel_j(4, *z).abs() < 1e-10);
        }
    }
}
