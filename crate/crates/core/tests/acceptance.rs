//! Acceptance suite: one line per criterion.
//!
//! Runs without the libtest harness. Every criterion is evaluated and reported;
//! the process exits nonzero on a red criterion only when `LOOPSOUP_ACCEPTANCE_STRICT`
//! is set, so `cargo test` stays usable while known-red criteria are on record.
//! Pass criterion numbers as arguments to run a subset.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;

use loopsoup::chaos_convergence::{cil_diagnostic, fdd_convergence_test, standard_schedule, variance_identity_check, ChaosBudget};
use loopsoup::gaussian_gmc::{gaussian_dimension, kernel_loop_disk, kernel_matrix, sample_gaussian_field};
use loopsoup::geometry::{dist_to_boundary, Ball, Domain, MoebiusMap, Point, QuadratureGrid, TestFunction};
use loopsoup::integrability_checks::{check_concentration, check_conformal_covariance_disk, check_disk_triple_integral, check_massive_bounds, MassiveBudget};
use loopsoup::layering_fields::{n_point_estimate, n_point_prediction, ConformalDimension, NPointBudget, NPointParams};
use loopsoup::loop_measures::{alpha_monte_carlo, sample_soup, AlphaBudget, AlphaQuery, LoopShape, McBudget, MeasureKind, SoupParams};
use loopsoup::rng::derive_seed;
use loopsoup::sobolev::{build_basis, cauchy_diagnostic, sup_bound_fit, CauchyBudget};

struct Outcome {
    pass: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }
}

fn within(x: f64, target: f64, se: f64) -> bool {
    (x - target).abs() <= 3.0 * se
}

fn interior_points() -> [Point; 3] {
    [Point::ORIGIN, Point::new(0.3, 0.0), Point::new(-0.2, 0.4)]
}

/// Disk annulus mass from soups: the count of soup disks with δ ≤ diam ≤ R
/// covering the origin is Poisson with mean λ·α. Soups are drawn until
/// `accepted` such disks have been seen.
fn disk_annulus_from_soups(delta: f64, r: f64, accepted: usize, seed: u64) -> loopsoup::Result<(f64, f64, usize)> {
    let mut counts = Vec::new();
    let mut total = 0;
    while total < accepted {
        let p = SoupParams::new(1.0, delta, MeasureKind::Disk, derive_seed(seed, counts.len() as u64)).with_window(1e-9);
        let soup = sample_soup(&p)?;
        let n = soup
            .loops
            .iter()
            .filter(|l| match l.curve.shape() {
                LoopShape::DiskBoundary { center, radius } => center.norm() <= *radius && 2.0 * radius <= r,
                LoopShape::Polyline(_) => false,
            })
            .count();
        total += n;
        counts.push(n as f64);
    }
    let (m, se) = mean_se(&counts);
    Ok((m, se, total))
}

fn c1_annulus() -> loopsoup::Result<Outcome> {
    let mut o = Outcome::new();
    let mc = McBudget { accepted: 100_000, seed: 101, ..Default::default() };
    for kind in [MeasureKind::Disk, MeasureKind::Loop] {
        for (delta, r) in [(0.1, 1.0), (0.2, 0.8)] {
            let t = Instant::now();
            let (value, se, accepted) = if kind == MeasureKind::Disk {
                disk_annulus_from_soups(delta, r, 100_000, 102)?
            } else {
                let est = alpha_monte_carlo(&AlphaQuery::Annulus { z: Point::ORIGIN, delta, r_max: r }, kind, &mc)?;
                (est.value, est.std_error, est.accepted)
            };
            let exact = kind.eta() * (r / delta).ln();
            let secs = t.elapsed().as_secs_f64();
            o.check(
                within(value, exact, se) && secs <= 300.0,
                format!("{} (δ, R) = ({delta}, {r}): {value:.5} ± {se:.5} vs {exact:.5} [{accepted} accepted, {secs:.1} s]", kind.name()),
            );
        }
    }
    Ok(o)
}

fn c2_one_point() -> loopsoup::Result<Outcome> {
    let mut o = Outcome::new();
    let budget = NPointBudget { soups: 10_000, seed: 202 };
    let delta = 0.1;
    // Disk side: quadrature oracle.
    let params = NPointParams::new(0.25, PI / 2.0, delta, MeasureKind::Disk);
    for z in interior_points() {
        let est = n_point_estimate(&[z], &params, &budget)?;
        let pred = n_point_prediction(&[z], &params, &AlphaBudget::default())?;
        let se = est.std_error.hypot(pred.std_error);
        o.check(within(est.estimate.re, pred.value, se), format!("disk z = ({}, {}): {:.5} ± {:.5} vs {:.5}", z.x, z.y, est.estimate.re, se, pred.value));
    }
    // Loop side: α_δ(z) = (1/5)log(d_z/δ) + Monte Carlo α_{d_z,𝔻}(z).
    let (lambda, beta) = (1.0, PI);
    let params = NPointParams::new(lambda, beta, delta, MeasureKind::Loop);
    let dim = ConformalDimension::new(MeasureKind::Loop, lambda, beta).value;
    for (i, z) in interior_points().into_iter().enumerate() {
        let est = n_point_estimate(&[z], &params, &budget)?;
        let dz = dist_to_boundary(z, &Domain::unit_disk())?;
        let far = alpha_monte_carlo(&AlphaQuery::InDomain { z, delta: dz, v: Ball::UNIT }, MeasureKind::Loop, &McBudget { seed: 210 + i as u64, ..Default::default() })?;
        let c = lambda * (1.0 - beta.cos());
        let pred = delta.powf(-2.0 * dim) * (-c * (0.2 * (dz / delta).ln() + far.value)).exp();
        let se = est.std_error.hypot(pred * c * far.std_error);
        o.check(within(est.estimate.re, pred, se), format!("loop z = ({}, {}): {:.5} ± {:.5} vs {:.5}", z.x, z.y, est.estimate.re, se, pred));
    }
    Ok(o)
}

fn c3_kernel() -> loopsoup::Result<Outcome> {
    let mut o = Outcome::new();
    let pairs = [
        (Point::new(0.1, 0.0), Point::new(-0.1, 0.0)),
        (Point::new(0.3, 0.1), Point::new(0.0, -0.2)),
        (Point::new(0.2, 0.3), Point::new(-0.2, -0.1)),
        (Point::new(0.4, 0.0), Point::new(-0.2, 0.0)),
        (Point::new(0.0, 0.5), Point::new(0.0, -0.3)),
    ];
    for (i, (z, w)) in pairs.into_iter().enumerate() {
        let d = z.dist(w);
        let exact = kernel_loop_disk(z, w)?;
        // Every loop covering both points has diameter ≥ |z − w|.
        let q = AlphaQuery::TwoPointDomain { z, t: w, delta: d, v: Ball::UNIT };
        let est = alpha_monte_carlo(&q, MeasureKind::Loop, &McBudget { seed: 300 + i as u64, ..Default::default() })?;
        o.check(within(est.value, exact, est.std_error), format!("|z − w| = {d:.3}: MC {:.5} ± {:.5} vs ₃F₂ {exact:.5}", est.value, est.std_error));
    }
    for z in [Point::ORIGIN, Point::new(0.3, -0.2)] {
        let g: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|r| kernel_loop_disk(z, Point::new(z.x + r, z.y)).map(|k| k - 0.2 * (1.0 / r).ln()))
            .collect::<loopsoup::Result<_>>()?;
        let bounded = g.iter().all(|v| v.abs() < 1.0);
        let settling = (g[2] - g[1]).abs() < (g[1] - g[0]).abs();
        o.check(bounded && settling, format!("residual at z = ({}, {}) over |z − w| = 1e−1, 1e−2, 1e−3: {:.5}, {:.5}, {:.5}", z.x, z.y, g[0], g[1], g[2]));
    }
    Ok(o)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn c4_gaussian() -> loopsoup::Result<Outcome> {
    let mut o = Outcome::new();
    let pts = vec![Point::new(0.3, 0.0), Point::new(-0.3, 0.0), Point::new(0.0, 0.5)];
    let grid = Arc::new(QuadratureGrid::from_nodes(pts, vec![1.0; 3])?);
    let delta = 0.2;
    let xi = 0.5;
    let k = kernel_matrix(&grid, delta, MeasureKind::Disk, &Domain::unit_disk(), &AlphaBudget::default())?;
    let draws = 100_000u64;
    let mut values: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(draws as usize)).collect();
    let mut latent = Vec::with_capacity(draws as usize);
    for d in 0..draws {
        let f = sample_gaussian_field(&k, xi, 404, d)?;
        for (i, v) in f.values.iter().enumerate() {
            values[i].push(v.re);
        }
        latent.push(k.sample_latent(405, d)?);
    }
    let dim = gaussian_dimension(MeasureKind::Disk, xi);
    for (i, vals) in values.iter().enumerate() {
        let (m, se) = mean_se(vals);
        let expect = delta.powf(-2.0 * dim) * (-xi * xi / 2.0 * k.entries[(i, i)]).exp();
        o.check(within(m, expect, se), format!("⟨W⟩ at node {i}: {m:.5} ± {se:.5} vs {expect:.5}"));
    }
    let mut worst = 0.0f64;
    let mut all = true;
    let mut emp = DMatrix::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            let prod: Vec<f64> = latent.iter().map(|x| x[i] * x[j]).collect();
            let (m, se) = mean_se(&prod);
            emp[(i, j)] = m;
            all &= within(m, k.entries[(i, j)], se);
            worst = worst.max((m - k.entries[(i, j)]).abs() / se);
        }
    }
    o.check(all, format!("latent covariance recovers K entrywise: worst |Δ|/se = {worst:.2}, max |Δ| = {:.2e}", (emp - &k.entries).abs().max()));
    Ok(o)
}

fn c5_isometry() -> loopsoup::Result<Outcome> {
    let mut o = Outcome::new();
    let phi = TestFunction::new(Point::ORIGIN, 0.5, 1.0)?;
    let budget = ChaosBudget { q_max: 16, soups: 10_000, seed: 505, ..Default::default() };
    let t = Instant::now();
    let v = variance_identity_check(&phi, 0.15, 0.25, PI / 2.0, MeasureKind::Disk, &budget)?;
    let secs = t.elapsed().as_secs_f64();
    o.check(
        v.pass && secs <= 900.0,
        format!(
            "Var {:.5e} ± {:.1e} vs chaos sum (q ≤ {}) {:.5e} ± {:.1e} + tail ≤ {:.1e}; resummed {:.5e} [{secs:.1} s]",
            v.mc_variance, v.mc_std_error, v.q_max, v.chaos_sum, v.chaos_std_error, v.tail_envelope, v.resummed
        ),
    );
    Ok(o)
}

fn c6_clt() -> loopsoup::Result<Outcome> {
    let mut o = Outcome::new();
    let xi = 0.2f64.sqrt();
    let schedule = standard_schedule(xi, &[4.0, 16.0, 64.0, 256.0]);
    let phi = TestFunction::new(Point::ORIGIN, 0.5, 1.0)?;
    let delta = 0.15;
    let budget = ChaosBudget { soups: 10_000, seed: 606, ..Default::default() };
    let reports = cil_diagnostic(xi, &schedule, &phi, delta, MeasureKind::Disk, &budget, false)?;
    let gaps: Vec<f64> = reports.iter().map(|r| r.mean_gap).collect();
    o.check(gaps.windows(2).all(|w| w[1] < w[0]), format!("mean gap monotone: {gaps:?}"));
    for q in 1..=4 {
        let first = reports[0].terms[q - 1].cross_l2_gap;
        let last = reports.last().unwrap().terms[q - 1].cross_l2_gap;
        o.check(first >= 4.0 * last, format!("q = {q} cross gap {first:.3e} → {last:.3e} (ratio {:.1})", first / last));
    }
    let fdd = fdd_convergence_test(xi, &schedule, &[phi], delta, MeasureKind::Disk, &budget, 1000, 500, false)?;
    let e: Vec<f64> = fdd.steps.iter().map(|s| s.energy_distance).collect();
    o.check(fdd.monotone, format!("energy distance monotone: {e:?}"));
    o.check(fdd.endpoint_p_value < 0.05, format!("endpoint permutation p-value {:.3}", fdd.endpoint_p_value));
    Ok(o)
}

fn c7_massive() -> loopsoup::Result<Outcome> {
    let mut o = Outcome::new();
    for m in [0.5, 1.0] {
        for r in [0.25, 0.5] {
            let res = check_massive_bounds(m, r, Point::ORIGIN, &MassiveBudget { seed: 707, ..Default::default() })?;
            o.check(res.pass, format!("m̄ = {m}, R = {r}: α̂ = {:.3e} ± {:.1e} ≤ {:.4}; {}", res.computed, res.std_error, res.bound_or_reference, res.details));
        }
    }
    Ok(o)
}

fn c8_sobolev() -> loopsoup::Result<Outcome> {
    let mut o = Outcome::new();
    let basis = build_basis(400)?;
    let g = basis.gram(400);
    let dev = (g - DMatrix::<f64>::identity(400, 400)).abs().max();
    o.check(dev < 1e-6, format!("eigenbasis orthonormality max |G − I| = {dev:.2e}"));
    let fit = sup_bound_fit(&basis, 400);
    o.check(fit.pass, format!("sup-norm fit c = {:.3}, maxima {:.3} / {:.3}", fit.c, fit.first_half_max, fit.second_half_max));
    let budget = CauchyBudget { soups: 1000, seed: 808, ..Default::default() };
    let t = cauchy_diagnostic(0.25, PI / 2.0, MeasureKind::Disk, &[0.4, 0.2, 0.1, 0.05], 2.0, &budget)?;
    let norms: Vec<String> = t.rows.iter().map(|r| format!("{:.4e} ± {:.1e}", r.mean_norm, r.std_error)).collect();
    o.check(t.decreasing, format!("Δ = {:.4}, H^−2 pair norms [{}]", t.dimension, norms.join(", ")));
    Ok(o)
}

fn c9_covariance() -> loopsoup::Result<Outcome> {
    let mut o = Outcome::new();
    let phi = TestFunction::new(Point::new(0.1, 0.1), 0.3, 1.0)?;
    for (label, f) in [("identity", MoebiusMap::identity()), ("a = 0.3", MoebiusMap::new(Point::new(0.3, 0.0), 0.0)?)] {
        let r = check_conformal_covariance_disk(&f, &phi, 1.0, PI / 2.0, 24, 1e-10)?;
        o.check(r.pass, format!("{label}: {:.12} vs {:.12} (tol {:.0e})", r.computed, r.bound_or_reference, r.tolerance));
    }
    Ok(o)
}

fn c10_lemmas() -> loopsoup::Result<Outcome> {
    let mut o = Outcome::new();
    for (a, b, c) in [(0.8, 0.4, 0.4), (0.95, 0.9, 0.9)] {
        let r = check_disk_triple_integral(a, b, c, 24)?;
        o.check(r.pass, format!("triple integral ({a}, {b}, {c}) = {:.4} ≤ {:.4}; {}", r.computed, r.bound_or_reference, r.details));
    }
    let mc = McBudget { max_proposals: 10_000_000, seed: 1010, ..Default::default() };
    let r = check_concentration(0.25, 0.5, 1.0, &mc)?;
    o.check(r.pass, format!("concentration (0.25, 0.5, 1): {:.3e} ± {:.1e} ≤ {:.4}; {}", r.computed, r.std_error, r.bound_or_reference, r.details));
    Ok(o)
}

type Criterion = fn() -> loopsoup::Result<Outcome>;

fn main() {
    let criteria: [(usize, &str, Criterion); 10] = [
        (1, "annulus closed forms by Monte Carlo", c1_annulus),
        (2, "one-point functions", c2_one_point),
        (3, "hypergeometric kernel", c3_kernel),
        (4, "Gaussian identities", c4_gaussian),
        (5, "chaos isometry", c5_isometry),
        (6, "CLT convergence", c6_clt),
        (7, "massive bounds", c7_massive),
        (8, "Sobolev Cauchy diagnostic", c8_sobolev),
        (9, "conformal covariance (means)", c9_covariance),
        (10, "auxiliary lemmas", c10_lemmas),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut red = Vec::new();
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let (pass, lines) = match f() {
            Ok(o) => (o.pass, o.lines),
            Err(e) => (false, vec![format!("FAIL error: {e}")]),
        };
        println!("criterion {n:>2} {}: {name} [{:.1} s]", if pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
        for l in lines {
            println!("    {l}");
        }
        if !pass {
            red.push(n);
        }
    }
    if red.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: red criteria {red:?}");
        if std::env::var_os("LOOPSOUP_ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
    }
}
