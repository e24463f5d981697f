//! Wiener–Itô chaos norms of Poisson and Gaussian layering fields, the variance
//! identity, and the Poisson-to-Gaussian convergence diagnostics.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_gmc::{assemble_kernel, gaussian_dimension, EntryMethod, KernelMatrix};
use crate::geometry::{Domain, QuadratureGrid, TestFunction};
use crate::layering_fields::{layering_numbers, ConformalDimension, CoveringMethod};
use crate::loop_measures::{sample_soup, AlphaBudget, MeasureKind, SoupParams};
use crate::rng::{derive_seed, stream_rng};

/// Effort for chaos computations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosBudget {
    /// Rings of the 𝔻 grid whose nodes inside the supports carry the quadrature.
    pub resolution: usize,
    pub q_max: usize,
    pub alpha: AlphaBudget,
    /// Soups (and Gaussian draws) per Monte Carlo estimate.
    pub soups: usize,
    pub seed: u64,
    pub method: CoveringMethod,
}

impl Default for ChaosBudget {
    fn default() -> Self {
        ChaosBudget {
            resolution: 24,
            q_max: 16,
            alpha: AlphaBudget { quad_tol: 1e-8, ..Default::default() },
            soups: 10_000,
            seed: 1,
            method: CoveringMethod::default(),
        }
    }
}

/// The node-pair α table over the union of the test-function supports, shared
/// by every chaos order and every (λ, β, ξ).
#[derive(Clone, Debug)]
pub struct PairTable {
    pub grid: Arc<QuadratureGrid>,
    /// w_i·φ_k(z_i) per test function.
    pub weights: Vec<Vec<f64>>,
    /// α*_{δ,D}(z_i, z_j), with α*_{δ,D}(z_i) on the diagonal.
    pub kernel: KernelMatrix,
    pub delta: f64,
    pub kind: MeasureKind,
    pub domain: Domain,
}

impl PairTable {
    pub fn build(phis: &[TestFunction], delta: f64, kind: MeasureKind, budget: &ChaosBudget) -> Result<PairTable> {
        if phis.is_empty() {
            return Err(Error::InvalidParameter("need at least one test function".into()));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("chaos norms need δ > 0, got {delta}")));
        }
        let full = QuadratureGrid::unit_disk(budget.resolution)?;
        let grid = Arc::new(full.restrict(|z| phis.iter().any(|p| p.value(z) > 0.0)));
        let domain = Domain::unit_disk();
        let kernel = assemble_kernel(&grid, delta, kind, &domain, &budget.alpha)?;
        let weights = phis.iter().map(|p| grid.nodes().map(|(z, w)| w * p.value(z)).collect()).collect();
        Ok(PairTable { grid, weights, kernel, delta, kind, domain })
    }

    fn n(&self) -> usize {
        self.grid.len()
    }

    fn alpha(&self, i: usize, j: usize) -> f64 {
        self.kernel.entries[(i, j)]
    }

    fn alpha_err(&self, i: usize, j: usize) -> f64 {
        self.kernel.std_errors[(i, j)]
    }

    /// ⟨δ^{−2Δ}V^δ(z_i)⟩ = δ^{−2Δ}e^{−λ(1−cos β)α_δ(z_i)}.
    pub fn poisson_one_point(&self, lambda: f64, beta: f64) -> Vec<f64> {
        let dim = ConformalDimension::new(self.kind, lambda, beta).value;
        let c = lambda * (1.0 - beta.cos());
        (0..self.n()).map(|i| self.delta.powf(-2.0 * dim) * (-c * self.alpha(i, i)).exp()).collect()
    }

    /// ⟨δ^{−2Δ_ξ}W^δ_ξ(z_i)⟩ = δ^{−2Δ_ξ}e^{−(ξ²/2)α_δ(z_i)}.
    pub fn gaussian_one_point(&self, xi: f64) -> Vec<f64> {
        let dim = gaussian_dimension(self.kind, xi);
        (0..self.n()).map(|i| self.delta.powf(-2.0 * dim) * (-xi * xi / 2.0 * self.alpha(i, i)).exp()).collect()
    }

    /// Σ_ij u_i v_j·f(α_ij) with the error propagated from independent α errors.
    fn pair_sum(&self, u: &[f64], v: &[f64], f: impl Fn(f64) -> (f64, f64) + Sync) -> (f64, f64) {
        let n = self.n();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut s = 0.0;
                let mut e = 0.0;
                for j in 0..n {
                    let (val, der) = f(self.alpha(i, j));
                    let c = u[i] * v[j];
                    s += c * val;
                    e += (c * der * self.alpha_err(i, j)).powi(2);
                }
                (s, e)
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1))
            .pipe(|(s, e)| (s, e.sqrt()))
    }

    fn weighted(&self, k: usize, one: &[f64]) -> Vec<f64> {
        self.weights[k].iter().zip(one).map(|(w, p)| w * p).collect()
    }

    /// The method behind the table's entries (the least exact one present).
    pub fn method(&self) -> EntryMethod {
        let rank = |m: &EntryMethod| match m {
            EntryMethod::MonteCarlo => 3,
            EntryMethod::Quadrature => 2,
            _ => 1,
        };
        *self.kernel.methods.iter().max_by_key(|m| rank(m)).unwrap_or(&EntryMethod::ClosedForm)
    }
}

trait Pipe: Sized {
    fn pipe<T>(self, f: impl FnOnce(Self) -> T) -> T {
        f(self)
    }
}
impl<T> Pipe for T {}

/// x^q/q!.
fn power_over_factorial(x: f64, q: usize) -> f64 {
    (1..=q).fold(1.0, |acc, k| acc * x / k as f64)
}

/// One chaos order: the Poisson and Gaussian norms and the L² gap between
/// λ^{q/2}f_q and w_q.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosOrderTerm {
    pub q: usize,
    /// q!·λ^q·‖f_q‖².
    pub poisson_norm: f64,
    pub poisson_std_error: f64,
    /// q!·‖w_q‖².
    pub gaussian_norm: f64,
    pub gaussian_std_error: f64,
    /// ‖λ^{q/2}f_q − w_q‖².
    pub cross_l2_gap: f64,
    pub cross_std_error: f64,
    pub method: EntryMethod,
}

impl PairTable {
    /// q!λ^q‖f_q‖² = (1/q!)∬φφ⟨V⟩⟨V⟩[2λ(1−cos β)α_δ]^q for test function `k`.
    pub fn poisson_norm(&self, q: usize, lambda: f64, beta: f64, k: usize) -> (f64, f64) {
        let c = 2.0 * lambda * (1.0 - beta.cos());
        let u = self.weighted(k, &self.poisson_one_point(lambda, beta));
        self.pair_sum(&u, &u, |a| {
            let t = power_over_factorial(c * a, q);
            (t, if a > 0.0 { q as f64 * t / a } else { 0.0 })
        })
    }

    /// q!‖w_q‖² = (ξ^{2q}/q!)∬φφ⟨W⟩⟨W⟩α_δ^q.
    pub fn gaussian_norm(&self, q: usize, xi: f64, k: usize) -> (f64, f64) {
        let c = xi * xi;
        let u = self.weighted(k, &self.gaussian_one_point(xi));
        self.pair_sum(&u, &u, |a| {
            let t = power_over_factorial(c * a, q);
            (t, if a > 0.0 { q as f64 * t / a } else { 0.0 })
        })
    }

    /// ‖λ^{q/2}f_q − w_q‖² = (1/q!²)∬φφ α^q [P P c_P^q + G G ξ^{2q} − (P G + G P) c_X^q]
    /// with c_P = 2λ(1−cos β) and c_X = √λ·ξ·sin β the mark integrals.
    pub fn cross_gap(&self, q: usize, lambda: f64, beta: f64, xi: f64, k: usize) -> (f64, f64) {
        let p = self.weighted(k, &self.poisson_one_point(lambda, beta));
        let g = self.weighted(k, &self.gaussian_one_point(xi));
        let cp = 2.0 * lambda * (1.0 - beta.cos());
        let cg = xi * xi;
        let cx = lambda.sqrt() * xi * beta.sin();
        let qf = power_over_factorial(1.0, q);
        let n = self.n();
        let (s, e) = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut s = 0.0;
                let mut e = 0.0;
                for j in 0..n {
                    let a = self.alpha(i, j);
                    let b = p[i] * p[j] * power_over_factorial(cp * a, q) + g[i] * g[j] * power_over_factorial(cg * a, q)
                        - (p[i] * g[j] + g[i] * p[j]) * power_over_factorial(cx * a, q);
                    s += b;
                    if a > 0.0 {
                        e += (q as f64 * b / a * self.alpha_err(i, j)).powi(2);
                    }
                }
                (s * qf, e.sqrt() * qf)
            })
            .reduce(|| (0.0, 0.0), |x, y| (x.0 + y.0, x.1.hypot(y.1)));
        (s.max(0.0), e)
    }

    /// Var(δ^{−2Δ}V^δ(φ)) resummed: ∬φφ⟨V⟩⟨V⟩(e^{2λ(1−cos β)α_δ} − 1).
    pub fn poisson_variance(&self, lambda: f64, beta: f64, k: usize) -> f64 {
        let c = 2.0 * lambda * (1.0 - beta.cos());
        let u = self.weighted(k, &self.poisson_one_point(lambda, beta));
        self.pair_sum(&u, &u, |a| ((c * a).exp_m1(), 0.0)).0
    }

    /// Var(W(φ)) resummed: ∬φφ⟨W⟩⟨W⟩(e^{ξ²α_δ} − 1).
    pub fn gaussian_variance(&self, xi: f64, k: usize) -> f64 {
        let u = self.weighted(k, &self.gaussian_one_point(xi));
        self.pair_sum(&u, &u, |a| ((xi * xi * a).exp_m1(), 0.0)).0
    }

    /// Lagrange bound on Σ_{q>q_max} of the Poisson norms:
    /// e^x − Σ_{q≤Q} x^q/q! ≤ x^{Q+1}e^x/(Q+1)! pairwise.
    pub fn poisson_tail_envelope(&self, q_max: usize, lambda: f64, beta: f64, k: usize) -> f64 {
        let c = 2.0 * lambda * (1.0 - beta.cos());
        let u = self.weighted(k, &self.poisson_one_point(lambda, beta));
        let ua: Vec<f64> = u.iter().map(|x| x.abs()).collect();
        self.pair_sum(&ua, &ua, |a| (power_over_factorial(c * a, q_max + 1) * (c * a).exp(), 0.0)).0
    }

    /// (1/q!)·[2λ(1−cos β)]^q·∬|φφ|·d_z^{−2Δ}d_t^{−2Δ}·(η·log(2/max(|z−t|, δ)))^q: the
    /// order-q envelope from α_δ(z, t) ≤ η·log(2/|z−t|) and ⟨V(z)⟩ ≤ d_z^{−2Δ}.
    pub fn envelope_term(&self, q: usize, lambda: f64, beta: f64, k: usize) -> f64 {
        let c = 2.0 * lambda * (1.0 - beta.cos());
        let dim = ConformalDimension::new(self.kind, lambda, beta).value;
        let eta = self.kind.eta();
        let pts = self.grid.points();
        let u: Vec<f64> = pts
            .iter()
            .zip(&self.weights[k])
            .map(|(z, w)| w.abs() * (1.0 - z.norm()).powf(-2.0 * dim))
            .collect();
        let n = pts.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let r = pts[i].dist(pts[j]).max(self.delta);
                        u[i] * u[j] * power_over_factorial(c * eta * (2.0 / r).ln(), q)
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn order_term(&self, q: usize, lambda: f64, beta: f64, xi: f64, k: usize) -> ChaosOrderTerm {
        let (pn, pe) = self.poisson_norm(q, lambda, beta, k);
        let (gn, ge) = self.gaussian_norm(q, xi, k);
        let (cn, ce) = self.cross_gap(q, lambda, beta, xi, k);
        ChaosOrderTerm {
            q,
            poisson_norm: pn,
            poisson_std_error: pe,
            gaussian_norm: gn,
            gaussian_std_error: ge,
            cross_l2_gap: cn,
            cross_std_error: ce,
            method: self.method(),
        }
    }

    /// |⟨V(φ)⟩ − ⟨W(φ)⟩| from the closed one-point functions.
    pub fn mean_gap(&self, lambda: f64, beta: f64, xi: f64, k: usize) -> f64 {
        let p = self.poisson_one_point(lambda, beta);
        let g = self.gaussian_one_point(xi);
        self.weights[k].iter().zip(p.iter().zip(&g)).map(|(w, (a, b))| w * (a - b)).sum::<f64>().abs()
    }
}

/// q!λ^q‖f_q‖² for a single test function.
pub fn poisson_chaos_norm(q: usize, phi: &TestFunction, delta: f64, lambda: f64, beta: f64, kind: MeasureKind, budget: &ChaosBudget) -> Result<ChaosOrderTerm> {
    if q == 0 {
        return Err(Error::InvalidParameter("chaos order q must be ≥ 1".into()));
    }
    let t = PairTable::build(std::slice::from_ref(phi), delta, kind, budget)?;
    let (v, e) = t.poisson_norm(q, lambda, beta, 0);
    Ok(ChaosOrderTerm { q, poisson_norm: v, poisson_std_error: e, gaussian_norm: f64::NAN, gaussian_std_error: f64::NAN, cross_l2_gap: f64::NAN, cross_std_error: f64::NAN, method: t.method() })
}

/// q!‖w_q‖² for a single test function.
pub fn gaussian_chaos_norm(q: usize, phi: &TestFunction, delta: f64, xi: f64, kind: MeasureKind, budget: &ChaosBudget) -> Result<ChaosOrderTerm> {
    if q == 0 {
        return Err(Error::InvalidParameter("chaos order q must be ≥ 1".into()));
    }
    let t = PairTable::build(std::slice::from_ref(phi), delta, kind, budget)?;
    let (v, e) = t.gaussian_norm(q, xi, 0);
    Ok(ChaosOrderTerm { q, poisson_norm: f64::NAN, poisson_std_error: f64::NAN, gaussian_norm: v, gaussian_std_error: e, cross_l2_gap: f64::NAN, cross_std_error: f64::NAN, method: t.method() })
}

/// Soup-by-soup pairings δ^{−2Δ}V^δ(φ_k) on the table's grid.
pub fn poisson_pairings(table: &PairTable, lambda: f64, beta: f64, budget: &ChaosBudget) -> Result<Vec<Vec<Complex64>>> {
    let dim = ConformalDimension::new(table.kind, lambda, beta).value;
    let modulus = table.delta.powf(-2.0 * dim);
    let reach = table.grid.points().iter().map(|z| z.norm()).fold(0.0, f64::max) + 1e-9;
    let base = SoupParams::new(lambda, table.delta, table.kind, 0).with_window(reach);
    (0..budget.soups)
        .into_par_iter()
        .map(|s| {
            let soup = sample_soup(&base.clone().with_seed(derive_seed(budget.seed, s as u64)))?;
            let n = layering_numbers(&soup, &table.grid, budget.method)?;
            let v: Vec<Complex64> = n.iter().map(|k| Complex64::from_polar(modulus, beta * *k as f64)).collect();
            Ok(table.weights.iter().map(|w| w.iter().zip(&v).map(|(a, b)| b * *a).sum()).collect())
        })
        .collect()
}

/// Draw-by-draw pairings δ^{−2Δ_ξ}W^δ_ξ(φ_k) on the table's grid.
pub fn gaussian_pairings(table: &PairTable, xi: f64, draws: usize, seed: u64) -> Result<Vec<Vec<Complex64>>> {
    let k = table.kernel.clone().repaired()?;
    let modulus = table.delta.powf(-2.0 * gaussian_dimension(table.kind, xi));
    (0..draws)
        .into_par_iter()
        .map(|s| {
            let g = k.sample_latent(seed, s as u64)?;
            Ok(table
                .weights
                .iter()
                .map(|w| w.iter().zip(g.iter()).map(|(a, x)| Complex64::from_polar(modulus * a, xi * x)).sum())
                .collect())
        })
        .collect()
}

/// Outcome of comparing the Monte Carlo variance of V(φ) with the chaos sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceIdentity {
    pub mc_variance: f64,
    pub mc_std_error: f64,
    /// Σ_{q≤q_max} q!λ^q‖f_q‖².
    pub chaos_sum: f64,
    pub chaos_std_error: f64,
    pub tail_envelope: f64,
    /// The exact resummation ∬φφ⟨V⟩⟨V⟩(e^{2λ(1−cos β)α} − 1).
    pub resummed: f64,
    /// |mc_variance − chaos_sum|.
    pub residual: f64,
    /// 3·(MC s.e. + quadrature s.e.) + tail envelope.
    pub tolerance: f64,
    pub pass: bool,
    pub q_max: usize,
    pub soups: usize,
    pub seed: u64,
}

/// Variance of soup pairings against the truncated chaos sum, on a shared grid.
pub fn variance_identity_check(phi: &TestFunction, delta: f64, lambda: f64, beta: f64, kind: MeasureKind, budget: &ChaosBudget) -> Result<VarianceIdentity> {
    if kind != MeasureKind::Disk {
        return Err(Error::InvalidParameter("the variance identity check needs the disk measure (deterministic quadrature side)".into()));
    }
    if budget.soups < 2 {
        return Err(Error::InvalidParameter("need at least 2 soups".into()));
    }
    let t = PairTable::build(std::slice::from_ref(phi), delta, kind, budget)?;
    let mut chaos_sum = 0.0;
    let mut chaos_err = 0.0;
    for q in 1..=budget.q_max {
        let (v, e) = t.poisson_norm(q, lambda, beta, 0);
        chaos_sum += v;
        chaos_err += e;
    }
    let tail = t.poisson_tail_envelope(budget.q_max, lambda, beta, 0);
    let resummed = t.poisson_variance(lambda, beta, 0);
    let xs: Vec<Complex64> = poisson_pairings(&t, lambda, beta, budget)?.into_iter().map(|v| v[0]).collect();
    let (var, se) = complex_variance(&xs);
    let residual = (var - chaos_sum).abs();
    let tolerance = 3.0 * (se + chaos_err) + tail;
    Ok(VarianceIdentity {
        mc_variance: var,
        mc_std_error: se,
        chaos_sum,
        chaos_std_error: chaos_err,
        tail_envelope: tail,
        resummed,
        residual,
        tolerance,
        pass: residual <= tolerance,
        q_max: budget.q_max,
        soups: budget.soups,
        seed: budget.seed,
    })
}

/// Unbiased E|X − EX|² and its delta-method standard error.
pub fn complex_variance(xs: &[Complex64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean: Complex64 = xs.iter().sum::<Complex64>() / n;
    let d2: Vec<f64> = xs.iter().map(|x| (x - mean).norm_sqr()).collect();
    let var = d2.iter().sum::<f64>() / (n - 1.0);
    let m4 = d2.iter().map(|d| d * d).sum::<f64>() / n;
    (var, ((m4 - var * var).max(0.0) / n).sqrt())
}

/// One step of the λ → ∞ schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosReport {
    pub lambda: f64,
    pub beta: f64,
    pub xi: f64,
    pub delta: f64,
    pub terms: Vec<ChaosOrderTerm>,
    /// |⟨V(φ)⟩ − ⟨W(φ)⟩|.
    pub mean_gap: f64,
    /// |Σ_{q≤q_max} terms + tail_mass − resummed variance|.
    pub variance_identity_residual: f64,
    /// Σ_{q>q_max} of the Poisson norms (resummed minus truncated).
    pub tail_mass: f64,
    pub tail_envelope: f64,
    pub beyond_proof: bool,
}

/// Rejects ξ outside ξ² < 5 (Brownian loops) or ξ² < 1/π (disks); with
/// `beyond_proof` the window extends to Δ_ξ < 1/2.
pub fn check_xi_window(xi: f64, kind: MeasureKind, beyond_proof: bool) -> Result<()> {
    let x2 = xi * xi;
    let (proof, exist) = match kind {
        MeasureKind::Disk => (1.0 / PI, 2.0 / PI),
        _ => (5.0, 10.0),
    };
    let limit = if beyond_proof { exist } else { proof };
    if !(x2 < limit) || !xi.is_finite() {
        return Err(Error::ParameterOutOfRange(format!("ξ² = {x2} must be < {limit:.6} for the {} measure", kind.name())));
    }
    Ok(())
}

fn check_schedule(schedule: &[(f64, f64)]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidParameter("empty schedule".into()));
    }
    for w in schedule.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::InvalidParameter("schedule must be strictly increasing in λ".into()));
        }
    }
    for (lambda, beta) in schedule {
        if !(*lambda > 0.0) || !(0.0..2.0 * PI).contains(beta) {
            return Err(Error::InvalidParameter(format!("schedule step (λ = {lambda}, β = {beta}) is invalid")));
        }
    }
    Ok(())
}

/// The schedule λ_k with β_k = ξ/√λ_k.
pub fn standard_schedule(xi: f64, lambdas: &[f64]) -> Vec<(f64, f64)> {
    lambdas.iter().map(|l| (*l, xi / l.sqrt())).collect()
}

/// Chaos reports along a schedule with λβ² → ξ².
pub fn cil_diagnostic(xi: f64, schedule: &[(f64, f64)], phi: &TestFunction, delta: f64, kind: MeasureKind, budget: &ChaosBudget, beyond_proof: bool) -> Result<Vec<ChaosReport>> {
    check_xi_window(xi, kind, beyond_proof)?;
    check_schedule(schedule)?;
    let t = PairTable::build(std::slice::from_ref(phi), delta, kind, budget)?;
    Ok(schedule
        .iter()
        .map(|&(lambda, beta)| {
            let terms: Vec<ChaosOrderTerm> = (1..=budget.q_max).map(|q| t.order_term(q, lambda, beta, xi, 0)).collect();
            let partial: f64 = terms.iter().map(|c| c.poisson_norm).sum();
            let resummed = t.poisson_variance(lambda, beta, 0);
            let tail_mass = (resummed - partial).max(0.0);
            ChaosReport {
                lambda,
                beta,
                xi,
                delta,
                mean_gap: t.mean_gap(lambda, beta, xi, 0),
                variance_identity_residual: (partial + tail_mass - resummed).abs(),
                tail_mass,
                tail_envelope: t.poisson_tail_envelope(budget.q_max, lambda, beta, 0),
                terms,
                beyond_proof,
            }
        })
        .collect())
}

/// Energy distance 2E|X − Y| − E|X − X′| − E|Y − Y′| (within-sample means over
/// distinct pairs).
pub fn energy_distance(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    let cross = |a: &[Vec<f64>], b: &[Vec<f64>]| -> f64 {
        a.par_iter().map(|p| b.iter().map(|q| d(p, q)).sum::<f64>()).sum::<f64>() / (a.len() * b.len()) as f64
    };
    let within = |a: &[Vec<f64>]| -> f64 {
        let n = a.len();
        if n < 2 {
            return 0.0;
        }
        let s: f64 = (0..n).into_par_iter().map(|i| (i + 1..n).map(|j| d(&a[i], &a[j])).sum::<f64>()).sum();
        2.0 * s / (n * (n - 1)) as f64
    };
    2.0 * cross(x, y) - within(x) - within(y)
}

/// Pairwise distance matrix of the pooled sample.
fn pooled_distances(pool: &[&Vec<f64>]) -> Vec<f64> {
    let n = pool.len();
    let mut m = vec![0.0; n * n];
    m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for j in 0..n {
            row[j] = pool[i].iter().zip(pool[j]).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        }
    });
    m
}

fn energy_from_labels(m: &[f64], n: usize, labels: &[bool]) -> f64 {
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    let (mut nxy, mut nxx, mut nyy) = (0usize, 0usize, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            let v = m[i * n + j];
            match (labels[i], labels[j]) {
                (true, true) => {
                    xx += v;
                    nxx += 1;
                }
                (false, false) => {
                    yy += v;
                    nyy += 1;
                }
                _ => {
                    xy += v;
                    nxy += 1;
                }
            }
        }
    }
    let mean = |s: f64, c: usize| if c == 0 { 0.0 } else { s / c as f64 };
    2.0 * mean(xy, nxy) - mean(xx, nxx) - mean(yy, nyy)
}

/// Two-sample energy test: statistic on the full samples, p-value by label
/// permutation on subsamples of at most `subsample` points per side.
pub fn energy_test(x: &[Vec<f64>], y: &[Vec<f64>], permutations: usize, subsample: usize, seed: u64) -> (f64, f64) {
    let stat = energy_distance(x, y);
    let mut rng = stream_rng(seed, 0);
    let mut xi: Vec<usize> = (0..x.len()).collect();
    let mut yi: Vec<usize> = (0..y.len()).collect();
    xi.shuffle(&mut rng);
    yi.shuffle(&mut rng);
    xi.truncate(subsample);
    yi.truncate(subsample);
    let pool: Vec<&Vec<f64>> = xi.iter().map(|&i| &x[i]).chain(yi.iter().map(|&i| &y[i])).collect();
    let n = pool.len();
    let m = pooled_distances(&pool);
    let mut labels: Vec<bool> = (0..n).map(|i| i < xi.len()).collect();
    let observed = energy_from_labels(&m, n, &labels);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        labels.shuffle(&mut rng);
        if energy_from_labels(&m, n, &labels) >= observed {
            exceed += 1;
        }
    }
    (stat, (exceed + 1) as f64 / (permutations + 1) as f64)
}

/// Permutation test of E(A, C) > E(B, C): labels are permuted between A and B,
/// which share a law under the null.
pub fn energy_inequality_test(a: &[Vec<f64>], b: &[Vec<f64>], c: &[Vec<f64>], permutations: usize, subsample: usize, seed: u64) -> f64 {
    let mut rng = stream_rng(seed, 1);
    let mut pick = |v: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.shuffle(&mut rng);
        idx.into_iter().take(subsample).map(|i| v[i].clone()).collect()
    };
    let (a, b, c) = (pick(a), pick(b), pick(c));
    let pool: Vec<&Vec<f64>> = a.iter().chain(b.iter()).chain(c.iter()).collect();
    let n = pool.len();
    let m = pooled_distances(&pool);
    let (na, nb) = (a.len(), b.len());
    let stat = |group: &[u8]| -> f64 {
        // Energy distance of group g ∈ {0, 1} against group 2.
        let mut cross = [0.0; 2];
        let mut cc = [0usize; 2];
        let mut within = [0.0; 3];
        let mut wc = [0usize; 3];
        for i in 0..n {
            for j in i + 1..n {
                let v = m[i * n + j];
                let (gi, gj) = (group[i] as usize, group[j] as usize);
                if gi == gj {
                    within[gi] += v;
                    wc[gi] += 1;
                } else if gi == 2 || gj == 2 {
                    let g = gi.min(gj);
                    cross[g] += v;
                    cc[g] += 1;
                }
            }
        }
        let e = |g: usize| 2.0 * cross[g] / cc[g].max(1) as f64 - within[g] / wc[g].max(1) as f64 - within[2] / wc[2].max(1) as f64;
        e(0) - e(1)
    };
    let mut group: Vec<u8> = (0..n).map(|i| if i < na { 0 } else if i < na + nb { 1 } else { 2 }).collect();
    let observed = stat(&group);
    let mut exceed = 0;
    for _ in 0..permutations {
        group[..na + nb].shuffle(&mut rng);
        if stat(&group) >= observed {
            exceed += 1;
        }
    }
    (exceed + 1) as f64 / (permutations + 1) as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FddStep {
    pub lambda: f64,
    pub beta: f64,
    pub energy_distance: f64,
    /// Permutation p-value of "Poisson and Gaussian samples share a law".
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FddTable {
    pub xi: f64,
    pub delta: f64,
    pub steps: Vec<FddStep>,
    /// p-value for distance(first step) > distance(last step).
    pub endpoint_p_value: f64,
    pub monotone: bool,
    pub permutations: usize,
    pub subsample: usize,
    pub soups: usize,
    pub seed: u64,
}

fn as_real_vectors(samples: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
    samples.iter().map(|v| v.iter().flat_map(|c| [c.re, c.im]).collect()).collect()
}

/// Energy distance between the laws of (Re V(φ_k), Im V(φ_k))_k over soups and the
/// Gaussian counterpart, along a schedule.
#[allow(clippy::too_many_arguments)]
pub fn fdd_convergence_test(
    xi: f64,
    schedule: &[(f64, f64)],
    phis: &[TestFunction],
    delta: f64,
    kind: MeasureKind,
    budget: &ChaosBudget,
    permutations: usize,
    subsample: usize,
    beyond_proof: bool,
) -> Result<FddTable> {
    check_xi_window(xi, kind, beyond_proof)?;
    check_schedule(schedule)?;
    let t = PairTable::build(phis, delta, kind, budget)?;
    let gauss = as_real_vectors(&gaussian_pairings(&t, xi, budget.soups, derive_seed(budget.seed, 0x6a))?);
    let mut steps = Vec::new();
    let mut samples = Vec::new();
    for (k, &(lambda, beta)) in schedule.iter().enumerate() {
        let b = ChaosBudget { seed: derive_seed(budget.seed, k as u64 + 1), ..budget.clone() };
        let pois = as_real_vectors(&poisson_pairings(&t, lambda, beta, &b)?);
        let (d, p) = energy_test(&pois, &gauss, permutations, subsample, derive_seed(budget.seed, 100 + k as u64));
        steps.push(FddStep { lambda, beta, energy_distance: d, p_value: p });
        samples.push(pois);
    }
    let endpoint_p_value = if samples.len() >= 2 {
        energy_inequality_test(&samples[0], samples.last().unwrap(), &gauss, permutations, subsample, derive_seed(budget.seed, 0xe9))
    } else {
        1.0
    };
    let monotone = steps.windows(2).all(|w| w[1].energy_distance <= w[0].energy_distance);
    Ok(FddTable { xi, delta, steps, endpoint_p_value, monotone, permutations, subsample, soups: budget.soups, seed: budget.seed })
}
