//! Command-line front end: configuration, dispatch, and run manifests.
//!
//! Every experiment writes its result files plus `manifest.json` into the output
//! directory (`--out`, else `$LOOPSOUP_OUT`, else the working directory).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chaos_convergence::{cil_diagnostic, fdd_convergence_test, standard_schedule, variance_identity_check, ChaosBudget};
use crate::error::{Error, Result};
use crate::gaussian_gmc::{gaussian_dimension, kernel_loop_disk, kernel_matrix, sample_gaussian_field};
use crate::geometry::{Ball, Domain, MoebiusMap, Point, QuadratureGrid, TestFunction};
use crate::integrability_checks::{check_concentration, check_conformal_covariance_disk, check_disk_triple_integral, check_massive_bounds, LemmaCheckResult, MassiveBudget};
use crate::layering_fields::{n_point_estimate, n_point_prediction, write_field_csv, CoveringMethod, NPointBudget, NPointParams};
use crate::loop_measures::snapshot::write_soup;
use crate::loop_measures::{alpha, sample_soup, AlphaBudget, AlphaMethod, AlphaQuery, McBudget, MeasureKind, SoupParams};
use crate::rng::RNG_ALGORITHM;
use crate::sobolev::{cauchy_diagnostic, CauchyBudget};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SampleSoup,
    Alpha,
    OnePoint,
    TwoPoint,
    Kernel,
    GmcSample,
    Chaos,
    Converge,
    Sobolev,
    LemmaCheck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    Loop,
    Disk,
    Massive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormArg {
    /// z ∈ γ̄, δ ≤ diam ≤ R.
    Annulus,
    /// z ∈ γ̄, diam ≥ δ, γ ⊂ 𝔻.
    InDomain,
    /// z, w ∈ γ̄, diam ≥ δ, γ ⊂ 𝔻.
    TwoPoint,
    /// z ∈ γ̄, w ∉ γ̄, diam ≥ δ, γ ⊂ 𝔻.
    Exclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoveringArg {
    Flood,
    Winding,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaArg {
    TripleIntegral,
    Massive,
    Covariance,
    Concentration,
}

/// Flags; each is also a `key = value` line of the config file (same name).
#[derive(Clone, Debug, Default, PartialEq, Parser, Serialize, Deserialize)]
#[command(name = "loopsoup", version, about = "Loop soups, layering fields and imaginary chaos", args_override_self = true)]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// m̄ for the massive kind.
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Comma-separated cutoffs (sobolev).
    #[arg(long)]
    pub deltas: Option<String>,
    /// Point `x,y`.
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub w: Option<String>,
    #[arg(long = "R")]
    pub r: Option<f64>,
    #[arg(long, value_enum)]
    pub form: Option<FormArg>,
    /// Möbius parameter `x,y` of f(w) = e^{iθ}(w − a)/(1 − āw).
    #[arg(long = "moebius-a", allow_hyphen_values = true)]
    pub moebius_a: Option<String>,
    #[arg(long = "moebius-theta", allow_hyphen_values = true)]
    pub moebius_theta: Option<f64>,
    /// Test function `cx,cy,radius`.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<String>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub soups: Option<usize>,
    #[arg(long)]
    pub accepted: Option<usize>,
    #[arg(long = "quad-tol")]
    pub quad_tol: Option<f64>,
    #[arg(long = "q-max")]
    pub q_max: Option<usize>,
    /// Comma-separated λ values (converge).
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long)]
    pub subsample: Option<usize>,
    /// Allow ξ beyond the proven window, up to Δ_ξ < 1/2.
    #[arg(long = "beyond-proof")]
    pub beyond_proof: Option<bool>,
    /// Sobolev order.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long, value_enum)]
    pub lemma: Option<LemmaArg>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub covering: Option<CoveringArg>,
    /// Flood-fill raster resolution.
    #[arg(long = "raster")]
    pub raster: Option<usize>,
    /// Worker threads (0: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Turns a `key = value` file into flag tokens.
fn config_tokens(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k == "command" {
            out.insert(0, v.to_string());
        } else {
            out.push(format!("--{k}"));
            out.push(v.to_string());
        }
    }
    Ok(out)
}

impl RunConfig {
    /// Parses flags, splicing in the config file named by `--config` so that
    /// flags given on the command line win.
    pub fn from_args<I: IntoIterator<Item = String>>(args: I) -> Result<RunConfig> {
        let args: Vec<String> = args.into_iter().collect();
        let mut path = None;
        for (i, a) in args.iter().enumerate() {
            if a == "--config" {
                path = args.get(i + 1).cloned();
            } else if let Some(p) = a.strip_prefix("--config=") {
                path = Some(p.to_string());
            }
        }
        let mut merged = vec![args.first().cloned().unwrap_or_else(|| "loopsoup".into())];
        if let Some(p) = path {
            let text = fs::read_to_string(&p).map_err(|e| Error::Config(format!("cannot read config {p}: {e}")))?;
            let mut tokens = config_tokens(&text)?;
            let has_command = args.iter().skip(1).any(|a| Command::from_str(a, false).is_ok());
            if has_command && tokens.first().is_some_and(|t| !t.starts_with("--")) {
                tokens.remove(0);
            }
            // Command-line positional first, then file flags, then command-line flags.
            let (pos, flags): (Vec<&String>, Vec<&String>) = {
                let rest = &args[1..];
                match rest.first() {
                    Some(f) if !f.starts_with("--") => (vec![f], rest[1..].iter().collect()),
                    _ => (vec![], rest.iter().collect()),
                }
            };
            merged.extend(pos.into_iter().cloned());
            merged.extend(tokens);
            merged.extend(flags.into_iter().cloned());
        } else {
            merged.extend(args.into_iter().skip(1));
        }
        RunConfig::try_parse_from(merged).map_err(|e| Error::Config(e.to_string()))
    }

    /// Window guards that need no computation.
    pub fn validate(&self) -> Result<()> {
        if self.command.is_none() {
            return Err(Error::Config("no command given".into()));
        }
        if let Some(b) = self.beta {
            if !(0.0..2.0 * PI).contains(&b) {
                return Err(Error::Config(format!("β = {b} lies outside the window [0, 2π)")));
            }
        }
        for (name, v) in [("lambda", self.lambda), ("delta", self.delta), ("R", self.r)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name} = {v} must be positive")));
                }
            }
        }
        if let Some(m) = self.mass {
            if !(m >= 0.0) {
                return Err(Error::Config(format!("mass = {m} must be ≥ 0")));
            }
        }
        if let Some(s) = self.soups {
            if s < 2 {
                return Err(Error::Config("soups must be ≥ 2".into()));
            }
        }
        Ok(())
    }

    fn kind(&self) -> Result<MeasureKind> {
        Ok(match self.kind.unwrap_or(KindArg::Loop) {
            KindArg::Loop => MeasureKind::Loop,
            KindArg::Disk => MeasureKind::Disk,
            KindArg::Massive => MeasureKind::massive(self.mass.unwrap_or(1.0))?,
        })
    }

    fn need<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
        v.ok_or_else(|| Error::Config(format!("missing --{name}")))
    }

    fn point(s: &Option<String>, name: &str) -> Result<Point> {
        let s = s.as_ref().ok_or_else(|| Error::Config(format!("missing --{name}")))?;
        let v = parse_list(s)?;
        if v.len() != 2 {
            return Err(Error::Config(format!("--{name} expects x,y, got {s}")));
        }
        Ok(Point::new(v[0], v[1]))
    }

    fn phi(&self) -> Result<TestFunction> {
        let v = parse_list(self.phi.as_deref().unwrap_or("0,0,0.5"))?;
        if v.len() != 3 {
            return Err(Error::Config("--phi expects cx,cy,radius".into()));
        }
        TestFunction::new(Point::new(v[0], v[1]), v[2], 1.0).map_err(|e| Error::Config(e.to_string()))
    }

    fn covering(&self) -> CoveringMethod {
        match self.covering.unwrap_or(CoveringArg::Flood) {
            CoveringArg::Flood => CoveringMethod::FloodFill { resolution_factor: self.raster.unwrap_or(256) },
            CoveringArg::Winding => CoveringMethod::WindingNumber,
        }
    }

    fn alpha_budget(&self) -> AlphaBudget {
        AlphaBudget {
            method: None,
            quad_tol: self.quad_tol.unwrap_or(1e-10),
            mc: McBudget { accepted: self.accepted.unwrap_or(20_000), seed: self.seed.unwrap_or(1), ..Default::default() },
        }
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().or_else(|| std::env::var_os("LOOPSOUP_OUT").map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| Error::Config(format!("cannot parse {t:?}: {e}")))).collect()
}

fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Bias controls in effect during a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub t_min: Option<f64>,
    pub raster_resolution: Option<usize>,
    pub psd_jitter: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub rng: String,
    pub bias: BiasReport,
    /// SHA-256 of every emitted file, by file name.
    pub checksums: BTreeMap<String, String>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    bias: BiasReport,
}

impl Outputs {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let mut f = self.create(name)?;
        serde_json::to_writer_pretty(&mut f, v)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Executes the configured experiment and writes its files and manifest.
pub fn run(config: &RunConfig) -> Result<RunManifest> {
    config.validate()?;
    let start = Instant::now();
    let dir = config.out_dir();
    fs::create_dir_all(&dir)?;
    let mut out = Outputs { dir: dir.clone(), files: Vec::new(), bias: BiasReport::default() };
    let threads = config.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| dispatch(config, &mut out))?;
    let mut checksums = BTreeMap::new();
    for f in &out.files {
        checksums.insert(f.clone(), sha256_hex(&dir.join(f))?);
    }
    let manifest = RunManifest {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        rng: RNG_ALGORITHM.to_string(),
        bias: out.bias.clone(),
        checksums,
    };
    let mut f = BufWriter::new(File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.flush()?;
    Ok(manifest)
}

fn dispatch(c: &RunConfig, out: &mut Outputs) -> Result<()> {
    let kind = c.kind()?;
    match c.command.expect("validated") {
        Command::SampleSoup => {
            let delta = RunConfig::need(c.delta, "delta")?;
            let p = SoupParams::new(c.lambda.unwrap_or(1.0), delta, kind, c.seed());
            out.bias.t_min = Some(p.t_min);
            let soup = sample_soup(&p)?;
            let mut f = out.create("soup.bin")?;
            write_soup(&soup, &mut f)?;
            f.flush()?;
            let mut w = csv::Writer::from_writer(out.create("soup_summary.csv")?);
            w.write_record(["loops", "lambda", "delta", "kind", "seed"])?;
            w.write_record([soup.loops.len().to_string(), f17(p.lambda), f17(delta), kind.name().into(), p.seed.to_string()])?;
            w.flush()?;
        }
        Command::Alpha => {
            let z = RunConfig::point(&c.z, "z")?;
            let delta = RunConfig::need(c.delta, "delta")?;
            let form = c.form.unwrap_or(FormArg::Annulus);
            let query = match form {
                FormArg::Annulus => AlphaQuery::Annulus { z, delta, r_max: RunConfig::need(c.r, "R")? },
                FormArg::InDomain => AlphaQuery::InDomain { z, delta, v: Ball::UNIT },
                FormArg::TwoPoint => AlphaQuery::TwoPointDomain { z, t: RunConfig::point(&c.w, "w")?, delta, v: Ball::UNIT },
                FormArg::Exclusive => AlphaQuery::Exclusive { z, t: RunConfig::point(&c.w, "w")?, delta, v: Ball::UNIT },
            };
            let budget = c.alpha_budget();
            let v = alpha(&query, kind, &budget)?;
            let closed = match (form, kind) {
                (FormArg::Annulus, MeasureKind::Loop | MeasureKind::Disk) => f17(kind.eta() * (c.r.unwrap_or(1.0) / delta).ln()),
                // Every loop covering z and w has diameter ≥ |z − w|, so the cutoff is inactive.
                (FormArg::TwoPoint, MeasureKind::Loop) => match query {
                    AlphaQuery::TwoPointDomain { z, t, .. } if z.dist(t) >= delta => f17(kernel_loop_disk(z, t)?),
                    _ => String::new(),
                },
                _ => String::new(),
            };
            if v.method == AlphaMethod::MonteCarlo {
                out.bias.raster_resolution = Some(budget.mc.raster_resolution);
            }
            let mut w = csv::Writer::from_writer(out.create("alpha.csv")?);
            w.write_record(["form", "kind", "z", "delta", "value", "std_error", "method", "closed_form"])?;
            w.write_record([
                format!("{form:?}"),
                kind.name().into(),
                format!("{} {}", f17(z.x), f17(z.y)),
                f17(delta),
                f17(v.value),
                f17(v.std_error),
                format!("{:?}", v.method),
                closed,
            ])?;
            w.flush()?;
        }
        Command::OnePoint | Command::TwoPoint => {
            let mut pts = vec![RunConfig::point(&c.z, "z")?];
            if c.command == Some(Command::TwoPoint) {
                pts.push(RunConfig::point(&c.w, "w")?);
            }
            let mut params = NPointParams::new(c.lambda.unwrap_or(1.0), RunConfig::need(c.beta, "beta")?, RunConfig::need(c.delta, "delta")?, kind);
            params.method = c.covering();
            if let CoveringMethod::FloodFill { resolution_factor } = params.method {
                out.bias.raster_resolution = Some(resolution_factor);
            }
            out.bias.t_min = Some(params.delta * params.delta / 50.0);
            let est = n_point_estimate(&pts, &params, &NPointBudget { soups: c.soups.unwrap_or(10_000), seed: c.seed() })?;
            let pred = n_point_prediction(&pts, &params, &c.alpha_budget())?;
            let mut w = csv::Writer::from_writer(out.create(if pts.len() == 1 { "one_point.csv" } else { "two_point.csv" })?);
            w.write_record(["points", "estimate_re", "estimate_im", "std_error", "closed_form", "closed_form_std_error", "closed_form_method", "soups", "seed"])?;
            let p: Vec<String> = pts.iter().map(|p| format!("{} {}", f17(p.x), f17(p.y))).collect();
            w.write_record([
                p.join(";"),
                f17(est.estimate.re),
                f17(est.estimate.im),
                f17(est.std_error),
                f17(pred.value),
                f17(pred.std_error),
                format!("{:?}", pred.method),
                est.soups.to_string(),
                est.seed.to_string(),
            ])?;
            w.flush()?;
        }
        Command::Kernel | Command::GmcSample => {
            let grid = Arc::new(QuadratureGrid::unit_disk(c.resolution.unwrap_or(8))?);
            let delta = RunConfig::need(c.delta, "delta")?;
            let k = kernel_matrix(&grid, delta, kind, &Domain::unit_disk(), &c.alpha_budget())?;
            out.bias.psd_jitter = Some(k.jitter);
            if c.command == Some(Command::Kernel) {
                let csv = out.create("kernel.csv")?;
                let json = out.create("kernel.json")?;
                k.write(csv, json)?;
            } else {
                let xi = RunConfig::need(c.xi, "xi")?;
                let field = sample_gaussian_field(&k, xi, c.seed(), 0)?;
                write_field_csv(&field, out.create("gmc_field.csv")?)?;
                out.json("gmc_field.json", &serde_json::json!({ "xi": xi, "delta": delta, "dimension": gaussian_dimension(kind, xi), "seed": c.seed() }))?;
            }
        }
        Command::Chaos => {
            let (lambda, beta, xi) = (c.lambda.unwrap_or(16.0), c.beta, RunConfig::need(c.xi, "xi")?);
            let beta = beta.unwrap_or(xi / lambda.sqrt());
            let budget = chaos_budget(c);
            let phi = c.phi()?;
            let delta = RunConfig::need(c.delta, "delta")?;
            let reports = cil_diagnostic(xi, &[(lambda, beta)], &phi, delta, kind, &budget, c.beyond_proof.unwrap_or(false))?;
            let mut w = csv::Writer::from_writer(out.create("chaos_terms.csv")?);
            w.write_record(["q", "poisson_norm", "poisson_std_error", "gaussian_norm", "gaussian_std_error", "cross_l2_gap", "cross_std_error", "method"])?;
            for t in &reports[0].terms {
                w.write_record([
                    t.q.to_string(),
                    f17(t.poisson_norm),
                    f17(t.poisson_std_error),
                    f17(t.gaussian_norm),
                    f17(t.gaussian_std_error),
                    f17(t.cross_l2_gap),
                    f17(t.cross_std_error),
                    format!("{:?}", t.method),
                ])?;
            }
            w.flush()?;
            out.json("chaos_report.json", &reports[0])?;
            if kind == MeasureKind::Disk && c.soups.is_some() {
                let v = variance_identity_check(&phi, delta, lambda, beta, kind, &budget)?;
                out.json("variance_identity.json", &v)?;
            }
        }
        Command::Converge => {
            let xi = RunConfig::need(c.xi, "xi")?;
            let lambdas = parse_list(c.schedule.as_deref().unwrap_or("4,16,64,256"))?;
            let schedule = standard_schedule(xi, &lambdas);
            let phi = c.phi()?;
            let delta = RunConfig::need(c.delta, "delta")?;
            let budget = chaos_budget(c);
            let beyond = c.beyond_proof.unwrap_or(false);
            let reports = cil_diagnostic(xi, &schedule, &phi, delta, kind, &budget, beyond)?;
            let fdd = fdd_convergence_test(xi, &schedule, &[phi], delta, kind, &budget, c.permutations.unwrap_or(1000), c.subsample.unwrap_or(500), beyond)?;
            let mut w = csv::Writer::from_writer(out.create("converge.csv")?);
            let mut header = vec!["lambda".to_string(), "beta".into(), "mean_gap".into()];
            for q in 1..=4.min(budget.q_max) {
                header.push(format!("cross_gap_q{q}"));
            }
            header.extend(["energy_distance".into(), "p_value".into()]);
            w.write_record(&header)?;
            for (r, s) in reports.iter().zip(&fdd.steps) {
                let mut row = vec![f17(r.lambda), f17(r.beta), f17(r.mean_gap)];
                row.extend(r.terms.iter().take(4).map(|t| f17(t.cross_l2_gap)));
                row.extend([f17(s.energy_distance), f17(s.p_value)]);
                w.write_record(&row)?;
            }
            w.flush()?;
            out.json("converge.json", &serde_json::json!({ "reports": reports, "fdd": fdd }))?;
        }
        Command::Sobolev => {
            let deltas = parse_list(c.deltas.as_deref().unwrap_or("0.4,0.2,0.1,0.05"))?;
            let budget = CauchyBudget {
                soups: c.soups.unwrap_or(1000),
                seed: c.seed(),
                resolution: c.resolution.unwrap_or(32),
                modes: c.modes.unwrap_or(400),
                method: c.covering(),
            };
            let lambda = c.lambda.unwrap_or(0.25);
            let beta = c.beta.unwrap_or(PI / 2.0);
            let table = cauchy_diagnostic(lambda, beta, kind, &deltas, c.alpha.unwrap_or(2.0), &budget)?;
            let mut w = csv::Writer::from_writer(out.create("sobolev.csv")?);
            w.write_record(["delta", "delta_prime", "mean_norm", "std_error", "mean_tail_estimate"])?;
            for r in &table.rows {
                w.write_record([f17(r.delta), f17(r.delta_prime), f17(r.mean_norm), f17(r.std_error), f17(r.mean_tail_estimate)])?;
            }
            w.flush()?;
            out.json("sobolev.json", &table)?;
            let basis = crate::sobolev::build_basis(budget.modes)?;
            basis.write_csv(out.create("basis.csv")?)?;
        }
        Command::LemmaCheck => {
            let r: LemmaCheckResult = match c.lemma.unwrap_or(LemmaArg::TripleIntegral) {
                LemmaArg::TripleIntegral => check_disk_triple_integral(c.a.unwrap_or(0.8), c.b.unwrap_or(0.4), c.c.unwrap_or(0.4), c.resolution.unwrap_or(32))?,
                LemmaArg::Massive => {
                    let z = c.z.as_ref().map(|_| RunConfig::point(&c.z, "z")).transpose()?.unwrap_or(Point::ORIGIN);
                    let budget = MassiveBudget {
                        delta: c.delta.unwrap_or(0.02),
                        mc: c.alpha_budget().mc,
                        soups: c.soups.unwrap_or(40),
                        lambda: c.lambda.unwrap_or(1.0),
                        seed: c.seed(),
                    };
                    check_massive_bounds(c.mass.unwrap_or(1.0), c.r.unwrap_or(0.5), z, &budget)?
                }
                LemmaArg::Covariance => {
                    let a = c.moebius_a.as_ref().map(|_| RunConfig::point(&c.moebius_a, "moebius-a")).transpose()?.unwrap_or(Point::ORIGIN);
                    let f = MoebiusMap::new(a, c.moebius_theta.unwrap_or(0.0))?;
                    check_conformal_covariance_disk(&f, &c.phi()?, c.lambda.unwrap_or(1.0), c.beta.unwrap_or(PI / 2.0), c.resolution.unwrap_or(32), c.quad_tol.unwrap_or(1e-10))?
                }
                LemmaArg::Concentration => {
                    let mc = McBudget { accepted: c.accepted.unwrap_or(20_000), max_proposals: 2_000_000, seed: c.seed(), ..Default::default() };
                    check_concentration(c.a.unwrap_or(0.25), c.b.unwrap_or(0.5), c.t.unwrap_or(1.0), &mc)?
                }
            };
            out.json("lemma_check.json", &r)?;
        }
    }
    Ok(())
}

fn chaos_budget(c: &RunConfig) -> ChaosBudget {
    let d = ChaosBudget::default();
    ChaosBudget {
        resolution: c.resolution.unwrap_or(d.resolution),
        q_max: c.q_max.unwrap_or(d.q_max),
        alpha: AlphaBudget { quad_tol: c.quad_tol.unwrap_or(1e-8), ..c.alpha_budget() },
        soups: c.soups.unwrap_or(d.soups),
        seed: c.seed(),
        method: c.covering(),
    }
}

/// Entry point of the binary: returns the process exit code.
pub fn main_with_args<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let args: Vec<String> = args.into_iter().collect();
    if args.len() < 2 || args.iter().any(|a| matches!(a.as_str(), "-h" | "--help" | "-V" | "--version")) {
        let _ = RunConfig::parse_from(&args);
    }
    let result = RunConfig::from_args(args).and_then(|c| run(&c).map(|m| (c, m)));
    match result {
        Ok((config, m)) => {
            for f in m.checksums.keys() {
                println!("{}", config.out_dir().join(f).display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.exit_code()
        }
    }
}

fn error_json(e: &Error) -> String {
    serde_json::json!({ "error_class": format!("{:?}", e.class()), "exit_code": e.exit_code(), "message": e.to_string() }).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        std::iter::once("loopsoup".to_string()).chain(s.split_whitespace().map(String::from)).collect()
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        fs::write(&p, "# alpha run\ncommand = alpha\nkind = disk\ndelta = 0.2 # cutoff\nR = 1\n").unwrap();
        let c = RunConfig::from_args(args(&format!("--config {} --delta 0.1 --z 0,0", p.display()))).unwrap();
        assert_eq!(c.command, Some(Command::Alpha));
        assert_eq!(c.kind, Some(KindArg::Disk));
        assert_eq!(c.delta, Some(0.1));
        assert_eq!(c.r, Some(1.0));
    }

    #[test]
    fn beta_guard_names_window() {
        let c = RunConfig::from_args(args("one-point --beta 7 --z 0,0 --delta 0.1")).unwrap();
        let e = c.validate().unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("[0, 2π)"));
    }

    #[test]
    fn alpha_annulus_row() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig::from_args(args(&format!("alpha --kind loop --form annulus --z 0,0 --delta 0.1 --R 1 --out {}", dir.path().display()))).unwrap();
        let m = run(&c).unwrap();
        let text = fs::read_to_string(dir.path().join("alpha.csv")).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert!((row[4].parse::<f64>().unwrap() - 0.460517).abs() < 1e-6);
        assert_eq!(row[6], "ClosedForm");
        assert_eq!(m.checksums.len(), 1);
        let again = run(&c).unwrap();
        assert_eq!(again.checksums, m.checksums);
    }
}
