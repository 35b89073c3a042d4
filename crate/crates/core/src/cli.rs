//! Command-line front end: `family`, `sweep`, `verify` and `reproduce`.
//!
//! Exit codes: 0 ok, 1 failed check, 2 usage or parse error, 3 invalid
//! input, 4 search budget exhausted. `CORRLAB_THREADS` caps the worker pool.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    advantage_estimate, am_cost_bounds, bm_cost, cost_lower_bound_at, cost_upper_bound, Cost, CostBounds,
};
use crate::checks;
use crate::corrmat::{am_q, make_am, make_bm, make_edm, make_modified_edm, make_schmidt_scaled_edm, Correlation};
use crate::error::{Error, Result};
use crate::factorize::{
    bm_nonneg_rank_lower, explicit_am_factorization, explicit_bm_factorization, explicit_edm_factorization,
    verify_noisy_psd_factorization, verify_psd_factorization, PsdFactorization, RankBounds,
};
use crate::io::{correlation_to_csv, fmt_f64, read_correlation, read_json, write_text};
use crate::reach::{find_feasible_st, phat, threshold_upper_bound, FeasibilityResult, SearchOptions, FEASIBLE_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "corrlab", version, about = "Correlation generation under depolarizing noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a correlation family and print it as CSV or JSON.
    Family(FamilyCmd),
    /// Scan noise strengths and tabulate reachability and cost bounds.
    Sweep(SweepCmd),
    /// Check a factorization or a certificate file against a correlation.
    Verify(VerifyCmd),
    /// Rerun a fixed reproduction preset and report pass/fail per check.
    Reproduce(ReproduceCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Edm,
    EdmMod,
    Bm,
    Am,
    /// Distance matrix rescaled by a Schmidt spectrum.
    #[value(name = "thm1")]
    #[serde(rename = "thm1")]
    SchmidtEdm,
    Product,
    File,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyParams {
    /// Polygon order.
    #[arg(long)]
    pub m: Option<usize>,
    /// Inner polygon scale, in (0, 1).
    #[arg(long)]
    pub k: Option<f64>,
    /// Distinct reals defining a distance matrix.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alphas: Option<Vec<f64>>,
    /// Positive row scaling for `edm-mod`.
    #[arg(long, value_delimiter = ',')]
    pub left: Option<Vec<f64>>,
    /// Positive column scaling for `edm-mod`.
    #[arg(long, value_delimiter = ',')]
    pub right: Option<Vec<f64>>,
    /// Squared Schmidt coefficients, descending, for `thm1`.
    #[arg(long, value_delimiter = ',')]
    pub schmidt: Option<Vec<f64>>,
    /// Row weights for `product`: `uniform:N` or a comma list.
    #[arg(long)]
    pub u: Option<String>,
    /// Column weights for `product`.
    #[arg(long)]
    pub v: Option<String>,
    /// Correlation file (CSV or JSON) for `file`.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

impl FamilyParams {
    fn merged_over(self, base: FamilyParams) -> FamilyParams {
        FamilyParams {
            m: self.m.or(base.m),
            k: self.k.or(base.k),
            alphas: self.alphas.or(base.alphas),
            left: self.left.or(base.left),
            right: self.right.or(base.right),
            schmidt: self.schmidt.or(base.schmidt),
            u: self.u.or(base.u),
            v: self.v.or(base.v),
            input: self.input.or(base.input),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct FamilyCmd {
    pub name: FamilyName,
    #[command(flatten)]
    pub params: FamilyParams,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the explicit PSD factorization (edm, bm, am).
    #[arg(long)]
    pub factorization: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    /// JSON or TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyName>,
    #[command(flatten)]
    pub params: FamilyParams,
    #[arg(long)]
    pub lambda_start: Option<f64>,
    #[arg(long)]
    pub lambda_stop: Option<f64>,
    #[arg(long)]
    pub lambda_count: Option<usize>,
    /// Explicit ascending grid; overrides start/stop/count.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Sweep CSV; stdout if absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Certificates JSON.
    #[arg(long)]
    pub certificates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyCmd {
    /// Correlation CSV or JSON. Optional with a sweep certificate file.
    #[arg(long)]
    pub correlation: Option<PathBuf>,
    #[arg(long, conflicts_with = "certificate", required_unless_present = "certificate")]
    pub factorization: Option<PathBuf>,
    #[arg(long)]
    pub certificate: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    #[value(name = "thm2")]
    GradualDecay,
    #[value(name = "thm3")]
    SuddenDeath,
    #[value(name = "prop1-roundtrip")]
    RoundTrip,
}

#[derive(Debug, Args)]
pub struct ReproduceCmd {
    #[arg(value_enum)]
    pub preset: Preset,
    /// Directory for the report and CSV artifacts.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Sweep settings after merging the config file and flags.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub family: Option<FamilyName>,
    #[serde(flatten)]
    pub params: FamilyParams,
    pub lambda_start: Option<f64>,
    pub lambda_stop: Option<f64>,
    pub lambda_count: Option<usize>,
    pub lambdas: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
    pub restarts: Option<usize>,
    pub output: Option<PathBuf>,
    pub certificates: Option<PathBuf>,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        if is_toml {
            toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
        } else {
            Ok(serde_json::from_str(&text)?)
        }
    }

    fn merge_flags(self, cmd: SweepCmd) -> Self {
        SweepConfig {
            family: cmd.family.or(self.family),
            params: cmd.params.merged_over(self.params),
            lambda_start: cmd.lambda_start.or(self.lambda_start),
            lambda_stop: cmd.lambda_stop.or(self.lambda_stop),
            lambda_count: cmd.lambda_count.or(self.lambda_count),
            lambdas: cmd.lambdas.or(self.lambdas),
            seed: cmd.seed.or(self.seed),
            max_iters: cmd.max_iters.or(self.max_iters),
            restarts: cmd.restarts.or(self.restarts),
            output: cmd.output.or(self.output),
            certificates: cmd.certificates.or(self.certificates),
        }
    }

    /// The noise grid, ascending and inside `[0, 1)`.
    pub fn grid(&self) -> Result<Vec<f64>> {
        let grid = match &self.lambdas {
            Some(list) => list.clone(),
            None => {
                let start = self.lambda_start.unwrap_or(0.0);
                let stop = self.lambda_stop.unwrap_or(0.9);
                let count = self.lambda_count.unwrap_or(10);
                if count == 0 || stop < start {
                    return Err(Error::BadParameter("empty noise grid".into()));
                }
                if count == 1 {
                    vec![start]
                } else {
                    (0..count)
                        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                        .collect()
                }
            }
        };
        if grid.is_empty() {
            return Err(Error::BadParameter("empty noise grid".into()));
        }
        if let Some(&bad) = grid.iter().find(|l| !(0.0..1.0).contains(*l)) {
            return Err(Error::BadLambda(bad));
        }
        if grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::BadParameter("noise grid must be ascending".into()));
        }
        Ok(grid)
    }

    fn search(&self) -> SearchOptions {
        let d = SearchOptions::default();
        SearchOptions {
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            restarts: self.restarts.unwrap_or(d.restarts),
            seed: self.seed.unwrap_or(d.seed),
            ..d
        }
    }
}

/// A built family plus what is known about it in closed form.
#[derive(Debug, Clone)]
pub struct Built {
    pub correlation: Correlation,
    pub metadata: Vec<(String, String)>,
    pub polygon: Option<(FamilyName, usize, f64)>,
    pub factorization: Option<PsdFactorization>,
}

fn need<T: Clone>(v: &Option<T>, name: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::BadParameter(format!("missing --{name}")))
}

fn parse_weights(spec: &str) -> Result<Vec<f64>> {
    if let Some(n) = spec.strip_prefix("uniform:") {
        let n: usize = n.trim().parse().map_err(|_| Error::Parse(format!("bad weights {spec}")))?;
        if n == 0 {
            return Err(Error::BadParameter("uniform:0".into()));
        }
        return Ok(vec![1.0 / n as f64; n]);
    }
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad weights {spec}"))))
        .collect()
}

fn family_label(name: FamilyName) -> String {
    name.to_possible_value().expect("no skipped variants").get_name().to_string()
}

pub fn build_family(name: FamilyName, params: &FamilyParams) -> Result<Built> {
    let mut metadata = vec![("family".to_string(), family_label(name))];
    let mut polygon = None;
    let mut factorization = None;
    let correlation = match name {
        FamilyName::Edm => {
            let alphas = need(&params.alphas, "alphas")?;
            if alphas.iter().sum::<f64>().abs() <= 1e-12 {
                factorization = Some(explicit_edm_factorization(&alphas)?);
            }
            make_edm(&alphas)?
        }
        FamilyName::EdmMod => {
            let alphas = need(&params.alphas, "alphas")?;
            let block = make_modified_edm(&alphas, &need(&params.left, "left")?, &need(&params.right, "right")?)?;
            let total = block.sum();
            metadata.push(("scale".into(), fmt_f64(total)));
            Correlation::normalize(&block.row_iter().map(|r| r.iter().cloned().collect()).collect::<Vec<Vec<f64>>>())?
        }
        FamilyName::Bm => {
            let (m, k) = (need(&params.m, "m")?, need(&params.k, "k")?);
            metadata.push(("threshold".into(), fmt_f64(1.0 - k.sqrt())));
            polygon = Some((name, m, k));
            factorization = Some(explicit_bm_factorization(m, k)?);
            make_bm(m, k)?
        }
        FamilyName::Am => {
            let (m, k) = (need(&params.m, "m")?, need(&params.k, "k")?);
            let p = make_am(m, k)?;
            metadata.push(("q".into(), fmt_f64(am_q(k))));
            polygon = Some((name, m, k));
            factorization = Some(explicit_am_factorization(m, k)?);
            p
        }
        FamilyName::SchmidtEdm => {
            let fam = make_schmidt_scaled_edm(&need(&params.schmidt, "schmidt")?, &need(&params.alphas, "alphas")?)?;
            metadata.push(("r".into(), fmt_f64(fam.r)));
            metadata.push(("mu1".into(), fmt_f64(fam.mu1)));
            fam.correlation
        }
        FamilyName::Product => {
            let u = parse_weights(&need(&params.u, "u")?)?;
            let v = parse_weights(&need(&params.v, "v")?)?;
            Correlation::product(&u, &v)?
        }
        FamilyName::File => read_correlation(&need(&params.input, "input")?)?,
    };
    metadata.push(("n".into(), correlation.n().to_string()));
    metadata.push(("threshold_bound".into(), fmt_f64(threshold_upper_bound(&correlation))));
    Ok(Built {
        correlation,
        metadata,
        polygon,
        factorization,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Feasible,
    /// Certified out of reach by a zero entry or the permutation bound.
    Unreachable,
    /// The search ran out of budget; nothing is certified.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub status: RowStatus,
    pub threshold_bound: f64,
    pub certificate: Option<FeasibilityResult>,
    pub cost: Option<CostBounds>,
    pub advantage_lower: Option<f64>,
    pub advantage_upper: Option<f64>,
}

fn rank_plus_bounds(built: &Built) -> Result<RankBounds> {
    let p = &built.correlation;
    let n = p.n();
    let rank = p.rank(1e-10);
    if let Some((FamilyName::Bm, m, k)) = built.polygon {
        let lower = bm_nonneg_rank_lower(m, k)?.max(rank);
        return RankBounds::new(lower, n, "polygon angle bound", "trivial n");
    }
    RankBounds::new(rank, n, "matrix rank", "trivial n")
}

fn sweep_row(built: &Built, ranks: &RankBounds, lambda: f64, opts: &SearchOptions) -> Result<SweepRow> {
    let p = &built.correlation;
    let bound = threshold_upper_bound(p);
    let zero_entry = p.min_entry() <= 0.0;
    let unreachable = |lambda, source: &str| SweepRow {
        lambda,
        status: RowStatus::Unreachable,
        threshold_bound: bound,
        certificate: None,
        cost: Some(CostBounds::unreachable(lambda, source)),
        advantage_lower: Some(0.0),
        advantage_upper: Some(0.0),
    };
    if lambda > bound + 1e-12 || (lambda > 0.0 && zero_entry) {
        return Ok(unreachable(lambda, "permutation bound or zero entry"));
    }
    if let Some((FamilyName::Am, _, k)) = built.polygon {
        // cost lower bound diverges at q, and reachable noise forms an interval
        if lambda >= am_q(k) {
            return Ok(unreachable(lambda, "extended family edge"));
        }
    }
    let cert = find_feasible_st(p, lambda, opts)?;
    if !cert.feasible {
        return Ok(SweepRow {
            lambda,
            status: RowStatus::Unresolved,
            threshold_bound: bound,
            certificate: Some(cert),
            cost: None,
            advantage_lower: None,
            advantage_upper: None,
        });
    }
    let s = &cert.s.as_ref().expect("feasible").weights;
    let t = &cert.t.as_ref().expect("feasible").weights;
    let floor = if p.rank(1e-10) >= 2 { 2.0 } else { 1.0 };
    let cert_upper = cost_upper_bound(p, lambda, s, t, p.n() as u64)? as f64;
    let cost = match built.polygon {
        Some((FamilyName::Bm, m, k)) => bm_cost(m, k, lambda)?.to_bounds(lambda),
        Some((FamilyName::Am, m, k)) => {
            let q = am_q(k);
            let (lower, upper, upper_source) = if lambda > 0.0 {
                let closed = am_cost_bounds(m, k, q - lambda)?;
                let lo = closed.lower.finite().unwrap_or(floor).max(floor);
                let hi = closed.upper.finite().unwrap_or(f64::INFINITY);
                if hi <= cert_upper {
                    (lo, hi, "closed form, explicit certificate")
                } else {
                    (lo, cert_upper, "certificate with trivial factorization")
                }
            } else {
                (floor, 3.0, "rank-3 factorization")
            };
            CostBounds::new(
                lambda,
                Cost::Finite(lower.min(upper)),
                Cost::Finite(upper),
                "closed form, aggregated constraints",
                upper_source,
                false,
            )?
        }
        _ => {
            let point = cost_lower_bound_at(p, lambda, s, t)?;
            let lower = point.value.max(floor).min(cert_upper);
            CostBounds::new(
                lambda,
                Cost::Finite(lower),
                Cost::Finite(cert_upper),
                "point evaluation at the certificate",
                "certificate with trivial factorization",
                point.heuristic,
            )?
        }
    };
    let adv = advantage_estimate(p, lambda, ranks, &cost)?;
    Ok(SweepRow {
        lambda,
        status: RowStatus::Feasible,
        threshold_bound: bound,
        certificate: Some(cert),
        cost: Some(cost),
        advantage_lower: Some(adv.s_lower),
        advantage_upper: Some(adv.s_upper),
    })
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("CORRLAB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::BadParameter(format!("CORRLAB_THREADS={v}")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| Error::BadParameter(e.to_string()))
}

/// Rows in grid order. Each row uses its own seed so the result does not
/// depend on scheduling.
pub fn run_sweep(built: &Built, grid: &[f64], opts: &SearchOptions) -> Result<Vec<SweepRow>> {
    let ranks = rank_plus_bounds(built)?;
    let pool = thread_pool()?;
    pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, &lambda)| {
                let row_opts = SearchOptions {
                    seed: opts.seed.wrapping_add(i as u64),
                    ..*opts
                };
                sweep_row(built, &ranks, lambda, &row_opts)
            })
            .collect()
    })
}

pub const SWEEP_HEADER: &str =
    "lambda,feasible,margin,threshold_bound,cost_lower,cost_upper,advantage_lower,advantage_upper";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    let cost_cell = |c: Option<Cost>, status: RowStatus| match (c, status) {
        (_, RowStatus::Unresolved) => "unresolved".to_string(),
        (Some(Cost::Finite(v)), _) => fmt_f64(v),
        _ => "unreachable".to_string(),
    };
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in rows {
        let margin = r.certificate.as_ref().map(|c| c.margin);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(r.lambda),
            r.status == RowStatus::Feasible,
            opt(margin),
            fmt_f64(r.threshold_bound),
            cost_cell(r.cost.as_ref().map(|c| c.lower), r.status),
            cost_cell(r.cost.as_ref().map(|c| c.upper), r.status),
            opt(r.advantage_lower),
            opt(r.advantage_upper),
        ));
    }
    out
}

/// Certificate dump written next to a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateFile {
    pub correlation: Correlation,
    pub certificates: Vec<FeasibilityResult>,
}

/// Report printed by `verify`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checked: usize,
    pub details: serde_json::Value,
}

fn verify_factorization(p: &Correlation, f: &PsdFactorization, lambda: f64) -> Result<VerifyReport> {
    let plain = verify_psd_factorization(p, f, 1e-9)?;
    let noisy = match verify_noisy_psd_factorization(p, f, lambda, 1e-9) {
        Ok(r) => Some(r),
        Err(Error::SingularSum { .. }) if lambda == 0.0 => None,
        Err(e) => return Err(e),
    };
    let passed = plain.passed && noisy.as_ref().is_none_or(|r| r.passed);
    Ok(VerifyReport {
        passed,
        checked: 1,
        details: serde_json::json!({ "lambda": lambda, "plain": plain, "noisy": noisy }),
    })
}

fn verify_certificates(p: &Correlation, certs: &[FeasibilityResult]) -> Result<VerifyReport> {
    let mut failures = Vec::new();
    let mut checked = 0;
    for c in certs.iter().filter(|c| c.feasible) {
        checked += 1;
        let (Some(s), Some(t)) = (&c.s, &c.t) else {
            failures.push(serde_json::json!({ "lambda": c.lambda, "reason": "missing weights" }));
            continue;
        };
        let low = phat(p, c.lambda, &s.weights, &t.weights)?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if low < FEASIBLE_TOL || !s.strict || !t.strict {
            failures.push(serde_json::json!({ "lambda": c.lambda, "min_entry": low }));
        }
    }
    Ok(VerifyReport {
        passed: failures.is_empty(),
        checked,
        details: serde_json::json!({ "failures": failures }),
    })
}

fn cmd_verify(cmd: VerifyCmd, out: &mut dyn Write) -> Result<i32> {
    let report = if let Some(path) = &cmd.certificate {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let (p, certs) = if value.get("certificates").is_some() {
            let file: CertificateFile = serde_json::from_value(value)?;
            let p = match &cmd.correlation {
                Some(c) => read_correlation(c)?,
                None => file.correlation,
            };
            (p, file.certificates)
        } else {
            let p = read_correlation(cmd.correlation.as_deref().ok_or_else(|| {
                Error::Parse("--correlation is required for a bare certificate".into())
            })?)?;
            let certs = if value.is_array() {
                serde_json::from_value(value)?
            } else {
                vec![serde_json::from_value(value)?]
            };
            (p, certs)
        };
        verify_certificates(&p, &certs)?
    } else {
        let p = read_correlation(
            cmd.correlation
                .as_deref()
                .ok_or_else(|| Error::Parse("--correlation is required".into()))?,
        )?;
        let f: PsdFactorization = read_json(cmd.factorization.as_deref().expect("clap enforces one of the two"))?;
        verify_factorization(&p, &f, cmd.lambda)?
    };
    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(if report.passed { EXIT_OK } else { EXIT_FAIL })
}

fn cmd_family(cmd: FamilyCmd, out: &mut dyn Write) -> Result<i32> {
    let built = build_family(cmd.name, &cmd.params)?;
    let text = match cmd.format {
        Format::Csv => correlation_to_csv(&built.correlation, &built.metadata),
        Format::Json => {
            let meta: serde_json::Map<String, serde_json::Value> = built
                .metadata
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect();
            let mut v = serde_json::to_value(&built.correlation)?;
            v["metadata"] = serde_json::Value::Object(meta);
            serde_json::to_string_pretty(&v)? + "\n"
        }
    };
    match &cmd.output {
        Some(path) => write_text(path, &text)?,
        None => out.write_all(text.as_bytes())?,
    }
    if let Some(path) = &cmd.factorization {
        let f = built
            .factorization
            .as_ref()
            .ok_or_else(|| Error::BadParameter("no explicit factorization for this family".into()))?;
        write_text(path, &(serde_json::to_string_pretty(f)? + "\n"))?;
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(cmd: SweepCmd, out: &mut dyn Write) -> Result<i32> {
    let base = match &cmd.config {
        Some(path) => SweepConfig::load(path)?,
        None => SweepConfig::default(),
    };
    let cfg = base.merge_flags(cmd);
    let built = match cfg.family {
        Some(name) => build_family(name, &cfg.params)?,
        None if cfg.params.input.is_some() => build_family(FamilyName::File, &cfg.params)?,
        None => return Err(Error::BadParameter("sweep needs --family or --input".into())),
    };
    let grid = cfg.grid()?;
    let rows = run_sweep(&built, &grid, &cfg.search())?;
    let csv = sweep_csv(&rows);
    match &cfg.output {
        Some(path) => write_text(path, &csv)?,
        None => out.write_all(csv.as_bytes())?,
    }
    if let Some(path) = &cfg.certificates {
        let dump = CertificateFile {
            correlation: built.correlation.clone(),
            certificates: rows.iter().filter_map(|r| r.certificate.clone()).collect(),
        };
        write_text(path, &(serde_json::to_string_pretty(&dump)? + "\n"))?;
    }
    Ok(if rows.iter().any(|r| r.status == RowStatus::Unresolved) {
        EXIT_BUDGET
    } else {
        EXIT_OK
    })
}

fn cmd_reproduce(cmd: ReproduceCmd, out: &mut dyn Write) -> Result<i32> {
    let outcomes = match cmd.preset {
        Preset::SuddenDeath => vec![checks::bm_sudden_death(), checks::bm_sweep_step()],
        Preset::GradualDecay => vec![checks::am_gradual_decay()],
        Preset::RoundTrip => vec![checks::certificate_round_trip()],
    };
    for o in &outcomes {
        writeln!(out, "{}", o.line())?;
    }
    if let Some(dir) = &cmd.out_dir {
        std::fs::create_dir_all(dir)?;
        write_text(&dir.join("report.json"), &(serde_json::to_string_pretty(&outcomes)? + "\n"))?;
        for o in &outcomes {
            for (name, body) in &o.artifacts {
                write_text(&dir.join(name), body)?;
            }
        }
    }
    Ok(if outcomes.iter().all(|o| o.passed) { EXIT_OK } else { EXIT_FAIL })
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_INVALID,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Family(c) => cmd_family(c, out),
        Command::Sweep(c) => cmd_sweep(c, out),
        Command::Verify(c) => cmd_verify(c, out),
        Command::Reproduce(c) => cmd_reproduce(c, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv: Vec<&str> = std::iter::once("corrlab").chain(args.iter().copied()).collect();
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn family_bm_csv() {
        let (code, out, _) = call(&["family", "bm", "--m", "6", "--k", "0.5"]);
        assert_eq!(code, 0);
        assert!(out.contains(&format!("# threshold={}", fmt_f64(1.0 - 0.5f64.sqrt()))));
        assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 37);
    }

    #[test]
    fn family_am_and_product() {
        let (code, out, _) = call(&["family", "am", "--m", "4", "--k", "0.5"]);
        assert_eq!(code, 0);
        let q: f64 = out.lines().find_map(|l| l.strip_prefix("# q=")).unwrap().parse().unwrap();
        assert!((q - (2.0 - 3f64.sqrt())).abs() < 1e-15);
        assert!(out.contains("\n5,5,"));
        let (code, out, _) = call(&["family", "product", "--u", "uniform:3", "--v", "uniform:3", "--format", "json"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["n"], 3);
        for e in v["entries"].as_array().unwrap() {
            assert!((e.as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn family_negative_alphas_and_errors() {
        let (code, _, _) = call(&["family", "edm", "--alphas", "-1,0,1"]);
        assert_eq!(code, 0);
        let (code, _, _) = call(&["family", "bm", "--m", "2", "--k", "0.5"]);
        assert_eq!(code, EXIT_INVALID);
        let (code, _, _) = call(&["family", "nonsense"]);
        assert_eq!(code, EXIT_USAGE);
        let (code, _, _) = call(&["family", "bm", "--k", "0.5"]);
        assert_eq!(code, EXIT_INVALID);
    }

    #[test]
    fn sweep_grid_validation() {
        let cfg = SweepConfig {
            lambdas: Some(vec![0.2, 0.1]),
            ..Default::default()
        };
        assert!(cfg.grid().is_err());
        let cfg = SweepConfig {
            lambda_start: Some(0.0),
            lambda_stop: Some(0.3),
            lambda_count: Some(4),
            ..Default::default()
        };
        let g = cfg.grid().unwrap();
        assert_eq!(g.len(), 4);
        assert!((g[3] - 0.3).abs() < 1e-15);
        let (code, _, _) = call(&["sweep", "--family", "bm", "--m", "4", "--k", "0.25", "--lambdas", "0.5,1.0"]);
        assert_eq!(code, EXIT_INVALID);
    }

    #[test]
    fn sweep_bm_step() {
        let (code, out, _) = call(&[
            "sweep", "--family", "bm", "--m", "6", "--k", "0.5", "--lambdas", "0,0.2,0.29,0.3,0.35",
        ]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER);
        let feasible: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
        assert_eq!(feasible, ["true", "true", "true", "false", "false"]);
        assert!(lines[3].contains(",2.0000000000000000e0,2.0000000000000000e0,"));
        assert!(lines[4].contains("unreachable,unreachable,0.0000000000000000e0,0.0000000000000000e0"));
    }
}
