//! Reproduction checks with fixed seeds and tolerances.
//!
//! Each check returns an [`Outcome`]; `reproduce` prints them and the
//! acceptance test target asserts on them.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{advantage_estimate, am_certificate, am_cost_bounds, Cost};
use crate::corrmat::{am_q, make_am, make_bm, make_edm, Correlation};
use crate::error::Result;
use crate::factorize::{
    bm_nonneg_rank_lower, diagonalize_factorization, explicit_am_factorization, explicit_bm_factorization,
    explicit_edm_factorization, protocol_from_noisy_factorization, verify_noisy_psd_factorization,
    verify_psd_factorization, PsdFactorization, RankBounds,
};
use crate::linalg::CMatrix;
use crate::quantum::{generated_correlation, HermitianOperator};
use crate::reach::{
    find_feasible_st, max_weight_assignment, phat, phat_derivative, protocol_from_certificate, strictness,
    threshold_upper_bound, threshold_weights, SearchOptions,
};

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub details: Vec<String>,
    pub elapsed_ms: u128,
    #[serde(skip)]
    pub artifacts: Vec<(String, String)>,
}

impl Outcome {
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut line = format!("{status} [{}] {} ({} ms)", self.id, self.name, self.elapsed_ms);
        for d in self.details.iter().filter(|d| d.starts_with("FAIL")) {
            line.push_str("\n    ");
            line.push_str(d);
        }
        line
    }
}

/// Collects sub-checks and turns errors into failures.
struct Tally {
    id: u32,
    name: &'static str,
    start: Instant,
    limit: Option<Duration>,
    details: Vec<String>,
    ok: bool,
    artifacts: Vec<(String, String)>,
}

impl Tally {
    fn new(id: u32, name: &'static str, limit: Option<Duration>) -> Self {
        Self {
            id,
            name,
            start: Instant::now(),
            limit,
            details: Vec::new(),
            ok: true,
            artifacts: Vec::new(),
        }
    }

    fn check(&mut self, cond: bool, what: impl Into<String>) {
        let what = what.into();
        self.details.push(format!("{} {what}", if cond { "ok" } else { "FAIL" }));
        self.ok &= cond;
    }

    fn absorb<T>(&mut self, r: Result<T>, what: &str) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.check(false, format!("{what}: {e}"));
                None
            }
        }
    }

    fn finish(mut self) -> Outcome {
        let elapsed = self.start.elapsed();
        if let Some(limit) = self.limit {
            self.check(elapsed <= limit, format!("runtime {elapsed:?} within {limit:?}"));
        }
        Outcome {
            id: self.id,
            name: self.name.to_string(),
            passed: self.ok,
            details: self.details,
            elapsed_ms: elapsed.as_millis(),
            artifacts: self.artifacts,
        }
    }
}

fn random_correlation(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Correlation {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| floor + rng.random::<f64>()).collect())
        .collect();
    Correlation::normalize(&rows).expect("positive entries")
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| 0.01 + rng.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

pub const BM_CASES: [(usize, f64); 3] = [(4, 0.25), (6, 0.5), (8, 0.75)];

/// Polygon family: the noisy factorization dies exactly at `1 − √k`.
pub fn bm_sudden_death() -> Outcome {
    let mut t = Tally::new(1, "polygon family sudden death", Some(Duration::from_secs(5)));
    for (m, k) in BM_CASES {
        let edge = 1.0 - k.sqrt();
        let Some(p) = t.absorb(make_bm(m, k), "build") else { continue };
        let Some(f) = t.absorb(explicit_bm_factorization(m, k), "factorize") else { continue };
        if let Some(at) = t.absorb(verify_noisy_psd_factorization(&p, &f, edge, 1e-9), "verify at edge") {
            let lo = at.noisy_min_eigenvalue().unwrap_or(f64::NAN);
            t.check(at.passed, format!("m={m} k={k}: factorization passes at {edge:.12}"));
            t.check(lo.abs() <= 1e-9, format!("m={m} k={k}: edge eigenvalue {lo:e} within 1e-9 of 0"));
        }
        if let Some(past) = t.absorb(verify_noisy_psd_factorization(&p, &f, edge + 1e-6, 1e-9), "verify past edge") {
            t.check(!past.passed, format!("m={m} k={k}: factorization fails 1e-6 past the edge"));
        }
        let bound = threshold_upper_bound(&p);
        t.check((bound - edge).abs() <= 1e-9, format!("m={m} k={k}: permutation bound {bound:.12}"));
        if let Some(proto) = t.absorb(protocol_from_noisy_factorization(&p, &f, edge), "protocol") {
            t.check(proto.local_dim() == 2, format!("m={m} k={k}: seed dimension {}", proto.local_dim()));
            if let Some(out) = t.absorb(generated_correlation(&proto), "simulate") {
                let err = out.max_abs_diff(&p);
                t.check(err <= 1e-9, format!("m={m} k={k}: protocol error {err:e}"));
            }
        }
    }
    t.finish()
}

/// Extended family: cost grows without bound as the noise nears `q`.
pub fn am_gradual_decay() -> Outcome {
    let mut t = Tally::new(2, "extended family gradual decay", Some(Duration::from_secs(5)));
    let (m, k) = (8, 0.5);
    let q = am_q(k);
    let Some(p) = t.absorb(make_am(m, k), "build") else { return t.finish() };
    let ranks = RankBounds::new(p.rank(1e-10), p.n(), "matrix rank", "trivial n").expect("ordered");
    let mut lowers = Vec::new();
    let mut scaled_ratios = Vec::new();
    let mut s_uppers = Vec::new();
    let mut csv = String::from("j,eps,lambda,cert_min_entry,cost_lower,cost_upper,advantage_upper\n");
    for j in 1..=10 {
        let eps = q / f64::powi(2.0, j);
        let lambda = q - eps;
        let Some(w) = t.absorb(am_certificate(m, k, eps), "certificate") else { continue };
        let low = if w.iter().all(|&v| v >= 0.0) {
            phat(&p, lambda, &w, &w).map(|h| min_of(&h)).unwrap_or(f64::NEG_INFINITY)
        } else {
            f64::NEG_INFINITY
        };
        t.check(low >= -1e-12, format!("j={j}: certificate min entry {low:e}"));
        let Some(cost) = t.absorb(am_cost_bounds(m, k, eps), "cost bounds") else { continue };
        let (Cost::Finite(lo), Cost::Finite(hi)) = (cost.lower, cost.upper) else {
            t.check(false, format!("j={j}: cost bounds not finite"));
            continue;
        };
        lowers.push(lo);
        scaled_ratios.push(hi / lo * eps.sqrt());
        let Some(adv) = t.absorb(advantage_estimate(&p, lambda, &ranks, &cost), "advantage") else { continue };
        s_uppers.push(adv.s_upper);
        csv.push_str(&format!("{j},{eps:e},{lambda:e},{low:e},{lo:e},{hi:e},{:e}\n", adv.s_upper));
    }
    t.check(
        lowers.windows(2).all(|w| w[1] > w[0]),
        format!("cost lower bound increasing: {lowers:.3?}"),
    );
    t.check(lowers.last().is_some_and(|&v| v > 10.0), "cost lower bound exceeds 10 at j=10");
    let (a, b) = (min_of(&scaled_ratios), scaled_ratios.iter().copied().fold(0.0, f64::max));
    t.check(
        b / a <= 3.0,
        format!("upper/lower · sqrt(eps) stays within a factor 3: [{a:.3}, {b:.3}]"),
    );
    t.check(
        s_uppers.windows(2).all(|w| w[1] <= w[0]) && s_uppers.first() > s_uppers.last(),
        format!("advantage upper bound decreasing: {s_uppers:.3?}"),
    );
    t.artifacts.push(("am_decay.csv".into(), csv));
    t.finish()
}

/// Random 3×3 correlations: certificate → protocol → same correlation.
pub fn certificate_round_trip() -> Outcome {
    let mut t = Tally::new(3, "certificate round trip", Some(Duration::from_secs(60)));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = SearchOptions::default();
    let mut good = 0;
    let mut csv = String::from("case,lambda,n_local,error\n");
    for case in 0..20 {
        let p = random_correlation(&mut rng, 3, 0.05);
        let bound = threshold_upper_bound(&p);
        let mut lambda = rng.random::<f64>() * bound;
        let mut cert = None;
        for _ in 0..30 {
            // spread weights keep the enlarged protocol small
            match strictness(&p, lambda, &opts) {
                Ok(Some(r)) if r.feasible => {
                    cert = Some(r);
                    break;
                }
                Ok(_) => lambda /= 2.0,
                Err(e) => {
                    t.check(false, format!("case {case}: search error {e}"));
                    break;
                }
            }
        }
        let Some(cert) = cert else {
            t.check(false, format!("case {case}: no certified point found"));
            continue;
        };
        let (s, tt) = (cert.s.expect("feasible").weights, cert.t.expect("feasible").weights);
        let res = protocol_from_certificate(&p, lambda, &s, &tt)
            .and_then(|proto| Ok((proto.local_dim(), generated_correlation(&proto)?)));
        match res {
            Ok((d, out)) => {
                let err = out.max_abs_diff(&p);
                csv.push_str(&format!("{case},{lambda:e},{d},{err:e}\n"));
                if err <= 1e-9 {
                    good += 1;
                } else {
                    t.check(false, format!("case {case}: λ={lambda:.4} error {err:e}"));
                }
            }
            Err(e) => t.check(false, format!("case {case}: λ={lambda:.4} {e}")),
        }
    }
    t.check(good == 20, format!("{good}/20 cases reproduce within 1e-9"));
    t.artifacts.push(("roundtrip.csv".into(), csv));
    t.finish()
}

/// Largest `λ < 1` with `P̂ ≥ 0` along fixed `(s, t)`, by bisection.
fn feasible_edge(p: &Correlation, s: &[f64], t: &[f64]) -> f64 {
    let ok = |l: f64| min_of(&phat(p, l, s, t).expect("sizes match")) >= 0.0;
    let (mut lo, mut hi) = (0.0, 0.999);
    if ok(hi) {
        return hi;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Derivative sign, finite differences and the total-mass identity.
pub fn monotonicity() -> Outcome {
    let mut t = Tally::new(4, "adjusted matrix monotonicity", None);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_sign, mut worst_fd, mut worst_sum) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    let h = 1e-6;
    for i in 0..200 {
        let n = 2 + i % 3;
        let p = random_correlation(&mut rng, n, 0.02);
        let s = random_simplex(&mut rng, n);
        let tt = random_simplex(&mut rng, n);
        let edge = feasible_edge(&p, &s, &tt).min(1.0 - 2.0 * h);
        let lambda = (rng.random::<f64>() * edge).max(h);
        let value = phat(&p, lambda, &s, &tt).expect("sizes");
        let deriv = phat_derivative(&p, lambda, &s, &tt).expect("sizes");
        let up = phat(&p, lambda + h, &s, &tt).expect("sizes");
        let down = phat(&p, lambda - h, &s, &tt).expect("sizes");
        worst_sign = worst_sign.max(deriv.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        for ((d, a), b) in deriv.iter().zip(&up).zip(&down) {
            worst_fd = worst_fd.max((d - (a - b) / (2.0 * h)).abs());
        }
        let total: f64 = value.iter().sum();
        worst_sum = worst_sum.max((total - (1.0 - lambda).powi(2)).abs());
    }
    t.check(worst_sign <= 1e-10, format!("largest derivative entry {worst_sign:e}"));
    t.check(worst_fd <= 1e-6, format!("finite-difference gap {worst_fd:e}"));
    t.check(worst_sum <= 1e-12, format!("total-mass gap {worst_sum:e}"));
    t.finish()
}

fn brute_force_assignment(w: &[f64], n: usize) -> f64 {
    fn go(w: &[f64], n: usize, row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == n {
            *best = best.max(acc);
            return;
        }
        for col in 0..n {
            if !used[col] {
                used[col] = true;
                go(w, n, row + 1, used, acc + w[row * n + col], best);
                used[col] = false;
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    go(w, n, 0, &mut vec![false; n], 0.0, &mut best);
    best
}

/// Assignment solver against brute force, and no certificate above the bound.
pub fn threshold_soundness() -> Outcome {
    let mut t = Tally::new(5, "permutation bound soundness", None);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut violations = 0;
    let mut certified = 0;
    let opts = SearchOptions {
        restarts: 2,
        ..SearchOptions::default()
    };
    for i in 0..100 {
        let n = 3 + i % 2;
        // mix in small entries so the bound is often below 1
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random::<f64>().powi(3) + 1e-3).collect())
            .collect();
        let p = Correlation::normalize(&rows).expect("positive");
        let w = threshold_weights(&p);
        let (fast, _) = max_weight_assignment(&w, n);
        worst = worst.max((fast - brute_force_assignment(&w, n)).abs());
        let bound = threshold_upper_bound(&p);
        let lambda = (rng.random::<f64>() * 1.2 * bound).min(0.999);
        match find_feasible_st(&p, lambda, &opts) {
            Ok(r) if r.feasible => {
                certified += 1;
                if lambda > bound + 1e-12 {
                    violations += 1;
                }
            }
            Ok(_) => {}
            Err(e) => t.check(false, format!("search error {e}")),
        }
    }
    t.check(worst <= 1e-12, format!("assignment vs brute force gap {worst:e}"));
    t.check(violations == 0, format!("{violations} certificates above the bound out of {certified}"));
    t.check(certified > 0, format!("{certified} certified points examined"));
    t.finish()
}

fn random_psd(rng: &mut ChaCha8Rng, r: usize) -> HermitianOperator {
    let a = CMatrix::from_fn(r, r, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let gram = &a * a.adjoint();
    HermitianOperator::new((&gram + gram.adjoint()) * Complex64::new(0.5, 0.0)).expect("hermitian")
}

fn random_factorization(rng: &mut ChaCha8Rng) -> PsdFactorization {
    let r = 2 + rng.random_range(0..3);
    let n = r + rng.random_range(0..3);
    let cs: Vec<_> = (0..n).map(|_| random_psd(rng, r)).collect();
    let ds: Vec<_> = (0..n).map(|_| random_psd(rng, r)).collect();
    let f = PsdFactorization::new(cs, ds).expect("shapes");
    let total: f64 = f.products().iter().sum();
    let cs = f.cs().iter().map(|c| c.scaled(1.0 / total)).collect();
    PsdFactorization::new(cs, f.ds().to_vec()).expect("shapes")
}

/// Explicit factorizations, diagonalization and the polygon factor sum.
pub fn factorization_identities() -> Outcome {
    let mut t = Tally::new(6, "factorization identities", None);
    let alphas = [-1.5, -0.5, 0.25, 1.75];
    if let (Ok(p), Ok(f)) = (make_edm(&alphas), explicit_edm_factorization(&alphas)) {
        let r = verify_psd_factorization(&p, &f, 1e-10);
        t.check(r.is_ok_and(|r| r.passed), "distance matrix factorization within 1e-10");
    } else {
        t.check(false, "distance matrix factorization builds");
    }
    for (m, k) in BM_CASES {
        let bm = make_bm(m, k).and_then(|p| {
            let f = explicit_bm_factorization(m, k)?;
            Ok((verify_psd_factorization(&p, &f, 1e-10)?, f))
        });
        match bm {
            Ok((r, f)) => {
                t.check(r.passed, format!("polygon m={m} k={k}: residual {:e}", r.residual));
                let target = HermitianOperator::identity(2).scaled(std::f64::consts::FRAC_1_SQRT_2);
                let gap = f.c_sum().max_abs_diff(&target).max(f.d_sum().max_abs_diff(&target));
                t.check(gap <= 1e-10, format!("polygon m={m} k={k}: factor sums I/√2 within {gap:e}"));
            }
            Err(e) => t.check(false, format!("polygon m={m} k={k}: {e}")),
        }
        let am = make_am(m, k).and_then(|p| verify_psd_factorization(&p, &explicit_am_factorization(m, k)?, 1e-10));
        match am {
            Ok(r) => t.check(r.passed, format!("extended m={m} k={k}: residual {:e}", r.residual)),
            Err(e) => t.check(false, format!("extended m={m} k={k}: {e}")),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_trace, mut worst_norm) = (0.0f64, 0.0f64);
    let mut failures = 0;
    for _ in 0..50 {
        let f = random_factorization(&mut rng);
        match diagonalize_factorization(&f) {
            Ok((g, lam)) => {
                for (a, b) in f.products().iter().zip(g.products()) {
                    worst_trace = worst_trace.max((a - b).abs());
                }
                worst_norm = worst_norm.max((lam.iter().map(|v| v * v).sum::<f64>() - 1.0).abs());
            }
            Err(_) => failures += 1,
        }
    }
    t.check(failures == 0, format!("{failures}/50 diagonalizations failed"));
    t.check(worst_trace <= 1e-9, format!("pairwise traces preserved within {worst_trace:e}"));
    t.check(worst_norm <= 1e-9, format!("sum of squared diagonal within {worst_norm:e} of 1"));
    t.finish()
}

/// Small explicit factorizations against the nonnegative-rank bound.
pub fn noiseless_advantage() -> Outcome {
    let mut t = Tally::new(7, "noiseless advantage", None);
    for m in [4, 6, 8] {
        let alphas: Vec<f64> = (0..m).map(|i| i as f64 - (m - 1) as f64 / 2.0).collect();
        let r = make_edm(&alphas).and_then(|p| {
            let f = explicit_edm_factorization(&alphas)?;
            Ok((f.r(), verify_psd_factorization(&p, &f, 1e-10)?.passed))
        });
        match r {
            Ok((r, ok)) => t.check(ok && r <= 2, format!("distance matrix m={m}: PSD rank ≤ {r}")),
            Err(e) => t.check(false, format!("distance matrix m={m}: {e}")),
        }
        let r = make_am(m, 0.5).and_then(|p| {
            let f = explicit_am_factorization(m, 0.5)?;
            Ok((f.r(), verify_psd_factorization(&p, &f, 1e-10)?.passed))
        });
        match r {
            Ok((r, ok)) => t.check(ok && r <= 3, format!("extended m={m}: PSD rank ≤ {r}")),
            Err(e) => t.check(false, format!("extended m={m}: {e}")),
        }
    }
    let (m, k) = (8, 0.9);
    let lower = t.absorb(bm_nonneg_rank_lower(m, k), "rank bound");
    let seed_dim = make_bm(m, k)
        .and_then(|p| protocol_from_noisy_factorization(&p, &explicit_bm_factorization(m, k)?, 0.0))
        .map(|proto| proto.local_dim());
    let seed_dim = t.absorb(seed_dim, "protocol");
    if let (Some(lower), Some(d)) = (lower, seed_dim) {
        t.check(lower >= 3, format!("nonnegative rank of polygon m=8 k=0.9 ≥ {lower}"));
        t.check(d == 2, format!("quantum seed dimension {d}"));
        t.check(
            lower.next_power_of_two().trailing_zeros() > d.next_power_of_two().trailing_zeros(),
            "classical bits exceed qubits",
        );
    }
    t.finish()
}

/// Two sweeps with the same seed must write the same bytes.
pub fn sweep_determinism() -> Outcome {
    let mut t = Tally::new(8, "sweep determinism", None);
    let dir = std::env::temp_dir().join(format!("corrlab-determinism-{}", std::process::id()));
    let mut outputs = Vec::new();
    for run in 0..2 {
        let path = dir.join(format!("sweep{run}.csv"));
        let args = [
            "corrlab", "sweep", "--family", "am", "--m", "6", "--k", "0.5", "--lambda-start", "0",
            "--lambda-stop", "0.3", "--lambda-count", "7", "--seed", "11", "--output",
        ];
        let mut argv: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        argv.push(path.display().to_string());
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = crate::cli::run(argv, &mut out, &mut err);
        t.check(code == 0, format!("run {run} exit code {code}"));
        match std::fs::read(&path) {
            Ok(bytes) => outputs.push(bytes),
            Err(e) => t.check(false, format!("run {run}: {e}")),
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    t.check(
        outputs.len() == 2 && outputs[0] == outputs[1] && !outputs[0].is_empty(),
        "byte-identical CSV",
    );
    if let Some(first) = outputs.first() {
        t.artifacts.push(("sweep.csv".into(), String::from_utf8_lossy(first).into_owned()));
    }
    t.finish()
}

/// Extra check for `reproduce thm3`: the sweep shows the step at `1 − √k`.
pub fn bm_sweep_step() -> Outcome {
    let mut t = Tally::new(1, "polygon sweep step", None);
    let (m, k) = (6, 0.5);
    let edge = 1.0 - f64::sqrt(k);
    let grid = [edge - 1e-4, edge, edge + 1e-4];
    let built = crate::cli::build_family(
        crate::cli::FamilyName::Bm,
        &crate::cli::FamilyParams {
            m: Some(m),
            k: Some(k),
            ..Default::default()
        },
    );
    let Some(built) = t.absorb(built, "build") else { return t.finish() };
    if let Some(rows) = t.absorb(crate::cli::run_sweep(&built, &grid, &SearchOptions::default()), "sweep") {
        use crate::cli::RowStatus::*;
        let kinds: Vec<_> = rows.iter().map(|r| r.status).collect();
        t.check(
            kinds == [Feasible, Feasible, Unreachable],
            format!("statuses around the edge: {kinds:?}"),
        );
        t.artifacts.push(("bm_step.csv".into(), crate::cli::sweep_csv(&rows)));
    }
    t.finish()
}

pub fn all() -> Vec<Outcome> {
    vec![
        bm_sudden_death(),
        am_gradual_decay(),
        certificate_round_trip(),
        monotonicity(),
        threshold_soundness(),
        factorization_identities(),
        noiseless_advantage(),
        sweep_determinism(),
    ]
}
