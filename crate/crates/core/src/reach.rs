//! Which noise strengths still let a quantum seed produce a given
//! correlation: the adjusted matrix `P̂`, a search for marginal weights
//! `(s, t)` making it nonnegative, the permutation threshold bound, region
//! bisection and the sudden-death classifier.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corrmat::Correlation;
use crate::error::{Error, Result};
use crate::factorize::{enlarge_protocol, noiseless_protocol};
use crate::quantum::NoisyProtocol;

/// Entries of `P̂` at or above this count as nonnegative.
pub const FEASIBLE_TOL: f64 = -1e-10;
/// Weights below this are treated as zero by the classifier.
pub const ZERO_WEIGHT: f64 = 1e-7;

/// A probability vector; `strict` records whether every entry is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexVector {
    pub weights: Vec<f64>,
    pub strict: bool,
}

impl SimplexVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InfeasibleST);
        }
        let strict = weights.iter().all(|&w| w > 0.0);
        Ok(Self { weights, strict })
    }

    /// Clamps negatives to zero and rescales to unit mass.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        for w in weights.iter_mut() {
            *w = w.max(0.0);
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InfeasibleST);
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
            strict: true,
        }
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Outcome of a search for `(s, t)` with `P̂ ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub lambda: f64,
    pub feasible: bool,
    pub s: Option<SimplexVector>,
    pub t: Option<SimplexVector>,
    /// Smallest entry of `P̂` at the best point found.
    pub margin: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    /// Reachable exactly at the permutation bound, so nothing lies above.
    ClosedCertified,
    /// Reachable up to `1 − tol`.
    OpenCertified,
    /// Bracketed by bisection only.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEstimate {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub boundary_kind: BoundaryKind,
    pub tol: f64,
    pub threshold_bound: f64,
    /// Certificate at `lambda_lo`.
    pub witness: FeasibilityResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Lower bound imposed on every weight.
    pub strict_margin: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            strict_margin: 1e-9,
            max_iters: 200,
            restarts: 8,
            seed: 0,
        }
    }
}

impl SearchOptions {
    pub fn closed(self) -> Self {
        Self {
            strict_margin: 0.0,
            ..self
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::BadLambda(lambda));
    }
    Ok(())
}

fn check_weights(p: &Correlation, s: &[f64], t: &[f64]) -> Result<()> {
    if s.len() != p.n() || t.len() != p.n() {
        return Err(Error::DimensionMismatch(format!(
            "weights of length {} and {} for a {}×{} correlation",
            s.len(),
            t.len(),
            p.n(),
            p.n()
        )));
    }
    Ok(())
}

/// `P(x,y) − λ s_x c_y − λ t_y r_x + λ² s_x t_y` with `r`, `c` the row and
/// column sums of `P`. Row-major.
pub fn phat(p: &Correlation, lambda: f64, s: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    check_weights(p, s, t)?;
    let n = p.n();
    let (rows, cols) = p.marginals();
    let mut out = Vec::with_capacity(n * n);
    for x in 0..n {
        for y in 0..n {
            out.push(
                p.get(x, y) - lambda * s[x] * cols[y] - lambda * t[y] * rows[x]
                    + lambda * lambda * s[x] * t[y],
            );
        }
    }
    Ok(out)
}

/// Derivative of [`phat`] in `λ`.
pub fn phat_derivative(p: &Correlation, lambda: f64, s: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    check_weights(p, s, t)?;
    let n = p.n();
    let (rows, cols) = p.marginals();
    let mut out = Vec::with_capacity(n * n);
    for x in 0..n {
        for y in 0..n {
            out.push(2.0 * lambda * s[x] * t[y] - s[x] * cols[y] - t[y] * rows[x]);
        }
    }
    Ok(out)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn transpose(p: &Correlation) -> Correlation {
    let n = p.n();
    let entries = (0..n * n).map(|i| p.get(i % n, i / n)).collect();
    Correlation::from_flat(n, entries, f64::INFINITY).expect("transpose of a valid correlation")
}

/// What the one-sided LP maximizes.
#[derive(Debug, Clone, Copy)]
enum Goal {
    /// Smallest entry of `P̂`, with every weight at least `floor`.
    Margin { floor: f64 },
    /// Smallest weight, keeping every entry of `P̂` at least `-slack`.
    Spread { slack: f64 },
}

/// With `t` fixed `P̂` is affine in `s`; maximize the goal over `s`.
fn optimize_rows(
    p: &Correlation,
    rows: &[f64],
    cols: &[f64],
    lambda: f64,
    t: &[f64],
    goal: Goal,
) -> Option<Vec<f64>> {
    let n = p.n();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let s: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    let tau = lp.add_var(1.0, (-1.0, 1.0));
    lp.add_constraint(s.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
    let (w_entry, w_weight, floor, slack) = match goal {
        Goal::Margin { floor } => (1.0, 0.0, floor, 0.0),
        Goal::Spread { slack } => (0.0, 1.0, 0.0, slack),
    };
    for x in 0..n {
        lp.add_constraint([(s[x], 1.0), (tau, -w_weight)], ComparisonOp::Ge, floor);
        for y in 0..n {
            // s_x (λ² t_y − λ c_y) − w τ ≥ −(P(x,y) − λ t_y r_x) − slack
            let coeff = lambda * lambda * t[y] - lambda * cols[y];
            let rhs = -(p.get(x, y) - lambda * t[y] * rows[x]) - slack;
            lp.add_constraint([(s[x], coeff), (tau, -w_entry)], ComparisonOp::Ge, rhs);
        }
    }
    let sol = lp.solve().ok()?;
    let raw: Vec<f64> = s.iter().map(|&v| sol[v]).collect();
    SimplexVector::normalized(raw).ok().map(|v| v.weights)
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

struct Sides {
    p: Correlation,
    pt: Correlation,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

impl Sides {
    fn new(p: &Correlation) -> Self {
        let (rows, cols) = p.marginals();
        Self {
            p: p.clone(),
            pt: transpose(p),
            rows,
            cols,
        }
    }

    fn margin(&self, lambda: f64, s: &[f64], t: &[f64]) -> f64 {
        min_of(&phat(&self.p, lambda, s, t).expect("sizes checked"))
    }

    /// One sweep: best `s` for the current `t`, then best `t` for that `s`.
    fn sweep(&self, lambda: f64, s: &[f64], t: &[f64], goal: Goal) -> Option<(Vec<f64>, Vec<f64>)> {
        let s2 = optimize_rows(&self.p, &self.rows, &self.cols, lambda, t, goal)
            .unwrap_or_else(|| s.to_vec());
        let t2 = optimize_rows(&self.pt, &self.cols, &self.rows, lambda, &s2, goal)?;
        Some((s2, t2))
    }
}

/// Joint step on `(s, t)` from the linearization of `P̂`, inside a box of
/// radius `rho`. Used once alternating sweeps stop making progress.
fn linearized_step(
    sides: &Sides,
    lambda: f64,
    s: &[f64],
    t: &[f64],
    goal: Goal,
    rho: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = s.len();
    let current = phat(&sides.p, lambda, s, t).expect("sizes checked");
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let (w_entry, w_weight, floor, slack) = match goal {
        Goal::Margin { floor } => (1.0, 0.0, floor, 0.0),
        Goal::Spread { slack } => (0.0, 1.0, 0.0, slack),
    };
    let step = |lp: &mut Problem, v: f64| lp.add_var(0.0, ((floor - v).max(-rho).min(0.0), rho));
    let ds: Vec<_> = s.iter().map(|&v| step(&mut lp, v)).collect();
    let dt: Vec<_> = t.iter().map(|&v| step(&mut lp, v)).collect();
    let tau = lp.add_var(1.0, (-1.0, 1.0));
    lp.add_constraint(ds.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 0.0);
    lp.add_constraint(dt.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 0.0);
    if w_weight > 0.0 {
        for x in 0..n {
            lp.add_constraint([(ds[x], 1.0), (tau, -1.0)], ComparisonOp::Ge, -s[x]);
            lp.add_constraint([(dt[x], 1.0), (tau, -1.0)], ComparisonOp::Ge, -t[x]);
        }
    }
    for x in 0..n {
        for y in 0..n {
            let a = lambda * lambda * t[y] - lambda * sides.cols[y];
            let b = lambda * lambda * s[x] - lambda * sides.rows[x];
            lp.add_constraint(
                [(ds[x], a), (dt[y], b), (tau, -w_entry)],
                ComparisonOp::Ge,
                -current[x * n + y] - slack,
            );
        }
    }
    let sol = lp.solve().ok()?;
    let s2: Vec<f64> = (0..n).map(|x| s[x] + sol[ds[x]]).collect();
    let t2: Vec<f64> = (0..n).map(|y| t[y] + sol[dt[y]]).collect();
    Some((
        SimplexVector::normalized(s2).ok()?.weights,
        SimplexVector::normalized(t2).ok()?.weights,
    ))
}

fn objective(sides: &Sides, lambda: f64, s: &[f64], t: &[f64], goal: Goal) -> f64 {
    let margin = sides.margin(lambda, s, t);
    match goal {
        Goal::Margin { .. } => margin,
        Goal::Spread { slack } if margin >= -slack - 1e-15 => min_of(s).min(min_of(t)),
        Goal::Spread { .. } => f64::NEG_INFINITY,
    }
}

/// Alternating sweeps, falling back to joint linearized steps when a sweep
/// stalls. Stops once neither improves the objective by more than `1e-12`.
fn ascend(
    sides: &Sides,
    lambda: f64,
    mut s: Vec<f64>,
    mut t: Vec<f64>,
    goal: Goal,
    max_iters: usize,
) -> (Vec<f64>, Vec<f64>, f64, usize) {
    let mut value = objective(sides, lambda, &s, &t, goal);
    let mut rho = 0.05;
    let mut iters = 0;
    while iters < max_iters {
        iters += 1;
        if let Some((s2, t2)) = sides.sweep(lambda, &s, &t, goal) {
            let v2 = objective(sides, lambda, &s2, &t2, goal);
            if v2 > value + 1e-12 {
                s = s2;
                t = t2;
                value = v2;
                continue;
            }
        }
        let mut moved = false;
        while rho > 1e-9 {
            if let Some((s2, t2)) = linearized_step(sides, lambda, &s, &t, goal, rho) {
                let v2 = objective(sides, lambda, &s2, &t2, goal);
                if v2 > value + 1e-14 {
                    s = s2;
                    t = t2;
                    value = v2;
                    rho = (2.0 * rho).min(0.2);
                    moved = true;
                    break;
                }
            }
            rho /= 4.0;
        }
        if !moved {
            break;
        }
    }
    (s, t, value, iters)
}

fn lift(mut v: Vec<f64>, floor: f64) -> Vec<f64> {
    if v.iter().any(|&x| x < floor) {
        v.iter_mut().for_each(|x| *x = x.max(floor));
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= total);
    }
    v
}

/// Alternating-LP search for `(s, t)` with `P̂ ≥ 0` and every weight at
/// least `strict_margin`. A positive answer is a checkable certificate; a
/// negative one only means the budget ran out.
pub fn find_feasible_st(p: &Correlation, lambda: f64, opts: &SearchOptions) -> Result<FeasibilityResult> {
    check_lambda(lambda)?;
    let n = p.n();
    let sides = Sides::new(p);
    let goal = Goal::Margin {
        floor: opts.strict_margin,
    };
    // LP solutions on the floor can land a hair below it after rescaling
    let floor = opts.strict_margin * (1.0 - 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut total_iters = 0;
    for restart in 0..opts.restarts.max(1) {
        let (s0, t0) = if restart == 0 {
            (sides.rows.clone(), sides.cols.clone())
        } else {
            (random_simplex(&mut rng, n), random_simplex(&mut rng, n))
        };
        let (s, t, _, iters) = ascend(&sides, lambda, s0, t0, goal, opts.max_iters);
        total_iters += iters;
        // solver round-off can leave a weight just under the floor
        let (s, t) = (lift(s, opts.strict_margin), lift(t, opts.strict_margin));
        let margin = sides.margin(lambda, &s, &t);
        let floor_ok = min_of(&s) >= floor && min_of(&t) >= floor;
        if floor_ok && best.as_ref().is_none_or(|b| margin > b.0) {
            best = Some((margin, s, t));
        }
        if best.as_ref().is_some_and(|b| b.0 >= FEASIBLE_TOL) {
            break;
        }
    }
    let Some((margin, s, t)) = best else {
        return Ok(FeasibilityResult {
            lambda,
            feasible: false,
            s: None,
            t: None,
            margin: f64::NEG_INFINITY,
            iterations: total_iters,
        });
    };
    Ok(FeasibilityResult {
        lambda,
        feasible: margin >= FEASIBLE_TOL,
        s: Some(SimplexVector::normalized(s)?),
        t: Some(SimplexVector::normalized(t)?),
        margin,
        iterations: total_iters,
    })
}

/// Largest `min(min s, min t)` over feasible `(s, t)`, found by ascending
/// from a feasible starting point. Zero when only boundary weights work.
pub fn strictness(p: &Correlation, lambda: f64, opts: &SearchOptions) -> Result<Option<FeasibilityResult>> {
    let start = find_feasible_st(p, lambda, &opts.closed())?;
    if !start.feasible {
        return Ok(None);
    }
    let sides = Sides::new(p);
    let s = start.s.clone().expect("feasible").weights;
    let t = start.t.clone().expect("feasible").weights;
    let slack = (-start.margin).max(0.0) + 1e-13;
    let (s, t, _, iters) = ascend(&sides, lambda, s, t, Goal::Spread { slack }, opts.max_iters);
    let margin = sides.margin(lambda, &s, &t);
    Ok(Some(FeasibilityResult {
        lambda,
        feasible: margin >= FEASIBLE_TOL,
        s: Some(SimplexVector::normalized(s)?),
        t: Some(SimplexVector::normalized(t)?),
        margin,
        iterations: start.iterations + iters,
    }))
}

/// Maximum-weight perfect matching on an `n × n` weight matrix (row-major),
/// by the O(n³) shortest augmenting path method. Returns `(value, perm)`.
pub fn max_weight_assignment(weights: &[f64], n: usize) -> (f64, Vec<usize>) {
    // minimize the negated weights; arrays are 1-based with 0 as a sentinel
    let cost = |i: usize, j: usize| -weights[(i - 1) * n + (j - 1)];
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    let value = (0..n).map(|x| weights[x * n + perm[x]]).sum();
    (value, perm)
}

/// `√max{0, r_x c_y − P(x,y)}`, row-major.
pub fn threshold_weights(p: &Correlation) -> Vec<f64> {
    let n = p.n();
    let (rows, cols) = p.marginals();
    (0..n * n)
        .map(|i| {
            let (x, y) = (i / n, i % n);
            (rows[x] * cols[y] - p.get(x, y)).max(0.0).sqrt()
        })
        .collect()
}

/// `1 − max_φ Σ_x √max{0, r_x c_φ(x) − P(x, φ(x))}`; no reachable noise
/// strength exceeds it.
pub fn threshold_upper_bound(p: &Correlation) -> f64 {
    let (value, _) = max_weight_assignment(&threshold_weights(p), p.n());
    1.0 - value
}

fn check_positive(p: &Correlation) -> Result<()> {
    let n = p.n();
    for x in 0..n {
        for y in 0..n {
            if !(p.get(x, y) > 0.0) {
                return Err(Error::NotPositive { x: x + 1, y: y + 1 });
            }
        }
    }
    Ok(())
}

/// Brackets the largest reachable noise strength by bisection.
pub fn estimate_region(p: &Correlation, tol: f64, opts: &SearchOptions) -> Result<RegionEstimate> {
    check_positive(p)?;
    let bound = threshold_upper_bound(p).min(1.0);
    let top = if bound >= 1.0 { 1.0 - tol } else { bound };
    let at_top = find_feasible_st(p, top, opts)?;
    if at_top.feasible {
        let (kind, hi) = if bound >= 1.0 {
            (BoundaryKind::OpenCertified, 1.0)
        } else {
            (BoundaryKind::ClosedCertified, bound)
        };
        return Ok(RegionEstimate {
            lambda_lo: top,
            lambda_hi: hi,
            boundary_kind: kind,
            tol,
            threshold_bound: bound,
            witness: at_top,
        });
    }
    let mut lo = 0.0;
    let mut witness = find_feasible_st(p, 0.0, opts)?;
    let mut hi = top;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let probe = find_feasible_st(p, mid, opts)?;
        if probe.feasible {
            lo = mid;
            witness = probe;
        } else {
            hi = mid;
        }
    }
    Ok(RegionEstimate {
        lambda_lo: lo,
        lambda_hi: hi,
        boundary_kind: BoundaryKind::Unresolved,
        tol,
        threshold_bound: bound,
        witness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeathKind {
    SuddenDeath,
    GradualDecay,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeathVerdict {
    pub kind: DeathKind,
    pub region: Option<RegionEstimate>,
    /// `(λ, largest achievable min weight)` approaching the boundary.
    pub ladder: Vec<(f64, f64)>,
    /// Feasible with zero weights allowed, just inside the boundary band.
    pub closed_feasible: bool,
    /// Feasible with all weights above the zero-detection threshold there.
    pub strict_feasible: bool,
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub tol: f64,
    pub rungs: usize,
    pub search: SearchOptions,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            rungs: 5,
            search: SearchOptions::default(),
        }
    }
}

/// Sudden death when the reachable weights stay bounded away from zero up
/// to the boundary; gradual decay when they shrink towards it, which forces
/// the protocol dimension to blow up.
pub fn classify_sudden_death(p: &Correlation, opts: &ClassifyOptions) -> Result<DeathVerdict> {
    check_positive(p)?;
    if p.rank(1e-10) < 2 {
        return Ok(DeathVerdict {
            kind: DeathKind::Inconclusive,
            region: None,
            ladder: Vec::new(),
            closed_feasible: true,
            strict_feasible: true,
            note: "rank one: reachable for every noise strength below 1".into(),
        });
    }
    let region = estimate_region(p, opts.tol, &opts.search)?;
    let edge = region.lambda_lo;
    let band = (edge - 2.0 * opts.tol).max(0.0);
    let closed = find_feasible_st(p, band, &opts.search.closed())?;
    let strict_opts = SearchOptions {
        strict_margin: ZERO_WEIGHT,
        ..opts.search
    };
    let strict = find_feasible_st(p, band, &strict_opts)?;
    let mut ladder = Vec::new();
    for j in 0..opts.rungs.max(2) {
        let lam = edge - opts.tol * (1u64 << j) as f64;
        if lam < 0.0 {
            break;
        }
        let f = strictness(p, lam, &opts.search)?
            .map(|r| r.s.as_ref().unwrap().min().min(r.t.as_ref().unwrap().min()))
            .unwrap_or(0.0);
        ladder.push((lam, f));
    }
    let (kind, note) = if region.boundary_kind == BoundaryKind::ClosedCertified && region.witness.s.as_ref().is_some_and(|s| s.min() > ZERO_WEIGHT) && region.witness.t.as_ref().is_some_and(|t| t.min() > ZERO_WEIGHT) {
        (
            DeathKind::SuddenDeath,
            format!("strictly positive weights at the permutation bound {:.9}", region.threshold_bound),
        )
    } else if ladder.len() >= 2 {
        let near = ladder[0].1;
        let far = ladder[ladder.len() - 1].1;
        let ratio = if far > 0.0 { near / far } else { 0.0 };
        if ratio >= 0.75 {
            (DeathKind::SuddenDeath, format!("min weight stays flat towards the edge (ratio {ratio:.3})"))
        } else if ratio <= 0.5 {
            (DeathKind::GradualDecay, format!("min weight shrinks towards the edge (ratio {ratio:.3})"))
        } else {
            (DeathKind::Inconclusive, format!("min weight ratio {ratio:.3} between thresholds"))
        }
    } else {
        (DeathKind::Inconclusive, "boundary too close to zero for a ladder".into())
    };
    Ok(DeathVerdict {
        kind,
        region: Some(region),
        ladder,
        closed_feasible: closed.feasible,
        strict_feasible: strict.feasible,
        note,
    })
}

/// Protocol reaching `P` under noise `λ`, built from a feasible `(s, t)`.
pub fn protocol_from_certificate(p: &Correlation, lambda: f64, s: &[f64], t: &[f64]) -> Result<NoisyProtocol> {
    if lambda >= 1.0 {
        return Err(Error::LambdaOne);
    }
    check_lambda(lambda)?;
    let adjusted = phat(p, lambda, s, t)?;
    let lowest = min_of(&adjusted);
    if lowest < FEASIBLE_TOL {
        return Err(Error::CertificateInvalid(format!("adjusted matrix has entry {lowest:e}")));
    }
    let scale = (1.0 - lambda).powi(2);
    let target = Correlation::from_computed(
        p.n(),
        adjusted.iter().map(|v| v.max(0.0) / scale).collect(),
        1e-10,
    )?;
    let base = noiseless_protocol(&target)?;
    enlarge_protocol(&base, s, t, lambda)
}
