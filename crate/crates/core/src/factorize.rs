//! PSD and nonnegative factorizations of correlations, their noisy variant,
//! and the synthesis of quantum protocols from them.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrmat::{am_q, Correlation};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, ZERO};
use crate::quantum::{DensityMatrix, HermitianOperator, NoisyProtocol, Povm};

/// Smallest admissible eigenvalue of a factor sum.
pub const SINGULAR_TOL: f64 = 1e-9;

/// `P(x,y) = tr(C_x D_y)` with `r × r` factors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdFactorization {
    r: usize,
    cs: Vec<HermitianOperator>,
    ds: Vec<HermitianOperator>,
}

impl PsdFactorization {
    /// Only shapes are checked here; positivity is the verifier's job.
    pub fn new(cs: Vec<HermitianOperator>, ds: Vec<HermitianOperator>) -> Result<Self> {
        let r = cs
            .first()
            .map(|op| op.dim())
            .ok_or_else(|| Error::BadParameter("empty factorization".into()))?;
        if cs.len() != ds.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} row factors but {} column factors",
                cs.len(),
                ds.len()
            )));
        }
        if cs.iter().chain(&ds).any(|op| op.dim() != r) {
            return Err(Error::DimensionMismatch("factors of differing size".into()));
        }
        Ok(Self { r, cs, ds })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n(&self) -> usize {
        self.cs.len()
    }

    pub fn cs(&self) -> &[HermitianOperator] {
        &self.cs
    }

    pub fn ds(&self) -> &[HermitianOperator] {
        &self.ds
    }

    pub fn c_sum(&self) -> HermitianOperator {
        HermitianOperator::sum(self.r, &self.cs)
    }

    pub fn d_sum(&self) -> HermitianOperator {
        HermitianOperator::sum(self.r, &self.ds)
    }

    /// `tr(C_x D_y)`, row-major.
    pub fn products(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n() * self.n());
        for cx in &self.cs {
            for dy in &self.ds {
                out.push(cx.trace_with(dy));
            }
        }
        out
    }

    /// Swaps in a new `C_x`.
    pub fn with_row_factor(mut self, x: usize, op: HermitianOperator) -> Result<Self> {
        if op.dim() != self.r || x >= self.n() {
            return Err(Error::DimensionMismatch("replacement factor".into()));
        }
        self.cs[x] = op;
        Ok(self)
    }
}

impl<'de> Deserialize<'de> for PsdFactorization {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            r: usize,
            cs: Vec<HermitianOperator>,
            ds: Vec<HermitianOperator>,
        }
        let raw = Raw::deserialize(d)?;
        let f = PsdFactorization::new(raw.cs, raw.ds).map_err(serde::de::Error::custom)?;
        if f.r != raw.r {
            return Err(serde::de::Error::custom("r does not match factor size"));
        }
        Ok(f)
    }
}

/// Interval on a rank together with how each end was obtained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankBounds {
    pub lower: usize,
    pub upper: usize,
    pub lower_method: String,
    pub upper_method: String,
}

impl RankBounds {
    pub fn new(lower: usize, upper: usize, lower_method: &str, upper_method: &str) -> Result<Self> {
        if lower > upper {
            return Err(Error::InconsistentBounds(format!("rank lower {lower} > upper {upper}")));
        }
        Ok(Self {
            lower,
            upper,
            lower_method: lower_method.into(),
            upper_method: upper_method.into(),
        })
    }
}

/// Outcome of checking a factorization against a correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    /// `max |tr(C_x D_y) − P(x,y)|`.
    pub residual: f64,
    pub min_eigenvalue_c: f64,
    pub min_eigenvalue_d: f64,
    /// Smallest eigenvalue over the noise-shifted factors, when λ was given.
    pub noisy_min_eigenvalue_c: Option<f64>,
    pub noisy_min_eigenvalue_d: Option<f64>,
    /// Largest condition number of the two factor sums.
    pub condition_number: Option<f64>,
    pub passed: bool,
}

impl FactorizationReport {
    pub fn noisy_min_eigenvalue(&self) -> Option<f64> {
        Some(self.noisy_min_eigenvalue_c?.min(self.noisy_min_eigenvalue_d?))
    }
}

pub fn verify_psd_factorization(
    p: &Correlation,
    f: &PsdFactorization,
    tol: f64,
) -> Result<FactorizationReport> {
    if p.n() != f.n() {
        return Err(Error::DimensionMismatch(format!(
            "correlation is {}×{}, factorization has {} factors",
            p.n(),
            p.n(),
            f.n()
        )));
    }
    let residual = f
        .products()
        .iter()
        .zip(p.entries())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let min_eig = |ops: &[HermitianOperator]| {
        ops.iter().map(|op| op.min_eigenvalue()).fold(f64::INFINITY, f64::min)
    };
    let min_eigenvalue_c = min_eig(&f.cs);
    let min_eigenvalue_d = min_eig(&f.ds);
    let passed = residual <= tol && min_eigenvalue_c >= -tol && min_eigenvalue_d >= -tol;
    Ok(FactorizationReport {
        residual,
        min_eigenvalue_c,
        min_eigenvalue_d,
        noisy_min_eigenvalue_c: None,
        noisy_min_eigenvalue_d: None,
        condition_number: None,
        passed,
    })
}

/// `min eig` over `X_i − (λ/r) tr(X_i S⁻¹) S`.
fn noisy_shift_min(ops: &[HermitianOperator], sum: &HermitianOperator, lambda: f64) -> Result<(f64, f64)> {
    let r = sum.dim();
    let (vals, _) = linalg::eigh(sum.matrix());
    let lo = vals[0];
    if lo <= SINGULAR_TOL {
        return Err(Error::SingularSum { min_eigenvalue: lo });
    }
    let cond = vals[r - 1] / lo;
    let inv = HermitianOperator::from_trusted(linalg::spectral_map(sum.matrix(), |v| 1.0 / v));
    let mut worst = f64::INFINITY;
    for op in ops {
        let w = op.trace_with(&inv);
        let shifted = op.sub(&sum.scaled(lambda / r as f64 * w));
        worst = worst.min(shifted.min_eigenvalue());
    }
    Ok((worst, cond))
}

/// Plain checks plus the noise-shifted positivity of every factor.
pub fn verify_noisy_psd_factorization(
    p: &Correlation,
    f: &PsdFactorization,
    lambda: f64,
    tol: f64,
) -> Result<FactorizationReport> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::BadLambda(lambda));
    }
    let mut report = verify_psd_factorization(p, f, tol)?;
    let (mc, cc) = noisy_shift_min(&f.cs, &f.c_sum(), lambda)?;
    let (md, cd) = noisy_shift_min(&f.ds, &f.d_sum(), lambda)?;
    report.noisy_min_eigenvalue_c = Some(mc);
    report.noisy_min_eigenvalue_d = Some(md);
    report.condition_number = Some(cc.max(cd));
    report.passed = report.passed && mc >= -tol && md >= -tol;
    Ok(report)
}

fn herm2(a: f64, b: Complex64, d: f64) -> HermitianOperator {
    HermitianOperator::from_trusted(CMatrix::from_row_slice(2, 2, &[c(a), b, b.conj(), c(d)]))
}

/// Rank-2 factorization of the distance matrix built from zero-sum `alphas`.
pub fn explicit_edm_factorization(alphas: &[f64]) -> Result<PsdFactorization> {
    // validates distinctness and size
    crate::corrmat::make_edm(alphas)?;
    let sum: f64 = alphas.iter().sum();
    if sum.abs() > 1e-12 {
        return Err(Error::AlphaSumNonzero { sum });
    }
    let m = alphas.len() as f64;
    let sq: f64 = alphas.iter().map(|a| a * a).sum();
    let cross = (m * sq).sqrt();
    let h = 1.0 / SQRT_2;
    let cs = alphas
        .iter()
        .map(|&a| herm2(h * a * a / sq, c(-h * a / cross), h / m))
        .collect();
    let ds = alphas
        .iter()
        .map(|&a| herm2(h / m, c(h * a / cross), h * a * a / sq))
        .collect();
    PsdFactorization::new(cs, ds)
}

fn check_polygon(m: usize, k: f64) -> Result<()> {
    if m < 3 || !(k > 0.0 && k < 1.0) {
        return Err(Error::BadParameter(format!("need m >= 3 and 0 < k < 1, got m={m}, k={k}")));
    }
    Ok(())
}

/// Rank-2 factorization of the polygon slack family.
pub fn explicit_bm_factorization(m: usize, k: f64) -> Result<PsdFactorization> {
    check_polygon(m, k)?;
    let mf = m as f64;
    let scale = 1.0 / (SQRT_2 * mf);
    let sk = k.sqrt();
    let phase = |x: usize| Complex64::from_polar(1.0, 2.0 * PI * x as f64 / mf);
    let cs = (0..m)
        .map(|x| herm2(scale, phase(x) * (scale * sk), scale))
        .collect();
    let ds = (0..m)
        .map(|y| herm2(scale, phase(y).conj() * (-scale * sk), scale))
        .collect();
    PsdFactorization::new(cs, ds)
}

/// Rank-3 factorization of the one-point extension of the polygon family.
pub fn explicit_am_factorization(m: usize, k: f64) -> Result<PsdFactorization> {
    check_polygon(m, k)?;
    let q = am_q(k);
    let lead = (1.0 - q) / (2.0 * (1.0 + q * q).sqrt());
    let corner = HermitianOperator::from_real_diagonal(&[lead * SQRT_2, lead * q, lead * q]);
    let lift = ((1.0 + q * q) / 2.0).sqrt();
    let bm = explicit_bm_factorization(m, k)?;
    let embed = |op: &HermitianOperator| {
        let mut big = CMatrix::from_element(3, 3, ZERO);
        big.view_mut((1, 1), (2, 2)).copy_from(&(op.matrix() * c(lift)));
        HermitianOperator::from_trusted(big)
    };
    let cs = std::iter::once(corner.clone()).chain(bm.cs.iter().map(embed)).collect();
    let ds = std::iter::once(corner).chain(bm.ds.iter().map(embed)).collect();
    PsdFactorization::new(cs, ds)
}

/// Equivalent factorization whose factor sums both equal a diagonal `Λ`
/// with `tr(Λ²) = Σ P`. Returns it together with the diagonal of `Λ`.
pub fn diagonalize_factorization(f: &PsdFactorization) -> Result<(PsdFactorization, Vec<f64>)> {
    let s = f.c_sum();
    let t = f.d_sum();
    let smin = s.min_eigenvalue();
    if smin <= SINGULAR_TOL {
        return Err(Error::SingularSum { min_eigenvalue: smin });
    }
    let tmin = t.min_eigenvalue();
    if tmin <= SINGULAR_TOL {
        return Err(Error::SingularSum { min_eigenvalue: tmin });
    }
    let s_half = linalg::spectral_map(s.matrix(), f64::sqrt);
    let s_inv_half = linalg::spectral_map(s.matrix(), |v| 1.0 / v.sqrt());
    let middle = &s_half * t.matrix() * &s_half;
    let (squares, u) = linalg::eigh(&middle);
    let lambda: Vec<f64> = squares.iter().map(|v| v.max(0.0).sqrt()).collect();
    if let Some(&lo) = lambda.iter().min_by(|a, b| a.total_cmp(b)) {
        if lo <= SINGULAR_TOL {
            return Err(Error::SingularSum { min_eigenvalue: lo });
        }
    }
    let root = linalg::real_diag(&lambda.iter().map(|v| v.sqrt()).collect::<Vec<_>>());
    let root_inv = linalg::real_diag(&lambda.iter().map(|v| 1.0 / v.sqrt()).collect::<Vec<_>>());
    let h = &root * u.adjoint() * &s_inv_half;
    // H^{-†} = Λ^{-1/2} U† S^{1/2}
    let h_inv_adj = &root_inv * u.adjoint() * &s_half;
    let cs = f.cs.iter().map(|op| op.congruence(&h)).collect();
    let ds = f.ds.iter().map(|op| op.congruence(&h_inv_adj)).collect();
    Ok((PsdFactorization::new(cs, ds)?, lambda))
}

/// Diagonal of `Λ` if both factor sums equal the same diagonal matrix.
fn common_diagonal_sum(f: &PsdFactorization, tol: f64) -> Result<Vec<f64>> {
    let s = f.c_sum();
    let t = f.d_sum();
    let diag: Vec<f64> = (0..f.r).map(|i| s.matrix()[(i, i)].re).collect();
    let lam = HermitianOperator::from_real_diagonal(&diag);
    if s.max_abs_diff(&lam) > tol || t.max_abs_diff(&lam) > tol {
        return Err(Error::NotDiagonalized);
    }
    let norm: f64 = diag.iter().map(|v| v * v).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotDiagonalized);
    }
    if let Some(&lo) = diag.iter().min_by(|a, b| a.total_cmp(b)) {
        if lo <= SINGULAR_TOL {
            return Err(Error::SingularSum { min_eigenvalue: lo });
        }
    }
    Ok(diag)
}

/// Protocol on `d = r` with seed `Σ β_k |kk⟩` whose noisy output is `P`.
pub fn protocol_from_noisy_factorization(
    p: &Correlation,
    f: &PsdFactorization,
    lambda: f64,
) -> Result<NoisyProtocol> {
    if lambda >= 1.0 {
        return Err(Error::LambdaOne);
    }
    let beta = common_diagonal_sum(f, 1e-9)?;
    let report = verify_noisy_psd_factorization(p, f, lambda, 1e-9)?;
    if !report.passed {
        return Err(Error::FactorizationInvalid(format!(
            "residual {:e}, noisy min eigenvalue {:e}",
            report.residual,
            report.noisy_min_eigenvalue().unwrap_or(f64::NAN)
        )));
    }
    let r = f.r;
    let lam_op = HermitianOperator::from_real_diagonal(&beta);
    let lam_inv = HermitianOperator::from_real_diagonal(&beta.iter().map(|b| 1.0 / b).collect::<Vec<_>>());
    let inv_half = linalg::real_diag(&beta.iter().map(|b| 1.0 / b.sqrt()).collect::<Vec<_>>());
    let effect = |op: &HermitianOperator| {
        let shift = lambda / r as f64 * op.trace_with(&lam_inv);
        op.sub(&lam_op.scaled(shift))
            .congruence(&inv_half)
            .scaled(1.0 / (1.0 - lambda))
    };
    let povm_a = Povm::new(f.cs.iter().map(|op| effect(&op.transpose())).collect())?;
    let povm_b = Povm::new(f.ds.iter().map(effect).collect())?;
    let mut psi = vec![ZERO; r * r];
    for (k, b) in beta.iter().enumerate() {
        psi[k * r + k] = c(*b);
    }
    let seed = DensityMatrix::pure_bipartite(&psi, r)?;
    NoisyProtocol::new(seed, povm_a, povm_b, lambda)
}

/// Diagonal factorization `C_x = e_x e_xᵀ`, `D_y = diag(Q(·,y))` on the
/// rows of `Q` with positive mass.
pub fn trivial_factorization(q: &Correlation) -> Result<PsdFactorization> {
    let n = q.n();
    let (rows, _) = q.marginals();
    let support: Vec<usize> = (0..n).filter(|&x| rows[x] > 0.0).collect();
    let r = support.len();
    let cs = (0..n)
        .map(|x| {
            let mut diag = vec![0.0; r];
            if let Some(pos) = support.iter().position(|&s| s == x) {
                diag[pos] = 1.0;
            }
            HermitianOperator::from_real_diagonal(&diag)
        })
        .collect();
    let ds = (0..n)
        .map(|y| {
            let diag: Vec<f64> = support.iter().map(|&x| q.get(x, y)).collect();
            HermitianOperator::from_real_diagonal(&diag)
        })
        .collect();
    PsdFactorization::new(cs, ds)
}

/// Noiseless protocol reproducing `Q` exactly.
pub fn noiseless_protocol(q: &Correlation) -> Result<NoisyProtocol> {
    let f = trivial_factorization(q)?;
    let (g, _) = diagonalize_factorization(&f)?;
    protocol_from_noisy_factorization(q, &g, 0.0)
}

fn check_simplex(v: &[f64], n: usize) -> Result<()> {
    let sum: f64 = v.iter().sum();
    if v.len() != n || v.iter().any(|&x| !(x > 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InfeasibleST);
    }
    Ok(())
}

/// Largest local dimension `enlarge_protocol` will build.
pub const MAX_LOCAL_DIM: usize = 512;

/// Smallest `k ≥ 2` with `d′k·s_x ≥ tr E′_x` and `d′k·t_y ≥ tr F′_y`.
pub fn enlargement_factor(base: &NoisyProtocol, s: &[f64], t: &[f64]) -> Result<usize> {
    let n = base.outcomes();
    check_simplex(s, n)?;
    check_simplex(t, n)?;
    let dp = base.local_dim() as f64;
    let mut need: f64 = 0.0;
    for (e, sx) in base.povm_a().effects().iter().zip(s) {
        need = need.max(e.trace() / (dp * sx));
    }
    for (f, ty) in base.povm_b().effects().iter().zip(t) {
        need = need.max(f.trace() / (dp * ty));
    }
    // absorb rounding so an exact integer ratio is not bumped up
    Ok(((need - 1e-12).ceil() as usize).max(2))
}

/// Pads a noiseless protocol so that under noise `λ` the effect traces
/// become `d·s_x` and `d·t_y`.
pub fn enlarge_protocol(base: &NoisyProtocol, s: &[f64], t: &[f64], lambda: f64) -> Result<NoisyProtocol> {
    if lambda >= 1.0 {
        return Err(Error::LambdaOne);
    }
    let k = enlargement_factor(base, s, t)?;
    let dp = base.local_dim();
    let d = dp * k;
    if d > MAX_LOCAL_DIM {
        return Err(Error::BadParameter(format!(
            "enlarged dimension {d} exceeds {MAX_LOCAL_DIM}; weights are too close to zero"
        )));
    }
    let kf = k as f64;
    let dpf = dp as f64;
    let mut head = vec![0.0; k];
    head[0] = 1.0;
    let head = HermitianOperator::from_real_diagonal(&head);
    let tail = HermitianOperator::identity(k).sub(&head);
    let white = HermitianOperator::identity(dp).scaled(1.0 / dpf);
    let pad = |tr: f64, w: f64| ((dpf * kf * w - tr) / (kf - 1.0)).max(0.0);
    let effects_a = base
        .povm_a()
        .effects()
        .iter()
        .zip(s)
        .map(|(e, &sx)| head.kron(e).add(&tail.kron(&white).scaled(pad(e.trace(), sx))))
        .collect();
    let effects_b = base
        .povm_b()
        .effects()
        .iter()
        .zip(t)
        .map(|(f, &ty)| f.kron(&head).add(&white.kron(&tail).scaled(pad(f.trace(), ty))))
        .collect();
    // Alice's index is (k, d′), Bob's is (d′, k); the seed lives on k = 0.
    let sp = base.seed().operator().matrix();
    let mut seed = CMatrix::from_element(d * d, d * d, ZERO);
    for ia in 0..dp {
        for jb in 0..dp {
            let row = ia * d + jb * k;
            for ia2 in 0..dp {
                for jb2 in 0..dp {
                    seed[(row, ia2 * d + jb2 * k)] = sp[(ia * dp + jb, ia2 * dp + jb2)];
                }
            }
        }
    }
    let seed = DensityMatrix::bipartite(HermitianOperator::new(seed)?, d)?;
    NoisyProtocol::new(seed, Povm::new(effects_a)?, Povm::new(effects_b)?, lambda)
}

/// Entrywise max residual of `W H` against `P`.
fn nmf_residual(p: &DMatrix<f64>, w: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    (p - w * h).abs().max()
}

/// Multiplicative-update NMF from one random start.
fn nmf_attempt(p: &DMatrix<f64>, r: usize, iters: usize, tol: f64, seed: u64) -> f64 {
    let n = p.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (p.sum() / (n * n * r) as f64).sqrt().max(1e-3);
    let mut w = DMatrix::from_fn(n, r, |_, _| scale * (0.1 + rng.random::<f64>()));
    let mut h = DMatrix::from_fn(r, n, |_, _| scale * (0.1 + rng.random::<f64>()));
    const EPS: f64 = 1e-300;
    for it in 0..iters {
        let num = w.transpose() * p;
        let den = w.transpose() * &w * &h;
        h.zip_zip_apply(&num, &den, |hv, a, b| *hv *= a / (b + EPS));
        let num = p * h.transpose();
        let den = &w * &h * h.transpose();
        w.zip_zip_apply(&num, &den, |wv, a, b| *wv *= a / (b + EPS));
        if it % 100 == 99 && nmf_residual(p, &w, &h) <= tol {
            break;
        }
    }
    nmf_residual(p, &w, &h)
}

/// Settings for the nonnegative-rank search.
#[derive(Debug, Clone, Copy)]
pub struct NmfOptions {
    pub restarts: usize,
    pub iterations: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for NmfOptions {
    fn default() -> Self {
        Self {
            restarts: 50,
            iterations: 10_000,
            tol: 1e-10,
            seed: 0,
        }
    }
}

/// Smallest `r ≤ r_max` for which a nonnegative factorization is found,
/// or `r_max + 1` if none is.
pub fn nonneg_rank_upper(p: &Correlation, r_max: usize, opts: NmfOptions) -> usize {
    let n = p.n();
    let mat = p.to_matrix();
    let rank = p.rank(1e-10);
    for r in rank.max(1)..=r_max {
        if r == 1 || r >= n {
            // rank one means P is the outer product of its marginals;
            // r = n is certified by W = P, H = I
            return r;
        }
        let found = (0..opts.restarts).into_par_iter().any(|i| {
            let seed = opts.seed.wrapping_mul(1_000_003).wrapping_add((r * 7919 + i) as u64);
            nmf_attempt(&mat, r, opts.iterations, opts.tol, seed) <= opts.tol
        });
        if found {
            return r;
        }
    }
    r_max + 1
}

/// `⌊log₂ l*⌋ + 1` for the largest `l ≥ 3` with `k > cos(π/l)/cos²(π/m)`.
pub fn bm_nonneg_rank_lower(m: usize, k: f64) -> Result<usize> {
    check_polygon(m, k)?;
    let denom = (PI / m as f64).cos().powi(2);
    let holds = |l: usize| k > (PI / l as f64).cos() / denom;
    if !holds(3) {
        return Ok(1);
    }
    let mut l = 3;
    while holds(l + 1) {
        l += 1;
    }
    Ok(l.ilog2() as usize + 1)
}

/// Nonnegative and PSD rank bounds for an `m × m` distance family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdmRankBounds {
    pub nonneg: RankBounds,
    pub psd: RankBounds,
}

pub fn edm_rank_bounds(m: usize) -> Result<EdmRankBounds> {
    if m < 2 {
        return Err(Error::BadParameter("need m >= 2".into()));
    }
    let cited = (2.0 * (m as f64).sqrt() - 2.0 - 1e-12).ceil() as usize;
    Ok(EdmRankBounds {
        nonneg: RankBounds::new(cited.max(2), m, "distance-matrix bound 2√m−2", "trivial m")?,
        psd: RankBounds::new(2, 2, "nonzero off-diagonal with zero diagonal", "explicit rank-2 factorization")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrmat::{make_am, make_bm, make_edm};
    use crate::quantum::generated_correlation;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bm_factorization_checks() {
        let f = explicit_bm_factorization(6, 0.5).unwrap();
        let p = make_bm(6, 0.5).unwrap();
        assert!(verify_psd_factorization(&p, &f, 1e-10).unwrap().passed);
        let s = f.c_sum();
        assert!(s.max_abs_diff(&HermitianOperator::identity(2).scaled(1.0 / SQRT_2)) < 1e-12);
        let g = explicit_bm_factorization(4, 0.25).unwrap();
        assert_abs_diff_eq!(g.cs()[0].min_eigenvalue(), 0.5 / (SQRT_2 * 4.0), epsilon = 1e-12);
        assert_abs_diff_eq!(g.cs()[0].min_eigenvalue(), 0.0883883, epsilon = 1e-7);
        assert!(explicit_bm_factorization(2, 0.5).is_err());
    }

    #[test]
    fn verify_reports_failures() {
        let p = make_bm(4, 0.25).unwrap();
        let f = explicit_bm_factorization(4, 0.25).unwrap();
        let zero = HermitianOperator::zeros(2);
        let zeros = PsdFactorization::new(vec![zero.clone(); 4], vec![zero; 4]).unwrap();
        let rep = verify_psd_factorization(&p, &zeros, 1e-10).unwrap();
        assert!(!rep.passed);
        let max_p = p.entries().iter().cloned().fold(0.0, f64::max);
        assert_abs_diff_eq!(rep.residual, max_p, epsilon = 1e-15);
        let neg = f.cs()[0].scaled(-1.0);
        let flipped = f.clone().with_row_factor(0, neg).unwrap();
        let rep = verify_psd_factorization(&p, &flipped, 1e-10).unwrap();
        assert!(!rep.passed && rep.min_eigenvalue_c < 0.0);
        let small = make_bm(3, 0.25).unwrap();
        assert!(matches!(
            verify_psd_factorization(&small, &f, 1e-10),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn edm_factorization_checks() {
        let f = explicit_edm_factorization(&[-1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(f.cs()[0].trace_with(&f.ds()[0]), 0.0, epsilon = 1e-15);
        let f = explicit_edm_factorization(&[-1.0, 0.0, 1.0]).unwrap();
        let p = make_edm(&[-1.0, 0.0, 1.0]).unwrap();
        assert!(verify_psd_factorization(&p, &f, 1e-10).unwrap().passed);
        let half = HermitianOperator::identity(2).scaled(1.0 / SQRT_2);
        assert!(f.c_sum().max_abs_diff(&half) < 1e-12);
        assert!(f.d_sum().max_abs_diff(&half) < 1e-12);
        assert!(matches!(
            explicit_edm_factorization(&[0.0, 1.0, 3.0]),
            Err(Error::AlphaSumNonzero { .. })
        ));
    }

    #[test]
    fn am_factorization_checks() {
        let (m, k) = (4, 0.5);
        let q = am_q(k);
        let f = explicit_am_factorization(m, k).unwrap();
        let p = make_am(m, k).unwrap();
        assert!(verify_psd_factorization(&p, &f, 1e-10).unwrap().passed);
        assert_abs_diff_eq!(f.cs()[0].trace_with(&f.ds()[0]), (1.0 - q).powi(2) / 2.0, epsilon = 1e-14);
        for x in 1..=m {
            let want = q * (1.0 - q) / (2.0 * m as f64);
            assert_abs_diff_eq!(f.cs()[x].trace_with(&f.ds()[0]), want, epsilon = 1e-14);
            assert_abs_diff_eq!(f.cs()[0].trace_with(&f.ds()[x]), want, epsilon = 1e-14);
        }
        assert_eq!(f.r(), 3);
    }

    #[test]
    fn noisy_verification_boundary() {
        let p = make_bm(4, 0.25).unwrap();
        let f = explicit_bm_factorization(4, 0.25).unwrap();
        let plain = verify_psd_factorization(&p, &f, 1e-10).unwrap();
        let zero = verify_noisy_psd_factorization(&p, &f, 0.0, 1e-10).unwrap();
        assert_eq!(plain.passed, zero.passed);
        let at = verify_noisy_psd_factorization(&p, &f, 0.5, 1e-10).unwrap();
        assert!(at.passed);
        assert_abs_diff_eq!(at.noisy_min_eigenvalue().unwrap(), 0.0, epsilon = 1e-12);
        let past = verify_noisy_psd_factorization(&p, &f, 0.51, 1e-10).unwrap();
        assert!(!past.passed);
        assert_abs_diff_eq!(
            past.noisy_min_eigenvalue().unwrap(),
            (0.5 - 0.51) / (SQRT_2 * 4.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn noisy_verification_needs_invertible_sums() {
        let p = Correlation::from_flat(2, vec![0.25; 4], 1e-12).unwrap();
        let e = HermitianOperator::from_real_diagonal(&[0.5, 0.0]);
        let f = PsdFactorization::new(vec![e.clone(), e.clone()], vec![e.clone(), e]).unwrap();
        assert!(matches!(
            verify_noisy_psd_factorization(&p, &f, 0.1, 1e-9),
            Err(Error::SingularSum { .. })
        ));
    }

    #[test]
    fn diagonalize_bm_keeps_lambda() {
        let f = explicit_bm_factorization(6, 0.5).unwrap();
        let (g, lam) = diagonalize_factorization(&f).unwrap();
        for v in &lam {
            assert_abs_diff_eq!(*v, 1.0 / SQRT_2, epsilon = 1e-12);
        }
        let diff = f
            .products()
            .iter()
            .zip(g.products())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn diagonalize_general_factorization() {
        let f = explicit_am_factorization(5, 0.3).unwrap();
        let p = make_am(5, 0.3).unwrap();
        let (g, lam) = diagonalize_factorization(&f).unwrap();
        assert!(verify_psd_factorization(&p, &g, 1e-9).unwrap().passed);
        let norm: f64 = lam.iter().map(|v| v * v).sum();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-9);
        let lam_op = HermitianOperator::from_real_diagonal(&lam);
        assert!(g.c_sum().max_abs_diff(&lam_op) < 1e-9);
        assert!(g.d_sum().max_abs_diff(&lam_op) < 1e-9);
    }

    #[test]
    fn bm_protocols_reproduce_family() {
        let (m, k) = (5, 0.25);
        let p = make_bm(m, k).unwrap();
        let (g, lam) = diagonalize_factorization(&explicit_bm_factorization(m, k).unwrap()).unwrap();
        for lambda in [0.0, 0.25, 0.5] {
            let proto = protocol_from_noisy_factorization(&p, &g, lambda).unwrap();
            assert_eq!(proto.local_dim(), 2);
            let out = generated_correlation(&proto).unwrap();
            assert!(out.max_abs_diff(&p) < 1e-9, "lambda {lambda}");
            let inv = HermitianOperator::from_real_diagonal(&lam.iter().map(|b| 1.0 / b).collect::<Vec<_>>());
            for (mi, ci) in proto.povm_a().effects().iter().zip(g.cs()) {
                assert_abs_diff_eq!(mi.trace(), ci.trace_with(&inv), epsilon = 1e-10);
            }
        }
        assert!(matches!(
            protocol_from_noisy_factorization(&p, &g, 0.6),
            Err(Error::FactorizationInvalid(_))
        ));
        assert_eq!(protocol_from_noisy_factorization(&p, &g, 1.0), Err(Error::LambdaOne));
        // same products, unequal sums
        let lopsided = PsdFactorization::new(
            g.cs().iter().map(|op| op.scaled(2.0)).collect(),
            g.ds().iter().map(|op| op.scaled(0.5)).collect(),
        )
        .unwrap();
        assert_eq!(
            protocol_from_noisy_factorization(&p, &lopsided, 0.0),
            Err(Error::NotDiagonalized)
        );
    }

    #[test]
    fn noiseless_protocol_reproduces_input() {
        let q = Correlation::from_flat(3, vec![0.2, 0.1, 0.0, 0.05, 0.3, 0.05, 0.0, 0.0, 0.3], 1e-12).unwrap();
        let proto = noiseless_protocol(&q).unwrap();
        assert!(generated_correlation(&proto).unwrap().max_abs_diff(&q) < 1e-12);
        let zero_row = Correlation::from_flat(2, vec![0.6, 0.4, 0.0, 0.0], 1e-12).unwrap();
        let proto = noiseless_protocol(&zero_row).unwrap();
        assert_eq!(proto.local_dim(), 1);
        assert!(generated_correlation(&proto).unwrap().max_abs_diff(&zero_row) < 1e-12);
    }

    #[test]
    fn enlarge_uniform_weights() {
        let q = Correlation::from_flat(2, vec![0.5, 0.0, 0.0, 0.5], 1e-12).unwrap();
        let base = noiseless_protocol(&q).unwrap();
        let u = [0.5, 0.5];
        // traces are 1 on d′ = 2, so k = max(2, ⌈2·1/2⌉) = 2
        assert_eq!(enlargement_factor(&base, &u, &u).unwrap(), 2);
        let big = enlarge_protocol(&base, &u, &u, 0.3).unwrap();
        assert_eq!(big.local_dim(), 4);
        let total = HermitianOperator::sum(4, big.povm_a().effects());
        assert!(total.max_abs_diff(&HermitianOperator::identity(4)) < 1e-10);
        for e in big.povm_a().effects() {
            assert_abs_diff_eq!(e.trace(), 4.0 * 0.5, epsilon = 1e-10);
        }
        let skew = [0.1, 0.9];
        assert_eq!(enlargement_factor(&base, &skew, &u).unwrap(), 5);
        assert_eq!(enlarge_protocol(&base, &[0.0, 1.0], &u, 0.3), Err(Error::InfeasibleST));
        assert_eq!(enlarge_protocol(&base, &u, &u, 1.0), Err(Error::LambdaOne));
    }

    #[test]
    fn nonneg_rank_examples() {
        let opts = NmfOptions { restarts: 8, ..Default::default() };
        let prod = Correlation::product(&[0.3, 0.7], &[0.6, 0.4]).unwrap();
        assert_eq!(nonneg_rank_upper(&prod, 2, opts), 1);
        let diag = Correlation::from_flat(2, vec![0.5, 0.0, 0.0, 0.5], 1e-12).unwrap();
        assert_eq!(nonneg_rank_upper(&diag, 2, opts), 2);
        let edm = make_edm(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(nonneg_rank_upper(&edm, 3, opts), 3);
        assert_eq!(nonneg_rank_upper(&edm, 2, opts), 3);
    }

    #[test]
    fn nonneg_rank_finds_planted_rank_two() {
        let w = DMatrix::from_row_slice(4, 2, &[1.0, 0.2, 0.5, 0.5, 0.1, 1.0, 0.7, 0.3]);
        let h = DMatrix::from_row_slice(2, 4, &[0.9, 0.1, 0.4, 0.6, 0.2, 1.0, 0.5, 0.3]);
        let m = &w * &h;
        let total = m.sum();
        let entries: Vec<f64> = (0..16).map(|i| m[(i / 4, i % 4)] / total).collect();
        let p = Correlation::from_flat(4, entries, 1e-12).unwrap();
        assert_eq!(p.rank(1e-10), 2);
        assert_eq!(nonneg_rank_upper(&p, 4, NmfOptions::default()), 2);
    }

    #[test]
    fn bm_rank_lower_examples() {
        assert_eq!(bm_nonneg_rank_lower(8, 0.9).unwrap(), 3);
        assert_eq!(bm_nonneg_rank_lower(6, 0.7).unwrap(), 2);
        assert_eq!(bm_nonneg_rank_lower(6, 0.6).unwrap(), 1);
        assert_eq!(bm_nonneg_rank_lower(8, 1e-6).unwrap(), 1);
    }

    #[test]
    fn edm_rank_examples() {
        let b = edm_rank_bounds(4).unwrap();
        assert_eq!((b.nonneg.lower, b.psd.upper), (2, 2));
        assert_eq!(edm_rank_bounds(9).unwrap().nonneg.lower, 4);
        assert_eq!(edm_rank_bounds(2).unwrap().nonneg.lower, 2);
    }

    #[test]
    fn factorization_json_shape() {
        let f = explicit_bm_factorization(3, 0.5).unwrap();
        let v: serde_json::Value = serde_json::to_value(&f).unwrap();
        assert_eq!(v["r"], 2);
        assert_eq!(v["cs"].as_array().unwrap().len(), 3);
        assert_eq!(v["ds"][0]["dim"], 2);
        let back: PsdFactorization = serde_json::from_value(v).unwrap();
        assert_eq!(back.products().len(), 9);
    }
}
