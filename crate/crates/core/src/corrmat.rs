//! Classical correlations and the structured families used to study noisy
//! correlation generation.
//!
//! A [`Correlation`] is an `n × n` joint distribution `P(x, y)` over Alice's
//! and Bob's outcomes. Storage is row-major and 0-based; everything printed
//! for humans (errors, CSV) uses 1-based indices.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries above `-SIGN_TOL` count as nonnegative.
pub const SIGN_TOL: f64 = 1e-12;
/// Allowed deviation of the total mass from 1.
pub const SUM_TOL: f64 = 1e-9;

/// A validated joint outcome distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlation {
    n: usize,
    entries: Vec<f64>,
}

#[derive(Deserialize)]
struct RawCorrelation {
    n: usize,
    entries: Vec<f64>,
}

impl<'de> Deserialize<'de> for Correlation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawCorrelation::deserialize(d)?;
        if raw.entries.len() != raw.n * raw.n {
            return Err(serde::de::Error::custom(format!(
                "expected {} entries for n = {}, got {}",
                raw.n * raw.n,
                raw.n,
                raw.entries.len()
            )));
        }
        Correlation::from_flat(raw.n, raw.entries, SIGN_TOL).map_err(serde::de::Error::custom)
    }
}

impl Correlation {
    /// Validates a square array of probabilities. Nothing is renormalized.
    pub fn validate(rows: &[Vec<f64>], tol: f64) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        let mut entries = Vec::with_capacity(n * n);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    row: row + 1,
                    cols: r.len(),
                });
            }
            entries.extend_from_slice(r);
        }
        Self::from_flat(n, entries, tol)
    }

    /// Validates a row-major array of length `n²`.
    pub fn from_flat(n: usize, entries: Vec<f64>, tol: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for n = {n}",
                entries.len()
            )));
        }
        for (i, &p) in entries.iter().enumerate() {
            if !p.is_finite() || p < -tol {
                return Err(Error::NegativeEntry {
                    x: i / n + 1,
                    y: i % n + 1,
                });
            }
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::SumNotOne { actual: sum });
        }
        Ok(Self { n, entries })
    }

    /// Builds a correlation from numerically computed probabilities, zeroing
    /// entries in `[-clamp, 0)`. Anything more negative is rejected.
    pub fn from_computed(n: usize, mut entries: Vec<f64>, clamp: f64) -> Result<Self> {
        for p in entries.iter_mut() {
            if *p < 0.0 && *p >= -clamp {
                *p = 0.0;
            }
        }
        Self::from_flat(n, entries, SIGN_TOL)
    }

    /// Divides a nonnegative array by its total mass.
    pub fn normalize(rows: &[Vec<f64>]) -> Result<Self> {
        let total: f64 = rows.iter().flatten().sum();
        if !(total > 0.0) {
            return Err(Error::BadParameter("total mass must be positive".into()));
        }
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|p| p / total).collect())
            .collect();
        Self::validate(&scaled, SIGN_TOL)
    }

    /// Outer product `u vᵀ` of two probability vectors.
    pub fn product(u: &[f64], v: &[f64]) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch(
                "product marginals must have equal length".into(),
            ));
        }
        let n = u.len();
        let entries = (0..n * n).map(|i| u[i / n] * v[i % n]).collect();
        Self::from_flat(n, entries, SIGN_TOL)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry at 0-based `(x, y)`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.entries[x * self.n + y]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.entries)
    }

    /// `(Σ_b P(x,b), Σ_a P(a,y))`.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut rows = vec![0.0; n];
        let mut cols = vec![0.0; n];
        for x in 0..n {
            for y in 0..n {
                let p = self.get(x, y);
                rows[x] += p;
                cols[y] += p;
            }
        }
        (rows, cols)
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Numerical rank from singular values above `tol · σ_max`.
    pub fn rank(&self, tol: f64) -> usize {
        numerical_rank(&self.to_matrix(), tol)
    }

    pub fn max_abs_diff(&self, other: &Correlation) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Facet normals of the outer regular polygon and vertices of the inner one.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonPair {
    m: usize,
    k: f64,
    outer_normals: Vec<[f64; 2]>,
    inner_vertices: Vec<[f64; 2]>,
}

impl PolygonPair {
    pub fn new(m: usize, k: f64) -> Result<Self> {
        check_polygon_params(m, k)?;
        let angle = |i: usize| 2.0 * PI * i as f64 / m as f64;
        let outer_normals = (0..m).map(|x| [angle(x).cos(), angle(x).sin()]).collect();
        let inner_vertices = (0..m)
            .map(|y| [k * angle(y).cos(), -k * angle(y).sin()])
            .collect();
        Ok(Self {
            m,
            k,
            outer_normals,
            inner_vertices,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn outer_normals(&self) -> &[[f64; 2]] {
        &self.outer_normals
    }

    pub fn inner_vertices(&self) -> &[[f64; 2]] {
        &self.inner_vertices
    }

    /// `S(x, y) = 1 − a_x · b_y`, row-major.
    pub fn slack_matrix(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.m * self.m);
        for a in &self.outer_normals {
            for b in &self.inner_vertices {
                s.push(1.0 - (a[0] * b[0] + a[1] * b[1]));
            }
        }
        s
    }
}

fn check_polygon_params(m: usize, k: f64) -> Result<()> {
    if m < 3 {
        return Err(Error::BadParameter(format!("m must be >= 3, got {m}")));
    }
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::BadParameter(format!("k must lie in (0,1), got {k}")));
    }
    Ok(())
}

/// Normalized Euclidean distance matrix `(α_x − α_y)² / Σ_ij (α_i − α_j)²`.
pub fn make_edm(alphas: &[f64]) -> Result<Correlation> {
    let m = alphas.len();
    if m < 2 {
        return Err(Error::BadParameter("need at least two alphas".into()));
    }
    for i in 0..m {
        for j in i + 1..m {
            if alphas[i] == alphas[j] {
                return Err(Error::DuplicateAlpha);
            }
        }
    }
    let raw: Vec<f64> = (0..m * m)
        .map(|i| (alphas[i / m] - alphas[i % m]).powi(2))
        .collect();
    let total: f64 = raw.iter().sum();
    Correlation::from_flat(m, raw.into_iter().map(|v| v / total).collect(), SIGN_TOL)
}

/// `L · EDM · R` for positive diagonal scalings. The result need not sum to 1,
/// so it is returned as a plain row-major matrix.
pub fn make_modified_edm(alphas: &[f64], left: &[f64], right: &[f64]) -> Result<DMatrix<f64>> {
    let edm = make_edm(alphas)?;
    let m = edm.n();
    if left.len() != m || right.len() != m {
        return Err(Error::DimensionMismatch(
            "scaling diagonals must match the number of alphas".into(),
        ));
    }
    if left.iter().chain(right).any(|&v| !(v > 0.0)) {
        return Err(Error::NonpositiveScale);
    }
    Ok(DMatrix::from_fn(m, m, |x, y| left[x] * edm.get(x, y) * right[y]))
}

/// Slack matrix of two concentric regular `m`-gons, scaled by `1/m²`.
pub fn make_bm(m: usize, k: f64) -> Result<Correlation> {
    check_polygon_params(m, k)?;
    let mf = m as f64;
    let entries = (0..m * m)
        .map(|i| {
            let (x, y) = (i / m, i % m);
            (1.0 - k * (2.0 * PI * ((x + y) % m) as f64 / mf).cos()) / (mf * mf)
        })
        .collect();
    Correlation::from_flat(m, entries, SIGN_TOL)
}

/// `q = 1/(1−k) − √(1/(1−k)² − 1)`, the reachability edge of `A_m`.
pub fn am_q(k: f64) -> f64 {
    let a = 1.0 / (1.0 - k);
    // a - sqrt(a^2 - 1) == 1 / (a + sqrt(a^2 - 1)), which avoids cancellation for small k
    1.0 / (a + (a * a - 1.0).sqrt())
}

/// The `(m+1) × (m+1)` correlation that embeds `(1+q²)/2 · B_m` below a
/// single heavy outcome.
pub fn make_am(m: usize, k: f64) -> Result<Correlation> {
    let b = make_bm(m, k)?;
    let q = am_q(k);
    let n = m + 1;
    let edge = q * (1.0 - q) / (2.0 * m as f64);
    let scale = (1.0 + q * q) / 2.0;
    let mut entries = vec![0.0; n * n];
    entries[0] = (1.0 - q).powi(2) / 2.0;
    for i in 1..n {
        entries[i] = edge;
        entries[i * n] = edge;
        for j in 1..n {
            entries[i * n + j] = scale * b.get(i - 1, j - 1);
        }
    }
    Correlation::from_flat(n, entries, SIGN_TOL)
}

/// Output of [`make_schmidt_scaled_edm`].
#[derive(Debug, Clone)]
pub struct SchmidtScaledEdm {
    pub correlation: Correlation,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// The rescaling `r ∈ [0, 1)`.
    pub r: f64,
    /// `μ₁ = λ₁ / (λ₁ + λ₂)`.
    pub mu1: f64,
}

/// Correlation generated by an entangled pure state with squared Schmidt
/// coefficients `schmidt_sq`: a scaled modified EDM block plus one extra
/// outcome pair carrying the weight outside the top two Schmidt terms.
pub fn make_schmidt_scaled_edm(schmidt_sq: &[f64], alphas: &[f64]) -> Result<SchmidtScaledEdm> {
    if schmidt_sq.len() < 2
        || schmidt_sq.iter().any(|&l| !(l > 0.0))
        || schmidt_sq.windows(2).any(|w| w[0] < w[1])
        || schmidt_sq.iter().sum::<f64>() > 1.0 + SUM_TOL
    {
        return Err(Error::SchmidtOrder);
    }
    let sum: f64 = alphas.iter().sum();
    if sum.abs() > 1e-12 {
        return Err(Error::AlphaSumNonzero { sum });
    }
    let edm = make_edm(alphas)?;
    let m = edm.n();
    let (l1, l2) = (schmidt_sq[0], schmidt_sq[1]);
    let mu1 = l1 / (l1 + l2);
    let mass: f64 = (0..m).map(|y| edm.get(0, y)).sum();
    if !(mass > mu1 - 0.5) {
        return Err(Error::Condition3Violated {
            mass,
            needed: mu1 - 0.5,
        });
    }
    let r = (mu1 - 0.5) / mass;
    let mut left = vec![1.0; m];
    let mut right = vec![1.0; m];
    left[0] = 1.0 + r;
    right[0] = 1.0 - r;
    let block = make_modified_edm(alphas, &left, &right)?;
    let n = m + 1;
    let w = l1 + l2;
    let mut entries = vec![0.0; n * n];
    for x in 0..m {
        for y in 0..m {
            entries[x * n + y] = w * block[(x, y)];
        }
    }
    entries[n * n - 1] = (1.0 - w).max(0.0);
    let correlation = Correlation::from_flat(n, entries, SIGN_TOL)?;
    Ok(SchmidtScaledEdm {
        correlation,
        left,
        right,
        r,
        mu1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn validate_accepts_and_rejects() {
        assert!(Correlation::validate(&[vec![0.5, 0.0], vec![0.0, 0.5]], SIGN_TOL).is_ok());
        match Correlation::validate(&[vec![0.5, 0.1], vec![0.1, 0.5]], SIGN_TOL) {
            Err(Error::SumNotOne { actual }) => assert_abs_diff_eq!(actual, 1.2, epsilon = 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            Correlation::validate(&[vec![1.1, -0.1], vec![0.0, 0.0]], SIGN_TOL),
            Err(Error::NegativeEntry { x: 1, y: 2 })
        );
        assert!(matches!(
            Correlation::validate(&[vec![1.0, 0.0], vec![0.0]], SIGN_TOL),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn normalize_is_explicit() {
        let p = Correlation::normalize(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(p.get(1, 0), 0.25);
    }

    #[test]
    fn marginals_examples() {
        let p = Correlation::validate(&[vec![0.4, 0.1], vec![0.1, 0.4]], SIGN_TOL).unwrap();
        let (r, c) = p.marginals();
        assert_abs_diff_eq!(r[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c[1], 0.5, epsilon = 1e-15);
        let b = make_bm(3, 0.5).unwrap();
        let (r, c) = b.marginals();
        for v in r.iter().chain(&c) {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn edm_examples() {
        let e = make_edm(&[0.0, 1.0]).unwrap();
        assert_eq!(e.rows(), vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
        let e = make_edm(&[-1.0, 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(e.get(0, 2), 4.0 / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.get(0, 1), 1.0 / 12.0, epsilon = 1e-15);
        for x in 0..3 {
            assert_eq!(e.get(x, x), 0.0);
        }
        assert_eq!(make_edm(&[1.0, 2.0, 1.0]), Err(Error::DuplicateAlpha));
    }

    #[test]
    fn modified_edm_examples() {
        let m = make_modified_edm(&[0.0, 1.0], &[2.0, 1.0], &[0.5, 1.0]).unwrap();
        // entrywise L[x]·EDM(x,y)·R[y]: 2·0.5·1 and 1·0.5·0.5
        assert_eq!(m[(0, 1)], 1.0);
        assert_eq!(m[(1, 0)], 0.25);
        assert_eq!(m[(0, 0)], 0.0);
        let same = make_modified_edm(&[0.0, 1.0, 3.0], &[1.0; 3], &[1.0; 3]).unwrap();
        let edm = make_edm(&[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(same, edm.to_matrix());
        assert_eq!(
            make_modified_edm(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 1.0]),
            Err(Error::NonpositiveScale)
        );
    }

    #[test]
    fn bm_examples() {
        let b = make_bm(3, 0.5).unwrap();
        assert_abs_diff_eq!(b.get(0, 0), 0.5 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.get(0, 1), 1.25 / 9.0, epsilon = 1e-15);
        let b = make_bm(6, 0.5).unwrap();
        for x in 1..6 {
            // 1-based (x, m+2-x) is 0-based (x, m-x)
            assert_abs_diff_eq!(b.get(x, 6 - x), 0.5 / 36.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(b.min_entry(), 0.5 / 36.0, epsilon = 1e-15);
        let tiny = make_bm(5, 1e-14).unwrap();
        for &p in tiny.entries() {
            assert_abs_diff_eq!(p, 1.0 / 25.0, epsilon = 1e-14);
        }
        assert!(make_bm(2, 0.5).is_err());
        assert!(make_bm(4, 1.0).is_err());
    }

    #[test]
    fn bm_matches_polygon_slack() {
        for m in 3..9 {
            let pair = PolygonPair::new(m, 0.7).unwrap();
            let b = make_bm(m, 0.7).unwrap();
            for (s, p) in pair.slack_matrix().iter().zip(b.entries()) {
                assert_abs_diff_eq!(s / (m * m) as f64, *p, epsilon = 1e-12);
            }
            for (a, v) in pair.outer_normals().iter().zip(pair.inner_vertices()) {
                assert_abs_diff_eq!(a[0].hypot(a[1]), 1.0, epsilon = 1e-15);
                assert_abs_diff_eq!(v[0].hypot(v[1]), 0.7, epsilon = 1e-15);
            }
            assert!(pair.slack_matrix().iter().all(|&s| s > 0.0));
        }
    }

    #[test]
    fn am_examples() {
        let q = am_q(0.5);
        assert_abs_diff_eq!(q, 2.0 - 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!((1.0 + q * q) * 0.5 / 2.0 - q, 0.0, epsilon = 1e-12);
        let a = make_am(4, 0.5).unwrap();
        assert_eq!(a.n(), 5);
        assert_abs_diff_eq!(a.entries().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.get(0, 0), (1.0 - q).powi(2) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.get(0, 3), q * (1.0 - q) / 8.0, epsilon = 1e-15);
        let b = make_bm(4, 0.5).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                assert_abs_diff_eq!(a.get(x + 1, y + 1), (1.0 + q * q) / 2.0 * b.get(x, y), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn schmidt_scaled_examples() {
        let alphas = [-3.0, 1.0, 1.0 + 1e-3, 1.0 - 1e-3];
        let fam = make_schmidt_scaled_edm(&[0.5, 0.5], &alphas).unwrap();
        assert_eq!(fam.r, 0.0);
        let edm = make_edm(&alphas).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                assert_abs_diff_eq!(fam.correlation.get(x, y), edm.get(x, y), epsilon = 1e-15);
            }
        }
        assert_eq!(fam.correlation.get(4, 4), 0.0);

        // Σα = 0; row-1 mass is Σ_y (α_1 − α_y)² / (2·4·Σα²)
        let d: f64 = 0.5;
        let alphas = [-3.0, 1.0, 1.0 + d, 1.0 - d];
        let sq: f64 = alphas.iter().map(|a| a * a).sum();
        let mass = (0.0 + 16.0 + (4.0 + d).powi(2) + (4.0 - d).powi(2)) / (8.0 * sq);
        let fam = make_schmidt_scaled_edm(&[0.6, 0.4], &alphas).unwrap();
        assert_abs_diff_eq!(fam.r, 0.1 / mass, epsilon = 1e-14);
        assert_eq!(fam.left[0], 1.0 + fam.r);

        assert!(matches!(
            make_schmidt_scaled_edm(&[0.4, 0.6], &alphas),
            Err(Error::SchmidtOrder)
        ));
        assert!(matches!(
            make_schmidt_scaled_edm(&[0.6, 0.4], &[0.0, 1.0, 2.0]),
            Err(Error::AlphaSumNonzero { .. })
        ));
        // row-1 mass of [0, -1, 1] is 2/12; mu1 = 0.99 needs more than 0.49
        assert!(matches!(
            make_schmidt_scaled_edm(&[0.99, 0.01], &[0.0, -1.0, 1.0]),
            Err(Error::Condition3Violated { .. })
        ));
    }

    #[test]
    fn schmidt_scaled_with_three_terms() {
        let alphas = [-2.0, 1.0, 1.5, -0.5];
        let fam = make_schmidt_scaled_edm(&[0.5, 0.3, 0.2], &alphas).unwrap();
        assert_abs_diff_eq!(fam.correlation.get(4, 4), 0.2, epsilon = 1e-15);
        let block = fam.correlation.to_matrix().view((0, 0), (4, 4)).into_owned();
        let edm = make_edm(&alphas).unwrap().to_matrix();
        assert_eq!(numerical_rank(&block, 1e-10), numerical_rank(&edm, 1e-10));
    }

    #[test]
    fn json_shape() {
        let p = make_bm(3, 0.5).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.starts_with("{\"n\":3,\"entries\":["));
        let back: Correlation = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Correlation>(r#"{"n":2,"entries":[0.5,0.5,0.1]}"#).is_err());
    }
}
