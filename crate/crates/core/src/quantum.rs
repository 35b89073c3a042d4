//! Quantum side: Hermitian operators, seed states, POVMs, the depolarizing
//! channel and exact or sampled simulation of noisy two-party protocols.
//!
//! Bipartite operators are stored as `d² × d²` matrices with party A as the
//! left Kronecker factor, so basis index `(i, j)` maps to `i·d + j`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corrmat::Correlation;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, ZERO};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-9;

/// A dense Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    mat: CMatrix,
}

impl HermitianOperator {
    /// Accepts `mat` if it is Hermitian within [`HERMITIAN_TOL`]; the stored
    /// matrix is the exact Hermitian part.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch("operator must be square".into()));
        }
        let deviation = linalg::hermitian_deviation(&mat);
        if !(deviation <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self {
            mat: linalg::symmetrize(&mat),
        })
    }

    pub(crate) fn from_trusted(mat: CMatrix) -> Self {
        Self {
            mat: linalg::symmetrize(&mat),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mat: linalg::identity(d),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            mat: CMatrix::zeros(d, d),
        }
    }

    pub fn from_real_diagonal(values: &[f64]) -> Self {
        Self {
            mat: linalg::real_diag(values),
        }
    }

    /// `|v⟩⟨v|`.
    pub fn projector(v: &[Complex64]) -> Self {
        let n = v.len();
        Self {
            mat: CMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj()),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.mat).re
    }

    /// `tr(self · other)`, real for Hermitian arguments.
    pub fn trace_with(&self, other: &HermitianOperator) -> f64 {
        linalg::trace_product(&self.mat, &other.mat).re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigh(&self.mat).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.mat)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mat: &self.mat * c(factor),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            mat: self.mat.transpose(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat + &other.mat,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat - &other.mat,
        }
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            mat: linalg::kron(&self.mat, &other.mat),
        }
    }

    /// `h · self · h†`.
    pub fn congruence(&self, h: &CMatrix) -> Self {
        Self::from_trusted(h * &self.mat * h.adjoint())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        linalg::max_abs(&(&self.mat - &other.mat))
    }

    pub fn sum<'a>(dim: usize, ops: impl IntoIterator<Item = &'a HermitianOperator>) -> Self {
        let mut acc = CMatrix::zeros(dim, dim);
        for op in ops {
            acc += &op.mat;
        }
        Self { mat: acc }
    }
}

/// Wire format `{"dim": d, "re": [...], "im": [...]}`, row-major.
#[derive(Serialize, Deserialize)]
struct OperatorJson {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for HermitianOperator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim();
        let mut re = Vec::with_capacity(d * d);
        let mut im = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                re.push(self.mat[(i, j)].re);
                im.push(self.mat[(i, j)].im);
            }
        }
        OperatorJson { dim: d, re, im }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianOperator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = OperatorJson::deserialize(d)?;
        let n = raw.dim;
        if raw.re.len() != n * n || raw.im.len() != n * n {
            return Err(serde::de::Error::custom("operator arrays must hold dim² entries"));
        }
        let mat = CMatrix::from_fn(n, n, |i, j| {
            Complex64::new(raw.re[i * n + j], raw.im[i * n + j])
        });
        HermitianOperator::new(mat).map_err(serde::de::Error::custom)
    }
}

/// A unit-trace PSD operator, optionally tagged as bipartite `d ⊗ d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
    local_dim: Option<usize>,
}

impl DensityMatrix {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let trace = op.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::BadTrace { trace });
        }
        let min_eigenvalue = op.min_eigenvalue();
        if min_eigenvalue < -PSD_TOL {
            return Err(Error::NotPsd { min_eigenvalue });
        }
        Ok(Self { op, local_dim: None })
    }

    /// A state on `C^d ⊗ C^d`.
    pub fn bipartite(op: HermitianOperator, d: usize) -> Result<Self> {
        if op.dim() != d * d {
            return Err(Error::NotBipartite);
        }
        let mut state = Self::new(op)?;
        state.local_dim = Some(d);
        Ok(state)
    }

    /// `|ψ⟩⟨ψ|` for a unit vector on `C^d ⊗ C^d`.
    pub fn pure_bipartite(psi: &[Complex64], d: usize) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Self::bipartite(HermitianOperator::projector(psi), d)
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn local_dim(&self) -> Option<usize> {
        self.local_dim
    }

    fn require_local_dim(&self) -> Result<usize> {
        self.local_dim.ok_or(Error::NotBipartite)
    }

    /// `(σ_A, σ_B)`.
    pub fn reduced(&self) -> Result<(HermitianOperator, HermitianOperator)> {
        let d = self.require_local_dim()?;
        let m = self.op.matrix();
        Ok((
            HermitianOperator::from_trusted(linalg::partial_trace_b(m, d, d)),
            HermitianOperator::from_trusted(linalg::partial_trace_a(m, d, d)),
        ))
    }
}

/// Effects summing to the identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Povm {
    dim: usize,
    effects: Vec<HermitianOperator>,
}

impl Povm {
    pub fn new(effects: Vec<HermitianOperator>) -> Result<Self> {
        let dim = effects
            .first()
            .map(|e| e.dim())
            .ok_or_else(|| Error::BadParameter("a POVM needs at least one effect".into()))?;
        if effects.iter().any(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch("effects of differing dimension".into()));
        }
        for e in &effects {
            let min_eigenvalue = e.min_eigenvalue();
            if min_eigenvalue < -PSD_TOL {
                return Err(Error::NotPsd { min_eigenvalue });
            }
        }
        let total = HermitianOperator::sum(dim, &effects);
        let deviation = total.max_abs_diff(&HermitianOperator::identity(dim));
        if deviation > PSD_TOL {
            return Err(Error::Incomplete { deviation });
        }
        Ok(Self { dim, effects })
    }

    /// Projective measurement in the computational basis.
    pub fn computational(d: usize) -> Self {
        let effects = (0..d)
            .map(|i| {
                let mut diag = vec![0.0; d];
                diag[i] = 1.0;
                HermitianOperator::from_real_diagonal(&diag)
            })
            .collect();
        Self { dim: d, effects }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn effects(&self) -> &[HermitianOperator] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }
}

impl<'de> Deserialize<'de> for Povm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            effects: Vec<HermitianOperator>,
        }
        Povm::new(Raw::deserialize(d)?.effects).map_err(serde::de::Error::custom)
    }
}

/// Seed state, local measurements and noise strength.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyProtocol {
    seed: DensityMatrix,
    povm_a: Povm,
    povm_b: Povm,
    lambda: f64,
}

impl NoisyProtocol {
    pub fn new(seed: DensityMatrix, povm_a: Povm, povm_b: Povm, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let d = seed.require_local_dim()?;
        if povm_a.dim() != d || povm_b.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "seed has local dimension {d}, POVMs act on {} and {}",
                povm_a.dim(),
                povm_b.dim()
            )));
        }
        if povm_a.len() != povm_b.len() {
            return Err(Error::DimensionMismatch(
                "both parties need the same number of outcomes".into(),
            ));
        }
        Ok(Self {
            seed,
            povm_a,
            povm_b,
            lambda,
        })
    }

    pub fn seed(&self) -> &DensityMatrix {
        &self.seed
    }

    pub fn povm_a(&self) -> &Povm {
        &self.povm_a
    }

    pub fn povm_b(&self) -> &Povm {
        &self.povm_b
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn local_dim(&self) -> usize {
        self.povm_a.dim()
    }

    pub fn outcomes(&self) -> usize {
        self.povm_a.len()
    }

    /// `⌈log₂ d⌉` qubits held by each party.
    pub fn seed_qubits(&self) -> u32 {
        let d = self.local_dim();
        usize::BITS - (d.max(1) - 1).leading_zeros()
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            lambda,
            ..self.clone()
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ProtocolJson {
    lambda: f64,
    seed: HermitianOperator,
    povm_a: Vec<HermitianOperator>,
    povm_b: Vec<HermitianOperator>,
}

impl Serialize for NoisyProtocol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ProtocolJson {
            lambda: self.lambda,
            seed: self.seed.op.clone(),
            povm_a: self.povm_a.effects.clone(),
            povm_b: self.povm_b.effects.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for NoisyProtocol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = ProtocolJson::deserialize(d)?;
        let povm_a = Povm::new(raw.povm_a).map_err(D::Error::custom)?;
        let povm_b = Povm::new(raw.povm_b).map_err(D::Error::custom)?;
        let seed = DensityMatrix::bipartite(raw.seed, povm_a.dim()).map_err(D::Error::custom)?;
        NoisyProtocol::new(seed, povm_a, povm_b, raw.lambda).map_err(D::Error::custom)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::BadLambda(lambda))
    }
}

/// `(1−λ)ρ + λ tr(ρ) I/d`.
pub fn depolarize(rho: &HermitianOperator, lambda: f64) -> Result<HermitianOperator> {
    check_lambda(lambda)?;
    let d = rho.dim();
    let mixed = HermitianOperator::identity(d).scaled(lambda * rho.trace() / d as f64);
    Ok(rho.scaled(1.0 - lambda).add(&mixed))
}

/// `𝓔_λ ⊗ 𝓔_λ (σ)` from the closed form in the reduced states.
pub fn depolarize_bipartite(sigma: &DensityMatrix, lambda: f64) -> Result<DensityMatrix> {
    check_lambda(lambda)?;
    let d = sigma.require_local_dim()?;
    let (sa, sb) = sigma.reduced()?;
    let id = HermitianOperator::identity(d);
    let df = d as f64;
    let keep = sigma.op.scaled((1.0 - lambda).powi(2));
    let left = id.kron(&sb).scaled(lambda * (1.0 - lambda) / df);
    let right = sa.kron(&id).scaled(lambda * (1.0 - lambda) / df);
    let white = HermitianOperator::identity(d * d).scaled(lambda * lambda / (df * df));
    DensityMatrix::bipartite(keep.add(&left).add(&right).add(&white), d)
}

/// Same channel applied one party at a time: `(𝓔⊗id)` then `(id⊗𝓔)`.
pub fn depolarize_bipartite_sequential(
    sigma: &DensityMatrix,
    lambda: f64,
) -> Result<DensityMatrix> {
    check_lambda(lambda)?;
    let d = sigma.require_local_dim()?;
    let id = HermitianOperator::identity(d);
    let on_a = |m: &HermitianOperator| {
        let rb = HermitianOperator::from_trusted(linalg::partial_trace_a(m.matrix(), d, d));
        m.scaled(1.0 - lambda)
            .add(&id.kron(&rb).scaled(lambda / d as f64))
    };
    let on_b = |m: &HermitianOperator| {
        let ra = HermitianOperator::from_trusted(linalg::partial_trace_b(m.matrix(), d, d));
        m.scaled(1.0 - lambda)
            .add(&ra.kron(&id).scaled(lambda / d as f64))
    };
    DensityMatrix::bipartite(on_b(&on_a(&sigma.op)), d)
}

/// `tr((E ⊗ F) ρ)` for `ρ` on `C^d ⊗ C^d`, without forming `E ⊗ F`.
pub fn bipartite_expectation(
    e: &HermitianOperator,
    f: &HermitianOperator,
    rho: &HermitianOperator,
) -> f64 {
    let d = e.dim();
    let g = contract_a(e, rho, d);
    linalg::trace_product(f.matrix(), &g).re
}

/// `G(l, j) = Σ_{i,k} E[i,k] ρ[(k,l),(i,j)]`, so that `tr((E⊗F)ρ) = tr(F G)`.
fn contract_a(e: &HermitianOperator, rho: &HermitianOperator, d: usize) -> CMatrix {
    let em = e.matrix();
    let rm = rho.matrix();
    let mut g = CMatrix::from_element(d, d, ZERO);
    for i in 0..d {
        for k in 0..d {
            let eik = em[(i, k)];
            if eik == ZERO {
                continue;
            }
            for l in 0..d {
                for j in 0..d {
                    g[(l, j)] += eik * rm[(k * d + l, i * d + j)];
                }
            }
        }
    }
    g
}

/// Raw output probabilities `tr(E_x ⊗ F_y 𝓔_λ⊗𝓔_λ(σ))`, row-major.
pub fn output_probabilities(p: &NoisyProtocol) -> Result<Vec<f64>> {
    let d = p.local_dim();
    let df = d as f64;
    let lam = p.lambda;
    let (sa, sb) = p.seed.reduced()?;
    let n = p.outcomes();
    let es = p.povm_a.effects();
    let fs = p.povm_b.effects();
    let tr_f: Vec<f64> = fs.iter().map(|f| f.trace()).collect();
    let f_sb: Vec<f64> = fs.iter().map(|f| f.trace_with(&sb)).collect();
    let mut out = Vec::with_capacity(n * n);
    for e in es {
        let g = contract_a(e, &p.seed.op, d);
        let tr_e = e.trace();
        let e_sa = e.trace_with(&sa);
        for (y, f) in fs.iter().enumerate() {
            let joint = linalg::trace_product(f.matrix(), &g).re;
            out.push(
                (1.0 - lam).powi(2) * joint
                    + lam * (1.0 - lam) * (tr_e / df) * f_sb[y]
                    + lam * (1.0 - lam) * e_sa * (tr_f[y] / df)
                    + lam * lam * tr_e * tr_f[y] / (df * df),
            );
        }
    }
    Ok(out)
}

/// Exact output distribution of a noisy protocol.
pub fn generated_correlation(p: &NoisyProtocol) -> Result<Correlation> {
    let probs = output_probabilities(p)?;
    Correlation::from_computed(p.outcomes(), probs, 1e-10)
}

/// `n × n` outcome counts, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMatrix {
    pub n: usize,
    pub counts: Vec<u64>,
}

impl CountMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, x: usize, y: usize) -> u64 {
        self.counts[x * self.n + y]
    }
}

/// Multinomial draw of `count` outcome pairs, seeded with ChaCha8.
pub fn sample(p: &NoisyProtocol, count: u64, seed: u64) -> Result<CountMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(p, count, &mut rng)
}

/// Inverse-CDF sampling over the flattened `n²` outcome vector.
pub fn sample_with<R: Rng + ?Sized>(p: &NoisyProtocol, count: u64, rng: &mut R) -> Result<CountMatrix> {
    let corr = generated_correlation(p)?;
    Ok(sample_correlation(&corr, count, rng))
}

pub fn sample_correlation<R: Rng + ?Sized>(corr: &Correlation, count: u64, rng: &mut R) -> CountMatrix {
    let n = corr.n();
    let mut cdf = Vec::with_capacity(n * n);
    let mut acc = 0.0;
    for &q in corr.entries() {
        acc += q.max(0.0);
        cdf.push(acc);
    }
    let total = acc;
    let mut counts = vec![0u64; n * n];
    for _ in 0..count {
        let u: f64 = rng.random::<f64>() * total;
        let idx = cdf.partition_point(|&c| c <= u).min(n * n - 1);
        counts[idx] += 1;
    }
    CountMatrix { n, counts }
}

/// Schmidt form of a bipartite pure state.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    /// Squared Schmidt coefficients, descending; they sum to 1.
    pub coeffs: Vec<f64>,
    pub basis_a: Vec<Vec<Complex64>>,
    pub basis_b: Vec<Vec<Complex64>>,
}

/// `ψ = Σ √λ_i |φ_i^A⟩ ⊗ |φ_i^B⟩` via the SVD of the coefficient matrix.
pub fn schmidt_decompose(psi: &[Complex64], da: usize, db: usize) -> Result<SchmidtDecomposition> {
    if psi.len() != da * db {
        return Err(Error::DimensionMismatch(format!(
            "state of length {} is not {da}×{db}",
            psi.len()
        )));
    }
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > TRACE_TOL {
        return Err(Error::NotNormalized { norm });
    }
    let coeff = CMatrix::from_fn(da, db, |i, j| psi[i * db + j]);
    let svd = coeff.svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V†");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = SchmidtDecomposition {
        coeffs: Vec::new(),
        basis_a: Vec::new(),
        basis_b: Vec::new(),
    };
    for k in order {
        let s = svd.singular_values[k];
        if s * s <= 1e-15 {
            continue;
        }
        out.coeffs.push(s * s);
        out.basis_a.push((0..da).map(|i| u[(i, k)]).collect());
        out.basis_b.push((0..db).map(|j| vt[(k, j)]).collect());
    }
    Ok(out)
}

/// `(|00⟩ + |11⟩ + … ) / √d`.
pub fn maximally_entangled(d: usize) -> Vec<Complex64> {
    let mut psi = vec![ZERO; d * d];
    let amp = c(1.0 / (d as f64).sqrt());
    for k in 0..d {
        psi[k * d + k] = amp;
    }
    psi
}
