//! Bounds on the seed dimension needed under noise, the closed forms for
//! the two polygon families, and the classical-over-quantum advantage ratio.

use serde::{Deserialize, Serialize};

use crate::corrmat::{am_q, make_bm, Correlation};
use crate::error::{Error, Result};
use crate::factorize::{explicit_bm_factorization, verify_noisy_psd_factorization, RankBounds};
use crate::reach::{phat, threshold_upper_bound, FEASIBLE_TOL};

/// A cost value that may be infinite because `P` is out of reach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cost {
    Finite(f64),
    Unreachable,
}

impl Cost {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Cost::Finite(v) => Some(*v),
            Cost::Unreachable => None,
        }
    }

    fn le(&self, other: &Cost) -> bool {
        match (self, other) {
            (_, Cost::Unreachable) => true,
            (Cost::Unreachable, Cost::Finite(_)) => false,
            (Cost::Finite(a), Cost::Finite(b)) => a <= b,
        }
    }
}

/// Interval on the minimal local seed dimension at noise `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBounds {
    pub lambda: f64,
    pub lower: Cost,
    pub upper: Cost,
    pub lower_source: String,
    pub upper_source: String,
    /// Set when the lower side is a point evaluation rather than a proof.
    pub heuristic_lower: bool,
}

impl CostBounds {
    pub fn new(
        lambda: f64,
        lower: Cost,
        upper: Cost,
        lower_source: &str,
        upper_source: &str,
        heuristic_lower: bool,
    ) -> Result<Self> {
        if !lower.le(&upper) {
            return Err(Error::InconsistentBounds(format!(
                "cost lower {lower:?} exceeds upper {upper:?}"
            )));
        }
        Ok(Self {
            lambda,
            lower,
            upper,
            lower_source: lower_source.into(),
            upper_source: upper_source.into(),
            heuristic_lower,
        })
    }

    pub fn unreachable(lambda: f64, source: &str) -> Self {
        Self {
            lambda,
            lower: Cost::Unreachable,
            upper: Cost::Unreachable,
            lower_source: source.into(),
            upper_source: source.into(),
            heuristic_lower: false,
        }
    }

    pub fn is_unreachable(&self) -> bool {
        self.lower == Cost::Unreachable
    }
}

/// Classical bits over quantum qubits, as an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageEstimate {
    pub lambda: f64,
    pub r_lower: u32,
    pub r_upper: u32,
    pub q_cost_lower: Option<u32>,
    pub q_cost_upper: Option<u32>,
    pub s_lower: f64,
    pub s_upper: f64,
}

fn check_certificate(p: &Correlation, lambda: f64, s: &[f64], t: &[f64]) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::BadLambda(lambda));
    }
    let low = phat(p, lambda, s, t)?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if low < FEASIBLE_TOL {
        return Err(Error::CertificateInvalid(format!("adjusted matrix has entry {low:e}")));
    }
    if s.iter().chain(t).any(|&w| !(w > 0.0)) {
        return Err(Error::CertificateInvalid("weights must be strictly positive".into()));
    }
    Ok(())
}

/// `psd_upper · ⌈1 / min(s, t)⌉` for a verified certificate.
pub fn cost_upper_bound(p: &Correlation, lambda: f64, s: &[f64], t: &[f64], psd_upper: u64) -> Result<u64> {
    check_certificate(p, lambda, s, t)?;
    let smallest = s.iter().chain(t).cloned().fold(f64::INFINITY, f64::min);
    // tolerate 1/w landing a hair above an integer
    let steps = ((1.0 / smallest) * (1.0 - 1e-12)).ceil() as u64;
    Ok(psd_upper * steps)
}

/// `(max{r_x/s_x, c_y/t_y} − λ) / (1 − λ)` at one feasible point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointLowerBound {
    pub value: f64,
    /// True unless the value is the trivial bound 1; the sound bound is the
    /// infimum over every feasible point, which a point cannot certify.
    pub heuristic: bool,
}

pub fn cost_lower_bound_at(p: &Correlation, lambda: f64, s: &[f64], t: &[f64]) -> Result<PointLowerBound> {
    check_certificate(p, lambda, s, t)?;
    let (rows, cols) = p.marginals();
    let ratio = rows
        .iter()
        .zip(s)
        .chain(cols.iter().zip(t))
        .map(|(m, w)| m / w)
        .fold(f64::NEG_INFINITY, f64::max);
    let value = (ratio - lambda) / (1.0 - lambda);
    Ok(PointLowerBound {
        value,
        heuristic: value > 1.0,
    })
}

fn check_am(m: usize, k: f64, eps: f64) -> Result<f64> {
    if m < 3 || !(k > 0.0 && k < 1.0) {
        return Err(Error::BadParameter(format!("need m >= 3 and 0 < k < 1, got m={m}, k={k}")));
    }
    let q = am_q(k);
    if !(eps > 0.0 && eps < q) {
        return Err(Error::BadParameter(format!("need 0 < eps < q = {q}, got {eps}")));
    }
    Ok(q)
}

/// Weight on the extra outcome in the explicit certificate at `λ = q − ε`.
pub fn am_certificate_eta(k: f64, eps: f64) -> f64 {
    let q = am_q(k);
    ((1.0 - q) / (2.0 * (q - eps))).min(eps * (1.0 + q) / (2.0 * q * (q - eps)))
}

/// `s = t = (η, (1−η)/m, …)`. Not clipped: for large `ε` the formula can
/// leave the simplex and callers must check the result.
pub fn am_certificate(m: usize, k: f64, eps: f64) -> Result<Vec<f64>> {
    check_am(m, k, eps)?;
    let eta = am_certificate_eta(k, eps);
    let mut w = vec![(1.0 - eta) / m as f64; m + 1];
    w[0] = eta;
    Ok(w)
}

/// Closed-form cost bounds for the extended polygon family at `λ = q − ε`.
pub fn am_cost_bounds(m: usize, k: f64, eps: f64) -> Result<CostBounds> {
    let q = check_am(m, k, eps)?;
    let ratio = 2.0 * q * (q - eps) / (eps * (1.0 + q));
    let upper = m as f64 * (ratio * (1.0 - 1e-12)).ceil();
    let lower = ((1.0 - q) / 2.0 * (2.0 * q * q / (eps * (1.0 + q))).sqrt() - q + eps) / (1.0 - q + eps);
    CostBounds::new(
        q - eps,
        Cost::Finite(lower),
        Cost::Finite(upper),
        "closed form, aggregated constraints",
        "closed form, explicit certificate",
        false,
    )
}

/// Exact cost for the polygon family: 2 up to `1 − √k`, unreachable after.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BmCost {
    Cost(u64),
    Unreachable,
}

pub fn bm_cost(m: usize, k: f64, lambda: f64) -> Result<BmCost> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::BadLambda(lambda));
    }
    let p = make_bm(m, k)?;
    let bound = threshold_upper_bound(&p);
    if lambda > bound + 1e-12 {
        return Ok(BmCost::Unreachable);
    }
    let f = explicit_bm_factorization(m, k)?;
    if verify_noisy_psd_factorization(&p, &f, lambda, 1e-9)?.passed {
        // a product seed only yields rank-one correlations, so 2 is tight
        Ok(BmCost::Cost(2))
    } else {
        Err(Error::InconsistentBounds(format!(
            "noise {lambda} is below the permutation bound {bound} but the factorization fails"
        )))
    }
}

impl BmCost {
    pub fn to_bounds(self, lambda: f64) -> CostBounds {
        match self {
            BmCost::Cost(c) => CostBounds {
                lambda,
                lower: Cost::Finite(c as f64),
                upper: Cost::Finite(c as f64),
                lower_source: "non-product correlation".into(),
                upper_source: "noisy rank-2 factorization".into(),
                heuristic_lower: false,
            },
            BmCost::Unreachable => CostBounds::unreachable(lambda, "permutation bound"),
        }
    }
}

fn ceil_log2(v: f64) -> u32 {
    if v <= 1.0 {
        0
    } else {
        // guard against 4.000000000001 → 3 bits
        (v * (1.0 - 1e-12)).log2().ceil() as u32
    }
}

/// `[R_lo / Q_hi, R_hi / Q_lo]` with `R = ⌈log₂ rank₊⌉` and `Q = ⌈log₂ cost⌉`.
/// For non-product `P` the cost is at least 2.
pub fn advantage_estimate(
    p: &Correlation,
    lambda: f64,
    rank_plus: &RankBounds,
    cost: &CostBounds,
) -> Result<AdvantageEstimate> {
    if rank_plus.lower > rank_plus.upper {
        return Err(Error::InconsistentBounds("rank lower exceeds upper".into()));
    }
    if !cost.lower.le(&cost.upper) {
        return Err(Error::InconsistentBounds("cost lower exceeds upper".into()));
    }
    let r_lower = ceil_log2(rank_plus.lower as f64);
    let r_upper = ceil_log2(rank_plus.upper as f64);
    let (Some(lo), Some(hi)) = (cost.lower.finite(), cost.upper.finite()) else {
        return Ok(AdvantageEstimate {
            lambda,
            r_lower,
            r_upper,
            q_cost_lower: None,
            q_cost_upper: None,
            s_lower: 0.0,
            s_upper: 0.0,
        });
    };
    let floor = if p.rank(1e-10) >= 2 { 2.0 } else { 1.0 };
    let q_lo = ceil_log2(lo.max(floor));
    let q_hi = ceil_log2(hi.max(floor)).max(q_lo);
    let ratio = |r: u32, q: u32| if r == 0 { 0.0 } else if q == 0 { f64::INFINITY } else { r as f64 / q as f64 };
    Ok(AdvantageEstimate {
        lambda,
        r_lower,
        r_upper,
        q_cost_lower: Some(q_lo),
        q_cost_upper: Some(q_hi),
        s_lower: ratio(r_lower, q_hi),
        s_upper: ratio(r_upper, q_lo),
    })
}
