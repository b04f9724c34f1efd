//! Integrability exponents `(p_k, q_k)` for `k = m, m+1`, the floor `B`,
//! and the weak-Schatten exponent `n(g)` they determine.

use serde::{Deserialize, Serialize};

use super::field::DEFAULT_FLOOR;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentLedger {
    pub n: usize,
    pub p_m: f64,
    pub q_m: f64,
    pub p_m_plus: f64,
    pub q_m_plus: f64,
    /// `(p_{m-1}, q_{m-1})` where a construction supplies them (even `n`).
    pub below: Option<(f64, f64)>,
    pub floor: f64,
    pub n_g: f64,
}

fn check_pair(label: &str, p: f64, q: f64) -> Result<()> {
    if !(1.0..=2.0).contains(&q) || !(p >= 2.0) {
        return Err(Error::Inadmissible(format!(
            "{label}: need 1 ≤ q ≤ 2 ≤ p, got p = {p}, q = {q}"
        )));
    }
    Ok(())
}

/// `1/p_m + 1/n − 1/q_{m+1}`; the ledger is admissible iff this is positive.
pub fn admissibility_margin(n: usize, p_m: f64, q_m_plus: f64) -> f64 {
    1.0 / p_m + 1.0 / n as f64 - 1.0 / q_m_plus
}

/// `n(g) = n p_m q_{m+1} / (p_m q_{m+1} − n (p_m − q_{m+1}))`.
pub fn n_of_g_values(n: usize, p_m: f64, q_m_plus: f64) -> Result<f64> {
    let nf = n as f64;
    let denom = p_m * q_m_plus - nf * (p_m - q_m_plus);
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::Inadmissible(format!(
            "n(g) denominator p_m q_(m+1) - n (p_m - q_(m+1)) = {denom} is not positive"
        )));
    }
    Ok(nf * p_m * q_m_plus / denom)
}

impl ExponentLedger {
    pub fn new(
        n: usize,
        p_m: f64,
        q_m: f64,
        p_m_plus: f64,
        q_m_plus: f64,
        floor: f64,
    ) -> Result<Self> {
        check_pair("degree m", p_m, q_m)?;
        check_pair("degree m+1", p_m_plus, q_m_plus)?;
        if !(floor > 1.0) {
            return Err(Error::Inadmissible(format!(
                "floor B = {floor} must exceed 1"
            )));
        }
        let margin = admissibility_margin(n, p_m, q_m_plus);
        if !(margin > 0.0) {
            return Err(Error::Inadmissible(format!(
                "1/p_m + 1/n > 1/q_(m+1) violated: {} + {} ≤ {}",
                1.0 / p_m,
                1.0 / n as f64,
                1.0 / q_m_plus
            )));
        }
        let n_g = n_of_g_values(n, p_m, q_m_plus)?;
        Ok(Self {
            n,
            p_m,
            q_m,
            p_m_plus,
            q_m_plus,
            below: None,
            floor,
            n_g,
        })
    }

    /// The smooth reference structure: every exponent equals 2.
    pub fn flat(n: usize) -> Self {
        Self::new(n, 2.0, 2.0, 2.0, 2.0, DEFAULT_FLOOR).expect("flat ledger is admissible")
    }

    pub fn with_below(mut self, p: f64, q: f64) -> Self {
        self.below = Some((p, q));
        self
    }

    pub fn margin(&self) -> f64 {
        admissibility_margin(self.n, self.p_m, self.q_m_plus)
    }

    /// Largest weak-Schatten slope compatible with `L^{n(g)+}` membership.
    pub fn predicted_slope(&self) -> f64 {
        -1.0 / self.n_g
    }
}

pub fn n_of_g(ledger: &ExponentLedger) -> Result<f64> {
    n_of_g_values(ledger.n, ledger.p_m, ledger.q_m_plus)
}

/// Exponents of the specific metric of a quasi-conformal atlas whose chart
/// derivatives lie in `L^p`, `p > n`.
pub fn exponents_quasiconformal(n: usize, p: f64) -> Result<ExponentLedger> {
    if n == 0 || !(p > n as f64) {
        return Err(Error::Inadmissible(format!(
            "quasi-conformal exponent needs p > n: {p} ≤ {n}"
        )));
    }
    if n % 2 == 1 {
        let p_m = 2.0 * p / (p - 1.0);
        let q_m_plus = 2.0 * p / (p + 1.0);
        ExponentLedger::new(n, p_m, 2.0, 2.0, q_m_plus, DEFAULT_FLOOR)
    } else {
        let q_m_plus = 2.0 * p / (p + 2.0);
        Ok(
            ExponentLedger::new(n, 2.0, 2.0, 2.0, q_m_plus, DEFAULT_FLOOR)?
                .with_below(2.0 * p / (p - 2.0), 2.0),
        )
    }
}

/// Threshold `n(n+1)/2` above which `L^p`-derivable atlases are admissible.
pub fn lp_threshold(n: usize) -> f64 {
    (n * (n + 1)) as f64 / 2.0
}

/// Exponents `p_k = 2p/(p+k−n)`, `q_k = 2p/(p+k)` of an atlas whose chart
/// derivatives lie in `L^p`.
pub fn exponents_lp_derivable(n: usize, p: f64) -> Result<ExponentLedger> {
    let threshold = lp_threshold(n);
    if !(p > threshold) {
        return Err(Error::Inadmissible(format!(
            "p > n(n+1)/2 violated: {p} ≤ {threshold}"
        )));
    }
    let m = n / 2;
    let pk = |k: usize| 2.0 * p / (p + (k as f64 - n as f64));
    let qk = |k: usize| 2.0 * p / (p + k as f64);
    let ledger = ExponentLedger::new(n, pk(m), qk(m), pk(m + 1), qk(m + 1), DEFAULT_FLOOR)?;
    Ok(if n % 2 == 0 && m >= 1 {
        ledger.with_below(pk(m - 1), qk(m - 1))
    } else {
        ledger
    })
}

/// Reciprocal-affine path `1/p(t) = t/p⁰ + (1−t)/p¹` (same for `q`), taken
/// verbatim: `t = 0` reproduces `l1` and `t = 1` reproduces `l0`.
pub fn interpolate_exponents(
    l0: &ExponentLedger,
    l1: &ExponentLedger,
    t: f64,
) -> Result<ExponentLedger> {
    if l0.n != l1.n {
        return Err(Error::Invalid("ledgers of different dimensions".into()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Invalid(format!(
            "interpolation parameter {t} outside [0, 1]"
        )));
    }
    let mix = |a: f64, b: f64| {
        if t == 1.0 {
            a
        } else if t == 0.0 {
            b
        } else {
            1.0 / (t / a + (1.0 - t) / b)
        }
    };
    let mut out = ExponentLedger::new(
        l0.n,
        mix(l0.p_m, l1.p_m),
        mix(l0.q_m, l1.q_m),
        mix(l0.p_m_plus, l1.p_m_plus),
        mix(l0.q_m_plus, l1.q_m_plus),
        l0.floor.min(l1.floor),
    )?;
    if let (Some(a), Some(b)) = (l0.below, l1.below) {
        out.below = Some((mix(a.0, b.0), mix(a.1, b.1)));
    }
    Ok(out)
}
