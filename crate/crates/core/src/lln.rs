//! Binomial tail probabilities `P(|K/n - p| > delta)` for `K ~ Binomial(n, p)`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this trial count binomial coefficients come from a log-factorial table.
pub const EXACT_COEFFICIENT_LIMIT: u64 = 1000;

/// Up to this trial count terms are plain products, which keeps dyadic inputs exact.
const DIRECT_PRODUCT_LIMIT: u64 = 60;

/// Slack applied to the boundary `|k/n - p| = delta` so that rounding never lets a
/// boundary term into the strict tail.
const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlnQuery {
    pub n: u64,
    pub delta: f64,
    pub p: f64,
}

impl LlnQuery {
    pub fn new(n: u64, delta: f64, p: f64) -> Result<Self> {
        let q = Self { n, delta, p };
        q.validate()?;
        if delta <= 0.0 {
            return Err(Error::Domain(format!("delta must be positive, got {delta}")));
        }
        Ok(q)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Domain(format!("p = {} outside [0,1]", self.p)));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Domain(format!("delta = {} must be nonnegative", self.delta)));
        }
        Ok(())
    }
}

fn in_tail(k: u64, n: u64, p: f64, delta: f64) -> bool {
    let nf = n as f64;
    (k as f64 - nf * p).abs() > nf * delta + BOUNDARY_SLACK * nf.max(1.0)
}

fn binomial(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        x.to_f64().expect("fits in f64").ln()
    } else {
        let shift = bits - 64;
        let top = (x >> shift).to_f64().expect("64 bits");
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }
}

/// `P(|K/n - p| > delta)`.
pub fn lln_tail(q: &LlnQuery) -> Result<f64> {
    tail(q.n, q.delta, q.p)
}

/// Tail probability allowing `delta = 0` (the probability of any deviation at all).
pub(crate) fn tail(n: u64, delta: f64, p: f64) -> Result<f64> {
    LlnQuery { n, delta, p }.validate()?;
    if p == 0.0 || p == 1.0 {
        let k = if p == 0.0 { 0 } else { n };
        return Ok(if in_tail(k, n, p, delta) { 1.0 } else { 0.0 });
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let ks = (0..=n).filter(|&k| in_tail(k, n, p, delta));
    let mut sum = 0.0;
    if n <= DIRECT_PRODUCT_LIMIT {
        for k in ks {
            let c = binomial(n, k).to_f64().expect("small");
            sum += c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
        }
    } else if n <= EXACT_COEFFICIENT_LIMIT {
        for k in ks {
            let lc = ln_biguint(&binomial(n, k));
            sum += (lc + k as f64 * lp + (n - k) as f64 * lq).exp();
        }
    } else {
        let lf = ln_factorials(n);
        for k in ks {
            let lc = lf[n as usize] - lf[k as usize] - lf[(n - k) as usize];
            sum += (lc + k as f64 * lp + (n - k) as f64 * lq).exp();
        }
    }
    Ok(sum.clamp(0.0, 1.0))
}

fn ln_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// Exact rational tail probability.
pub fn lln_tail_exact(n: u64, delta: &BigRational, p: &BigRational) -> Result<BigRational> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if p.is_negative() || p > &BigRational::one() || delta.is_negative() {
        return Err(Error::Domain("need 0 <= p <= 1 and delta >= 0".into()));
    }
    let nr = BigRational::from_integer(BigInt::from(n));
    let one_minus = BigRational::one() - p;
    let mut sum = BigRational::zero();
    for k in 0..=n {
        let freq = BigRational::from_integer(BigInt::from(k)) / &nr;
        if (freq - p).abs() > *delta {
            let c = BigRational::from_integer(BigInt::from(binomial(n, k)));
            sum += c * pow(p, k) * pow(&one_minus, n - k);
        }
    }
    Ok(sum)
}

fn pow(x: &BigRational, e: u64) -> BigRational {
    num_traits::pow(x.clone(), e as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitScan {
    pub p: f64,
    pub delta: f64,
    pub ns: Vec<u64>,
    pub values: Vec<f64>,
    pub strictly_decreasing: bool,
    pub non_increasing: bool,
    pub final_is_min: bool,
    pub threshold: f64,
    pub converged: bool,
}

pub fn lln_limit_scan(p: f64, delta: f64, ns: &[u64], threshold: f64) -> Result<LimitScan> {
    if ns.is_empty() {
        return Err(Error::Domain("empty n sequence".into()));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("n sequence must be strictly increasing".into()));
    }
    let values = ns
        .iter()
        .map(|&n| lln_tail(&LlnQuery::new(n, delta, p)?))
        .collect::<Result<Vec<f64>>>()?;
    let last = *values.last().unwrap();
    Ok(LimitScan {
        p,
        delta,
        ns: ns.to_vec(),
        strictly_decreasing: values.windows(2).all(|w| w[1] < w[0]),
        non_increasing: values.windows(2).all(|w| w[1] <= w[0]),
        final_is_min: values.iter().all(|&v| last <= v),
        threshold,
        converged: last < threshold,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub outcome: usize,
    pub count: u64,
    pub frequency: f64,
    pub weight: f64,
    pub deviation: f64,
    /// Probability of a strictly larger deviation than the one observed.
    pub surprise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyAudit {
    pub n: u64,
    pub rows: Vec<AuditRow>,
}

pub fn frequency_audit(outcomes: &[usize], weights: &[f64]) -> Result<FrequencyAudit> {
    if outcomes.is_empty() {
        return Err(Error::Domain("no outcomes to audit".into()));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(0.0..=1.0 + 1e-12).contains(w)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain("weights must form a probability table".into()));
    }
    let mut counts = vec![0u64; weights.len()];
    for &o in outcomes {
        *counts
            .get_mut(o)
            .ok_or(Error::Index { index: o, len: weights.len() })? += 1;
    }
    let n = outcomes.len() as u64;
    let rows = counts
        .iter()
        .zip(weights)
        .enumerate()
        .map(|(outcome, (&count, &weight))| {
            let weight = weight.clamp(0.0, 1.0);
            let frequency = count as f64 / n as f64;
            let deviation = (frequency - weight).abs();
            Ok(AuditRow {
                outcome,
                count,
                frequency,
                weight,
                deviation,
                surprise: tail(n, deviation, weight)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(FrequencyAudit { n, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn ten_fair_trials() {
        let v = lln_tail(&LlnQuery::new(10, 0.2, 0.5).unwrap()).unwrap();
        assert_eq!(v, 0.109375);
        assert_eq!(lln_tail_exact(10, &q(1, 5), &q(1, 2)).unwrap(), q(112, 1024));
    }

    #[test]
    fn impossible_deviations() {
        assert_eq!(lln_tail(&LlnQuery::new(50, 0.7, 0.3).unwrap()).unwrap(), 0.0);
        assert_eq!(lln_tail(&LlnQuery::new(50, 0.01, 0.0).unwrap()).unwrap(), 0.0);
        assert!(LlnQuery::new(5, 0.0, 0.5).is_err());
        assert!(LlnQuery::new(0, 0.1, 0.5).is_err());
    }

    #[test]
    fn sequence_enumeration_oracle() {
        for n in 1..=14u64 {
            for &(p, delta) in &[(0.5, 0.1), (0.3, 0.15), (0.9, 0.05)] {
                let mut counts = vec![0u64; n as usize + 1];
                for seq in 0u32..(1 << n) {
                    counts[seq.count_ones() as usize] += 1;
                }
                let brute: f64 = (0..=n)
                    .filter(|&k| (k as f64 / n as f64 - p).abs() > delta + 1e-12)
                    .map(|k| counts[k as usize] as f64 * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32))
                    .sum();
                let v = lln_tail(&LlnQuery::new(n, delta, p).unwrap()).unwrap();
                assert!((v - brute).abs() < 1e-14, "n={n} p={p}: {v} vs {brute}");
            }
        }
    }

    #[test]
    fn large_n_paths_match_exact() {
        for n in [200u64, 1000, 1001, 1500] {
            let v = lln_tail(&LlnQuery::new(n, 0.05, 0.5).unwrap()).unwrap();
            let exact = lln_tail_exact(n, &q(1, 20), &q(1, 2)).unwrap().to_f64().unwrap();
            assert!(((v - exact) / exact).abs() < 1e-9, "n={n}: {v} vs {exact}");
        }
        let big = lln_tail(&LlnQuery::new(10_000, 0.1, 0.5).unwrap()).unwrap();
        assert!(big > 0.0 && big < 1e-80);
    }

    #[test]
    fn limit_scan_decreases() {
        let s = lln_limit_scan(0.5, 0.1, &[10, 100, 1000], 0.01).unwrap();
        assert!(s.values.iter().all(|&v| v > 0.0));
        assert!(s.strictly_decreasing && s.final_is_min && s.converged);
        let single = lln_limit_scan(0.5, 0.1, &[10], 0.01).unwrap();
        assert!(!single.converged && single.final_is_min);
        let wide = lln_limit_scan(0.5, 0.6, &[10, 20], 0.01).unwrap();
        assert!(wide.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn audits() {
        let a = frequency_audit(&[0; 20], &[1.0]).unwrap();
        assert_eq!(a.rows[0].deviation, 0.0);
        assert_eq!(a.rows[0].surprise, 0.0);
        let a = frequency_audit(&[1; 100], &[0.5, 0.5]).unwrap();
        assert!(a.rows[1].surprise < 1e-20);
        assert!(matches!(frequency_audit(&[2], &[0.5, 0.5]), Err(Error::Index { .. })));
    }
}
