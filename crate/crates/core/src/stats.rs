//! Statistical checks on simulated runs: Born-rule goodness of fit, Wilson
//! intervals for anomaly rates, conservation audits and two-sample
//! homogeneity between engines.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sensor::{ClickRecord, Stage};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959964;

/// Default significance threshold for equivalence and Born tests.
pub const DEFAULT_SIGNIFICANCE: f64 = 0.001;

// Lanczos approximation, g = 7, n = 9.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const GAMMA_EPS: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 10_000;

// P(a, x) by its power series; converges fast for x < a + 1.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut sum = 1.0 / a;
    let mut term = sum;
    let mut ap = a;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

// Q(a, x) by Lentz's continued fraction; used for x ≥ a + 1.
fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Upper regularized incomplete gamma function `Q(a, x) = Γ(a, x) / Γ(a)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "gamma_q needs a > 0");
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    }
}

/// Survival function of the chi-square distribution.
pub fn chi_square_sf(stat: f64, dof: u32) -> f64 {
    if stat.is_nan() {
        return f64::NAN;
    }
    gamma_q(dof as f64 / 2.0, stat / 2.0)
}

/// Two-sided normal quantile for a confidence level in (0, 1). The 95%
/// level maps to [`Z_95`] exactly.
pub fn z_for_confidence(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::domain(format!(
            "confidence {confidence} outside (0, 1)"
        )));
    }
    if confidence == 0.95 {
        return Ok(Z_95);
    }
    // P(|Z| > z) = P(χ²₁ > z²); solve by bisection.
    let target = 1.0 - confidence;
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi_square_sf(mid * mid, 1) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub chi2: f64,
    pub dof: u32,
    pub p_value: f64,
}

/// Pearson statistic of observed counts against expected counts, skipping
/// buckets where both are zero. An observation in a zero-expectation bucket
/// makes the statistic infinite.
fn pearson(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let o = o as f64;
            if e == 0.0 {
                if o == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (o - e) * (o - e) / e
            }
        })
        .sum()
}

/// One-degree-of-freedom goodness of fit of the (left, right) OD counts
/// against `(cos²θ, sin²θ)`.
pub fn born_rule_test(left: u64, right: u64, theta: f64) -> Result<ChiSquare> {
    let n = left + right;
    if n == 0 {
        return Err(Error::EmptyData(
            "Born-rule test needs at least one count".into(),
        ));
    }
    if !theta.is_finite() {
        return Err(Error::domain(format!("θ = {theta} is not finite")));
    }
    let p_left = theta.cos().powi(2);
    let expected = [n as f64 * p_left, n as f64 * (1.0 - p_left)];
    let chi2 = pearson(&[left, right], &expected);
    Ok(ChiSquare {
        chi2,
        dof: 1,
        p_value: chi_square_sf(chi2, 1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEstimate {
    pub hits: u64,
    pub trials: u64,
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Wilson score interval for `hits / trials` at normal quantile `z`.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> Result<RateEstimate> {
    if trials == 0 {
        return Err(Error::EmptyData("rate over zero trials".into()));
    }
    if hits > trials {
        return Err(Error::domain(format!("{hits} hits out of {trials} trials")));
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Ok(RateEstimate {
        hits,
        trials,
        rate: p,
        lower: (center - half).clamp(0.0, p),
        upper: (center + half).clamp(p, 1.0),
    })
}

/// 95% Wilson interval.
pub fn anomaly_rate(hits: u64, trials: u64) -> Result<RateEstimate> {
    wilson_interval(hits, trials, Z_95)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct AuditReport {
    pub stage: Option<Stage>,
    pub records: u64,
    /// Stage-1 records with zero or two OD clicks.
    pub forbidden: u64,
    /// Records whose TS clicks do not sum to one (TSs inserted).
    pub probability_violations: u64,
    pub pass: bool,
}

impl AuditReport {
    pub fn new() -> Self {
        AuditReport {
            pass: true,
            ..Default::default()
        }
    }

    pub fn observe(&mut self, r: &ClickRecord) -> Result<()> {
        match self.stage {
            None => self.stage = Some(r.stage),
            Some(s) if s != r.stage => {
                return Err(Error::domain(format!(
                    "audit stream mixes stage {s} and stage {}",
                    r.stage
                )))
            }
            _ => {}
        }
        self.records += 1;
        if r.stage == Stage::One && r.od_count() != Some(1) {
            self.forbidden += 1;
        }
        if r.ts_inserted && r.ts_count() != 1 {
            self.probability_violations += 1;
        }
        self.pass = self.forbidden == 0;
        Ok(())
    }

    /// Combine partial audits; order-independent.
    pub fn merge(self, other: AuditReport) -> Result<AuditReport> {
        let stage = match (self.stage, other.stage) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::domain(format!(
                    "cannot merge stage {a} and stage {b} audits"
                )))
            }
            (a, b) => a.or(b),
        };
        let forbidden = self.forbidden + other.forbidden;
        Ok(AuditReport {
            stage,
            records: self.records + other.records,
            forbidden,
            probability_violations: self.probability_violations + other.probability_violations,
            pass: forbidden == 0,
        })
    }
}

/// Count forbidden and probability-violating records in a single-stage
/// stream. Passes iff no forbidden record was seen.
pub fn conservation_audit<'a>(
    records: impl IntoIterator<Item = &'a ClickRecord>,
) -> Result<AuditReport> {
    let mut audit = AuditReport::new();
    for r in records {
        audit.observe(r)?;
    }
    Ok(audit)
}

/// Counts per bucket. Merging is commutative and associative.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(transparent)]
pub struct Histogram(BTreeMap<String, u64>);

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Histogram with the given buckets present at zero.
    pub fn with_buckets<I, S>(buckets: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Histogram(buckets.into_iter().map(|b| (b.into(), 0)).collect())
    }

    pub fn add(&mut self, bucket: &str, n: u64) {
        if let Some(c) = self.0.get_mut(bucket) {
            *c += n;
        } else {
            self.0.insert(bucket.to_string(), n);
        }
    }

    pub fn get(&self, bucket: &str) -> u64 {
        self.0.get(bucket).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn merge(mut self, other: &Histogram) -> Self {
        for (k, v) in &other.0 {
            self.add(k, *v);
        }
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn buckets(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<(S, u64)> for Histogram {
    fn from_iter<T: IntoIterator<Item = (S, u64)>>(iter: T) -> Self {
        let mut h = Histogram::new();
        for (k, v) in iter {
            h.add(&k.into(), v);
        }
        h
    }
}

/// Two-sample chi-square homogeneity test over identical bucket sets.
/// Buckets empty in both samples carry no information and are skipped.
pub fn engine_equivalence(a: &Histogram, b: &Histogram) -> Result<ChiSquare> {
    if !a.buckets().eq(b.buckets()) {
        return Err(Error::domain("histograms have different bucket sets"));
    }
    let (na, nb) = (a.total() as f64, b.total() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::EmptyData(
            "homogeneity test needs two non-empty samples".into(),
        ));
    }
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut chi2 = 0.0;
    let mut used = 0u32;
    for ((_, x), (_, y)) in a.iter().zip(b.iter()) {
        if x + y == 0 {
            continue;
        }
        used += 1;
        let d = ka * x as f64 - kb * y as f64;
        chi2 += d * d / (x + y) as f64;
    }
    let dof = used.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        chi_square_sf(chi2, dof)
    };
    Ok(ChiSquare { chi2, dof, p_value })
}
