//! Distribution fitting: discrete power laws, Weibull, Pearson correlation
//! and empirical (C)CDFs.
//!
//! Power-law exponents are reported in the `P(k) ∝ k^-alpha` convention.
//! Two estimators are offered. `LoglogLs` regresses log frequency on log
//! value over base-2 bins, which is what produces the R² figures usually
//! quoted alongside such fits. `MleDiscrete` maximizes the likelihood of a
//! discrete power law on `[x_min, x_max]`; `x_max` defaults to the largest
//! observation, which keeps exponents below 1 well defined.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

pub const MIN_POWER_LAW_SAMPLES: usize = 10;
pub const MIN_WEIBULL_SAMPLES: usize = 10;

/// Terms summed directly before switching to Euler-Maclaurin.
const EXPLICIT_TERMS: u64 = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("insufficient data: need at least {needed} usable samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate support: samples take a single distinct value")]
    DegenerateSupport,
    #[error("non-positive sample {0}")]
    NonPositiveSample(f64),
    #[error("samples have zero spread; the shape equation has no root")]
    NonPositiveVariance,
    #[error("fitted exponent is not positive; the data does not decay")]
    NonDecaying,
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("a series has zero variance")]
    ZeroVariance,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PowerLawMethod {
    LoglogLs,
    #[default]
    MleDiscrete,
}

impl std::str::FromStr for PowerLawMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "loglog_ls" | "loglog" => Ok(Self::LoglogLs),
            "mle_discrete" | "mle" => Ok(Self::MleDiscrete),
            _ => Err(format!("unknown fit method `{s}` (expected loglog_ls or mle_discrete)")),
        }
    }
}

impl PowerLawMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LoglogLs => "loglog_ls",
            Self::MleDiscrete => "mle_discrete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    /// R² of the log-log regression; `None` when fewer than two bins are populated.
    pub r_squared: Option<f64>,
    pub method: PowerLawMethod,
    pub x_min: u64,
    pub x_max: u64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeibullFit {
    pub shape: f64,
    pub scale: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub coefficient: f64,
    pub n: usize,
}

/// Serialized form shared by every fitted model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub name: String,
    pub model: &'static str,
    pub params: BTreeMap<&'static str, f64>,
    pub gof: Option<f64>,
    pub n: usize,
    pub method: &'static str,
}

impl PowerLawFit {
    pub fn record(&self, name: &str) -> FitRecord {
        FitRecord {
            name: name.to_string(),
            model: "power_law",
            params: BTreeMap::from([
                ("alpha", self.alpha),
                ("x_min", self.x_min as f64),
                ("x_max", self.x_max as f64),
            ]),
            gof: self.r_squared,
            n: self.n,
            method: self.method.as_str(),
        }
    }
}

impl WeibullFit {
    pub fn record(&self, name: &str) -> FitRecord {
        FitRecord {
            name: name.to_string(),
            model: "weibull",
            params: BTreeMap::from([("shape", self.shape), ("scale", self.scale)]),
            gof: Some(self.log_likelihood),
            n: self.n,
            method: "mle",
        }
    }
}

// ---------------------------------------------------------------------------
// power-law sums
// ---------------------------------------------------------------------------

/// `(Σ w_k, Σ w_k ln k, Σ w_k ln² k)` with `w_k = (k / a)^-alpha` over
/// `k ∈ [a, b]`; `b = None` sums to infinity and requires `alpha > 1`.
/// The `a^alpha` scaling keeps the leading term at 1.
#[derive(Debug, Clone, Copy)]
struct PowerSums {
    z: f64,
    zl: f64,
    zl2: f64,
}

fn power_sums(alpha: f64, a: u64, b: Option<u64>) -> PowerSums {
    let ln_a = (a as f64).ln();
    let direct_end = match b {
        Some(b) if b - a < EXPLICIT_TERMS => b,
        _ => a + EXPLICIT_TERMS - 1,
    };
    let mut s = PowerSums {
        z: 0.0,
        zl: 0.0,
        zl2: 0.0,
    };
    for k in a..=direct_end {
        let lk = (k as f64).ln();
        let w = (-alpha * (lk - ln_a)).exp();
        s.z += w;
        s.zl += w * lk;
        s.zl2 += w * lk * lk;
    }
    if b == Some(direct_end) {
        return s;
    }
    let tail = em_tail(alpha, ln_a, direct_end + 1, b);
    s.z += tail.z;
    s.zl += tail.zl;
    s.zl2 += tail.zl2;
    s
}

/// Euler-Maclaurin estimate of the scaled sums over `[m, b]`.
fn em_tail(alpha: f64, ln_a: f64, m: u64, b: Option<u64>) -> PowerSums {
    let s = 1.0 - alpha;
    let lm = (m as f64).ln();
    let base = (lm - alpha * (lm - ln_a)).exp();

    // ∫ t^p e^{s t} dt over [ln m, ln b] written as base * (moment in τ = t - ln m)
    let (e0, e1, e2) = match b {
        None => {
            let r = -s; // > 0
            (1.0 / r, 1.0 / (r * r), 2.0 / (r * r * r))
        }
        Some(b) => exp_moments(s, (b as f64).ln() - lm),
    };
    let int_f = base * e0;
    let int_g = base * (lm * e0 + e1);
    let int_h = base * (lm * lm * e0 + 2.0 * lm * e1 + e2);

    // endpoint corrections: f(x) = x^-α, g = f ln x, h = f ln² x
    let corr = |x: f64| -> [f64; 3] {
        let lx = x.ln();
        let w = (-alpha * (lx - ln_a)).exp();
        let (a1, a2, a3) = (alpha, alpha + 1.0, alpha + 2.0);
        // value, first derivative and third derivative of each function
        let f = [w, -a1 * w / x, -a1 * a2 * a3 * w / (x * x * x)];
        let g = [
            w * lx,
            w / x * (1.0 - a1 * lx),
            w / (x * x * x) * (a1 * a2 + a3 * (2.0 * a1 + 1.0) - a1 * a2 * a3 * lx),
        ];
        // h''' is dominated by the same x^-α-3 scale; keep the first-order term
        let h = [
            w * lx * lx,
            w / x * (2.0 * lx - a1 * lx * lx),
            0.0,
        ];
        let em = |v: [f64; 3]| v[0] / 2.0 - v[1] / 12.0 + v[2] / 720.0;
        [em(f), em(g), em(h)]
    };
    let lo = corr(m as f64);
    let mut out = PowerSums {
        z: int_f + lo[0],
        zl: int_g + lo[1],
        zl2: int_h + lo[2],
    };
    if let Some(b) = b {
        // upper endpoint enters with opposite derivative signs
        let x = b as f64;
        let lx = x.ln();
        let w = (-alpha * (lx - ln_a)).exp();
        let (a1, a2, a3) = (alpha, alpha + 1.0, alpha + 2.0);
        let x3 = x * x * x;
        out.z += w / 2.0 + (-a1 * w / x) / 12.0 - (-a1 * a2 * a3 * w / x3) / 720.0;
        out.zl += w * lx / 2.0 + (w / x * (1.0 - a1 * lx)) / 12.0
            - (w / x3 * (a1 * a2 + a3 * (2.0 * a1 + 1.0) - a1 * a2 * a3 * lx)) / 720.0;
        out.zl2 += w * lx * lx / 2.0 + (w / x * (2.0 * lx - a1 * lx * lx)) / 12.0;
    }
    out
}

/// `∫_0^L τ^p e^{s τ} dτ` for p = 0, 1, 2, stable as `s -> 0`.
fn exp_moments(s: f64, len: f64) -> (f64, f64, f64) {
    let u = s * len;
    if u.abs() < 1.0 {
        // series: L^{p+1} Σ u^j / (j! (j + p + 1))
        let (mut t0, mut t1, mut t2) = (0.0, 0.0, 0.0);
        let mut term = 1.0;
        for j in 0..60 {
            let jf = j as f64;
            t0 += term / (jf + 1.0);
            t1 += term / (jf + 2.0);
            t2 += term / (jf + 3.0);
            term *= u / (jf + 1.0);
            if term.abs() < 1e-18 {
                break;
            }
        }
        (len * t0, len * len * t1, len * len * len * t2)
    } else {
        let e = (u).exp();
        let m0 = (u).exp_m1() / s;
        let m1 = (len * e - m0) / s;
        let m2 = (len * len * e - 2.0 * m1) / s;
        (m0, m1, m2)
    }
}

/// `Σ_{k >= x} k^-alpha / Σ_{k >= x_min} k^-alpha`, the upper tail of an
/// untruncated discrete power law. Requires `alpha > 1`.
pub fn power_law_tail(alpha: f64, x_min: u64, x: u64) -> f64 {
    debug_assert!(alpha > 1.0 && x >= x_min && x_min >= 1);
    let num = power_sums(alpha, x, None).z;
    let den = power_sums(alpha, x_min, None).z;
    // both sums are scaled by their own first term
    num / den * (-alpha * ((x as f64).ln() - (x_min as f64).ln())).exp()
}

/// Same tail for the law truncated to `[x_min, x_max]`.
pub fn truncated_power_law_tail(alpha: f64, x_min: u64, x_max: u64, x: u64) -> f64 {
    if x > x_max {
        return 0.0;
    }
    let num = power_sums(alpha, x, Some(x_max)).z;
    let den = power_sums(alpha, x_min, Some(x_max)).z;
    num / den * (-alpha * ((x as f64).ln() - (x_min as f64).ln())).exp()
}

// ---------------------------------------------------------------------------
// power-law fitting
// ---------------------------------------------------------------------------

struct Ols {
    slope: f64,
    r_squared: f64,
}

fn ols(xs: &[f64], ys: &[f64]) -> Option<Ols> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Some(Ols { slope, r_squared })
}

/// Base-2 bins `[x_min·2^i, x_min·2^{i+1})`: returns `(ln centre, ln density)`
/// for every populated bin.
fn log_binned_density(values: &[u64], x_min: u64) -> (Vec<f64>, Vec<f64>) {
    let n = values.len() as f64;
    let top = values.iter().copied().max().unwrap_or(x_min) as f64;
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for &v in values {
        let bin = (v / x_min).ilog2();
        *counts.entry(bin).or_insert(0) += 1;
    }
    let mut xs = Vec::with_capacity(counts.len());
    let mut ys = Vec::with_capacity(counts.len());
    for (bin, c) in counts {
        let lo = (x_min as f64) * 2f64.powi(bin as i32);
        // the last bin ends just past the largest observation
        let hi_excl = (lo * 2.0).min(top + 1.0);
        let width = hi_excl - lo;
        let centre = (lo * (hi_excl - 1.0)).sqrt();
        xs.push(centre.ln());
        ys.push((c as f64 / (n * width)).ln());
    }
    (xs, ys)
}

fn loglog_fit(values: &[u64], x_min: u64) -> Option<Ols> {
    let (xs, ys) = log_binned_density(values, x_min);
    ols(&xs, &ys)
}

/// Fit with `x_max` taken as the largest observation.
pub fn fit_power_law(
    samples: &[u64],
    method: PowerLawMethod,
    x_min: u64,
) -> Result<PowerLawFit, FitError> {
    fit_power_law_bounded(samples, method, x_min, None)
}

pub fn fit_power_law_bounded(
    samples: &[u64],
    method: PowerLawMethod,
    x_min: u64,
    x_max: Option<u64>,
) -> Result<PowerLawFit, FitError> {
    if x_min == 0 {
        return Err(FitError::InvalidArgument("x_min must be at least 1"));
    }
    let values: Vec<u64> = samples
        .iter()
        .copied()
        .filter(|&v| v >= x_min && x_max.is_none_or(|m| v <= m))
        .collect();
    if values.len() < MIN_POWER_LAW_SAMPLES {
        return Err(FitError::InsufficientData {
            needed: MIN_POWER_LAW_SAMPLES,
            got: values.len(),
        });
    }
    let lo = *values.iter().min().unwrap();
    let hi = *values.iter().max().unwrap();
    if lo == hi {
        return Err(FitError::DegenerateSupport);
    }
    let upper = x_max.unwrap_or(hi);
    let regression = loglog_fit(&values, x_min);
    let alpha = match method {
        PowerLawMethod::LoglogLs => {
            let reg = regression.as_ref().ok_or(FitError::DegenerateSupport)?;
            -reg.slope
        }
        PowerLawMethod::MleDiscrete => discrete_mle(&values, x_min, upper)?,
    };
    if !(alpha > 0.0) {
        return Err(FitError::NonDecaying);
    }
    Ok(PowerLawFit {
        alpha,
        r_squared: regression.map(|r| r.r_squared),
        method,
        x_min,
        x_max: upper,
        n: values.len(),
    })
}

/// Root of the score equation `E_alpha[ln K] = mean(ln x)` by bisection.
/// The expectation is strictly decreasing in alpha, so the root is unique.
fn discrete_mle(values: &[u64], x_min: u64, x_max: u64) -> Result<f64, FitError> {
    let mean_ln = values.iter().map(|&v| (v as f64).ln()).sum::<f64>() / values.len() as f64;
    let score = |alpha: f64| {
        let s = power_sums(alpha, x_min, Some(x_max));
        s.zl / s.z - mean_ln
    };
    let mut lo = 1e-9;
    if score(lo) <= 0.0 {
        return Err(FitError::NonDecaying);
    }
    let mut hi = 8.0;
    while score(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1024.0 {
            return Err(FitError::DegenerateSupport);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Log-likelihood of a discrete power law on `[x_min, x_max]`.
pub fn power_law_log_likelihood(values: &[u64], alpha: f64, x_min: u64, x_max: u64) -> f64 {
    let s = power_sums(alpha, x_min, Some(x_max));
    let ln_z = s.z.ln() - alpha * (x_min as f64).ln();
    values
        .iter()
        .map(|&v| -alpha * (v as f64).ln() - ln_z)
        .sum()
}

// ---------------------------------------------------------------------------
// Weibull
// ---------------------------------------------------------------------------

/// `f(x) = (β/λ)(x/λ)^{β-1} exp(-(x/λ)^β)`, summed over `samples`.
pub fn weibull_log_likelihood(samples: &[f64], shape: f64, scale: f64) -> f64 {
    let n = samples.len() as f64;
    let mut sum_ln = 0.0;
    let mut sum_pow = 0.0;
    for &x in samples {
        let l = (x / scale).ln();
        sum_ln += l;
        sum_pow += (shape * l).exp();
    }
    n * (shape.ln() - scale.ln()) + (shape - 1.0) * sum_ln - sum_pow
}

/// Maximum-likelihood Weibull fit. The shape solves the profile equation
/// `1/β = Σ x^β ln x / Σ x^β - mean(ln x)` by safeguarded Newton iteration
/// (relative tolerance 1e-8); the scale then follows in closed form.
pub fn fit_weibull(samples: &[f64]) -> Result<WeibullFit, FitError> {
    if let Some(&bad) = samples.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
        return Err(FitError::NonPositiveSample(bad));
    }
    if samples.len() < MIN_WEIBULL_SAMPLES {
        return Err(FitError::InsufficientData {
            needed: MIN_WEIBULL_SAMPLES,
            got: samples.len(),
        });
    }
    if samples.iter().all(|&x| x == samples[0]) {
        return Err(FitError::NonPositiveVariance);
    }
    let n = samples.len() as f64;
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let mean = logs.iter().sum::<f64>() / n;
    // centred so that the profile equation is shift free
    let ys: Vec<f64> = logs.iter().map(|l| l - mean).collect();
    let y_max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let var = ys.iter().map(|y| y * y).sum::<f64>() / n;
    if !(var > 0.0) || y_max <= 0.0 {
        return Err(FitError::NonPositiveVariance);
    }

    // returns (f, f') with f(β) = 1/β - Σ w y / Σ w, w = e^{β (y - y_max)}
    let profile = |beta: f64| {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &y in &ys {
            let w = (beta * (y - y_max)).exp();
            s0 += w;
            s1 += w * y;
            s2 += w * y * y;
        }
        let m1 = s1 / s0;
        let m2 = s2 / s0;
        (1.0 / beta - m1, -1.0 / (beta * beta) - (m2 - m1 * m1))
    };

    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    // moment estimate: sd of ln x is π / (β √6) for a Weibull
    let mut beta = std::f64::consts::PI / (var.sqrt() * 6f64.sqrt());
    let mut iterations = 0;
    loop {
        iterations += 1;
        let (f, df) = profile(beta);
        if f > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let mut next = beta - f / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { beta * 2.0 };
        }
        let step = (next - beta).abs();
        beta = next;
        if step <= 1e-8 * beta || iterations >= 500 {
            break;
        }
    }
    // a last Newton step once inside the quadratic basin
    let (f, df) = profile(beta);
    beta -= f / df;

    let mut s0 = 0.0;
    for &y in &ys {
        s0 += (beta * (y - y_max)).exp();
    }
    let ln_mean_pow = beta * (mean + y_max) + (s0 / n).ln();
    let scale = (ln_mean_pow / beta).exp();
    Ok(WeibullFit {
        shape: beta,
        scale,
        log_likelihood: weibull_log_likelihood(samples, beta, scale),
        iterations,
        n: samples.len(),
    })
}

// ---------------------------------------------------------------------------
// correlation and empirical distributions
// ---------------------------------------------------------------------------

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult, FitError> {
    if xs.len() != ys.len() {
        return Err(FitError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(FitError::InsufficientData {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(FitError::ZeroVariance);
    }
    Ok(CorrelationResult {
        coefficient: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0),
        n: xs.len(),
    })
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `(v, P(X >= v))` for each distinct value, ascending.
pub fn ccdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let v = sorted(samples);
    let n = v.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let x = v[i];
        out.push((x, (v.len() - i) as f64 / n));
        while i < v.len() && v[i] == x {
            i += 1;
        }
    }
    out
}

/// `(v, P(X <= v))` for each distinct value, ascending.
pub fn ecdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let v = sorted(samples);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = (i + 1) as f64 / n,
            _ => out.push((x, (i + 1) as f64 / n)),
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Devroye's rejection sampler for the zeta distribution, kept
    /// independent of the generator's inverse-transform sampler.
    pub(crate) fn zeta_sample(rng: &mut impl Rng, alpha: f64) -> u64 {
        let b = 2f64.powf(alpha - 1.0);
        loop {
            let u: f64 = 1.0 - rng.random::<f64>();
            let v: f64 = rng.random();
            let x = u.powf(-1.0 / (alpha - 1.0)).floor();
            if !(x < 1e15) {
                continue;
            }
            let t = (1.0 + 1.0 / x).powf(alpha - 1.0);
            if v * x * (t - 1.0) / (b - 1.0) <= t / b {
                return x as u64;
            }
        }
    }

    fn brute_sums(alpha: f64, a: u64, b: u64) -> (f64, f64, f64) {
        let (mut z, mut zl, mut zl2) = (0.0, 0.0, 0.0);
        for k in a..=b {
            let lk = (k as f64).ln();
            let w = (-alpha * (lk - (a as f64).ln())).exp();
            z += w;
            zl += w * lk;
            zl2 += w * lk * lk;
        }
        (z, zl, zl2)
    }

    #[test]
    fn euler_maclaurin_matches_direct_sums() {
        for &alpha in &[0.3, 0.7, 0.999_999_9, 1.0, 1.5, 2.1, 3.0] {
            for &(a, b) in &[(1u64, 150_000u64), (3, 60_000), (1, 20_000)] {
                let s = power_sums(alpha, a, Some(b));
                let (z, zl, zl2) = brute_sums(alpha, a, b);
                assert!((s.z - z).abs() <= 1e-10 * z, "z alpha={alpha} a={a} b={b}");
                assert!((s.zl - zl).abs() <= 1e-10 * zl.abs().max(1.0), "zl alpha={alpha}");
                assert!((s.zl2 - zl2).abs() <= 1e-9 * zl2.abs().max(1.0), "zl2 alpha={alpha}");
            }
        }
    }

    #[test]
    fn infinite_tail_matches_zeta() {
        // ζ(2) = π²/6, ζ(3) = 1.2020569031595942
        let z2 = power_sums(2.0, 1, None).z;
        assert!((z2 - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
        assert!((power_sums(3.0, 1, None).z - 1.202_056_903_159_594_2).abs() < 1e-12);
        // P(X >= 2) under ζ(2) = 1 - 6/π²
        let t = power_law_tail(2.0, 1, 2);
        assert!((t - (1.0 - 6.0 / std::f64::consts::PI.powi(2))).abs() < 1e-12);
        let tt = truncated_power_law_tail(1.0, 1, 3, 2);
        assert!((tt - (0.5 + 1.0 / 3.0) / (1.0 + 0.5 + 1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn mle_recovers_zeta_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<u64> = (0..100_000).map(|_| zeta_sample(&mut rng, 2.5)).collect();
        let fit = fit_power_law(&xs, PowerLawMethod::MleDiscrete, 1).unwrap();
        assert!((2.45..=2.55).contains(&fit.alpha), "alpha {}", fit.alpha);
        assert!(fit.r_squared.unwrap() > 0.9);
    }

    #[test]
    fn mle_is_a_likelihood_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<u64> = (0..5_000).map(|_| zeta_sample(&mut rng, 2.2)).collect();
        let fit = fit_power_law(&xs, PowerLawMethod::MleDiscrete, 1).unwrap();
        let ll = |a| power_law_log_likelihood(&xs, a, 1, fit.x_max);
        assert!(ll(fit.alpha) >= ll(fit.alpha + 1e-4));
        assert!(ll(fit.alpha) >= ll(fit.alpha - 1e-4));
    }

    #[test]
    fn power_law_errors() {
        assert_eq!(
            fit_power_law(&[4; 50], PowerLawMethod::MleDiscrete, 1),
            Err(FitError::DegenerateSupport)
        );
        assert!(matches!(
            fit_power_law(&[1, 2, 3], PowerLawMethod::LoglogLs, 1),
            Err(FitError::InsufficientData { got: 3, .. })
        ));
        // values below x_min are not usable
        let xs: Vec<u64> = (1..=20).collect();
        assert!(matches!(
            fit_power_law(&xs, PowerLawMethod::MleDiscrete, 15),
            Err(FitError::InsufficientData { got: 6, .. })
        ));
    }

    #[test]
    fn geometric_tail_fits_worse_in_log_log() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pl: Vec<u64> = (0..20_000).map(|_| zeta_sample(&mut rng, 2.2)).collect();
        let geo: Vec<u64> = (0..20_000)
            .map(|_| {
                let u: f64 = 1.0 - rng.random::<f64>();
                1 + (u.ln() / (0.9f64).ln()).floor() as u64
            })
            .collect();
        let r_pl = fit_power_law(&pl, PowerLawMethod::LoglogLs, 1).unwrap().r_squared.unwrap();
        let r_geo = fit_power_law(&geo, PowerLawMethod::LoglogLs, 1).unwrap().r_squared.unwrap();
        assert!(r_pl > 0.95, "{r_pl}");
        assert!(r_geo < r_pl - 0.05, "{r_geo} vs {r_pl}");
    }

    #[test]
    fn loglog_slope_on_exact_density() {
        // counts proportional to k^-2 on 1..=1024 give a clean binned slope
        let mut xs = Vec::new();
        for k in 1u64..=1024 {
            let c = (1e7 / (k * k) as f64).round() as usize;
            xs.extend(std::iter::repeat_n(k, c));
        }
        let fit = fit_power_law(&xs, PowerLawMethod::LoglogLs, 1).unwrap();
        assert!((fit.alpha - 2.0).abs() < 0.1, "{}", fit.alpha);
        assert!(fit.r_squared.unwrap() > 0.99);
    }

    #[test]
    fn weibull_recovers_exponential_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..100_000).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let fit = fit_weibull(&xs).unwrap();
        assert!((0.98..=1.02).contains(&fit.shape), "{}", fit.shape);
        assert!((fit.scale - 1.0).abs() < 0.02);
    }

    #[test]
    fn weibull_recovers_shape_and_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| 300.0 * (-(1.0 - rng.random::<f64>()).ln()).powf(1.0 / 1.35))
            .collect();
        let fit = fit_weibull(&xs).unwrap();
        assert!((1.32..=1.38).contains(&fit.shape), "{}", fit.shape);
        assert!((fit.scale / 300.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn weibull_errors() {
        assert_eq!(fit_weibull(&[5.0; 20]), Err(FitError::NonPositiveVariance));
        assert!(matches!(fit_weibull(&[1.0, 2.0]), Err(FitError::InsufficientData { .. })));
        let mut xs = vec![1.0; 20];
        xs[3] = 0.0;
        assert_eq!(fit_weibull(&xs), Err(FitError::NonPositiveSample(0.0)));
    }

    #[test]
    fn pearson_examples() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let lin: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &lin).unwrap().coefficient - 1.0).abs() < 1e-15);
        assert!((pearson(&xs, &neg).unwrap().coefficient + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&xs, &xs[..3]), Err(FitError::LengthMismatch(10, 3)));
        assert_eq!(pearson(&xs, &[1.0; 10]), Err(FitError::ZeroVariance));
    }

    #[test]
    fn pearson_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..20).map(|_| rng.random_range(-5.0..5.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * 0.5 + rng.random_range(-2.0..2.0)).collect();
        // single-pass textbook form
        let n = 20.0;
        let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let syy: f64 = ys.iter().map(|y| y * y).sum();
        let direct = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
        assert!((pearson(&xs, &ys).unwrap().coefficient - direct).abs() < 1e-12);
    }

    #[test]
    fn ccdf_examples() {
        let c = ccdf(&[1.0, 2.0, 3.0]);
        assert_eq!(c, vec![(1.0, 1.0), (2.0, 2.0 / 3.0), (3.0, 1.0 / 3.0)]);
        assert_eq!(ccdf(&[7.0; 4]), vec![(7.0, 1.0)]);
        assert_eq!(ecdf(&[2.0, 1.0, 2.0]), vec![(1.0, 1.0 / 3.0), (2.0, 1.0)]);
    }

    proptest! {
        #[test]
        fn ccdf_matches_counting(xs in prop::collection::vec(0u8..20, 1..60)) {
            let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
            let c = ccdf(&xs);
            prop_assert_eq!(c[0].1, 1.0);
            prop_assert!(c.windows(2).all(|w| w[0].1 > w[1].1 && w[0].0 < w[1].0));
            for (v, p) in c {
                let count = xs.iter().filter(|&&x| x >= v).count();
                prop_assert_eq!(p, count as f64 / xs.len() as f64);
            }
        }

        #[test]
        fn pearson_affine_invariance(
            pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
            a in 0.1f64..10.0, b in -50.0f64..50.0,
        ) {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            if let Ok(c) = pearson(&xs, &ys) {
                let up: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
                let down: Vec<f64> = xs.iter().map(|x| -a * x + b).collect();
                let cu = pearson(&up, &ys).unwrap().coefficient;
                let cd = pearson(&down, &ys).unwrap().coefficient;
                prop_assert!((cu - c.coefficient).abs() < 1e-9);
                prop_assert!((cd + c.coefficient).abs() < 1e-9);
            }
        }
    }
}
