//! Estimators and test statistics for comparing simulation output with
//! predictions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::process::FiniteDiscreteDistribution;

/// Points in `R^d` with non-negative weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightedSample {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSample {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Equally weighted points.
    pub fn unweighted<'a>(dim: usize, points: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut s = Self::new(dim);
        for p in points {
            s.push(p, 1.0)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, x: &[f64], w: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad weight {w}")));
        }
        self.coords.extend_from_slice(x);
        self.weights.push(w);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights
            .iter()
            .copied()
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.coords
            .chunks_exact(self.dim.max(1))
            .zip(self.weights.iter().copied())
    }

    /// Coordinate `axis` of every point.
    pub fn projection(&self, axis: usize) -> Vec<f64> {
        self.iter().map(|(x, _)| x[axis]).collect()
    }
}

/// Weighted mean and covariance, both normalized by the total weight.
pub fn sample_moments(ws: &WeightedSample) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let positive = ws.weights.iter().filter(|w| **w > 0.0).count();
    if positive < 2 {
        return Err(Error::Degenerate(format!(
            "{positive} points with positive weight, need 2"
        )));
    }
    let d = ws.dim;
    let total = ws.total_weight();
    let mut mean = DVector::zeros(d);
    for i in 0..d {
        let s: CompensatedSum = ws.iter().map(|(x, w)| w * x[i]).collect();
        mean[i] = s.value() / total;
    }
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let s: CompensatedSum = ws
                .iter()
                .map(|(x, w)| w * (x[i] - mean[i]) * (x[j] - mean[j]))
                .collect();
            cov[(i, j)] = s.value() / total;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    Ok((mean, cov))
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::Degenerate("need at least two values".into()));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    let ss: CompensatedSum = xs.iter().map(|x| (x - mean).powi(2)).collect();
    Ok((mean, (ss.value() / (n - 1.0) / n).sqrt()))
}

/// Mean of complex values and the standard error of its modulus error,
/// `sqrt((var re + var im) / n)`.
pub fn complex_mean_stderr(zs: &[Complex64]) -> Result<(Complex64, f64)> {
    let re: Vec<f64> = zs.iter().map(|z| z.re).collect();
    let im: Vec<f64> = zs.iter().map(|z| z.im).collect();
    let (mr, sr) = mean_and_stderr(&re)?;
    let (mi, si) = mean_and_stderr(&im)?;
    Ok((Complex64::new(mr, mi), sr.hypot(si)))
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample Kolmogorov-Smirnov distance `sup |F_n - F|`.
pub fn ks_1d(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let xs = sorted(sample);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        // compare both one-sided limits so step cdfs are handled exactly
        let below = cdf(x.next_down());
        d = d
            .max((j as f64 / n - cdf(x)).abs())
            .max((below - i as f64 / n).abs());
        i = j;
    }
    d
}

/// KS distance between the weighted empirical cdf of `(x, weight)` pairs
/// and `cdf`.
pub fn weighted_ks_1d(sample: &[(f64, f64)], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample
        .iter()
        .any(|(x, w)| !(*w >= 0.0 && w.is_finite()) || x.is_nan())
    {
        return Err(Error::InvalidParameter(
            "weights must be finite and non-negative".into(),
        ));
    }
    let mut pts = sample.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pts.iter().map(|(_, w)| w).sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("total weight is zero".into()));
    }
    let mut d: f64 = 0.0;
    let mut acc = 0.0;
    let mut i = 0;
    while i < pts.len() {
        let x = pts[i].0;
        let before = acc;
        while i < pts.len() && pts[i].0 == x {
            acc += pts[i].1;
            i += 1;
        }
        d = d
            .max((acc / total - cdf(x)).abs())
            .max((cdf(x.next_down()) - before / total).abs());
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov distance `sup |F_a - F_b|`.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let xa = sorted(a);
    let xb = sorted(b);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic Kolmogorov critical value `sqrt(-ln(alpha / 2) / 2)`
/// (1.358 at 0.05, 1.949 at 0.001).
pub fn ks_critical_value(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// One-sample KS threshold `c(alpha) factor / sqrt(n)`.
pub fn ks_threshold(n: usize, alpha: f64, factor: f64) -> f64 {
    ks_critical_value(alpha) * factor / (n as f64).sqrt()
}

/// Two-sample KS threshold `c(alpha) factor sqrt((n + m) / (n m))`.
pub fn two_sample_ks_threshold(n: usize, m: usize, alpha: f64, factor: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_critical_value(alpha) * factor * ((n + m) / (n * m)).sqrt()
}

/// Total variation distance between two lattice distributions.
pub fn tv_distance(p: &FiniteDiscreteDistribution, q: &FiniteDiscreteDistribution) -> Result<f64> {
    if p.scale() != q.scale() {
        return Err(Error::LatticeMismatch(format!(
            "scales {} and {} differ",
            p.scale(),
            q.scale()
        )));
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    let (pe, qe) = (p.entries(), q.entries());
    let mut sum = CompensatedSum::new();
    for (k, a) in pe {
        sum.add((a - qe.get(k).copied().unwrap_or(0.0)).abs());
    }
    for (k, b) in qe {
        if !pe.contains_key(k) {
            sum.add(*b);
        }
    }
    Ok((0.5 * sum.value()).clamp(0.0, 1.0))
}

/// One statistic compared against its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub sample_size: Option<usize>,
}

impl Check {
    /// Passes when `value <= threshold`.
    pub fn at_most(
        name: impl Into<String>,
        value: f64,
        threshold: f64,
        sample_size: Option<usize>,
    ) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
            sample_size,
        }
    }
}

/// Named collection of checks, serialized as the test-report JSON.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub checks: Vec<Check>,
}

impl TestReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: TestReport) {
        self.checks.extend(other.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Thresholds for [`normality_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalityThresholds {
    /// Multiplier on the 95% asymptotic KS band.
    pub ks_factor: f64,
    /// Allowed relative Frobenius error of the sample covariance.
    pub cov_rel_tol: f64,
}

impl Default for NormalityThresholds {
    fn default() -> Self {
        Self {
            ks_factor: 1.5,
            cov_rel_tol: 0.15,
        }
    }
}

/// Tests samples against the centred normal law with covariance `target`:
/// per-coordinate KS against the target marginal and relative Frobenius
/// error of the sample covariance.
pub fn normality_check(
    samples: &[Vec<f64>],
    target: &DMatrix<f64>,
    thresholds: NormalityThresholds,
) -> Result<TestReport> {
    let n = samples.len();
    if n < 100 {
        return Err(Error::InvalidParameter(format!(
            "need at least 100 samples, got {n}"
        )));
    }
    let d = target.nrows();
    if target.ncols() != d || samples.iter().any(|s| s.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: samples[0].len(),
        });
    }
    let ks_limit = ks_threshold(n, 0.05, thresholds.ks_factor);
    let mut report = TestReport::new("normality");
    for axis in 0..d {
        let xs: Vec<f64> = samples.iter().map(|s| s[axis]).collect();
        let var = target[(axis, axis)];
        let stat = if var > 0.0 {
            let normal =
                Normal::new(0.0, var.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            ks_1d(&xs, |x| normal.cdf(x))
        } else if xs.iter().any(|x| *x != xs[0]) {
            return Err(Error::Degenerate(format!(
                "target variance of coordinate {axis} is zero but the data vary"
            )));
        } else {
            ks_1d(&xs, |x| if x >= 0.0 { 1.0 } else { 0.0 })
        };
        report.push(Check::at_most(
            format!("ks_axis_{axis}"),
            stat,
            ks_limit,
            Some(n),
        ));
    }
    let ws = WeightedSample::unweighted(d, samples.iter().map(Vec::as_slice))?;
    let (_, cov) = sample_moments(&ws)?;
    let rel = (&cov - target).norm() / target.norm().max(f64::MIN_POSITIVE);
    report.push(Check::at_most(
        "covariance_rel_error",
        rel,
        thresholds.cov_rel_tol,
        Some(n),
    ));
    Ok(report)
}
