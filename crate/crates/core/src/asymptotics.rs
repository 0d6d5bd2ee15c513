//! Limit constants of the mother-point and mean-measure limit theorems,
//! their exact finite-`n` counterparts, and summability diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::displacement::Moments;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numeric::CompensatedSum;

/// Mean of the first `n` terms.
pub fn cesaro_mean(seq: &[f64], n: usize) -> Result<f64> {
    if n == 0 || n > seq.len() {
        return Err(Error::OutOfRange(format!(
            "need 1 <= n <= {}, got {n}",
            seq.len()
        )));
    }
    let sum: CompensatedSum = seq[..n].iter().copied().collect();
    Ok(sum.value() / n as f64)
}

/// `sum_{i<n} b_i a_i / sum_{i<n} b_i`.
pub fn b_summable_estimate(a: &[f64], b: &[f64], n: usize) -> Result<f64> {
    if n > a.len() || n > b.len() {
        return Err(Error::OutOfRange(format!("n = {n} exceeds the sequences")));
    }
    let num: CompensatedSum = a[..n].iter().zip(&b[..n]).map(|(x, w)| x * w).collect();
    let den: CompensatedSum = b[..n].iter().copied().collect();
    if !(den.value() > 0.0) {
        return Err(Error::Degenerate("zero b-mass".into()));
    }
    Ok(num.value() / den.value())
}

/// Logarithmic average `(1 / ln n) sum_{k=1}^n x_k / k` with `x[0] = x_1`.
pub fn log_average(x: &[f64], n: usize) -> Result<f64> {
    if n < 2 || n > x.len() {
        return Err(Error::OutOfRange(format!(
            "need 2 <= n <= {}, got {n}",
            x.len()
        )));
    }
    let sum: CompensatedSum = x[..n]
        .iter()
        .enumerate()
        .map(|(i, v)| v / (i + 1) as f64)
        .collect();
    Ok(sum.value() / (n as f64).ln())
}

fn xi_mass(xi: &[f64]) -> Result<f64> {
    let mass: CompensatedSum = xi.iter().copied().collect();
    if !(mass.value() > 0.0) {
        return Err(Error::Degenerate("Cesaro mean of xi vanishes".into()));
    }
    Ok(mass.value())
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b || a == 0 {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Power-law drift `(alpha + 1) <xi mu> / <xi>` from Cesaro means over the
/// supplied horizon.
pub fn thm2_drift(alpha: f64, xi: &[f64], mu: &[DVector<f64>]) -> Result<DVector<f64>> {
    check_lengths(xi.len(), mu.len())?;
    let mass = xi_mass(xi)?;
    let mut acc = DVector::zeros(mu[0].len());
    for (x, m) in xi.iter().zip(mu) {
        acc.axpy(*x, m, 1.0);
    }
    Ok(acc * ((alpha + 1.0) / mass))
}

/// Power-law covariance `(alpha + 1) <xi m> / <xi>`, `m` the second-moment
/// matrices.
pub fn thm2_cov(alpha: f64, xi: &[f64], m: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    check_lengths(xi.len(), m.len())?;
    let mass = xi_mass(xi)?;
    let d = m[0].nrows();
    let mut acc = DMatrix::zeros(d, d);
    for (x, s) in xi.iter().zip(m) {
        acc += s * *x;
    }
    Ok(symmetrize(acc * ((alpha + 1.0) / mass)))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Generation mixture means `mu_1..mu_n`.
pub fn generation_means(model: &Model, n: usize) -> Vec<DVector<f64>> {
    (1..=n).map(|r| model.generation_moments(r).mean).collect()
}

/// Generation mixture second-moment matrices `m_1..m_n`.
pub fn generation_second_moments(model: &Model, n: usize) -> Vec<DMatrix<f64>> {
    (1..=n)
        .map(|r| model.generation_moments(r).second)
        .collect()
}

fn check_horizon(model: &Model, n: usize) -> Result<()> {
    if n > model.horizon() {
        return Err(Error::OutOfRange(format!(
            "generation {n} beyond horizon {}",
            model.horizon()
        )));
    }
    Ok(())
}

/// Centering of the power-law regime.
#[derive(Debug, Clone, PartialEq)]
pub struct Nu {
    /// `sum_{r=1}^{n-1} pi_r mu_r / ln n`.
    pub nu: DVector<f64>,
    /// `sum_{r=1}^{n-1} pi_r mu_r`.
    pub sum: DVector<f64>,
}

pub fn nu_n(model: &Model, n: usize) -> Result<Nu> {
    if n < 2 {
        return Err(Error::OutOfRange(format!("need n >= 2, got {n}")));
    }
    check_horizon(model, n - 1)?;
    let sum = pi_weighted_mean_sum(model, n - 1);
    Ok(Nu {
        nu: &sum / (n as f64).ln(),
        sum,
    })
}

fn pi_weighted_mean_sum(model: &Model, n: usize) -> DVector<f64> {
    let series = model.series();
    let mut acc = DVector::zeros(model.dim());
    for r in 1..=n {
        let pi = series.pi(r);
        if pi > 0.0 {
            acc.axpy(pi, &model.generation_moments(r).mean, 1.0);
        }
    }
    acc
}

/// Centering of the exponential regime, `sum_{r=1}^n pi_r mu_r`.
pub fn kappa_n(model: &Model, n: usize) -> Result<DVector<f64>> {
    if n < 1 {
        return Err(Error::OutOfRange("need n >= 1".into()));
    }
    check_horizon(model, n)?;
    Ok(pi_weighted_mean_sum(model, n))
}

/// Exact mean and covariance of the mother point `X*_n`:
/// `mean = mu_0 + sum_{r>=1} pi_r mu_r`,
/// `cov = sum_r (pi_r m_r - pi_r^2 mu_r mu_r^T)`.
pub fn backward_moments(model: &Model, n: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_horizon(model, n)?;
    let series = model.series();
    let d = model.dim();
    let mut mean = DVector::zeros(d);
    let mut cov = DMatrix::zeros(d, d);
    for r in 0..=n {
        let pi = series.pi(r);
        if pi == 0.0 {
            continue;
        }
        let Moments { mean: mu, second } = model.generation_moments(r);
        mean.axpy(pi, &mu, 1.0);
        cov += second * pi - (&mu * mu.transpose()) * (pi * pi);
    }
    Ok((mean, symmetrize(cov)))
}

/// Truncated `zeta~_n = sum_{m<M} xi_{n-m} exp(-S_{n,m})` with a geometric
/// bound on the omitted terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaTilde {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

/// Largest truncation level tried when none is given.
pub const ZETA_MAX_TERMS: usize = 10_000;

fn tau_mean(tau: &[f64]) -> Result<f64> {
    let mean = cesaro_mean(tau, tau.len())?;
    if !(mean > 0.0) {
        return Err(Error::RegimeViolation(format!(
            "mean of tau is {mean}, must be positive"
        )));
    }
    Ok(mean)
}

/// Bound `xi_max e^{-M tau_bar} / (1 - e^{-tau_bar})` on the terms `m >= M`.
fn geometric_tail(xi_max: f64, tau_bar: f64, terms: usize) -> f64 {
    xi_max * (-(terms as f64) * tau_bar).exp() / -(-tau_bar).exp_m1()
}

/// `zeta~_n` for the 1-based index `n` into `xi`/`tau` (`xi[0] = xi_1`).
///
/// With `terms = None` the smallest `M` whose tail bound is below `tol` is
/// used, capped at [`ZETA_MAX_TERMS`]. Fails with
/// [`Error::RegimeViolation`] when the mean of `tau` is not positive and
/// with [`Error::NotStabilized`] when the bound exceeds `tol`.
pub fn zeta_tilde(
    xi: &[f64],
    tau: &[f64],
    n: usize,
    terms: Option<usize>,
    tol: f64,
) -> Result<ZetaTilde> {
    check_lengths(xi.len(), tau.len())?;
    if n == 0 || n > xi.len() {
        return Err(Error::OutOfRange(format!(
            "index {n} outside 1..={}",
            xi.len()
        )));
    }
    let tau_bar = tau_mean(tau)?;
    let xi_max = xi.iter().copied().fold(0.0, f64::max);
    let wanted = terms.unwrap_or_else(|| truncation_level(xi_max, tau_bar, tol));
    let m_count = wanted.min(n);
    let mut value = CompensatedSum::new();
    let mut s = 0.0_f64;
    for m in 0..m_count {
        value.add(xi[n - 1 - m] * (-s).exp());
        s += tau[n - 1 - m];
    }
    let tail_bound = geometric_tail(xi_max, tau_bar, m_count);
    if tail_bound > tol {
        return Err(Error::NotStabilized {
            change: tail_bound,
            tolerance: tol,
        });
    }
    Ok(ZetaTilde {
        value: value.value(),
        tail_bound,
        terms: m_count,
    })
}

fn truncation_level(xi_max: f64, tau_bar: f64, tol: f64) -> usize {
    (1..=ZETA_MAX_TERMS)
        .find(|&m| geometric_tail(xi_max, tau_bar, m) < tol)
        .unwrap_or(ZETA_MAX_TERMS)
}

/// Ergodic average with a batch-means standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicEstimate<T> {
    pub value: T,
    pub stderr: T,
    pub samples: usize,
}

const BATCHES: usize = 32;

/// Averages `f(n)` over `n` in `range` with batch-means standard error,
/// elementwise over the flattened output.
fn ergodic_average<F>(
    range: std::ops::Range<usize>,
    len: usize,
    mut f: F,
) -> Result<(Vec<f64>, Vec<f64>, usize)>
where
    F: FnMut(usize, &mut [f64]),
{
    let count = range.len();
    if count < 2 * BATCHES {
        return Err(Error::Degenerate(format!(
            "{count} samples are too few for an ergodic average"
        )));
    }
    let batch = count / BATCHES;
    let mut batch_means = vec![vec![0.0; len]; BATCHES];
    let mut total = vec![CompensatedSum::new(); len];
    let mut buf = vec![0.0; len];
    for (i, n) in range.enumerate() {
        f(n, &mut buf);
        for (t, v) in total.iter_mut().zip(&buf) {
            t.add(*v);
        }
        let b = i / batch;
        if b < BATCHES {
            for (acc, v) in batch_means[b].iter_mut().zip(&buf) {
                *acc += v / batch as f64;
            }
        }
    }
    let mean: Vec<f64> = total.iter().map(|t| t.value() / count as f64).collect();
    let stderr = (0..len)
        .map(|e| {
            let bm: Vec<f64> = batch_means.iter().map(|b| b[e]).collect();
            let avg = bm.iter().sum::<f64>() / BATCHES as f64;
            let var = bm.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
            (var / BATCHES as f64).sqrt()
        })
        .collect();
    Ok((mean, stderr, count))
}

/// `zeta~_n` for every `n` via `zeta~_n = xi_n + e^{-tau_n} zeta~_{n-1}`,
/// started from zero, together with the burn-in after which the start-up
/// error is below `tol`.
pub fn zeta_tilde_series(xi: &[f64], tau: &[f64], tol: f64) -> Result<(Vec<f64>, usize)> {
    check_lengths(xi.len(), tau.len())?;
    let tau_bar = tau_mean(tau)?;
    let xi_max = xi.iter().copied().fold(0.0, f64::max);
    let burn_in = truncation_level(xi_max, tau_bar, tol);
    let mut out = Vec::with_capacity(xi.len());
    let mut z = 0.0;
    for (x, t) in xi.iter().zip(tau) {
        z = x + (-t).exp() * z;
        out.push(z);
    }
    Ok((out, burn_in))
}

/// Exponential-regime drift `<xi mu / zeta~>` as an ergodic average over
/// `n` past the burn-in.
pub fn thm3_drift(
    xi: &[f64],
    tau: &[f64],
    mu: &[DVector<f64>],
    tol: f64,
) -> Result<ErgodicEstimate<DVector<f64>>> {
    check_lengths(xi.len(), mu.len())?;
    let (zeta, burn_in) = zeta_tilde_series(xi, tau, tol)?;
    let d = mu[0].len();
    let (value, stderr, samples) = ergodic_average(burn_in..xi.len(), d, |n, out| {
        let c = xi[n] / zeta[n];
        for (o, m) in out.iter_mut().zip(mu[n].iter()) {
            *o = c * m;
        }
    })?;
    Ok(ErgodicEstimate {
        value: DVector::from_vec(value),
        stderr: DVector::from_vec(stderr),
        samples,
    })
}

/// Exponential-regime covariance
/// `<xi / zeta~ m - xi^2 / zeta~^2 mu mu^T>` as an ergodic average.
pub fn thm3_cov(
    xi: &[f64],
    tau: &[f64],
    mu: &[DVector<f64>],
    m: &[DMatrix<f64>],
    tol: f64,
) -> Result<ErgodicEstimate<DMatrix<f64>>> {
    check_lengths(xi.len(), mu.len())?;
    check_lengths(xi.len(), m.len())?;
    let (zeta, burn_in) = zeta_tilde_series(xi, tau, tol)?;
    let d = mu[0].len();
    let (value, stderr, samples) = ergodic_average(burn_in..xi.len(), d * d, |n, out| {
        let c = xi[n] / zeta[n];
        let term = &m[n] * c - (&mu[n] * mu[n].transpose()) * (c * c);
        out.copy_from_slice(term.as_slice());
    })?;
    Ok(ErgodicEstimate {
        value: symmetrize(DMatrix::from_vec(d, d, value)),
        stderr: DMatrix::from_vec(d, d, stderr),
        samples,
    })
}

/// `U_{floor(n v)} / U_n` for each `v` in `v_grid`, with `u[r] = u_r`.
pub fn g_estimate(u: &[f64], n: usize, v_grid: &[f64]) -> Result<Vec<f64>> {
    if n >= u.len() {
        return Err(Error::OutOfRange(format!(
            "n = {n} beyond the resource table"
        )));
    }
    if let Some(v) = v_grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidParameter(format!(
            "v must lie in [0, 1], got {v}"
        )));
    }
    let mut partial = Vec::with_capacity(n + 1);
    let mut acc = CompensatedSum::new();
    for &x in &u[..=n] {
        acc.add(x);
        partial.push(acc.value());
    }
    let total = partial[n];
    if !(total > 0.0) {
        return Err(Error::Degenerate("U_n = 0".into()));
    }
    Ok(v_grid
        .iter()
        .map(|&v| {
            let m = ((v * n as f64).floor() as usize).min(n);
            (partial[m] / total).clamp(0.0, 1.0)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeTag {
    Summable,
    PowerLaw,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    One,
    SqrtLnN,
    SqrtN,
    N,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenteringKind {
    /// `nu_n ln n`.
    NuLnN,
    /// `kappa_n`.
    Kappa,
    None,
}

/// Limit measure concentrated on `{lambda s : s in [0, 1]}` with cdf `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMeasure {
    pub direction: Vec<f64>,
    /// `(v, G(v))` pairs.
    pub cdf: Vec<(f64, f64)>,
}

/// Predicted limit behaviour, serialized into prediction reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimePrediction {
    pub regime: RegimeTag,
    pub drift: Vec<f64>,
    pub centering: CenteringKind,
    /// `(n, centering vector)` at requested horizons.
    pub centering_values: Vec<(usize, Vec<f64>)>,
    pub scaling: Scaling,
    pub covariance: Vec<Vec<f64>>,
    pub segment: Option<SegmentMeasure>,
}

impl RegimePrediction {
    pub fn new(
        regime: RegimeTag,
        drift: &DVector<f64>,
        centering: CenteringKind,
        scaling: Scaling,
        covariance: &DMatrix<f64>,
    ) -> Self {
        let covariance = symmetrize(covariance.clone());
        Self {
            regime,
            drift: drift.iter().copied().collect(),
            centering,
            centering_values: Vec::new(),
            scaling,
            covariance: covariance
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            segment: None,
        }
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let d = self.covariance.len();
        DMatrix::from_fn(d, d, |i, j| self.covariance[i][j])
    }
}

/// Attaches the segment measure along `lambda` with cdf values `g` on
/// `v_grid`.
pub fn segment_measure(
    mut prediction: RegimePrediction,
    lambda: &DVector<f64>,
    v_grid: &[f64],
    g: &[f64],
) -> Result<RegimePrediction> {
    check_lengths(v_grid.len(), g.len())?;
    if g.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("G must be nondecreasing".into()));
    }
    prediction.segment = Some(SegmentMeasure {
        direction: lambda.iter().copied().collect(),
        cdf: v_grid.iter().copied().zip(g.iter().copied()).collect(),
    });
    Ok(prediction)
}
