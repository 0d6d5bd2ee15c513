//! Displacement laws on `R^d`, their couplings across the daughters of one
//! generation, and weighted mixtures of them.
//!
//! Every law exposes exact sampling, a closed-form characteristic function
//! and its first two moments. Gaussian vectors are sampled as
//! `mean + F z` with `z` standard normal (ziggurat method from `rand_distr`)
//! and `F = V diag(sqrt(max(l, 0)))` built from the eigen-decomposition of the
//! covariance, so semi-definite covariances are supported.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const PROB_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Mean vector and matrix of mixed second moments `E[Y^T Y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub second: DMatrix<f64>,
}

impl Moments {
    pub fn zeros(d: usize) -> Self {
        Self {
            mean: DVector::zeros(d),
            second: DMatrix::zeros(d, d),
        }
    }

    /// `second - mean^T mean`.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.second - &self.mean * self.mean.transpose()
    }
}

/// Common surface of displacement laws and their mixtures.
pub trait Law {
    fn dim(&self) -> usize;
    fn chf(&self, t: &[f64]) -> Complex64;
    fn moments(&self) -> Moments;
    /// Writes one draw into `out` (length `dim()`).
    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]);

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(invalid("probability list is empty"));
    }
    if probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(invalid("probabilities must be finite and non-negative"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(invalid(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn pick<R: Rng + ?Sized>(rng: &mut R, cumulative: &[f64]) -> usize {
    let total = *cumulative.last().expect("non-empty");
    let u = rng.random::<f64>() * total;
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}

/// Finitely supported law.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    support: Vec<Vec<f64>>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(support: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(invalid("support and probability lengths differ"));
        }
        check_probs(&probs)?;
        let d = support[0].len();
        if d == 0 {
            return Err(invalid("support points must have dimension >= 1"));
        }
        if let Some(p) = support.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.len(),
            });
        }
        if support.iter().flatten().any(|x| !x.is_finite()) {
            return Err(invalid("support points must be finite"));
        }
        let cumulative = cumulative(&probs);
        Ok(Self {
            support,
            probs,
            cumulative,
        })
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Gaussian law with mean and positive semi-definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLaw {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl GaussianLaw {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(invalid("Gaussian mean must have dimension >= 1"));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|x| !x.is_finite()) {
            return Err(invalid("Gaussian parameters must be finite"));
        }
        let scale = cov.amax().max(1.0);
        if (&cov - cov.transpose()).amax() > PSD_TOL * scale {
            return Err(invalid("covariance is not symmetric"));
        }
        let eig = SymmetricEigen::new(cov.clone());
        if eig.eigenvalues.iter().any(|&l| l < -PSD_TOL * scale) {
            return Err(invalid("covariance is not positive semi-definite"));
        }
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
        Ok(Self {
            mean: DVector::from_vec(mean),
            cov,
            factor,
        })
    }

    /// Isotropic Gaussian `N(mean, sigma2 I)`.
    pub fn isotropic(mean: Vec<f64>, sigma2: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, DMatrix::identity(d, d) * sigma2)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

/// Uniform law on the box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl UniformBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(invalid("box must have dimension >= 1"));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite())
        {
            return Err(invalid("box requires finite lo <= hi"));
        }
        Ok(Self { lo, hi })
    }
}

/// A displacement law on `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawSpec", into = "LawSpec")]
pub enum DisplacementLaw {
    PointMass(Vec<f64>),
    FiniteDiscrete(DiscreteLaw),
    Gaussian(GaussianLaw),
    UniformBox(UniformBox),
}

/// Serialized form of [`DisplacementLaw`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    PointMass {
        c: Vec<f64>,
    },
    FiniteDiscrete {
        support: Vec<Vec<f64>>,
        probs: Vec<f64>,
    },
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    UniformBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl TryFrom<LawSpec> for DisplacementLaw {
    type Error = Error;

    fn try_from(spec: LawSpec) -> Result<Self> {
        match spec {
            LawSpec::PointMass { c } => DisplacementLaw::point_mass(c),
            LawSpec::FiniteDiscrete { support, probs } => {
                DiscreteLaw::new(support, probs).map(DisplacementLaw::FiniteDiscrete)
            }
            LawSpec::Gaussian { mean, cov } => {
                let d = mean.len();
                if cov.len() != d || cov.iter().any(|row| row.len() != d) {
                    return Err(invalid("covariance must be a d x d matrix"));
                }
                let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
                GaussianLaw::new(mean, m).map(DisplacementLaw::Gaussian)
            }
            LawSpec::UniformBox { lo, hi } => {
                UniformBox::new(lo, hi).map(DisplacementLaw::UniformBox)
            }
        }
    }
}

impl From<DisplacementLaw> for LawSpec {
    fn from(law: DisplacementLaw) -> Self {
        match law {
            DisplacementLaw::PointMass(c) => LawSpec::PointMass { c },
            DisplacementLaw::FiniteDiscrete(l) => LawSpec::FiniteDiscrete {
                support: l.support,
                probs: l.probs,
            },
            DisplacementLaw::Gaussian(g) => LawSpec::Gaussian {
                mean: g.mean.iter().copied().collect(),
                cov: g
                    .cov
                    .row_iter()
                    .map(|r| r.iter().copied().collect())
                    .collect(),
            },
            DisplacementLaw::UniformBox(b) => LawSpec::UniformBox { lo: b.lo, hi: b.hi },
        }
    }
}

impl DisplacementLaw {
    pub fn point_mass(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() || c.iter().any(|x| !x.is_finite()) {
            return Err(invalid(
                "point mass location must be finite with dimension >= 1",
            ));
        }
        Ok(Self::PointMass(c))
    }

    pub fn discrete(support: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        DiscreteLaw::new(support, probs).map(Self::FiniteDiscrete)
    }

    /// The symmetric law on `{-1, +1}` in one dimension.
    pub fn rademacher() -> Self {
        Self::discrete(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).expect("valid law")
    }

    pub fn gaussian(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        GaussianLaw::new(mean, cov).map(Self::Gaussian)
    }

    pub fn uniform_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        UniformBox::new(lo, hi).map(Self::UniformBox)
    }

    /// Support points and probabilities, when the law is finitely supported.
    pub fn atoms(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        match self {
            Self::PointMass(c) => Some(vec![(c.clone(), 1.0)]),
            Self::FiniteDiscrete(l) => Some(
                l.support
                    .iter()
                    .cloned()
                    .zip(l.probs.iter().copied())
                    .filter(|(_, p)| *p > 0.0)
                    .collect(),
            ),
            _ => None,
        }
    }
}

impl Law for DisplacementLaw {
    fn dim(&self) -> usize {
        match self {
            Self::PointMass(c) => c.len(),
            Self::FiniteDiscrete(l) => l.support[0].len(),
            Self::Gaussian(g) => g.mean.len(),
            Self::UniformBox(b) => b.lo.len(),
        }
    }

    fn chf(&self, t: &[f64]) -> Complex64 {
        match self {
            Self::PointMass(c) => Complex64::from_polar(1.0, dot(t, c)),
            Self::FiniteDiscrete(l) => l
                .support
                .iter()
                .zip(&l.probs)
                .map(|(x, p)| Complex64::from_polar(*p, dot(t, x)))
                .sum(),
            Self::Gaussian(g) => {
                let tv = DVector::from_column_slice(t);
                let phase = tv.dot(&g.mean);
                let quad = (tv.transpose() * &g.cov * &tv)[(0, 0)];
                Complex64::from_polar((-0.5 * quad).exp(), phase)
            }
            Self::UniformBox(b) => {
                let mut acc = Complex64::new(1.0, 0.0);
                for ((ti, lo), hi) in t.iter().zip(&b.lo).zip(&b.hi) {
                    let half = 0.5 * ti * (hi - lo);
                    let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
                    acc *= Complex64::from_polar(sinc, 0.5 * ti * (lo + hi));
                }
                acc
            }
        }
    }

    fn moments(&self) -> Moments {
        match self {
            Self::PointMass(c) => {
                let mean = DVector::from_column_slice(c);
                let second = &mean * mean.transpose();
                Moments { mean, second }
            }
            Self::FiniteDiscrete(l) => {
                let d = self.dim();
                let mut m = Moments::zeros(d);
                for (x, p) in l.support.iter().zip(&l.probs) {
                    let v = DVector::from_column_slice(x);
                    m.mean += &v * *p;
                    m.second += &v * v.transpose() * *p;
                }
                m
            }
            Self::Gaussian(g) => Moments {
                mean: g.mean.clone(),
                second: &g.cov + &g.mean * g.mean.transpose(),
            },
            Self::UniformBox(b) => {
                let d = b.lo.len();
                let mean = DVector::from_fn(d, |i, _| 0.5 * (b.lo[i] + b.hi[i]));
                let mut second = &mean * mean.transpose();
                for i in 0..d {
                    let (lo, hi) = (b.lo[i], b.hi[i]);
                    second[(i, i)] = (lo * lo + lo * hi + hi * hi) / 3.0;
                }
                Moments { mean, second }
            }
        }
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Self::PointMass(c) => out.copy_from_slice(c),
            Self::FiniteDiscrete(l) => {
                let i = pick(rng, &l.cumulative);
                out.copy_from_slice(&l.support[i]);
            }
            Self::Gaussian(g) => {
                let d = g.mean.len();
                if d == 1 {
                    let z: f64 = rng.sample(StandardNormal);
                    out[0] = g.mean[0] + g.factor[(0, 0)] * z;
                    return;
                }
                let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                for (i, o) in out.iter_mut().enumerate() {
                    let mut x = g.mean[i];
                    for (j, zj) in z.iter().enumerate() {
                        x += g.factor[(i, j)] * zj;
                    }
                    *o = x;
                }
            }
            Self::UniformBox(b) => {
                for ((o, lo), hi) in out.iter_mut().zip(&b.lo).zip(&b.hi) {
                    *o = lo + (hi - lo) * rng.random::<f64>();
                }
            }
        }
    }
}

/// Joint law of the `k` displacement vectors of one generation.
#[derive(Debug, Clone, PartialEq)]
pub enum JointDisplacement {
    /// `k` independent copies of one law.
    Iid { law: Arc<DisplacementLaw>, k: usize },
    /// One draw shared by all `k` daughters.
    CommonCopy { law: Arc<DisplacementLaw>, k: usize },
    /// Independent draws from an explicit list of marginals.
    ProductList(Vec<Arc<DisplacementLaw>>),
}

impl JointDisplacement {
    pub fn k(&self) -> usize {
        match self {
            Self::Iid { k, .. } | Self::CommonCopy { k, .. } => *k,
            Self::ProductList(laws) => laws.len(),
        }
    }

    pub fn dim(&self) -> usize {
        self.marginal(0).dim()
    }

    /// Marginal law of daughter `j` (0-based).
    pub fn marginal(&self, j: usize) -> &Arc<DisplacementLaw> {
        match self {
            Self::Iid { law, .. } | Self::CommonCopy { law, .. } => law,
            Self::ProductList(laws) => &laws[j],
        }
    }

    /// Writes `k` draws, one after another, into `out` (length `k * dim()`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.dim();
        match self {
            Self::Iid { law, .. } => {
                for chunk in out.chunks_exact_mut(d) {
                    law.sample_into(rng, chunk);
                }
            }
            Self::CommonCopy { law, .. } => {
                let (first, rest) = out.split_at_mut(d);
                law.sample_into(rng, first);
                for chunk in rest.chunks_exact_mut(d) {
                    chunk.copy_from_slice(first);
                }
            }
            Self::ProductList(laws) => {
                for (chunk, law) in out.chunks_exact_mut(d).zip(laws) {
                    law.sample_into(rng, chunk);
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut flat = vec![0.0; self.k() * d];
        self.sample_into(rng, &mut flat);
        flat.chunks_exact(d).map(<[f64]>::to_vec).collect()
    }

    /// Joint outcomes with probabilities, for finitely supported marginals.
    pub fn joint_atoms(&self) -> Result<Vec<(Vec<Vec<f64>>, f64)>> {
        let atoms_of = |law: &DisplacementLaw| {
            law.atoms()
                .ok_or_else(|| Error::NonDiscrete(format!("{law:?}")))
        };
        match self {
            Self::CommonCopy { law, k } => Ok(atoms_of(law)?
                .into_iter()
                .map(|(x, p)| (vec![x; *k], p))
                .collect()),
            _ => {
                let mut outcomes: Vec<(Vec<Vec<f64>>, f64)> = vec![(Vec::new(), 1.0)];
                for j in 0..self.k() {
                    let atoms = atoms_of(self.marginal(j))?;
                    outcomes = outcomes
                        .into_iter()
                        .flat_map(|(xs, p)| {
                            atoms.iter().map(move |(x, q)| {
                                let mut ys = xs.clone();
                                ys.push(x.clone());
                                (ys, p * q)
                            })
                        })
                        .collect();
                }
                Ok(outcomes)
            }
        }
    }
}

/// How one law is shared among the daughters of a generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "coupling", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisplacementSpec {
    Iid { law: DisplacementLaw },
    CommonCopy { law: DisplacementLaw },
    ProductList { laws: Vec<DisplacementLaw> },
}

impl DisplacementSpec {
    pub fn dim(&self) -> Result<usize> {
        let dims: Vec<usize> = match self {
            Self::Iid { law } | Self::CommonCopy { law } => vec![law.dim()],
            Self::ProductList { laws } => laws.iter().map(Law::dim).collect(),
        };
        let d = *dims
            .first()
            .ok_or_else(|| invalid("product list of displacement laws is empty"))?;
        if let Some(&other) = dims.iter().find(|&&x| x != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: other,
            });
        }
        Ok(d)
    }

    /// A reusable factory that shares one allocation of each law across steps.
    pub fn factory(&self) -> JointFactory {
        match self {
            Self::Iid { law } => JointFactory::Iid(Arc::new(law.clone())),
            Self::CommonCopy { law } => JointFactory::CommonCopy(Arc::new(law.clone())),
            Self::ProductList { laws } => {
                JointFactory::ProductList(laws.iter().cloned().map(Arc::new).collect())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum JointFactory {
    Iid(Arc<DisplacementLaw>),
    CommonCopy(Arc<DisplacementLaw>),
    ProductList(Vec<Arc<DisplacementLaw>>),
}

impl JointFactory {
    /// Joint law for `k` daughters; `None` when `k == 0`.
    pub fn joint(&self, k: usize) -> Result<Option<JointDisplacement>> {
        if k == 0 {
            return Ok(None);
        }
        Ok(Some(match self {
            Self::Iid(law) => JointDisplacement::Iid {
                law: law.clone(),
                k,
            },
            Self::CommonCopy(law) => JointDisplacement::CommonCopy {
                law: law.clone(),
                k,
            },
            Self::ProductList(laws) => {
                if laws.len() != k {
                    return Err(invalid(format!(
                        "product list has {} laws but the step has {k} daughters",
                        laws.len()
                    )));
                }
                JointDisplacement::ProductList(laws.clone())
            }
        }))
    }
}

/// Finite mixture of laws with normalized non-negative weights.
#[derive(Debug, Clone)]
pub struct MixtureLaw {
    weights: Vec<f64>,
    components: Vec<Arc<DisplacementLaw>>,
    cumulative: Vec<f64>,
}

impl MixtureLaw {
    /// Builds the mixture, merging components that share an allocation.
    pub fn new(parts: impl IntoIterator<Item = (f64, Arc<DisplacementLaw>)>) -> Result<Self> {
        let mut weights: Vec<f64> = Vec::new();
        let mut components: Vec<Arc<DisplacementLaw>> = Vec::new();
        for (w, law) in parts {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(invalid("mixture weights must be finite and non-negative"));
            }
            match components.iter().position(|c| Arc::ptr_eq(c, &law)) {
                Some(i) => weights[i] += w,
                None => {
                    weights.push(w);
                    components.push(law);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        if components.is_empty() || !(total > 0.0) {
            return Err(invalid("mixture needs positive total weight"));
        }
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: c.dim(),
            });
        }
        for w in &mut weights {
            *w /= total;
        }
        let cumulative = cumulative(&weights);
        Ok(Self {
            weights,
            components,
            cumulative,
        })
    }

    pub fn single(law: Arc<DisplacementLaw>) -> Self {
        Self::new([(1.0, law)]).expect("single component")
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Arc<DisplacementLaw>] {
        &self.components
    }
}

impl Law for MixtureLaw {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn chf(&self, t: &[f64]) -> Complex64 {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| *w * c.chf(t))
            .sum()
    }

    fn moments(&self) -> Moments {
        let mut m = Moments::zeros(self.dim());
        for (w, c) in self.weights.iter().zip(&self.components) {
            let cm = c.moments();
            m.mean += cm.mean * *w;
            m.second += cm.second * *w;
        }
        m
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let i = if self.components.len() == 1 {
            0
        } else {
            pick(rng, &self.cumulative)
        };
        self.components[i].sample_into(rng, out);
    }
}
