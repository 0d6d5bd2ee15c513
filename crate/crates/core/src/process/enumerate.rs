//! Exact law of a point by brute-force enumeration of every genealogy and
//! displacement outcome. Usable when all displacement marginals are finitely
//! supported; locations are rescaled to an integer lattice so outcomes can be
//! merged exactly.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::Model;

fn to_key(x: &[f64], scale: f64) -> Result<Vec<i64>> {
    x.iter()
        .map(|&v| {
            let s = v * scale;
            let r = s.round();
            if (s - r).abs() > 1e-9 * s.abs().max(1.0) || r.abs() > 9.0e15 {
                Err(Error::LatticeMismatch(format!(
                    "{v} is not on the lattice of spacing 1/{scale}"
                )))
            } else {
                Ok(r as i64)
            }
        })
        .collect()
}

/// Smallest integer scale `s` (from `1..=1024`, then `10^4..10^6`) such that
/// every value times `s` is an integer.
pub fn detect_lattice_scale(values: impl IntoIterator<Item = f64>) -> Result<f64> {
    let values: Vec<f64> = values.into_iter().collect();
    let candidates = (1..=1024).map(f64::from).chain([1e4, 1e5, 1e6]);
    for s in candidates {
        if values.iter().all(|v| to_key(&[*v], s).is_ok()) {
            return Ok(s);
        }
    }
    Err(Error::LatticeMismatch(
        "no integer lattice scale up to 1e6 fits the support".into(),
    ))
}

/// Probability distribution on the lattice `Z^d / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDiscreteDistribution {
    dim: usize,
    scale: f64,
    probs: BTreeMap<Vec<i64>, f64>,
}

impl FiniteDiscreteDistribution {
    pub fn new(dim: usize, scale: f64) -> Self {
        Self {
            dim,
            scale,
            probs: BTreeMap::new(),
        }
    }

    /// Empirical frequencies of equally weighted points.
    pub fn from_points<'a>(
        dim: usize,
        scale: f64,
        points: impl IntoIterator<Item = &'a [f64]>,
    ) -> Result<Self> {
        let mut counts: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
        let mut total = 0u64;
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            *counts.entry(to_key(p, scale)?).or_default() += 1;
            total += 1;
        }
        if total == 0 {
            return Err(Error::Degenerate("no points".into()));
        }
        let probs = counts
            .into_iter()
            .map(|(k, c)| (k, c as f64 / total as f64))
            .collect();
        Ok(Self { dim, scale, probs })
    }

    pub fn add(&mut self, x: &[f64], p: f64) -> Result<()> {
        let key = to_key(x, self.scale)?;
        self.add_key(key, p);
        Ok(())
    }

    fn add_key(&mut self, key: Vec<i64>, p: f64) {
        if p > 0.0 {
            *self.probs.entry(key).or_default() += p;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Number of support points.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Lattice keys with probabilities.
    pub fn entries(&self) -> &BTreeMap<Vec<i64>, f64> {
        &self.probs
    }

    pub fn prob(&self, x: &[f64]) -> f64 {
        to_key(x, self.scale)
            .ok()
            .and_then(|k| self.probs.get(&k).copied())
            .unwrap_or(0.0)
    }

    /// Support points (in real coordinates) with probabilities.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<f64>, f64)> + '_ {
        self.probs
            .iter()
            .map(|(k, p)| (k.iter().map(|&i| i as f64 / self.scale).collect(), *p))
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Fourier transform `sum_x p(x) exp(i t.x)`.
    pub fn chf(&self, t: &[f64]) -> Complex64 {
        self.iter()
            .map(|(x, p)| {
                let phase: f64 = x.iter().zip(t).map(|(a, b)| a * b).sum();
                Complex64::from_polar(p, phase)
            })
            .sum()
    }
}

fn ensure_budget(predicted: u128, limit: u128) -> Result<()> {
    if predicted > limit {
        Err(Error::OutcomeOverflow { predicted, limit })
    } else {
        Ok(())
    }
}

/// Exact law of `X_{n,j}` (1-based `j`) by enumerating every sequence of
/// mother choices and joint displacement outcomes up to step `n`.
///
/// Fails with [`Error::OutcomeOverflow`] when an expansion would exceed
/// `max_outcomes` branches and with [`Error::NonDiscrete`] when a
/// displacement law is not finitely supported.
pub fn exact_enumerate(
    model: &Model,
    n: usize,
    j: usize,
    max_outcomes: u128,
) -> Result<FiniteDiscreteDistribution> {
    model.check_index(n, j)?;
    let d = model.dim();
    let initial = model.initial();

    let mut joint_atoms = Vec::with_capacity(n.saturating_sub(1));
    for m in 1..n {
        let step = model.env().step(m)?;
        joint_atoms.push(match step.joint() {
            Some(joint) => joint.joint_atoms()?,
            None => Vec::new(),
        });
    }
    let last_atoms = if n == 0 {
        Vec::new()
    } else {
        let step = model.env().step(n)?;
        let law = step.joint().expect("j <= k_n").marginal(j - 1);
        law.atoms()
            .ok_or_else(|| Error::NonDiscrete(format!("{law:?}")))?
    };

    let coords = initial
        .iter()
        .flat_map(|p| p.x.iter().copied())
        .chain(
            joint_atoms
                .iter()
                .flatten()
                .flat_map(|(ys, _)| ys.iter().flatten().copied()),
        )
        .chain(last_atoms.iter().flat_map(|(y, _)| y.iter().copied()));
    let scale = detect_lattice_scale(coords)?;

    if n == 0 {
        let mut out = FiniteDiscreteDistribution::new(d, scale);
        out.add(&initial[j - 1].x, 1.0)?;
        return Ok(out);
    }

    let mut ln_w: Vec<f64> = (1..=initial.len())
        .map(|i| model.ln_point_weight(0, i))
        .collect::<Result<_>>()?;
    let mut start: Vec<i64> = Vec::with_capacity(initial.len() * d);
    for p in initial {
        start.extend(to_key(&p.x, scale)?);
    }
    let mut configs: HashMap<Vec<i64>, f64> = HashMap::from([(start, 1.0)]);
    let series = model.series();

    let selection = |ln_w: &[f64], ln_big_w: f64| -> Vec<(usize, f64)> {
        ln_w.iter()
            .enumerate()
            .filter(|(_, lw)| lw.is_finite())
            .map(|(i, lw)| (i, (lw - ln_big_w).exp()))
            .collect()
    };

    for m in 1..n {
        let step = model.env().step(m)?;
        if step.k() == 0 {
            continue;
        }
        let atoms: Vec<(Vec<Vec<i64>>, f64)> = joint_atoms[m - 1]
            .iter()
            .map(|(ys, p)| {
                Ok((
                    ys.iter().map(|y| to_key(y, scale)).collect::<Result<_>>()?,
                    *p,
                ))
            })
            .collect::<Result<_>>()?;
        let choices = selection(&ln_w, series.ln_big_w(m - 1));
        ensure_budget(
            (configs.len() as u128)
                .saturating_mul(choices.len() as u128)
                .saturating_mul(atoms.len() as u128),
            max_outcomes,
        )?;
        let mut next: HashMap<Vec<i64>, f64> = HashMap::with_capacity(configs.len() * 2);
        for (cfg, p) in &configs {
            for &(mother, q) in &choices {
                let base = &cfg[mother * d..(mother + 1) * d];
                for (ys, a) in &atoms {
                    let mut new_cfg = cfg.clone();
                    for y in ys {
                        new_cfg.extend(base.iter().zip(y).map(|(b, v)| b + v));
                    }
                    *next.entry(new_cfg).or_default() += p * q * a;
                }
            }
        }
        configs = next;
        ln_w.extend((0..step.k()).map(|i| step.ln_weight(i)));
    }

    let atoms: Vec<(Vec<i64>, f64)> = last_atoms
        .iter()
        .map(|(y, p)| Ok((to_key(y, scale)?, *p)))
        .collect::<Result<_>>()?;
    let choices = selection(&ln_w, series.ln_big_w(n - 1));
    ensure_budget(
        (configs.len() as u128)
            .saturating_mul(choices.len() as u128)
            .saturating_mul(atoms.len() as u128),
        max_outcomes,
    )?;
    let mut out = FiniteDiscreteDistribution::new(d, scale);
    for (cfg, p) in &configs {
        for &(mother, q) in &choices {
            let base = &cfg[mother * d..(mother + 1) * d];
            for (y, a) in &atoms {
                out.add_key(base.iter().zip(y).map(|(b, v)| b + v).collect(), p * q * a);
            }
        }
    }
    Ok(out)
}
