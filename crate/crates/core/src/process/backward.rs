//! Sampling the mother `X*_n` by tracing ancestry backwards in time:
//! `X*_n` has the law of `sum_{r=0}^n I_r Y_r` with independent
//! `I_r ~ Bernoulli(pi_r)` (`I_0 = 1`) and `Y_r` drawn from the generation-`r`
//! mixture law (for `r = 0`, the w-weighted mixture of initial locations).

use rand::Rng;

use crate::displacement::{Law, MixtureLaw};
use crate::error::{Error, Result};
use crate::model::Model;

/// Prepared backward sampler for a fixed `n`.
#[derive(Debug, Clone)]
pub struct BackwardSampler<'a> {
    initial: &'a MixtureLaw,
    terms: Vec<(f64, &'a MixtureLaw)>,
    dim: usize,
}

impl<'a> BackwardSampler<'a> {
    pub fn new(model: &'a Model, n: usize) -> Result<Self> {
        if n > model.horizon() {
            return Err(Error::OutOfRange(format!(
                "n = {n} exceeds the {} available steps",
                model.horizon()
            )));
        }
        let initial = model
            .generation_law(0)
            .expect("initial mixture always exists");
        let series = model.series();
        let terms = (1..=n)
            .filter_map(|r| {
                let p = series.pi(r);
                (p > 0.0).then(|| (p, model.generation_law(r).expect("positive weight")))
            })
            .collect();
        Ok(Self {
            initial,
            terms,
            dim: model.dim(),
        })
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        self.initial.sample_into(rng, out);
        let mut y = vec![0.0; self.dim];
        for (p, law) in &self.terms {
            if rng.random::<f64>() < *p {
                law.sample_into(rng, &mut y);
                for (o, v) in out.iter_mut().zip(&y) {
                    *o += v;
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sample_into(rng, &mut out);
        out
    }
}

/// One draw of `X*_n` via the backward representation.
pub fn backward_sample_mother<R: Rng + ?Sized>(
    model: &Model,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(BackwardSampler::new(model, n)?.sample(rng))
}
