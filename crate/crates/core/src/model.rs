//! An initial configuration and environment bundled with the quantities the
//! analytic routines need: the scalar series and the per-generation mixture
//! laws `P̂_r`.

use std::sync::Arc;

use crate::displacement::{DisplacementLaw, Law, MixtureLaw, Moments};
use crate::env::{validate_initial, Environment, EnvironmentSpec, InitialPoint, ScalarSeries};
use crate::error::{Error, Result};
use crate::numeric::ln_scaled;

/// Immutable model instance; cheap to share across threads by reference.
#[derive(Debug, Clone)]
pub struct Model {
    initial: Vec<InitialPoint>,
    env: Environment,
    series: ScalarSeries,
    // laws[0]: w-weighted mixture of initial locations; laws[r]: w-weighted
    // mixture of the generation-r marginals (None when w_r = 0).
    laws: Vec<Option<MixtureLaw>>,
}

impl Model {
    pub fn new(initial: Vec<InitialPoint>, env: Environment) -> Result<Self> {
        let d = validate_initial(&initial)?;
        if d != env.dim() {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: env.dim(),
            });
        }
        let series = ScalarSeries::new(&env, &initial)?;
        let mut laws = Vec::with_capacity(env.len() + 1);
        laws.push(Some(MixtureLaw::new(initial.iter().map(|p| {
            (p.w, Arc::new(DisplacementLaw::PointMass(p.x.clone())))
        }))?));
        for step in env.steps() {
            let law = match step.joint() {
                Some(joint) if step.weight_mantissa() > 0.0 => Some(MixtureLaw::new(
                    step.attrs()
                        .iter()
                        .enumerate()
                        .map(|(j, a)| (a.w, joint.marginal(j).clone())),
                )?),
                _ => None,
            };
            laws.push(law);
        }
        Ok(Self {
            initial,
            env,
            series,
            laws,
        })
    }

    /// Materializes `n_steps` steps of `spec` with `seed` and builds the model.
    pub fn from_spec(
        initial: Vec<InitialPoint>,
        spec: &EnvironmentSpec,
        n_steps: usize,
        seed: u64,
    ) -> Result<Self> {
        let d = validate_initial(&initial)?;
        let env = spec.materialize(n_steps, seed, d)?;
        Self::new(initial, env)
    }

    pub fn dim(&self) -> usize {
        self.env.dim()
    }

    /// Number of materialized steps.
    pub fn horizon(&self) -> usize {
        self.env.len()
    }

    pub fn initial(&self) -> &[InitialPoint] {
        &self.initial
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn series(&self) -> &ScalarSeries {
        &self.series
    }

    /// Mixture law with ch.f. `f_r`; for `r = 0` the initial-location mixture.
    pub fn generation_law(&self, r: usize) -> Option<&MixtureLaw> {
        self.laws.get(r).and_then(Option::as_ref)
    }

    /// Moments of the generation-`r` mixture (zeros when it carries no weight).
    pub fn generation_moments(&self, r: usize) -> Moments {
        self.generation_law(r)
            .map(Law::moments)
            .unwrap_or_else(|| Moments::zeros(self.dim()))
    }

    /// Offspring count `k_n` (`k_0` is the size of the initial configuration).
    pub fn k(&self, n: usize) -> Result<usize> {
        if n == 0 {
            Ok(self.initial.len())
        } else {
            Ok(self.env.step(n)?.k())
        }
    }

    /// `ln w_{r,j}` for the 1-based index `j`.
    pub fn ln_point_weight(&self, r: usize, j: usize) -> Result<f64> {
        self.check_index(r, j)?;
        if r == 0 {
            Ok(ln_scaled(self.initial[j - 1].w, 0.0))
        } else {
            Ok(self.env.step(r)?.ln_weight(j - 1))
        }
    }

    /// `u_{r,j}` for the 1-based index `j`.
    pub fn point_resource(&self, r: usize, j: usize) -> Result<f64> {
        self.check_index(r, j)?;
        if r == 0 {
            Ok(self.initial[j - 1].u)
        } else {
            Ok(self.env.step(r)?.attrs()[j - 1].u)
        }
    }

    pub(crate) fn check_index(&self, r: usize, j: usize) -> Result<()> {
        if r > self.horizon() {
            return Err(Error::OutOfRange(format!(
                "generation {r} beyond horizon {}",
                self.horizon()
            )));
        }
        let k = self.k(r)?;
        if j == 0 || j > k {
            return Err(Error::OutOfRange(format!(
                "index {j} in generation {r} with {k} points"
            )));
        }
        Ok(())
    }
}
