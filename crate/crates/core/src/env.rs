//! Environment sequences: per-step offspring counts, `(w, u)` attributes and
//! joint displacement laws, together with the scalar series
//! `w_n, W_n, pi_n, u_n, U_n` derived from them.
//!
//! Weights of the exponential regime grow like `e^{S_n}` and leave the range
//! of `f64` after a few hundred steps, so every [`StepEnvironment`] stores its
//! weights as mantissas together with a common `log_scale`; the weight of
//! daughter `j` is `attrs[j].w * exp(log_scale)`. All ratios are formed in
//! log space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::displacement::{DisplacementLaw, DisplacementSpec, JointDisplacement};
use crate::error::{invalid, Error, Result};
use crate::numeric::{ln_scaled, CompensatedSum, ScaledSum};
use crate::rng::{derive_seed, rng_from_seed, SimRng};

/// Attributes of one daughter: weight mantissa and resource.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attr {
    pub w: f64,
    pub u: f64,
}

/// One generation of the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEnvironment {
    k: usize,
    attrs: Vec<Attr>,
    log_scale: f64,
    joint: Option<JointDisplacement>,
}

impl StepEnvironment {
    pub fn new(attrs: Vec<Attr>, log_scale: f64, joint: Option<JointDisplacement>) -> Result<Self> {
        let k = attrs.len();
        if attrs
            .iter()
            .any(|a| !(a.w >= 0.0 && a.u >= 0.0 && a.w.is_finite() && a.u.is_finite()))
        {
            return Err(invalid(
                "weights and resources must be finite and non-negative",
            ));
        }
        if !log_scale.is_finite() {
            return Err(invalid("weight log-scale must be finite"));
        }
        match (&joint, k) {
            (None, 0) => {}
            (Some(j), k) if j.k() == k && k > 0 => {}
            (None, _) => return Err(invalid("daughters present but no displacement law")),
            (Some(j), _) => {
                return Err(invalid(format!(
                    "joint law has {} marginals but step has {k} daughters",
                    j.k()
                )))
            }
        }
        Ok(Self {
            k,
            attrs,
            log_scale,
            joint,
        })
    }

    /// A step that adds no points.
    pub fn empty() -> Self {
        Self {
            k: 0,
            attrs: Vec::new(),
            log_scale: 0.0,
            joint: None,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn attrs(&self) -> &[Attr] {
        &self.attrs
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn joint(&self) -> Option<&JointDisplacement> {
        self.joint.as_ref()
    }

    pub fn dim(&self) -> Option<usize> {
        self.joint.as_ref().map(JointDisplacement::dim)
    }

    /// Weight of daughter `j`; may overflow to `inf` for huge scales.
    pub fn weight(&self, j: usize) -> f64 {
        self.attrs[j].w * self.log_scale.exp()
    }

    pub fn ln_weight(&self, j: usize) -> f64 {
        ln_scaled(self.attrs[j].w, self.log_scale)
    }

    /// `sum_j w_j` in units of `exp(log_scale)`.
    pub fn weight_mantissa(&self) -> f64 {
        self.attrs
            .iter()
            .map(|a| a.w)
            .collect::<CompensatedSum>()
            .value()
    }

    /// `w_n`.
    pub fn weight_total(&self) -> f64 {
        self.weight_mantissa() * self.log_scale.exp()
    }

    /// `ln w_n` (`-inf` when the step carries no weight).
    pub fn ln_weight_total(&self) -> f64 {
        ln_scaled(self.weight_mantissa(), self.log_scale)
    }

    /// `u_n`.
    pub fn resource_total(&self) -> f64 {
        self.attrs
            .iter()
            .map(|a| a.u)
            .collect::<CompensatedSum>()
            .value()
    }
}

/// A point of the initial configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPoint {
    pub x: Vec<f64>,
    pub w: f64,
    pub u: f64,
}

impl InitialPoint {
    pub fn new(x: Vec<f64>, w: f64, u: f64) -> Self {
        Self { x, w, u }
    }

    /// Point at the origin of `R^d` with unit weight and resource.
    pub fn origin(d: usize) -> Self {
        Self::new(vec![0.0; d], 1.0, 1.0)
    }
}

/// Validates an initial configuration and returns its dimension.
pub fn validate_initial(initial: &[InitialPoint]) -> Result<usize> {
    let first = initial
        .first()
        .ok_or_else(|| invalid("initial configuration is empty"))?;
    let d = first.x.len();
    if d == 0 {
        return Err(invalid("initial points must have dimension >= 1"));
    }
    for p in initial {
        if p.x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.x.len(),
            });
        }
        if p.x.iter().any(|x| !x.is_finite()) {
            return Err(invalid("initial locations must be finite"));
        }
        if !(p.w >= 0.0 && p.u >= 0.0 && p.w.is_finite() && p.u.is_finite()) {
            return Err(invalid(
                "initial weights and resources must be finite and non-negative",
            ));
        }
    }
    if !(initial.iter().map(|p| p.w).sum::<f64>() > 0.0) {
        return Err(Error::NoSelectablePoint);
    }
    Ok(d)
}

/// Generator of a real-valued sequence `(x_1, x_2, ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarGenerator {
    Constant {
        c: f64,
    },
    IidFiniteSupport {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
    Periodic {
        cycle: Vec<f64>,
    },
    /// Stationary two-state chain; `switch[s]` is the probability of leaving
    /// state `s`, and state `s` emits `values[s]`.
    TwoStateMarkov {
        switch: [f64; 2],
        values: [f64; 2],
    },
}

/// Generator of the `xi_n` factors (non-negative).
pub type XiGenerator = ScalarGenerator;
/// Generator of the `tau_n` increments of `S_n`.
pub type TauGenerator = ScalarGenerator;

impl ScalarGenerator {
    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            Self::Constant { c } if !c.is_finite() => Err(invalid("constant must be finite")),
            Self::Constant { .. } => Ok(()),
            Self::IidFiniteSupport { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(invalid(
                        "values and probs must be non-empty and equally long",
                    ));
                }
                if !finite(values) || probs.iter().any(|p| !(*p >= 0.0)) {
                    return Err(invalid("invalid i.i.d. generator parameters"));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(invalid(format!("probabilities sum to {total}, not 1")));
                }
                Ok(())
            }
            Self::Periodic { cycle } if cycle.is_empty() || !finite(cycle) => {
                Err(invalid("periodic cycle must be non-empty and finite"))
            }
            Self::Periodic { .. } => Ok(()),
            Self::TwoStateMarkov { switch, values } => {
                if !finite(values) || switch.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(invalid("invalid Markov generator parameters"));
                }
                if switch[0] + switch[1] <= 0.0 {
                    return Err(invalid("Markov chain must be able to switch states"));
                }
                Ok(())
            }
        }
    }

    /// Rejects generators that can emit negative values.
    pub fn validate_nonnegative(&self) -> Result<()> {
        self.validate()?;
        let neg = match self {
            Self::Constant { c } => *c < 0.0,
            Self::IidFiniteSupport { values, probs } => {
                values.iter().zip(probs).any(|(v, p)| *v < 0.0 && *p > 0.0)
            }
            Self::Periodic { cycle } => cycle.iter().any(|v| *v < 0.0),
            Self::TwoStateMarkov { values, .. } => values.iter().any(|v| *v < 0.0),
        };
        if neg {
            return Err(invalid("xi values must be non-negative"));
        }
        Ok(())
    }

    /// Mean under the stationary law (the cycle average for periodic input).
    pub fn stationary_mean(&self) -> f64 {
        match self {
            Self::Constant { c } => *c,
            Self::IidFiniteSupport { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| v * p).sum()
            }
            Self::Periodic { cycle } => cycle.iter().sum::<f64>() / cycle.len() as f64,
            Self::TwoStateMarkov { switch, values } => {
                let p1 = switch[0] / (switch[0] + switch[1]);
                (1.0 - p1) * values[0] + p1 * values[1]
            }
        }
    }

    /// The first `n` values `x_1, ..., x_n`.
    pub fn generate(&self, n: usize, rng: &mut SimRng) -> Vec<f64> {
        match self {
            Self::Constant { c } => vec![*c; n],
            Self::IidFiniteSupport { values, probs } => {
                let cum: Vec<f64> = probs
                    .iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect();
                (0..n)
                    .map(|_| {
                        let u = rng.random::<f64>() * cum[cum.len() - 1];
                        values[cum.partition_point(|&c| c <= u).min(values.len() - 1)]
                    })
                    .collect()
            }
            Self::Periodic { cycle } => (0..n).map(|i| cycle[i % cycle.len()]).collect(),
            Self::TwoStateMarkov { switch, values } => {
                let p1 = switch[0] / (switch[0] + switch[1]);
                let mut state = usize::from(rng.random::<f64>() < p1);
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    out.push(values[state]);
                    if rng.random::<f64>() < switch[state] {
                        state = 1 - state;
                    }
                }
                out
            }
        }
    }
}

/// Slowly varying factor of the power-law regime.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SlowlyVarying {
    #[default]
    One,
    /// `(ln(n + e))^beta`.
    LogPower { beta: f64 },
}

impl SlowlyVarying {
    pub fn eval(&self, n: f64) -> f64 {
        match self {
            Self::One => 1.0,
            Self::LogPower { beta } => (n + std::f64::consts::E).ln().powf(*beta),
        }
    }
}

/// Explicit per-daughter attributes of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitStep {
    pub weights: Vec<f64>,
    #[serde(default)]
    pub resources: Option<Vec<f64>>,
}

/// How the generation weights `w_n` are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightRegime {
    Explicit {
        steps: Vec<ExplicitStep>,
    },
    /// `w_n = xi_n n^alpha L(n)`.
    PowerLaw {
        xi: XiGenerator,
        alpha: f64,
        #[serde(default)]
        slowly_varying: SlowlyVarying,
    },
    /// `w_n = xi_n exp(tau_1 + ... + tau_n)`.
    Exponential {
        xi: XiGenerator,
        tau: TauGenerator,
    },
}

impl WeightRegime {
    /// `w_n = n^alpha` (constant `xi = 1`, `L = 1`).
    pub fn power_law(alpha: f64) -> Self {
        Self::PowerLaw {
            xi: ScalarGenerator::Constant { c: 1.0 },
            alpha,
            slowly_varying: SlowlyVarying::One,
        }
    }

    /// `w_n = e^{n tau}` (constant `xi = 1` and `tau`).
    pub fn exponential(tau: f64) -> Self {
        Self::Exponential {
            xi: ScalarGenerator::Constant { c: 1.0 },
            tau: ScalarGenerator::Constant { c: tau },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Explicit { steps } => {
                for s in steps {
                    if s.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
                        return Err(invalid("explicit weights must be finite and non-negative"));
                    }
                    if let Some(r) = &s.resources {
                        if r.len() != s.weights.len() {
                            return Err(invalid("explicit resources must match weights"));
                        }
                    }
                }
                Ok(())
            }
            Self::PowerLaw {
                xi,
                alpha,
                slowly_varying,
            } => {
                xi.validate_nonnegative()?;
                if !(*alpha > -1.0) || !alpha.is_finite() {
                    return Err(invalid(format!(
                        "power-law exponent must exceed -1, got {alpha}"
                    )));
                }
                if let SlowlyVarying::LogPower { beta } = slowly_varying {
                    if !beta.is_finite() {
                        return Err(invalid("slowly varying exponent must be finite"));
                    }
                }
                Ok(())
            }
            Self::Exponential { xi, tau } => {
                xi.validate_nonnegative()?;
                tau.validate()
            }
        }
    }
}

/// Offspring counts `k_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OffspringSpec {
    Constant { k: usize },
    IidFiniteSupport { values: Vec<usize>, probs: Vec<f64> },
}

impl Default for OffspringSpec {
    fn default() -> Self {
        Self::Constant { k: 1 }
    }
}

/// Resources `u_{n,j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResourceSpec {
    /// Every daughter carries `value`.
    Constant { value: f64 },
    /// `u_{n,j} = w_{n,j}`.
    Weight,
    /// Step total `u_n = c n^gamma`, split equally.
    PowerLaw { c: f64, gamma: f64 },
}

impl Default for ResourceSpec {
    fn default() -> Self {
        Self::Constant { value: 1.0 }
    }
}

/// Everything needed to materialize an environment sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub regime: WeightRegime,
    #[serde(default)]
    pub offspring: OffspringSpec,
    #[serde(default)]
    pub resource: ResourceSpec,
    pub displacement: DisplacementSpec,
}

impl EnvironmentSpec {
    /// Spec with one daughter per step, unit resources and i.i.d.
    /// displacements drawn from `law`.
    pub fn new(regime: WeightRegime, law: DisplacementLaw) -> Self {
        Self {
            regime,
            offspring: OffspringSpec::default(),
            resource: ResourceSpec::default(),
            displacement: DisplacementSpec::Iid { law },
        }
    }

    pub fn with_offspring(mut self, k: usize) -> Self {
        self.offspring = OffspringSpec::Constant { k };
        self
    }

    pub fn with_resource(mut self, resource: ResourceSpec) -> Self {
        self.resource = resource;
        self
    }

    pub fn with_displacement(mut self, displacement: DisplacementSpec) -> Self {
        self.displacement = displacement;
        self
    }
}

/// Materialized environment sequence for steps `1..=len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    dim: usize,
    steps: Vec<StepEnvironment>,
}

impl Environment {
    pub fn new(dim: usize, steps: Vec<StepEnvironment>) -> Result<Self> {
        for s in &steps {
            if let Some(d) = s.dim() {
                if d != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: d,
                    });
                }
            }
        }
        Ok(Self { dim, steps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of materialized steps.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Environment of step `n >= 1`.
    pub fn step(&self, n: usize) -> Result<&StepEnvironment> {
        n.checked_sub(1)
            .and_then(|i| self.steps.get(i))
            .ok_or_else(|| Error::OutOfRange(format!("step {n} of {}", self.steps.len())))
    }

    pub fn steps(&self) -> &[StepEnvironment] {
        &self.steps
    }

    /// The first `n` steps.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            dim: self.dim,
            steps: self.steps[..n.min(self.steps.len())].to_vec(),
        }
    }
}

fn equal_split(total_mantissa: f64, k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        total_mantissa / k as f64
    }
}

impl EnvironmentSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        self.regime.validate()?;
        let dd = self.displacement.dim()?;
        if dd != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: dd,
            });
        }
        match &self.offspring {
            OffspringSpec::Constant { .. } => {}
            OffspringSpec::IidFiniteSupport { values, probs } => {
                ScalarGenerator::IidFiniteSupport {
                    values: values.iter().map(|&v| v as f64).collect(),
                    probs: probs.clone(),
                }
                .validate()?;
            }
        }
        match &self.resource {
            ResourceSpec::Constant { value } if !(*value >= 0.0 && value.is_finite()) => {
                Err(invalid("resource must be finite and non-negative"))
            }
            ResourceSpec::PowerLaw { c, gamma }
                if !(*c >= 0.0 && c.is_finite() && gamma.is_finite()) =>
            {
                Err(invalid("resource power law needs finite c >= 0"))
            }
            _ => Ok(()),
        }
    }

    /// Realizes steps `1..=n_steps`. The output depends only on
    /// `(self, n_steps, seed)`.
    pub fn materialize(&self, n_steps: usize, seed: u64, d: usize) -> Result<Environment> {
        if n_steps == 0 {
            return Err(invalid("n_steps must be at least 1"));
        }
        self.validate(d)?;
        let (xis, taus) = self.regime_draws(n_steps, seed);
        let mut k_rng = rng_from_seed(derive_seed(seed, 2));

        // (k_n, per-daughter weight mantissas, log scale)
        let shapes: Vec<(Vec<f64>, f64)> = match &self.regime {
            WeightRegime::Explicit { steps } => {
                if steps.len() < n_steps {
                    return Err(invalid(format!(
                        "explicit regime lists {} steps, {n_steps} requested",
                        steps.len()
                    )));
                }
                steps[..n_steps]
                    .iter()
                    .map(|s| (s.weights.clone(), 0.0))
                    .collect()
            }
            WeightRegime::PowerLaw {
                alpha,
                slowly_varying,
                ..
            } => {
                let ks = self.offspring_counts(n_steps, &mut k_rng);
                ks.iter()
                    .zip(&xis)
                    .enumerate()
                    .map(|(i, (&k, &x))| {
                        let n = (i + 1) as f64;
                        let total = x * n.powf(*alpha) * slowly_varying.eval(n);
                        (vec![equal_split(total, k); k], 0.0)
                    })
                    .collect()
            }
            WeightRegime::Exponential { .. } => {
                let ks = self.offspring_counts(n_steps, &mut k_rng);
                let mut s = CompensatedSum::new();
                ks.iter()
                    .zip(xis.iter().zip(&taus))
                    .map(|(&k, (&x, &t))| {
                        s.add(t);
                        (vec![equal_split(x, k); k], s.value())
                    })
                    .collect()
            }
        };

        let factory = self.displacement.factory();
        let mut steps = Vec::with_capacity(n_steps);
        for (i, (weights, log_scale)) in shapes.into_iter().enumerate() {
            let n = i + 1;
            let k = weights.len();
            let explicit_u = match &self.regime {
                WeightRegime::Explicit { steps } => steps[i].resources.clone(),
                _ => None,
            };
            let us: Vec<f64> = match explicit_u {
                Some(u) => u,
                None => match &self.resource {
                    ResourceSpec::Constant { value } => vec![*value; k],
                    ResourceSpec::Weight => {
                        let scale = log_scale.exp();
                        weights.iter().map(|w| w * scale).collect()
                    }
                    ResourceSpec::PowerLaw { c, gamma } => {
                        vec![equal_split(c * (n as f64).powf(*gamma), k); k]
                    }
                },
            };
            if us.iter().any(|u| !u.is_finite()) {
                return Err(invalid(format!("resource overflow at step {n}")));
            }
            let attrs = weights
                .into_iter()
                .zip(us)
                .map(|(w, u)| Attr { w, u })
                .collect();
            steps.push(StepEnvironment::new(attrs, log_scale, factory.joint(k)?)?);
        }
        Environment::new(d, steps)
    }

    /// The `(xi_n, tau_n)` draws for `n = 1..=n_steps` behind
    /// [`materialize`](Self::materialize) with the same seed. Sequences a
    /// regime does not use are empty.
    pub fn regime_draws(&self, n_steps: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut xi_rng = rng_from_seed(derive_seed(seed, 0));
        let mut tau_rng = rng_from_seed(derive_seed(seed, 1));
        match &self.regime {
            WeightRegime::Explicit { .. } => (Vec::new(), Vec::new()),
            WeightRegime::PowerLaw { xi, .. } => (xi.generate(n_steps, &mut xi_rng), Vec::new()),
            WeightRegime::Exponential { xi, tau } => (
                xi.generate(n_steps, &mut xi_rng),
                tau.generate(n_steps, &mut tau_rng),
            ),
        }
    }

    fn offspring_counts(&self, n: usize, rng: &mut SimRng) -> Vec<usize> {
        match &self.offspring {
            OffspringSpec::Constant { k } => vec![*k; n],
            OffspringSpec::IidFiniteSupport { values, probs } => {
                ScalarGenerator::IidFiniteSupport {
                    values: values.iter().map(|&v| v as f64).collect(),
                    probs: probs.clone(),
                }
                .generate(n, rng)
                .into_iter()
                .map(|v| v as usize)
                .collect()
            }
        }
    }
}

/// The series `w_n, W_n, pi_n, u_n, U_n` for `n = 0..=horizon`.
///
/// Weights are held as natural logarithms; `pi_n = w_n / W_n` is formed in
/// log space, and `W_n`, `U_n` are accumulated with compensated summation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSeries {
    ln_w: Vec<f64>,
    ln_big_w: Vec<f64>,
    pi: Vec<f64>,
    u: Vec<f64>,
    big_u: Vec<f64>,
}

impl ScalarSeries {
    pub fn new(env: &Environment, initial: &[InitialPoint]) -> Result<Self> {
        validate_initial(initial)?;
        let n = env.len();
        let mut series = Self {
            ln_w: Vec::with_capacity(n + 1),
            ln_big_w: Vec::with_capacity(n + 1),
            pi: Vec::with_capacity(n + 1),
            u: Vec::with_capacity(n + 1),
            big_u: Vec::with_capacity(n + 1),
        };
        let mut big_w = ScaledSum::new();
        let mut big_u = CompensatedSum::new();

        let w0: CompensatedSum = initial.iter().map(|p| p.w).collect();
        let u0: CompensatedSum = initial.iter().map(|p| p.u).collect();
        series.push(
            ln_scaled(w0.value(), 0.0),
            u0.value(),
            &mut big_w,
            &mut big_u,
        );
        for s in env.steps() {
            series.push(
                s.ln_weight_total(),
                s.resource_total(),
                &mut big_w,
                &mut big_u,
            );
        }
        Ok(series)
    }

    fn push(&mut self, ln_w: f64, u: f64, big_w: &mut ScaledSum, big_u: &mut CompensatedSum) {
        if ln_w > f64::NEG_INFINITY {
            big_w.add(1.0, ln_w);
        }
        big_u.add(u);
        let ln_big_w = big_w.ln();
        self.ln_w.push(ln_w);
        self.ln_big_w.push(ln_big_w);
        self.pi.push(if ln_w == f64::NEG_INFINITY {
            0.0
        } else {
            (ln_w - ln_big_w).exp().min(1.0)
        });
        self.u.push(u);
        self.big_u.push(big_u.value());
    }

    /// Largest available index `n`.
    pub fn horizon(&self) -> usize {
        self.pi.len() - 1
    }

    pub fn pi(&self, n: usize) -> f64 {
        self.pi[n]
    }

    pub fn pis(&self) -> &[f64] {
        &self.pi
    }

    pub fn ln_w(&self, n: usize) -> f64 {
        self.ln_w[n]
    }

    pub fn ln_big_w(&self, n: usize) -> f64 {
        self.ln_big_w[n]
    }

    /// `w_n` (may overflow).
    pub fn w(&self, n: usize) -> f64 {
        self.ln_w[n].exp()
    }

    /// `W_n` (may overflow).
    pub fn big_w(&self, n: usize) -> f64 {
        self.ln_big_w[n].exp()
    }

    pub fn u(&self, n: usize) -> f64 {
        self.u[n]
    }

    pub fn us(&self) -> &[f64] {
        &self.u
    }

    pub fn big_u(&self, n: usize) -> f64 {
        self.big_u[n]
    }
}

/// Convenience wrapper for [`ScalarSeries::new`].
pub fn scalar_series(env: &Environment, initial: &[InitialPoint]) -> Result<ScalarSeries> {
    ScalarSeries::new(env, initial)
}

/// Ratios `U_{floor(eps n)} / U_n` for each `eps`, where `u[r]` is `u_r`.
/// Diagnostic for the condition that early resources become negligible.
pub fn check_uep(u: &[f64], n: usize, eps_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if n < 10 || n >= u.len() {
        return Err(invalid(format!(
            "need 10 <= n < {} for the resource table, got {n}",
            u.len()
        )));
    }
    if let Some(e) = eps_grid.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(invalid(format!("eps must lie in (0, 1), got {e}")));
    }
    let mut partial = Vec::with_capacity(n + 1);
    let mut acc = CompensatedSum::new();
    for &x in &u[..=n] {
        acc.add(x);
        partial.push(acc.value());
    }
    let total = partial[n];
    if !(total > 0.0) {
        return Err(invalid("U_n must be positive"));
    }
    Ok(eps_grid
        .iter()
        .map(|&e| {
            let m = (e * n as f64).floor() as usize;
            (e, (partial[m] / total).clamp(0.0, 1.0))
        })
        .collect())
}
