//! Forward simulation of the growing point cloud.
//!
//! At step `n + 1` a mother `X*_n` is drawn among all existing points with
//! probability proportional to their weights, and the `k_{n+1}` daughters are
//! placed at `X*_n + Y_{n+1,l}`. A step with `k_{n+1} = 0` still draws (and
//! discards) a mother, so the random stream depends only on the step count.
//!
//! Points are addressed either by a flat index (0-based, insertion order) or
//! by `(generation, index)` with a 1-based `index` inside the generation.

mod backward;
mod enumerate;
mod genealogy;

use std::io::{self, Write};
use std::ops::Range;

use rand::Rng;

pub use backward::{backward_sample_mother, BackwardSampler};
pub use enumerate::{detect_lattice_scale, exact_enumerate, FiniteDiscreteDistribution};
pub use genealogy::{ancestor_probability, ancestry_mean, mother_count_expectation};

use crate::env::{validate_initial, Environment, InitialPoint, StepEnvironment};
use crate::error::{Error, Result};
use crate::numeric::{CompensatedSum, ScaledSum};
use crate::rng::SimRng;
use crate::wsampler::PrefixWeightIndex;

const NO_MOTHER: u32 = u32::MAX;
// Sampler weights are kept below exp(RESCALE_AT) relative to the offset.
const RESCALE_AT: f64 = 300.0;

/// One point of the process.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub generation: usize,
    /// 1-based position inside the generation.
    pub index: usize,
    pub x: Vec<f64>,
    pub w: f64,
    pub u: f64,
    /// `(generation, index)` of the mother; `None` for initial points.
    pub mother: Option<(usize, usize)>,
}

/// The simulated process after some number of steps.
#[derive(Debug, Clone)]
pub struct ProcessState {
    dim: usize,
    coords: Vec<f64>,
    generation: Vec<u32>,
    weight: Vec<f64>,
    resource: Vec<f64>,
    mother: Vec<u32>,
    gen_start: Vec<usize>,
    gen_log_scale: Vec<f64>,
    sampler: PrefixWeightIndex,
    sampler_offset: f64,
    big_w: ScaledSum,
    big_u: CompensatedSum,
    rng: SimRng,
    mother_counts: Option<Vec<u32>>,
    scratch: Vec<f64>,
}

impl ProcessState {
    /// Places the initial configuration as generation 0.
    pub fn new(initial: &[InitialPoint], rng: SimRng) -> Result<Self> {
        let dim = validate_initial(initial)?;
        let mut state = Self {
            dim,
            coords: Vec::with_capacity(initial.len() * dim),
            generation: Vec::new(),
            weight: Vec::new(),
            resource: Vec::new(),
            mother: Vec::new(),
            gen_start: vec![0],
            gen_log_scale: vec![0.0],
            sampler: PrefixWeightIndex::new(),
            sampler_offset: 0.0,
            big_w: ScaledSum::new(),
            big_u: CompensatedSum::new(),
            rng,
            mother_counts: None,
            scratch: Vec::new(),
        };
        for p in initial {
            state.coords.extend_from_slice(&p.x);
            state.push_meta(0, p.w, p.u, NO_MOTHER)?;
            state.big_w.add(p.w, 0.0);
            state.big_u.add(p.u);
        }
        Ok(state)
    }

    /// Enables per-point counters of how often each point was drawn as mother.
    pub fn with_mother_counts(mut self) -> Self {
        self.mother_counts = Some(vec![0; self.len()]);
        self
    }

    /// Reserves room for `additional` more points.
    pub fn reserve(&mut self, additional: usize) {
        self.coords.reserve(additional * self.dim);
        self.generation.reserve(additional);
        self.weight.reserve(additional);
        self.resource.reserve(additional);
        self.mother.reserve(additional);
    }

    fn push_meta(&mut self, generation: u32, w: f64, u: f64, mother: u32) -> Result<()> {
        let scale = (self.gen_log_scale[generation as usize] - self.sampler_offset).exp();
        self.sampler.append(w * scale)?;
        self.generation.push(generation);
        self.weight.push(w);
        self.resource.push(u);
        self.mother.push(mother);
        if let Some(c) = &mut self.mother_counts {
            c.push(0);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of completed steps.
    pub fn generation(&self) -> usize {
        self.gen_start.len() - 1
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.generation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `W_n` (may overflow for exponential weights; see [`Self::ln_total_weight`]).
    pub fn total_weight(&self) -> f64 {
        self.big_w.value()
    }

    pub fn ln_total_weight(&self) -> f64 {
        self.big_w.ln()
    }

    /// `U_n`.
    pub fn total_resource(&self) -> f64 {
        self.big_u.value()
    }

    pub fn rng_mut(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    pub fn location(&self, flat: usize) -> &[f64] {
        &self.coords[flat * self.dim..(flat + 1) * self.dim]
    }

    /// All coordinates, point after point.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn generation_of(&self, flat: usize) -> usize {
        self.generation[flat] as usize
    }

    pub fn mother_of(&self, flat: usize) -> Option<usize> {
        match self.mother[flat] {
            NO_MOTHER => None,
            m => Some(m as usize),
        }
    }

    /// Weight `w_{n,j}` of a point (may overflow).
    pub fn weight_of(&self, flat: usize) -> f64 {
        self.weight[flat] * self.gen_log_scale[self.generation[flat] as usize].exp()
    }

    pub fn resource_of(&self, flat: usize) -> f64 {
        self.resource[flat]
    }

    /// How often the point was drawn as a mother (if counting is enabled).
    pub fn mother_count(&self, flat: usize) -> Option<u32> {
        self.mother_counts.as_ref().map(|c| c[flat])
    }

    /// Flat indices of generation `n`.
    pub fn generation_range(&self, n: usize) -> Range<usize> {
        let start = self.gen_start[n];
        let end = self.gen_start.get(n + 1).copied().unwrap_or(self.len());
        start..end
    }

    /// Flat index of `(n, j)` with 1-based `j`.
    pub fn flat_index(&self, n: usize, j: usize) -> Result<usize> {
        if n > self.generation() {
            return Err(Error::OutOfRange(format!("generation {n}")));
        }
        let range = self.generation_range(n);
        if j == 0 || j > range.len() {
            return Err(Error::OutOfRange(format!("index {j} in generation {n}")));
        }
        Ok(range.start + j - 1)
    }

    /// `(generation, 1-based index)` of a flat index.
    pub fn label(&self, flat: usize) -> (usize, usize) {
        let g = self.generation_of(flat);
        (g, flat - self.gen_start[g] + 1)
    }

    pub fn point(&self, flat: usize) -> PointRecord {
        let (generation, index) = self.label(flat);
        PointRecord {
            generation,
            index,
            x: self.location(flat).to_vec(),
            w: self.weight_of(flat),
            u: self.resource_of(flat),
            mother: self.mother_of(flat).map(|m| self.label(m)),
        }
    }

    pub fn points(&self, range: Range<usize>) -> impl Iterator<Item = PointRecord> + '_ {
        range.map(|i| self.point(i))
    }

    /// Flat indices of the strict ancestors of a point, nearest first.
    pub fn ancestors(&self, flat: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.mother_of(flat), |&m| self.mother_of(m))
    }

    /// Draws a mother for the next step without advancing the process.
    pub fn select_mother(&mut self) -> Result<usize> {
        self.sampler.sample(&mut self.rng)
    }

    /// Performs one step and returns the flat indices of the new points.
    pub fn step(&mut self, env: &StepEnvironment) -> Result<Range<usize>> {
        if let Some(d) = env.dim() {
            if d != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: d,
                });
            }
        }
        let mother = self.sampler.sample(&mut self.rng)?;
        if let Some(c) = &mut self.mother_counts {
            c[mother] += 1;
        }
        let generation = self.generation() + 1;
        let start = self.len();
        self.gen_start.push(start);
        let ls = env.log_scale();
        self.gen_log_scale.push(ls);
        if ls - self.sampler_offset > RESCALE_AT {
            self.sampler.scale_all((self.sampler_offset - ls).exp());
            self.sampler_offset = ls;
        }

        if let Some(joint) = env.joint() {
            let d = self.dim;
            let k = env.k();
            self.scratch.resize(k * d, 0.0);
            joint.sample_into(&mut self.rng, &mut self.scratch);
            let base = mother * d;
            for l in 0..k {
                for c in 0..d {
                    let x = self.coords[base + c] + self.scratch[l * d + c];
                    self.coords.push(x);
                }
            }
            for a in env.attrs() {
                self.push_meta(generation as u32, a.w, a.u, mother as u32)?;
            }
        }
        self.big_w.add(env.weight_mantissa(), ls);
        self.big_u.add(env.resource_total());
        Ok(start..self.len())
    }

    /// Advances `n_steps` steps through `env`, starting after the current
    /// generation.
    pub fn run(&mut self, env: &Environment, n_steps: usize) -> Result<()> {
        self.run_with(env, n_steps, |_| {})
    }

    /// Like [`Self::run`], calling `observer` after every step.
    pub fn run_with<F: FnMut(&ProcessState)>(
        &mut self,
        env: &Environment,
        n_steps: usize,
        mut observer: F,
    ) -> Result<()> {
        let first = self.generation() + 1;
        let extra: usize = (first..first + n_steps)
            .map(|n| env.step(n).map(StepEnvironment::k))
            .sum::<Result<usize>>()?;
        self.reserve(extra);
        for n in first..first + n_steps {
            self.step(env.step(n)?)?;
            observer(self);
        }
        Ok(())
    }

    /// Checks the bookkeeping invariants of the state.
    pub fn check_invariants(&self) -> Result<()> {
        let broken = |msg: String| Err(Error::InvalidParameter(msg));
        if self.sampler.len() != self.len() {
            return broken("sampler count differs from point count".into());
        }
        let mut sum = ScaledSum::new();
        for i in 0..self.len() {
            sum.add(
                self.weight[i],
                self.gen_log_scale[self.generation[i] as usize],
            );
            if let Some(m) = self.mother_of(i) {
                if self.generation[m] >= self.generation[i] {
                    return broken(format!("point {i} has a mother from a later generation"));
                }
            } else if self.generation[i] != 0 {
                return broken(format!("point {i} has no mother"));
            }
        }
        let (a, b) = (sum.ln(), self.big_w.ln());
        if a.is_finite() && (a - b).abs() > 1e-9 {
            return broken(format!("W_n mismatch: {a} vs {b} (log scale)"));
        }
        Ok(())
    }

    /// Writes the point dump: `generation,index,x_0..x_{d-1},w,u,
    /// mother_generation,mother_index`, floats with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header = String::from("generation,index");
        for c in 0..self.dim {
            header.push_str(&format!(",x_{c}"));
        }
        header.push_str(",w,u,mother_generation,mother_index\n");
        out.write_all(header.as_bytes())?;
        for i in 0..self.len() {
            let (g, j) = self.label(i);
            let mut line = format!("{g},{j}");
            for x in self.location(i) {
                line.push_str(&format!(",{}", fmt_f64(*x)));
            }
            line.push_str(&format!(
                ",{},{}",
                fmt_f64(self.weight_of(i)),
                fmt_f64(self.resource_of(i))
            ));
            match self.mother_of(i).map(|m| self.label(m)) {
                Some((mg, mj)) => line.push_str(&format!(",{mg},{mj}\n")),
                None => line.push_str(",,\n"),
            }
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

/// Formats with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Draws `X*_n` by forward simulation: `n` steps from a fresh process, then
/// the mother of step `n + 1`.
pub fn forward_sample_mother(
    initial: &[InitialPoint],
    env: &Environment,
    n: usize,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    let seed: u64 = rng.random();
    let mut state = ProcessState::new(initial, crate::rng::rng_from_seed(seed))?;
    state.run(env, n)?;
    let m = state.select_mother()?;
    Ok(state.location(m).to_vec())
}
