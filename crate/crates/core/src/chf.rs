//! Characteristic functions of the point locations, of the mother point,
//! of the mean measure `M_n` and of its limit.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::displacement::{JointDisplacement, Law};
use crate::env::StepEnvironment;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::process::fmt_f64;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `f_r(t)`: ch.f. of the w-weighted generation-`r` mixture (the initial
/// locations for `r = 0`). Generations without weight give 1.
pub fn generation_chf(model: &Model, r: usize, t: &[f64]) -> Complex64 {
    model.generation_law(r).map_or(ONE, |law| law.chf(t))
}

/// Running product `Phi_r = prod_{s<=r} (1 + pi_s (f_s - 1))`.
///
/// The product is kept as a mantissa and a log-modulus so long runs whose
/// modulus decays toward zero do not lose precision to subnormals.
struct PhiRunner {
    z: Complex64,
    ln_scale: f64,
    steps: usize,
}

impl PhiRunner {
    fn new() -> Self {
        Self {
            z: ONE,
            ln_scale: 0.0,
            steps: 0,
        }
    }

    fn push(&mut self, pi: f64, f: Complex64) {
        self.z *= ONE + pi * (f - ONE);
        self.steps += 1;
        if self.steps % 64 == 0 {
            let norm = self.z.norm();
            if norm > 0.0 && norm < 1e-100 {
                self.ln_scale += norm.ln();
                self.z /= norm;
            }
        }
    }

    fn value(&self) -> Complex64 {
        if self.ln_scale == 0.0 {
            self.z
        } else {
            self.z * self.ln_scale.exp()
        }
    }
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

/// `Phi_n(t) = prod_{r=0}^n (1 + pi_r (f_r(t) - 1))`, the ch.f. of the mother
/// point chosen at step `n + 1`.
pub fn phi_product(model: &Model, n: usize, t: &[f64]) -> Result<Complex64> {
    check_horizon(model, n)?;
    let series = model.series();
    let mut phi = PhiRunner::new();
    for r in 0..=n {
        phi.push(series.pi(r), generation_chf(model, r, t));
    }
    Ok(phi.value())
}

/// Ch.f. of `X_{n,j}` (1-based `j`): `f_{n,j}(t) Phi_{n-1}(t)`; for `n = 0`
/// the plane wave of the initial location.
pub fn phi_point(model: &Model, n: usize, j: usize, t: &[f64]) -> Result<Complex64> {
    model.check_index(n, j)?;
    if n == 0 {
        return Ok(plane_wave(&model.initial()[j - 1].x, t));
    }
    let step = model.env().step(n)?;
    let f = step.joint().expect("j <= k_n").marginal(j - 1).chf(t);
    Ok(f * phi_product(model, n - 1, t)?)
}

fn plane_wave(x: &[f64], t: &[f64]) -> Complex64 {
    let phase: f64 = x.iter().zip(t).map(|(a, b)| a * b).sum();
    Complex64::from_polar(1.0, phase)
}

/// `sum_j u_{n,j} f_{n,j}(t)` for one step.
fn step_resource_chf(step: &StepEnvironment, t: &[f64]) -> Complex64 {
    match step.joint() {
        None => Complex64::new(0.0, 0.0),
        Some(JointDisplacement::Iid { law, .. } | JointDisplacement::CommonCopy { law, .. }) => {
            law.chf(t) * step.resource_total()
        }
        Some(JointDisplacement::ProductList(laws)) => laws
            .iter()
            .zip(step.attrs())
            .map(|(law, a)| a.u * law.chf(t))
            .sum(),
    }
}

/// Ch.f. of the mean measure `M_n`: the u-weighted average of the point
/// ch.f.s over generations `0..=n`.
pub fn mean_measure_chf(model: &Model, n: usize, t: &[f64]) -> Result<Complex64> {
    check_horizon(model, n)?;
    let series = model.series();
    let big_u = series.big_u(n);
    if !(big_u > 0.0) {
        return Err(Error::Degenerate("U_n = 0".into()));
    }
    let mut acc: Complex64 = model
        .initial()
        .iter()
        .map(|p| p.u * plane_wave(&p.x, t))
        .sum();
    let mut phi = PhiRunner::new();
    phi.push(1.0, generation_chf(model, 0, t));
    for r in 1..=n {
        let step = model.env().step(r)?;
        acc += step_resource_chf(step, t) * phi.value();
        phi.push(series.pi(r), generation_chf(model, r, t));
    }
    Ok(acc / big_u)
}

/// Truncated infinite product with a bound on the truncation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedProduct {
    pub value: Complex64,
    pub error_bound: f64,
    /// Last factor index included.
    pub truncation: usize,
    /// Estimated `sum_{r > truncation} pi_r`.
    pub tail: f64,
}

/// Geometric extrapolation of `sum_{r > N} pi_r` from the last ratios.
fn pi_tail(pis: &[f64]) -> Option<f64> {
    let n = pis.len() - 1;
    if pis[n] == 0.0 {
        return Some(0.0);
    }
    let window = n.min(10);
    let mut q: f64 = 0.0;
    for r in n + 1 - window..=n {
        if pis[r - 1] > 0.0 {
            q = q.max(pis[r] / pis[r - 1]);
        }
    }
    (window > 0 && q < 1.0).then(|| pis[n] * q / (1.0 - q))
}

/// The infinite product `Pi(t) = prod_r (1 + pi_r (f_r(t) - 1))`, truncated at
/// the model horizon. Fails with [`Error::NotSummable`] when the
/// extrapolated tail `sum_{r > N} pi_r` is not below `tail_tol`.
pub fn big_pi(model: &Model, t: &[f64], tail_tol: f64) -> Result<TruncatedProduct> {
    let horizon = model.horizon();
    let tail = pi_tail(model.series().pis())
        .filter(|tail| *tail < tail_tol)
        .ok_or_else(|| {
            Error::NotSummable(format!(
                "pi tail after {horizon} steps does not fall below {tail_tol}"
            ))
        })?;
    let value = phi_product(model, horizon, t)?;
    let error_bound = if t.iter().all(|x| *x == 0.0) {
        0.0
    } else {
        2.0 * tail
    };
    Ok(TruncatedProduct {
        value,
        error_bound,
        truncation: horizon,
        tail,
    })
}

/// u-weighted average of `f_{r,j}(t)` over generations in `(lo, hi]`.
fn window_average(model: &Model, lo: usize, hi: usize, t: &[f64]) -> Result<Option<Complex64>> {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut mass = 0.0;
    for r in lo + 1..=hi {
        let step = model.env().step(r)?;
        acc += step_resource_chf(step, t);
        mass += step.resource_total();
    }
    Ok((mass > 0.0).then(|| acc / mass))
}

/// Estimate of the u-summable limit of `f_{r,j}(t)`: the u-weighted average
/// over the last decade of steps `(H/10, H]`, accepted when it differs from
/// the preceding decade's average by at most `tol` (relative, floored at 1).
pub fn u_limit_chf(model: &Model, t: &[f64], tol: f64) -> Result<Complex64> {
    let h = model.horizon();
    if h < 100 {
        return Err(Error::NotStabilized {
            change: f64::INFINITY,
            tolerance: tol,
        });
    }
    let degenerate = || Error::Degenerate("no resource in the averaging window".into());
    let last = window_average(model, h / 10, h, t)?.ok_or_else(degenerate)?;
    let prev = window_average(model, h / 100, h / 10, t)?.ok_or_else(degenerate)?;
    let change = (last - prev).norm() / last.norm().max(1.0);
    if change > tol {
        return Err(Error::NotStabilized {
            change,
            tolerance: tol,
        });
    }
    Ok(last)
}

/// Ch.f. of the limit of `M_n` when the weights are summable:
/// `Pi(t)` times the u-summable limit of `f_{r,j}(t)`.
pub fn thm1_limit_chf(model: &Model, t: &[f64], tail_tol: f64, stab_tol: f64) -> Result<Complex64> {
    let product = big_pi(model, t, tail_tol)?;
    Ok(product.value * u_limit_chf(model, t, stab_tol)?)
}

/// `sum_i w_i exp(i t.x_i) / sum_i w_i`; exactly 1 at `t = 0`.
pub fn empirical_chf<'a>(
    points: impl IntoIterator<Item = (&'a [f64], f64)>,
    t: &[f64],
) -> Result<Complex64> {
    let (mut re, mut im, mut total) = (0.0, 0.0, 0.0);
    for (x, w) in points {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad weight {w}")));
        }
        let phase: f64 = x.iter().zip(t).map(|(a, b)| a * b).sum();
        let (s, c) = phase.sin_cos();
        re += w * c;
        im += w * s;
        total += w;
    }
    if !(total > 0.0) {
        return Err(Error::Degenerate("zero total weight".into()));
    }
    Ok(Complex64::new(re / total, im / total))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChfKind {
    Analytic,
    Empirical,
}

/// Ch.f. values on a set of evaluation points.
#[derive(Debug, Clone, PartialEq)]
pub struct ChfGrid {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<Complex64>,
    pub kind: ChfKind,
}

/// `count` points per coordinate axis spread evenly over `[lo, hi]`, other
/// coordinates zero.
pub fn axis_grid(dim: usize, count: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let step = if count > 1 {
        (hi - lo) / (count - 1) as f64
    } else {
        0.0
    };
    (0..dim)
        .flat_map(|axis| {
            (0..count).map(move |i| {
                let mut t = vec![0.0; dim];
                t[axis] = lo + step * i as f64;
                t
            })
        })
        .collect()
}

/// 25 points per axis on `[-3, 3]`.
pub fn default_grid(dim: usize) -> Vec<Vec<f64>> {
    axis_grid(dim, 25, -3.0, 3.0)
}

impl ChfGrid {
    /// Evaluates `f` at every point in parallel.
    pub fn evaluate<F>(points: Vec<Vec<f64>>, kind: ChfKind, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<Complex64> + Sync,
    {
        let values = points
            .par_iter()
            .map(|t| f(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            points,
            values,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest pointwise modulus of the difference to `other`.
    pub fn max_abs_diff(&self, other: &ChfGrid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Writes the ch.f. comparison table: `t_0..t_{d-1}, analytic_re,
/// analytic_im, empirical_re, empirical_im, abs_diff, mc_band`.
pub fn write_comparison_csv<W: Write>(
    mut out: W,
    analytic: &ChfGrid,
    empirical: &ChfGrid,
    band: &[f64],
) -> io::Result<()> {
    let d = analytic.points.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (0..d).map(|i| format!("t_{i}")).collect();
    header.extend(
        [
            "analytic_re",
            "analytic_im",
            "empirical_re",
            "empirical_im",
            "abs_diff",
            "mc_band",
        ]
        .map(String::from),
    );
    writeln!(out, "{}", header.join(","))?;
    for (i, t) in analytic.points.iter().enumerate() {
        let a = analytic.values[i];
        let e = empirical.values[i];
        let mut row: Vec<String> = t.iter().map(|x| fmt_f64(*x)).collect();
        row.extend(
            [
                a.re,
                a.im,
                e.re,
                e.im,
                (a - e).norm(),
                band.get(i).copied().unwrap_or(f64::NAN),
            ]
            .map(fmt_f64),
        );
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::displacement::{DisplacementLaw, DisplacementSpec};
    use crate::env::{
        EnvironmentSpec, InitialPoint, OffspringSpec, ResourceSpec, ScalarGenerator, WeightRegime,
    };
    use crate::process::exact_enumerate;
    use nalgebra::DMatrix;
    use std::f64::consts::LN_2;

    fn model_with(regime: WeightRegime, law: DisplacementLaw, k: usize, n: usize) -> Model {
        let d = law.dim();
        let spec = EnvironmentSpec {
            regime,
            offspring: OffspringSpec::Constant { k },
            resource: ResourceSpec::default(),
            displacement: DisplacementSpec::Iid { law },
        };
        Model::new(
            vec![InitialPoint::new(vec![0.0; d], 1.0, 1.0)],
            spec.materialize(n, 5, d).unwrap(),
        )
        .unwrap()
    }

    fn flat() -> WeightRegime {
        WeightRegime::PowerLaw {
            xi: ScalarGenerator::Constant { c: 1.0 },
            alpha: 0.0,
            slowly_varying: Default::default(),
        }
    }

    fn halving() -> WeightRegime {
        WeightRegime::Exponential {
            xi: ScalarGenerator::Constant { c: 1.0 },
            tau: ScalarGenerator::Constant { c: -LN_2 },
        }
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn products_at_zero_are_one() {
        let m = model_with(flat(), DisplacementLaw::rademacher(), 2, 20);
        assert_eq!(phi_product(&m, 20, &[0.0]).unwrap(), ONE);
        assert_eq!(phi_point(&m, 7, 2, &[0.0]).unwrap(), ONE);
        assert_eq!(mean_measure_chf(&m, 20, &[0.0]).unwrap(), ONE);
        assert_eq!(phi_product(&m, 0, &[1.3]).unwrap(), ONE);
    }

    #[test]
    fn point_mass_plug_in() {
        let c = 0.7;
        let m = model_with(flat(), DisplacementLaw::point_mass(vec![c]).unwrap(), 1, 12);
        let t = 1.9;
        let e = Complex64::from_polar(1.0, t * c);
        let mut expected = e;
        for r in 1..=8 {
            expected *= ONE + (e - ONE) / (r as f64 + 1.0);
        }
        let got = phi_point(&m, 9, 1, &[t]).unwrap();
        assert!(close(got, expected, 1e-14), "{got} vs {expected}");
        assert!(got.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn matches_enumeration_oracle() {
        let law =
            DisplacementLaw::discrete(vec![vec![-1.0], vec![0.5], vec![2.0]], vec![0.3, 0.5, 0.2])
                .unwrap();
        let m = model_with(flat(), law, 2, 4);
        for n in 1..=4 {
            let exact = exact_enumerate(&m, n, 2, 10_000_000).unwrap();
            for t in default_grid(1) {
                let a = phi_point(&m, n, 2, &t).unwrap();
                assert!(close(a, exact.chf(&t), 1e-10), "n={n} t={t:?}");
            }
        }
    }

    #[test]
    fn mean_measure_matches_enumerated_mixture() {
        let m = model_with(flat(), DisplacementLaw::rademacher(), 1, 3);
        let n = 3;
        let laws: Vec<_> = (0..=n)
            .map(|r| exact_enumerate(&m, r, 1, 100_000).unwrap())
            .collect();
        for t in default_grid(1) {
            // u = 1 per point, one point per generation
            let expected: Complex64 = laws.iter().map(|l| l.chf(&t)).sum::<Complex64>() / 4.0;
            assert!(close(mean_measure_chf(&m, n, &t).unwrap(), expected, 1e-12));
        }
    }

    #[test]
    fn recursion_and_symmetry() {
        let m = model_with(
            flat(),
            DisplacementLaw::gaussian(
                vec![0.3, -1.0],
                DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]),
            )
            .unwrap(),
            3,
            50,
        );
        for (i, t) in [[0.4, -1.1], [2.0, 0.5], [-3.0, 3.0]].iter().enumerate() {
            let n = 10 + 13 * i;
            let prev = phi_product(&m, n - 1, t).unwrap();
            let step = ONE + m.series().pi(n) * (generation_chf(&m, n, t) - ONE);
            assert!(close(phi_product(&m, n, t).unwrap(), prev * step, 1e-12));
            let neg: Vec<f64> = t.iter().map(|x| -x).collect();
            let a = phi_product(&m, n, t).unwrap();
            assert!(close(a.conj(), phi_product(&m, n, &neg).unwrap(), 1e-14));
            assert!(a.norm() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn big_pi_geometric_weights() {
        let t = [1.0];
        let m = model_with(halving(), DisplacementLaw::rademacher(), 1, 200);
        let got = big_pi(&m, &t, 1e-12).unwrap();
        // independent oracle: pi_r = 2^-r / (2 - 2^-r), f_r = cos t, f_0 = 1
        let c = t[0].cos();
        let mut oracle = 1.0;
        for r in 1..=200 {
            let p = 0.5f64.powi(r) / (2.0 - 0.5f64.powi(r));
            oracle *= 1.0 + p * (c - 1.0);
        }
        assert!((got.value.re - oracle).abs() < 1e-14 && got.value.im.abs() < 1e-15);
        assert!(got.error_bound < 1e-50);

        let short = model_with(halving(), DisplacementLaw::rademacher(), 1, 30);
        let s = big_pi(&short, &t, 1e-6).unwrap();
        assert!((s.value - got.value).norm() <= s.error_bound);

        let zero = big_pi(&m, &[0.0], 1e-12).unwrap();
        assert_eq!((zero.value, zero.error_bound), (ONE, 0.0));
        let still = model_with(
            halving(),
            DisplacementLaw::point_mass(vec![0.0]).unwrap(),
            1,
            50,
        );
        assert!(close(
            big_pi(&still, &[2.0], 1e-9).unwrap().value,
            ONE,
            1e-15
        ));
    }

    #[test]
    fn big_pi_rejects_divergent_weights() {
        let m = model_with(flat(), DisplacementLaw::rademacher(), 1, 500);
        assert!(matches!(
            big_pi(&m, &[1.0], 1e-6),
            Err(Error::NotSummable(_))
        ));
    }

    #[test]
    fn limit_with_constant_law() {
        let law = DisplacementLaw::gaussian(vec![0.5], DMatrix::identity(1, 1)).unwrap();
        let m = model_with(halving(), law.clone(), 1, 300);
        for t in [[0.0], [0.8], [-2.5]] {
            let expected = big_pi(&m, &t, 1e-12).unwrap().value * law.chf(&t);
            assert!(close(
                thm1_limit_chf(&m, &t, 1e-12, 1e-6).unwrap(),
                expected,
                1e-13
            ));
        }
        assert_eq!(thm1_limit_chf(&m, &[0.0], 1e-12, 1e-6).unwrap(), ONE);
    }

    #[test]
    fn empirical_examples() {
        let origin = [0.0];
        assert_eq!(empirical_chf([(&origin[..], 2.0)], &[1.7]).unwrap(), ONE);
        let pts = [[1.0], [-1.0]];
        for t in [0.3, 1.0, 2.9] {
            let v = empirical_chf(pts.iter().map(|p| (&p[..], 0.5)), &[t]).unwrap();
            assert!(close(v, Complex64::new(t.cos(), 0.0), 1e-15));
        }
        let xs = [[0.3], [2.0], [-7.0]];
        assert_eq!(
            empirical_chf(xs.iter().map(|p| (&p[..], 0.1)), &[0.0]).unwrap(),
            ONE
        );
        assert!(empirical_chf(pts.iter().map(|p| (&p[..], 0.0)), &[1.0]).is_err());
    }

    #[test]
    fn grid_and_csv() {
        let g = axis_grid(2, 25, -3.0, 3.0);
        assert_eq!(g.len(), 50);
        assert_eq!(g[12], vec![0.0, 0.0]);
        assert_eq!(g[25], vec![0.0, -3.0]);
        let a = ChfGrid::evaluate(vec![vec![0.0], vec![1.0]], ChfKind::Analytic, |t| {
            Ok(Complex64::new(t[0].cos(), 0.0))
        })
        .unwrap();
        let mut buf = Vec::new();
        write_comparison_csv(&mut buf, &a, &a, &[0.1, 0.1]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t_0,analytic_re,analytic_im,empirical_re,empirical_im,abs_diff,mc_band"
        );
        assert_eq!(lines.count(), 2);
        assert_eq!(a.max_abs_diff(&a), 0.0);
    }
}
