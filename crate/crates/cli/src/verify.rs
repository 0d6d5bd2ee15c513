//! `verify`: the limit-theorem protocols.

use std::path::Path;

use contagion::asymptotics::{
    backward_moments, generation_means, generation_second_moments, kappa_n, nu_n, segment_measure,
    thm2_cov, thm2_drift, thm3_cov, thm3_drift, CenteringKind, RegimePrediction, RegimeTag,
    Scaling,
};
use contagion::chf::{empirical_chf, thm1_limit_chf, write_comparison_csv, ChfGrid, ChfKind};
use contagion::env::WeightRegime;
use contagion::process::{BackwardSampler, ProcessState};
use contagion::rng::par_replicates;
use contagion::stats::{
    complex_mean_stderr, mean_and_stderr, normality_check, weighted_ks_1d, NormalityThresholds,
};
use contagion::Model;
use nalgebra::DVector;
use num_complex::Complex64;

use crate::config::{config_error, ExperimentConfig};
use crate::report::{create_file, write_json, Report};

pub fn run(cfg: &ExperimentConfig, theorem: u8, out: &Path) -> anyhow::Result<bool> {
    check_regime(&cfg.regime, theorem)?;
    let mut report = Report::new("verify", cfg.seed, cfg.steps, cfg.replicates);
    report.theorem = Some(theorem);
    match theorem {
        1 => summable(cfg, out, &mut report)?,
        2 => power_law(cfg, &mut report)?,
        3 => exponential(cfg, &mut report)?,
        _ => return Err(config_error(format!("unknown theorem {theorem}"))),
    }
    write_json(out, "report.json", &report)?;
    report.print_summary();
    Ok(report.passed)
}

fn check_regime(regime: &WeightRegime, theorem: u8) -> anyhow::Result<()> {
    let ok = match (theorem, regime) {
        (1, WeightRegime::Explicit { .. }) => true,
        (1, WeightRegime::Exponential { tau, .. }) => tau.stationary_mean() < 0.0,
        (2, WeightRegime::PowerLaw { .. }) => true,
        (3, WeightRegime::Exponential { tau, .. }) => tau.stationary_mean() > 0.0,
        _ => false,
    };
    if ok {
        return Ok(());
    }
    let needs = match theorem {
        1 => "summable weights (explicit, or exponential with negative mean increment)",
        2 => "the power-law regime",
        3 => "the exponential regime with positive mean increment",
        _ => "a theorem number in 1..=3",
    };
    Err(config_error(format!(
        "regime/theorem mismatch: theorem {theorem} needs {needs}"
    )))
}

fn thresholds(cfg: &ExperimentConfig) -> NormalityThresholds {
    NormalityThresholds {
        ks_factor: cfg.options.ks_factor,
        cov_rel_tol: cfg.options.cov_rel_tol,
    }
}

/// Empirical ch.f. of the resource measure, averaged over replicates,
/// against the summable-weight limit.
fn summable(cfg: &ExperimentConfig, out: &Path, report: &mut Report) -> anyhow::Result<()> {
    let n = cfg.steps;
    let o = &cfg.options;
    let model = cfg.model(n)?;
    let grid = cfg.grid();
    let per_rep: Vec<contagion::Result<Vec<Complex64>>> =
        par_replicates(cfg.stream_seed(0), cfg.replicates, |_, rng| {
            let mut state = ProcessState::new(model.initial(), rng.clone())?;
            state.run(model.env(), n)?;
            grid.iter()
                .map(|t| {
                    let pts = (0..state.len()).map(|i| (state.location(i), state.resource_of(i)));
                    empirical_chf(pts, t)
                })
                .collect()
        });
    let per_rep = per_rep.into_iter().collect::<contagion::Result<Vec<_>>>()?;
    let analytic = ChfGrid::evaluate(grid.clone(), ChfKind::Analytic, |t| {
        thm1_limit_chf(&model, t, o.tail_tol, o.stab_tol)
    })?;
    let mut values = Vec::with_capacity(grid.len());
    let mut band = Vec::with_capacity(grid.len());
    for (k, t) in grid.iter().enumerate() {
        let zs: Vec<Complex64> = per_rep.iter().map(|v| v[k]).collect();
        let (mean, se) = complex_mean_stderr(&zs)?;
        let limit = o.se_factor * se + 1e-12;
        report.at_most(
            format!("chf_abs_diff_t{k}"),
            (mean - analytic.values[k]).norm(),
            limit,
            Some(cfg.replicates),
        );
        values.push(mean);
        band.push(limit);
        log::debug!("t = {t:?}: empirical {mean}, limit {}", analytic.values[k]);
    }
    let empirical = ChfGrid {
        points: grid,
        values,
        kind: ChfKind::Empirical,
    };
    let mut file = create_file(out, "chf.csv")?;
    write_comparison_csv(&mut file, &analytic, &empirical, &band)?;
    report
        .notes
        .push("chf.csv holds the limit and the replicate-averaged ch.f.".into());
    Ok(())
}

/// Backward draws of the mother point at horizon `n`.
fn backward_draws(
    cfg: &ExperimentConfig,
    model: &Model,
    n: usize,
) -> anyhow::Result<Vec<Vec<f64>>> {
    let sampler = BackwardSampler::new(model, n)?;
    Ok(par_replicates(
        cfg.stream_seed(0),
        cfg.replicates,
        |_, rng| sampler.sample(rng),
    ))
}

/// Sample mean and variance per axis against the exact finite-`n` moments.
fn exact_moment_checks(
    report: &mut Report,
    cfg: &ExperimentConfig,
    model: &Model,
    n: usize,
    xs: &[Vec<f64>],
) -> anyhow::Result<()> {
    let (mean, cov) = backward_moments(model, n)?;
    for a in 0..cfg.dimension {
        let col: Vec<f64> = xs.iter().map(|x| x[a]).collect();
        let (m, se) = mean_and_stderr(&col)?;
        let sq: Vec<f64> = col.iter().map(|x| (x - m).powi(2)).collect();
        let (v, se_v) = mean_and_stderr(&sq)?;
        let z = |diff: f64, se: f64| {
            if se > 0.0 {
                diff.abs() / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        report.at_most(
            format!("exact_mean_z_axis_{a}"),
            z(m - mean[a], se),
            cfg.options.se_factor,
            Some(xs.len()),
        );
        report.at_most(
            format!("exact_var_z_axis_{a}"),
            z(v - cov[(a, a)], se_v),
            cfg.options.se_factor,
            Some(xs.len()),
        );
    }
    Ok(())
}

fn power_law(cfg: &ExperimentConfig, report: &mut Report) -> anyhow::Result<()> {
    let WeightRegime::PowerLaw { alpha, .. } = cfg.regime else {
        unreachable!("regime checked");
    };
    let n = cfg.steps;
    if n < 2 {
        return Err(config_error("the power-law protocol needs steps >= 2"));
    }
    let model = cfg.model(n)?;
    let xs = backward_draws(cfg, &model, n)?;
    exact_moment_checks(report, cfg, &model, n, &xs)?;

    let spec = cfg.env_spec();
    let big = cfg.options.drift_steps.unwrap_or(n).max(2);
    let long = if big == n {
        model.clone()
    } else {
        cfg.model(big)?
    };
    let (xi_long, _) = spec.regime_draws(big, cfg.env_seed());
    let lambda = thm2_drift(alpha, &xi_long, &generation_means(&long, big))?;
    let nu = nu_n(&long, big)?.nu;
    let scale = lambda.norm();
    let err = (&nu - &lambda).norm() / if scale > 0.0 { scale } else { 1.0 };
    report.at_most("drift_rel_error", err, cfg.options.drift_rel_tol, None);
    report.notes.push(format!("drift evaluated at n = {big}"));

    let (xi, _) = spec.regime_draws(n, cfg.env_seed());
    let target = thm2_cov(alpha, &xi, &generation_second_moments(&model, n))?;
    let centre = nu_n(&model, n)?.sum;
    let root = (n as f64).ln().sqrt();
    let zs: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            x.iter()
                .zip(centre.iter())
                .map(|(x, c)| (x - c) / root)
                .collect()
        })
        .collect();
    for c in normality_check(&zs, &target, thresholds(cfg))?.checks {
        report.check(c);
    }
    let mut prediction = RegimePrediction::new(
        RegimeTag::PowerLaw,
        &lambda,
        CenteringKind::NuLnN,
        Scaling::SqrtLnN,
        &target,
    );
    prediction
        .centering_values
        .push((n, centre.iter().copied().collect()));
    report.prediction = Some(prediction);
    Ok(())
}

fn exponential(cfg: &ExperimentConfig, report: &mut Report) -> anyhow::Result<()> {
    let n = cfg.steps;
    let o = &cfg.options;
    let model = cfg.model(n)?;
    let (xi, tau) = cfg.env_spec().regime_draws(n, cfg.env_seed());
    let means = generation_means(&model, n);
    let lambda = thm3_drift(&xi, &tau, &means, o.ergodic_tol)?.value;
    let target = thm3_cov(
        &xi,
        &tau,
        &means,
        &generation_second_moments(&model, n),
        o.ergodic_tol,
    )?
    .value;

    let xs = backward_draws(cfg, &model, n)?;
    exact_moment_checks(report, cfg, &model, n, &xs)?;
    let kappa = kappa_n(&model, n)?;
    let root = (n as f64).sqrt();
    let zs: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            x.iter()
                .zip(kappa.iter())
                .map(|(x, k)| (x - k) / root)
                .collect()
        })
        .collect();
    for c in normality_check(&zs, &target, thresholds(cfg))?.checks {
        report.check(c);
    }
    for a in 0..cfg.dimension {
        let mean = xs.iter().map(|x| x[a]).sum::<f64>() / xs.len() as f64;
        report.at_most(
            format!("drift_abs_error_axis_{a}"),
            (mean / n as f64 - lambda[a]).abs(),
            o.mean_tol,
            Some(xs.len()),
        );
    }

    let mut prediction = RegimePrediction::new(
        RegimeTag::Exponential,
        &lambda,
        CenteringKind::Kappa,
        Scaling::N,
        &target,
    );
    prediction
        .centering_values
        .push((n, kappa.iter().copied().collect()));
    if o.segment_replicates > 0 && lambda.norm() > 0.0 {
        let v_grid: Vec<f64> = (0..=20).map(|i| f64::from(i) / 20.0).collect();
        let g = contagion::asymptotics::g_estimate(model.series().us(), n, &v_grid)?;
        prediction = segment_measure(prediction, &lambda, &v_grid, &g)?;
        let ks = segment_ks(cfg, &model, &lambda)?;
        report.at_most(
            "segment_ks",
            ks,
            o.segment_ks_tol,
            Some(o.segment_replicates),
        );
    }
    report.prediction = Some(prediction);
    Ok(())
}

/// Weighted KS distance between the resource measure projected on the drift
/// direction (scaled by `n`) and `G(v) = U_{floor(n v)} / U_n`.
fn segment_ks(cfg: &ExperimentConfig, model: &Model, lambda: &DVector<f64>) -> anyhow::Result<f64> {
    let n = cfg.steps;
    let norm2 = lambda.norm_squared();
    let runs: Vec<contagion::Result<Vec<(f64, f64)>>> = par_replicates(
        cfg.stream_seed(1),
        cfg.options.segment_replicates,
        |_, rng| {
            let mut state = ProcessState::new(model.initial(), rng.clone())?;
            state.run(model.env(), n)?;
            Ok((0..state.len())
                .map(|i| {
                    let x = state.location(i);
                    let s = x.iter().zip(lambda.iter()).map(|(a, b)| a * b).sum::<f64>();
                    (s / (n as f64 * norm2), state.resource_of(i))
                })
                .collect())
        },
    );
    let pooled: Vec<(f64, f64)> = runs
        .into_iter()
        .collect::<contagion::Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut partial = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    for &u in &model.series().us()[..=n] {
        acc += u;
        partial.push(acc);
    }
    let total = partial[n];
    let g = |v: f64| {
        if v < 0.0 {
            0.0
        } else {
            partial[((v * n as f64).floor() as usize).min(n)] / total
        }
    };
    Ok(weighted_ks_1d(&pooled, g)?)
}
