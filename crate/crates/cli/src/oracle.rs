//! `oracle` (exact enumeration against the recursion and Monte Carlo) and
//! `identity` (forward against backward sampling of the mother point).

use std::path::Path;

use contagion::chf::{phi_point, write_comparison_csv, ChfGrid, ChfKind};
use contagion::process::{
    exact_enumerate, forward_sample_mother, BackwardSampler, FiniteDiscreteDistribution,
    ProcessState,
};
use contagion::rng::par_replicates;
use contagion::stats::{
    complex_mean_stderr, mean_and_stderr, tv_distance, two_sample_ks, two_sample_ks_threshold,
};
use num_complex::Complex64;

use crate::config::{config_error, ExperimentConfig};
use crate::report::{create_file, write_json, Report};

/// Allowed deviation of the enumerated total mass from 1.
const MASS_TOL: f64 = 1e-9;

pub fn oracle(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<bool> {
    let n = cfg.steps;
    let o = &cfg.options;
    let model = cfg.model(n)?;
    let (r, j) = match o.point {
        Some(p) => p,
        None => {
            let r = (0..=n)
                .rev()
                .find(|&r| model.k(r).is_ok_and(|k| k > 0))
                .expect("the initial configuration is non-empty");
            (r, model.k(r)?)
        }
    };
    model
        .k(r)
        .ok()
        .filter(|&k| j >= 1 && j <= k)
        .ok_or_else(|| config_error(format!("point ({r}, {j}) does not exist")))?;
    let mut report = Report::new("oracle", cfg.seed, n, o.draws);
    report.notes.push(format!("point ({r}, {j})"));

    let exact = exact_enumerate(&model, r, j, u128::from(o.max_outcomes))?;
    report.at_most("mass_defect", (exact.total() - 1.0).abs(), MASS_TOL, None);
    let grid = cfg.grid();
    let analytic = ChfGrid::evaluate(grid.clone(), ChfKind::Analytic, |t| {
        phi_point(&model, r, j, t)
    })?;
    let worst = grid
        .iter()
        .zip(&analytic.values)
        .map(|(t, a)| (exact.chf(t) - a).norm())
        .fold(0.0, f64::max);
    report.at_most("chf_enumeration_vs_recursion", worst, o.chf_tol, None);

    let draws: Vec<contagion::Result<Vec<f64>>> =
        par_replicates(cfg.stream_seed(0), o.draws, |_, rng| {
            let mut state = ProcessState::new(model.initial(), rng.clone())?;
            state.run(model.env(), r)?;
            Ok(state.location(state.flat_index(r, j)?).to_vec())
        });
    let draws = draws.into_iter().collect::<contagion::Result<Vec<_>>>()?;
    let mc = FiniteDiscreteDistribution::from_points(
        cfg.dimension,
        exact.scale(),
        draws.iter().map(Vec::as_slice),
    )?;
    report.at_most(
        "tv_exact_vs_monte_carlo",
        tv_distance(&exact, &mc)?,
        o.tv_tol,
        Some(o.draws),
    );

    let mut values = Vec::with_capacity(grid.len());
    let mut band = Vec::with_capacity(grid.len());
    for t in &grid {
        let zs: Vec<Complex64> = draws
            .iter()
            .map(|x| Complex64::from_polar(1.0, x.iter().zip(t).map(|(a, b)| a * b).sum()))
            .collect();
        let (mean, se) = if zs.len() >= 2 {
            complex_mean_stderr(&zs)?
        } else {
            (zs[0], f64::INFINITY)
        };
        values.push(mean);
        band.push(o.se_factor * se);
    }
    let empirical = ChfGrid {
        points: grid,
        values,
        kind: ChfKind::Empirical,
    };
    let mut file = create_file(out, "chf.csv")?;
    write_comparison_csv(&mut file, &analytic, &empirical, &band)?;

    write_json(out, "report.json", &report)?;
    report.print_summary();
    Ok(report.passed)
}

pub fn identity(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<bool> {
    let n = cfg.steps;
    let o = &cfg.options;
    let model = cfg.model(n)?;
    let mut report = Report::new("identity", cfg.seed, n, o.draws);

    let forward: Vec<contagion::Result<Vec<f64>>> =
        par_replicates(cfg.stream_seed(0), o.draws, |_, rng| {
            forward_sample_mother(model.initial(), model.env(), n, rng)
        });
    let forward = forward.into_iter().collect::<contagion::Result<Vec<_>>>()?;
    let sampler = BackwardSampler::new(&model, n)?;
    let backward: Vec<Vec<f64>> =
        par_replicates(cfg.stream_seed(1), o.draws, |_, rng| sampler.sample(rng));

    let limit = two_sample_ks_threshold(o.draws, o.draws, 0.001, o.ks_factor);
    let (mean, _) = contagion::asymptotics::backward_moments(&model, n)?;
    for a in 0..cfg.dimension {
        let fa: Vec<f64> = forward.iter().map(|x| x[a]).collect();
        let ba: Vec<f64> = backward.iter().map(|x| x[a]).collect();
        report.at_most(
            format!("ks_axis_{a}"),
            two_sample_ks(&fa, &ba),
            limit,
            Some(o.draws),
        );
        for (side, xs) in [("forward", &fa), ("backward", &ba)] {
            let (m, se) = mean_and_stderr(xs)?;
            let z = if se > 0.0 {
                (m - mean[a]).abs() / se
            } else {
                (m - mean[a]).abs() / f64::MIN_POSITIVE
            };
            report.at_most(
                format!("{side}_mean_z_axis_{a}"),
                z,
                o.se_factor,
                Some(o.draws),
            );
        }
    }
    write_json(out, "report.json", &report)?;
    report.print_summary();
    Ok(report.passed)
}
