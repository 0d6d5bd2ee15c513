//! `simulate`: replicated forward runs with point dumps and summaries.

use std::io::Write;
use std::path::Path;

use contagion::process::ProcessState;
use contagion::rng::par_replicates;
use contagion::stats::{sample_moments, WeightedSample};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::report::{create_file, write_json};

#[derive(Debug, Serialize)]
struct ReplicateSummary {
    replicate: usize,
    points: usize,
    ln_total_weight: f64,
    total_resource: f64,
    /// Resource-weighted mean location.
    resource_mean: Option<Vec<f64>>,
    resource_cov: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize)]
struct Summary {
    seed: u64,
    steps: usize,
    replicates: usize,
    dimension: usize,
    points_files: Vec<String>,
    mean_resource_mean: Option<Vec<f64>>,
    replicate_summaries: Vec<ReplicateSummary>,
}

fn points_file(i: usize, replicates: usize) -> String {
    if replicates == 1 {
        "points.csv".to_string()
    } else {
        format!("points_{i:04}.csv")
    }
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<bool> {
    let n = cfg.steps;
    let model = cfg.model(n)?;
    let reps = cfg.replicates;
    let write_points = cfg.options.write_points;
    log::info!("simulating {reps} replicates of {n} steps");

    let results: Vec<anyhow::Result<ReplicateSummary>> =
        par_replicates(cfg.stream_seed(0), reps, |i, rng| {
            let mut state = ProcessState::new(model.initial(), rng.clone())?;
            state.run(model.env(), n)?;
            if write_points {
                let mut file = create_file(out, &points_file(i, reps))?;
                state.write_csv(&mut file)?;
                file.flush()?;
            }
            let mut ws = WeightedSample::new(state.dim());
            for k in 0..state.len() {
                ws.push(state.location(k), state.resource_of(k))?;
            }
            let moments = sample_moments(&ws).ok();
            Ok(ReplicateSummary {
                replicate: i,
                points: state.len(),
                ln_total_weight: state.ln_total_weight(),
                total_resource: state.total_resource(),
                resource_mean: moments.as_ref().map(|(m, _)| m.iter().copied().collect()),
                resource_cov: moments
                    .as_ref()
                    .map(|(_, c)| c.row_iter().map(|r| r.iter().copied().collect()).collect()),
            })
        });
    let replicate_summaries = results.into_iter().collect::<anyhow::Result<Vec<_>>>()?;

    let means: Option<Vec<&Vec<f64>>> = replicate_summaries
        .iter()
        .map(|s| s.resource_mean.as_ref())
        .collect();
    let mean_resource_mean = means.map(|ms| {
        (0..cfg.dimension)
            .map(|a| ms.iter().map(|m| m[a]).sum::<f64>() / ms.len() as f64)
            .collect()
    });
    let summary = Summary {
        seed: cfg.seed,
        steps: n,
        replicates: reps,
        dimension: cfg.dimension,
        points_files: if write_points {
            (0..reps).map(|i| points_file(i, reps)).collect()
        } else {
            Vec::new()
        },
        mean_resource_mean,
        replicate_summaries,
    };
    write_json(out, "summary.json", &summary)?;
    println!(
        "simulate: {reps} replicates of {n} steps written to {}",
        out.display()
    );
    Ok(true)
}
