//! `bench`: simulation and weighted-sampler timings across sizes.

use std::hint::black_box;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use contagion::process::{fmt_f64, ProcessState};
use contagion::rng::rng_from_seed;
use contagion::wsampler::PrefixWeightIndex;
use rand::Rng;

use crate::config::ExperimentConfig;
use crate::report::create_file;

/// Best of this many passes per measurement.
const PASSES: usize = 3;

pub fn run(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<bool> {
    let mut file = create_file(out, "timing.csv")?;
    writeln!(
        file,
        "n,simulate_seconds,ns_per_step,sampler_ns_per_draw,sampler_ns_per_draw_over_ln_n"
    )?;
    for &n in &cfg.options.bench_sizes {
        let model = cfg.model(n)?;
        let mut sim = f64::INFINITY;
        for pass in 0..PASSES {
            let mut state =
                ProcessState::new(model.initial(), rng_from_seed(cfg.stream_seed(pass as u64)))?;
            let start = Instant::now();
            state.run(model.env(), n)?;
            sim = sim.min(start.elapsed().as_secs_f64());
            black_box(state.len());
        }

        let mut rng = rng_from_seed(cfg.stream_seed(PASSES as u64));
        let mut index = PrefixWeightIndex::with_capacity(n);
        for _ in 0..n {
            index.append(rng.random_range(0.5..1.5))?;
        }
        let draws = cfg.options.bench_draws;
        let mut per_draw = f64::INFINITY;
        for _ in 0..PASSES {
            let start = Instant::now();
            let mut acc = 0usize;
            for _ in 0..draws {
                acc ^= index.sample(&mut rng)?;
            }
            black_box(acc);
            per_draw = per_draw.min(start.elapsed().as_secs_f64() * 1e9 / draws as f64);
        }
        let row = [
            fmt_f64(sim),
            fmt_f64(sim * 1e9 / n as f64),
            fmt_f64(per_draw),
            fmt_f64(per_draw / (n as f64).ln()),
        ];
        writeln!(file, "{n},{}", row.join(","))?;
        println!("bench n={n}: {sim:.3} s simulate, {per_draw:.1} ns/draw");
    }
    file.flush()?;
    Ok(true)
}
