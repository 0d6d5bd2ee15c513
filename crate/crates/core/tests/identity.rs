//! The backward representation of the mother point against forward
//! simulation and against its exact finite-n moments.

use std::f64::consts::LN_2;

use contagion::asymptotics::backward_moments;
use contagion::displacement::{DisplacementLaw, DisplacementSpec};
use contagion::env::{
    EnvironmentSpec, InitialPoint, OffspringSpec, ResourceSpec, ScalarGenerator, WeightRegime,
};
use contagion::process::{
    forward_sample_mother, mother_count_expectation, BackwardSampler, ProcessState,
};
use contagion::rng::par_replicates;
use contagion::stats::{mean_and_stderr, two_sample_ks, two_sample_ks_threshold};
use contagion::Model;
use nalgebra::DMatrix;

fn random_environment() -> (Vec<InitialPoint>, EnvironmentSpec) {
    let laws = vec![
        DisplacementLaw::gaussian(
            vec![0.5, 0.0],
            DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 0.8]),
        )
        .unwrap(),
        DisplacementLaw::uniform_box(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap(),
        DisplacementLaw::discrete(vec![vec![3.0, 0.0], vec![0.0, -3.0]], vec![0.5, 0.5]).unwrap(),
    ];
    let spec = EnvironmentSpec {
        regime: WeightRegime::Exponential {
            xi: ScalarGenerator::IidFiniteSupport {
                values: vec![0.5, 2.0],
                probs: vec![0.5, 0.5],
            },
            tau: ScalarGenerator::TwoStateMarkov {
                switch: [0.2, 0.4],
                values: [-0.2, 0.6],
            },
        },
        offspring: OffspringSpec::Constant { k: 3 },
        resource: ResourceSpec::default(),
        displacement: DisplacementSpec::ProductList { laws },
    };
    let initial = vec![
        InitialPoint::new(vec![0.0, 0.0], 1.0, 1.0),
        InitialPoint::new(vec![-2.0, 1.0], 3.0, 1.0),
    ];
    (initial, spec)
}

#[test]
fn backward_moments_match_exact_formula() {
    let (initial, spec) = random_environment();
    let n = 40;
    let model = Model::from_spec(initial, &spec, n, 8).unwrap();
    let sampler = BackwardSampler::new(&model, n).unwrap();
    let draws: Vec<Vec<f64>> = par_replicates(5, 200_000, |_, rng| sampler.sample(rng));
    let (mean, cov) = backward_moments(&model, n).unwrap();
    for axis in 0..2 {
        let xs: Vec<f64> = draws.iter().map(|x| x[axis]).collect();
        let (m, se) = mean_and_stderr(&xs).unwrap();
        assert!(
            (m - mean[axis]).abs() <= 4.0 * se,
            "axis {axis}: {m} vs {}",
            mean[axis]
        );
        let sq: Vec<f64> = xs.iter().map(|x| (x - mean[axis]).powi(2)).collect();
        let (v, se_v) = mean_and_stderr(&sq).unwrap();
        assert!(
            (v - cov[(axis, axis)]).abs() <= 4.0 * se_v,
            "axis {axis}: {v} vs {}",
            cov[(axis, axis)]
        );
    }
    let cross: Vec<f64> = draws
        .iter()
        .map(|x| (x[0] - mean[0]) * (x[1] - mean[1]))
        .collect();
    let (c, se_c) = mean_and_stderr(&cross).unwrap();
    assert!((c - cov[(0, 1)]).abs() <= 4.0 * se_c);
}

#[test]
fn forward_and_backward_agree_in_random_environment() {
    let (initial, spec) = random_environment();
    let n = 25;
    let model = Model::from_spec(initial, &spec, n, 9).unwrap();
    let draws = 50_000;
    let forward: Vec<Vec<f64>> = par_replicates(10, draws, |_, rng| {
        forward_sample_mother(model.initial(), model.env(), n, rng).unwrap()
    });
    let sampler = BackwardSampler::new(&model, n).unwrap();
    let backward: Vec<Vec<f64>> = par_replicates(11, draws, |_, rng| sampler.sample(rng));
    let limit = two_sample_ks_threshold(draws, draws, 0.001, 1.5);
    for axis in 0..2 {
        let a: Vec<f64> = forward.iter().map(|x| x[axis]).collect();
        let b: Vec<f64> = backward.iter().map(|x| x[axis]).collect();
        let d = two_sample_ks(&a, &b);
        assert!(d <= limit, "axis {axis}: D = {d}");
    }
}

#[test]
fn recorded_mother_matches_fresh_process_draw() {
    let spec = EnvironmentSpec::new(
        WeightRegime::exponential(LN_2),
        DisplacementLaw::gaussian(vec![1.0], DMatrix::identity(1, 1)).unwrap(),
    );
    let n = 10;
    let model = Model::from_spec(vec![InitialPoint::origin(1)], &spec, n + 1, 1).unwrap();
    let draws = 50_000;
    // location of the mother recorded for the daughters of step n + 1
    let recorded: Vec<f64> = par_replicates(20, draws, |_, rng| {
        let mut state = ProcessState::new(model.initial(), rng.clone()).unwrap();
        state.run(model.env(), n + 1).unwrap();
        let daughter = state.flat_index(n + 1, 1).unwrap();
        state.location(state.mother_of(daughter).unwrap())[0]
    });
    let fresh: Vec<f64> = par_replicates(21, draws, |_, rng| {
        forward_sample_mother(model.initial(), model.env(), n, rng).unwrap()[0]
    });
    let d = two_sample_ks(&recorded, &fresh);
    assert!(
        d <= two_sample_ks_threshold(draws, draws, 0.001, 1.5),
        "D = {d}"
    );
}

#[test]
fn mother_counts_of_later_points() {
    let spec = EnvironmentSpec::new(WeightRegime::power_law(1.0), DisplacementLaw::rademacher())
        .with_offspring(2);
    let n = 8;
    let model = Model::from_spec(vec![InitialPoint::origin(1)], &spec, n, 2).unwrap();
    let counts: Vec<[f64; 2]> = par_replicates(30, 20_000, |_, rng| {
        let mut state = ProcessState::new(model.initial(), rng.clone())
            .unwrap()
            .with_mother_counts();
        state.run(model.env(), n).unwrap();
        let a = state.flat_index(2, 1).unwrap();
        let b = state.flat_index(5, 2).unwrap();
        [
            f64::from(state.mother_count(a).unwrap()),
            f64::from(state.mother_count(b).unwrap()),
        ]
    });
    for (k, (r, j)) in [(2usize, 1usize), (5, 2)].iter().enumerate() {
        let xs: Vec<f64> = counts.iter().map(|c| c[k]).collect();
        let (m, se) = mean_and_stderr(&xs).unwrap();
        let exact = mother_count_expectation(&model, *r, *j, n).unwrap();
        assert!((m - exact).abs() <= 4.0 * se, "({r},{j}): {m} vs {exact}");
    }
}
