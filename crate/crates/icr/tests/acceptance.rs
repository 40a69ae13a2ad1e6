//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `-- --nocapture` to see them all).

use std::path::PathBuf;
use std::time::Instant;

use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use icr::cycle::{is_permissible, CycleMode};
use icr::discrete::{derive_conditionals, total_variation, DiscreteDistribution};
use icr::gaussian::GaussianDistribution;
use icr::gaussian_icr::{
    assemble_trivariate, gaussian_icr_run, gaussian_mutual_stationarity_check,
    gaussian_replacement, GaussianIcrConfig,
};
use icr::icr::{
    brute_force_fixed_point, compatibility_check, conditional_replacement, icr_run,
    markov_kernel_apply, mutual_stationarity_check, Compatibility, IcrConfig, IcrReport,
};
use icr::model::{ConditionalModel, VarSet};
use icr::sampler::{compare, run_chain, ChainConfig, StationaryLimit};
use icr::{kl_divergence, DiscreteConditional};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn load(name: &str) -> ConditionalModel {
    ConditionalModel::from_path(fixture(name)).unwrap()
}

fn standard_gaussian(scope: &[usize]) -> GaussianDistribution {
    let d = scope.len();
    GaussianDistribution::new(
        VarSet::new(scope.to_vec()).unwrap(),
        DVector::zeros(d),
        DMatrix::identity(d, d),
    )
    .unwrap()
}

fn random_joint3(rng: &mut impl Rng) -> DiscreteDistribution {
    let mut t: Vec<f64> = (0..8).map(|_| rng.gen::<f64>() + 0.02).collect();
    let s: f64 = t.iter().sum();
    t.iter_mut().for_each(|x| *x /= s);
    DiscreteDistribution::new(VarSet::full(3), vec![2, 2, 2], t).unwrap()
}

fn full_blocks(d: usize) -> Vec<(VarSet, VarSet)> {
    (0..d)
        .map(|i| {
            let a = VarSet::singleton(i);
            let b = VarSet::full(d).difference(&a);
            (a, b)
        })
        .collect()
}

/// Traces of converged runs must fall strictly while above the stopping bound.
fn assert_monotone_traces(report: &IcrReport, tol: f64) {
    assert!(report.converged);
    for (i, trace) in report.traces.iter().enumerate() {
        for w in trace.windows(2) {
            if w[0].kl > tol {
                assert!(
                    w[1].kl < w[0].kl,
                    "position {}: kl gap went {} -> {}",
                    i,
                    w[0].kl,
                    w[1].kl
                );
            }
        }
    }
}

const COV_213: [[f64; 3]; 3] = [
    [241.0 / 50.0, -103.0 / 50.0, -207.0 / 50.0],
    [-103.0 / 50.0, 89.0 / 50.0, 21.0 / 50.0],
    [-207.0 / 50.0, 21.0 / 50.0, 329.0 / 50.0],
];
const COV_132: [[f64; 3]; 3] = [
    [241.0 / 50.0, -17.0 / 50.0, -207.0 / 50.0],
    [-17.0 / 50.0, 89.0 / 50.0, -61.0 / 50.0],
    [-207.0 / 50.0, -61.0 / 50.0, 329.0 / 50.0],
];
const COV_321: [[f64; 3]; 3] = [
    [241.0 / 50.0, -103.0 / 50.0, -73.0 / 50.0],
    [-103.0 / 50.0, 89.0 / 50.0, -61.0 / 50.0],
    [-73.0 / 50.0, -61.0 / 50.0, 329.0 / 50.0],
];

fn run_gauss3_full_213() -> icr::gaussian_icr::GaussianIcrReport {
    let model = load("gauss3_full.json");
    let cycle = is_permissible(&model, &[1, 0, 2], CycleMode::Permissive).unwrap();
    gaussian_icr_run(
        &model,
        &cycle,
        &standard_gaussian(&[0, 1, 2]),
        &GaussianIcrConfig::default(),
    )
    .unwrap()
}

#[test]
fn acceptance_01_gaussian_full_limits() {
    let start = Instant::now();
    let report = run_gauss3_full_213();
    assert!(report.converged, "divergence: {:?}", report.divergence);
    // positions: after X2 update, after X1 update, after X3 update
    for (limit, expected) in report.stationary.iter().zip([&COV_132, &COV_321, &COV_213]) {
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(limit.cov()[(i, j)], expected[i][j], epsilon = 1e-6);
            }
            assert_abs_diff_eq!(limit.mean()[i], 0.0, epsilon = 1e-8);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {:?}", elapsed);
    println!("acceptance 1 (three-full-Gaussian limits, cycle <2,1,3>): PASS ({:?})", elapsed);
}

#[test]
fn acceptance_02_gaussian_full_divergent_cycle() {
    let start = Instant::now();
    let model = load("gauss3_full.json");
    let cycle = is_permissible(&model, &[0, 1, 2], CycleMode::Permissive).unwrap();
    assert!(cycle.permissible());
    let report = gaussian_icr_run(
        &model,
        &cycle,
        &standard_gaussian(&[0, 1, 2]),
        &GaussianIcrConfig::default(),
    )
    .unwrap();
    assert!(!report.converged);
    assert!(report.divergence.is_some(), "expected a divergence reason");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {:?}", elapsed);
    println!(
        "acceptance 2 (cycle <1,2,3> reported non-convergent: {}): PASS ({:?})",
        report.divergence.unwrap(),
        elapsed
    );
}

#[test]
fn acceptance_03_pairwise_chain_limits_and_assembly() {
    let model = load("gauss3_chain.json");
    let cycle = is_permissible(&model, &[0, 2, 1], CycleMode::Permissive).unwrap();
    let report = gaussian_icr_run(
        &model,
        &cycle,
        &standard_gaussian(&[1, 2]),
        &GaussianIcrConfig::default(),
    )
    .unwrap();
    assert!(report.converged);
    let expected: [(&[usize], [[f64; 2]; 2]); 3] = [
        (&[0, 1], [[4.0, 2.0], [2.0, 10.0]]),
        (&[0, 2], [[4.0, -3.0], [-3.0, 16.0]]),
        (&[1, 2], [[10.0, -5.0], [-5.0, 16.0]]),
    ];
    for (limit, (scope, cov)) in report.stationary.iter().zip(expected.iter()) {
        assert_eq!(limit.scope().as_slice(), *scope);
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(limit.cov()[(i, j)], cov[i][j], epsilon = 1e-6);
            }
        }
    }
    let m12 = &report.stationary[0];
    let m13 = &report.stationary[1];
    let m23 = &report.stationary[2];
    let joint = assemble_trivariate(m12, m23, m13).unwrap();
    let target = [[4.0, 2.0, -3.0], [2.0, 10.0, -5.0], [-3.0, -5.0, 16.0]];
    for i in 0..3 {
        for j in 0..3 {
            assert_abs_diff_eq!(joint.cov()[(i, j)], target[i][j], epsilon = 1e-6);
        }
    }
    // assembly copies its blocks verbatim from the margins
    assert_eq!(joint.cov()[(0, 0)], m12.cov()[(0, 0)]);
    assert_eq!(joint.cov()[(0, 1)], m12.cov()[(0, 1)]);
    assert_eq!(joint.cov()[(1, 1)], m12.cov()[(1, 1)]);
    assert_eq!(joint.cov()[(1, 2)], m23.cov()[(0, 1)]);
    assert_eq!(joint.cov()[(2, 2)], m23.cov()[(1, 1)]);
    assert_eq!(joint.cov()[(0, 2)], m13.cov()[(0, 1)]);
    println!("acceptance 3 (pairwise-chain limits, cycle <1,3,2>, and trivariate assembly): PASS");
}

#[test]
fn acceptance_04_compatible_recovery() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let orders: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let cfg = IcrConfig {
        kl_tol: 1e-26,
        max_cycles: 50_000,
        ..Default::default()
    };
    for trial in 0..50 {
        let f = random_joint3(&mut rng);
        let model = derive_conditionals(&f, &full_blocks(3)).unwrap();
        let order = &orders[trial % orders.len()];
        let cycle = is_permissible(&model, order, CycleMode::Permissive).unwrap();
        let q0 = DiscreteDistribution::uniform(VarSet::full(3), vec![2, 2, 2]);
        let report = icr_run(&model, &cycle, &q0, &cfg).unwrap();
        assert!(report.converged, "trial {} did not converge", trial);
        for (pos, limit) in report.stationary.iter().enumerate() {
            let tv = total_variation(limit, &f).unwrap();
            assert!(tv < 1e-9, "trial {}, position {}: tv {}", trial, pos, tv);
        }
        assert_monotone_traces(&report, cfg.kl_tol);
    }

    // mixed full/non-full model built from a known joint: the limits are the
    // scope marginals, with the full position recovering the joint itself
    let model = load("binary3_pcgs.json");
    let cycle = is_permissible(&model, &[0, 2, 1], CycleMode::Permissive).unwrap();
    let q0 = DiscreteDistribution::uniform(VarSet::full(3), vec![2, 2, 2]);
    let report = icr_run(&model, &cycle, &q0, &cfg).unwrap();
    assert!(report.converged);
    let joint = DiscreteDistribution::new(
        VarSet::full(3),
        vec![2, 2, 2],
        vec![0.04, 0.16, 0.06, 0.24, 0.2, 0.1, 0.05, 0.15],
    )
    .unwrap();
    let f12 = icr::marginalize(&joint, &VarSet::new(vec![0, 1]).unwrap()).unwrap();
    let f13 = icr::marginalize(&joint, &VarSet::new(vec![0, 2]).unwrap()).unwrap();
    assert!(total_variation(&report.stationary[0], &f12).unwrap() < 1e-9);
    assert!(total_variation(&report.stationary[1], &f13).unwrap() < 1e-9);
    assert!(total_variation(&report.stationary[2], &joint).unwrap() < 1e-9);
    println!("acceptance 4 (compatible recovery, 50 random joints + mixed-conditional fixture): PASS");
}

/// The discrete suite shared by the oracle-equivalence criterion: every
/// (model, cycle) pair small enough for the exact linear-map oracle.
fn discrete_suite() -> Vec<(ConditionalModel, Vec<usize>)> {
    let mut suite = vec![
        (load("binary2_compatible.json"), vec![0, 1]),
        (load("binary2_incompatible.json"), vec![0, 1]),
        (load("binary2_incompatible.json"), vec![1, 0]),
        (load("binary3_pcgs.json"), vec![0, 2, 1]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2211);
    for _ in 0..10 {
        let f = random_joint3(&mut rng);
        suite.push((derive_conditionals(&f, &full_blocks(3)).unwrap(), vec![2, 0, 1]));
    }
    // a pairwise chain with random rows: no full conditional at all
    for seed in [5u64, 6, 7] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = |n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| {
                    let mut r: Vec<f64> = (0..2).map(|_| rng.gen::<f64>() + 0.05).collect();
                    let s: f64 = r.iter().sum();
                    r.iter_mut().for_each(|x| *x /= s);
                    r
                })
                .collect()
        };
        let conds = vec![
            DiscreteConditional::from_rows(
                VarSet::singleton(0),
                VarSet::singleton(1),
                vec![2],
                vec![2],
                &rows(2),
            )
            .unwrap(),
            DiscreteConditional::from_rows(
                VarSet::singleton(1),
                VarSet::singleton(2),
                vec![2],
                vec![2],
                &rows(2),
            )
            .unwrap(),
            DiscreteConditional::from_rows(
                VarSet::singleton(2),
                VarSet::singleton(0),
                vec![2],
                vec![2],
                &rows(2),
            )
            .unwrap(),
        ];
        let model = ConditionalModel::new(
            (0..3)
                .map(|i| icr::VariableSpec::discrete(format!("X{}", i + 1), 2))
                .collect(),
            icr::Conditionals::Discrete(conds),
        )
        .unwrap();
        suite.push((model, vec![0, 2, 1]));
    }
    suite
}

#[test]
fn acceptance_05_oracle_equivalence() {
    let cfg = IcrConfig {
        kl_tol: 1e-26,
        max_cycles: 100_000,
        ..Default::default()
    };
    for (k, (model, order)) in discrete_suite().into_iter().enumerate() {
        let cycle = is_permissible(&model, &order, CycleMode::Permissive).unwrap();
        let last = *cycle.order().last().unwrap();
        let scope = model.scope_of(last);
        let sizes = model.sizes_for(&scope).unwrap();
        let q0 = DiscreteDistribution::uniform(scope, sizes);
        let report = icr_run(&model, &cycle, &q0, &cfg).unwrap();
        assert!(report.converged, "suite entry {} did not converge", k);
        for pos in 0..model.len() {
            let oracle = brute_force_fixed_point(&model, &cycle, pos).unwrap();
            let tv = total_variation(&report.stationary[pos], &oracle).unwrap();
            assert!(tv < 1e-9, "suite entry {}, position {}: tv {}", k, pos, tv);
        }
        assert_monotone_traces(&report, cfg.kl_tol);
    }
    println!("acceptance 5 (iterative limits match eigenvector oracle on the discrete suite): PASS");
}

#[test]
fn acceptance_06_contraction_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let random_dist = |sizes: &[usize], scope: &[usize], rng: &mut ChaCha8Rng| {
        let n: usize = sizes.iter().product();
        let mut t: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let s: f64 = t.iter().sum();
        t.iter_mut().for_each(|x| *x /= s);
        DiscreteDistribution::new(VarSet::new(scope.to_vec()).unwrap(), sizes.to_vec(), t).unwrap()
    };
    let random_rows = |np: usize, nt: usize, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..np)
            .map(|_| {
                let mut r: Vec<f64> = (0..nt).map(|_| rng.gen::<f64>() + 1e-3).collect();
                let s: f64 = r.iter().sum();
                r.iter_mut().for_each(|x| *x /= s);
                r
            })
            .collect()
    };
    for trial in 0..1000 {
        // h, g on (X1..X3); the step replaces X2 given (X1, X3)
        let sizes = [2usize, 3, 2];
        let h = random_dist(&sizes, &[0, 1, 2], &mut rng);
        let g = random_dist(&sizes, &[0, 1, 2], &mut rng);
        let rows = random_rows(4, 3, &mut rng);
        let f = DiscreteConditional::from_rows(
            VarSet::singleton(1),
            VarSet::new(vec![0, 2]).unwrap(),
            vec![3],
            vec![2, 2],
            &rows,
        )
        .unwrap();
        let before = kl_divergence(&h, &g).unwrap();
        let after = kl_divergence(
            &conditional_replacement(&h, &f).unwrap(),
            &conditional_replacement(&g, &f).unwrap(),
        )
        .unwrap();
        assert!(
            after <= before + 1e-12,
            "trial {}: step inflated KL {} -> {}",
            trial,
            before,
            after
        );
    }
    // monotone traces on a dedicated converged run
    let model = load("binary3_pcgs.json");
    let cycle = is_permissible(&model, &[0, 2, 1], CycleMode::Permissive).unwrap();
    let q0 = DiscreteDistribution::uniform(VarSet::full(3), vec![2, 2, 2]);
    let cfg = IcrConfig {
        kl_tol: 1e-26,
        max_cycles: 100_000,
        ..Default::default()
    };
    let report = icr_run(&model, &cycle, &q0, &cfg).unwrap();
    assert_monotone_traces(&report, cfg.kl_tol);
    println!("acceptance 6 (1000-step contraction suite + monotone traces): PASS");
}

#[test]
fn acceptance_07_operator_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for trial in 0..100 {
        let na = rng.gen_range(2..=4);
        let nb = rng.gen_range(2..=4);
        let mut table: Vec<f64> = (0..na * nb).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let s: f64 = table.iter().sum();
        table.iter_mut().for_each(|x| *x /= s);
        let q = DiscreteDistribution::new(
            VarSet::new(vec![0, 1]).unwrap(),
            vec![na, nb],
            table,
        )
        .unwrap();
        let rows: Vec<Vec<f64>> = (0..nb)
            .map(|_| {
                let mut r: Vec<f64> = (0..na).map(|_| rng.gen::<f64>() + 1e-3).collect();
                let s: f64 = r.iter().sum();
                r.iter_mut().for_each(|x| *x /= s);
                r
            })
            .collect();
        let f = DiscreteConditional::from_rows(
            VarSet::singleton(0),
            VarSet::singleton(1),
            vec![na],
            vec![nb],
            &rows,
        )
        .unwrap();
        let kernel = markov_kernel_apply(&q, &f).unwrap();
        let replaced = conditional_replacement(&q, &f).unwrap();
        for (i, (a, b)) in kernel.table().iter().zip(replaced.table()).enumerate() {
            assert!(
                (a - b).abs() <= 1e-14,
                "trial {}, cell {}: {} vs {}",
                trial,
                i,
                a,
                b
            );
        }
    }
    println!("acceptance 7 (Markov kernel route equals replacement route, 100 cases): PASS");
}

#[test]
fn acceptance_08_mutual_stationarity() {
    // gaussian side
    let model = load("gauss3_full.json");
    let cycle = is_permissible(&model, &[1, 0, 2], CycleMode::Permissive).unwrap();
    let report = run_gauss3_full_213();
    let check = gaussian_mutual_stationarity_check(&report.stationary, &model, &cycle);
    assert!(check.holds, "{:?}", check.failures);
    // one extra round from the first limit reproduces all the others
    let conds = model.gaussian().unwrap();
    let order = cycle.order();
    let mut state = report.stationary[0].clone();
    for i in 1..order.len() {
        state = gaussian_replacement(&state, &conds[order[i]]).unwrap();
        let expected = &report.stationary[i];
        assert!((state.mean() - expected.mean()).amax() < 1e-8);
        assert!((state.cov() - expected.cov()).amax() < 1e-8);
    }

    // discrete side
    let model = load("binary3_pcgs.json");
    let cycle = is_permissible(&model, &[0, 2, 1], CycleMode::Permissive).unwrap();
    let q0 = DiscreteDistribution::uniform(VarSet::full(3), vec![2, 2, 2]);
    let cfg = IcrConfig {
        kl_tol: 1e-26,
        max_cycles: 100_000,
        ..Default::default()
    };
    let run = icr_run(&model, &cycle, &q0, &cfg).unwrap();
    let check = mutual_stationarity_check(&run.stationary, &model, &cycle);
    assert!(check.holds, "{:?}", check.failures);
    let conds = model.discrete().unwrap();
    let order = cycle.order();
    let mut state = run.stationary[0].clone();
    for i in 1..order.len() {
        state = conditional_replacement(&state, &conds[order[i]]).unwrap();
        assert!(total_variation(&state, &run.stationary[i]).unwrap() < 1e-9);
    }
    println!("acceptance 8 (mutual stationarity, matching marginals, one extra round): PASS");
}

#[test]
fn acceptance_09_sampler_cross_validation() {
    let start = Instant::now();
    let model = load("gauss3_full.json");
    let cycle = is_permissible(&model, &[1, 0, 2], CycleMode::Permissive).unwrap();
    let report = run_gauss3_full_213();
    let cfg = ChainConfig {
        burn_in: 10_000,
        samples: 1_000_000,
        seed: 20240809,
        thin: 10,
    };
    let batches = run_chain(&model, &cycle, &cfg).unwrap();
    for (batch, limit) in batches.iter().zip(&report.stationary) {
        let cmp = compare(batch, &StationaryLimit::Gaussian(limit.clone())).unwrap();
        assert!(
            cmp.pass,
            "position {}: max |z| = {} at {}",
            batch.position + 1,
            cmp.max_z,
            cmp.worst
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {:?}", elapsed);
    println!(
        "acceptance 9 (million-sample chain batches within 4 SE of the limits): PASS ({:?})",
        elapsed
    );
}

#[test]
fn acceptance_10_incompatibility_detection() {
    let model = load("binary2_incompatible.json");
    let cycle = is_permissible(&model, &[0, 1], CycleMode::Permissive).unwrap();
    let after_f21 = brute_force_fixed_point(&model, &cycle, 1).unwrap();
    let after_f12 = brute_force_fixed_point(&model, &cycle, 0).unwrap();
    let tv = total_variation(&after_f21, &after_f12).unwrap();
    let tol = 1e-6;
    assert!(tv > 10.0 * tol, "limits too close: tv {}", tv);
    assert_abs_diff_eq!(tv, 0.4, epsilon = 1e-12);
    let cfg = IcrConfig {
        kl_tol: 1e-20,
        ..Default::default()
    };
    assert_eq!(
        compatibility_check(&model, &cycle, &cfg, tol).unwrap(),
        Compatibility::Incompatible
    );
    println!("acceptance 10 (order-dependent limits flagged incompatible): PASS");
}
