//! Cross-validate the deterministic limits with a seeded Gibbs-type chain:
//! the batch collected after each update position estimates that position's
//! stationary distribution, and entrywise z-scores quantify the agreement.
//!
//! ```bash
//! cargo run --release --example gibbs_cross_check
//! ```

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};

use icr::cycle::{is_permissible, CycleMode};
use icr::gaussian_icr::{gaussian_icr_run, GaussianIcrConfig};
use icr::sampler::{compare, run_chain, ChainConfig, StationaryLimit};
use icr::{ConditionalModel, GaussianDistribution, VarSet};

fn main() -> icr::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/gauss3_full.json");
    let model = ConditionalModel::from_path(&path)?;
    let cycle = is_permissible(&model, &[1, 0, 2], CycleMode::Permissive)?;

    let q0 = GaussianDistribution::new(VarSet::full(3), DVector::zeros(3), DMatrix::identity(3, 3))?;
    let limits = gaussian_icr_run(&model, &cycle, &q0, &GaussianIcrConfig::default())?.stationary;

    let cfg = ChainConfig {
        burn_in: 10_000,
        samples: 200_000,
        seed: 20240809,
        thin: 5,
    };
    println!(
        "running one chain: {} burn-in cycles, {} samples, thinning {}",
        cfg.burn_in, cfg.samples, cfg.thin
    );
    let batches = run_chain(&model, &cycle, &cfg)?;
    for (batch, limit) in batches.iter().zip(&limits) {
        let cmp = compare(batch, &StationaryLimit::Gaussian(limit.clone()))?;
        println!(
            "position {}: max |z| = {:.3} at {} -> {}",
            batch.position + 1,
            cmp.max_z,
            cmp.worst,
            if cmp.pass { "pass" } else { "FAIL" }
        );
    }

    // swapping in the wrong position's limit makes the mismatch obvious
    let wrong = compare(&batches[0], &StationaryLimit::Gaussian(limits[2].clone()))?;
    println!(
        "batch 1 against limit 3 (wrong on purpose): max |z| = {:.1} -> {}",
        wrong.max_z,
        if wrong.pass { "pass" } else { "FAIL" }
    );
    Ok(())
}
