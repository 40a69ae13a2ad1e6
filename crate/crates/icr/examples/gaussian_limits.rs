//! Three full linear-Gaussian conditionals with strongly coupled means: one
//! update order settles into three distinct stationary joints, the other
//! order has none and blows up.
//!
//! ```bash
//! cargo run --example gaussian_limits
//! ```

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};

use icr::cycle::{is_permissible, CycleMode};
use icr::gaussian_icr::{
    gaussian_icr_run, gaussian_mutual_stationarity_check, GaussianIcrConfig,
};
use icr::report::rational_label;
use icr::{ConditionalModel, GaussianDistribution, VarSet};

fn print_cov(cov: &DMatrix<f64>) {
    for i in 0..cov.nrows() {
        let numeric: Vec<String> = (0..cov.ncols()).map(|j| format!("{:>8.4}", cov[(i, j)])).collect();
        let rational: Vec<String> = (0..cov.ncols())
            .map(|j| rational_label(cov[(i, j)]).unwrap_or_else(|| "?".into()))
            .collect();
        println!("    {}   = [{}]", numeric.join(" "), rational.join(", "));
    }
}

fn main() -> icr::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/gauss3_full.json");
    let model = ConditionalModel::from_path(&path)?;
    let q0 = GaussianDistribution::new(VarSet::full(3), DVector::zeros(3), DMatrix::identity(3, 3))?;
    let cfg = GaussianIcrConfig::default();

    // update X2, then X1, then X3
    let settling = is_permissible(&model, &[1, 0, 2], CycleMode::Permissive)?;
    let report = gaussian_icr_run(&model, &settling, &q0, &cfg)?;
    println!(
        "cycle {}: converged after {} cycles",
        settling.display(),
        report.cycles_used
    );
    for (i, limit) in report.stationary.iter().enumerate() {
        println!("  limit {} (covariance, with exact fractions):", i + 1);
        print_cov(limit.cov());
    }
    let check = gaussian_mutual_stationarity_check(&report.stationary, &model, &settling);
    println!("  one replacement step maps each limit to the next: {}", check.holds);

    // update X1, then X2, then X3: permissible but never stationary
    let diverging = is_permissible(&model, &[0, 1, 2], CycleMode::Permissive)?;
    let report = gaussian_icr_run(&model, &diverging, &q0, &cfg)?;
    println!(
        "cycle {}: converged = {}, divergence = {}",
        diverging.display(),
        report.converged,
        report
            .divergence
            .map(|d| d.to_string())
            .unwrap_or_else(|| "none".into())
    );
    Ok(())
}
