//! Two conditionals that cannot come from one joint distribution: the
//! replacement limits depend on the update order, and the compatibility
//! check says so.
//!
//! ```bash
//! cargo run --example incompatible_conditionals
//! ```

use std::path::PathBuf;

use icr::cycle::{is_permissible, CycleMode};
use icr::icr::{brute_force_fixed_point, compatibility_check, IcrConfig};
use icr::{total_variation, ConditionalModel};

fn main() -> icr::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/binary2_incompatible.json");
    let model = ConditionalModel::from_path(&path)?;

    let cycle = is_permissible(&model, &[0, 1], CycleMode::Permissive)?;
    // the two per-position limits of the same cycle
    let after_first = brute_force_fixed_point(&model, &cycle, 0)?;
    let after_second = brute_force_fixed_point(&model, &cycle, 1)?;

    println!("limit after updating X1 (keeps the model's X1|X2):");
    for (idx, p) in after_first.table().iter().enumerate() {
        println!("  state {}: {:.6}", idx, p);
    }
    println!("limit after updating X2 (keeps the model's X2|X1):");
    for (idx, p) in after_second.table().iter().enumerate() {
        println!("  state {}: {:.6}", idx, p);
    }
    println!(
        "total variation between the two limits: {:.6}",
        total_variation(&after_first, &after_second)?
    );

    let cfg = IcrConfig {
        kl_tol: 1e-20,
        ..Default::default()
    };
    let verdict = compatibility_check(&model, &cycle, &cfg, 1e-6)?;
    println!("compatibility verdict: {:?}", verdict);
    Ok(())
}
