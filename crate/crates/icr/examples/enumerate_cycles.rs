//! Decide which update orders of a conditional model admit cyclic
//! replacement, and classify each conditional as full or non-full.
//!
//! ```bash
//! cargo run --example enumerate_cycles
//! ```

use icr::cycle::{classify, enumerate_permissible, is_permissible, Conditionality, CycleMode};
use icr::{ConditionalModel, Conditionals, DiscreteConditional, VarSet, VariableSpec};

fn main() -> icr::Result<()> {
    // f(X1|X2), f(X2|X1,X3), f(X3|X1): two non-full conditionals and one
    // full one, so the update order is constrained
    let f1 = DiscreteConditional::from_rows(
        VarSet::singleton(0),
        VarSet::singleton(1),
        vec![2],
        vec![2],
        &[vec![0.4, 0.6], vec![0.6, 0.4]],
    )?;
    let f2 = DiscreteConditional::from_rows(
        VarSet::singleton(1),
        VarSet::new(vec![0, 2])?,
        vec![2],
        vec![2, 2],
        &[vec![0.4, 0.6], vec![0.4, 0.6], vec![0.8, 0.2], vec![0.4, 0.6]],
    )?;
    let f3 = DiscreteConditional::from_rows(
        VarSet::singleton(2),
        VarSet::singleton(0),
        vec![2],
        vec![2],
        &[vec![0.2, 0.8], vec![0.5, 0.5]],
    )?;
    let model = ConditionalModel::new(
        vec![
            VariableSpec::discrete("X1", 2),
            VariableSpec::discrete("X2", 2),
            VariableSpec::discrete("X3", 2),
        ],
        Conditionals::Discrete(vec![f1, f2, f3]),
    )?;

    println!("conditionals:");
    for (i, flag) in classify(&model).iter().enumerate() {
        let (a, b) = model.block(i);
        println!(
            "  {}: targets {} given {} -> {}",
            i + 1,
            a,
            b,
            match flag {
                Conditionality::Full => "full",
                Conditionality::NonFull => "non-full",
            }
        );
    }

    let cycles = enumerate_permissible(&model, CycleMode::Permissive)?;
    println!("\npermissible cycles (rotation classes):");
    for c in &cycles {
        println!("  {}", c.display());
    }

    // a rejected order explains itself
    let rejected = is_permissible(&model, &[0, 1, 2], CycleMode::Permissive)?;
    println!("\norder <1,2,3> permissible? {}", rejected.permissible());
    for v in rejected.violations() {
        println!("  {}", v);
    }
    Ok(())
}
