//! Updating cycles: which orders of the conditionals allow the replacement
//! operators to be chained cyclically.
//!
//! An order is permissible when each conditional's parent set is contained in
//! the scope of the previous conditional, wrapping around. The default mode
//! additionally requires the containment to be strict at one position or
//! more; strict mode requires it at every position.

use std::collections::BTreeSet;
use std::fmt;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::model::{ConditionalModel, VarSet};

/// Enumeration guard: orders are enumerated factorially.
pub const MAX_ENUMERATION: usize = 9;

/// How literal to be about strict containment of parent sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CycleMode {
    /// Containment per step, proper containment somewhere in the cycle.
    #[default]
    Permissive,
    /// Proper containment at every step.
    Strict,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    /// Parents of the next conditional stick out of the current scope.
    ParentsNotCovered { parents: VarSet, scope: VarSet },
    /// Strict mode: the current scope equals the next parent set.
    NoProperStep { parents: VarSet, scope: VarSet },
    /// Permissive mode: every step degenerates to a pure relabeling.
    NoStrictStepAnywhere,
}

/// One reason a cycle was rejected, attached to the step that failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleViolation {
    /// Step index within the order (step `i` chains conditional `order[i]`
    /// into conditional `order[i+1]`, cyclically).
    pub position: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for CycleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::ParentsNotCovered { parents, scope } => write!(
                f,
                "step {}: parents {} of the next conditional are not within the current scope {}",
                self.position + 1,
                parents,
                scope
            ),
            ViolationKind::NoProperStep { parents, scope } => write!(
                f,
                "step {}: parents {} equal the current scope {} (strict mode)",
                self.position + 1,
                parents,
                scope
            ),
            ViolationKind::NoStrictStepAnywhere => {
                write!(f, "no step drops any variable; the cycle never contracts")
            }
        }
    }
}

/// A checked updating order over the model's conditionals.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdatingCycle {
    order: Vec<usize>,
    permissible: bool,
    violations: Vec<CycleViolation>,
}

impl UpdatingCycle {
    /// The order as 0-based conditional indices, in update order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn permissible(&self) -> bool {
        self.permissible
    }

    pub fn violations(&self) -> &[CycleViolation] {
        &self.violations
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `<2,1,3>` style rendering, 1-based like the CLI.
    pub fn display(&self) -> String {
        format!("<{}>", self.order.iter().map(|i| (i + 1).to_string()).join(","))
    }

    pub fn violation_summary(&self) -> String {
        self.violations.iter().map(|v| v.to_string()).join("; ")
    }
}

impl fmt::Display for UpdatingCycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display())
    }
}

fn check_permutation(order: &[usize], l: usize) -> Result<()> {
    let mut seen = vec![false; l];
    if order.len() != l {
        return Err(Error::NotAPermutation {
            order: order.iter().map(|i| i + 1).collect(),
            expected: l,
        });
    }
    for &i in order {
        if i >= l || seen[i] {
            return Err(Error::NotAPermutation {
                order: order.iter().map(|i| i + 1).collect(),
                expected: l,
            });
        }
        seen[i] = true;
    }
    Ok(())
}

/// Checks one order of the model's conditionals (0-based indices).
pub fn is_permissible(
    model: &ConditionalModel,
    order: &[usize],
    mode: CycleMode,
) -> Result<UpdatingCycle> {
    let l = model.len();
    check_permutation(order, l)?;
    let scopes: Vec<VarSet> = (0..l).map(|i| model.scope_of(i)).collect();
    let mut violations = Vec::new();
    let mut any_proper = false;
    for i in 0..l {
        let cur = order[i];
        let next = order[(i + 1) % l];
        let parents_next = model.block(next).1;
        if !parents_next.is_subset(&scopes[cur]) {
            violations.push(CycleViolation {
                position: i,
                kind: ViolationKind::ParentsNotCovered {
                    parents: parents_next.clone(),
                    scope: scopes[cur].clone(),
                },
            });
            continue;
        }
        let dropped = scopes[cur].difference(parents_next);
        if dropped.is_empty() {
            if mode == CycleMode::Strict {
                violations.push(CycleViolation {
                    position: i,
                    kind: ViolationKind::NoProperStep {
                        parents: parents_next.clone(),
                        scope: scopes[cur].clone(),
                    },
                });
            }
        } else {
            any_proper = true;
        }
    }
    if mode == CycleMode::Permissive && violations.is_empty() && !any_proper {
        violations.push(CycleViolation {
            position: 0,
            kind: ViolationKind::NoStrictStepAnywhere,
        });
    }
    Ok(UpdatingCycle {
        order: order.to_vec(),
        permissible: violations.is_empty(),
        violations,
    })
}

/// Rotates an order so its smallest index comes first; rotations describe the
/// same cycle started at a different block.
pub fn canonical_rotation(order: &[usize]) -> Vec<usize> {
    if order.is_empty() {
        return Vec::new();
    }
    let start = order
        .iter()
        .enumerate()
        .min_by_key(|(_, &v)| v)
        .map(|(k, _)| k)
        .unwrap();
    order[start..].iter().chain(order[..start].iter()).copied().collect()
}

/// Canonical representatives of all rotation classes of `0..l`.
pub fn rotation_classes(l: usize) -> Vec<Vec<usize>> {
    let mut seen = BTreeSet::new();
    for perm in (0..l).permutations(l) {
        seen.insert(canonical_rotation(&perm));
    }
    seen.into_iter().collect()
}

/// All permissible cycles, one canonical representative per rotation class.
///
/// Reversed orders are genuinely different cycles and are kept apart.
pub fn enumerate_permissible(
    model: &ConditionalModel,
    mode: CycleMode,
) -> Result<Vec<UpdatingCycle>> {
    let l = model.len();
    if l > MAX_ENUMERATION {
        return Err(Error::TooManyConditionals {
            count: l,
            max: MAX_ENUMERATION,
        });
    }
    let mut out = Vec::new();
    for canon in rotation_classes(l) {
        let cycle = is_permissible(model, &canon, mode)?;
        if cycle.permissible() {
            out.push(cycle);
        }
    }
    Ok(out)
}

/// Whether a conditional involves every variable of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditionality {
    Full,
    NonFull,
}

/// Flags each conditional as full or non-full.
pub fn classify(model: &ConditionalModel) -> Vec<Conditionality> {
    (0..model.len())
        .map(|i| {
            if model.is_full(i) {
                Conditionality::Full
            } else {
                Conditionality::NonFull
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::DiscreteConditional;
    use crate::model::{Conditionals, VariableSpec};
    use proptest::prelude::*;

    /// Binary discrete model with the given (target, parents) blocks and
    /// uniform tables; cycle analysis only reads the blocks.
    fn model_with_blocks(d: usize, blocks: &[(Vec<usize>, Vec<usize>)]) -> ConditionalModel {
        let variables: Vec<VariableSpec> =
            (0..d).map(|i| VariableSpec::discrete(format!("X{}", i + 1), 2)).collect();
        let conds: Vec<DiscreteConditional> = blocks
            .iter()
            .map(|(a, b)| {
                let target = VarSet::new(a.clone()).unwrap();
                let parents = VarSet::new(b.clone()).unwrap();
                let nt = 1usize << target.len();
                let np = 1usize << parents.len();
                DiscreteConditional::new(
                    target.clone(),
                    parents,
                    vec![2; target.len()],
                    vec![2; b.len()],
                    vec![1.0 / nt as f64; nt * np],
                )
                .unwrap()
            })
            .collect();
        ConditionalModel::new(variables, Conditionals::Discrete(conds)).unwrap()
    }

    /// {f(1|2), f(2|3), f(3|1)} indexed by target variable.
    fn chain_model() -> ConditionalModel {
        model_with_blocks(
            3,
            &[(vec![0], vec![1]), (vec![1], vec![2]), (vec![2], vec![0])],
        )
    }

    fn full_model(d: usize) -> ConditionalModel {
        let blocks: Vec<(Vec<usize>, Vec<usize>)> = (0..d)
            .map(|i| (vec![i], (0..d).filter(|&j| j != i).collect()))
            .collect();
        model_with_blocks(d, &blocks)
    }

    #[test]
    fn chain_order_132_is_permissible() {
        let cycle = is_permissible(&chain_model(), &[0, 2, 1], CycleMode::Permissive).unwrap();
        assert!(cycle.permissible());
        assert_eq!(cycle.display(), "<1,3,2>");
    }

    #[test]
    fn chain_order_123_fails_on_parents() {
        let cycle = is_permissible(&chain_model(), &[0, 1, 2], CycleMode::Permissive).unwrap();
        assert!(!cycle.permissible());
        let v = &cycle.violations()[0];
        assert_eq!(v.position, 0);
        match &v.kind {
            ViolationKind::ParentsNotCovered { parents, scope } => {
                assert_eq!(parents.as_slice(), &[2]);
                assert_eq!(scope.as_slice(), &[0, 1]);
            }
            other => panic!("unexpected violation {:?}", other),
        }
    }

    #[test]
    fn full_conditionals_accept_every_order() {
        let model = full_model(3);
        for perm in (0..3).permutations(3) {
            let cycle = is_permissible(&model, &perm, CycleMode::Permissive).unwrap();
            assert!(cycle.permissible(), "order {:?} rejected", perm);
        }
    }

    #[test]
    fn rejects_non_permutations() {
        let model = chain_model();
        assert!(matches!(
            is_permissible(&model, &[0, 0, 1], CycleMode::Permissive),
            Err(Error::NotAPermutation { .. })
        ));
        assert!(matches!(
            is_permissible(&model, &[0, 1], CycleMode::Permissive),
            Err(Error::NotAPermutation { .. })
        ));
    }

    #[test]
    fn enumerate_chain_model() {
        let cycles = enumerate_permissible(&chain_model(), CycleMode::Permissive).unwrap();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].order(), &[0, 2, 1]);
    }

    #[test]
    fn enumerate_pcgs_model() {
        // conditionals indexed by target: f(1|2), f(2|1,3), f(3|1)
        let model = model_with_blocks(
            3,
            &[(vec![0], vec![1]), (vec![1], vec![0, 2]), (vec![2], vec![0])],
        );
        let cycles = enumerate_permissible(&model, CycleMode::Permissive).unwrap();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].order(), &[0, 2, 1]);
        // strict mode rejects it: the full conditional consumes the whole scope
        let strict = enumerate_permissible(&model, CycleMode::Strict).unwrap();
        assert!(strict.is_empty());
    }

    #[test]
    fn enumerate_full_model_dedups_rotations() {
        let cycles = enumerate_permissible(&full_model(3), CycleMode::Permissive).unwrap();
        assert_eq!(cycles.len(), 2);
        assert_eq!(cycles[0].order(), &[0, 1, 2]);
        assert_eq!(cycles[1].order(), &[0, 2, 1]);
    }

    #[test]
    fn enumerate_two_conditionals() {
        let model = model_with_blocks(2, &[(vec![0], vec![1]), (vec![1], vec![0])]);
        let cycles = enumerate_permissible(&model, CycleMode::Permissive).unwrap();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].order(), &[0, 1]);
    }

    #[test]
    fn enumeration_guard() {
        let blocks: Vec<(Vec<usize>, Vec<usize>)> =
            (0..10).map(|i| (vec![i], vec![(i + 1) % 10])).collect();
        let model = model_with_blocks(10, &blocks);
        assert!(matches!(
            enumerate_permissible(&model, CycleMode::Permissive),
            Err(Error::TooManyConditionals { count: 10, .. })
        ));
    }

    #[test]
    fn classify_examples() {
        let model = model_with_blocks(
            3,
            &[(vec![0], vec![1]), (vec![1], vec![0, 2]), (vec![2], vec![0])],
        );
        let flags = classify(&model);
        assert_eq!(flags[0], Conditionality::NonFull);
        assert_eq!(flags[1], Conditionality::Full);
        assert_eq!(flags[2], Conditionality::NonFull);
        let two = model_with_blocks(2, &[(vec![0], vec![1]), (vec![1], vec![0])]);
        assert_eq!(classify(&two), vec![Conditionality::Full, Conditionality::Full]);
    }

    #[test]
    fn strict_mode_keeps_proper_chains() {
        let cycle = is_permissible(&chain_model(), &[0, 2, 1], CycleMode::Strict).unwrap();
        assert!(cycle.permissible());
    }

    proptest! {
        #[test]
        fn full_models_accept_all_orders(d in 2usize..=5, seed in 0u64..100) {
            use rand::prelude::*;
            use rand_chacha::ChaCha8Rng;
            let model = full_model(d);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..d).collect();
            order.shuffle(&mut rng);
            let cycle = is_permissible(&model, &order, CycleMode::Permissive).unwrap();
            prop_assert!(cycle.permissible());
        }

        #[test]
        fn rotations_preserve_permissibility(rot in 0usize..3) {
            let model = chain_model();
            let base = [0usize, 2, 1];
            let rotated: Vec<usize> =
                (0..3).map(|i| base[(i + rot) % 3]).collect();
            let cycle = is_permissible(&model, &rotated, CycleMode::Permissive).unwrap();
            prop_assert!(cycle.permissible());
        }
    }

    #[test]
    fn enumeration_agrees_with_exhaustive_filter() {
        for model in [chain_model(), full_model(4)] {
            let enumerated: BTreeSet<Vec<usize>> =
                enumerate_permissible(&model, CycleMode::Permissive)
                    .unwrap()
                    .into_iter()
                    .map(|c| c.order().to_vec())
                    .collect();
            let mut expected = BTreeSet::new();
            for perm in (0..model.len()).permutations(model.len()) {
                if is_permissible(&model, &perm, CycleMode::Permissive).unwrap().permissible() {
                    expected.insert(canonical_rotation(&perm));
                }
            }
            assert_eq!(enumerated, expected);
        }
    }
}
