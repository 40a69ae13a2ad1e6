//! Dense discrete distributions, marginalization and divergence metrics.
//!
//! Tensors are row-major over the scope in sorted variable order: the first
//! scope variable is the slowest index. Every operation canonicalizes to that
//! layout, so distributions coming out of different modules always agree on
//! indexing.

use crate::error::{Error, Result};
use crate::model::{ConditionalModel, Conditionals, VarSet, VariableSpec};

/// Normalization slack accepted by the constructors.
pub const SUM_TOL: f64 = 1e-12;

/// A dense probability tensor over a sorted set of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    scope: VarSet,
    sizes: Vec<usize>,
    table: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validating constructor: entries non-negative, summing to one within
    /// [`SUM_TOL`], table length equal to the product of the supports.
    pub fn new(scope: VarSet, sizes: Vec<usize>, table: Vec<f64>) -> Result<Self> {
        if sizes.len() != scope.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} sizes for a scope of {} variables",
                sizes.len(),
                scope.len()
            )));
        }
        let expected: usize = sizes.iter().product();
        if table.len() != expected {
            return Err(Error::InvalidDistribution(format!(
                "table has {} entries, scope {} needs {}",
                table.len(),
                scope,
                expected
            )));
        }
        if let Some(p) = table.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("invalid entry {}", p)));
        }
        let sum: f64 = table.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {} instead of 1",
                sum
            )));
        }
        Ok(Self { scope, sizes, table })
    }

    /// Internal constructor for tensors that are normalized by construction.
    pub(crate) fn new_unchecked(scope: VarSet, sizes: Vec<usize>, table: Vec<f64>) -> Self {
        debug_assert_eq!(sizes.len(), scope.len());
        debug_assert_eq!(table.len(), sizes.iter().product::<usize>());
        debug_assert!((table.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self { scope, sizes, table }
    }

    /// The uniform distribution over the given scope.
    pub fn uniform(scope: VarSet, sizes: Vec<usize>) -> Self {
        let n: usize = sizes.iter().product();
        Self {
            scope,
            sizes,
            table: vec![1.0 / n as f64; n],
        }
    }

    pub fn scope(&self) -> &VarSet {
        &self.scope
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Row-major strides for the scope.
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.sizes)
    }

    /// Linear index of a full assignment (one value per scope variable).
    pub fn index_of(&self, assignment: &[usize]) -> usize {
        debug_assert_eq!(assignment.len(), self.sizes.len());
        let mut idx = 0;
        for (k, &v) in assignment.iter().enumerate() {
            debug_assert!(v < self.sizes[k]);
            idx = idx * self.sizes[k] + v;
        }
        idx
    }

    pub fn prob(&self, assignment: &[usize]) -> f64 {
        self.table[self.index_of(assignment)]
    }
}

pub(crate) fn strides_of(sizes: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; sizes.len()];
    for k in (0..sizes.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * sizes[k + 1];
    }
    strides
}

fn same_scope(q: &DiscreteDistribution, h: &DiscreteDistribution) -> Result<()> {
    if q.scope != h.scope || q.sizes != h.sizes {
        return Err(Error::ScopeMismatch {
            left: q.scope.to_string(),
            right: h.scope.to_string(),
        });
    }
    Ok(())
}

/// Sums `h` over `scope \ u`, returning the `u`-marginal.
pub fn marginalize(h: &DiscreteDistribution, u: &VarSet) -> Result<DiscreteDistribution> {
    if !u.is_subset(&h.scope) {
        return Err(Error::NotSubset {
            set: u.to_string(),
            scope: h.scope.to_string(),
        });
    }
    if u == &h.scope {
        return Ok(h.clone());
    }
    let out_sizes: Vec<usize> = u.iter().map(|&v| h.sizes[h.scope.position(v).unwrap()]).collect();
    let out_strides = strides_of(&out_sizes);
    // contribution of each input digit to the output index (0 for summed-out vars)
    let contrib: Vec<usize> = h
        .scope
        .iter()
        .map(|&v| u.position(v).map_or(0, |k| out_strides[k]))
        .collect();
    let mut out = vec![0.0; out_sizes.iter().product()];
    let mut digits = vec![0usize; h.sizes.len()];
    let mut out_idx = 0usize;
    for &p in &h.table {
        out[out_idx] += p;
        for k in (0..digits.len()).rev() {
            digits[k] += 1;
            if digits[k] < h.sizes[k] {
                out_idx += contrib[k];
                break;
            }
            digits[k] = 0;
            out_idx -= (h.sizes[k] - 1) * contrib[k];
        }
    }
    Ok(DiscreteDistribution::new_unchecked(u.clone(), out_sizes, out))
}

/// Kullback-Leibler divergence of `q` from `h`, with the `0 log 0 = 0`
/// convention. Cells where `q > 0` but `h = 0` are rejected rather than
/// mapped to infinity.
///
/// Evaluated cell by cell as `q ln(q/h) - q + h`, which sums to the textbook
/// value for normalized inputs but is non-negative per cell, so tiny gaps
/// between nearly identical tensors are not swamped by their ~1e-16 mass
/// difference.
pub fn kl_divergence(q: &DiscreteDistribution, h: &DiscreteDistribution) -> Result<f64> {
    same_scope(q, h)?;
    let mut sum = 0.0;
    for (i, (&qi, &hi)) in q.table.iter().zip(&h.table).enumerate() {
        if qi > 0.0 {
            if hi <= 0.0 {
                return Err(Error::SupportViolation { index: i });
            }
            // ln(q/h) via ln_1p keeps tiny ratios accurate
            sum += qi * ((qi - hi) / hi).ln_1p() - (qi - hi);
        } else {
            sum += hi;
        }
    }
    Ok(sum.max(0.0))
}

/// KL gap for convergence traces: infinite instead of erroring when the
/// support shrinks between visits. Scopes are assumed equal.
pub(crate) fn kl_gap_unchecked(q: &DiscreteDistribution, h: &DiscreteDistribution) -> f64 {
    let mut sum = 0.0;
    for (&qi, &hi) in q.table.iter().zip(&h.table) {
        if qi > 0.0 {
            if hi <= 0.0 {
                return f64::INFINITY;
            }
            sum += qi * ((qi - hi) / hi).ln_1p() - (qi - hi);
        } else {
            sum += hi;
        }
    }
    sum.max(0.0)
}

/// Total variation distance: half the L1 distance.
pub fn total_variation(q: &DiscreteDistribution, h: &DiscreteDistribution) -> Result<f64> {
    same_scope(q, h)?;
    Ok(0.5 * q.table.iter().zip(&h.table).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// A conditional distribution of a target block given a parent block.
///
/// `rows` is parent-major: one distribution over the target configurations
/// per parent configuration, both blocks row-major in sorted variable order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteConditional {
    target: VarSet,
    parents: VarSet,
    target_sizes: Vec<usize>,
    parent_sizes: Vec<usize>,
    rows: Vec<f64>,
}

impl DiscreteConditional {
    pub fn new(
        target: VarSet,
        parents: VarSet,
        target_sizes: Vec<usize>,
        parent_sizes: Vec<usize>,
        rows: Vec<f64>,
    ) -> Result<Self> {
        if !target.intersection(&parents).is_empty() {
            return Err(Error::InvalidModel(format!(
                "target {} and parents {} overlap",
                target, parents
            )));
        }
        if target_sizes.len() != target.len() || parent_sizes.len() != parents.len() {
            return Err(Error::InvalidModel("size list does not match block".into()));
        }
        let nt: usize = target_sizes.iter().product();
        let np: usize = parent_sizes.iter().product();
        if rows.len() != nt * np {
            return Err(Error::InvalidDistribution(format!(
                "conditional table has {} entries, expected {}",
                rows.len(),
                nt * np
            )));
        }
        if let Some(p) = rows.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("invalid entry {}", p)));
        }
        for p in 0..np {
            let sum: f64 = rows[p * nt..(p + 1) * nt].iter().sum();
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidDistribution(format!(
                    "parent configuration {} sums to {} instead of 1",
                    p, sum
                )));
            }
        }
        Ok(Self {
            target,
            parents,
            target_sizes,
            parent_sizes,
            rows,
        })
    }

    /// Convenience constructor from one slice per parent configuration.
    pub fn from_rows(
        target: VarSet,
        parents: VarSet,
        target_sizes: Vec<usize>,
        parent_sizes: Vec<usize>,
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(target, parents, target_sizes, parent_sizes, flat)
    }

    pub fn target(&self) -> &VarSet {
        &self.target
    }

    pub fn parents(&self) -> &VarSet {
        &self.parents
    }

    pub fn target_sizes(&self) -> &[usize] {
        &self.target_sizes
    }

    pub fn parent_sizes(&self) -> &[usize] {
        &self.parent_sizes
    }

    pub fn scope(&self) -> VarSet {
        self.target.union(&self.parents)
    }

    pub fn n_target_configs(&self) -> usize {
        self.target_sizes.iter().product()
    }

    pub fn n_parent_configs(&self) -> usize {
        self.parent_sizes.iter().product()
    }

    /// The distribution over target configurations for one parent configuration.
    pub fn row(&self, parent_config: usize) -> &[f64] {
        let nt = self.n_target_configs();
        &self.rows[parent_config * nt..(parent_config + 1) * nt]
    }
}

/// Builds the compatible model of conditionals `f(a | b)` read off a joint
/// distribution, one per `(a, b)` block.
///
/// The joint must cover variables `0..scope.len()` so the resulting model can
/// declare them; variables are named `X1..Xd`. Fails with [`Error::ZeroMarginal`]
/// when some parent configuration carries no probability mass.
pub fn derive_conditionals(
    f: &DiscreteDistribution,
    blocks: &[(VarSet, VarSet)],
) -> Result<ConditionalModel> {
    let d = f.scope().len();
    if f.scope() != &VarSet::full(d) {
        return Err(Error::InvalidModel(
            "the joint must cover variables 0..d to derive a model from it".into(),
        ));
    }
    let mut conds = Vec::with_capacity(blocks.len());
    for (a, b) in blocks {
        if !a.intersection(b).is_empty() {
            return Err(Error::InvalidModel(format!("target {} and parents {} overlap", a, b)));
        }
        let scope = a.union(b);
        if !scope.is_subset(f.scope()) {
            return Err(Error::NotSubset {
                set: scope.to_string(),
                scope: f.scope().to_string(),
            });
        }
        let f_ab = marginalize(f, &scope)?;
        let f_b = marginalize(f, b)?;
        if let Some(p) = f_b.table().iter().position(|&x| x <= 0.0) {
            return Err(Error::ZeroMarginal { config: p });
        }
        let target_sizes: Vec<usize> =
            a.iter().map(|&v| f.sizes[f.scope.position(v).unwrap()]).collect();
        let parent_sizes: Vec<usize> =
            b.iter().map(|&v| f.sizes[f.scope.position(v).unwrap()]).collect();
        let nt: usize = target_sizes.iter().product();
        let np: usize = parent_sizes.iter().product();
        // scatter each joint cell into its (parent, target) slot
        let t_strides = strides_of(&target_sizes);
        let p_strides = strides_of(&parent_sizes);
        let mut rows = vec![0.0; nt * np];
        let mut digits = vec![0usize; scope.len()];
        let roles: Vec<(bool, usize)> = scope
            .iter()
            .map(|&v| match a.position(v) {
                Some(k) => (true, t_strides[k]),
                None => (false, p_strides[b.position(v).unwrap()]),
            })
            .collect();
        for (cell, &mass) in f_ab.table().iter().enumerate() {
            let _ = cell;
            let mut t_idx = 0;
            let mut p_idx = 0;
            for (k, &(is_target, stride)) in roles.iter().enumerate() {
                if is_target {
                    t_idx += digits[k] * stride;
                } else {
                    p_idx += digits[k] * stride;
                }
            }
            rows[p_idx * nt + t_idx] = mass / f_b.table()[p_idx];
            for k in (0..digits.len()).rev() {
                digits[k] += 1;
                if digits[k] < f_ab.sizes()[k] {
                    break;
                }
                digits[k] = 0;
            }
        }
        conds.push(DiscreteConditional::new(
            a.clone(),
            b.clone(),
            target_sizes,
            parent_sizes,
            rows,
        )?);
    }
    let variables: Vec<VariableSpec> = (0..d)
        .map(|v| VariableSpec::discrete(format!("X{}", v + 1), f.sizes[v]))
        .collect();
    ConditionalModel::new(variables, Conditionals::Discrete(conds))
}
