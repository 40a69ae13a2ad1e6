//! Variable declarations, variable sets and the conditional model container.
//!
//! A model declares `d` variables (all discrete or all continuous) and a
//! collection of `L >= 2` conditionals `f(target | parents)` over disjoint
//! blocks of those variables. Models are loaded from a single JSON document,
//! see [`ConditionalModel::from_path`].

use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::discrete::DiscreteConditional;
use crate::error::{Error, Result};
use crate::gaussian::GaussianConditional;

/// Kind of a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Discrete { support_size: usize },
    Continuous,
}

/// A named variable. Its index in the model is its declaration position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VarKind,
}

impl VariableSpec {
    pub fn discrete(name: impl Into<String>, support_size: usize) -> Self {
        Self {
            name: name.into(),
            kind: VarKind::Discrete { support_size },
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: VarKind::Continuous,
        }
    }
}

/// An ordered set of variable indices, kept sorted ascending.
///
/// All tensors and moment blocks are laid out in this sorted order, so a
/// variable set fixes the layout of every object scoped by it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VarSet(Vec<usize>);

impl VarSet {
    /// Builds a set from arbitrary indices; sorts them and rejects duplicates.
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidModel(format!(
                "duplicate variable index in set {:?}",
                members
            )));
        }
        Ok(Self(members))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn singleton(index: usize) -> Self {
        Self(vec![index])
    }

    /// The full set `{0, .., d-1}`.
    pub fn full(d: usize) -> Self {
        Self((0..d).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    /// Position of `index` within the sorted member list.
    pub fn position(&self, index: usize) -> Option<usize> {
        self.0.binary_search(&index).ok()
    }

    pub fn is_subset(&self, other: &VarSet) -> bool {
        self.0.iter().all(|&v| other.contains(v))
    }

    pub fn union(&self, other: &VarSet) -> VarSet {
        let mut v: Vec<usize> = self.0.iter().chain(other.0.iter()).copied().collect();
        v.sort_unstable();
        v.dedup();
        VarSet(v)
    }

    pub fn difference(&self, other: &VarSet) -> VarSet {
        VarSet(self.0.iter().copied().filter(|&v| !other.contains(v)).collect())
    }

    pub fn intersection(&self, other: &VarSet) -> VarSet {
        VarSet(self.0.iter().copied().filter(|&v| other.contains(v)).collect())
    }
}

impl fmt::Display for VarSet {
    /// Renders members 1-based, matching the CLI convention.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", v + 1)?;
        }
        write!(f, "}}")
    }
}

impl From<VarSet> for Vec<usize> {
    fn from(s: VarSet) -> Self {
        s.0
    }
}

/// The conditionals of a model, one family per model.
#[derive(Debug, Clone)]
pub enum Conditionals {
    Discrete(Vec<DiscreteConditional>),
    Gaussian(Vec<GaussianConditional>),
}

/// Model family tag, mirroring the `family` field of the JSON format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Discrete,
    Gaussian,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Discrete => write!(f, "discrete"),
            Family::Gaussian => write!(f, "gaussian"),
        }
    }
}

/// A conditionally specified model: variable declarations plus `L`
/// conditionals of one family.
#[derive(Debug, Clone)]
pub struct ConditionalModel {
    variables: Vec<VariableSpec>,
    conditionals: Conditionals,
}

impl ConditionalModel {
    pub fn new(variables: Vec<VariableSpec>, conditionals: Conditionals) -> Result<Self> {
        let model = Self {
            variables,
            conditionals,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let d = self.variables.len();
        if d == 0 {
            return Err(Error::InvalidModel("no variables declared".into()));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if self.variables[i].name == self.variables[j].name {
                    return Err(Error::InvalidModel(format!(
                        "duplicate variable name {:?}",
                        self.variables[i].name
                    )));
                }
            }
        }
        let all_discrete = self
            .variables
            .iter()
            .all(|v| matches!(v.kind, VarKind::Discrete { .. }));
        let all_continuous = self
            .variables
            .iter()
            .all(|v| matches!(v.kind, VarKind::Continuous));
        if !all_discrete && !all_continuous {
            return Err(Error::InvalidModel(
                "mixed discrete/continuous models are not supported".into(),
            ));
        }
        for v in &self.variables {
            if let VarKind::Discrete { support_size } = v.kind {
                if support_size < 2 {
                    return Err(Error::InvalidModel(format!(
                        "variable {:?} needs a support of at least 2 states",
                        v.name
                    )));
                }
            }
        }
        match &self.conditionals {
            Conditionals::Discrete(conds) => {
                if !all_discrete {
                    return Err(Error::InvalidModel(
                        "discrete conditionals over continuous variables".into(),
                    ));
                }
                if conds.len() < 2 {
                    return Err(Error::InvalidModel("a model needs at least 2 conditionals".into()));
                }
                for (k, c) in conds.iter().enumerate() {
                    self.check_block(k, c.target(), c.parents())?;
                    // declared supports must match the conditional's tables
                    for (pos, &v) in c.target().iter().enumerate() {
                        if self.support_of(v)? != c.target_sizes()[pos] {
                            return Err(Error::InvalidModel(format!(
                                "conditional {} disagrees with the declared support of {}",
                                k + 1,
                                self.variables[v].name
                            )));
                        }
                    }
                    for (pos, &v) in c.parents().iter().enumerate() {
                        if self.support_of(v)? != c.parent_sizes()[pos] {
                            return Err(Error::InvalidModel(format!(
                                "conditional {} disagrees with the declared support of {}",
                                k + 1,
                                self.variables[v].name
                            )));
                        }
                    }
                }
            }
            Conditionals::Gaussian(conds) => {
                if !all_continuous {
                    return Err(Error::InvalidModel(
                        "gaussian conditionals over discrete variables".into(),
                    ));
                }
                if conds.len() < 2 {
                    return Err(Error::InvalidModel("a model needs at least 2 conditionals".into()));
                }
                for (k, c) in conds.iter().enumerate() {
                    self.check_block(k, c.target(), c.parents())?;
                }
            }
        }
        Ok(())
    }

    fn check_block(&self, k: usize, target: &VarSet, parents: &VarSet) -> Result<()> {
        let d = self.variables.len();
        if target.is_empty() {
            return Err(Error::InvalidModel(format!("conditional {} has an empty target", k + 1)));
        }
        for &v in target.iter().chain(parents.iter()) {
            if v >= d {
                return Err(Error::InvalidModel(format!(
                    "conditional {} references undeclared variable index {}",
                    k + 1,
                    v + 1
                )));
            }
        }
        Ok(())
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn conditionals(&self) -> &Conditionals {
        &self.conditionals
    }

    pub fn family(&self) -> Family {
        match self.conditionals {
            Conditionals::Discrete(_) => Family::Discrete,
            Conditionals::Gaussian(_) => Family::Gaussian,
        }
    }

    /// Number of conditionals `L`.
    pub fn len(&self) -> usize {
        match &self.conditionals {
            Conditionals::Discrete(c) => c.len(),
            Conditionals::Gaussian(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of declared variables `d`.
    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    /// Target and parent sets of conditional `i`.
    pub fn block(&self, i: usize) -> (&VarSet, &VarSet) {
        match &self.conditionals {
            Conditionals::Discrete(c) => (c[i].target(), c[i].parents()),
            Conditionals::Gaussian(c) => (c[i].target(), c[i].parents()),
        }
    }

    /// Scope of conditional `i`: target union parents.
    pub fn scope_of(&self, i: usize) -> VarSet {
        let (a, b) = self.block(i);
        a.union(b)
    }

    /// The full variable set.
    pub fn full_set(&self) -> VarSet {
        VarSet::full(self.dim())
    }

    /// True when conditional `i` involves every declared variable.
    pub fn is_full(&self, i: usize) -> bool {
        self.scope_of(i).len() == self.dim()
    }

    pub fn support_of(&self, var: usize) -> Result<usize> {
        match self.variables[var].kind {
            VarKind::Discrete { support_size } => Ok(support_size),
            VarKind::Continuous => Err(Error::InvalidModel(format!(
                "variable {:?} is continuous",
                self.variables[var].name
            ))),
        }
    }

    /// Support sizes for the members of `set`, in sorted order.
    pub fn sizes_for(&self, set: &VarSet) -> Result<Vec<usize>> {
        set.iter().map(|&v| self.support_of(v)).collect()
    }

    pub fn name(&self, var: usize) -> &str {
        &self.variables[var].name
    }

    pub fn names_for(&self, set: &VarSet) -> Vec<String> {
        set.iter().map(|&v| self.variables[v].name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::InvalidModel(format!("unknown variable name {:?}", name)))
    }

    pub fn discrete(&self) -> Result<&[DiscreteConditional]> {
        match &self.conditionals {
            Conditionals::Discrete(c) => Ok(c),
            Conditionals::Gaussian(_) => Err(Error::InvalidModel(
                "expected a discrete model, found a gaussian one".into(),
            )),
        }
    }

    pub fn gaussian(&self) -> Result<&[GaussianConditional]> {
        match &self.conditionals {
            Conditionals::Gaussian(c) => Ok(c),
            Conditionals::Discrete(_) => Err(Error::InvalidModel(
                "expected a gaussian model, found a discrete one".into(),
            )),
        }
    }

    /// Loads a model from the JSON file format.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Parses a model from a JSON string.
    ///
    /// The document has three keys: `variables` (ordered list of
    /// `{name, kind, support_size?}`), `family` (`"discrete"` or
    /// `"gaussian"`), and `conditionals`. A discrete conditional carries a
    /// nested `table` whose outer levels run over the parent variables in
    /// sorted declaration order and whose inner levels run over the target
    /// variables, also sorted. A gaussian conditional carries `coef`
    /// (rows per target variable, columns per parent variable), `intercept`
    /// and `cond_cov`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawModel = serde_json::from_str(text)?;
        raw.build()
    }
}

#[derive(Deserialize)]
struct RawModel {
    variables: Vec<RawVariable>,
    family: String,
    conditionals: Vec<RawConditional>,
}

#[derive(Deserialize)]
struct RawVariable {
    name: String,
    kind: String,
    #[serde(default)]
    support_size: Option<usize>,
}

#[derive(Deserialize)]
struct RawConditional {
    target: Vec<String>,
    #[serde(default)]
    parents: Vec<String>,
    #[serde(default)]
    table: Option<serde_json::Value>,
    #[serde(default)]
    coef: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    intercept: Option<Vec<f64>>,
    #[serde(default)]
    cond_cov: Option<Vec<Vec<f64>>>,
}

impl RawModel {
    fn build(self) -> Result<ConditionalModel> {
        let mut variables = Vec::with_capacity(self.variables.len());
        for v in &self.variables {
            let kind = match v.kind.as_str() {
                "discrete" => {
                    let s = v.support_size.ok_or_else(|| {
                        Error::InvalidModel(format!("variable {:?} misses support_size", v.name))
                    })?;
                    VarKind::Discrete { support_size: s }
                }
                "continuous" => VarKind::Continuous,
                other => {
                    return Err(Error::InvalidModel(format!(
                        "unknown variable kind {:?}",
                        other
                    )))
                }
            };
            variables.push(VariableSpec {
                name: v.name.clone(),
                kind,
            });
        }
        let index_of = |name: &str| -> Result<usize> {
            variables
                .iter()
                .position(|v| v.name == name)
                .ok_or_else(|| Error::InvalidModel(format!("unknown variable name {:?}", name)))
        };
        let resolve = |names: &[String]| -> Result<VarSet> {
            let idx: Result<Vec<usize>> = names.iter().map(|n| index_of(n)).collect();
            VarSet::new(idx?)
        };

        let conditionals = match self.family.as_str() {
            "discrete" => {
                let mut conds = Vec::with_capacity(self.conditionals.len());
                for (k, rc) in self.conditionals.iter().enumerate() {
                    let target = resolve(&rc.target)?;
                    let parents = resolve(&rc.parents)?;
                    let target_sizes: Vec<usize> = target
                        .iter()
                        .map(|&v| match variables[v].kind {
                            VarKind::Discrete { support_size } => Ok(support_size),
                            VarKind::Continuous => Err(Error::InvalidModel(format!(
                                "continuous variable {:?} in a discrete model",
                                variables[v].name
                            ))),
                        })
                        .collect::<Result<_>>()?;
                    let parent_sizes: Vec<usize> = parents
                        .iter()
                        .map(|&v| match variables[v].kind {
                            VarKind::Discrete { support_size } => Ok(support_size),
                            VarKind::Continuous => Err(Error::InvalidModel(format!(
                                "continuous variable {:?} in a discrete model",
                                variables[v].name
                            ))),
                        })
                        .collect::<Result<_>>()?;
                    let value = rc.table.as_ref().ok_or_else(|| {
                        Error::InvalidModel(format!("conditional {} misses its table", k + 1))
                    })?;
                    let dims: Vec<usize> = parent_sizes
                        .iter()
                        .chain(target_sizes.iter())
                        .copied()
                        .collect();
                    let mut flat = Vec::with_capacity(dims.iter().product());
                    flatten_numbers(value, &dims, k, &mut flat)?;
                    conds.push(DiscreteConditional::new(
                        target,
                        parents,
                        target_sizes,
                        parent_sizes,
                        flat,
                    )?);
                }
                Conditionals::Discrete(conds)
            }
            "gaussian" => {
                let mut conds = Vec::with_capacity(self.conditionals.len());
                for (k, rc) in self.conditionals.iter().enumerate() {
                    let target = resolve(&rc.target)?;
                    let parents = resolve(&rc.parents)?;
                    let missing = |field: &str| {
                        Error::InvalidModel(format!("conditional {} misses {}", k + 1, field))
                    };
                    let coef = rc.coef.as_ref().ok_or_else(|| missing("coef"))?;
                    let intercept = rc.intercept.as_ref().ok_or_else(|| missing("intercept"))?;
                    let cond_cov = rc.cond_cov.as_ref().ok_or_else(|| missing("cond_cov"))?;
                    conds.push(GaussianConditional::from_rows(
                        target, parents, coef, intercept, cond_cov,
                    )?);
                }
                Conditionals::Gaussian(conds)
            }
            other => {
                return Err(Error::InvalidModel(format!("unknown family {:?}", other)));
            }
        };
        ConditionalModel::new(variables, conditionals)
    }
}

/// Flattens the nested table of a discrete conditional, checking every
/// nesting level against the expected dimension.
fn flatten_numbers(
    value: &serde_json::Value,
    dims: &[usize],
    cond_index: usize,
    out: &mut Vec<f64>,
) -> Result<()> {
    match dims.split_first() {
        None => match value.as_f64() {
            Some(x) => {
                out.push(x);
                Ok(())
            }
            None => Err(Error::InvalidModel(format!(
                "conditional {}: expected a number, found {}",
                cond_index + 1,
                value
            ))),
        },
        Some((&first, rest)) => {
            let arr = value.as_array().ok_or_else(|| {
                Error::InvalidModel(format!(
                    "conditional {}: expected an array of length {}, found {}",
                    cond_index + 1,
                    first,
                    value
                ))
            })?;
            if arr.len() != first {
                return Err(Error::InvalidModel(format!(
                    "conditional {}: expected an array of length {}, found length {}",
                    cond_index + 1,
                    first,
                    arr.len()
                )));
            }
            for item in arr {
                flatten_numbers(item, rest, cond_index, out)?;
            }
            Ok(())
        }
    }
}
