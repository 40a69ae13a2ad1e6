//! The conditional replacement operator and its cyclic fixed-point iteration
//! over discrete models, together with an exact linear-algebra oracle and the
//! compatibility decision.
//!
//! One replacement step maps a distribution `h` to `f(a|b) * h_b`: the
//! `(a|b)`-conditional of `h` is swapped for the model's while the
//! `b`-marginal is kept. Chaining the steps along a permissible cycle and
//! watching the per-position gaps between successive visits yields the
//! stationary distribution of every position.

use nalgebra::{DMatrix, RowDVector};

use crate::cycle::UpdatingCycle;
use crate::discrete::{self, DiscreteConditional, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::model::{ConditionalModel, VarSet};

/// Joint-state cap for [`brute_force_fixed_point`].
pub const MAX_ORACLE_STATES: usize = 4096;

/// Total-variation tolerance of [`mutual_stationarity_check`].
pub const STATIONARITY_TOL: f64 = 1e-9;

/// Which per-position gap metric drives the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrackMetric {
    #[default]
    Kl,
    Tv,
}

/// Iteration controls for [`icr_run`].
#[derive(Debug, Clone)]
pub struct IcrConfig {
    pub max_cycles: usize,
    /// Stop once every per-position gap between successive visits falls
    /// below this bound.
    pub kl_tol: f64,
    pub track: TrackMetric,
}

impl Default for IcrConfig {
    fn default() -> Self {
        Self {
            max_cycles: 10_000,
            kl_tol: 1e-12,
            track: TrackMetric::Kl,
        }
    }
}

impl IcrConfig {
    fn validate(&self) -> Result<()> {
        if self.max_cycles < 1 {
            return Err(Error::InvalidConfig("max_cycles must be at least 1".into()));
        }
        if !(self.kl_tol > 0.0) {
            return Err(Error::InvalidConfig("kl_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Per-position gap between two successive visits of the same position.
#[derive(Debug, Clone, Copy)]
pub struct GapSample {
    pub kl: f64,
    pub tv: f64,
}

/// Outcome of a cyclic replacement run.
///
/// `stationary[i]` is the limit of the sequence observed right after the
/// `i`-th conditional of the cycle order was applied, so it lives on that
/// conditional's scope. `cycles_used` counts the cycles needed to reach the
/// reported iterates: convergence at the first verification pass reports 1.
#[derive(Debug, Clone)]
pub struct IcrReport {
    pub stationary: Vec<DiscreteDistribution>,
    /// `traces[i][k]` compares visit `k+2` of position `i` with visit `k+1`.
    pub traces: Vec<Vec<GapSample>>,
    pub converged: bool,
    pub cycles_used: usize,
    pub compatible: Option<bool>,
}

/// Replaces the `(target | parents)`-conditional of `h` with `f`, keeping
/// the parent marginal of `h`. Output scope is `target + parents`.
pub fn conditional_replacement(
    h: &DiscreteDistribution,
    f: &DiscreteConditional,
) -> Result<DiscreteDistribution> {
    if !f.parents().is_subset(h.scope()) {
        return Err(Error::NotPermissibleStep {
            parents: f.parents().to_string(),
            scope: h.scope().to_string(),
        });
    }
    for (k, &v) in f.parents().iter().enumerate() {
        let pos = h.scope().position(v).unwrap();
        if h.sizes()[pos] != f.parent_sizes()[k] {
            return Err(Error::InvalidModel(format!(
                "support size mismatch on variable {}",
                v + 1
            )));
        }
    }
    let hb = discrete::marginalize(h, f.parents())?;
    let out_scope = f.target().union(f.parents());
    let out_sizes: Vec<usize> = out_scope
        .iter()
        .map(|&v| match f.target().position(v) {
            Some(k) => f.target_sizes()[k],
            None => f.parent_sizes()[f.parents().position(v).unwrap()],
        })
        .collect();
    let out_strides = discrete::strides_of(&out_sizes);
    let parent_bases = index_bases(f.parents(), f.parent_sizes(), &out_scope, &out_strides);
    let target_bases = index_bases(f.target(), f.target_sizes(), &out_scope, &out_strides);
    let mut table = vec![0.0; out_sizes.iter().product()];
    for (p, &w) in hb.table().iter().enumerate() {
        if w == 0.0 {
            // mass never enters a zero parent cell; the slice stays zero
            continue;
        }
        let base = parent_bases[p];
        let row = f.row(p);
        for (t, &c) in row.iter().enumerate() {
            table[base + target_bases[t]] = c * w;
        }
    }
    Ok(DiscreteDistribution::new_unchecked(out_scope, out_sizes, table))
}

/// For each row-major configuration of `vars`, its contribution to the index
/// of an enclosing tensor laid out by `out_strides`.
fn index_bases(
    vars: &VarSet,
    sizes: &[usize],
    out_scope: &VarSet,
    out_strides: &[usize],
) -> Vec<usize> {
    let strides_in_out: Vec<usize> = vars
        .iter()
        .map(|&v| out_strides[out_scope.position(v).unwrap()])
        .collect();
    let n: usize = sizes.iter().product();
    let mut bases = Vec::with_capacity(n);
    let mut digits = vec![0usize; sizes.len()];
    let mut acc = 0usize;
    for _ in 0..n {
        bases.push(acc);
        for k in (0..sizes.len()).rev() {
            digits[k] += 1;
            if digits[k] < sizes[k] {
                acc += strides_in_out[k];
                break;
            }
            digits[k] = 0;
            acc -= (sizes[k] - 1) * strides_in_out[k];
        }
    }
    bases
}

/// Applies the explicit Markov kernel of `f` to `q`: builds the full
/// transition matrix over the joint states and multiplies. Agrees with
/// [`conditional_replacement`] entrywise; kept as an independent route.
pub fn markov_kernel_apply(
    q: &DiscreteDistribution,
    f: &DiscreteConditional,
) -> Result<DiscreteDistribution> {
    let scope = f.target().union(f.parents());
    if q.scope() != &scope {
        return Err(Error::ScopeMismatch {
            left: q.scope().to_string(),
            right: scope.to_string(),
        });
    }
    let sizes: Vec<usize> = scope
        .iter()
        .map(|&v| match f.target().position(v) {
            Some(k) => f.target_sizes()[k],
            None => f.parent_sizes()[f.parents().position(v).unwrap()],
        })
        .collect();
    if q.sizes() != sizes.as_slice() {
        return Err(Error::InvalidModel("support sizes disagree with the conditional".into()));
    }
    let strides = discrete::strides_of(&sizes);
    let parent_bases = index_bases(f.parents(), f.parent_sizes(), &scope, &strides);
    let target_bases = index_bases(f.target(), f.target_sizes(), &scope, &strides);
    let n = q.len();
    let parent_of = parent_config_of_states(&scope, &sizes, f);
    let mut t = DMatrix::<f64>::zeros(n, n);
    for s in 0..n {
        let p = parent_of[s];
        let row = f.row(p);
        let base = parent_bases[p];
        for (tc, &c) in row.iter().enumerate() {
            t[(s, base + target_bases[tc])] = c;
        }
    }
    let qv = RowDVector::from_row_slice(q.table());
    let out = qv * t;
    Ok(DiscreteDistribution::new_unchecked(
        scope,
        sizes,
        out.iter().copied().collect(),
    ))
}

/// Parent configuration index of every joint state of `scope`.
fn parent_config_of_states(scope: &VarSet, sizes: &[usize], f: &DiscreteConditional) -> Vec<usize> {
    let p_strides = discrete::strides_of(f.parent_sizes());
    let contrib: Vec<usize> = scope
        .iter()
        .map(|&v| f.parents().position(v).map_or(0, |k| p_strides[k]))
        .collect();
    let n: usize = sizes.iter().product();
    let mut out = Vec::with_capacity(n);
    let mut digits = vec![0usize; sizes.len()];
    let mut acc = 0usize;
    for _ in 0..n {
        out.push(acc);
        for k in (0..sizes.len()).rev() {
            digits[k] += 1;
            if digits[k] < sizes[k] {
                acc += contrib[k];
                break;
            }
            digits[k] = 0;
            acc -= (sizes[k] - 1) * contrib[k];
        }
    }
    out
}

fn require_permissible(cycle: &UpdatingCycle, l: usize) -> Result<()> {
    if cycle.len() != l {
        return Err(Error::NotAPermutation {
            order: cycle.order().iter().map(|i| i + 1).collect(),
            expected: l,
        });
    }
    if !cycle.permissible() {
        return Err(Error::NotPermissible {
            reasons: cycle.violation_summary(),
        });
    }
    Ok(())
}

/// Runs the replacement operators cyclically from `q0` until every
/// per-position gap between successive visits falls below `cfg.kl_tol`.
///
/// `q0` must live on the scope of the last conditional in the cycle order;
/// the first step then applies the first conditional of the order.
pub fn icr_run(
    model: &ConditionalModel,
    cycle: &UpdatingCycle,
    q0: &DiscreteDistribution,
    cfg: &IcrConfig,
) -> Result<IcrReport> {
    cfg.validate()?;
    let conds = model.discrete()?;
    require_permissible(cycle, conds.len())?;
    let order = cycle.order();
    let l = order.len();
    let c_last = model.scope_of(order[l - 1]);
    if q0.scope() != &c_last {
        return Err(Error::ScopeMismatch {
            left: q0.scope().to_string(),
            right: c_last.to_string(),
        });
    }
    let mut traces: Vec<Vec<GapSample>> = vec![Vec::new(); l];
    let mut prev: Option<Vec<DiscreteDistribution>> = None;
    let mut current = q0.clone();
    let mut converged = false;
    let mut cycles_used = cfg.max_cycles;
    let mut latest: Vec<DiscreteDistribution> = Vec::new();
    for k in 1..=cfg.max_cycles {
        let mut visit = Vec::with_capacity(l);
        for &j in order {
            current = conditional_replacement(&current, &conds[j])?;
            visit.push(current.clone());
        }
        if let Some(previous) = &prev {
            let mut all_below = true;
            for i in 0..l {
                let kl = discrete::kl_gap_unchecked(&visit[i], &previous[i]);
                let tv = discrete::total_variation(&visit[i], &previous[i])?;
                traces[i].push(GapSample { kl, tv });
                let gap = match cfg.track {
                    TrackMetric::Kl => kl,
                    TrackMetric::Tv => tv,
                };
                if !(gap < cfg.kl_tol) {
                    all_below = false;
                }
            }
            if all_below {
                converged = true;
                cycles_used = k - 1;
                latest = visit;
                break;
            }
        }
        latest = visit.clone();
        prev = Some(visit);
    }
    Ok(IcrReport {
        stationary: latest,
        traces,
        converged,
        cycles_used,
        compatible: None,
    })
}

/// The replacement step as an explicit linear map on vectorized
/// distributions: `out = M h` with one column per input state.
fn step_matrix(
    in_scope: &VarSet,
    in_sizes: &[usize],
    f: &DiscreteConditional,
) -> Result<(DMatrix<f64>, VarSet, Vec<usize>)> {
    if !f.parents().is_subset(in_scope) {
        return Err(Error::NotPermissibleStep {
            parents: f.parents().to_string(),
            scope: in_scope.to_string(),
        });
    }
    let out_scope = f.target().union(f.parents());
    let out_sizes: Vec<usize> = out_scope
        .iter()
        .map(|&v| match f.target().position(v) {
            Some(k) => f.target_sizes()[k],
            None => f.parent_sizes()[f.parents().position(v).unwrap()],
        })
        .collect();
    let out_strides = discrete::strides_of(&out_sizes);
    let parent_bases = index_bases(f.parents(), f.parent_sizes(), &out_scope, &out_strides);
    let target_bases = index_bases(f.target(), f.target_sizes(), &out_scope, &out_strides);
    let parent_of = parent_config_of_states(in_scope, in_sizes, f);
    let n_in: usize = in_sizes.iter().product();
    let n_out: usize = out_sizes.iter().product();
    let mut m = DMatrix::<f64>::zeros(n_out, n_in);
    for s in 0..n_in {
        let p = parent_of[s];
        let base = parent_bases[p];
        for (t, &c) in f.row(p).iter().enumerate() {
            m[(base + target_bases[t], s)] = c;
        }
    }
    Ok((m, out_scope, out_sizes))
}

/// Exact fixed point of the composite replacement operator anchored at one
/// cycle position, via the unit-eigenvalue direction of the assembled linear
/// map. Independent of the iterative path of [`icr_run`].
pub fn brute_force_fixed_point(
    model: &ConditionalModel,
    cycle: &UpdatingCycle,
    position: usize,
) -> Result<DiscreteDistribution> {
    let conds = model.discrete()?;
    require_permissible(cycle, conds.len())?;
    let order = cycle.order();
    let l = order.len();
    if position >= l {
        return Err(Error::InvalidConfig(format!(
            "position {} out of range for a cycle of length {}",
            position, l
        )));
    }
    let joint_states: usize = (0..model.dim())
        .map(|v| model.support_of(v))
        .collect::<Result<Vec<_>>>()?
        .iter()
        .product();
    if joint_states > MAX_ORACLE_STATES {
        return Err(Error::StateSpaceTooLarge {
            states: joint_states,
            max: MAX_ORACLE_STATES,
        });
    }
    let anchor_scope = model.scope_of(order[position]);
    let anchor_sizes = model.sizes_for(&anchor_scope)?;
    let n0: usize = anchor_sizes.iter().product();
    let mut composite = DMatrix::<f64>::identity(n0, n0);
    let mut scope = anchor_scope.clone();
    let mut sizes = anchor_sizes.clone();
    for step in 1..=l {
        let j = order[(position + step) % l];
        let (m, out_scope, out_sizes) = step_matrix(&scope, &sizes, &conds[j])?;
        composite = m * composite;
        scope = out_scope;
        sizes = out_sizes;
    }
    debug_assert_eq!(scope, anchor_scope);
    let n = composite.nrows();
    let shifted = &composite - DMatrix::<f64>::identity(n, n);
    let svd = shifted.svd(false, true);
    let s_max = svd.singular_values.max();
    let tol = s_max.max(1.0) * 1e-9;
    let nulls: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] < tol)
        .collect();
    if nulls.len() > 1 {
        return Err(Error::NonUniqueFixedPoint {
            dimension: nulls.len(),
        });
    }
    let idx = *nulls
        .first()
        .ok_or_else(|| Error::Numerical("no unit-eigenvalue direction found".into()))?;
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Numerical("SVD did not return singular vectors".into()))?;
    let mut vec: Vec<f64> = v_t.row(idx).iter().copied().collect();
    let total: f64 = vec.iter().sum();
    if total.abs() < 1e-9 {
        return Err(Error::Numerical("fixed-point direction has zero mass".into()));
    }
    for x in vec.iter_mut() {
        *x /= total;
    }
    for x in vec.iter_mut() {
        if *x < 0.0 {
            if *x < -1e-9 {
                return Err(Error::Numerical(format!(
                    "fixed-point direction has a negative entry {}",
                    x
                )));
            }
            *x = 0.0;
        }
    }
    let renorm: f64 = vec.iter().sum();
    for x in vec.iter_mut() {
        *x /= renorm;
    }
    DiscreteDistribution::new(anchor_scope, anchor_sizes, vec)
}

/// Verdict of [`compatibility_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compatibility {
    Compatible,
    Incompatible,
    /// The iteration did not converge within the configured budget.
    Undecidable,
}

/// Decides compatibility of an all-full model: runs the iteration from the
/// uniform start and compares the per-position limits pairwise in total
/// variation. Also returns the underlying report with its `compatible` flag
/// filled in.
pub fn compatibility_check_with_report(
    model: &ConditionalModel,
    cycle: &UpdatingCycle,
    cfg: &IcrConfig,
    tol: f64,
) -> Result<(Compatibility, IcrReport)> {
    for i in 0..model.len() {
        if !model.is_full(i) {
            return Err(Error::NotAllFull { position: i });
        }
    }
    let conds = model.discrete()?;
    require_permissible(cycle, conds.len())?;
    let last = *cycle.order().last().unwrap();
    let scope = model.scope_of(last);
    let sizes = model.sizes_for(&scope)?;
    let q0 = DiscreteDistribution::uniform(scope, sizes);
    let mut report = icr_run(model, cycle, &q0, cfg)?;
    if !report.converged {
        return Ok((Compatibility::Undecidable, report));
    }
    let mut verdict = Compatibility::Compatible;
    'outer: for i in 0..report.stationary.len() {
        for j in (i + 1)..report.stationary.len() {
            if discrete::total_variation(&report.stationary[i], &report.stationary[j])? > tol {
                verdict = Compatibility::Incompatible;
                break 'outer;
            }
        }
    }
    report.compatible = Some(verdict == Compatibility::Compatible);
    Ok((verdict, report))
}

/// See [`compatibility_check_with_report`].
pub fn compatibility_check(
    model: &ConditionalModel,
    cycle: &UpdatingCycle,
    cfg: &IcrConfig,
    tol: f64,
) -> Result<Compatibility> {
    compatibility_check_with_report(model, cycle, cfg, tol).map(|(v, _)| v)
}

/// One failed check of [`mutual_stationarity_check`].
#[derive(Debug, Clone)]
pub struct StationarityFailure {
    pub position: usize,
    pub detail: String,
}

/// Result of a mutual stationarity verification.
#[derive(Debug, Clone)]
pub struct StationarityReport {
    pub holds: bool,
    pub failures: Vec<StationarityFailure>,
}

impl StationarityReport {
    fn fail(position: usize, detail: String) -> StationarityFailure {
        StationarityFailure { position, detail }
    }

    pub fn first_failure(&self) -> Option<&StationarityFailure> {
        self.failures.first()
    }
}

/// Checks that one replacement step maps each limit onto the next one
/// (within [`STATIONARITY_TOL`] total variation) and that neighbors share
/// the parent marginal of the connecting conditional.
pub fn mutual_stationarity_check(
    stationary: &[DiscreteDistribution],
    model: &ConditionalModel,
    cycle: &UpdatingCycle,
) -> StationarityReport {
    let mut failures = Vec::new();
    let conds = match model.discrete() {
        Ok(c) => c,
        Err(e) => {
            failures.push(StationarityReport::fail(0, e.to_string()));
            return StationarityReport {
                holds: false,
                failures,
            };
        }
    };
    let order = cycle.order();
    let l = order.len();
    if stationary.len() != l || conds.len() != l {
        failures.push(StationarityReport::fail(
            0,
            format!("expected {} distributions, found {}", l, stationary.len()),
        ));
        return StationarityReport {
            holds: false,
            failures,
        };
    }
    for i in 0..l {
        let next = (i + 1) % l;
        let expected_scope = model.scope_of(order[i]);
        if stationary[i].scope() != &expected_scope {
            failures.push(StationarityReport::fail(
                i,
                format!(
                    "limit scope {} does not match cycle scope {}",
                    stationary[i].scope(),
                    expected_scope
                ),
            ));
            continue;
        }
        let f_next = &conds[order[next]];
        match conditional_replacement(&stationary[i], f_next) {
            Err(e) => failures.push(StationarityReport::fail(i, e.to_string())),
            Ok(mapped) => match discrete::total_variation(&mapped, &stationary[next]) {
                Err(e) => failures.push(StationarityReport::fail(i, e.to_string())),
                Ok(tv) => {
                    if tv > STATIONARITY_TOL {
                        failures.push(StationarityReport::fail(
                            i,
                            format!("single step does not map limit {} to limit {} (tv {:e})", i, next, tv),
                        ));
                    }
                }
            },
        }
        // neighbors must agree on the marginal of the connecting parent set
        let b = f_next.parents();
        let left = discrete::marginalize(&stationary[i], b);
        let right = discrete::marginalize(&stationary[next], b);
        match (left, right) {
            (Ok(lm), Ok(rm)) => match discrete::total_variation(&lm, &rm) {
                Ok(tv) if tv > STATIONARITY_TOL => failures.push(StationarityReport::fail(
                    i,
                    format!("limits {} and {} disagree on the shared parent marginal (tv {:e})", i, next, tv),
                )),
                Ok(_) => {}
                Err(e) => failures.push(StationarityReport::fail(i, e.to_string())),
            },
            (Err(e), _) | (_, Err(e)) => failures.push(StationarityReport::fail(i, e.to_string())),
        }
    }
    StationarityReport {
        holds: failures.is_empty(),
        failures,
    }
}
