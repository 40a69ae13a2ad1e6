//! Moment-form conditional replacement for linear-Gaussian models.
//!
//! Linear-Gaussian replacement is closed under the (mean, covariance)
//! parameterization, so the cyclic iteration propagates moments directly and
//! reaches its fixed points to machine precision. Divergent cycles are
//! detected by covariance blowup or budget exhaustion; nothing predicts them
//! up front.

use nalgebra::{DMatrix, DVector};

use crate::cycle::UpdatingCycle;
use crate::error::{Error, Result};
use crate::gaussian::{self, GaussianConditional, GaussianDistribution};
use crate::icr::{Compatibility, StationarityFailure, StationarityReport};
use crate::model::{ConditionalModel, VarSet};

/// Parameter tolerance of [`gaussian_mutual_stationarity_check`].
pub const GAUSSIAN_STATIONARITY_TOL: f64 = 1e-8;
/// Agreement tolerance for shared blocks in [`assemble_trivariate`].
pub const ASSEMBLY_TOL: f64 = 1e-8;

/// Iteration controls for [`gaussian_icr_run`].
#[derive(Debug, Clone)]
pub struct GaussianIcrConfig {
    pub max_cycles: usize,
    /// Frobenius bound on successive same-position covariance differences
    /// (and euclidean bound on mean differences).
    pub frob_tol: f64,
    /// Largest covariance entry magnitude before the run is declared divergent.
    pub blowup_threshold: f64,
}

impl Default for GaussianIcrConfig {
    fn default() -> Self {
        Self {
            max_cycles: 100_000,
            frob_tol: 1e-10,
            blowup_threshold: 1e12,
        }
    }
}

impl GaussianIcrConfig {
    fn validate(&self) -> Result<()> {
        if self.max_cycles < 1 {
            return Err(Error::InvalidConfig("max_cycles must be at least 1".into()));
        }
        if !(self.frob_tol > 0.0) || !(self.blowup_threshold > 0.0) {
            return Err(Error::InvalidConfig(
                "frob_tol and blowup_threshold must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-position gap between successive visits.
#[derive(Debug, Clone, Copy)]
pub struct GaussianGap {
    pub kl: f64,
    pub cov_frob: f64,
    pub mean_dist: f64,
}

/// Why a run failed to converge.
#[derive(Debug, Clone, PartialEq)]
pub enum Divergence {
    Blowup {
        cycle: usize,
        position: usize,
        max_entry: f64,
    },
    MaxCycles,
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Divergence::Blowup {
                cycle,
                position,
                max_entry,
            } => write!(
                f,
                "covariance blowup at cycle {}, position {} (entry {:e})",
                cycle,
                position + 1,
                max_entry
            ),
            Divergence::MaxCycles => write!(f, "cycle budget exhausted"),
        }
    }
}

/// Outcome of a Gaussian run; same indexing conventions as the discrete
/// report. On blowup `stationary` is empty.
#[derive(Debug, Clone)]
pub struct GaussianIcrReport {
    pub stationary: Vec<GaussianDistribution>,
    pub traces: Vec<Vec<GaussianGap>>,
    pub converged: bool,
    pub cycles_used: usize,
    pub divergence: Option<Divergence>,
    pub compatible: Option<bool>,
}

/// Replaces the conditional of `h` on the target block of `f`, keeping the
/// parent block of `h` bit for bit.
pub fn gaussian_replacement(
    h: &GaussianDistribution,
    f: &GaussianConditional,
) -> Result<GaussianDistribution> {
    if !f.parents().is_subset(h.scope()) {
        return Err(Error::NotPermissibleStep {
            parents: f.parents().to_string(),
            scope: h.scope().to_string(),
        });
    }
    let (scope, mean, cov) = replace_moments(h.scope(), h.mean(), h.cov(), f);
    GaussianDistribution::new(scope, mean, cov)
}

/// The moment update behind [`gaussian_replacement`]; no validity checks so
/// the iteration can pass through near-divergent states.
fn replace_moments(
    scope: &VarSet,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    f: &GaussianConditional,
) -> (VarSet, DVector<f64>, DMatrix<f64>) {
    let parent_pos: Vec<usize> = f
        .parents()
        .iter()
        .map(|&v| scope.position(v).expect("parents checked by caller"))
        .collect();
    let nb = parent_pos.len();
    let mu_b = DVector::from_fn(nb, |i, _| mean[parent_pos[i]]);
    let sigma_b = DMatrix::from_fn(nb, nb, |i, j| cov[(parent_pos[i], parent_pos[j])]);
    let mu_a = f.coef() * &mu_b + f.intercept();
    let cross = f.coef() * &sigma_b; // Cov(target, parents)
    let mut target_cov = f.coef() * &sigma_b * f.coef().transpose() + f.cond_cov();
    target_cov = (&target_cov + target_cov.transpose()) * 0.5;

    let out_scope = f.target().union(f.parents());
    // role of each output variable: Some(k) = k-th target, None via parents
    let roles: Vec<std::result::Result<usize, usize>> = out_scope
        .iter()
        .map(|&v| match f.target().position(v) {
            Some(k) => Ok(k),
            None => Err(f.parents().position(v).unwrap()),
        })
        .collect();
    let n = roles.len();
    let out_mean = DVector::from_fn(n, |i, _| match roles[i] {
        Ok(t) => mu_a[t],
        Err(p) => mu_b[p],
    });
    let out_cov = DMatrix::from_fn(n, n, |i, j| match (roles[i], roles[j]) {
        (Ok(ti), Ok(tj)) => target_cov[(ti, tj)],
        (Ok(ti), Err(pj)) => cross[(ti, pj)],
        (Err(pi), Ok(tj)) => cross[(tj, pi)],
        (Err(pi), Err(pj)) => sigma_b[(pi, pj)],
    });
    (out_scope, out_mean, out_cov)
}

/// Runs the Gaussian replacement cycle from `q0`. Converges when successive
/// same-position means and covariances settle below `frob_tol`; reports
/// divergence on covariance blowup or an exhausted budget.
pub fn gaussian_icr_run(
    model: &ConditionalModel,
    cycle: &UpdatingCycle,
    q0: &GaussianDistribution,
    cfg: &GaussianIcrConfig,
) -> Result<GaussianIcrReport> {
    cfg.validate()?;
    let conds = model.gaussian()?;
    if cycle.len() != conds.len() {
        return Err(Error::NotAPermutation {
            order: cycle.order().iter().map(|i| i + 1).collect(),
            expected: conds.len(),
        });
    }
    if !cycle.permissible() {
        return Err(Error::NotPermissible {
            reasons: cycle.violation_summary(),
        });
    }
    let order = cycle.order();
    let l = order.len();
    let c_last = model.scope_of(order[l - 1]);
    if q0.scope() != &c_last {
        return Err(Error::ScopeMismatch {
            left: q0.scope().to_string(),
            right: c_last.to_string(),
        });
    }
    let mut traces: Vec<Vec<GaussianGap>> = vec![Vec::new(); l];
    let mut prev: Option<Vec<(VarSet, DVector<f64>, DMatrix<f64>)>> = None;
    let mut scope = q0.scope().clone();
    let mut mean = q0.mean().clone();
    let mut cov = q0.cov().clone();
    let mut converged = false;
    let mut cycles_used = cfg.max_cycles;
    let mut latest: Vec<(VarSet, DVector<f64>, DMatrix<f64>)> = Vec::new();
    for k in 1..=cfg.max_cycles {
        let mut visit = Vec::with_capacity(l);
        for (i, &j) in order.iter().enumerate() {
            let f = &conds[j];
            if !f.parents().is_subset(&scope) {
                return Err(Error::NotPermissibleStep {
                    parents: f.parents().to_string(),
                    scope: scope.to_string(),
                });
            }
            let (s, m, c) = replace_moments(&scope, &mean, &cov, f);
            let max_entry = c.amax();
            if !max_entry.is_finite() || max_entry > cfg.blowup_threshold {
                return Ok(GaussianIcrReport {
                    stationary: Vec::new(),
                    traces,
                    converged: false,
                    cycles_used: k,
                    divergence: Some(Divergence::Blowup {
                        cycle: k,
                        position: i,
                        max_entry,
                    }),
                    compatible: None,
                });
            }
            scope = s;
            mean = m;
            cov = c;
            visit.push((scope.clone(), mean.clone(), cov.clone()));
        }
        if let Some(previous) = &prev {
            let mut all_below = true;
            for i in 0..l {
                let (_, pm, pc) = &previous[i];
                let (_, vm, vc) = &visit[i];
                let cov_frob = (vc - pc).norm();
                let mean_dist = (vm - pm).norm();
                let kl = gaussian::kl_moments(vm, vc, pm, pc).unwrap_or(f64::INFINITY);
                traces[i].push(GaussianGap {
                    kl,
                    cov_frob,
                    mean_dist,
                });
                if !(cov_frob < cfg.frob_tol && mean_dist < cfg.frob_tol) {
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
    let mut stationary = Vec::with_capacity(l);
    for (s, m, c) in latest {
        match GaussianDistribution::new(s, m, c) {
            Ok(g) => stationary.push(g),
            Err(_) if !converged => {
                stationary.clear();
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(GaussianIcrReport {
        stationary,
        traces,
        converged,
        cycles_used,
        divergence: if converged { None } else { Some(Divergence::MaxCycles) },
        compatible: None,
    })
}

/// Builds the trivariate Gaussian determined by its three bivariate margins.
///
/// The three inputs must cover the three variable pairs of one triple and
/// agree on shared means and variances within [`ASSEMBLY_TOL`]; shared blocks
/// are copied, not averaged.
pub fn assemble_trivariate(
    m12: &GaussianDistribution,
    m23: &GaussianDistribution,
    m13: &GaussianDistribution,
) -> Result<GaussianDistribution> {
    let union = m12.scope().union(m23.scope()).union(m13.scope());
    if union.len() != 3 {
        return Err(Error::InconsistentMargins(format!(
            "margins cover {} variables instead of 3",
            union.len()
        )));
    }
    let vars = union.as_slice();
    let (x, y, z) = (vars[0], vars[1], vars[2]);
    let expect = |m: &GaussianDistribution, a: usize, b: usize, name: &str| -> Result<()> {
        if m.scope().as_slice() != [a, b] {
            return Err(Error::InconsistentMargins(format!(
                "{} margin has scope {}, expected {}",
                name,
                m.scope(),
                VarSet::new(vec![a, b]).unwrap()
            )));
        }
        Ok(())
    };
    expect(m12, x, y, "first")?;
    expect(m23, y, z, "second")?;
    expect(m13, x, z, "third")?;

    let check = |label: &str, a: f64, b: f64| -> Result<()> {
        if (a - b).abs() > ASSEMBLY_TOL {
            return Err(Error::InconsistentMargins(format!(
                "{} disagrees across margins: {} vs {}",
                label, a, b
            )));
        }
        Ok(())
    };
    check("mean of the first variable", m12.mean()[0], m13.mean()[0])?;
    check("mean of the second variable", m12.mean()[1], m23.mean()[0])?;
    check("mean of the third variable", m23.mean()[1], m13.mean()[1])?;
    check("variance of the first variable", m12.cov()[(0, 0)], m13.cov()[(0, 0)])?;
    check("variance of the second variable", m12.cov()[(1, 1)], m23.cov()[(0, 0)])?;
    check("variance of the third variable", m23.cov()[(1, 1)], m13.cov()[(1, 1)])?;

    let mean = DVector::from_column_slice(&[m12.mean()[0], m12.mean()[1], m23.mean()[1]]);
    let mut cov = DMatrix::zeros(3, 3);
    cov[(0, 0)] = m12.cov()[(0, 0)];
    cov[(1, 1)] = m12.cov()[(1, 1)];
    cov[(2, 2)] = m23.cov()[(1, 1)];
    cov[(0, 1)] = m12.cov()[(0, 1)];
    cov[(1, 0)] = m12.cov()[(0, 1)];
    cov[(1, 2)] = m23.cov()[(0, 1)];
    cov[(2, 1)] = m23.cov()[(0, 1)];
    cov[(0, 2)] = m13.cov()[(0, 1)];
    cov[(2, 0)] = m13.cov()[(0, 1)];
    GaussianDistribution::new(union, mean, cov)
}

fn moment_distance(a: &GaussianDistribution, b: &GaussianDistribution) -> f64 {
    let mean = (a.mean() - b.mean()).amax();
    let cov = (a.cov() - b.cov()).amax();
    mean.max(cov)
}

/// Gaussian analogue of the discrete mutual stationarity check: one
/// replacement step must map each limit onto the next within
/// [`GAUSSIAN_STATIONARITY_TOL`] on every parameter, and neighbors must share
/// the connecting parent-block moments.
pub fn gaussian_mutual_stationarity_check(
    limits: &[GaussianDistribution],
    model: &ConditionalModel,
    cycle: &UpdatingCycle,
) -> StationarityReport {
    let mut failures = Vec::new();
    let conds = match model.gaussian() {
        Ok(c) => c,
        Err(e) => {
            failures.push(StationarityFailure {
                position: 0,
                detail: e.to_string(),
            });
            return StationarityReport {
                holds: false,
                failures,
            };
        }
    };
    let order = cycle.order();
    let l = order.len();
    if limits.len() != l || conds.len() != l {
        failures.push(StationarityFailure {
            position: 0,
            detail: format!("expected {} limits, found {}", l, limits.len()),
        });
        return StationarityReport {
            holds: false,
            failures,
        };
    }
    for i in 0..l {
        let next = (i + 1) % l;
        let expected_scope = model.scope_of(order[i]);
        if limits[i].scope() != &expected_scope {
            failures.push(StationarityFailure {
                position: i,
                detail: format!(
                    "limit scope {} does not match cycle scope {}",
                    limits[i].scope(),
                    expected_scope
                ),
            });
            continue;
        }
        let f_next = &conds[order[next]];
        match gaussian_replacement(&limits[i], f_next) {
            Err(e) => failures.push(StationarityFailure {
                position: i,
                detail: e.to_string(),
            }),
            Ok(mapped) => {
                let dist = moment_distance(&mapped, &limits[next]);
                if dist > GAUSSIAN_STATIONARITY_TOL {
                    failures.push(StationarityFailure {
                        position: i,
                        detail: format!(
                            "single step does not map limit {} to limit {} (max parameter gap {:e})",
                            i, next, dist
                        ),
                    });
                }
            }
        }
        let b = f_next.parents();
        match (limits[i].marginal_blocks(b), limits[next].marginal_blocks(b)) {
            (Ok((lm, lc)), Ok((rm, rc))) => {
                let gap = (lm - rm).amax().max((lc - rc).amax());
                if gap > GAUSSIAN_STATIONARITY_TOL {
                    failures.push(StationarityFailure {
                        position: i,
                        detail: format!(
                            "limits {} and {} disagree on the shared parent block (max gap {:e})",
                            i, next, gap
                        ),
                    });
                }
            }
            (Err(e), _) | (_, Err(e)) => failures.push(StationarityFailure {
                position: i,
                detail: e.to_string(),
            }),
        }
    }
    StationarityReport {
        holds: failures.is_empty(),
        failures,
    }
}

/// Compatibility decision for an all-full Gaussian model: the limits must
/// agree on every parameter within `tol`.
pub fn gaussian_compatibility_check_with_report(
    model: &ConditionalModel,
    cycle: &UpdatingCycle,
    cfg: &GaussianIcrConfig,
    tol: f64,
) -> Result<(Compatibility, GaussianIcrReport)> {
    for i in 0..model.len() {
        if !model.is_full(i) {
            return Err(Error::NotAllFull { position: i });
        }
    }
    let conds = model.gaussian()?;
    if !cycle.permissible() {
        return Err(Error::NotPermissible {
            reasons: cycle.violation_summary(),
        });
    }
    let last = *cycle.order().last().unwrap();
    let scope = model.scope_of(last);
    let d = scope.len();
    let _ = conds;
    let q0 = GaussianDistribution::new(scope, DVector::zeros(d), DMatrix::identity(d, d))?;
    let mut report = gaussian_icr_run(model, cycle, &q0, cfg)?;
    if !report.converged {
        return Ok((Compatibility::Undecidable, report));
    }
    let mut verdict = Compatibility::Compatible;
    'outer: for i in 0..report.stationary.len() {
        for j in (i + 1)..report.stationary.len() {
            if moment_distance(&report.stationary[i], &report.stationary[j]) > tol {
                verdict = Compatibility::Incompatible;
                break 'outer;
            }
        }
    }
    report.compatible = Some(verdict == Compatibility::Compatible);
    Ok((verdict, report))
}

/// See [`gaussian_compatibility_check_with_report`].
pub fn gaussian_compatibility_check(
    model: &ConditionalModel,
    cycle: &UpdatingCycle,
    cfg: &GaussianIcrConfig,
    tol: f64,
) -> Result<Compatibility> {
    gaussian_compatibility_check_with_report(model, cycle, cfg, tol).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle::{is_permissible, CycleMode};
    use crate::model::{Conditionals, VariableSpec};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn cond(
        target: usize,
        parents: &[usize],
        coef: &[f64],
        var: f64,
    ) -> GaussianConditional {
        GaussianConditional::from_rows(
            VarSet::singleton(target),
            VarSet::new(parents.to_vec()).unwrap(),
            &[coef.to_vec()],
            &[0.0],
            &[vec![var]],
        )
        .unwrap()
    }

    /// Three full conditionals on (X1, X2, X3) with strongly coupled means;
    /// one update order settles, another explodes.
    fn coupled_full_model() -> ConditionalModel {
        let f1 = cond(0, &[1, 2], &[-1.5, -0.5], 1.0);
        let f2 = cond(1, &[0, 2], &[-0.5, -0.5], 1.0);
        let f3 = cond(2, &[0, 1], &[-1.5, -1.5], 1.0);
        ConditionalModel::new(
            (0..3).map(|i| VariableSpec::continuous(format!("X{}", i + 1))).collect(),
            Conditionals::Gaussian(vec![f1, f2, f3]),
        )
        .unwrap()
    }

    /// Pairwise chain without any full conditional.
    fn pairwise_chain_model() -> ConditionalModel {
        let f1 = cond(0, &[1], &[0.2], 3.6);
        let f2 = cond(1, &[2], &[-0.3125], 8.4375);
        let f3 = cond(2, &[0], &[-0.75], 13.75);
        ConditionalModel::new(
            (0..3).map(|i| VariableSpec::continuous(format!("X{}", i + 1))).collect(),
            Conditionals::Gaussian(vec![f1, f2, f3]),
        )
        .unwrap()
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

    #[test]
    fn replacement_propagates_covariance_blocks() {
        let h = standard_gaussian(&[0, 1]);
        let f = cond(2, &[0, 1], &[-1.5, -1.5], 1.0);
        let out = gaussian_replacement(&h, &f).unwrap();
        assert_eq!(out.scope().as_slice(), &[0, 1, 2]);
        // Var(X3) = 2.25 + 2.25 + 1
        assert_abs_diff_eq!(out.cov()[(2, 2)], 5.5, epsilon = 1e-14);
        assert_abs_diff_eq!(out.cov()[(2, 0)], -1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(out.cov()[(2, 1)], -1.5, epsilon = 1e-14);
        // parent block untouched, bit for bit
        assert_eq!(out.cov()[(0, 0)], 1.0);
        assert_eq!(out.cov()[(0, 1)], 0.0);
        assert_eq!(out.cov()[(1, 1)], 1.0);
        assert_eq!(out.mean()[0], 0.0);
        assert_eq!(out.mean()[1], 0.0);
    }

    #[test]
    fn replacement_formula_matches_monte_carlo() {
        let f = cond(2, &[0, 1], &[-1.5, -1.5], 1.0);
        let h = standard_gaussian(&[0, 1]);
        let out = gaussian_replacement(&h, &f).unwrap();
        let n = 1_000_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let mut sums = [0.0f64; 3];
        let mut prods = [[0.0f64; 3]; 3];
        for _ in 0..n {
            let x0: f64 = rng.sample(StandardNormal);
            let x1: f64 = rng.sample(StandardNormal);
            let eps: f64 = rng.sample(StandardNormal);
            let x2 = -1.5 * x0 - 1.5 * x1 + eps;
            let x = [x0, x1, x2];
            for i in 0..3 {
                sums[i] += x[i];
                for j in 0..3 {
                    prods[i][j] += x[i] * x[j];
                }
            }
        }
        let nf = n as f64;
        for i in 0..3 {
            for j in 0..3 {
                let emp = prods[i][j] / nf - (sums[i] / nf) * (sums[j] / nf);
                let truth = out.cov()[(i, j)];
                let se = ((out.cov()[(i, i)] * out.cov()[(j, j)] + truth * truth) / nf).sqrt();
                assert!(
                    (emp - truth).abs() <= 3.0 * se,
                    "cov[{},{}]: empirical {} vs {} (se {})",
                    i,
                    j,
                    emp,
                    truth,
                    se
                );
            }
        }
    }

    #[test]
    fn replacement_by_own_conditional_is_identity() {
        // h on (X1, X2) with correlation; extract X1 | X2 and replace
        let h = GaussianDistribution::new(
            VarSet::new(vec![0, 1]).unwrap(),
            DVector::from_column_slice(&[0.5, -1.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]),
        )
        .unwrap();
        // X1 | X2: A = cov12 / var2, var = var1 - cov12^2 / var2
        let a = 1.0 / 2.0;
        let var = 2.0 - 1.0 / 2.0;
        let intercept = 0.5 - a * (-1.0);
        let f = GaussianConditional::from_rows(
            VarSet::singleton(0),
            VarSet::singleton(1),
            &[vec![a]],
            &[intercept],
            &[vec![var]],
        )
        .unwrap();
        let out = gaussian_replacement(&h, &f).unwrap();
        assert_abs_diff_eq!((out.mean() - h.mean()).amax(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((out.cov() - h.cov()).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn replacement_with_no_parents_returns_the_target_law() {
        let h = standard_gaussian(&[0, 1]);
        let f = GaussianConditional::from_rows(
            VarSet::singleton(2),
            VarSet::empty(),
            &[vec![]],
            &[1.5],
            &[vec![4.0]],
        )
        .unwrap();
        let out = gaussian_replacement(&h, &f).unwrap();
        assert_eq!(out.scope().as_slice(), &[2]);
        assert_eq!(out.mean()[0], 1.5);
        assert_eq!(out.cov()[(0, 0)], 4.0);
    }

    #[test]
    fn coupled_model_settles_under_one_order() {
        let model = coupled_full_model();
        // update X2 then X1 then X3
        let cycle = is_permissible(&model, &[1, 0, 2], CycleMode::Permissive).unwrap();
        let report = gaussian_icr_run(
            &model,
            &cycle,
            &standard_gaussian(&[0, 1, 2]),
            &GaussianIcrConfig::default(),
        )
        .unwrap();
        assert!(report.converged, "divergence: {:?}", report.divergence);
        let expected_213 = [
            [241.0 / 50.0, -103.0 / 50.0, -207.0 / 50.0],
            [-103.0 / 50.0, 89.0 / 50.0, 21.0 / 50.0],
            [-207.0 / 50.0, 21.0 / 50.0, 329.0 / 50.0],
        ];
        let expected_132 = [
            [241.0 / 50.0, -17.0 / 50.0, -207.0 / 50.0],
            [-17.0 / 50.0, 89.0 / 50.0, -61.0 / 50.0],
            [-207.0 / 50.0, -61.0 / 50.0, 329.0 / 50.0],
        ];
        let expected_321 = [
            [241.0 / 50.0, -103.0 / 50.0, -73.0 / 50.0],
            [-103.0 / 50.0, 89.0 / 50.0, -61.0 / 50.0],
            [-73.0 / 50.0, -61.0 / 50.0, 329.0 / 50.0],
        ];
        // position 0 is the state right after the X2 update, and so on
        for (limit, expected) in report
            .stationary
            .iter()
            .zip([&expected_132, &expected_321, &expected_213])
        {
            for i in 0..3 {
                for j in 0..3 {
                    assert_abs_diff_eq!(limit.cov()[(i, j)], expected[i][j], epsilon = 1e-6);
                }
                assert_abs_diff_eq!(limit.mean()[i], 0.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn coupled_model_diverges_under_the_other_order() {
        let model = coupled_full_model();
        let cycle = is_permissible(&model, &[0, 1, 2], CycleMode::Permissive).unwrap();
        let report = gaussian_icr_run(
            &model,
            &cycle,
            &standard_gaussian(&[0, 1, 2]),
            &GaussianIcrConfig::default(),
        )
        .unwrap();
        assert!(!report.converged);
        assert!(report.divergence.is_some());
        assert!(report.stationary.is_empty() || matches!(report.divergence, Some(Divergence::MaxCycles)));
    }

    #[test]
    fn pairwise_chain_reaches_its_three_margins() {
        let model = pairwise_chain_model();
        let cycle = is_permissible(&model, &[0, 2, 1], CycleMode::Permissive).unwrap();
        // start on the scope of the last conditional in the order: (X2, X3)
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
        let check = gaussian_mutual_stationarity_check(&report.stationary, &model, &cycle);
        assert!(check.holds, "{:?}", check.failures);
    }

    #[test]
    fn kl_traces_decrease_monotonically() {
        let model = pairwise_chain_model();
        let cycle = is_permissible(&model, &[0, 2, 1], CycleMode::Permissive).unwrap();
        let report = gaussian_icr_run(
            &model,
            &cycle,
            &standard_gaussian(&[1, 2]),
            &GaussianIcrConfig::default(),
        )
        .unwrap();
        assert!(report.converged);
        for trace in &report.traces {
            for w in trace.windows(2) {
                if w[0].kl > 1e-20 {
                    assert!(w[1].kl < w[0].kl, "{} then {}", w[0].kl, w[1].kl);
                }
            }
        }
    }

    #[test]
    fn assembles_the_trivariate_from_its_margins() {
        let m12 = GaussianDistribution::new(
            VarSet::new(vec![0, 1]).unwrap(),
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 10.0]),
        )
        .unwrap();
        let m23 = GaussianDistribution::new(
            VarSet::new(vec![1, 2]).unwrap(),
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[10.0, -5.0, -5.0, 16.0]),
        )
        .unwrap();
        let m13 = GaussianDistribution::new(
            VarSet::new(vec![0, 2]).unwrap(),
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[4.0, -3.0, -3.0, 16.0]),
        )
        .unwrap();
        let joint = assemble_trivariate(&m12, &m23, &m13).unwrap();
        let expected = [
            [4.0, 2.0, -3.0],
            [2.0, 10.0, -5.0],
            [-3.0, -5.0, 16.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(joint.cov()[(i, j)], expected[i][j]);
            }
        }
    }

    #[test]
    fn assembly_round_trips_a_known_joint() {
        let cov = DMatrix::from_row_slice(3, 3, &[3.0, 0.5, -0.2, 0.5, 2.0, 0.7, -0.2, 0.7, 1.5]);
        let joint = GaussianDistribution::new(
            VarSet::full(3),
            DVector::from_column_slice(&[1.0, -2.0, 0.5]),
            cov.clone(),
        )
        .unwrap();
        let sub = |vars: &[usize]| {
            let set = VarSet::new(vars.to_vec()).unwrap();
            let (m, c) = joint.marginal_blocks(&set).unwrap();
            GaussianDistribution::new(set, m, c).unwrap()
        };
        let rebuilt = assemble_trivariate(&sub(&[0, 1]), &sub(&[1, 2]), &sub(&[0, 2])).unwrap();
        assert_eq!((rebuilt.cov() - &cov).amax(), 0.0);
        assert_eq!((rebuilt.mean() - joint.mean()).amax(), 0.0);
    }

    #[test]
    fn assembly_rejects_disagreeing_variances() {
        let m12 = GaussianDistribution::new(
            VarSet::new(vec![0, 1]).unwrap(),
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 10.0]),
        )
        .unwrap();
        let m23 = GaussianDistribution::new(
            VarSet::new(vec![1, 2]).unwrap(),
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[9.0, -5.0, -5.0, 16.0]),
        )
        .unwrap();
        let m13 = GaussianDistribution::new(
            VarSet::new(vec![0, 2]).unwrap(),
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[4.0, -3.0, -3.0, 16.0]),
        )
        .unwrap();
        assert!(matches!(
            assemble_trivariate(&m12, &m23, &m13),
            Err(Error::InconsistentMargins(_))
        ));
    }

    #[test]
    fn perturbed_limits_fail_the_stationarity_check() {
        let model = coupled_full_model();
        let cycle = is_permissible(&model, &[1, 0, 2], CycleMode::Permissive).unwrap();
        let report = gaussian_icr_run(
            &model,
            &cycle,
            &standard_gaussian(&[0, 1, 2]),
            &GaussianIcrConfig::default(),
        )
        .unwrap();
        let check = gaussian_mutual_stationarity_check(&report.stationary, &model, &cycle);
        assert!(check.holds, "{:?}", check.failures);
        let mut broken = report.stationary.clone();
        let mut cov = broken[0].cov().clone();
        cov[(0, 0)] += 1e-3;
        broken[0] =
            GaussianDistribution::new(broken[0].scope().clone(), broken[0].mean().clone(), cov)
                .unwrap();
        let check = gaussian_mutual_stationarity_check(&broken, &model, &cycle);
        assert!(!check.holds);
    }

    #[test]
    fn compatibility_of_gaussian_models() {
        // conditionals carved out of one bivariate Gaussian are compatible
        let f12 = GaussianConditional::from_rows(
            VarSet::singleton(0),
            VarSet::singleton(1),
            &[vec![0.5]],
            &[0.0],
            &[vec![1.5]],
        )
        .unwrap();
        let f21 = GaussianConditional::from_rows(
            VarSet::singleton(1),
            VarSet::singleton(0),
            &[vec![0.5]],
            &[0.0],
            &[vec![1.5]],
        )
        .unwrap();
        let model = ConditionalModel::new(
            vec![VariableSpec::continuous("X1"), VariableSpec::continuous("X2")],
            Conditionals::Gaussian(vec![f12, f21]),
        )
        .unwrap();
        let cycle = is_permissible(&model, &[0, 1], CycleMode::Permissive).unwrap();
        let (verdict, report) =
            gaussian_compatibility_check_with_report(&model, &cycle, &GaussianIcrConfig::default(), 1e-6)
                .unwrap();
        assert_eq!(verdict, Compatibility::Compatible);
        assert_eq!(report.compatible, Some(true));
        // the shared joint: variance 2, covariance 1
        let limit = &report.stationary[1];
        assert_abs_diff_eq!(limit.cov()[(0, 0)], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(limit.cov()[(0, 1)], 1.0, epsilon = 1e-8);

        let (verdict, _) = gaussian_compatibility_check_with_report(
            &coupled_full_model(),
            &is_permissible(&coupled_full_model(), &[1, 0, 2], CycleMode::Permissive).unwrap(),
            &GaussianIcrConfig::default(),
            1e-6,
        )
        .unwrap();
        assert_eq!(verdict, Compatibility::Incompatible);
    }
}
