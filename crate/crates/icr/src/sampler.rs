//! Seeded Gibbs-type chains whose batch distributions estimate the
//! deterministic replacement limits.
//!
//! The chain walks the update order of a permissible cycle, drawing each
//! target block from its conditional given the current state. After burn-in,
//! the state restricted to the scope of the conditional just applied is
//! recorded into that position's batch; non-full positions therefore collect
//! lower-dimensional batches, with no expansion of non-full conditionals.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cycle::UpdatingCycle;
use crate::discrete::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::gaussian::GaussianDistribution;
use crate::model::{ConditionalModel, Conditionals, VarSet};

/// Largest acceptable |z| in [`compare`].
pub const Z_LIMIT: f64 = 4.0;

/// Chain controls. One chain owns one generator seeded from `seed`;
/// concurrent chains should derive distinct seeds (for example `seed + k`).
#[derive(Debug, Clone)]
pub struct ChainConfig {
    /// Warm-up cycles before anything is recorded.
    pub burn_in: usize,
    /// Number of recorded cycles per batch.
    pub samples: usize,
    pub seed: u64,
    /// Record every `thin`-th cycle after burn-in.
    pub thin: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            burn_in: 10_000,
            samples: 1_000_000,
            seed: 0,
            thin: 1,
        }
    }
}

impl ChainConfig {
    fn validate(&self) -> Result<()> {
        if self.burn_in < 1 || self.samples < 1 || self.thin < 1 {
            return Err(Error::InvalidConfig(
                "burn_in, samples and thin must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Accumulated batch of one cycle position.
#[derive(Debug, Clone)]
pub enum BatchData {
    Discrete {
        table: DiscreteDistribution,
        /// Per-cell binomial standard errors.
        std_errors: Vec<f64>,
    },
    Gaussian {
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        mean_se: DVector<f64>,
        cov_se: DMatrix<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct BatchSummary {
    pub position: usize,
    pub scope: VarSet,
    pub samples: u64,
    pub data: BatchData,
}

/// A deterministic limit to compare a batch against.
#[derive(Debug, Clone)]
pub enum StationaryLimit {
    Discrete(DiscreteDistribution),
    Gaussian(GaussianDistribution),
}

/// Runs one chain and summarizes the batch collected at every cycle position.
pub fn run_chain(
    model: &ConditionalModel,
    cycle: &UpdatingCycle,
    cfg: &ChainConfig,
) -> Result<Vec<BatchSummary>> {
    cfg.validate()?;
    if cycle.len() != model.len() {
        return Err(Error::NotAPermutation {
            order: cycle.order().iter().map(|i| i + 1).collect(),
            expected: model.len(),
        });
    }
    if !cycle.permissible() {
        return Err(Error::NotPermissible {
            reasons: cycle.violation_summary(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match model.conditionals() {
        Conditionals::Discrete(_) => run_discrete_chain(model, cycle, cfg, &mut rng),
        Conditionals::Gaussian(_) => run_gaussian_chain(model, cycle, cfg, &mut rng),
    }
}

fn draw_categorical(row: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.len() - 1
}

fn run_discrete_chain(
    model: &ConditionalModel,
    cycle: &UpdatingCycle,
    cfg: &ChainConfig,
    rng: &mut impl Rng,
) -> Result<Vec<BatchSummary>> {
    let conds = model.discrete()?;
    let order = cycle.order();
    let l = order.len();
    let d = model.dim();
    let supports: Vec<usize> = (0..d).map(|v| model.support_of(v)).collect::<Result<_>>()?;

    // per-position recording layout
    let scopes: Vec<VarSet> = order.iter().map(|&j| model.scope_of(j)).collect();
    let scope_sizes: Vec<Vec<usize>> = scopes
        .iter()
        .map(|s| s.iter().map(|&v| supports[v]).collect())
        .collect();
    let mut counts: Vec<Vec<u64>> = scope_sizes
        .iter()
        .map(|sizes| vec![0u64; sizes.iter().product()])
        .collect();

    let mut state: Vec<usize> = supports.iter().map(|&s| rng.gen_range(0..s)).collect();
    let total_cycles = cfg.burn_in + cfg.samples * cfg.thin;
    let mut recorded = 0usize;
    for c in 0..total_cycles {
        let record = c >= cfg.burn_in && (c - cfg.burn_in) % cfg.thin == 0 && recorded < cfg.samples;
        for (i, &j) in order.iter().enumerate() {
            let f = &conds[j];
            let mut p_idx = 0usize;
            for (k, &v) in f.parents().iter().enumerate() {
                p_idx = p_idx * f.parent_sizes()[k] + state[v];
            }
            let t_idx = draw_categorical(f.row(p_idx), rng);
            // write the drawn target configuration back into the state
            let mut rem = t_idx;
            for (k, &v) in f.target().iter().enumerate().rev() {
                let s = f.target_sizes()[k];
                state[v] = rem % s;
                rem /= s;
            }
            if record {
                let mut idx = 0usize;
                for (k, &v) in scopes[i].iter().enumerate() {
                    idx = idx * scope_sizes[i][k] + state[v];
                }
                counts[i][idx] += 1;
            }
        }
        if record {
            recorded += 1;
        }
    }
    debug_assert_eq!(recorded, cfg.samples);

    let n = cfg.samples as f64;
    let mut out = Vec::with_capacity(l);
    for (i, scope) in scopes.iter().enumerate() {
        let table: Vec<f64> = counts[i].iter().map(|&c| c as f64 / n).collect();
        let std_errors: Vec<f64> = table.iter().map(|&p| (p * (1.0 - p) / n).sqrt()).collect();
        out.push(BatchSummary {
            position: i,
            scope: scope.clone(),
            samples: cfg.samples as u64,
            data: BatchData::Discrete {
                table: DiscreteDistribution::new_unchecked(
                    scope.clone(),
                    scope_sizes[i].clone(),
                    table,
                ),
                std_errors,
            },
        });
    }
    Ok(out)
}

/// Flat sampling machinery of one conditional, laid out for the hot loop.
struct GaussStep {
    target: Vec<usize>,
    parents: Vec<usize>,
    /// na x nb, row-major.
    coef: Vec<f64>,
    intercept: Vec<f64>,
    /// Lower Cholesky factor of cond_cov, na x na row-major.
    chol: Vec<f64>,
}

fn run_gaussian_chain(
    model: &ConditionalModel,
    cycle: &UpdatingCycle,
    cfg: &ChainConfig,
    rng: &mut impl Rng,
) -> Result<Vec<BatchSummary>> {
    let conds = model.gaussian()?;
    let order = cycle.order();
    let l = order.len();
    let d = model.dim();
    let scopes: Vec<VarSet> = order.iter().map(|&j| model.scope_of(j)).collect();

    let steps: Vec<GaussStep> = order
        .iter()
        .map(|&j| {
            let f = &conds[j];
            let na = f.target().len();
            let nb = f.parents().len();
            let chol = f
                .cond_cov()
                .clone()
                .cholesky()
                .map(|c| c.l().clone_owned())
                .ok_or(Error::SingularCovariance)?;
            Ok(GaussStep {
                target: f.target().as_slice().to_vec(),
                parents: f.parents().as_slice().to_vec(),
                coef: (0..na)
                    .flat_map(|r| (0..nb).map(move |c| (r, c)))
                    .map(|(r, c)| f.coef()[(r, c)])
                    .collect(),
                intercept: f.intercept().iter().copied().collect(),
                chol: (0..na)
                    .flat_map(|r| (0..na).map(move |c| (r, c)))
                    .map(|(r, c)| chol[(r, c)])
                    .collect(),
            })
        })
        .collect::<Result<_>>()?;
    let max_na = steps.iter().map(|s| s.target.len()).max().unwrap_or(1);

    let scope_vars: Vec<Vec<usize>> = scopes.iter().map(|s| s.as_slice().to_vec()).collect();
    let mut sums: Vec<Vec<f64>> = scope_vars.iter().map(|s| vec![0.0; s.len()]).collect();
    let mut prods: Vec<Vec<f64>> = scope_vars
        .iter()
        .map(|s| vec![0.0; s.len() * s.len()])
        .collect();

    let mut state = vec![0.0f64; d];
    let mut mu = vec![0.0f64; max_na];
    let mut z = vec![0.0f64; max_na];
    let total_cycles = cfg.burn_in + cfg.samples * cfg.thin;
    let mut recorded = 0usize;
    for c in 0..total_cycles {
        let record = c >= cfg.burn_in && (c - cfg.burn_in) % cfg.thin == 0 && recorded < cfg.samples;
        for (i, step) in steps.iter().enumerate() {
            let na = step.target.len();
            let nb = step.parents.len();
            for r in 0..na {
                let mut m = step.intercept[r];
                for (cix, &v) in step.parents.iter().enumerate() {
                    m += step.coef[r * nb + cix] * state[v];
                }
                mu[r] = m;
            }
            for zr in z.iter_mut().take(na) {
                *zr = rng.sample(StandardNormal);
            }
            for r in 0..na {
                let mut x = mu[r];
                for cix in 0..=r {
                    x += step.chol[r * na + cix] * z[cix];
                }
                state[step.target[r]] = x;
            }
            if record {
                let vars = &scope_vars[i];
                let m = vars.len();
                for a in 0..m {
                    let xa = state[vars[a]];
                    sums[i][a] += xa;
                    for b in a..m {
                        prods[i][a * m + b] += xa * state[vars[b]];
                    }
                }
            }
        }
        if record {
            recorded += 1;
        }
    }
    debug_assert_eq!(recorded, cfg.samples);

    let n = cfg.samples as f64;
    let mut out = Vec::with_capacity(l);
    for (i, scope) in scopes.iter().enumerate() {
        let m = scope.len();
        let mean = DVector::from_fn(m, |a, _| sums[i][a] / n);
        let mut cov = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let c = (prods[i][a * m + b] - n * mean[a] * mean[b]) / (n - 1.0);
                cov[(a, b)] = c;
                cov[(b, a)] = c;
            }
        }
        let mean_se = DVector::from_fn(m, |a, _| (cov[(a, a)] / n).sqrt());
        let cov_se = DMatrix::from_fn(m, m, |a, b| {
            ((cov[(a, a)] * cov[(b, b)] + cov[(a, b)] * cov[(a, b)]) / n).sqrt()
        });
        out.push(BatchSummary {
            position: i,
            scope: scope.clone(),
            samples: cfg.samples as u64,
            data: BatchData::Gaussian {
                mean,
                cov,
                mean_se,
                cov_se,
            },
        });
    }
    Ok(out)
}

/// Outcome of a batch-vs-limit comparison.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub max_z: f64,
    pub pass: bool,
    /// Human-readable location of the largest |z|.
    pub worst: String,
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / se
    }
}

/// Entrywise z-scores of a batch against a deterministic limit; passes when
/// every |z| stays within [`Z_LIMIT`].
pub fn compare(batch: &BatchSummary, limit: &StationaryLimit) -> Result<Comparison> {
    if batch.samples == 0 {
        return Err(Error::InvalidConfig("batch holds no samples".into()));
    }
    let mut max_z = 0.0f64;
    let mut worst = String::new();
    let mut consider = |z: f64, label: String| {
        if z.abs() > max_z {
            max_z = z.abs();
            worst = label;
        }
    };
    match (&batch.data, limit) {
        (BatchData::Discrete { table, std_errors }, StationaryLimit::Discrete(reference)) => {
            if table.scope() != reference.scope() {
                return Err(Error::ScopeMismatch {
                    left: table.scope().to_string(),
                    right: reference.scope().to_string(),
                });
            }
            for (i, (&p, &q)) in table.table().iter().zip(reference.table()).enumerate() {
                consider(z_score(p - q, std_errors[i]), format!("cell {}", i));
            }
        }
        (
            BatchData::Gaussian {
                mean,
                cov,
                mean_se,
                cov_se,
            },
            StationaryLimit::Gaussian(reference),
        ) => {
            if &batch.scope != reference.scope() {
                return Err(Error::ScopeMismatch {
                    left: batch.scope.to_string(),
                    right: reference.scope().to_string(),
                });
            }
            let m = mean.len();
            for a in 0..m {
                consider(
                    z_score(mean[a] - reference.mean()[a], mean_se[a]),
                    format!("mean[{}]", a),
                );
                for b in a..m {
                    consider(
                        z_score(cov[(a, b)] - reference.cov()[(a, b)], cov_se[(a, b)]),
                        format!("cov[{},{}]", a, b),
                    );
                }
            }
        }
        _ => {
            return Err(Error::InvalidConfig(
                "batch family does not match the reference limit".into(),
            ))
        }
    }
    Ok(Comparison {
        max_z,
        pass: max_z <= Z_LIMIT,
        worst,
    })
}
