//! Serializable run reports, trace CSV export and rational display helpers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::discrete::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::gaussian::GaussianDistribution;
use crate::gaussian_icr::{GaussianGap, GaussianIcrReport};
use crate::icr::{GapSample, IcrReport};
use crate::model::{ConditionalModel, VarSet};
use crate::sampler::StationaryLimit;

/// One stationary distribution inside a report file. Scopes are written as
/// variable names; discrete tables are flat and row-major over the sorted
/// scope.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LimitEntry {
    Gaussian {
        scope: Vec<String>,
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    },
    Discrete {
        scope: Vec<String>,
        sizes: Vec<usize>,
        table: Vec<f64>,
    },
}

/// The report document written by `icr icr` and consumed by `icr sample
/// --against`. The `version` field is the only line golden files ignore.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: String,
    pub family: String,
    /// The updating cycle as 1-based conditional indices in update order.
    pub cycle: Vec<usize>,
    pub converged: bool,
    pub cycles_used: usize,
    pub compatible: Option<bool>,
    pub divergence: Option<String>,
    pub stationary: Vec<LimitEntry>,
}

fn crate_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

fn one_based(order: &[usize]) -> Vec<usize> {
    order.iter().map(|&i| i + 1).collect()
}

/// Builds the report document for a discrete run.
pub fn report_from_discrete(
    model: &ConditionalModel,
    order: &[usize],
    report: &IcrReport,
) -> ReportFile {
    ReportFile {
        version: crate_version(),
        family: "discrete".into(),
        cycle: one_based(order),
        converged: report.converged,
        cycles_used: report.cycles_used,
        compatible: report.compatible,
        divergence: if report.converged {
            None
        } else {
            Some("cycle budget exhausted".into())
        },
        stationary: report
            .stationary
            .iter()
            .map(|d| LimitEntry::Discrete {
                scope: model.names_for(d.scope()),
                sizes: d.sizes().to_vec(),
                table: d.table().to_vec(),
            })
            .collect(),
    }
}

/// Builds the report document for a Gaussian run.
pub fn report_from_gaussian(
    model: &ConditionalModel,
    order: &[usize],
    report: &GaussianIcrReport,
) -> ReportFile {
    ReportFile {
        version: crate_version(),
        family: "gaussian".into(),
        cycle: one_based(order),
        converged: report.converged,
        cycles_used: report.cycles_used,
        compatible: report.compatible,
        divergence: report.divergence.as_ref().map(|d| d.to_string()),
        stationary: report
            .stationary
            .iter()
            .map(|g| LimitEntry::Gaussian {
                scope: model.names_for(g.scope()),
                mean: g.mean().iter().copied().collect(),
                covariance: (0..g.dim())
                    .map(|i| (0..g.dim()).map(|j| g.cov()[(i, j)]).collect())
                    .collect(),
            })
            .collect(),
    }
}

impl ReportFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Rebuilds the in-memory limits, resolving names against `model`.
    pub fn limits(&self, model: &ConditionalModel) -> Result<Vec<StationaryLimit>> {
        self.stationary
            .iter()
            .map(|entry| limit_from_entry(entry, model))
            .collect()
    }
}

fn resolve_scope(names: &[String], model: &ConditionalModel) -> Result<VarSet> {
    let idx: Result<Vec<usize>> = names.iter().map(|n| model.index_of(n)).collect();
    VarSet::new(idx?)
}

fn limit_from_entry(entry: &LimitEntry, model: &ConditionalModel) -> Result<StationaryLimit> {
    match entry {
        LimitEntry::Discrete { scope, sizes, table } => {
            let scope = resolve_scope(scope, model)?;
            Ok(StationaryLimit::Discrete(DiscreteDistribution::new(
                scope,
                sizes.clone(),
                table.clone(),
            )?))
        }
        LimitEntry::Gaussian {
            scope,
            mean,
            covariance,
        } => {
            let scope = resolve_scope(scope, model)?;
            let k = mean.len();
            if covariance.len() != k || covariance.iter().any(|r| r.len() != k) {
                return Err(Error::InvalidDistribution(
                    "covariance rows do not match the mean length".into(),
                ));
            }
            let cov = nalgebra::DMatrix::from_fn(k, k, |i, j| covariance[i][j]);
            Ok(StationaryLimit::Gaussian(GaussianDistribution::new(
                scope,
                nalgebra::DVector::from_column_slice(mean),
                cov,
            )?))
        }
    }
}

/// Writes a discrete trace as CSV with one row per gap:
/// `cycle_index,position,kl_gap,tv_gap`. `cycle_index` is the later of the
/// two compared visits, so the first comparison carries index 2.
pub fn write_discrete_trace_csv<W: Write>(mut w: W, traces: &[Vec<GapSample>]) -> Result<()> {
    writeln!(w, "cycle_index,position,kl_gap,tv_gap")?;
    for (i, trace) in traces.iter().enumerate() {
        for (k, gap) in trace.iter().enumerate() {
            writeln!(w, "{},{},{:e},{:e}", k + 2, i + 1, gap.kl, gap.tv)?;
        }
    }
    Ok(())
}

/// Gaussian counterpart: `cycle_index,position,kl_gap,cov_frob_gap,mean_gap`.
pub fn write_gaussian_trace_csv<W: Write>(mut w: W, traces: &[Vec<GaussianGap>]) -> Result<()> {
    writeln!(w, "cycle_index,position,kl_gap,cov_frob_gap,mean_gap")?;
    for (i, trace) in traces.iter().enumerate() {
        for (k, gap) in trace.iter().enumerate() {
            writeln!(
                w,
                "{},{},{:e},{:e},{:e}",
                k + 2,
                i + 1,
                gap.kl,
                gap.cov_frob,
                gap.mean_dist
            )?;
        }
    }
    Ok(())
}

/// Best rational `p/q` with `q <= max_den` for `x`, accepted only when it is
/// within `tol`. Continued-fraction expansion.
pub fn rational_approx(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    if !x.is_finite() {
        return None;
    }
    let negative = x < 0.0;
    let mut value = x.abs();
    // convergents p/q of the continued fraction of |x|
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    for _ in 0..64 {
        let a = value.floor();
        if a > i64::MAX as f64 {
            return None;
        }
        let a_int = a as i64;
        let p2 = a_int.checked_mul(p1)?.checked_add(p0)?;
        let q2 = a_int.checked_mul(q1)?.checked_add(q0)?;
        if q2 > max_den {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let frac = value - a;
        if frac < 1e-15 {
            break;
        }
        value = 1.0 / frac;
    }
    if q1 == 0 {
        return None;
    }
    let approx = p1 as f64 / q1 as f64;
    if (x.abs() - approx).abs() <= tol {
        Some((if negative { -p1 } else { p1 }, q1))
    } else {
        None
    }
}

/// `4.82` becomes `241/50`; integers render bare; anything without a small
/// rational form renders as nothing.
pub fn rational_label(x: f64) -> Option<String> {
    let (p, q) = rational_approx(x, 1000, 1e-9)?;
    if q == 1 {
        Some(format!("{}", p))
    } else {
        Some(format!("{}/{}", p, q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_forms() {
        assert_eq!(rational_approx(4.82, 1000, 1e-9), Some((241, 50)));
        assert_eq!(rational_approx(-2.06, 1000, 1e-9), Some((-103, 50)));
        assert_eq!(rational_approx(0.0, 1000, 1e-9), Some((0, 1)));
        assert_eq!(rational_approx(3.0, 1000, 1e-9), Some((3, 1)));
        assert_eq!(rational_label(4.82).as_deref(), Some("241/50"));
        assert_eq!(rational_label(3.0).as_deref(), Some("3"));
        // pi has no small-denominator form at 1e-9
        assert_eq!(rational_approx(std::f64::consts::PI, 1000, 1e-9), None);
    }

    #[test]
    fn trace_csv_layout() {
        let traces = vec![vec![GapSample { kl: 0.5, tv: 0.25 }], vec![GapSample { kl: 0.1, tv: 0.05 }]];
        let mut buf = Vec::new();
        write_discrete_trace_csv(&mut buf, &traces).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "cycle_index,position,kl_gap,tv_gap");
        assert_eq!(lines[1], "2,1,5e-1,2.5e-1");
        assert_eq!(lines[2], "2,2,1e-1,5e-2");
    }
}
