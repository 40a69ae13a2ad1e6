//! The `icr` command-line front end.
//!
//! Exit-code contract, so scripted suites can assert behaviors without
//! parsing output: 0 success, 2 parse/usage failure, 3 cycle not
//! permissible, 4 non-convergent run, 5 failed comparison or inconsistent
//! margins.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cycle::{self, CycleMode, UpdatingCycle};
use crate::discrete::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::gaussian::GaussianDistribution;
use crate::gaussian_icr::{self, GaussianIcrConfig};
use crate::icr::{self, Compatibility, IcrConfig};
use crate::model::{ConditionalModel, Conditionals, Family, VarSet};
use crate::report::{self, LimitEntry, ReportFile};
use crate::sampler::{self, BatchData, BatchSummary, ChainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_NOT_PERMISSIBLE: i32 = 3;
pub const EXIT_NON_CONVERGENT: i32 = 4;
pub const EXIT_COMPARISON: i32 = 5;

/// Default pairwise tolerance of the compatibility verdict.
const DEFAULT_COMPAT_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "icr",
    version,
    about = "Stationary distributions of conditionally specified models via iterative conditional replacement"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CycleArg {
    /// Updating cycle as 1-based conditional indices in update order, e.g. 2,1,3.
    #[arg(long, value_delimiter = ',')]
    pub cycle: Vec<usize>,
    /// Require a proper scope reduction at every step of the cycle.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List permissible updating cycles (one row per rotation class) and why
    /// the remaining rotation classes are rejected.
    Cycles {
        model: PathBuf,
        #[arg(long)]
        strict: bool,
    },
    /// Run the replacement iteration and print the stationary distributions.
    Icr {
        model: PathBuf,
        #[command(flatten)]
        cycle: CycleArg,
        /// Per-position gap tolerance (KL for discrete models, Frobenius for
        /// Gaussian models).
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_cycles: Option<usize>,
        /// Directory for icr_report.json and icr_trace.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide compatibility of an all-full model.
    Compat {
        model: PathBuf,
        #[command(flatten)]
        cycle: CycleArg,
        /// Pairwise tolerance between the per-position limits.
        #[arg(long, default_value_t = DEFAULT_COMPAT_TOL)]
        tol: f64,
        #[arg(long)]
        max_cycles: Option<usize>,
    },
    /// Run a seeded Gibbs-type chain and summarize its per-position batches.
    Sample {
        model: PathBuf,
        #[command(flatten)]
        cycle: CycleArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 10_000)]
        burn_in: usize,
        #[arg(long, default_value_t = 1)]
        thin: usize,
        /// Compare the batches against the limits of a prior report.
        #[arg(long)]
        against: Option<PathBuf>,
        /// Directory for batches.json and batches.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble the trivariate Gaussian determined by the three bivariate
    /// limits of a report.
    Assemble {
        /// A report holding exactly three bivariate Gaussian limits.
        report: PathBuf,
        /// File for the assembled distribution as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Resolved inputs of one invocation, validated before dispatch.
#[derive(Debug)]
pub struct RunManifest {
    pub model_path: PathBuf,
    pub command: &'static str,
    pub cycle: Option<Vec<usize>>,
    pub output_dir: Option<PathBuf>,
}

impl RunManifest {
    fn validate(&self, model: &ConditionalModel) -> Result<()> {
        if let Some(cycle) = &self.cycle {
            let l = model.len();
            let mut seen = vec![false; l];
            for &i in cycle {
                if i == 0 || i > l || seen[i - 1] {
                    return Err(Error::NotAPermutation {
                        order: cycle.clone(),
                        expected: l,
                    });
                }
                seen[i - 1] = true;
            }
            if cycle.len() != l {
                return Err(Error::NotAPermutation {
                    order: cycle.clone(),
                    expected: l,
                });
            }
        }
        Ok(())
    }
}

/// Runs one parsed invocation and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e);
            classify_error(&e)
        }
    }
}

fn classify_error(e: &Error) -> i32 {
    match e {
        Error::NotPermissible { .. } | Error::NotPermissibleStep { .. } => EXIT_NOT_PERMISSIBLE,
        Error::InconsistentMargins(_) => EXIT_COMPARISON,
        _ => EXIT_PARSE,
    }
}

fn load_model(path: &Path) -> Result<ConditionalModel> {
    ConditionalModel::from_path(path)
}

fn to_zero_based(cycle: &[usize]) -> Vec<usize> {
    cycle.iter().map(|&i| i - 1).collect()
}

fn mode_of(strict: bool) -> CycleMode {
    if strict {
        CycleMode::Strict
    } else {
        CycleMode::Permissive
    }
}

fn checked_cycle(
    model: &ConditionalModel,
    raw: &[usize],
    strict: bool,
) -> Result<UpdatingCycle> {
    let cycle = cycle::is_permissible(model, &to_zero_based(raw), mode_of(strict))?;
    if !cycle.permissible() {
        return Err(Error::NotPermissible {
            reasons: cycle.violation_summary(),
        });
    }
    Ok(cycle)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Cycles { model, strict } => cmd_cycles(&model, strict),
        Command::Icr {
            model,
            cycle,
            tol,
            max_cycles,
            out,
        } => cmd_icr(&model, &cycle, tol, max_cycles, out.as_deref()),
        Command::Compat {
            model,
            cycle,
            tol,
            max_cycles,
        } => cmd_compat(&model, &cycle, tol, max_cycles),
        Command::Sample {
            model,
            cycle,
            seed,
            samples,
            burn_in,
            thin,
            against,
            out,
        } => cmd_sample(
            &model,
            &cycle,
            seed,
            samples,
            burn_in,
            thin,
            against.as_deref(),
            out.as_deref(),
        ),
        Command::Assemble { report, out } => cmd_assemble(&report, out.as_deref()),
    }
}

fn cmd_cycles(model_path: &Path, strict: bool) -> Result<i32> {
    let model = load_model(model_path)?;
    let manifest = RunManifest {
        model_path: model_path.to_path_buf(),
        command: "cycles",
        cycle: None,
        output_dir: None,
    };
    manifest.validate(&model)?;
    let mode = mode_of(strict);
    let permissible = cycle::enumerate_permissible(&model, mode)?;
    println!("permissible updating cycles ({} mode):", if strict { "strict" } else { "permissive" });
    if permissible.is_empty() {
        println!("  (none)");
    }
    for c in &permissible {
        let scopes: Vec<String> = c
            .order()
            .iter()
            .map(|&j| {
                let names = model.names_for(&model.scope_of(j));
                names.join("+")
            })
            .collect();
        println!("  {}  visiting {}", c.display(), scopes.join(" -> "));
    }
    let mut rejected = Vec::new();
    for canon in cycle::rotation_classes(model.len()) {
        let c = cycle::is_permissible(&model, &canon, mode)?;
        if !c.permissible() {
            rejected.push(c);
        }
    }
    if !rejected.is_empty() {
        println!("rejected rotation classes:");
        for c in &rejected {
            println!("  {}  {}", c.display(), c.violation_summary());
        }
    }
    Ok(EXIT_OK)
}

fn write_report_files(
    out: Option<&Path>,
    report: &ReportFile,
    trace_csv: &str,
) -> Result<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("icr_report.json"), report.to_json()?)?;
        std::fs::write(dir.join("icr_trace.csv"), trace_csv)?;
    }
    Ok(())
}

fn cmd_icr(
    model_path: &Path,
    cycle_arg: &CycleArg,
    tol: Option<f64>,
    max_cycles: Option<usize>,
    out: Option<&Path>,
) -> Result<i32> {
    let model = load_model(model_path)?;
    let manifest = RunManifest {
        model_path: model_path.to_path_buf(),
        command: "icr",
        cycle: Some(cycle_arg.cycle.clone()),
        output_dir: out.map(Path::to_path_buf),
    };
    manifest.validate(&model)?;
    let cycle = checked_cycle(&model, &cycle_arg.cycle, cycle_arg.strict)?;
    let order = cycle.order().to_vec();
    match model.conditionals() {
        Conditionals::Discrete(_) => {
            let mut cfg = IcrConfig::default();
            if let Some(t) = tol {
                cfg.kl_tol = t;
            }
            if let Some(m) = max_cycles {
                cfg.max_cycles = m;
            }
            let last = *order.last().unwrap();
            let scope = model.scope_of(last);
            let q0 = DiscreteDistribution::uniform(scope.clone(), model.sizes_for(&scope)?);
            let mut run = icr::icr_run(&model, &cycle, &q0, &cfg)?;
            // all-full converged runs carry a compatibility verdict for free
            if run.converged && (0..model.len()).all(|i| model.is_full(i)) {
                let mut compatible = true;
                'outer: for i in 0..run.stationary.len() {
                    for j in (i + 1)..run.stationary.len() {
                        if crate::discrete::total_variation(&run.stationary[i], &run.stationary[j])?
                            > DEFAULT_COMPAT_TOL
                        {
                            compatible = false;
                            break 'outer;
                        }
                    }
                }
                run.compatible = Some(compatible);
            }
            let file = report::report_from_discrete(&model, &order, &run);
            let mut csv = Vec::new();
            report::write_discrete_trace_csv(&mut csv, &run.traces)?;
            write_report_files(out, &file, &String::from_utf8_lossy(&csv))?;
            print_discrete_run(&model, &order, &run);
            if run.converged {
                Ok(EXIT_OK)
            } else {
                eprintln!("error: no convergence within {} cycles", cfg.max_cycles);
                Ok(EXIT_NON_CONVERGENT)
            }
        }
        Conditionals::Gaussian(_) => {
            let mut cfg = GaussianIcrConfig::default();
            if let Some(t) = tol {
                cfg.frob_tol = t;
            }
            if let Some(m) = max_cycles {
                cfg.max_cycles = m;
            }
            let last = *order.last().unwrap();
            let scope = model.scope_of(last);
            let d = scope.len();
            let q0 = GaussianDistribution::new(
                scope,
                nalgebra::DVector::zeros(d),
                nalgebra::DMatrix::identity(d, d),
            )?;
            let mut run = gaussian_icr::gaussian_icr_run(&model, &cycle, &q0, &cfg)?;
            if run.converged && (0..model.len()).all(|i| model.is_full(i)) {
                let mut compatible = true;
                'outer: for i in 0..run.stationary.len() {
                    for j in (i + 1)..run.stationary.len() {
                        let a = &run.stationary[i];
                        let b = &run.stationary[j];
                        let gap = (a.mean() - b.mean())
                            .amax()
                            .max((a.cov() - b.cov()).amax());
                        if gap > DEFAULT_COMPAT_TOL {
                            compatible = false;
                            break 'outer;
                        }
                    }
                }
                run.compatible = Some(compatible);
            }
            let file = report::report_from_gaussian(&model, &order, &run);
            let mut csv = Vec::new();
            report::write_gaussian_trace_csv(&mut csv, &run.traces)?;
            write_report_files(out, &file, &String::from_utf8_lossy(&csv))?;
            print_gaussian_run(&model, &order, &run);
            if run.converged {
                Ok(EXIT_OK)
            } else {
                if let Some(d) = &run.divergence {
                    eprintln!("error: non-convergent run: {}", d);
                }
                Ok(EXIT_NON_CONVERGENT)
            }
        }
    }
}

fn cmd_compat(
    model_path: &Path,
    cycle_arg: &CycleArg,
    tol: f64,
    max_cycles: Option<usize>,
) -> Result<i32> {
    let model = load_model(model_path)?;
    let manifest = RunManifest {
        model_path: model_path.to_path_buf(),
        command: "compat",
        cycle: Some(cycle_arg.cycle.clone()),
        output_dir: None,
    };
    manifest.validate(&model)?;
    let cycle = checked_cycle(&model, &cycle_arg.cycle, cycle_arg.strict)?;
    let verdict = match model.family() {
        Family::Discrete => {
            let mut cfg = IcrConfig::default();
            cfg.kl_tol = 1e-20;
            if let Some(m) = max_cycles {
                cfg.max_cycles = m;
            }
            icr::compatibility_check(&model, &cycle, &cfg, tol)?
        }
        Family::Gaussian => {
            let mut cfg = GaussianIcrConfig::default();
            if let Some(m) = max_cycles {
                cfg.max_cycles = m;
            }
            gaussian_icr::gaussian_compatibility_check(&model, &cycle, &cfg, tol)?
        }
    };
    match verdict {
        Compatibility::Compatible => {
            println!("compatible: the limits of cycle {} agree within {:e}", cycle.display(), tol);
            Ok(EXIT_OK)
        }
        Compatibility::Incompatible => {
            println!(
                "incompatible: the limits of cycle {} differ beyond {:e}",
                cycle.display(),
                tol
            );
            Ok(EXIT_OK)
        }
        Compatibility::Undecidable => {
            println!("undecidable: the iteration did not converge");
            Ok(EXIT_NON_CONVERGENT)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    model_path: &Path,
    cycle_arg: &CycleArg,
    seed: u64,
    samples: usize,
    burn_in: usize,
    thin: usize,
    against: Option<&Path>,
    out: Option<&Path>,
) -> Result<i32> {
    let model = load_model(model_path)?;
    let manifest = RunManifest {
        model_path: model_path.to_path_buf(),
        command: "sample",
        cycle: Some(cycle_arg.cycle.clone()),
        output_dir: out.map(Path::to_path_buf),
    };
    manifest.validate(&model)?;
    let cycle = checked_cycle(&model, &cycle_arg.cycle, cycle_arg.strict)?;
    let cfg = ChainConfig {
        burn_in,
        samples,
        seed,
        thin,
    };
    let batches = sampler::run_chain(&model, &cycle, &cfg)?;
    for batch in &batches {
        print_batch(&model, batch);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("batches.json"), batches_json(&model, &batches)?)?;
        std::fs::write(dir.join("batches.csv"), batches_csv(&batches))?;
    }
    if let Some(report_path) = against {
        let file = ReportFile::from_path(report_path)?;
        let limits = file.limits(&model)?;
        if limits.len() != batches.len() {
            return Err(Error::InvalidConfig(format!(
                "report holds {} limits for {} batch positions",
                limits.len(),
                batches.len()
            )));
        }
        let mut all_pass = true;
        println!("comparison against {}:", report_path.display());
        for (batch, limit) in batches.iter().zip(&limits) {
            let cmp = sampler::compare(batch, limit)?;
            println!(
                "  position {}: max |z| = {:.3} at {} -> {}",
                batch.position + 1,
                cmp.max_z,
                cmp.worst,
                if cmp.pass { "pass" } else { "FAIL" }
            );
            all_pass &= cmp.pass;
        }
        if !all_pass {
            return Ok(EXIT_COMPARISON);
        }
    }
    Ok(EXIT_OK)
}

fn cmd_assemble(report_path: &Path, out: Option<&Path>) -> Result<i32> {
    let file = ReportFile::from_path(report_path)?;
    let mut gaussians = Vec::new();
    for entry in &file.stationary {
        match entry {
            LimitEntry::Gaussian {
                scope,
                mean,
                covariance,
            } => {
                if scope.len() != 2 {
                    return Err(Error::InconsistentMargins(format!(
                        "limit over {:?} is not bivariate",
                        scope
                    )));
                }
                gaussians.push((scope.clone(), mean.clone(), covariance.clone()));
            }
            LimitEntry::Discrete { .. } => {
                return Err(Error::InvalidConfig(
                    "assemble needs a gaussian report".into(),
                ))
            }
        }
    }
    if gaussians.len() != 3 {
        return Err(Error::InconsistentMargins(format!(
            "report holds {} limits, expected 3",
            gaussians.len()
        )));
    }
    // name the three variables and sort the margins into (xy, yz, xz) order
    let mut names: Vec<String> = gaussians
        .iter()
        .flat_map(|(scope, _, _)| scope.iter().cloned())
        .collect();
    names.sort();
    names.dedup();
    if names.len() != 3 {
        return Err(Error::InconsistentMargins(format!(
            "margins cover {} variables instead of 3",
            names.len()
        )));
    }
    let build = |want: [&str; 2]| -> Result<GaussianDistribution> {
        for (scope, mean, cov) in &gaussians {
            let mut sorted = scope.clone();
            sorted.sort();
            if sorted == want {
                // indices follow the sorted union's order
                let idx: Vec<usize> = sorted
                    .iter()
                    .map(|n| names.iter().position(|m| m == n).unwrap())
                    .collect();
                // reorder mean/cov when the stored scope was unsorted
                let perm: Vec<usize> = sorted
                    .iter()
                    .map(|n| scope.iter().position(|m| m == n).unwrap())
                    .collect();
                let m = nalgebra::DVector::from_fn(2, |i, _| mean[perm[i]]);
                let c = nalgebra::DMatrix::from_fn(2, 2, |i, j| cov[perm[i]][perm[j]]);
                return GaussianDistribution::new(VarSet::new(idx).unwrap(), m, c);
            }
        }
        Err(Error::InconsistentMargins(format!(
            "no margin over ({}, {})",
            want[0], want[1]
        )))
    };
    let m12 = build([&names[0], &names[1]])?;
    let m23 = build([&names[1], &names[2]])?;
    let m13 = build([&names[0], &names[2]])?;
    let joint = gaussian_icr::assemble_trivariate(&m12, &m23, &m13)?;
    println!("assembled trivariate over ({}, {}, {}):", names[0], names[1], names[2]);
    print_gaussian_matrix(joint.mean(), joint.cov());
    if let Some(path) = out {
        let entry = LimitEntry::Gaussian {
            scope: names,
            mean: joint.mean().iter().copied().collect(),
            covariance: (0..3)
                .map(|i| (0..3).map(|j| joint.cov()[(i, j)]).collect())
                .collect(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&entry)?)?;
    }
    Ok(EXIT_OK)
}

fn print_discrete_run(model: &ConditionalModel, order: &[usize], run: &crate::icr::IcrReport) {
    println!(
        "{} after {} cycles",
        if run.converged { "converged" } else { "not converged" },
        run.cycles_used
    );
    if let Some(c) = run.compatible {
        println!("compatible: {}", c);
    }
    for (i, dist) in run.stationary.iter().enumerate() {
        let names = model.names_for(dist.scope());
        println!(
            "position {} (after conditional {}), scope ({}):",
            i + 1,
            order[i] + 1,
            names.join(", ")
        );
        let sizes = dist.sizes();
        for (idx, &p) in dist.table().iter().enumerate() {
            let mut rem = idx;
            let mut label = String::new();
            for (k, &s) in sizes.iter().enumerate().rev() {
                let digit = rem % s;
                rem /= s;
                let part = format!("{}={}", names[k], digit);
                if label.is_empty() {
                    label = part;
                } else {
                    label = format!("{} {}", part, label);
                }
            }
            println!("  {}  {:.12}", label, p);
        }
    }
}

fn print_gaussian_matrix(mean: &nalgebra::DVector<f64>, cov: &nalgebra::DMatrix<f64>) {
    let mean_str: Vec<String> = mean.iter().map(|x| format!("{:.10}", x)).collect();
    println!("  mean: [{}]", mean_str.join(", "));
    println!("  covariance:");
    let n = cov.nrows();
    for i in 0..n {
        let mut line = String::from("   ");
        for j in 0..n {
            let _ = write!(line, " {:>16.10}", cov[(i, j)]);
        }
        println!("{}", line);
    }
    // annotate with exact fractions when every entry has one
    let labels: Vec<Option<String>> = cov.iter().map(|&x| report::rational_label(x)).collect();
    if labels.iter().all(|l| l.is_some()) {
        let mut rows = Vec::new();
        for i in 0..n {
            let row: Vec<String> = (0..n)
                .map(|j| report::rational_label(cov[(i, j)]).unwrap())
                .collect();
            rows.push(format!("[{}]", row.join(", ")));
        }
        println!("  rational form: [{}]", rows.join(", "));
    }
}

fn print_gaussian_run(
    model: &ConditionalModel,
    order: &[usize],
    run: &crate::gaussian_icr::GaussianIcrReport,
) {
    println!(
        "{} after {} cycles",
        if run.converged { "converged" } else { "not converged" },
        run.cycles_used
    );
    if let Some(d) = &run.divergence {
        println!("divergence: {}", d);
    }
    if let Some(c) = run.compatible {
        println!("compatible: {}", c);
    }
    for (i, g) in run.stationary.iter().enumerate() {
        let names = model.names_for(g.scope());
        println!(
            "position {} (after conditional {}), scope ({}):",
            i + 1,
            order[i] + 1,
            names.join(", ")
        );
        print_gaussian_matrix(g.mean(), g.cov());
    }
}

fn print_batch(model: &ConditionalModel, batch: &BatchSummary) {
    let names = model.names_for(&batch.scope);
    println!(
        "batch {} over ({}), {} samples:",
        batch.position + 1,
        names.join(", "),
        batch.samples
    );
    match &batch.data {
        BatchData::Discrete { table, .. } => {
            for (idx, &p) in table.table().iter().enumerate() {
                println!("  state {}  {:.6}", idx, p);
            }
        }
        BatchData::Gaussian { mean, cov, .. } => {
            print_gaussian_matrix(mean, cov);
        }
    }
}

fn batches_json(model: &ConditionalModel, batches: &[BatchSummary]) -> Result<String> {
    #[derive(serde::Serialize)]
    struct Entry {
        position: usize,
        scope: Vec<String>,
        samples: u64,
        #[serde(skip_serializing_if = "Option::is_none")]
        table: Option<Vec<f64>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        std_errors: Option<Vec<f64>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        covariance: Option<Vec<Vec<f64>>>,
    }
    let entries: Vec<Entry> = batches
        .iter()
        .map(|b| {
            let scope = model.names_for(&b.scope);
            match &b.data {
                BatchData::Discrete { table, std_errors } => Entry {
                    position: b.position + 1,
                    scope,
                    samples: b.samples,
                    table: Some(table.table().to_vec()),
                    std_errors: Some(std_errors.clone()),
                    mean: None,
                    covariance: None,
                },
                BatchData::Gaussian { mean, cov, .. } => Entry {
                    position: b.position + 1,
                    scope,
                    samples: b.samples,
                    table: None,
                    std_errors: None,
                    mean: Some(mean.iter().copied().collect()),
                    covariance: Some(
                        (0..cov.nrows())
                            .map(|i| (0..cov.ncols()).map(|j| cov[(i, j)]).collect())
                            .collect(),
                    ),
                },
            }
        })
        .collect();
    Ok(serde_json::to_string_pretty(&entries)?)
}

fn batches_csv(batches: &[BatchSummary]) -> String {
    let mut out = String::from("position,kind,i,j,estimate,std_error\n");
    for b in batches {
        match &b.data {
            BatchData::Discrete { table, std_errors } => {
                for (i, (&p, &se)) in table.table().iter().zip(std_errors.iter()).enumerate() {
                    let _ = writeln!(out, "{},cell,{},,{:e},{:e}", b.position + 1, i, p, se);
                }
            }
            BatchData::Gaussian {
                mean,
                cov,
                mean_se,
                cov_se,
            } => {
                for i in 0..mean.len() {
                    let _ = writeln!(
                        out,
                        "{},mean,{},,{:e},{:e}",
                        b.position + 1,
                        i,
                        mean[i],
                        mean_se[i]
                    );
                }
                for i in 0..cov.nrows() {
                    for j in i..cov.ncols() {
                        let _ = writeln!(
                            out,
                            "{},cov,{},{},{:e},{:e}",
                            b.position + 1,
                            i,
                            j,
                            cov[(i, j)],
                            cov_se[(i, j)]
                        );
                    }
                }
            }
        }
    }
    out
}
