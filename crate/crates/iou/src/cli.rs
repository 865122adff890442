use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use iou_core::bootstrap::run_sci;
use iou_core::combinatorics::{draw_design, DEFAULT_ENUMERATION_CAP};
use iou_core::diagnostics::{run_replicates, theta_true, CalibrationReport, CoverageReport, StudyConfig};
use iou_core::estimators::{incomplete_u_with_cap, DEFAULT_MEMORY_CAP};
use iou_core::rng::{RngKey, StreamKind};
use iou_core::{DataMatrix, Dimensions, TupleDesign};

use crate::config::{Overrides, RunConfig};
use crate::cost_probe::{cost_scaling_probe, write_probe_csv, ProbeConfig};
use crate::csv_io;
use crate::error::{CliError, CliResult};
use crate::formats::{self, Cache, EstimateDoc, SciDoc, StudyDoc};
use crate::oracle::{self, OracleOptions};

#[derive(Debug, Parser)]
#[command(name = "iou", version, about = "Incomplete U-statistics with bootstrap simultaneous confidence intervals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Incomplete U-statistic of a CSV sample under a Bernoulli design.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Write the cached kernel outputs to this binary file.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Simultaneous confidence intervals from the multiplier bootstrap.
    Sci {
        #[command(flatten)]
        common: Common,
    },
    /// Coverage and calibration study on simulated data.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Sample size of each replicate.
        #[arg(long)]
        n: Option<usize>,
        /// Number of replicates.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Exhaustive identities on small instances.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Adds an exhaustive equivalence check at this sample size.
        #[arg(long)]
        n: Option<usize>,
        /// Largest number of tuples an exhaustive check may enumerate.
        #[arg(long)]
        cap: Option<u64>,
        #[arg(long, hide = true)]
        inject_failure: Option<String>,
    },
    /// Timing of kernel evaluation and the bootstrap loop across orders.
    CostProbe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated kernel orders.
        #[arg(long, value_delimiter = ',')]
        r_grid: Option<Vec<usize>>,
        /// Timing repetitions per phase; the minimum is reported.
        #[arg(long)]
        runs: Option<usize>,
        /// Time with the configured worker count instead of one thread.
        #[arg(long)]
        parallel_timing: bool,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// CSV sample, comma separated with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// TOML configuration file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// mean, coord_max, log_mean, kde or tree.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Kernel order.
    #[arg(long)]
    pub r: Option<usize>,
    /// Observation width for simulated data; checked against CSV input.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Computational budget N (expected number of sampled tuples).
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub bootstrap_reps: Option<usize>,
    /// Number of anchors for the divide-and-conquer Hájek estimates.
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "IOU_THREADS")]
    pub threads: Option<usize>,
    /// Response column name for regression kernels.
    #[arg(long)]
    pub response: Option<String>,
    /// Output file (estimate, sci, oracle, cost-probe) or directory (simulate).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub overwrite: bool,
}

impl Common {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        cfg.apply(&Overrides {
            data: self.data.clone(),
            kernel: self.kernel.clone(),
            r: self.r,
            dim: self.dim,
            budget: self.budget,
            bootstrap_reps: self.bootstrap_reps,
            n1: self.n1,
            alpha: self.alpha,
            seed: self.seed,
            threads: self.threads,
            out: self.out.clone(),
            overwrite: self.overwrite,
        });
        if self.response.is_some() {
            cfg.data.response.clone_from(&self.response);
        }
        cfg.check_files()?;
        Ok(cfg)
    }
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Estimate { common, .. }
            | Command::Sci { common }
            | Command::Simulate { common, .. }
            | Command::Oracle { common, .. }
            | Command::CostProbe { common, .. } => common,
        }
    }
}

fn pool(threads: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {threads} worker threads: {e}")))
}

pub fn run(cli: Cli) -> CliResult<()> {
    let common = cli.command.common();
    let cfg = common.resolve()?;
    let workers = pool(cfg.threads.unwrap_or(0))?;
    match &cli.command {
        Command::Estimate { cache, .. } => workers.install(|| estimate(&cfg, common, cache.as_deref())),
        Command::Sci { .. } => workers.install(|| sci(&cfg, common)),
        Command::Simulate { n, reps, .. } => workers.install(|| simulate(&cfg, common, *n, *reps)),
        Command::Oracle { n, cap, inject_failure, .. } => workers.install(|| {
            let mut opts = OracleOptions {
                inject_failure: inject_failure.clone(),
                extra: None,
                cap: cap.or(cfg.oracle.cap).unwrap_or(DEFAULT_ENUMERATION_CAP),
                seed: cfg.seed(),
            };
            if let Some(n) = n.or(cfg.oracle.n) {
                opts.extra = Some((n, common.r.or(cfg.oracle.r).unwrap_or(2)));
            }
            let checks = oracle::run_suite(&opts)?;
            let (text, status) = oracle::report(&checks);
            formats::emit(cfg.output.path.as_deref(), &text)?;
            status
        }),
        Command::CostProbe { n, r_grid, runs, parallel_timing, .. } => {
            let probe = ProbeConfig {
                n: n.or(cfg.cost_probe.n).unwrap_or(500),
                budget: cfg.design.budget.unwrap_or(5000),
                b_reps: cfg.bootstrap.reps.unwrap_or(500),
                n1: cfg.bootstrap.n1.unwrap_or(200),
                r_grid: r_grid.clone().or(cfg.cost_probe.r_grid.clone()).unwrap_or_else(|| vec![10, 25, 50]),
                runs: runs.or(cfg.cost_probe.runs).unwrap_or(3),
                seed: cfg.seed(),
            };
            let parallel = *parallel_timing || cfg.cost_probe.parallel.unwrap_or(false);
            let timing = if parallel { workers } else { pool(1)? };
            timing.install(|| cost_probe(&cfg, common, &probe))
        }
    }
}

fn load_data(cfg: &RunConfig, common: &Common) -> CliResult<DataMatrix> {
    let path = cfg
        .data
        .path
        .as_ref()
        .ok_or_else(|| CliError::Config("a data file is required (--data)".into()))?;
    let table = csv_io::read_table(path, cfg.data.response.as_deref())?;
    if let Some(dim) = common.dim {
        if dim != table.matrix.cols() {
            return Err(CliError::Config(format!(
                "--dim {dim} does not match the {} feature columns of {}",
                table.matrix.cols(),
                path.display()
            )));
        }
    }
    Ok(table.matrix)
}

fn kernel_name(cfg: &RunConfig) -> String {
    cfg.kernel.kind.clone().unwrap_or_else(|| "mean".into())
}

fn echo_design(design: &TupleDesign) {
    eprintln!(
        "design: n={} r={} N={} p_n={:e} N_hat={}",
        design.n(),
        design.r(),
        design.budget(),
        design.p_n(),
        design.n_hat()
    );
    if design.exceeds_sparse_regime() {
        eprintln!("warning: p_n = {} exceeds 1/2; the design is outside the sparse regime", design.p_n());
    }
}

fn estimate(cfg: &RunConfig, common: &Common, cache: Option<&Path>) -> CliResult<()> {
    let data = load_data(cfg, common)?;
    let spec = cfg.kernel_spec(data.cols())?;
    spec.check_data(&data)?;
    let dims = Dimensions::new(data.rows(), spec.order(), spec.out_dim())?;
    let seed = cfg.seed();
    let design = draw_design(dims, cfg.budget()?, RngKey::new(seed, StreamKind::Design, 0))?;
    echo_design(&design);
    let memory_cap = cfg.design.memory_cap.unwrap_or(DEFAULT_MEMORY_CAP);
    let bundle = incomplete_u_with_cap(&data, &spec, &design, RngKey::new(seed, StreamKind::KernelNoise, 0), memory_cap)?;
    if let Some(path) = cache.or(cfg.output.cache.as_deref()) {
        Cache::from_bundle(&bundle).write(path)?;
    }
    formats::emit(cfg.output.path.as_deref(), &formats::to_json(&EstimateDoc::new(&bundle, &kernel_name(cfg), seed)))
}

fn sci(cfg: &RunConfig, common: &Common) -> CliResult<()> {
    let data = load_data(cfg, common)?;
    let spec = cfg.kernel_spec(data.cols())?;
    let boot = cfg.bootstrap(data.rows())?;
    let seed = cfg.seed();
    let run = run_sci(&data, &spec, cfg.budget()?, &boot, seed)?;
    echo_design(&run.bundle.design);
    let doc = SciDoc::new(&run.sci, &run.bundle, boot.n1, &kernel_name(cfg), seed);
    eprint!("{}", doc.table());
    formats::emit(cfg.output.path.as_deref(), &formats::to_json(&doc))
}

fn simulate(cfg: &RunConfig, common: &Common, n: Option<usize>, reps: Option<usize>) -> CliResult<()> {
    let n = n
        .or(cfg.simulate.n)
        .ok_or_else(|| CliError::Config("sample size is required (--n)".into()))?;
    let reps = reps.or(cfg.simulate.reps).unwrap_or(100);
    let out_dir = cfg.output.path.as_deref();
    let csv_path = out_dir.map(|d| d.join("replicates.csv"));
    if let Some(p) = &csv_path {
        if p.exists() && !cfg.overwrite() {
            return Err(CliError::Config(format!("{} exists; pass --overwrite to replace it", p.display())));
        }
    }

    let dist = cfg.distribution(common.dim.unwrap_or(1))?;
    let spec = cfg.kernel_spec(dist.dim())?;
    let theta = match &cfg.simulate.theta {
        Some(t) => t.clone(),
        None => theta_true(&dist, &spec).ok_or_else(|| {
            CliError::Config("no closed-form θ for this kernel and distribution; set `simulate.theta`".into())
        })?,
    };
    let boot = cfg.bootstrap(n)?;
    let budget = cfg.budget()?;
    let study = StudyConfig {
        dist: &dist,
        spec: &spec,
        n,
        budget,
        bootstrap: boot,
        theta_true: &theta,
        reps,
    };
    let seed = cfg.seed();
    let records = run_replicates(&study, RngKey::new(seed, StreamKind::Simulation, 0))?;
    let coverage = CoverageReport::from_records(&records, boot.alpha);
    let calibration = CalibrationReport::from_records(&records);
    let doc = StudyDoc {
        kernel: kernel_name(cfg),
        distribution: format!("{dist:?}"),
        n,
        r: spec.order(),
        d: spec.out_dim(),
        budget,
        bootstrap_reps: boot.b_reps,
        n1: boot.n1,
        alpha: boot.alpha,
        seed,
        theta_true: theta.clone(),
        reps: 0,
        hits: 0,
        degenerate: 0,
        empirical_coverage: 0.0,
        wilson_lower: 0.0,
        wilson_upper: 0.0,
        avg_width: Vec::new(),
        ks_distance: 0.0,
        ks_critical_1pct: 0.0,
    }
    .fill(&coverage, &calibration);
    let json = formats::to_json(&doc);
    match (out_dir, csv_path) {
        (Some(dir), Some(csv_path)) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
            let file = std::fs::File::create(&csv_path).map_err(|e| CliError::output(&csv_path, e))?;
            formats::write_replicates(&records, file).map_err(|e| CliError::output(&csv_path, e))?;
            formats::emit(Some(&dir.join("summary.json")), &json)?;
            eprintln!(
                "coverage {:.3} (Wilson 95% [{:.3}, {:.3}]), KS {:.4}",
                doc.empirical_coverage, doc.wilson_lower, doc.wilson_upper, doc.ks_distance
            );
            Ok(())
        }
        _ => formats::emit(None, &json),
    }
}

fn cost_probe(cfg: &RunConfig, common: &Common, probe: &ProbeConfig) -> CliResult<()> {
    let first = *probe
        .r_grid
        .first()
        .ok_or_else(|| CliError::Config("r grid is empty".into()))?;
    let mut cfg = cfg.clone();
    cfg.kernel.r = Some(first);
    let dist = cfg.distribution(common.dim.unwrap_or(10))?;
    let spec = cfg.kernel_spec(dist.dim())?;
    let rows = cost_scaling_probe(&spec, &dist, probe)?;
    let mut buf = Vec::new();
    write_probe_csv(&rows, &mut buf).map_err(|e| CliError::output(Path::new("<csv>"), e))?;
    formats::emit(cfg.output.path.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))
}
