//! Run configuration: an optional TOML file overlaid by command-line flags.
//!
//! ```toml
//! seed = 42
//! threads = 4
//!
//! [data]
//! path = "sample.csv"
//! response = "y"
//!
//! [kernel]
//! kind = "tree"          # mean | coord_max | log_mean | kde | tree
//! r = 20
//! points = "grid.csv"    # design points (kde) or test points (tree)
//! mtry = 2
//!
//! [design]
//! budget = 5000
//!
//! [bootstrap]
//! reps = 500
//! alpha = 0.1
//! n1 = 200
//! ```

use std::path::{Path, PathBuf};

use iou_core::diagnostics::{DistributionSpec, SignalFn};
use iou_core::estimators::AnchorSelection;
use iou_core::kernels::{TreeParams, TupleSummary};
use iou_core::{BootstrapConfig, DataMatrix, KernelSpec, KernelVariant};
use serde::Deserialize;

use crate::csv_io;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub data: DataSection,
    pub kernel: KernelSection,
    pub design: DesignSection,
    pub bootstrap: BootstrapSection,
    pub simulate: SimulateSection,
    pub oracle: OracleSection,
    pub cost_probe: CostProbeSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub response: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub kind: Option<String>,
    pub r: Option<usize>,
    pub bandwidth: Option<f64>,
    /// Tuple summary for the density kernel: `mean` or `max`.
    pub statistic: Option<String>,
    pub points: Option<PathBuf>,
    pub mtry: Option<usize>,
    pub min_leaf: Option<usize>,
    pub max_depth: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSection {
    pub budget: Option<u64>,
    pub memory_cap: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSection {
    pub reps: Option<usize>,
    pub alpha: Option<f64>,
    pub n1: Option<usize>,
    /// `random` (default) or `first`.
    pub anchors: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub n: Option<usize>,
    pub reps: Option<usize>,
    /// Overrides the built-in value of θ for the chosen distribution.
    pub theta: Option<Vec<f64>>,
    pub distribution: DistributionSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistributionSection {
    /// `gaussian` (default), `uniform`, `discrete` or `regression`.
    pub kind: Option<String>,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub support: Option<Vec<f64>>,
    pub probs: Option<Vec<f64>>,
    /// Regression signal: `zero`, `linear` or `sine`.
    pub signal: Option<String>,
    pub noise_sd: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub n: Option<usize>,
    pub r: Option<usize>,
    pub cap: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostProbeSection {
    pub n: Option<usize>,
    pub r_grid: Option<Vec<usize>>,
    pub runs: Option<usize>,
    pub parallel: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub overwrite: Option<bool>,
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub kernel: Option<String>,
    pub r: Option<usize>,
    pub dim: Option<usize>,
    pub budget: Option<u64>,
    pub bootstrap_reps: Option<usize>,
    pub n1: Option<usize>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub overwrite: bool,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
            if v.is_some() {
                slot.clone_from(v);
            }
        }
        set(&mut self.data.path, &o.data);
        set(&mut self.kernel.kind, &o.kernel);
        set(&mut self.kernel.r, &o.r);
        set(&mut self.design.budget, &o.budget);
        set(&mut self.bootstrap.reps, &o.bootstrap_reps);
        set(&mut self.bootstrap.n1, &o.n1);
        set(&mut self.bootstrap.alpha, &o.alpha);
        set(&mut self.seed, &o.seed);
        set(&mut self.threads, &o.threads);
        set(&mut self.output.path, &o.out);
        if o.overwrite {
            self.output.overwrite = Some(true);
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn overwrite(&self) -> bool {
        self.output.overwrite.unwrap_or(false)
    }

    pub fn order(&self) -> CliResult<usize> {
        self.kernel.r.ok_or_else(|| CliError::Config("kernel order `r` is required (--r)".into()))
    }

    pub fn budget(&self) -> CliResult<u64> {
        match self.design.budget {
            Some(0) => Err(CliError::Config("budget must be at least 1".into())),
            Some(b) => Ok(b),
            None => Err(CliError::Config("budget `N` is required (--budget)".into())),
        }
    }

    pub fn bootstrap(&self, n: usize) -> CliResult<BootstrapConfig> {
        let reps = self.bootstrap.reps.unwrap_or(500);
        let alpha = self.bootstrap.alpha.unwrap_or(0.05);
        let n1 = self.bootstrap.n1.unwrap_or(n.min(200));
        let mut cfg = BootstrapConfig::new(reps, alpha, n1)?;
        cfg.anchors = match self.bootstrap.anchors.as_deref() {
            None | Some("random") => AnchorSelection::Random,
            Some("first") => AnchorSelection::First,
            Some(other) => return Err(CliError::Config(format!("unknown anchors `{other}`"))),
        };
        Ok(cfg)
    }

    /// Fails with a data error naming the first referenced file that does
    /// not exist.
    pub fn check_files(&self) -> CliResult<()> {
        for p in [&self.data.path, &self.kernel.points].into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::Data(format!("{}: file not found", p.display())));
            }
        }
        Ok(())
    }

    /// Builds the kernel for `p`-column observations.
    pub fn kernel_spec(&self, p: usize) -> CliResult<KernelSpec> {
        let r = self.order()?;
        let k = &self.kernel;
        let kind = k.kind.as_deref().unwrap_or("mean");
        let points = || -> CliResult<DataMatrix> {
            let path = k
                .points
                .as_ref()
                .ok_or_else(|| CliError::Config(format!("kernel `{kind}` needs `kernel.points`")))?;
            Ok(csv_io::read_table(path, None)?.matrix)
        };
        let variant = match kind {
            "mean" => KernelVariant::Mean,
            "coord_max" | "coordmax" => KernelVariant::CoordMax,
            "log_mean" | "logmean" => KernelVariant::LogMean,
            "kde" => KernelVariant::Kde {
                design_points: points()?,
                bandwidth: k.bandwidth.unwrap_or(1.0),
                statistic: match k.statistic.as_deref() {
                    None | Some("mean") => TupleSummary::Mean,
                    Some("max") => TupleSummary::Max,
                    Some(other) => return Err(CliError::Config(format!("unknown kde statistic `{other}`"))),
                },
            },
            "tree" | "subsample_tree" => KernelVariant::SubsampleTree {
                test_points: points()?,
                params: TreeParams {
                    mtry: k.mtry.unwrap_or(p.div_ceil(3).max(1)),
                    min_leaf: k.min_leaf.unwrap_or(1),
                    max_depth: k.max_depth,
                },
            },
            other => return Err(CliError::Config(format!("unknown kernel `{other}`"))),
        };
        Ok(KernelSpec::new(variant, r, p)?)
    }

    /// The sampling distribution of a simulation study, `p` columns wide.
    pub fn distribution(&self, p: usize) -> CliResult<DistributionSpec> {
        let d = &self.simulate.distribution;
        let dist = match d.kind.as_deref().unwrap_or("gaussian") {
            "gaussian" => DistributionSpec::GaussianIid {
                mean: d.mean.unwrap_or(0.0),
                sd: d.sd.unwrap_or(1.0),
                p,
            },
            "uniform" => DistributionSpec::UniformIid {
                lo: d.lo.unwrap_or(0.0),
                hi: d.hi.unwrap_or(1.0),
                p,
            },
            "discrete" => DistributionSpec::Discrete {
                support: d.support.clone().ok_or_else(|| CliError::Config("discrete needs `support`".into()))?,
                probs: d.probs.clone().ok_or_else(|| CliError::Config("discrete needs `probs`".into()))?,
            },
            "regression" => DistributionSpec::RegressionModel {
                features: Box::new(DistributionSpec::UniformIid { lo: 0.0, hi: 1.0, p }),
                signal: match d.signal.as_deref().unwrap_or("linear") {
                    "zero" => SignalFn::Zero,
                    "linear" => SignalFn::Linear,
                    "sine" => SignalFn::Sine,
                    other => return Err(CliError::Config(format!("unknown signal `{other}`"))),
                },
                noise_sd: d.noise_sd.unwrap_or(1.0),
            },
            other => return Err(CliError::Config(format!("unknown distribution `{other}`"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}
