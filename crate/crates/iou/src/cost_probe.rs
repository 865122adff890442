//! Wall-clock timing of the two phases whose cost the design controls: kernel
//! evaluation over the sampled tuples, and the bootstrap replicate loop over
//! cached outputs.

use std::io::Write;
use std::time::Instant;

use iou_core::bootstrap::{bootstrap_sup_stats, variance_diagonals};
use iou_core::combinatorics::draw_design;
use iou_core::diagnostics::DistributionSpec;
use iou_core::estimators::{hajek_dc, incomplete_u, AnchorSelection};
use iou_core::rng::{derive_stream, RngKey, StreamKind};
use iou_core::{Dimensions, KernelSpec};

use crate::error::CliResult;

#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub n: usize,
    pub budget: u64,
    pub b_reps: usize,
    pub n1: usize,
    pub r_grid: Vec<usize>,
    /// Each phase is timed this many times; the minimum is reported.
    pub runs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub r: usize,
    pub n: usize,
    pub budget: u64,
    pub n_hat: usize,
    pub d: usize,
    pub b_reps: usize,
    pub kernel_secs: f64,
    pub bootstrap_secs: f64,
}

fn min_time<T>(runs: usize, mut f: impl FnMut() -> CliResult<T>) -> CliResult<(f64, T)> {
    let mut best = f64::INFINITY;
    let mut last = None;
    for _ in 0..runs.max(1) {
        let start = Instant::now();
        let out = f()?;
        best = best.min(start.elapsed().as_secs_f64());
        last = Some(out);
    }
    Ok((best, last.expect("at least one run")))
}

/// Times both phases for every order in the grid. `spec` fixes the kernel
/// family; its order is replaced by each grid value.
pub fn cost_scaling_probe(spec: &KernelSpec, data_dist: &DistributionSpec, cfg: &ProbeConfig) -> CliResult<Vec<ProbeRow>> {
    let data = data_dist.sample(cfg.n, &mut derive_stream(RngKey::new(cfg.seed, StreamKind::Simulation, 0)))?;
    let mut rows = Vec::with_capacity(cfg.r_grid.len());
    for &r in &cfg.r_grid {
        let spec = spec.with_order(r)?;
        let dims = Dimensions::new(cfg.n, r, spec.out_dim())?;
        let design = draw_design(dims, cfg.budget, RngKey::new(cfg.seed, StreamKind::Design, r as u128))?;
        let key = RngKey::new(cfg.seed, StreamKind::KernelNoise, 0);
        let (kernel_secs, bundle) = min_time(cfg.runs, || Ok(incomplete_u(&data, &spec, &design, key)?))?;
        let hajek = hajek_dc(&data, &spec, cfg.n1, key, AnchorSelection::Random)?;
        let diag = variance_diagonals(&bundle, &hajek)?;
        let (bootstrap_secs, _) = min_time(cfg.runs, || Ok(bootstrap_sup_stats(&bundle, &hajek, &diag, cfg.b_reps, key)))?;
        rows.push(ProbeRow {
            r,
            n: cfg.n,
            budget: cfg.budget,
            n_hat: bundle.n_hat(),
            d: spec.out_dim(),
            b_reps: cfg.b_reps,
            kernel_secs,
            bootstrap_secs,
        });
    }
    Ok(rows)
}

pub fn write_probe_csv(rows: &[ProbeRow], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "n", "budget", "n_hat", "d", "b_reps", "kernel_secs", "bootstrap_secs"])?;
    for p in rows {
        w.write_record([
            p.r.to_string(),
            p.n.to_string(),
            p.budget.to_string(),
            p.n_hat.to_string(),
            p.d.to_string(),
            p.b_reps.to_string(),
            format!("{:.6}", p.kernel_secs),
            format!("{:.6}", p.bootstrap_secs),
        ])?;
    }
    w.flush()?;
    Ok(())
}
