//! Serialized artifacts: JSON documents and the binary kernel-output cache.
//!
//! JSON output carries no timestamps, so reruns with the same seed are
//! byte-identical.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use iou_core::diagnostics::{CalibrationReport, CoverageReport, ReplicateRecord};
use iou_core::{EstimateBundle, SciResult};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDoc {
    pub n: usize,
    pub r: usize,
    pub budget: u64,
    pub p_n: f64,
    pub n_hat: usize,
    pub log_cardinality: f64,
    pub seed: u64,
    pub tuples: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDoc {
    pub kernel: String,
    pub d: usize,
    pub u_prime: Vec<f64>,
    pub design: DesignDoc,
}

impl EstimateDoc {
    pub fn new(bundle: &EstimateBundle, kernel: &str, seed: u64) -> Self {
        let design = &bundle.design;
        EstimateDoc {
            kernel: kernel.to_owned(),
            d: bundle.dims.d,
            u_prime: bundle.u_prime.clone(),
            design: DesignDoc {
                n: design.n(),
                r: design.r(),
                budget: design.budget(),
                p_n: design.p_n(),
                n_hat: design.n_hat(),
                log_cardinality: design.log_cardinality(),
                seed,
                tuples: design.tuples().iter().map(|t| t.indices().to_vec()).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalDoc {
    pub j: usize,
    pub lower: f64,
    pub upper: f64,
    pub center: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SciDoc {
    pub kernel: String,
    pub alpha: f64,
    pub q_hat: f64,
    pub n: usize,
    pub r: usize,
    pub d: usize,
    #[serde(rename = "N")]
    pub budget: u64,
    #[serde(rename = "B")]
    pub bootstrap_reps: usize,
    pub n_hat: usize,
    pub p_n: f64,
    pub alpha_n: f64,
    pub n1: usize,
    pub intervals: Vec<IntervalDoc>,
    pub lambda_hat: Vec<f64>,
    pub sigma_g_hat_sq: Vec<f64>,
    pub sigma_h_hat_sq: Vec<f64>,
    pub seed: u64,
}

impl SciDoc {
    pub fn new(sci: &SciResult, bundle: &EstimateBundle, n1: usize, kernel: &str, seed: u64) -> Self {
        let dg = &sci.diagonals;
        SciDoc {
            kernel: kernel.to_owned(),
            alpha: sci.alpha,
            q_hat: sci.q_hat,
            n: sci.n,
            r: bundle.dims.r,
            d: bundle.dims.d,
            budget: bundle.design.budget(),
            bootstrap_reps: sci.sup_stats.len(),
            n_hat: bundle.n_hat(),
            p_n: bundle.design.p_n(),
            alpha_n: dg.alpha_n,
            n1,
            intervals: (0..sci.center.len())
                .map(|j| IntervalDoc {
                    j,
                    lower: sci.lower[j],
                    upper: sci.upper[j],
                    center: sci.center[j],
                })
                .collect(),
            lambda_hat: dg.lambda_hat.clone(),
            sigma_g_hat_sq: dg.sigma_g_hat_sq.clone(),
            sigma_h_hat_sq: dg.sigma_h_hat_sq.clone(),
            seed,
        }
    }

    /// Fixed-width table for terminals.
    pub fn table(&self) -> String {
        let mut s = format!(
            "simultaneous {:.1}% intervals  n={} r={} N={} N_hat={} B={} q_hat={:.6}\n",
            100.0 * (1.0 - self.alpha),
            self.n,
            self.r,
            self.budget,
            self.n_hat,
            self.bootstrap_reps,
            self.q_hat
        );
        s.push_str(&format!("{:>5} {:>14} {:>14} {:>14} {:>12}\n", "j", "lower", "estimate", "upper", "lambda_hat"));
        for (iv, lambda) in self.intervals.iter().zip(&self.lambda_hat) {
            s.push_str(&format!(
                "{:>5} {:>14.6} {:>14.6} {:>14.6} {:>12.4e}\n",
                iv.j, iv.lower, iv.center, iv.upper, lambda
            ));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDoc {
    pub kernel: String,
    pub distribution: String,
    pub n: usize,
    pub r: usize,
    pub d: usize,
    pub budget: u64,
    pub bootstrap_reps: usize,
    pub n1: usize,
    pub alpha: f64,
    pub seed: u64,
    pub theta_true: Vec<f64>,
    pub reps: usize,
    pub hits: usize,
    pub degenerate: usize,
    pub empirical_coverage: f64,
    pub wilson_lower: f64,
    pub wilson_upper: f64,
    pub avg_width: Vec<f64>,
    pub ks_distance: f64,
    pub ks_critical_1pct: f64,
}

impl StudyDoc {
    pub fn fill(mut self, coverage: &CoverageReport, calibration: &CalibrationReport) -> Self {
        self.reps = coverage.reps;
        self.hits = coverage.hits;
        self.degenerate = coverage.degenerate;
        self.empirical_coverage = coverage.empirical_coverage;
        self.wilson_lower = coverage.wilson_interval.0;
        self.wilson_upper = coverage.wilson_interval.1;
        self.avg_width.clone_from(&coverage.avg_width);
        self.ks_distance = calibration.ks_distance;
        self.ks_critical_1pct = calibration.ks_critical_1pct;
        self
    }
}

pub fn write_replicates(records: &[ReplicateRecord], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = records.first().map_or(0, |r| r.widths.len());
    let mut header: Vec<String> = ["rep", "covered", "degenerate", "sup_deviation", "q_hat", "p_value"]
        .into_iter()
        .map(String::from)
        .collect();
    header.extend((0..d).map(|j| format!("width_{j}")));
    w.write_record(&header)?;
    for r in records {
        let mut rec = vec![
            r.rep.to_string(),
            u8::from(r.covered).to_string(),
            u8::from(r.degenerate).to_string(),
            r.sup_deviation.to_string(),
            r.q_hat.to_string(),
            r.p_value.to_string(),
        ];
        rec.extend(r.widths.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents contain only plain data");
    s.push('\n');
    s
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::output(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::output(Path::new("<stdout>"), e))
        }
    }
}

const CACHE_MAGIC: &[u8; 4] = b"IOUC";
const CACHE_VERSION: u32 = 1;

/// Cached kernel outputs: a 16-byte header (magic, version, rows, columns as
/// little-endian `u32`) followed by row-major little-endian `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Cache {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Cache {
    pub fn from_bundle(bundle: &EstimateBundle) -> Self {
        Cache {
            rows: bundle.n_hat(),
            cols: bundle.dims.d,
            values: bundle.cached_h.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let err = |e| CliError::output(path, e);
        let rows = u32::try_from(self.rows).map_err(|_| CliError::Config("cache has too many rows".into()))?;
        let cols = u32::try_from(self.cols).map_err(|_| CliError::Config("cache has too many columns".into()))?;
        let mut w = BufWriter::new(File::create(path).map_err(err)?);
        w.write_all(CACHE_MAGIC).map_err(err)?;
        for word in [CACHE_VERSION, rows, cols] {
            w.write_all(&word.to_le_bytes()).map_err(err)?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes()).map_err(err)?;
        }
        w.flush().map_err(err)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| CliError::io(path, e))?;
        let bad = |what: &str| CliError::Data(format!("{}: {what}", path.display()));
        if bytes.len() < 16 || &bytes[..4] != CACHE_MAGIC {
            return Err(bad("not a cache file"));
        }
        let word = |k: usize| u32::from_le_bytes(bytes[4 * k..4 * k + 4].try_into().unwrap());
        if word(1) != CACHE_VERSION {
            return Err(bad("unsupported cache version"));
        }
        let (rows, cols) = (word(2) as usize, word(3) as usize);
        let body = &bytes[16..];
        if body.len() != rows * cols * 8 {
            return Err(bad("truncated cache"));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Cache { rows, cols, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.bin");
        let c = Cache {
            rows: 2,
            cols: 3,
            values: vec![1.0, -0.0, f64::MIN_POSITIVE, 3.5, 1e300, -7.25],
        };
        c.write(&path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 16 + 48);
        let back = Cache::read(&path).unwrap();
        assert_eq!(back.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), c.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        std::fs::write(&path, b"IOUC\x01\0\0\0\x05\0\0\0\x01\0\0\0").unwrap();
        assert!(Cache::read(&path).is_err());
    }
}
