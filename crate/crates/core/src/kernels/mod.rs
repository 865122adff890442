//! Kernels `H: S^r × S' → R^d`.
//!
//! Built-in kernels:
//!
//! * [`KernelVariant::Mean`]: the linear kernel, coordinatewise tuple mean.
//! * [`KernelVariant::CoordMax`]: coordinatewise maximum over the tuple.
//! * [`KernelVariant::LogMean`]: `ln` of the coordinatewise tuple mean.
//! * [`KernelVariant::Kde`]: Gaussian product-kernel density of a tuple
//!   summary evaluated at `d` design points.
//! * [`KernelVariant::SubsampleTree`]: a randomized regression tree grown on
//!   the tuple and evaluated at `d` test points. This is the only random
//!   kernel; the tree-growing rule is one admissible CART-style choice.
//!
//! Rows are put into a canonical order before evaluation, so every kernel is
//! exactly symmetric in its arguments, floating-point rounding included.

mod tree;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use tree::{grow_tree, RegressionTree, TreeParams};

use crate::data::{DataMatrix, Row, TupleIndex};
use crate::error::{Error, Result};
use crate::math;
use crate::rng::{derive_stream, RngKey, Stream};

/// Tuple summary `τ` fed to the density kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TupleSummary {
    Mean,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelVariant {
    Mean,
    CoordMax,
    LogMean,
    Kde {
        /// One design point per row; width must equal the data width.
        design_points: DataMatrix,
        bandwidth: f64,
        statistic: TupleSummary,
    },
    SubsampleTree {
        /// One test point per row; width must equal the data width.
        test_points: DataMatrix,
        params: TreeParams,
    },
}

/// A kernel of order `r` on `p`-column observations.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    variant: KernelVariant,
    order: usize,
    input_dim: usize,
}

impl KernelSpec {
    pub fn new(variant: KernelVariant, order: usize, input_dim: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::param("r", "kernel order must be at least 1"));
        }
        if input_dim == 0 {
            return Err(Error::param("p", "observations need at least one column"));
        }
        match &variant {
            KernelVariant::Kde {
                design_points,
                bandwidth,
                ..
            } => {
                if !(bandwidth.is_finite() && *bandwidth > 0.0) {
                    return Err(Error::param("bandwidth", format!("must be positive, got {bandwidth}")));
                }
                if design_points.cols() != input_dim {
                    return Err(Error::param(
                        "design_points",
                        format!("have {} columns, data have {input_dim}", design_points.cols()),
                    ));
                }
            }
            KernelVariant::SubsampleTree { test_points, params } => {
                params.validate(input_dim)?;
                if test_points.cols() != input_dim {
                    return Err(Error::param(
                        "test_points",
                        format!("have {} columns, data have {input_dim}", test_points.cols()),
                    ));
                }
            }
            _ => {}
        }
        Ok(KernelSpec {
            variant,
            order,
            input_dim,
        })
    }

    pub fn mean(order: usize, input_dim: usize) -> Result<Self> {
        KernelSpec::new(KernelVariant::Mean, order, input_dim)
    }

    pub fn coord_max(order: usize, input_dim: usize) -> Result<Self> {
        KernelSpec::new(KernelVariant::CoordMax, order, input_dim)
    }

    pub fn log_mean(order: usize, input_dim: usize) -> Result<Self> {
        KernelSpec::new(KernelVariant::LogMean, order, input_dim)
    }

    pub fn variant(&self) -> &KernelVariant {
        &self.variant
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Same kernel with a different order.
    pub fn with_order(&self, order: usize) -> Result<Self> {
        KernelSpec::new(self.variant.clone(), order, self.input_dim)
    }

    /// Output dimension `d`.
    pub fn out_dim(&self) -> usize {
        match &self.variant {
            KernelVariant::Mean | KernelVariant::CoordMax | KernelVariant::LogMean => self.input_dim,
            KernelVariant::Kde { design_points, .. } => design_points.rows(),
            KernelVariant::SubsampleTree { test_points, .. } => test_points.rows(),
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self.variant, KernelVariant::SubsampleTree { .. })
    }

    pub fn needs_response(&self) -> bool {
        self.is_random()
    }

    /// Checks that `data` can be fed to this kernel.
    pub fn check_data(&self, data: &DataMatrix) -> Result<()> {
        if data.cols() != self.input_dim {
            return Err(Error::Input(format!(
                "kernel expects {} columns, data have {}",
                self.input_dim,
                data.cols()
            )));
        }
        if self.needs_response() && data.response().is_none() {
            return Err(Error::Input("regression kernel requires a response column".into()));
        }
        if self.order > data.rows() {
            return Err(Error::param(
                "r",
                format!("kernel order {} exceeds sample size {}", self.order, data.rows()),
            ));
        }
        Ok(())
    }

    /// Evaluates the kernel on `rows`. `noise` must be present exactly when
    /// the kernel is random.
    pub fn eval(&self, rows: &[Row<'_>], noise: Option<&mut Stream>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.out_dim()];
        self.eval_into(rows, noise, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, rows: &[Row<'_>], noise: Option<&mut Stream>, out: &mut [f64]) -> Result<()> {
        if rows.len() != self.order {
            return Err(Error::Input(format!(
                "kernel of order {} received {} rows",
                self.order,
                rows.len()
            )));
        }
        if out.len() != self.out_dim() {
            return Err(Error::Input(format!(
                "output buffer has length {}, expected {}",
                out.len(),
                self.out_dim()
            )));
        }
        for row in rows {
            if row.features.len() != self.input_dim {
                return Err(Error::Input(format!(
                    "row has {} features, expected {}",
                    row.features.len(),
                    self.input_dim
                )));
            }
            if row.features.iter().any(|v| v.is_nan()) || row.response.is_some_and(f64::is_nan) {
                return Err(Error::Input("NaN in kernel input".into()));
            }
        }
        if noise.is_some() != self.is_random() {
            return Err(Error::param(
                "noise",
                if self.is_random() {
                    "random kernel evaluated without a noise stream"
                } else {
                    "deterministic kernel given a noise stream"
                },
            ));
        }

        let mut sorted = rows.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let rows = &sorted[..];

        match &self.variant {
            KernelVariant::Mean => column_means(rows, out),
            KernelVariant::CoordMax => {
                out.copy_from_slice(rows[0].features);
                for row in &rows[1..] {
                    for (o, &v) in out.iter_mut().zip(row.features) {
                        if v > *o {
                            *o = v;
                        }
                    }
                }
            }
            KernelVariant::LogMean => {
                column_means(rows, out);
                for (j, o) in out.iter_mut().enumerate() {
                    if *o <= 0.0 {
                        return Err(Error::Domain(format!(
                            "log-mean kernel needs a positive mean, coordinate {j} has mean {o}"
                        )));
                    }
                    *o = math::ln(*o);
                }
            }
            KernelVariant::Kde {
                design_points,
                bandwidth,
                statistic,
            } => {
                let mut tau = vec![0.0; self.input_dim];
                match statistic {
                    TupleSummary::Mean => column_means(rows, &mut tau),
                    TupleSummary::Max => {
                        tau.copy_from_slice(rows[0].features);
                        for row in &rows[1..] {
                            for (t, &v) in tau.iter_mut().zip(row.features) {
                                *t = t.max(v);
                            }
                        }
                    }
                }
                let ell = self.input_dim as i32;
                let norm = math::powi(math::SQRT_2PI * bandwidth, ell);
                for (j, o) in out.iter_mut().enumerate() {
                    let t = design_points.row(j);
                    let q: f64 = t
                        .iter()
                        .zip(&tau)
                        .map(|(a, b)| {
                            let z = (a - b) / bandwidth;
                            z * z
                        })
                        .sum();
                    *o = math::exp(-0.5 * q) / norm;
                }
            }
            KernelVariant::SubsampleTree { test_points, params } => {
                let noise = noise.expect("checked above");
                let tree = grow_tree(rows, noise, *params)?;
                for (j, o) in out.iter_mut().enumerate() {
                    *o = tree.predict(test_points.row(j));
                }
            }
        }
        Ok(())
    }

    /// Evaluates on the rows of `data` named by `tuple`, drawing noise (for
    /// random kernels) from the stream keyed by `noise_key` re-indexed with
    /// the tuple's hash. Replaying the same tuple and key reproduces the
    /// output bitwise.
    pub fn eval_tuple(&self, data: &DataMatrix, tuple: &TupleIndex, noise_key: RngKey, out: &mut [f64]) -> Result<()> {
        let rows = data.tuple_rows(tuple);
        if self.is_random() {
            let mut stream = derive_stream(noise_key.with_index(tuple.hash128()));
            self.eval_into(&rows, Some(&mut stream), out)
        } else {
            self.eval_into(&rows, None, out)
        }
    }
}

fn column_means(rows: &[Row<'_>], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for row in rows {
        for (o, &v) in out.iter_mut().zip(row.features) {
            *o += v;
        }
    }
    let r = rows.len() as f64;
    out.iter_mut().for_each(|o| *o /= r);
}

/// Whether shifting every response by `beta` shifts every prediction of a
/// regression kernel by `beta`, to within `1e-9`. `noise` is cloned so both
/// evaluations see the same randomness.
pub fn shift_equivariance_check(spec: &KernelSpec, rows: &[Row<'_>], noise: &Stream, beta: f64) -> Result<bool> {
    if !spec.needs_response() {
        return Err(Error::param("kernel", "shift equivariance applies to regression kernels"));
    }
    let base = spec.eval(rows, Some(&mut noise.clone()))?;
    let shifted_rows: Vec<Row<'_>> = rows
        .iter()
        .map(|r| Row {
            features: r.features,
            response: r.response.map(|y| y + beta),
        })
        .collect();
    let shifted = spec.eval(&shifted_rows, Some(&mut noise.clone()))?;
    Ok(base
        .iter()
        .zip(&shifted)
        .all(|(a, b)| (a + beta - b).abs() <= 1e-9))
}
