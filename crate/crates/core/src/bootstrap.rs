//! Gaussian multiplier bootstraps and simultaneous confidence intervals.
//!
//! Two conditionally independent multiplier families are combined:
//!
//! * `U#_B = N̂^{-1/2} Σ_ι ξ′_ι (H_ι − U′)` over the sampled tuples, whose
//!   conditional covariance is the centered second moment of the cached
//!   kernel values;
//! * `U#_A = n₁^{-1/2} Σ_{i₁∈S₁} ξ_{i₁} (G_{i₁} − Ḡ)`, whose conditional
//!   covariance is the centered second moment of the Hájek estimates.
//!
//! The combined draw is `r·U#_A + √(n/N)·U#_B`. Intervals are
//! `U′_j ± q̂_{1−α} n^{-1/2} Λ̂_jj^{1/2}` with `q̂` the bootstrap quantile of
//! `max_j |U#_j| / Λ̂_jj^{1/2}`.
//!
//! Replicate `b` draws its multipliers sequentially from the streams keyed
//! by `(bootstrap_B, b)` and `(bootstrap_A, b)`, in design order and `S₁`
//! order respectively, so a replicate's value never depends on which worker
//! computes it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::combinatorics::draw_design;
use crate::data::{DataMatrix, Dimensions};
use crate::error::{Error, Result};
use crate::estimators::{hajek_dc, incomplete_u, AnchorSelection, EstimateBundle, HajekEstimates};
use crate::kernels::KernelSpec;
use crate::math;
use crate::par;
use crate::rng::{derive_stream, RngKey, StreamKind};

/// Diagonal entries below this are treated as zero variance.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    /// Number of bootstrap replicates `B`.
    pub b_reps: usize,
    pub alpha: f64,
    /// Size of the anchor subset `S₁`.
    pub n1: usize,
    pub anchors: AnchorSelection,
}

impl BootstrapConfig {
    pub fn new(b_reps: usize, alpha: f64, n1: usize) -> Result<Self> {
        let cfg = BootstrapConfig {
            b_reps,
            alpha,
            n1,
            anchors: AnchorSelection::Random,
        };
        cfg.validate(None)?;
        Ok(cfg)
    }

    pub fn validate(&self, n: Option<usize>) -> Result<()> {
        if self.b_reps == 0 {
            return Err(Error::param("bootstrap_reps", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n1 == 0 {
            return Err(Error::param("n1", "must be at least 1"));
        }
        if let Some(n) = n {
            if self.n1 > n {
                return Err(Error::param("n1", format!("{} exceeds n = {n}", self.n1)));
            }
        }
        Ok(())
    }
}

/// `σ̂²_g`, `σ̂²_H` and `Λ̂_jj = r² σ̂²_{g,j} + α_n σ̂²_{H,j}` with `α_n = n/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceDiagonals {
    pub sigma_g_hat_sq: Vec<f64>,
    pub sigma_h_hat_sq: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub alpha_n: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SciResult {
    /// Interval centers `U′`.
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub q_hat: f64,
    pub alpha: f64,
    /// Bootstrap sup-statistics in replicate order.
    pub sup_stats: Vec<f64>,
    pub diagonals: VarianceDiagonals,
    /// Sample size the half-widths are scaled by.
    pub n: usize,
}

impl SciResult {
    /// `‖√n Λ̂^{-1/2} (U′ − θ)‖_∞`.
    pub fn normalized_deviation(&self, theta: &[f64]) -> f64 {
        let rn = math::sqrt(self.n as f64);
        self.center
            .iter()
            .zip(theta)
            .zip(&self.diagonals.lambda_hat)
            .map(|((u, t), l)| rn * (u - t).abs() / math::sqrt(*l))
            .fold(0.0, f64::max)
    }

    pub fn covers(&self, theta: &[f64]) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(theta)
            .all(|((lo, hi), t)| lo <= t && t <= hi)
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }
}

/// One draw of `U#_B` for replicate `rep`.
pub fn draw_b(bundle: &EstimateBundle, rep: u64, key: RngKey) -> Vec<f64> {
    let d = bundle.dims.d;
    let mut out = vec![0.0; d];
    let mut stream = derive_stream(key.with_kind(StreamKind::BootstrapB).with_index(rep as u128));
    for row in bundle.cached_h.chunks_exact(d) {
        let xi = stream.normal();
        for ((o, h), u) in out.iter_mut().zip(row).zip(&bundle.u_prime) {
            *o += xi * (h - u);
        }
    }
    let scale = 1.0 / math::sqrt(bundle.n_hat() as f64);
    out.iter_mut().for_each(|o| *o *= scale);
    out
}

/// One draw of `U#_A` for replicate `rep`.
pub fn draw_a(hajek: &HajekEstimates, rep: u64, key: RngKey) -> Vec<f64> {
    let d = hajek.d;
    let mut out = vec![0.0; d];
    let mut stream = derive_stream(key.with_kind(StreamKind::BootstrapA).with_index(rep as u128));
    for row in hajek.g_matrix.chunks_exact(d) {
        let xi = stream.normal();
        for ((o, g), m) in out.iter_mut().zip(row).zip(&hajek.g_bar) {
            *o += xi * (g - m);
        }
    }
    let scale = 1.0 / math::sqrt(hajek.n1() as f64);
    out.iter_mut().for_each(|o| *o *= scale);
    out
}

/// `r · U#_A + √α_n · U#_B` with `α_n = n / N`.
pub fn draw_combined(bundle: &EstimateBundle, hajek: &HajekEstimates, rep: u64, key: RngKey) -> Vec<f64> {
    let r = bundle.dims.r as f64;
    let root_alpha = math::sqrt(alpha_n(bundle));
    let a = draw_a(hajek, rep, key);
    let b = draw_b(bundle, rep, key);
    a.iter().zip(&b).map(|(a, b)| r * a + root_alpha * b).collect()
}

fn alpha_n(bundle: &EstimateBundle) -> f64 {
    bundle.dims.n as f64 / bundle.design.budget() as f64
}

pub fn variance_diagonals(bundle: &EstimateBundle, hajek: &HajekEstimates) -> Result<VarianceDiagonals> {
    let d = bundle.dims.d;
    if hajek.d != d {
        return Err(Error::param("hajek", format!("has dimension {}, bundle has {d}", hajek.d)));
    }
    let mut sigma_h = vec![0.0; d];
    for row in bundle.cached_h.chunks_exact(d) {
        for ((s, h), u) in sigma_h.iter_mut().zip(row).zip(&bundle.u_prime) {
            *s += (h - u) * (h - u);
        }
    }
    sigma_h.iter_mut().for_each(|s| *s /= bundle.n_hat() as f64);

    let mut sigma_g = vec![0.0; d];
    for row in hajek.g_matrix.chunks_exact(d) {
        for ((s, g), m) in sigma_g.iter_mut().zip(row).zip(&hajek.g_bar) {
            *s += (g - m) * (g - m);
        }
    }
    sigma_g.iter_mut().for_each(|s| *s /= hajek.n1() as f64);

    let r = bundle.dims.r as f64;
    let a = alpha_n(bundle);
    let lambda: Vec<f64> = sigma_g.iter().zip(&sigma_h).map(|(g, h)| r * r * g + a * h).collect();
    if let Some((j, &v)) = lambda.iter().enumerate().find(|(_, v)| v.is_nan() || **v < VARIANCE_FLOOR) {
        return Err(Error::DegenerateVariance { coordinate: j, value: v });
    }
    Ok(VarianceDiagonals {
        sigma_g_hat_sq: sigma_g,
        sigma_h_hat_sq: sigma_h,
        lambda_hat: lambda,
        alpha_n: a,
    })
}

/// `max_j |draw_j| / Λ̂_jj^{1/2}`.
pub fn sup_stat(draw: &[f64], diagonals: &VarianceDiagonals) -> f64 {
    draw.iter()
        .zip(&diagonals.lambda_hat)
        .map(|(x, l)| x.abs() / math::sqrt(*l))
        .fold(0.0, f64::max)
}

/// The `⌈(1−α)B⌉`-th order statistic (1-indexed) of `stats`.
///
/// The rank is computed with a `1e-9` slack so that products such as
/// `0.6 · 5` that land a rounding error above an integer are not bumped to
/// the next order statistic.
pub fn quantile(stats: &[f64], alpha: f64) -> Result<f64> {
    if stats.is_empty() {
        return Err(Error::param("stats", "need at least one bootstrap statistic"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    let b = stats.len();
    let rank = math::ceil((1.0 - alpha) * b as f64 - 1e-9) as usize;
    let rank = rank.clamp(1, b);
    let mut sorted = stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[rank - 1])
}

pub fn simultaneous_ci(
    bundle: &EstimateBundle,
    diagonals: VarianceDiagonals,
    q_hat: f64,
    alpha: f64,
    sup_stats: Vec<f64>,
) -> Result<SciResult> {
    if q_hat.is_nan() || q_hat < 0.0 {
        return Err(Error::param("q_hat", format!("must be non-negative, got {q_hat}")));
    }
    let n = bundle.dims.n;
    let scale = q_hat / math::sqrt(n as f64);
    let half: Vec<f64> = diagonals.lambda_hat.iter().map(|l| scale * math::sqrt(*l)).collect();
    let lower = bundle.u_prime.iter().zip(&half).map(|(u, h)| u - h).collect();
    let upper = bundle.u_prime.iter().zip(&half).map(|(u, h)| u + h).collect();
    Ok(SciResult {
        center: bundle.u_prime.clone(),
        lower,
        upper,
        q_hat,
        alpha,
        sup_stats,
        diagonals,
        n,
    })
}

/// Sup-statistics of `b_reps` combined draws, in replicate order.
pub fn bootstrap_sup_stats(
    bundle: &EstimateBundle,
    hajek: &HajekEstimates,
    diagonals: &VarianceDiagonals,
    b_reps: usize,
    key: RngKey,
) -> Vec<f64> {
    par::map_range(b_reps, |b| sup_stat(&draw_combined(bundle, hajek, b as u64, key), diagonals))
}

/// Raw combined draws, `b_reps × d` row-major. Only for callers that need the
/// full vectors; the interval pipeline keeps sup-statistics alone.
pub fn bootstrap_draws(bundle: &EstimateBundle, hajek: &HajekEstimates, b_reps: usize, key: RngKey) -> Vec<f64> {
    par::map_range(b_reps, |b| draw_combined(bundle, hajek, b as u64, key)).concat()
}

/// Everything produced by one run of the interval pipeline.
#[derive(Debug, Clone)]
pub struct SciRun {
    pub bundle: EstimateBundle,
    pub hajek: HajekEstimates,
    pub sci: SciResult,
}

/// Design → `U′` → Hájek estimates → bootstrap → `Λ̂` → `q̂` → intervals.
///
/// Every stream is derived from `master_seed`, so the output is a pure
/// function of the inputs.
pub fn run_sci(
    data: &DataMatrix,
    spec: &KernelSpec,
    budget: u64,
    config: &BootstrapConfig,
    master_seed: u64,
) -> Result<SciRun> {
    config.validate(Some(data.rows()))?;
    spec.check_data(data)?;
    let dims = Dimensions::new(data.rows(), spec.order(), spec.out_dim())?;
    let design = draw_design(dims, budget, RngKey::new(master_seed, StreamKind::Design, 0))?;
    let key = RngKey::new(master_seed, StreamKind::KernelNoise, 0);
    let bundle = incomplete_u(data, spec, &design, key)?;
    let hajek = hajek_dc(data, spec, config.n1, key, config.anchors)?;
    let diagonals = variance_diagonals(&bundle, &hajek)?;
    let stats = bootstrap_sup_stats(&bundle, &hajek, &diagonals, config.b_reps, key);
    let q_hat = quantile(&stats, config.alpha)?;
    let sci = simultaneous_ci(&bundle, diagonals, q_hat, config.alpha, stats)?;
    Ok(SciRun { bundle, hajek, sci })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::TupleDesign;
    use crate::data::TupleIndex;

    fn bundle_from(values: Vec<f64>, d: usize, n: usize, r: usize, budget: u64) -> EstimateBundle {
        let m = values.len() / d;
        let tuples = (0..m)
            .map(|k| TupleIndex::from_sorted((0..r).map(|i| k * r + i).collect()).unwrap())
            .collect();
        let design = TupleDesign::from_parts(n, r, budget, tuples, RngKey::new(0, StreamKind::Design, 0)).unwrap();
        let mut u = vec![0.0; d];
        for row in values.chunks_exact(d) {
            for (a, v) in u.iter_mut().zip(row) {
                *a += v / m as f64;
            }
        }
        EstimateBundle {
            u_prime: u,
            cached_h: values,
            design,
            dims: Dimensions::new(n, r, d).unwrap(),
        }
    }

    fn hajek_from(g: Vec<f64>, d: usize) -> HajekEstimates {
        let n1 = g.len() / d;
        let mut bar = vec![0.0; d];
        for row in g.chunks_exact(d) {
            for (a, v) in bar.iter_mut().zip(row) {
                *a += v / n1 as f64;
            }
        }
        HajekEstimates {
            s1: (0..n1).collect(),
            g_matrix: g,
            g_bar: bar,
            k_blocks: 1,
            d,
        }
    }

    const KEY: RngKey = RngKey {
        master_seed: 5,
        kind: StreamKind::KernelNoise,
        index: 0,
    };

    #[test]
    fn single_tuple_draw_b_is_zero() {
        let b = bundle_from(vec![3.0, -1.0], 2, 10, 2, 1);
        assert_eq!(draw_b(&b, 0, KEY), vec![0.0, 0.0]);
    }

    #[test]
    fn identical_rows_draw_zero() {
        let b = bundle_from(vec![1.5; 12], 3, 20, 2, 4);
        for rep in 0..5 {
            assert!(draw_b(&b, rep, KEY).iter().all(|&x| x == 0.0));
        }
        let h = hajek_from(vec![2.0; 9], 3);
        assert!(draw_a(&h, 0, KEY).iter().all(|&x| x == 0.0));
        assert!(draw_combined(&b, &h, 0, KEY).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_anchor_draw_a_is_zero() {
        let h = hajek_from(vec![4.0, 2.0], 2);
        assert_eq!(draw_a(&h, 3, KEY), vec![0.0, 0.0]);
    }

    #[test]
    fn combined_with_r1_and_n_equal_budget_is_plain_sum() {
        let b = bundle_from(vec![1.0, 4.0, 2.0, 7.0], 1, 4, 1, 4);
        let h = hajek_from(vec![1.0, 4.0, 2.0, 7.0], 1);
        let c = draw_combined(&b, &h, 9, KEY);
        let expected = draw_a(&h, 9, KEY)[0] + draw_b(&b, 9, KEY)[0];
        assert_eq!(c[0], expected);
    }

    #[test]
    fn two_point_sigma_h() {
        let (a, bv) = (1.0, 4.0);
        let bundle = bundle_from(vec![a, bv], 1, 10, 2, 10);
        let h = hajek_from(vec![0.0, 1.0], 1);
        let v = variance_diagonals(&bundle, &h).unwrap();
        assert_eq!(v.sigma_h_hat_sq[0], (a - bv) * (a - bv) / 4.0);
        assert_eq!(v.sigma_g_hat_sq[0], 0.25);
        assert_eq!(v.alpha_n, 1.0);
        assert!((v.lambda_hat[0] - (4.0 * 0.25 + 2.25)).abs() < 1e-12);
    }

    #[test]
    fn constant_output_is_degenerate() {
        let bundle = bundle_from(vec![1.0, 3.0, 1.0, 3.0], 2, 10, 2, 10);
        let h = hajek_from(vec![1.0, 5.0, 1.0, 6.0], 2);
        let err = variance_diagonals(&bundle, &h).unwrap_err();
        assert_eq!(err, Error::DegenerateVariance { coordinate: 0, value: 0.0 });
    }

    fn unit_diagonals(d: usize, scale: f64) -> VarianceDiagonals {
        VarianceDiagonals {
            sigma_g_hat_sq: vec![0.0; d],
            sigma_h_hat_sq: vec![0.0; d],
            lambda_hat: vec![scale; d],
            alpha_n: 1.0,
        }
    }

    #[test]
    fn sup_stat_cases() {
        let unit = unit_diagonals(2, 1.0);
        assert_eq!(sup_stat(&[0.0, 0.0], &unit), 0.0);
        assert_eq!(sup_stat(&[3.0, -5.0], &unit), 5.0);
        let scaled = unit_diagonals(2, 4.0);
        assert_eq!(sup_stat(&[3.0, -5.0], &scaled), 2.5);
    }

    #[test]
    fn quantile_order_statistic() {
        assert_eq!(quantile(&[5.0, 1.0, 4.0, 2.0, 3.0], 0.4).unwrap(), 3.0);
        assert_eq!(quantile(&[5.0, 1.0, 4.0, 2.0, 3.0], 1e-12).unwrap(), 5.0);
        assert_eq!(quantile(&[5.0, 1.0, 4.0, 2.0, 3.0], 0.999).unwrap(), 1.0);
        assert!(quantile(&[], 0.1).is_err());
        assert!(quantile(&[1.0], 1.0).is_err());
    }

    #[test]
    fn interval_arithmetic() {
        let bundle = bundle_from(vec![2.0], 1, 100, 2, 10);
        let sci = simultaneous_ci(&bundle, unit_diagonals(1, 4.0), 1.96, 0.05, vec![]).unwrap();
        assert!((sci.lower[0] - (2.0 - 0.392)).abs() < 1e-15);
        assert!((sci.upper[0] - (2.0 + 0.392)).abs() < 1e-15);
        let zero = simultaneous_ci(&bundle, unit_diagonals(1, 4.0), 0.0, 0.05, vec![]).unwrap();
        assert_eq!(zero.lower, vec![2.0]);
        assert_eq!(zero.upper, vec![2.0]);
        assert!(simultaneous_ci(&bundle, unit_diagonals(1, 4.0), -1.0, 0.05, vec![]).is_err());
    }

    #[test]
    fn widths_scale_with_root_n() {
        let small = bundle_from(vec![2.0], 1, 100, 2, 10);
        let large = bundle_from(vec![2.0], 1, 400, 2, 10);
        let w1 = simultaneous_ci(&small, unit_diagonals(1, 4.0), 2.0, 0.1, vec![]).unwrap().widths();
        let w2 = simultaneous_ci(&large, unit_diagonals(1, 4.0), 2.0, 0.1, vec![]).unwrap().widths();
        assert!((w1[0] / w2[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(BootstrapConfig::new(0, 0.1, 5).is_err());
        assert!(BootstrapConfig::new(10, 0.0, 5).is_err());
        assert!(BootstrapConfig::new(10, 1.0, 5).is_err());
        assert!(BootstrapConfig::new(10, 0.1, 0).is_err());
        let cfg = BootstrapConfig::new(10, 0.1, 5).unwrap();
        assert!(cfg.validate(Some(4)).is_err());
    }
}
