//! Monte Carlo and exact oracles: non-degeneracy `r²σ²_g`, the Hoeffding
//! decomposition, simultaneous coverage, and bootstrap calibration.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::bootstrap::{run_sci, BootstrapConfig};
use crate::data::{DataMatrix, Dimensions, Row};
use crate::error::{Error, Result};
use crate::estimators::{complete_u, exact_moments_discrete, validate_discrete};
use crate::kernels::{KernelSpec, KernelVariant};
use crate::math::{self, NeumaierSum};
use crate::par;
use crate::rng::{derive_stream, RngKey, Stream, StreamKind};

/// Regression function `κ` of the simulated regression model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFn {
    Zero,
    /// Sum of the features.
    Linear,
    /// `sin(2π y₀)` of the first feature.
    Sine,
}

impl SignalFn {
    pub fn apply(self, y: &[f64]) -> f64 {
        match self {
            SignalFn::Zero => 0.0,
            SignalFn::Linear => y.iter().sum(),
            SignalFn::Sine => libm::sin(2.0 * core::f64::consts::PI * y[0]),
        }
    }
}

/// Data-generating law for simulations.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    GaussianIid { mean: f64, sd: f64, p: usize },
    UniformIid { lo: f64, hi: f64, p: usize },
    /// Scalar law on finitely many points.
    Discrete { support: Vec<f64>, probs: Vec<f64> },
    /// `Z = κ(Y) + ε` with `Y` from `features` and `ε ~ N(0, noise_sd²)`.
    RegressionModel {
        features: Box<DistributionSpec>,
        signal: SignalFn,
        noise_sd: f64,
    },
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::GaussianIid { mean, sd, p } => {
                if !(sd.is_finite() && *sd > 0.0) || !mean.is_finite() {
                    return Err(Error::param("sd", format!("must be positive and finite, got {sd}")));
                }
                if *p == 0 {
                    return Err(Error::param("p", "must be at least 1"));
                }
            }
            DistributionSpec::UniformIid { lo, hi, p } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::param("lo/hi", format!("need lo < hi, got [{lo}, {hi}]")));
                }
                if *p == 0 {
                    return Err(Error::param("p", "must be at least 1"));
                }
            }
            DistributionSpec::Discrete { support, probs } => validate_discrete(support, probs)?,
            DistributionSpec::RegressionModel { features, noise_sd, .. } => {
                if matches!(**features, DistributionSpec::RegressionModel { .. }) {
                    return Err(Error::param("features", "feature law cannot itself be a regression model"));
                }
                features.validate()?;
                if !(noise_sd.is_finite() && *noise_sd > 0.0) {
                    return Err(Error::param("noise_sd", format!("must be positive, got {noise_sd}")));
                }
            }
        }
        Ok(())
    }

    /// Number of feature columns.
    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::GaussianIid { p, .. } | DistributionSpec::UniformIid { p, .. } => *p,
            DistributionSpec::Discrete { .. } => 1,
            DistributionSpec::RegressionModel { features, .. } => features.dim(),
        }
    }

    pub fn has_response(&self) -> bool {
        matches!(self, DistributionSpec::RegressionModel { .. })
    }

    /// Draws one observation into `out`; returns the response if any.
    pub fn sample_row(&self, stream: &mut Stream, out: &mut [f64]) -> Option<f64> {
        match self {
            DistributionSpec::GaussianIid { mean, sd, .. } => {
                out.iter_mut().for_each(|o| *o = mean + sd * stream.normal());
                None
            }
            DistributionSpec::UniformIid { lo, hi, .. } => {
                out.iter_mut().for_each(|o| *o = lo + (hi - lo) * stream.uniform());
                None
            }
            DistributionSpec::Discrete { support, probs } => {
                let u = stream.uniform();
                let mut acc = 0.0;
                let mut pick = support.len() - 1;
                for (k, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = k;
                        break;
                    }
                }
                out[0] = support[pick];
                None
            }
            DistributionSpec::RegressionModel {
                features,
                signal,
                noise_sd,
            } => {
                features.sample_row(stream, out);
                Some(signal.apply(out) + noise_sd * stream.normal())
            }
        }
    }

    /// An i.i.d. sample of size `n`.
    pub fn sample(&self, n: usize, stream: &mut Stream) -> Result<DataMatrix> {
        self.validate()?;
        let p = self.dim();
        let mut values = vec![0.0; n * p];
        let mut response = Vec::new();
        for row in values.chunks_exact_mut(p) {
            if let Some(z) = self.sample_row(stream, row) {
                response.push(z);
            }
        }
        let data = DataMatrix::new(n, p, values)?;
        if self.has_response() {
            data.with_response(response)
        } else {
            Ok(data)
        }
    }

    /// Coordinatewise mean of the features, when available in closed form.
    pub fn mean_vector(&self) -> Vec<f64> {
        match self {
            DistributionSpec::GaussianIid { mean, p, .. } => vec![*mean; *p],
            DistributionSpec::UniformIid { lo, hi, p } => vec![0.5 * (lo + hi); *p],
            DistributionSpec::Discrete { support, probs } => {
                vec![support.iter().zip(probs).map(|(x, p)| x * p).sum()]
            }
            DistributionSpec::RegressionModel { features, .. } => features.mean_vector(),
        }
    }
}

/// `E[max of r i.i.d. N(0, 1)]` by composite Simpson quadrature of
/// `∫ x · r φ(x) Φ(x)^{r−1} dx` over `[−12, 12]`.
pub fn expected_max_std_normal(r: usize) -> f64 {
    let rf = r as f64;
    math::simpson(
        |x| x * rf * math::normal_pdf(x) * libm::pow(math::normal_cdf(x), rf - 1.0),
        -12.0,
        12.0,
        48_000,
    )
}

/// True `θ` for a built-in deterministic kernel under `dist`, when it has a
/// closed form or a one-dimensional quadrature.
pub fn theta_true(dist: &DistributionSpec, spec: &KernelSpec) -> Option<Vec<f64>> {
    let r = spec.order();
    match (spec.variant(), dist) {
        (KernelVariant::Mean, d) if !d.has_response() => Some(d.mean_vector()),
        (KernelVariant::CoordMax, DistributionSpec::GaussianIid { mean, sd, p }) => {
            Some(vec![mean + sd * expected_max_std_normal(r); *p])
        }
        (KernelVariant::CoordMax, DistributionSpec::UniformIid { lo, hi, p }) => {
            Some(vec![lo + (hi - lo) * r as f64 / (r as f64 + 1.0); *p])
        }
        (_, DistributionSpec::Discrete { support, probs }) if !spec.is_random() => {
            exact_moments_discrete(support, probs, spec).ok().map(|m| m.theta)
        }
        _ => None,
    }
}

/// Nested Monte Carlo estimate of `σ²_{g,j}` with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaGEstimate {
    pub estimate: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// Nested Monte Carlo estimate of `σ²_g = Var(g(X₁))`.
///
/// For each of `outer` draws `x` of `X₁`, `g(x)` is estimated twice from two
/// independent halves of `inner` draws of `(X₂, …, X_r)` (and of the kernel
/// noise). The two half-estimates are conditionally independent given `x`,
/// so their sample cross-covariance over the outer draws is unbiased for
/// `Var(g(X₁))`, free of the inner-noise inflation of the naive estimator.
pub fn mc_sigma_g(
    dist: &DistributionSpec,
    spec: &KernelSpec,
    outer: usize,
    inner: usize,
    key: RngKey,
) -> Result<SigmaGEstimate> {
    dist.validate()?;
    if outer < 2 || inner < 2 {
        return Err(Error::param("outer/inner", "both must be at least 2"));
    }
    let p = dist.dim();
    if p != spec.input_dim() {
        return Err(Error::param("kernel", format!("expects {} columns, law has {p}", spec.input_dim())));
    }
    if spec.needs_response() && !dist.has_response() {
        return Err(Error::param("dist", "regression kernel needs a regression model"));
    }
    let r = spec.order();
    let d = spec.out_dim();
    let half = inner / 2;
    let key = key.with_kind(StreamKind::Simulation);

    let halves = par::try_map_range(outer, |o| {
        let mut data_stream = derive_stream(key.with_index(((1u128) << 64) | o as u128));
        let mut noise = derive_stream(key.with_index(((2u128) << 64) | o as u128));
        let mut buf = vec![0.0; r * p];
        let mut resp = vec![None; r];
        resp[0] = dist.sample_row(&mut data_stream, &mut buf[..p]);
        let mut h = vec![0.0; d];
        let mut g = [vec![0.0; d], vec![0.0; d]];
        for gh in g.iter_mut() {
            for _ in 0..half {
                for i in 1..r {
                    resp[i] = dist.sample_row(&mut data_stream, &mut buf[i * p..(i + 1) * p]);
                }
                let rows: Vec<Row<'_>> = (0..r)
                    .map(|i| Row {
                        features: &buf[i * p..(i + 1) * p],
                        response: resp[i],
                    })
                    .collect();
                let n = if spec.is_random() { Some(&mut noise) } else { None };
                spec.eval_into(&rows, n, &mut h)?;
                for (a, v) in gh.iter_mut().zip(&h) {
                    *a += v;
                }
            }
            gh.iter_mut().for_each(|a| *a /= half as f64);
        }
        Ok(g)
    })?;

    let mut estimate = vec![0.0; d];
    let mut std_error = vec![0.0; d];
    let of = outer as f64;
    for j in 0..d {
        let m1 = halves.iter().map(|g| g[0][j]).sum::<f64>() / of;
        let m2 = halves.iter().map(|g| g[1][j]).sum::<f64>() / of;
        let prods: Vec<f64> = halves.iter().map(|g| (g[0][j] - m1) * (g[1][j] - m2)).collect();
        let cov = prods.iter().sum::<f64>() / (of - 1.0);
        let mean_prod = prods.iter().sum::<f64>() / of;
        let var_prod = prods.iter().map(|c| (c - mean_prod) * (c - mean_prod)).sum::<f64>() / (of - 1.0);
        estimate[j] = cov;
        std_error[j] = math::sqrt(var_prod / of);
    }
    Ok(SigmaGEstimate { estimate, std_error })
}

/// Terms of the order-2 Hoeffding decomposition on one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HoeffdingReport {
    pub u_n: Vec<f64>,
    pub theta: Vec<f64>,
    /// `(r/n) Σ (g(X_i) − θ)`.
    pub hajek: Vec<f64>,
    /// `C(n,2)^{-1} Σ_{i<j} π₂h(X_i, X_j)`.
    pub remainder: Vec<f64>,
    /// `max_j |U_n − θ − hajek − remainder|`.
    pub residual: f64,
}

/// Checks `U_n − θ = (2/n) Σ_i (g(X_i) − θ) + C(n,2)^{-1} Σ_{i<j} π₂h(X_i, X_j)`
/// with `π₂h(x, y) = h(x, y) − g(x) − g(y) + θ`, computing `θ` and `g`
/// exactly by enumeration over the support.
pub fn hoeffding_check(support: &[f64], probs: &[f64], spec: &KernelSpec, data: &DataMatrix) -> Result<HoeffdingReport> {
    if spec.order() != 2 {
        return Err(Error::param("r", "the decomposition check is for order-2 kernels"));
    }
    if data.cols() != 1 {
        return Err(Error::Input("the decomposition check needs scalar observations".into()));
    }
    let moments = exact_moments_discrete(support, probs, spec)?;
    let n = data.rows();
    let d = spec.out_dim();
    let dims = Dimensions::new(n, 2, d)?;
    let pairs = crate::combinatorics::exact_binomial(n as u64, 2).unwrap_or(u128::MAX);
    let u_n = complete_u(data, spec, dims, RngKey::new(0, StreamKind::KernelNoise, 0), pairs.min(u64::MAX as u128) as u64)?;

    let mut g_of = Vec::with_capacity(n);
    for i in 0..n {
        let x = data.row(i)[0];
        let k = support
            .iter()
            .position(|&s| s == x)
            .ok_or_else(|| Error::Input(format!("observation {x} at row {i} is not a support point")))?;
        g_of.push(&moments.g_table[k]);
    }
    let theta = &moments.theta;

    let mut hajek = vec![0.0; d];
    for j in 0..d {
        let mut acc = NeumaierSum::default();
        for g in &g_of {
            acc.add(g[j] - theta[j]);
        }
        hajek[j] = 2.0 * acc.value() / n as f64;
    }

    let mut remainder_acc = vec![NeumaierSum::default(); d];
    let mut h = vec![0.0; d];
    for a in 0..n {
        for b in a + 1..n {
            let rows = [data.kernel_row(a), data.kernel_row(b)];
            spec.eval_into(&rows, None, &mut h)?;
            for j in 0..d {
                remainder_acc[j].add(h[j] - g_of[a][j] - g_of[b][j] + theta[j]);
            }
        }
    }
    let m = (n * (n - 1) / 2) as f64;
    let remainder: Vec<f64> = remainder_acc.iter().map(|a| a.value() / m).collect();
    let residual = (0..d)
        .map(|j| (u_n[j] - theta[j] - hajek[j] - remainder[j]).abs())
        .fold(0.0, f64::max);
    Ok(HoeffdingReport {
        u_n,
        theta: theta.clone(),
        hajek,
        remainder,
        residual,
    })
}

/// Outcome of one simulated replicate of the interval pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub rep: usize,
    pub covered: bool,
    /// The replicate hit a zero variance diagonal; it counts as a miss.
    pub degenerate: bool,
    /// `‖√n Λ̂^{-1/2}(U′ − θ)‖_∞`, `NaN` for degenerate replicates.
    pub sup_deviation: f64,
    pub q_hat: f64,
    /// Fraction of bootstrap sup-statistics strictly above `sup_deviation`.
    pub p_value: f64,
    pub widths: Vec<f64>,
}

/// Settings shared by coverage and calibration studies.
#[derive(Debug, Clone)]
pub struct StudyConfig<'a> {
    pub dist: &'a DistributionSpec,
    pub spec: &'a KernelSpec,
    pub n: usize,
    pub budget: u64,
    pub bootstrap: BootstrapConfig,
    pub theta_true: &'a [f64],
    pub reps: usize,
}

/// Runs the interval pipeline on `reps` independent data sets.
///
/// Replicate `k` draws its data from the simulation stream `(3, k)` and
/// seeds its pipeline with the first word of stream `(4, k)`.
pub fn run_replicates(study: &StudyConfig<'_>, key: RngKey) -> Result<Vec<ReplicateRecord>> {
    study.dist.validate()?;
    if study.reps == 0 {
        return Err(Error::param("reps", "must be at least 1"));
    }
    if study.theta_true.len() != study.spec.out_dim() {
        return Err(Error::param(
            "theta_true",
            format!("has length {}, kernel output has {}", study.theta_true.len(), study.spec.out_dim()),
        ));
    }
    let key = key.with_kind(StreamKind::Simulation);
    par::try_map_range(study.reps, |rep| {
        let mut data_stream = derive_stream(key.with_index((3u128 << 64) | rep as u128));
        let data = study.dist.sample(study.n, &mut data_stream)?;
        let seed = rand_core::RngCore::next_u64(&mut derive_stream(key.with_index((4u128 << 64) | rep as u128)));
        match run_sci(&data, study.spec, study.budget, &study.bootstrap, seed) {
            Ok(run) => {
                let sci = run.sci;
                let dev = sci.normalized_deviation(study.theta_true);
                let above = sci.sup_stats.iter().filter(|&&s| s > dev).count();
                Ok(ReplicateRecord {
                    rep,
                    covered: sci.covers(study.theta_true),
                    degenerate: false,
                    sup_deviation: dev,
                    q_hat: sci.q_hat,
                    p_value: above as f64 / sci.sup_stats.len() as f64,
                    widths: sci.widths(),
                })
            }
            Err(Error::DegenerateVariance { .. }) => Ok(ReplicateRecord {
                rep,
                covered: false,
                degenerate: true,
                sup_deviation: f64::NAN,
                q_hat: f64::NAN,
                p_value: f64::NAN,
                widths: vec![f64::NAN; study.spec.out_dim()],
            }),
            Err(e) => Err(e),
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub reps: usize,
    pub nominal: f64,
    pub hits: usize,
    pub degenerate: usize,
    pub empirical_coverage: f64,
    /// Mean interval width per coordinate over non-degenerate replicates.
    pub avg_width: Vec<f64>,
    /// 95% Wilson score interval for the coverage proportion.
    pub wilson_interval: (f64, f64),
}

impl CoverageReport {
    pub fn from_records(records: &[ReplicateRecord], alpha: f64) -> Self {
        let reps = records.len();
        let hits = records.iter().filter(|r| r.covered).count();
        let degenerate = records.iter().filter(|r| r.degenerate).count();
        let d = records.first().map_or(0, |r| r.widths.len());
        let ok: Vec<&ReplicateRecord> = records.iter().filter(|r| !r.degenerate).collect();
        let avg_width = (0..d)
            .map(|j| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| r.widths[j]).sum::<f64>() / ok.len() as f64
                }
            })
            .collect();
        CoverageReport {
            reps,
            nominal: 1.0 - alpha,
            hits,
            degenerate,
            empirical_coverage: hits as f64 / reps as f64,
            avg_width,
            wilson_interval: wilson_interval(hits, reps, 1.959_963_984_540_054),
        }
    }
}

/// Wilson score interval for `hits` successes out of `trials`.
pub fn wilson_interval(hits: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let m = trials as f64;
    let phat = hits as f64 / m;
    let z2 = z * z;
    let denom = 1.0 + z2 / m;
    let center = (phat + z2 / (2.0 * m)) / denom;
    let half = z * math::sqrt(phat * (1.0 - phat) / m + z2 / (4.0 * m * m)) / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub reps: usize,
    /// p-values of the non-degenerate replicates, in replicate order.
    pub p_values: Vec<f64>,
    /// Kolmogorov–Smirnov distance of the p-values from Uniform(0, 1).
    pub ks_distance: f64,
    /// Asymptotic 1% critical value `1.63 / √m`.
    pub ks_critical_1pct: f64,
}

impl CalibrationReport {
    pub fn from_records(records: &[ReplicateRecord]) -> Self {
        let p_values: Vec<f64> = records.iter().filter(|r| !r.degenerate).map(|r| r.p_value).collect();
        let m = p_values.len();
        CalibrationReport {
            reps: records.len(),
            ks_distance: ks_uniform(&p_values),
            ks_critical_1pct: if m == 0 { f64::NAN } else { 1.63 / math::sqrt(m as f64) },
            p_values,
        }
    }
}

/// `sup_t |F_m(t) − t|` for the empirical distribution of `values`.
pub fn ks_uniform(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let above = (i + 1) as f64 / m - x;
            let below = x - i as f64 / m;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Simultaneous coverage of the bootstrap intervals over `study.reps`
/// simulated data sets.
pub fn coverage_experiment(study: &StudyConfig<'_>, key: RngKey) -> Result<(CoverageReport, Vec<ReplicateRecord>)> {
    let records = run_replicates(study, key)?;
    Ok((CoverageReport::from_records(&records, study.bootstrap.alpha), records))
}

/// Uniformity of bootstrap p-values of the observed sup-statistic.
pub fn bootstrap_calibration(study: &StudyConfig<'_>, key: RngKey) -> Result<(CalibrationReport, Vec<ReplicateRecord>)> {
    let records = run_replicates(study, key)?;
    Ok((CalibrationReport::from_records(&records), records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_max_small_orders() {
        assert!(expected_max_std_normal(1).abs() < 1e-13);
        // E[max(Z1, Z2)] = 1/√π.
        let two = 1.0 / libm::sqrt(core::f64::consts::PI);
        assert!((expected_max_std_normal(2) - two).abs() < 1e-12);
        // E[max of 3] = 3 / (2√π).
        assert!((expected_max_std_normal(3) - 1.5 * two).abs() < 1e-12);
    }

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson_interval(180, 200, 1.96);
        assert!(lo < 0.9 && 0.9 < hi);
        let (lo, hi) = wilson_interval(0, 1, 1.96);
        assert!(lo == 0.0 && hi > 0.0);
        let (lo, hi) = wilson_interval(1, 1, 1.96);
        assert!(lo < 1.0 && hi <= 1.0);
    }

    #[test]
    fn ks_of_perfect_grid() {
        let v: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_uniform(&v) - 0.005).abs() < 1e-12);
        assert!((ks_uniform(&[0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_theta_and_uniform_max() {
        let g = DistributionSpec::GaussianIid { mean: 1.5, sd: 2.0, p: 3 };
        let spec = KernelSpec::mean(4, 3).unwrap();
        assert_eq!(theta_true(&g, &spec), Some(vec![1.5; 3]));
        let u = DistributionSpec::UniformIid { lo: 0.0, hi: 1.0, p: 1 };
        let spec = KernelSpec::coord_max(4, 1).unwrap();
        assert_eq!(theta_true(&u, &spec), Some(vec![0.8]));
    }

    #[test]
    fn sampling_shapes() {
        let mut s = derive_stream(RngKey::new(1, StreamKind::Simulation, 0));
        let reg = DistributionSpec::RegressionModel {
            features: Box::new(DistributionSpec::UniformIid { lo: 0.0, hi: 1.0, p: 3 }),
            signal: SignalFn::Linear,
            noise_sd: 0.1,
        };
        let data = reg.sample(20, &mut s).unwrap();
        assert_eq!((data.rows(), data.cols()), (20, 3));
        assert_eq!(data.response().unwrap().len(), 20);
        let disc = DistributionSpec::Discrete {
            support: vec![0.0, 1.0],
            probs: vec![0.3, 0.7],
        };
        let data = disc.sample(50, &mut s).unwrap();
        assert!(data.values().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn invalid_laws() {
        assert!(DistributionSpec::GaussianIid { mean: 0.0, sd: 0.0, p: 1 }.validate().is_err());
        assert!(DistributionSpec::UniformIid { lo: 1.0, hi: 1.0, p: 1 }.validate().is_err());
        assert!(DistributionSpec::Discrete { support: vec![0.0], probs: vec![0.5] }.validate().is_err());
    }

    #[test]
    fn hoeffding_rejects_off_support_data() {
        let spec = KernelSpec::coord_max(2, 1).unwrap();
        let data = DataMatrix::from_column(vec![0.0, 2.0, 1.0]).unwrap();
        assert!(hoeffding_check(&[0.0, 1.0], &[0.5, 0.5], &spec, &data).is_err());
    }
}
