//! Complete and incomplete U-statistics, divide-and-conquer Hájek
//! estimates, and exact moments on discrete laws.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::combinatorics::{enumerate_tuples, TupleDesign};
use crate::data::{DataMatrix, Dimensions, Row, TupleIndex};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::math::NeumaierSum;
use crate::par;
use crate::rng::{derive_stream, RngKey, StreamKind};

/// Default cap on the number of cached kernel values (`N̂ · d`).
pub const DEFAULT_MEMORY_CAP: u64 = 100_000_000;

/// Incomplete U-statistic together with the per-tuple kernel values the
/// bootstrap reuses.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateBundle {
    /// `U′_{n,N}`, length `d`.
    pub u_prime: Vec<f64>,
    /// `N̂ × d` row-major, row `k` is the kernel at `design.tuples()[k]`.
    pub cached_h: Vec<f64>,
    pub design: TupleDesign,
    pub dims: Dimensions,
}

impl EstimateBundle {
    pub fn n_hat(&self) -> usize {
        self.design.n_hat()
    }

    pub fn cached_row(&self, k: usize) -> &[f64] {
        let d = self.dims.d;
        &self.cached_h[k * d..(k + 1) * d]
    }
}

/// How the subset `S₁` of anchor observations is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnchorSelection {
    /// Uniformly random subset of size `n₁` drawn from the partition stream.
    #[default]
    Random,
    /// The first `n₁` observations; handy for regression fixtures.
    First,
}

/// Divide-and-conquer estimates `G_{i₁}` of the Hájek projection `g(X_{i₁})`.
#[derive(Debug, Clone, PartialEq)]
pub struct HajekEstimates {
    /// `S₁` in ascending order.
    pub s1: Vec<usize>,
    /// `n₁ × d` row-major; row `k` is `G_{s1[k]}`.
    pub g_matrix: Vec<f64>,
    /// Columnwise mean `Ḡ`.
    pub g_bar: Vec<f64>,
    /// Number of disjoint blocks `K = ⌊(n−1)/(r−1)⌋` (1 when `r = 1`).
    pub k_blocks: usize,
    pub d: usize,
}

impl HajekEstimates {
    pub fn n1(&self) -> usize {
        self.s1.len()
    }

    pub fn g_row(&self, k: usize) -> &[f64] {
        &self.g_matrix[k * self.d..(k + 1) * self.d]
    }
}

fn noise_key(key: RngKey) -> RngKey {
    key.with_kind(StreamKind::KernelNoise)
}

/// Kernel values for each tuple, stacked row-major, in tuple order.
fn evaluate_tuples(
    data: &DataMatrix,
    spec: &KernelSpec,
    tuples: &[TupleIndex],
    key: RngKey,
    memory_cap: u64,
) -> Result<Vec<f64>> {
    let d = spec.out_dim();
    let entries = tuples.len() as u128 * d as u128;
    if entries > memory_cap as u128 {
        return Err(Error::MemoryCap {
            entries,
            cap: memory_cap,
        });
    }
    let rows = par::try_map_range(tuples.len(), |k| {
        let mut out = vec![0.0; d];
        spec.eval_tuple(data, &tuples[k], key, &mut out)?;
        Ok(out)
    })?;
    Ok(rows.concat())
}

fn column_means(matrix: &[f64], d: usize) -> Vec<f64> {
    let m = matrix.len() / d;
    let mut acc = vec![0.0; d];
    for row in matrix.chunks_exact(d) {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= m as f64);
    acc
}

/// Complete U-statistic: the kernel averaged over every `r`-subset.
///
/// Only the master seed of `key` is used; random kernels draw their noise
/// from the kernel-noise stream of each tuple, exactly as
/// [`incomplete_u`] does.
pub fn complete_u(data: &DataMatrix, spec: &KernelSpec, dims: Dimensions, key: RngKey, cap: u64) -> Result<Vec<f64>> {
    check_dims(data, spec, dims)?;
    let tuples = enumerate_tuples(dims, cap)?;
    let h = evaluate_tuples(data, spec, &tuples, noise_key(key), DEFAULT_MEMORY_CAP)?;
    Ok(column_means(&h, dims.d))
}

fn check_dims(data: &DataMatrix, spec: &KernelSpec, dims: Dimensions) -> Result<()> {
    spec.check_data(data)?;
    if dims.n != data.rows() || dims.r != spec.order() || dims.d != spec.out_dim() {
        return Err(Error::param(
            "dims",
            format!(
                "dims (n={}, r={}, d={}) disagree with data/kernel (n={}, r={}, d={})",
                dims.n,
                dims.r,
                dims.d,
                data.rows(),
                spec.order(),
                spec.out_dim()
            ),
        ));
    }
    Ok(())
}

/// Incomplete U-statistic `U′_{n,N} = N̂⁻¹ Σ_{ι∈design} H(X_ι, W_ι)`.
pub fn incomplete_u(data: &DataMatrix, spec: &KernelSpec, design: &TupleDesign, key: RngKey) -> Result<EstimateBundle> {
    incomplete_u_with_cap(data, spec, design, key, DEFAULT_MEMORY_CAP)
}

pub fn incomplete_u_with_cap(
    data: &DataMatrix,
    spec: &KernelSpec,
    design: &TupleDesign,
    key: RngKey,
    memory_cap: u64,
) -> Result<EstimateBundle> {
    let dims = Dimensions::new(data.rows(), spec.order(), spec.out_dim())?;
    check_dims(data, spec, dims)?;
    if design.n() != dims.n || design.r() != dims.r {
        return Err(Error::param(
            "design",
            format!(
                "design is over I({}, {}), data/kernel give I({}, {})",
                design.n(),
                design.r(),
                dims.n,
                dims.r
            ),
        ));
    }
    let cached_h = evaluate_tuples(data, spec, design.tuples(), noise_key(key), memory_cap)?;
    let u_prime = column_means(&cached_h, dims.d);
    Ok(EstimateBundle {
        u_prime,
        cached_h,
        design: design.clone(),
        dims,
    })
}

/// Divide-and-conquer Hájek estimates.
///
/// For each anchor `i₁ ∈ S₁` the other `n − 1` indices are shuffled with a
/// stream keyed by `i₁` and cut into `K = ⌊(n−1)/(r−1)⌋` blocks of size
/// `r − 1` (the remainder is dropped); `G_{i₁}` is the mean of the kernel
/// over `{i₁} ∪ block`. Kernel noise for these evaluations comes from a
/// stream kind of its own, independent of the noise of the main design.
/// For `r = 1`, `G_{i₁} = H(X_{i₁})`.
pub fn hajek_dc(
    data: &DataMatrix,
    spec: &KernelSpec,
    n1: usize,
    key: RngKey,
    selection: AnchorSelection,
) -> Result<HajekEstimates> {
    let dims = Dimensions::new(data.rows(), spec.order(), spec.out_dim())?;
    check_dims(data, spec, dims)?;
    let (n, r, d) = (dims.n, dims.r, dims.d);
    if n1 == 0 || n1 > n {
        return Err(Error::param("n1", format!("must lie in 1..={n}, got {n1}")));
    }
    let partition = key.with_kind(StreamKind::Partition);
    let hajek_noise = key.with_kind(StreamKind::HajekNoise);

    let s1: Vec<usize> = match selection {
        AnchorSelection::First => (0..n1).collect(),
        AnchorSelection::Random => {
            let mut s = derive_stream(partition.with_index(u128::MAX));
            let mut v = rand::seq::index::sample(&mut s, n, n1).into_vec();
            v.sort_unstable();
            v
        }
    };
    let k_blocks = if r == 1 { 1 } else { (n - 1) / (r - 1) };

    let rows = par::try_map_range(n1, |a| {
        let i1 = s1[a];
        let mut g = vec![0.0; d];
        if r == 1 {
            let t = TupleIndex::from_sorted_unchecked(vec![i1]);
            spec.eval_tuple(data, &t, hajek_noise, &mut g)?;
            return Ok(g);
        }
        let mut others: Vec<usize> = (0..n).filter(|&i| i != i1).collect();
        let mut stream = derive_stream(partition.with_index(i1 as u128));
        others.shuffle(&mut stream);
        let mut h = vec![0.0; d];
        let mut acc: Vec<NeumaierSum> = vec![NeumaierSum::default(); d];
        for block in others.chunks_exact(r - 1).take(k_blocks) {
            let mut idx = block.to_vec();
            idx.push(i1);
            let t = TupleIndex::canonicalize(idx)?;
            spec.eval_tuple(data, &t, hajek_noise, &mut h)?;
            for (a, v) in acc.iter_mut().zip(&h) {
                a.add(*v);
            }
        }
        for (gj, a) in g.iter_mut().zip(&acc) {
            *gj = a.value() / k_blocks as f64;
        }
        Ok(g)
    })?;
    let g_matrix = rows.concat();
    let g_bar = column_means(&g_matrix, d);
    Ok(HajekEstimates {
        s1,
        g_matrix,
        g_bar,
        k_blocks,
        d,
    })
}

/// Exact `θ`, `g` and `σ²_g` for a deterministic kernel on a scalar discrete
/// law.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoments {
    pub theta: Vec<f64>,
    /// `g(x)` for each support point, in support order.
    pub g_table: Vec<Vec<f64>>,
    pub sigma_g_sq: Vec<f64>,
}

/// Largest `|support|^r` that [`exact_moments_discrete`] will enumerate.
pub const EXACT_ENUMERATION_GUARD: u64 = 10_000_000;

/// Exact moments by weighted enumeration of all ordered `r`-tuples of
/// support points.
pub fn exact_moments_discrete(support: &[f64], probs: &[f64], spec: &KernelSpec) -> Result<ExactMoments> {
    validate_discrete(support, probs)?;
    if spec.is_random() {
        return Err(Error::param("kernel", "exact moments need a deterministic kernel"));
    }
    if spec.input_dim() != 1 {
        return Err(Error::param("kernel", "exact moments need scalar observations"));
    }
    let s = support.len();
    let r = spec.order();
    let total = (s as u128).checked_pow(r as u32);
    if total.is_none_or(|t| t > EXACT_ENUMERATION_GUARD as u128) {
        return Err(Error::RefusedEnumeration {
            requested: total.map_or_else(|| format!("{s}^{r}"), |t| t.to_string()),
            cap: EXACT_ENUMERATION_GUARD,
        });
    }
    let d = spec.out_dim();
    let points: Vec<[f64; 1]> = support.iter().map(|&v| [v]).collect();
    let mut h = vec![0.0; d];
    let mut g_table = Vec::with_capacity(s);
    for first in 0..s {
        let mut acc = vec![NeumaierSum::default(); d];
        // Odometer over the remaining r − 1 positions.
        let mut rest = vec![0usize; r - 1];
        loop {
            let mut rows = Vec::with_capacity(r);
            rows.push(Row {
                features: &points[first],
                response: None,
            });
            let mut w = 1.0;
            for &k in &rest {
                w *= probs[k];
                rows.push(Row {
                    features: &points[k],
                    response: None,
                });
            }
            if w > 0.0 {
                spec.eval_into(&rows, None, &mut h)?;
                for (a, v) in acc.iter_mut().zip(&h) {
                    a.add(w * v);
                }
            }
            let mut pos = 0;
            while pos < rest.len() {
                rest[pos] += 1;
                if rest[pos] < s {
                    break;
                }
                rest[pos] = 0;
                pos += 1;
            }
            if pos == rest.len() {
                break;
            }
        }
        g_table.push(acc.iter().map(NeumaierSum::value).collect::<Vec<f64>>());
    }
    let mut theta = vec![0.0; d];
    for j in 0..d {
        let mut acc = NeumaierSum::default();
        for (g, &p) in g_table.iter().zip(probs) {
            acc.add(p * g[j]);
        }
        theta[j] = acc.value();
    }
    let mut sigma_g_sq = vec![0.0; d];
    for j in 0..d {
        let mut acc = NeumaierSum::default();
        for (g, &p) in g_table.iter().zip(probs) {
            let c = g[j] - theta[j];
            acc.add(p * c * c);
        }
        sigma_g_sq[j] = acc.value();
    }
    Ok(ExactMoments {
        theta,
        g_table,
        sigma_g_sq,
    })
}

pub(crate) fn validate_discrete(support: &[f64], probs: &[f64]) -> Result<()> {
    if support.is_empty() || support.len() != probs.len() {
        return Err(Error::param("support", "support and probs must be non-empty and of equal length"));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || support.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("probs", "probabilities must be finite and non-negative"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::param("probs", format!("must sum to 1, got {total}")));
    }
    Ok(())
}
