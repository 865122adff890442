//! Tuple-space cardinality, the Bernoulli sampling design and exhaustive
//! enumeration.
//!
//! A Bernoulli design includes each `r`-subset of `{0, …, n−1}` independently
//! with probability `p_n = N / C(n, r)`. Iterating over all `C(n, r)` subsets
//! is hopeless for realistic `(n, r)`, so [`draw_design`] realizes the same
//! law in two steps: draw the count `N̂`, then draw `N̂` distinct subsets
//! uniformly. Conditional on its size a Bernoulli design is uniform over
//! subsets of that size, so the two procedures have identical laws.
//!
//! When `C(n, r)` does not fit in an `i64`, `N̂` is drawn from `Poisson(N)`
//! instead of `Binomial(C(n, r), p_n)`; the total-variation distance between
//! the two is at most `p_n · N`, which is negligible in that regime.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand_distr::{Binomial, Distribution, Poisson};

use crate::data::{Dimensions, TupleIndex};
use crate::error::{Error, Result};
use crate::math::{self, NeumaierSum};
use crate::rng::{derive_stream, RngKey};

/// Largest tuple space that will be materialized by enumeration by default.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Attempts allowed per requested tuple before rejection sampling gives up.
const RETRY_FACTOR: usize = 100;

/// `ln C(n, r)`.
///
/// Computed as a compensated sum of `ln((n − k + i) / i)` over
/// `i = 1..=k`, `k = min(r, n − r)`. Every term is positive, so the relative
/// error stays at a few ulps; beyond a million terms the log-gamma form is
/// used instead.
pub fn log_binomial(n: u64, r: u64) -> Result<f64> {
    if r > n {
        return Err(Error::param("r", format!("{r} exceeds n = {n}")));
    }
    let k = r.min(n - r);
    if k == 0 {
        return Ok(0.0);
    }
    if k > 1_000_000 {
        let (nf, rf) = (n as f64, r as f64);
        return Ok(math::ln_gamma(nf + 1.0) - math::ln_gamma(rf + 1.0) - math::ln_gamma(nf - rf + 1.0));
    }
    let base = (n - k) as f64;
    let mut acc = NeumaierSum::default();
    for i in 1..=k {
        let fi = i as f64;
        acc.add(math::ln((base + fi) / fi));
    }
    Ok(acc.value())
}

/// `C(n, r)` when it fits in a `u128`.
pub fn exact_binomial(n: u64, r: u64) -> Option<u128> {
    if r > n {
        return Some(0);
    }
    let k = r.min(n - r);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(c)
}

/// A realized Bernoulli design.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleDesign {
    n: usize,
    r: usize,
    tuples: Vec<TupleIndex>,
    p_n: f64,
    budget: u64,
    log_cardinality: f64,
    seed_key: RngKey,
}

impl TupleDesign {
    /// Rebuilds a design from its parts, e.g. after deserialization.
    pub fn from_parts(
        n: usize,
        r: usize,
        budget: u64,
        tuples: Vec<TupleIndex>,
        seed_key: RngKey,
    ) -> Result<Self> {
        let dims = Dimensions::new(n, r, 1)?;
        if budget == 0 {
            return Err(Error::param("budget", "must be at least 1"));
        }
        if tuples.is_empty() {
            return Err(Error::DegenerateDesign("design contains no tuple".into()));
        }
        let mut seen = BTreeSet::new();
        for t in &tuples {
            if t.order() != r || t.indices().iter().any(|&i| i >= n) {
                return Err(Error::Input(format!("tuple {:?} is not an {r}-subset of 0..{n}", t.indices())));
            }
            if !seen.insert(t) {
                return Err(Error::Input(format!("duplicate tuple {:?}", t.indices())));
            }
        }
        let (p_n, log_cardinality) = sparsity(dims, budget)?;
        Ok(TupleDesign {
            n,
            r,
            tuples,
            p_n,
            budget,
            log_cardinality,
            seed_key,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn tuples(&self) -> &[TupleIndex] {
        &self.tuples
    }

    /// Realized number of sampled tuples `N̂`.
    pub fn n_hat(&self) -> usize {
        self.tuples.len()
    }

    /// Sparsity parameter `p_n = min(1, N / C(n, r))`.
    pub fn p_n(&self) -> f64 {
        self.p_n
    }

    /// Computational budget `N`.
    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn log_cardinality(&self) -> f64 {
        self.log_cardinality
    }

    pub fn seed_key(&self) -> RngKey {
        self.seed_key
    }

    /// True when `p_n > 1/2`, outside the regime covered by the
    /// approximation theory; the estimator is still well defined.
    pub fn exceeds_sparse_regime(&self) -> bool {
        self.p_n > 0.5
    }
}

fn sparsity(dims: Dimensions, budget: u64) -> Result<(f64, f64)> {
    let log_card = log_binomial(dims.n as u64, dims.r as u64)?;
    let p_n = match exact_binomial(dims.n as u64, dims.r as u64) {
        Some(c) if (budget as u128) >= c => 1.0,
        Some(c) => budget as f64 / c as f64,
        None => math::exp(math::ln(budget as f64) - log_card).min(1.0),
    };
    Ok((p_n, log_card))
}

/// Draws a Bernoulli design with budget `N` using the stream of `key`.
pub fn draw_design(dims: Dimensions, budget: u64, key: RngKey) -> Result<TupleDesign> {
    draw_design_with_cap(dims, budget, key, DEFAULT_ENUMERATION_CAP)
}

/// [`draw_design`] with an explicit cap on how many tuples may be
/// enumerated when `p_n = 1` or the design is dense.
pub fn draw_design_with_cap(
    dims: Dimensions,
    budget: u64,
    key: RngKey,
    enumeration_cap: u64,
) -> Result<TupleDesign> {
    if budget == 0 {
        return Err(Error::param("budget", "must be at least 1"));
    }
    let (n, r) = (dims.n, dims.r);
    let (p_n, log_cardinality) = sparsity(dims, budget)?;
    let exact = exact_binomial(n as u64, r as u64).filter(|&c| c <= i64::MAX as u128);
    let mut stream = derive_stream(key);

    let make = |tuples| TupleDesign {
        n,
        r,
        tuples,
        p_n,
        budget,
        log_cardinality,
        seed_key: key,
    };

    if p_n >= 1.0 {
        return Ok(make(enumerate_tuples(dims, enumeration_cap)?));
    }

    let n_hat = match exact {
        Some(c) => Binomial::new(c as u64, p_n)
            .map_err(|e| Error::DegenerateDesign(e.to_string()))?
            .sample(&mut stream),
        None => {
            let draw: f64 = Poisson::new(budget as f64)
                .map_err(|e| Error::DegenerateDesign(e.to_string()))?
                .sample(&mut stream);
            draw as u64
        }
    };
    if n_hat == 0 {
        return Err(Error::DegenerateDesign(format!(
            "the Bernoulli draw selected no tuple (N = {budget}, p_n = {p_n:e})"
        )));
    }
    let n_hat = usize::try_from(n_hat)
        .map_err(|_| Error::DegenerateDesign(format!("N̂ = {n_hat} does not fit in memory")))?;

    // Dense designs on small tuple spaces: pick N̂ positions out of the
    // enumeration instead of rejecting collisions.
    if let Some(c) = exact {
        if (n_hat as u128) * 2 > c && c <= enumeration_cap as u128 {
            let all = enumerate_tuples(dims, enumeration_cap)?;
            let mut picks = rand::seq::index::sample(&mut stream, all.len(), n_hat).into_vec();
            picks.sort_unstable();
            return Ok(make(picks.into_iter().map(|i| all[i].clone()).collect()));
        }
    }

    let mut chosen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let max_attempts = n_hat.saturating_mul(RETRY_FACTOR);
    let mut attempts = 0usize;
    while chosen.len() < n_hat {
        if attempts == max_attempts {
            return Err(Error::DegenerateDesign(format!(
                "rejection sampling exhausted {max_attempts} attempts with {} of {n_hat} distinct tuples",
                chosen.len()
            )));
        }
        attempts += 1;
        let mut t = rand::seq::index::sample(&mut stream, n, r).into_vec();
        t.sort_unstable();
        chosen.insert(t);
    }
    Ok(make(
        chosen
            .into_iter()
            .map(TupleIndex::from_sorted_unchecked)
            .collect(),
    ))
}

/// All `C(n, r)` tuples in lexicographic order.
pub fn enumerate_tuples(dims: Dimensions, cap: u64) -> Result<Vec<TupleIndex>> {
    let (n, r) = (dims.n, dims.r);
    let count = match exact_binomial(n as u64, r as u64) {
        Some(c) if c <= cap as u128 => c as usize,
        Some(c) => {
            return Err(Error::RefusedEnumeration {
                requested: c.to_string(),
                cap,
            })
        }
        None => {
            return Err(Error::RefusedEnumeration {
                requested: format!("C({n}, {r}) > 2^128"),
                cap,
            })
        }
    };
    let mut out = Vec::with_capacity(count);
    let mut cur: Vec<usize> = (0..r).collect();
    loop {
        out.push(TupleIndex::from_sorted_unchecked(cur.clone()));
        // Rightmost position that can still advance.
        let mut i = r;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if cur[i] < n - r + i {
                break;
            }
        }
        cur[i] += 1;
        for k in i + 1..r {
            cur[k] = cur[k - 1] + 1;
        }
    }
}
