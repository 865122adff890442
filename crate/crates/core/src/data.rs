//! Sample matrix, canonical tuples and problem dimensions.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// An `n × p` sample stored row-major, with an optional response column
/// for regression kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    response: Option<Vec<f64>>,
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Input(format!(
                "data matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::Input(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite value at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(DataMatrix {
            rows,
            cols,
            values,
            response: None,
        })
    }

    /// Builds a single-column matrix.
    pub fn from_column(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        DataMatrix::new(n, 1, values)
    }

    pub fn with_response(mut self, response: Vec<f64>) -> Result<Self> {
        if response.len() != self.rows {
            return Err(Error::Input(format!(
                "response has length {}, expected {}",
                response.len(),
                self.rows
            )));
        }
        if let Some(pos) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite response at row {pos}")));
        }
        self.response = Some(response);
        Ok(self)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn response(&self) -> Option<&[f64]> {
        self.response.as_deref()
    }

    /// Row `i` as a kernel input.
    #[inline]
    pub fn kernel_row(&self, i: usize) -> Row<'_> {
        Row {
            features: self.row(i),
            response: self.response.as_ref().map(|r| r[i]),
        }
    }

    /// Kernel inputs for the rows named by `tuple`.
    pub fn tuple_rows(&self, tuple: &TupleIndex) -> Vec<Row<'_>> {
        tuple.indices().iter().map(|&i| self.kernel_row(i)).collect()
    }

    /// New matrix whose row `k` is row `order[k]` of `self`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.rows {
            return Err(Error::Input("permutation length mismatch".into()));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for &i in order {
            values.extend_from_slice(self.row(i));
        }
        let mut out = DataMatrix::new(self.rows, self.cols, values)?;
        if let Some(resp) = &self.response {
            out = out.with_response(order.iter().map(|&i| resp[i]).collect())?;
        }
        Ok(out)
    }

    /// Multiplies column `j` by `factor`.
    pub fn scale_column(&mut self, j: usize, factor: f64) {
        for i in 0..self.rows {
            self.values[i * self.cols + j] *= factor;
        }
    }
}

/// One observation as seen by a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row<'a> {
    pub features: &'a [f64],
    pub response: Option<f64>,
}

impl Row<'_> {
    /// Total order on rows: lexicographic on features, then response.
    pub fn total_cmp(&self, other: &Row<'_>) -> core::cmp::Ordering {
        for (a, b) in self.features.iter().zip(other.features) {
            let o = a.total_cmp(b);
            if o.is_ne() {
                return o;
            }
        }
        let a = self.response.unwrap_or(0.0);
        let b = other.response.unwrap_or(0.0);
        a.total_cmp(&b)
    }
}

/// A strictly increasing list of row indices, i.e. one element of the set of
/// `r`-subsets of `{0, …, n−1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TupleIndex(Vec<usize>);

impl TupleIndex {
    /// Sorts `indices` and rejects repeated entries.
    pub fn canonicalize(mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Input("tuple must contain at least one index".into()));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Input(format!("tuple has repeated index: {indices:?}")));
        }
        Ok(TupleIndex(indices))
    }

    /// Accepts only input that is already canonical.
    pub fn from_sorted(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() || indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input(format!(
                "tuple is not strictly increasing: {indices:?}"
            )));
        }
        Ok(TupleIndex(indices))
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        TupleIndex(indices)
    }

    #[inline]
    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    /// 128-bit identifier used to key per-tuple randomness.
    ///
    /// For tuples of a fixed order the identifier is the colexicographic
    /// rank `Σₖ C(iₖ, k+1)` whenever it is below `2¹²⁷`; the rank is a
    /// bijection between `r`-subsets of the naturals and the integers, so
    /// these identifiers never collide. Tuples whose rank does not fit are
    /// mapped through a 128-bit multiply-xorshift mix with the top bit set,
    /// which keeps the two ranges disjoint.
    pub fn hash128(&self) -> u128 {
        match colex_rank(&self.0) {
            Some(rank) if rank < (1u128 << 127) => rank,
            _ => mix128(&self.0) | (1u128 << 127),
        }
    }
}

fn checked_binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        // c * (n - i) / (i + 1) stays integral at every step.
        c = c.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(c)
}

fn colex_rank(sorted: &[usize]) -> Option<u128> {
    let mut rank: u128 = 0;
    for (k, &c) in sorted.iter().enumerate() {
        rank = rank.checked_add(checked_binomial(c, k + 1)?)?;
    }
    Some(rank)
}

fn mix128(sorted: &[usize]) -> u128 {
    const MUL: u128 = 0x2360_ed05_1fc6_5da4_4385_df64_9fcc_f645;
    let mut h: u128 = 0x9e37_79b9_7f4a_7c15_f39c_c060_5ced_c834 ^ sorted.len() as u128;
    for &x in sorted {
        h ^= x as u128;
        h = h.wrapping_mul(MUL);
        h ^= h >> 67;
    }
    h = h.wrapping_mul(MUL);
    h ^ (h >> 61)
}

/// Sample size `n`, kernel order `r` and output dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimensions {
    pub n: usize,
    pub r: usize,
    pub d: usize,
}

impl Dimensions {
    pub fn new(n: usize, r: usize, d: usize) -> Result<Self> {
        if n == 0 || r == 0 || d == 0 {
            return Err(Error::param("dims", format!("n, r, d must be positive (n={n}, r={r}, d={d})")));
        }
        if r > n {
            return Err(Error::param("r", format!("kernel order {r} exceeds sample size {n}")));
        }
        Ok(Dimensions { n, r, d })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::vec;

    #[test]
    fn canonicalize_is_idempotent() {
        let t = TupleIndex::canonicalize(vec![5, 1, 3]).unwrap();
        assert_eq!(t.indices(), &[1, 3, 5]);
        let again = TupleIndex::canonicalize(t.clone().into_inner()).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn repeated_index_rejected() {
        assert!(TupleIndex::canonicalize(vec![2, 2]).is_err());
        assert!(TupleIndex::from_sorted(vec![2, 1]).is_err());
    }

    #[test]
    fn hash_is_stable_and_distinguishes_neighbours() {
        let a = TupleIndex::from_sorted(vec![0, 1, 2]).unwrap();
        let b = TupleIndex::from_sorted(vec![0, 1, 3]).unwrap();
        assert_eq!(a.hash128(), a.clone().hash128());
        assert_ne!(a.hash128(), b.hash128());
    }

    #[test]
    fn hash_is_collision_free_for_n10_r3() {
        let mut seen = BTreeSet::new();
        for i in 0..10 {
            for j in i + 1..10 {
                for k in j + 1..10 {
                    let t = TupleIndex::from_sorted(vec![i, j, k]).unwrap();
                    assert!(seen.insert(t.hash128()));
                }
            }
        }
        assert_eq!(seen.len(), 120);
    }

    #[test]
    fn large_tuples_fall_back_to_the_mixed_range() {
        let t = TupleIndex::from_sorted((0..60).map(|i| 1_000 + 7 * i).collect()).unwrap();
        let h = t.hash128();
        assert!(h >> 127 == 1);
        let mut u = t.clone().into_inner();
        u[59] += 1;
        assert_ne!(TupleIndex::from_sorted(u).unwrap().hash128(), h);
    }

    #[test]
    fn data_matrix_rejects_nan() {
        assert!(DataMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DataMatrix::new(2, 1, vec![1.0]).is_err());
        let m = DataMatrix::new(2, 1, vec![1.0, 2.0]).unwrap();
        assert!(m.clone().with_response(vec![1.0]).is_err());
        assert!(m.with_response(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn dimensions_validate_order() {
        assert!(Dimensions::new(3, 4, 1).is_err());
        assert!(Dimensions::new(3, 3, 1).is_ok());
        assert!(Dimensions::new(3, 0, 1).is_err());
    }
}
