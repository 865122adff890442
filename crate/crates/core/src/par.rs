//! Order-preserving map over an index range, parallel when the `parallel`
//! feature is enabled.

use alloc::vec::Vec;

use crate::error::Result;

#[cfg(feature = "parallel")]
pub(crate) fn map_range<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<T, F>(len: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}

/// Like [`map_range`], but surfaces the error of the lowest failing index so
/// the reported error does not depend on scheduling.
#[cfg(feature = "parallel")]
pub(crate) fn try_map_range<T, F>(len: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_range(len, f).into_iter().collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn try_map_range<T, F>(len: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..len).map(f).collect()
}
