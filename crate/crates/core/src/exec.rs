//! Execution strategy for the data-parallel inner loops.
//!
//! Every engine that enumerates an exponential index space splits it into a
//! fixed number of chunks that depends only on the problem size. Results are
//! collected in chunk order, so parallel and sequential runs produce
//! identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How the chunked inner loops are executed.
///
/// Without the `parallel` feature, [`Execution::Parallel`] runs sequentially.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Whether this strategy actually fans out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluates `f(0..count)` and returns the results in index order.
    pub fn map_indexed<T, F>(self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..count).into_par_iter().map(f).collect();
        }
        (0..count).map(f).collect()
    }

    /// Applies `f(chunk_index, chunk)` to consecutive `chunk_len` pieces of `data`.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let chunk_len = chunk_len.max(1);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            data.par_chunks_mut(chunk_len)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
        data.chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }

    /// Applies `f` to matching `chunk_len` pieces of two equal-length slices.
    pub fn zip_chunks_mut<T, F>(self, a: &mut [T], b: &mut [T], chunk_len: usize, f: F)
    where
        T: Send,
        F: Fn(&mut [T], &mut [T]) + Sync + Send,
    {
        assert_eq!(a.len(), b.len(), "zipped slices differ in length");
        let chunk_len = chunk_len.max(1);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            a.par_chunks_mut(chunk_len)
                .zip(b.par_chunks_mut(chunk_len))
                .for_each(|(x, y)| f(x, y));
            return;
        }
        a.chunks_mut(chunk_len)
            .zip(b.chunks_mut(chunk_len))
            .for_each(|(x, y)| f(x, y));
    }
}

/// Splits `0..total` into `parts` contiguous ranges of near-equal length.
pub(crate) fn split_range(total: u64, parts: u64) -> Vec<std::ops::Range<u64>> {
    let parts = parts.clamp(1, total.max(1));
    let base = total / parts;
    let extra = total % parts;
    let mut start = 0;
    (0..parts)
        .map(|p| {
            let len = base + u64::from(p < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_covers_range() {
        for (total, parts) in [(0, 4), (1, 4), (10, 3), (1 << 20, 256), (7, 7)] {
            let ranges = split_range(total, parts);
            assert_eq!(ranges.first().unwrap().start, 0);
            assert_eq!(ranges.last().unwrap().end, total);
            for w in ranges.windows(2) {
                assert_eq!(w[0].end, w[1].start);
            }
        }
    }

    #[test]
    fn map_indexed_preserves_order() {
        let seq = Execution::Sequential.map_indexed(100, |i| i * i);
        let par = Execution::Parallel.map_indexed(100, |i| i * i);
        assert_eq!(seq, par);
    }
}
