//! Switch between data-parallel and sequential evaluation.

/// Execution mode for the data-parallel loops of the library. Without the
/// `parallel` feature every mode runs sequentially. Results never depend on
/// the mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exec {
    parallel: bool,
}

impl Default for Exec {
    fn default() -> Self {
        Exec::parallel()
    }
}

impl Exec {
    pub fn sequential() -> Self {
        Exec { parallel: false }
    }

    pub fn parallel() -> Self {
        Exec { parallel: true }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && self.parallel
    }

    /// `items.iter().map(f)`, collected in input order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// `(0..n).map(f)`, collected in order.
    pub fn map_range<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}
