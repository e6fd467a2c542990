//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper returns results in index order and all reductions happen
//! sequentially afterwards, so the parallel and sequential paths produce
//! bit-identical output. Without the `parallel` feature both modes run
//! sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// `f(0), f(1), …, f(n-1)` collected in order.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Applies `f` to each element mutably, collecting per-element results in order.
    pub fn map_mut<E, T, F>(self, items: &mut [E], f: F) -> Vec<T>
    where
        E: Send,
        T: Send,
        F: Fn(usize, &mut E) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => items
                .par_iter_mut()
                .enumerate()
                .map(|(i, e)| f(i, e))
                .collect(),
            _ => items.iter_mut().enumerate().map(|(i, e)| f(i, e)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_bitwise() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = Exec::Sequential.map_range(1000, f);
        let b = Exec::Parallel.map_range(1000, f);
        assert_eq!(a, b);
        let sa: f64 = a.iter().sum();
        let sb: f64 = b.iter().sum();
        assert_eq!(sa.to_bits(), sb.to_bits());
    }

    #[test]
    fn map_mut_preserves_order() {
        let mut v = vec![1, 2, 3, 4];
        let out = Exec::Parallel.map_mut(&mut v, |i, x| {
            *x *= 10;
            i
        });
        assert_eq!(out, vec![0, 1, 2, 3]);
        assert_eq!(v, vec![10, 20, 30, 40]);
    }
}
