//! Bounded worker pool that keeps results in input order.

use rayon::prelude::*;

/// Maps `f` over `items` on `parallelism` threads. Output order matches
/// input order whatever the thread count.
pub fn map_ordered<T, U, F>(items: &[T], parallelism: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    if parallelism <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_stable() {
        let items: Vec<u64> = (0..1000).collect();
        let serial = map_ordered(&items, 1, |x| x * x);
        assert_eq!(serial, map_ordered(&items, 8, |x| x * x));
    }
}
