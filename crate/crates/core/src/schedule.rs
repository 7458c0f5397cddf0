//! Size-aware assignment of repositories to harvest workers.

use alloc::vec;
use alloc::vec::Vec;

/// Longest-processing-time packing: items sorted by size (descending,
/// ties by index) are each placed on the currently lightest bin.
/// Returns at most `workers` non-empty bins of item indices; unknown
/// sizes should be passed as 0 and end up spread over the light bins.
pub fn lpt_bins(sizes: &[u64], workers: usize) -> Vec<Vec<usize>> {
    let workers = workers.max(1).min(sizes.len().max(1));
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); workers];
    let mut load = vec![0u64; workers];
    let mut count = vec![0usize; workers];
    for i in order {
        let target = (0..workers)
            .min_by_key(|&w| (load[w], count[w], w))
            .unwrap_or(0);
        bins[target].push(i);
        load[target] = load[target].saturating_add(sizes[i]);
        count[target] += 1;
    }
    bins.retain(|b| !b.is_empty());
    bins
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn big_repositories_get_their_own_worker() {
        let bins = lpt_bins(&[1_000_000, 5, 3, 800_000, 2, 1], 2);
        assert_eq!(bins, vec![vec![0], vec![3, 1, 2, 4, 5]]);
    }

    #[test]
    fn degenerate() {
        assert!(lpt_bins(&[], 4).is_empty());
        assert_eq!(lpt_bins(&[0, 0, 0], 0), vec![vec![0, 1, 2]]);
        assert_eq!(lpt_bins(&[0, 0, 0], 8), vec![vec![0], vec![1], vec![2]]);
    }

    proptest! {
        #[test]
        fn partition(sizes in proptest::collection::vec(0u64..1000, 0..40), workers in 1usize..10) {
            let bins = lpt_bins(&sizes, workers);
            prop_assert!(bins.len() <= workers);
            let mut all: Vec<usize> = bins.concat();
            all.sort();
            prop_assert_eq!(all, (0..sizes.len()).collect::<Vec<_>>());
        }
    }
}
