//! Comparison schemes for the experiments: uncoded broadcast shuffling,
//! index-coding-based shuffling via a greedy conflict-graph coloring, and the
//! fully random allocation generator they both run on.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{CacheState, ModelError, ShuffleHistory};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("allocation size s = {s} exceeds m = {m}")]
    AllocationTooLarge { s: usize, m: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("greedy coloring produced an undecodable transmission for worker {worker}, message {message}")]
    UndecodableColoring { worker: usize, message: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-worker target message sets for the next iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    pub m: usize,
    pub sets: Vec<Vec<usize>>,
}

impl Allocation {
    pub fn workers(&self) -> usize {
        self.sets.len()
    }
}

/// Each worker independently draws a uniform s-subset of the m messages.
pub fn random_allocation(
    m: usize,
    n: usize,
    s: usize,
    seed: u64,
) -> Result<Allocation, BaselineError> {
    if s > m {
        return Err(BaselineError::AllocationTooLarge { s, m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = Vec::with_capacity(n);
    for _ in 0..n {
        let mut set: Vec<usize> = rand::seq::index::sample(&mut rng, m, s).into_vec();
        set.sort_unstable();
        sets.push(set);
    }
    Ok(Allocation { m, sets })
}

fn check_dims(alloc: &Allocation, caches: &[CacheState]) -> Result<(), BaselineError> {
    if alloc.workers() != caches.len() {
        return Err(BaselineError::DimensionMismatch(format!(
            "allocation has {} workers, caches {}",
            alloc.workers(),
            caches.len()
        )));
    }
    if let Some(c) = caches.iter().find(|c| c.len() != alloc.m) {
        return Err(BaselineError::DimensionMismatch(format!(
            "cache over {} messages, allocation over {}",
            c.len(),
            alloc.m
        )));
    }
    Ok(())
}

/// One broadcast per distinct message some worker needs and lacks.
pub fn uncoded_count(alloc: &Allocation, caches: &[CacheState]) -> Result<usize, BaselineError> {
    check_dims(alloc, caches)?;
    let mut needed = vec![false; alloc.m];
    for (set, cache) in alloc.sets.iter().zip(caches) {
        for &j in set {
            if !cache.contains(j) {
                needed[j] = true;
            }
        }
    }
    Ok(needed.iter().filter(|&&b| b).count())
}

/// Demands collapsed by message: message -> demanding workers.
fn demand_groups(alloc: &Allocation, caches: &[CacheState]) -> Vec<(usize, Vec<usize>)> {
    let mut demanders: Vec<Vec<usize>> = vec![Vec::new(); alloc.m];
    for (i, (set, cache)) in alloc.sets.iter().zip(caches).enumerate() {
        for &j in set {
            if !cache.contains(j) {
                demanders[j].push(i);
            }
        }
    }
    demanders
        .into_iter()
        .enumerate()
        .filter(|(_, d)| !d.is_empty())
        .collect()
}

/// Greedy-colored XOR delivery. Demands are split into one virtual client per
/// (worker, missing message) and collapsed per message; two message groups
/// conflict unless every demander of each caches the other's message. Colors
/// the conflict graph largest-degree-first, emits one XOR per color, and
/// simulates per-client decoding before reporting the count.
pub fn index_coding_greedy(
    alloc: &Allocation,
    caches: &[CacheState],
) -> Result<usize, BaselineError> {
    check_dims(alloc, caches)?;
    let groups = demand_groups(alloc, caches);
    let g = groups.len();
    let compatible = |a: usize, b: usize| -> bool {
        let (ja, da) = &groups[a];
        let (jb, db) = &groups[b];
        da.iter().all(|&i| caches[i].contains(*jb)) && db.iter().all(|&i| caches[i].contains(*ja))
    };
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); g];
    for a in 0..g {
        for b in a + 1..g {
            if !compatible(a, b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(adj[v].len()), v));
    let mut color = vec![usize::MAX; g];
    let mut colors = 0usize;
    for &v in &order {
        let mut used: Vec<bool> = vec![false; colors + 1];
        for &u in &adj[v] {
            if color[u] != usize::MAX {
                used[color[u].min(colors)] = true;
            }
        }
        let c = (0..=colors).find(|&c| !used[c]).expect("free color exists");
        color[v] = c;
        colors = colors.max(c + 1);
    }
    // Decode simulation: within a color the XOR covers the class's distinct
    // messages; each demander must cache every other message of its class.
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); colors];
    for (v, &c) in color.iter().enumerate() {
        classes[c].push(v);
    }
    for class in &classes {
        for &v in class {
            let (j, demanders) = &groups[v];
            for &i in demanders {
                for &u in class {
                    let other = groups[u].0;
                    if other != *j && !caches[i].contains(other) {
                        return Err(BaselineError::UndecodableColoring {
                            worker: i,
                            message: *j,
                        });
                    }
                }
            }
        }
    }
    Ok(colors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryMode {
    Uncoded,
    IndexCoded,
}

#[derive(Debug, Clone)]
pub struct BaselineMetrics {
    pub per_iteration: Vec<usize>,
    pub avg_hamming: f64,
}

impl BaselineMetrics {
    pub fn total(&self) -> usize {
        self.per_iteration.iter().sum()
    }
}

/// Random shuffling baseline: every iteration draws a fresh uniform
/// allocation, delivers it uncoded or greedy-index-coded, then replaces each
/// cache wholesale by its allocation (the random-interleaving semantics).
pub fn random_shuffle_baseline(
    m: usize,
    n: usize,
    s: usize,
    t: usize,
    mode: DeliveryMode,
    seed: u64,
) -> Result<BaselineMetrics, BaselineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let to_caches = |alloc: &Allocation| -> Vec<CacheState> {
        alloc
            .sets
            .iter()
            .map(|set| CacheState::from_set(m, set))
            .collect()
    };
    let init = random_allocation(m, n, s, rng.gen())?;
    let mut caches = to_caches(&init);
    let mut states: Vec<CacheState> = caches.clone();
    let mut per_iteration = Vec::with_capacity(t);
    for _ in 0..t {
        let alloc = random_allocation(m, n, s, rng.gen())?;
        let count = match mode {
            DeliveryMode::Uncoded => uncoded_count(&alloc, &caches)?,
            DeliveryMode::IndexCoded => index_coding_greedy(&alloc, &caches)?,
        };
        per_iteration.push(count);
        caches = to_caches(&alloc);
        states.extend(caches.iter().cloned());
    }
    let avg_hamming = ShuffleHistory::new(t + 1, n, states)?.avg_hamming()?;
    Ok(BaselineMetrics {
        per_iteration,
        avg_hamming,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_full_and_deterministic() {
        let alloc = random_allocation(5, 3, 5, 0).unwrap();
        assert!(alloc.sets.iter().all(|s| *s == vec![0, 1, 2, 3, 4]));
        let a = random_allocation(20, 4, 7, 9).unwrap();
        assert_eq!(a, random_allocation(20, 4, 7, 9).unwrap());
        assert_ne!(a, random_allocation(20, 4, 7, 10).unwrap());
        assert!(random_allocation(4, 2, 5, 0).is_err());
    }

    #[test]
    fn allocation_pairwise_intersection_mean() {
        // Two uniform 50-subsets of 500 intersect in s^2/m = 5 on average.
        let (m, n, s) = (500, 20, 50);
        let mut total = 0usize;
        let mut pairs = 0usize;
        for seed in 0..53u64 {
            let alloc = random_allocation(m, n, s, seed).unwrap();
            for i in 0..n {
                for i2 in i + 1..n {
                    total += alloc.sets[i]
                        .iter()
                        .filter(|x| alloc.sets[i2].binary_search(x).is_ok())
                        .count();
                    pairs += 1;
                }
            }
        }
        // 53 * 190 pairs; hypergeometric sd ~ 2.06 per pair.
        let mean = total as f64 / pairs as f64;
        let sigma = 2.06 / (pairs as f64).sqrt();
        assert!((mean - 5.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn uncoded_count_edges() {
        let alloc = Allocation {
            m: 4,
            sets: vec![vec![0, 1], vec![2, 3]],
        };
        let full = vec![
            CacheState::from_set(4, &[0, 1]),
            CacheState::from_set(4, &[2, 3]),
        ];
        assert_eq!(uncoded_count(&alloc, &full).unwrap(), 0);
        let empty = vec![CacheState::empty(4), CacheState::empty(4)];
        assert_eq!(uncoded_count(&alloc, &empty).unwrap(), 4);
        // Permutation invariance in worker order.
        let swapped = Allocation {
            m: 4,
            sets: vec![vec![2, 3], vec![0, 1]],
        };
        assert_eq!(uncoded_count(&swapped, &empty).unwrap(), 4);
    }

    #[test]
    fn uncoded_count_sec5_mean() {
        // Per-message need probability 1 - (1 - 0.09)^20, so ~424 of 500.
        let (m, n, s) = (500, 20, 50);
        let expect = m as f64 * (1.0 - (1.0 - 0.09f64).powi(n as i32));
        let mut total = 0usize;
        let runs = 40;
        for seed in 0..runs {
            let caches: Vec<CacheState> = random_allocation(m, n, s, seed)
                .unwrap()
                .sets
                .iter()
                .map(|set| CacheState::from_set(m, set))
                .collect();
            let alloc = random_allocation(m, n, s, seed + 1000).unwrap();
            total += uncoded_count(&alloc, &caches).unwrap();
        }
        let mean = total as f64 / runs as f64;
        // Per-run sd is below sqrt(m)/2; 3 sigma of the mean with margin.
        assert!((mean - expect).abs() < 3.0 * 11.0 / (runs as f64).sqrt(), "mean {mean} vs {expect}");
    }

    #[test]
    fn greedy_collapses_shared_demand() {
        let alloc = Allocation {
            m: 3,
            sets: vec![vec![0], vec![0], vec![0]],
        };
        let caches = vec![CacheState::empty(3); 3];
        assert_eq!(index_coding_greedy(&alloc, &caches).unwrap(), 1);
    }

    #[test]
    fn greedy_xors_the_two_client_exchange() {
        let alloc = Allocation {
            m: 2,
            sets: vec![vec![1], vec![0]],
        };
        let caches = vec![
            CacheState::from_set(2, &[0]),
            CacheState::from_set(2, &[1]),
        ];
        assert_eq!(index_coding_greedy(&alloc, &caches).unwrap(), 1);
    }

    #[test]
    fn greedy_cannot_beat_no_side_information() {
        let alloc = Allocation {
            m: 5,
            sets: vec![vec![0, 1, 2, 3, 4]],
        };
        let caches = vec![CacheState::empty(5)];
        assert_eq!(index_coding_greedy(&alloc, &caches).unwrap(), 5);
    }

    #[test]
    fn greedy_never_exceeds_uncoded() {
        for seed in 0..30u64 {
            let caches: Vec<CacheState> = random_allocation(40, 6, 12, seed)
                .unwrap()
                .sets
                .iter()
                .map(|set| CacheState::from_set(40, set))
                .collect();
            let alloc = random_allocation(40, 6, 12, seed + 500).unwrap();
            let coded = index_coding_greedy(&alloc, &caches).unwrap();
            let uncoded = uncoded_count(&alloc, &caches).unwrap();
            assert!(coded <= uncoded, "{coded} > {uncoded}");
        }
    }

    #[test]
    fn baseline_run_shapes_and_hamming() {
        let metrics = random_shuffle_baseline(500, 20, 50, 3, DeliveryMode::Uncoded, 7).unwrap();
        assert_eq!(metrics.per_iteration.len(), 3);
        // Uniform re-draws sit at expected pairwise distance 2s(1-s/m) = 90.
        assert!((metrics.avg_hamming - 90.0).abs() < 4.0, "{}", metrics.avg_hamming);
    }
}
