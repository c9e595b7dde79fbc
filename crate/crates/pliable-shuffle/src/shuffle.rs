//! The hierarchical two-layer shuffling scheme: a sparse worker-to-group
//! caching structure (outer layer) plus per-group random r-sum transmissions
//! (inner layer), with cache evolution, metrics, and the statistical checks
//! used by the experiments.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::model::{CacheState, ModelError, ShuffleHistory};

#[derive(Debug, Error)]
pub enum ShuffleError {
    #[error("configuration invalid: {0}")]
    BadConfig(String),
    #[error("{0} is not prime")]
    NotPrime(usize),
    #[error("repetition {rep} outside [1, {k}]")]
    BadRepetition { rep: usize, k: usize },
    #[error("constructed outer layer failed verification: {0}")]
    ConstructionFailed(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("balance violated for worker {worker} in group {group}")]
    BalanceViolation { worker: usize, group: usize },
    #[error("statistical check needs at least {needed} runs, got {got}")]
    TooFewRuns { needed: usize, got: usize },
    #[error("base block unusable: {0}")]
    BadBaseBlock(String),
    #[error("json: {0}")]
    Json(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OuterKind {
    Recursive,
    Random,
    Cyclic,
}

/// Parameters of a shuffling experiment. Derived quantities: G = m/m1 groups,
/// w = m1(1-1/r) cached messages per owned group, d1 = s/w groups per worker,
/// d2 = n*d1/G workers per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShuffleConfig {
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub m1: usize,
    pub r: usize,
    pub t: usize,
    pub seed: u64,
    pub outer: OuterKind,
}

#[derive(Serialize, Deserialize)]
struct ConfigJson {
    m: usize,
    n: usize,
    s: usize,
    m1: usize,
    r: usize,
    #[serde(rename = "T")]
    t: usize,
    seed: u64,
    outer: OuterKind,
}

impl ShuffleConfig {
    pub fn new(
        m: usize,
        n: usize,
        s: usize,
        m1: usize,
        r: usize,
        t: usize,
        seed: u64,
        outer: OuterKind,
    ) -> Result<Self, ShuffleError> {
        let bad = |msg: String| Err(ShuffleError::BadConfig(msg));
        if m == 0 || n == 0 || s == 0 || t == 0 {
            return bad("m, n, s, T must be positive".into());
        }
        if r < 2 || r > m1 {
            return bad(format!("need 2 <= r <= m1, got r = {r}, m1 = {m1}"));
        }
        if m1 % r != 0 {
            return bad(format!("r = {r} must divide m1 = {m1}"));
        }
        if m % m1 != 0 {
            return bad(format!("m1 = {m1} must divide m = {m}"));
        }
        let w = m1 - m1 / r;
        if s % w != 0 {
            return bad(format!("m1(1-1/r) = {w} must divide s = {s}"));
        }
        let cfg = ShuffleConfig {
            m,
            n,
            s,
            m1,
            r,
            t,
            seed,
            outer,
        };
        if cfg.d1() > cfg.groups() {
            return bad(format!(
                "d1 = {} exceeds group count {}",
                cfg.d1(),
                cfg.groups()
            ));
        }
        if (n * cfg.d1()) % cfg.groups() != 0 {
            return bad(format!(
                "n*d1 = {} not divisible by G = {}; d2 not integral",
                n * cfg.d1(),
                cfg.groups()
            ));
        }
        Ok(cfg)
    }

    pub fn groups(&self) -> usize {
        self.m / self.m1
    }

    /// Messages cached per owned group.
    pub fn per_group(&self) -> usize {
        self.m1 - self.m1 / self.r
    }

    pub fn d1(&self) -> usize {
        self.s / self.per_group()
    }

    pub fn d2(&self) -> usize {
        self.n * self.d1() / self.groups()
    }

    /// Messages of group g: the contiguous block g*m1 .. (g+1)*m1.
    pub fn group_messages(&self, g: usize) -> std::ops::Range<usize> {
        g * self.m1..(g + 1) * self.m1
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ConfigJson {
            m: self.m,
            n: self.n,
            s: self.s,
            m1: self.m1,
            r: self.r,
            t: self.t,
            seed: self.seed,
            outer: self.outer,
        })
        .expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, ShuffleError> {
        let raw: ConfigJson = serde_json::from_str(s).map_err(|e| ShuffleError::Json(e.to_string()))?;
        ShuffleConfig::new(raw.m, raw.n, raw.s, raw.m1, raw.r, raw.t, raw.seed, raw.outer)
    }
}

// ---------------------------------------------------------------------------
// Outer layer

/// Worker-to-group biadjacency structure with its derived adjacency lists and
/// the list of worker pairs sharing more than one group (4-cycles).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OuterLayer {
    pub b: Vec<Vec<u8>>,
    /// Per worker, owned groups.
    pub d: Vec<Vec<usize>>,
    /// Per group, attached workers.
    pub n_of_g: Vec<Vec<usize>>,
    /// Worker pairs with |D(i) ∩ D(i')| >= 2.
    pub c4_violations: Vec<(usize, usize)>,
}

impl OuterLayer {
    pub fn from_matrix(b: Vec<Vec<u8>>) -> Self {
        let n = b.len();
        let g = b.first().map_or(0, |r| r.len());
        let mut d = vec![Vec::new(); n];
        let mut n_of_g = vec![Vec::new(); g];
        for (i, row) in b.iter().enumerate() {
            for (j, &bit) in row.iter().enumerate() {
                if bit != 0 {
                    d[i].push(j);
                    n_of_g[j].push(i);
                }
            }
        }
        let mut c4_violations = Vec::new();
        for i in 0..n {
            for i2 in i + 1..n {
                let overlap = d[i].iter().filter(|x| d[i2].binary_search(x).is_ok()).count();
                if overlap >= 2 {
                    c4_violations.push((i, i2));
                }
            }
        }
        OuterLayer {
            b,
            d,
            n_of_g,
            c4_violations,
        }
    }

    pub fn workers(&self) -> usize {
        self.b.len()
    }

    pub fn groups(&self) -> usize {
        self.n_of_g.len()
    }

    pub fn is_c4_free(&self) -> bool {
        self.c4_violations.is_empty()
    }

    /// Count of groups per column degree, for irregular random layers.
    pub fn column_histogram(&self) -> Vec<(usize, usize)> {
        let mut hist = std::collections::BTreeMap::new();
        for col in &self.n_of_g {
            *hist.entry(col.len()).or_insert(0) += 1;
        }
        hist.into_iter().collect()
    }
}

/// Property report for an outer layer against expected degrees.
#[derive(Debug, Clone)]
pub struct OuterReport {
    pub rows_regular: bool,
    pub cols_regular: bool,
    pub c4_free: bool,
    pub violating_pairs: Vec<(usize, usize)>,
}

impl OuterReport {
    pub fn pass(&self) -> bool {
        self.rows_regular && self.cols_regular && self.c4_free
    }
}

pub fn verify_outer(outer: &OuterLayer, expect_d1: usize, expect_d2: usize) -> OuterReport {
    OuterReport {
        rows_regular: outer.d.iter().all(|row| row.len() == expect_d1),
        cols_regular: outer.n_of_g.iter().all(|col| col.len() == expect_d2),
        c4_free: outer.is_c4_free(),
        violating_pairs: outer.c4_violations.clone(),
    }
}

fn is_prime(k: usize) -> bool {
    k >= 2 && (2..k).take_while(|d| d * d <= k).all(|d| k % d != 0)
}

/// Gallager-style recursive construction of a C4-free biregular layer:
/// start from the 1 x d1 all-ones matrix; at each level with prime k, expand
/// every entry to a k x k block, mapping the t-th 1 of a row to the cyclic
/// shift P^(i*t) and stacking the variants i = 0..reps-1. Output has
/// n = prod(k_j * i_j) rows, G = d1 * prod(k_j) columns, column weight
/// prod(i_j); verified before return.
pub fn build_outer_recursive(
    d1: usize,
    primes: &[usize],
    reps: &[usize],
) -> Result<OuterLayer, ShuffleError> {
    if d1 == 0 {
        return Err(ShuffleError::BadConfig("d1 must be positive".into()));
    }
    if primes.len() != reps.len() {
        return Err(ShuffleError::BadConfig(
            "primes and repetitions must pair up".into(),
        ));
    }
    let mut b: Vec<Vec<u8>> = vec![vec![1; d1]];
    for (&k, &rep) in primes.iter().zip(reps) {
        if !is_prime(k) {
            return Err(ShuffleError::NotPrime(k));
        }
        if rep == 0 || rep > k {
            return Err(ShuffleError::BadRepetition { rep, k });
        }
        // Row weight stays d1 at every level; with k < d1 two of the block
        // shifts i*t coincide mod k and a 4-cycle appears across variants.
        if k < d1 {
            return Err(ShuffleError::BadConfig(format!(
                "prime {k} is below the row weight d1 = {d1}"
            )));
        }
        let cols = b[0].len();
        let mut next = Vec::with_capacity(b.len() * k * rep);
        for variant in 0..rep {
            for row in &b {
                let mut block_rows = vec![vec![0u8; cols * k]; k];
                let mut t = 0;
                for (col, &bit) in row.iter().enumerate() {
                    if bit == 0 {
                        continue;
                    }
                    let shift = (variant * t) % k;
                    for a in 0..k {
                        block_rows[a][col * k + (a + shift) % k] = 1;
                    }
                    t += 1;
                }
                next.extend(block_rows);
            }
        }
        b = next;
    }
    let expect_d2: usize = reps.iter().product();
    let outer = OuterLayer::from_matrix(b);
    let report = verify_outer(&outer, d1, expect_d2);
    if !report.pass() {
        return Err(ShuffleError::ConstructionFailed(format!(
            "rows_regular={} cols_regular={} c4_free={}",
            report.rows_regular, report.cols_regular, report.c4_free
        )));
    }
    Ok(outer)
}

/// Best-effort random layer: sample each worker's d1 groups uniformly,
/// count worker pairs sharing >= 2 groups, keep the best of `attempts`
/// samples, stopping early at `max_violations` or fewer. Column degrees are
/// not guaranteed regular; read `column_histogram` for the spread.
pub fn build_outer_random(
    n: usize,
    g: usize,
    d1: usize,
    max_violations: usize,
    seed: u64,
    attempts: usize,
) -> Result<OuterLayer, ShuffleError> {
    if d1 > g {
        return Err(ShuffleError::BadConfig(format!(
            "d1 = {d1} exceeds group count {g}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<OuterLayer> = None;
    for _ in 0..attempts.max(1) {
        let mut b = vec![vec![0u8; g]; n];
        for row in &mut b {
            for j in rand::seq::index::sample(&mut rng, g, d1) {
                row[j] = 1;
            }
        }
        let cand = OuterLayer::from_matrix(b);
        let better = best
            .as_ref()
            .map_or(true, |cur| cand.c4_violations.len() < cur.c4_violations.len());
        if better {
            let done = cand.c4_violations.len() <= max_violations;
            best = Some(cand);
            if done {
                break;
            }
        }
    }
    Ok(best.expect("attempts >= 1"))
}

/// Cyclic-code layer: stack all cyclic shifts of a base incidence row. The
/// base block must have a duplicate-free cyclic difference multiset, which is
/// exactly the C4-free condition for the shifted family.
pub fn build_outer_cyclic(base: &[u8]) -> Result<OuterLayer, ShuffleError> {
    let g = base.len();
    let support: Vec<usize> = (0..g).filter(|&j| base[j] != 0).collect();
    if support.len() < 2 {
        return Err(ShuffleError::BadBaseBlock("need weight >= 2".into()));
    }
    let mut diffs = std::collections::BTreeSet::new();
    for &a in &support {
        for &b in &support {
            if a != b {
                let d = (g + a - b) % g;
                if !diffs.insert(d) {
                    return Err(ShuffleError::BadBaseBlock(format!(
                        "cyclic difference {d} repeats; shifts would share two groups"
                    )));
                }
            }
        }
    }
    let mut rows = Vec::with_capacity(g);
    for shift in 0..g {
        let mut row = vec![0u8; g];
        for &p in &support {
            row[(p + shift) % g] = 1;
        }
        rows.push(row);
    }
    let outer = OuterLayer::from_matrix(rows);
    let report = verify_outer(&outer, support.len(), support.len());
    if !report.pass() {
        return Err(ShuffleError::ConstructionFailed(
            "cyclic stack not C4-free biregular".into(),
        ));
    }
    Ok(outer)
}

// ---------------------------------------------------------------------------
// Cache evolution

/// One inner-layer broadcast: r distinct messages of one group, summed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupTransmission {
    pub group: usize,
    pub messages: Vec<usize>,
}

/// One successful decode: the worker gained one message and dropped another
/// from the same transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeEvent {
    pub worker: usize,
    pub group: usize,
    pub gained: usize,
    pub dropped: usize,
}

fn check_dims(cfg: &ShuffleConfig, outer: &OuterLayer) -> Result<(), ShuffleError> {
    if outer.workers() != cfg.n || outer.groups() != cfg.groups() {
        return Err(ShuffleError::DimensionMismatch(format!(
            "outer is {}x{}, config wants {}x{}",
            outer.workers(),
            outer.groups(),
            cfg.n,
            cfg.groups()
        )));
    }
    Ok(())
}

fn check_balance(cfg: &ShuffleConfig, outer: &OuterLayer, caches: &[CacheState]) -> Result<(), ShuffleError> {
    for (i, cache) in caches.iter().enumerate() {
        let mut per_group = vec![0usize; cfg.groups()];
        for j in cache.iter_set() {
            per_group[j / cfg.m1] += 1;
        }
        for g in 0..cfg.groups() {
            let expected = if outer.d[i].binary_search(&g).is_ok() {
                cfg.per_group()
            } else {
                0
            };
            if per_group[g] != expected {
                return Err(ShuffleError::BalanceViolation { worker: i, group: g });
            }
        }
    }
    Ok(())
}

/// Fill each worker's cache with a uniform random w-subset of every owned
/// group's messages.
pub fn init_caches(
    cfg: &ShuffleConfig,
    outer: &OuterLayer,
    seed: u64,
) -> Result<Vec<CacheState>, ShuffleError> {
    check_dims(cfg, outer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = cfg.per_group();
    let mut caches = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let mut cache = CacheState::empty(cfg.m);
        for &g in &outer.d[i] {
            for idx in rand::seq::index::sample(&mut rng, cfg.m1, w) {
                cache.insert(g * cfg.m1 + idx);
            }
        }
        caches.push(cache);
    }
    Ok(caches)
}

/// A worker facing one transmission: decodes iff exactly one of the summed
/// messages is missing; it then stores that message and drops a uniform
/// choice among the transmission's other r-1 (all cached). Returns the
/// (gained, dropped) pair.
fn decode_step(cache: &mut CacheState, trans: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, usize)> {
    let missing: Vec<usize> = trans.iter().copied().filter(|&j| !cache.contains(j)).collect();
    if missing.len() != 1 {
        return None;
    }
    let gained = missing[0];
    let held: Vec<usize> = trans.iter().copied().filter(|&j| j != gained).collect();
    let dropped = held[rng.gen_range(0..held.len())];
    cache.insert(gained);
    cache.remove(dropped);
    Some((gained, dropped))
}

/// One shuffling iteration: one random r-sum per group, in group order;
/// workers of the group react in index order. Balance is checked on entry
/// and preserved by construction.
pub fn shuffle_iteration(
    caches: &[CacheState],
    cfg: &ShuffleConfig,
    outer: &OuterLayer,
    seed: u64,
) -> Result<(Vec<CacheState>, Vec<GroupTransmission>, Vec<DecodeEvent>), ShuffleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = caches.to_vec();
    let (transmissions, events) = iteration_step(&mut next, cfg, outer, &mut rng)?;
    Ok((next, transmissions, events))
}

fn iteration_step(
    caches: &mut [CacheState],
    cfg: &ShuffleConfig,
    outer: &OuterLayer,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<GroupTransmission>, Vec<DecodeEvent>), ShuffleError> {
    check_dims(cfg, outer)?;
    check_balance(cfg, outer, caches)?;
    let mut transmissions = Vec::with_capacity(cfg.groups());
    let mut events = Vec::new();
    for g in 0..cfg.groups() {
        let messages: Vec<usize> = rand::seq::index::sample(rng, cfg.m1, cfg.r)
            .into_iter()
            .map(|idx| g * cfg.m1 + idx)
            .collect();
        for &i in &outer.n_of_g[g] {
            if let Some((gained, dropped)) = decode_step(&mut caches[i], &messages, rng) {
                events.push(DecodeEvent {
                    worker: i,
                    group: g,
                    gained,
                    dropped,
                });
            }
        }
        transmissions.push(GroupTransmission { group: g, messages });
    }
    Ok((transmissions, events))
}

// ---------------------------------------------------------------------------
// Full runs and metrics

/// One metrics row per iteration, mirrored in the CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub run: usize,
    pub iter: usize,
    pub transmissions: usize,
    pub decodes: usize,
    pub avg_hamming_running: f64,
    pub c_budget_max: usize,
}

#[derive(Debug, Clone)]
pub struct ShuffleOutcome {
    pub outer: OuterLayer,
    /// States at t = 0 (initial) through t = T.
    pub history: ShuffleHistory,
    pub metrics: Vec<MetricsRow>,
    pub transmissions: Vec<Vec<GroupTransmission>>,
    pub events: Vec<Vec<DecodeEvent>>,
    /// Largest decoder count of any single transmission (soft-c budget;
    /// bounded by r*c in the paper's accounting, monitored here).
    pub c_budget_max: usize,
}

pub fn build_outer(cfg: &ShuffleConfig) -> Result<OuterLayer, ShuffleError> {
    match cfg.outer {
        OuterKind::Recursive => {
            let (primes, reps) = recursive_parameters(cfg)?;
            build_outer_recursive(cfg.d1(), &primes, &reps)
        }
        OuterKind::Random => build_outer_random(
            cfg.n,
            cfg.groups(),
            cfg.d1(),
            0,
            cfg.seed ^ 0x6f75_7465_72,
            2000,
        ),
        OuterKind::Cyclic => {
            // Base block: first d1 columns; workable only when its difference
            // multiset is clean and G = n, which the gate enforces.
            if cfg.n != cfg.groups() {
                return Err(ShuffleError::BadConfig(
                    "cyclic layer needs n equal to the group count".into(),
                ));
            }
            let mut block = vec![0u8; cfg.groups()];
            for p in perfect_ruler(cfg.d1()) {
                if p >= cfg.groups() {
                    return Err(ShuffleError::BadConfig(
                        "group count too small for a cyclic base block".into(),
                    ));
                }
                block[p] = 1;
            }
            build_outer_cyclic(&block)
        }
    }
}

/// A Sidon-style position set {0, 1, 3, 7, 12, ...} with pairwise-distinct
/// differences, enough for small d1.
fn perfect_ruler(weight: usize) -> Vec<usize> {
    let mut positions = vec![0usize];
    let mut diffs = std::collections::BTreeSet::new();
    let mut next = 1;
    while positions.len() < weight {
        let ok = positions.iter().all(|&p| {
            let d = next - p;
            !diffs.contains(&d)
        });
        if ok {
            for &p in &positions {
                diffs.insert(next - p);
            }
            positions.push(next);
        }
        next += 1;
    }
    positions
}

/// Factor G/d1 into primes and pick repetitions i_j <= k_j with
/// prod(k_j * i_j) = n, if any assignment exists.
fn recursive_parameters(cfg: &ShuffleConfig) -> Result<(Vec<usize>, Vec<usize>), ShuffleError> {
    let g = cfg.groups();
    let d1 = cfg.d1();
    if g % d1 != 0 {
        return Err(ShuffleError::BadConfig(format!(
            "d1 = {d1} must divide G = {g} for the recursive layer"
        )));
    }
    let mut rest = g / d1;
    let mut primes = Vec::new();
    let mut f = 2;
    while rest > 1 {
        while rest % f == 0 {
            primes.push(f);
            rest /= f;
        }
        f += 1;
    }
    fn assign(primes: &[usize], target: usize, acc: &mut Vec<usize>) -> bool {
        match primes.split_first() {
            None => target == 1,
            Some((&k, tail)) => {
                for i in 1..=k {
                    if (k * i) != 0 && target % (k * i) == 0 {
                        acc.push(i);
                        if assign(tail, target / (k * i), acc) {
                            return true;
                        }
                        acc.pop();
                    }
                }
                false
            }
        }
    }
    let mut reps = Vec::new();
    if !assign(&primes, cfg.n, &mut reps) {
        return Err(ShuffleError::BadConfig(format!(
            "no recursive layer with G = {g}, d1 = {d1} has n = {} rows",
            cfg.n
        )));
    }
    Ok((primes, reps))
}

/// Initialize and run T iterations, collecting states and per-iteration
/// metrics. Deterministic in (cfg, run_id): the RNG stream is seeded from
/// both.
pub fn run_shuffle(cfg: &ShuffleConfig, outer: &OuterLayer, run_id: usize) -> Result<ShuffleOutcome, ShuffleError> {
    check_dims(cfg, outer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(run_id as u64));
    let init_seed = rng.gen::<u64>();
    let mut caches = init_caches(cfg, outer, init_seed)?;
    let mut states: Vec<CacheState> = caches.clone();
    let mut metrics = Vec::with_capacity(cfg.t);
    let mut all_transmissions = Vec::with_capacity(cfg.t);
    let mut all_events = Vec::with_capacity(cfg.t);
    let mut c_budget_max = 0usize;
    for iter in 1..=cfg.t {
        let (transmissions, events) = iteration_step(&mut caches, cfg, outer, &mut rng)?;
        for tr in &transmissions {
            let decoders = events
                .iter()
                .filter(|e| e.group == tr.group)
                .count();
            c_budget_max = c_budget_max.max(decoders);
        }
        states.extend(caches.iter().cloned());
        let running =
            ShuffleHistory::new(iter + 1, cfg.n, states.clone())?.avg_hamming()?;
        metrics.push(MetricsRow {
            run: run_id,
            iter,
            transmissions: transmissions.len(),
            decodes: events.len(),
            avg_hamming_running: running,
            c_budget_max,
        });
        all_transmissions.push(transmissions);
        all_events.push(events);
    }
    let history = ShuffleHistory::new(cfg.t + 1, cfg.n, states)?;
    Ok(ShuffleOutcome {
        outer: outer.clone(),
        history,
        metrics,
        transmissions: all_transmissions,
        events: all_events,
        c_budget_max,
    })
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("run,iter,transmissions,decodes,avg_hamming_running,c_budget_max\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{}\n",
            r.run, r.iter, r.transmissions, r.decodes, r.avg_hamming_running, r.c_budget_max
        ));
    }
    out
}

/// Smallest Hamming distance between distinct workers at any one iteration.
pub fn min_cross_worker_distance(history: &ShuffleHistory) -> Result<usize, ShuffleError> {
    let mut best = usize::MAX;
    for t in 0..history.iterations() {
        for i in 0..history.workers() {
            for i2 in i + 1..history.workers() {
                let d = crate::model::hamming(history.state(t, i), history.state(t, i2))?;
                best = best.min(d);
            }
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Statistical checks

/// Exact Monte-Carlo estimate of the Lemma-5 decode event: exactly one of r
/// uniformly drawn distinct group messages lies outside a fixed cached
/// w-subset.
pub fn decode_probability_estimate(
    m1: usize,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<f64, ShuffleError> {
    if r < 1 || r > m1 || m1 % r != 0 {
        return Err(ShuffleError::BadConfig(format!(
            "need r dividing m1 with 1 <= r <= m1, got r = {r}, m1 = {m1}"
        )));
    }
    if trials == 0 {
        return Err(ShuffleError::BadConfig("trials must be >= 1".into()));
    }
    let w = m1 - m1 / r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..trials {
        let missing = rand::seq::index::sample(&mut rng, m1, r)
            .into_iter()
            .filter(|&j| j >= w)
            .count();
        if missing == 1 {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

/// Uniformity and reversibility diagnostics over many independent runs.
#[derive(Debug, Clone)]
pub struct RandomnessReport {
    /// Per requested timestamp: (t, chi-square statistic, p-value, pass).
    pub uniformity: Vec<(usize, f64, f64, bool)>,
    /// Transition pairs (v, v') with |freq(v->v') - freq(v'->v)| > 3 sigma.
    pub irreversible_pairs: Vec<(usize, usize)>,
    pub runs: usize,
}

/// Track worker 0's truncated state on its first owned group across many
/// seeded runs; chi-square the state distribution at the given timestamps
/// and compare forward/backward transition counts.
pub fn randomness_check(
    cfg: &ShuffleConfig,
    outer: &OuterLayer,
    runs: usize,
    timestamps: &[usize],
    significance: f64,
) -> Result<RandomnessReport, ShuffleError> {
    if runs < 1000 {
        return Err(ShuffleError::TooFewRuns {
            needed: 1000,
            got: runs,
        });
    }
    check_dims(cfg, outer)?;
    let group = *outer.d[0].first().ok_or_else(|| {
        ShuffleError::BadConfig("worker 0 owns no group".into())
    })?;
    let states = enumerate_states(cfg.m1, cfg.per_group());
    let index_of = |mask: u64| states.binary_search(&mask).expect("balanced state");
    let mut counts = vec![vec![0usize; states.len()]; timestamps.len()];
    let mut transitions = vec![vec![0usize; states.len()]; states.len()];
    for run in 0..runs {
        let outcome = run_shuffle(cfg, outer, run)?;
        let mut prev: Option<usize> = None;
        for t in 0..=cfg.t {
            let mask = truncated_mask(outcome.history.state(t, 0), cfg, group);
            let v = index_of(mask);
            if let Some(p) = prev {
                transitions[p][v] += 1;
            }
            prev = Some(v);
            if let Some(slot) = timestamps.iter().position(|&ts| ts == t) {
                counts[slot][v] += 1;
            }
        }
    }
    let expected = runs as f64 / states.len() as f64;
    let chi = ChiSquared::new((states.len() - 1) as f64)
        .map_err(|e| ShuffleError::BadConfig(e.to_string()))?;
    let uniformity = timestamps
        .iter()
        .zip(&counts)
        .map(|(&t, row)| {
            let stat: f64 = row
                .iter()
                .map(|&o| {
                    let d = o as f64 - expected;
                    d * d / expected
                })
                .sum();
            let p = 1.0 - chi.cdf(stat);
            (t, stat, p, p > significance)
        })
        .collect();
    let mut irreversible_pairs = Vec::new();
    for v in 0..states.len() {
        for v2 in v + 1..states.len() {
            let a = transitions[v][v2] as f64;
            let b = transitions[v2][v] as f64;
            let sigma = (a + b).sqrt().max(1.0);
            if (a - b).abs() > 3.0 * sigma {
                irreversible_pairs.push((v, v2));
            }
        }
    }
    Ok(RandomnessReport {
        uniformity,
        irreversible_pairs,
        runs,
    })
}

/// All balanced per-group states as bitmasks, ascending.
fn enumerate_states(m1: usize, w: usize) -> Vec<u64> {
    (0u64..(1 << m1))
        .filter(|mask| mask.count_ones() as usize == w)
        .collect()
}

fn truncated_mask(state: &CacheState, cfg: &ShuffleConfig, group: usize) -> u64 {
    let mut mask = 0u64;
    for (bit, j) in cfg.group_messages(group).enumerate() {
        if state.contains(j) {
            mask |= 1 << bit;
        }
    }
    mask
}

// ---------------------------------------------------------------------------
