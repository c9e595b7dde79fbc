//! Problem instances, their bipartite-graph view, instance generators,
//! cache states and the Hamming shuffle metric.
//!
//! Message and client indices are 0-based internally; the JSON interchange
//! format uses 1-based message indices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid edge probability {0}")]
    InvalidProbability(f64),
    #[error("n must be even and >= 2, got {0}")]
    OddN(usize),
    #[error("client {client}: request set invalid: {reason}")]
    BadRequestSet { client: usize, reason: String },
    #[error("instance parameter invalid: {0}")]
    BadParameter(String),
    #[error("cache state length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("history needs at least two (iteration, worker) slots")]
    TooFewSlots,
}

/// A constrained pliable index coding instance (m, n, {R_i}, c).
///
/// Side information S_i is always [m] \ R_i and never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PicInstance {
    m: usize,
    n: usize,
    c: usize,
    requests: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    m: usize,
    n: usize,
    c: usize,
    /// 1-based message indices.
    requests: Vec<Vec<usize>>,
}

impl PicInstance {
    pub fn new(m: usize, c: usize, requests: Vec<Vec<usize>>) -> Result<Self, ModelError> {
        if m == 0 {
            return Err(ModelError::BadParameter("m must be >= 1".into()));
        }
        if c == 0 {
            return Err(ModelError::BadParameter("c must be >= 1".into()));
        }
        let n = requests.len();
        if n == 0 {
            return Err(ModelError::BadParameter("n must be >= 1".into()));
        }
        let mut requests = requests;
        for (i, r) in requests.iter_mut().enumerate() {
            r.sort_unstable();
            r.dedup();
            if r.is_empty() {
                return Err(ModelError::BadRequestSet {
                    client: i,
                    reason: "empty".into(),
                });
            }
            if r.iter().any(|&j| j >= m) {
                return Err(ModelError::BadRequestSet {
                    client: i,
                    reason: format!("message index out of range (m = {m})"),
                });
            }
        }
        Ok(PicInstance { m, n, c, requests })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn with_c(&self, c: usize) -> Result<Self, ModelError> {
        Self::new(self.m, c, self.requests.clone())
    }

    /// Request set of client i, sorted ascending.
    pub fn request_set(&self, i: usize) -> &[usize] {
        &self.requests[i]
    }

    pub fn requests(&self) -> &[Vec<usize>] {
        &self.requests
    }

    pub fn wants(&self, client: usize, message: usize) -> bool {
        self.requests[client].binary_search(&message).is_ok()
    }

    /// Side information of client i, derived on demand.
    pub fn side_information(&self, i: usize) -> Vec<usize> {
        (0..self.m).filter(|j| !self.wants(i, *j)).collect()
    }

    pub fn to_json(&self) -> String {
        let raw = InstanceJson {
            m: self.m,
            n: self.n,
            c: self.c,
            requests: self
                .requests
                .iter()
                .map(|r| r.iter().map(|&j| j + 1).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("instance serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let raw: InstanceJson = serde_json::from_str(s)
            .map_err(|e| ModelError::BadParameter(format!("bad instance JSON: {e}")))?;
        if raw.requests.len() != raw.n {
            return Err(ModelError::BadParameter(format!(
                "n = {} but {} request sets",
                raw.n,
                raw.requests.len()
            )));
        }
        let requests = raw
            .requests
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.iter()
                    .map(|&j| {
                        if j == 0 || j > raw.m {
                            Err(ModelError::BadRequestSet {
                                client: i,
                                reason: format!("1-based index {j} out of range"),
                            })
                        } else {
                            Ok(j - 1)
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(raw.m, raw.c, requests)
    }
}

/// Adjacency-list view of the instance's bipartite graph: clients on one
/// side, the messages they do not have on the other.
#[derive(Debug, Clone)]
pub struct BipartiteView {
    /// Per message, the clients requesting it.
    pub message_clients: Vec<Vec<usize>>,
    /// Per client, its request set (mirror of the instance).
    pub client_messages: Vec<Vec<usize>>,
}

impl BipartiteView {
    pub fn of(inst: &PicInstance) -> Self {
        let mut message_clients = vec![Vec::new(); inst.m()];
        for i in 0..inst.n() {
            for &j in inst.request_set(i) {
                message_clients[j].push(i);
            }
        }
        BipartiteView {
            message_clients,
            client_messages: inst.requests.clone(),
        }
    }

    pub fn message_degree(&self, j: usize) -> usize {
        self.message_clients[j].len()
    }
}

/// Random bipartite instance B(m, n, p): each (client, message) edge present
/// independently with probability p. Clients that would end up with an empty
/// request set are resampled; the resample count is returned alongside.
pub fn random_instance(
    m: usize,
    n: usize,
    p: f64,
    c: usize,
    seed: u64,
) -> Result<(PicInstance, usize), ModelError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(ModelError::InvalidProbability(p));
    }
    if m == 0 || n == 0 {
        return Err(ModelError::BadParameter("m, n must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut resamples = 0usize;
    let mut requests = Vec::with_capacity(n);
    for _ in 0..n {
        loop {
            let r: Vec<usize> = (0..m).filter(|_| rng.gen_bool(p)).collect();
            if !r.is_empty() {
                requests.push(r);
                break;
            }
            resamples += 1;
        }
    }
    Ok((PicInstance::new(m, c, requests)?, resamples))
}

/// The m = n construction where 1-constrained pliable coding needs only two
/// transmissions while uncoded delivery needs n.
pub fn sec3b_instance(n: usize) -> Result<PicInstance, ModelError> {
    if n < 2 || n % 2 != 0 {
        return Err(ModelError::OddN(n));
    }
    let half = n / 2;
    let mut requests = Vec::with_capacity(n);
    for i in 0..half {
        let mut r: Vec<usize> = (0..half).collect();
        r.push(half + i);
        requests.push(r);
    }
    for i in half..n {
        let mut r = vec![i - half];
        r.extend(half..n);
        requests.push(r);
    }
    PicInstance::new(n, 1, requests)
}

/// Cache indicator z: bit j set iff message j is cached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheState {
    bits: Vec<bool>,
}

impl CacheState {
    pub fn empty(m: usize) -> Self {
        CacheState {
            bits: vec![false; m],
        }
    }

    pub fn from_set(m: usize, cached: &[usize]) -> Self {
        let mut s = Self::empty(m);
        for &j in cached {
            s.bits[j] = true;
        }
        s
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        CacheState { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.bits[j]
    }

    pub fn insert(&mut self, j: usize) {
        self.bits[j] = true;
    }

    pub fn remove(&mut self, j: usize) {
        self.bits[j] = false;
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
    }

    pub fn bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Number of positions where two cache states differ.
pub fn hamming(a: &CacheState, b: &CacheState) -> Result<usize, ModelError> {
    if a.len() != b.len() {
        return Err(ModelError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.bits.iter().zip(&b.bits).filter(|(x, y)| x != y).count())
}

/// Cache states for every (iteration, worker) slot of a run.
#[derive(Debug, Clone)]
pub struct ShuffleHistory {
    iterations: usize,
    workers: usize,
    states: Vec<CacheState>,
}

impl ShuffleHistory {
    pub fn new(iterations: usize, workers: usize, states: Vec<CacheState>) -> Result<Self, ModelError> {
        if iterations == 0 || workers == 0 {
            return Err(ModelError::BadParameter("T >= 1 and n >= 1 required".into()));
        }
        if states.len() != iterations * workers {
            return Err(ModelError::BadParameter(format!(
                "expected {} states, got {}",
                iterations * workers,
                states.len()
            )));
        }
        let m = states[0].len();
        if states.iter().any(|s| s.len() != m) {
            return Err(ModelError::BadParameter("ragged cache states".into()));
        }
        Ok(ShuffleHistory {
            iterations,
            workers,
            states,
        })
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn state(&self, t: usize, i: usize) -> &CacheState {
        &self.states[t * self.workers + i]
    }

    /// Mean Hamming distance over all unordered pairs of distinct
    /// (iteration, worker) slots, normalized by C(Tn, 2).
    pub fn avg_hamming(&self) -> Result<f64, ModelError> {
        let slots = self.iterations * self.workers;
        if slots < 2 {
            return Err(ModelError::TooFewSlots);
        }
        let mut total = 0usize;
        for a in 0..slots {
            for b in (a + 1)..slots {
                total += hamming(&self.states[a], &self.states[b])?;
            }
        }
        let pairs = slots * (slots - 1) / 2;
        Ok(total as f64 / pairs as f64)
    }

    /// History CSV rows `t,i,bitstring` (header included).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,i,bitstring\n");
        for t in 0..self.iterations {
            for i in 0..self.workers {
                out.push_str(&format!("{},{},{}\n", t, i, self.state(t, i).bitstring()));
            }
        }
        out
    }
}
