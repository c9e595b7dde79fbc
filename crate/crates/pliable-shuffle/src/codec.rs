//! Coding schemes, the decoding criterion, c-constrained satisfiability via
//! capacitated bipartite matching, and end-to-end encode/decode simulation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::{self, Field, GfError, GfMatrix};
use crate::model::PicInstance;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("scheme has {0} columns but instance has m = {1}")]
    ColumnMismatch(usize, usize),
    #[error("client {0} has an empty decodable set")]
    NothingDecodable(usize),
    #[error(transparent)]
    Gf(#[from] GfError),
    #[error("bad scheme JSON: {0}")]
    BadJson(String),
}

/// An L x m coding matrix over GF(q). Transmission l is row l of the matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodingScheme {
    a: GfMatrix,
}

#[derive(Serialize, Deserialize)]
struct SchemeJson {
    q: u32,
    #[serde(rename = "L")]
    l: usize,
    rows: Vec<Vec<u32>>,
}

impl CodingScheme {
    pub fn new(a: GfMatrix) -> Self {
        assert!(a.rows() >= 1, "code length L must be >= 1");
        CodingScheme { a }
    }

    /// The 1-row scheme summing (coefficient 1) the given messages.
    pub fn coefficient_one_sum(field: Field, m: usize, messages: &[usize]) -> Self {
        let mut a = GfMatrix::zero(field, 1, m);
        for &j in messages {
            a.set(0, j, 1);
        }
        CodingScheme { a }
    }

    /// Stack the rows of several schemes into one.
    pub fn stack(schemes: &[CodingScheme]) -> Self {
        let mut it = schemes.iter();
        let first = it.next().expect("at least one scheme").a.clone();
        let a = it.fold(first, |acc, s| acc.vstack(&s.a).expect("same width"));
        CodingScheme { a }
    }

    pub fn matrix(&self) -> &GfMatrix {
        &self.a
    }

    pub fn length(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.a.cols()
    }

    pub fn q(&self) -> u32 {
        self.a.field().modulus()
    }

    /// Messages with a nonzero coefficient in row `l`.
    pub fn row_support(&self, l: usize) -> Vec<usize> {
        (0..self.m()).filter(|&j| self.a.get(l, j) != 0).collect()
    }

    pub fn to_json(&self) -> String {
        let raw = SchemeJson {
            q: self.q(),
            l: self.length(),
            rows: (0..self.length()).map(|l| self.a.row_slice(l).to_vec()).collect(),
        };
        serde_json::to_string_pretty(&raw).expect("scheme serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, CodecError> {
        let raw: SchemeJson = serde_json::from_str(s).map_err(|e| CodecError::BadJson(e.to_string()))?;
        let field = Field::new(raw.q)?;
        if raw.rows.len() != raw.l || raw.l == 0 {
            return Err(CodecError::BadJson(format!(
                "L = {} but {} rows",
                raw.l,
                raw.rows.len()
            )));
        }
        Ok(CodingScheme {
            a: GfMatrix::from_rows(field, &raw.rows)?,
        })
    }
}

/// Per-client satisfied-message choice j_i, with multiplicity at most c.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub assigned: Vec<usize>,
}

/// Outcome of [`verify_scheme`]: either a witness assignment or the set of
/// clients that cannot be matched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyOutcome {
    Satisfied(Assignment),
    Unsatisfied { unmatched: Vec<usize> },
}

impl VerifyOutcome {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, VerifyOutcome::Satisfied(_))
    }

    pub fn assignment(&self) -> Option<&Assignment> {
        match self {
            VerifyOutcome::Satisfied(a) => Some(a),
            VerifyOutcome::Unsatisfied { .. } => None,
        }
    }
}

/// x = Ab over GF(q).
pub fn encode(scheme: &CodingScheme, b: &[u32]) -> Result<Vec<u32>, CodecError> {
    Ok(scheme.a.mul_vec(b)?)
}

/// Messages j in R_i whose column lies outside the span of the other
/// request-set columns; exactly the messages client i can decode.
pub fn decodable_set(scheme: &CodingScheme, inst: &PicInstance, i: usize) -> Result<Vec<usize>, CodecError> {
    if scheme.m() != inst.m() {
        return Err(CodecError::ColumnMismatch(scheme.m(), inst.m()));
    }
    let request = inst.request_set(i);
    let flags = gf::independent_columns(&scheme.a, request);
    Ok(request
        .iter()
        .zip(flags)
        .filter_map(|(&j, ok)| ok.then_some(j))
        .collect())
}

/// Kuhn-style augmenting matching of clients to messages with per-message
/// capacities. Clients are processed in index order and adjacency lists are
/// ascending, so the witness is deterministic.
pub(crate) fn capacitated_matching(
    adj: &[Vec<usize>],
    m: usize,
    caps: &[usize],
) -> (Vec<Option<usize>>, Vec<usize>) {
    let n = adj.len();
    let mut matched: Vec<Option<usize>> = vec![None; n];
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut unmatched = Vec::new();

    fn try_assign(
        client: usize,
        adj: &[Vec<usize>],
        caps: &[usize],
        matched: &mut Vec<Option<usize>>,
        holders: &mut Vec<Vec<usize>>,
        visited: &mut Vec<bool>,
    ) -> bool {
        for &j in &adj[client] {
            if visited[j] {
                continue;
            }
            visited[j] = true;
            if holders[j].len() < caps[j] {
                holders[j].push(client);
                matched[client] = Some(j);
                return true;
            }
            for slot in 0..holders[j].len() {
                let other = holders[j][slot];
                if try_assign(other, adj, caps, matched, holders, visited) {
                    holders[j][slot] = client;
                    matched[client] = Some(j);
                    return true;
                }
            }
        }
        false
    }

    for i in 0..n {
        let mut visited = vec![false; m];
        if !try_assign(i, adj, caps, &mut matched, &mut holders, &mut visited) {
            unmatched.push(i);
        }
    }
    (matched, unmatched)
}

/// Decide whether the scheme satisfies every client of the instance under
/// the c-constraint (the Lemma-1 criterion plus a capacitated system of
/// distinct representatives).
pub fn verify_scheme(scheme: &CodingScheme, inst: &PicInstance) -> Result<VerifyOutcome, CodecError> {
    let adj: Vec<Vec<usize>> = (0..inst.n())
        .map(|i| decodable_set(scheme, inst, i))
        .collect::<Result<_, _>>()?;
    let (matched, unmatched) = capacitated_matching(&adj, inst.m(), &vec![inst.c(); inst.m()]);
    if unmatched.is_empty() {
        Ok(VerifyOutcome::Satisfied(Assignment {
            assigned: matched.into_iter().map(|j| j.expect("all matched")).collect(),
        }))
    } else {
        Ok(VerifyOutcome::Unsatisfied { unmatched })
    }
}

/// Does any valid assignment exist at all, ignoring coding? True iff a
/// capacitated matching client -> request-set message saturates all clients.
/// A satisfiable instance always admits the uncoded scheme over its
/// assignment, so this decides feasibility of the instance itself.
pub fn is_satisfiable(inst: &PicInstance) -> bool {
    let adj: Vec<Vec<usize>> = (0..inst.n()).map(|i| inst.request_set(i).to_vec()).collect();
    capacitated_matching(&adj, inst.m(), &vec![inst.c(); inst.m()])
        .1
        .is_empty()
}

/// Simulate client i: strip side information from the transmissions, then
/// solve for one new message. `b_full` supplies the message values; only the
/// side-information entries are read (plus the target for assertions in
/// tests). Returns (message index, decoded value).
pub fn client_decode(
    scheme: &CodingScheme,
    x: &[u32],
    inst: &PicInstance,
    i: usize,
    b_full: &[u32],
    target: Option<usize>,
) -> Result<(usize, u32), CodecError> {
    if scheme.m() != inst.m() {
        return Err(CodecError::ColumnMismatch(scheme.m(), inst.m()));
    }
    let decodable = decodable_set(scheme, inst, i)?;
    if decodable.is_empty() {
        return Err(CodecError::NothingDecodable(i));
    }
    let j_star = match target {
        Some(j) if decodable.contains(&j) => j,
        Some(_) | None => decodable[0],
    };
    let field = scheme.a.field();
    // x^(i)_l = x_l - sum_{j in S_i} a_{lj} b_j
    let request = inst.request_set(i);
    let mut x_i = x.to_vec();
    for j in inst.side_information(i) {
        for l in 0..scheme.length() {
            let contrib = field.mul(scheme.a.get(l, j), b_full[j]);
            x_i[l] = field.sub(x_i[l], contrib);
        }
    }
    let sub_rows: Vec<Vec<u32>> = (0..scheme.length())
        .map(|l| request.iter().map(|&j| scheme.a.get(l, j)).collect())
        .collect();
    let a_sub = GfMatrix::from_rows(field, &sub_rows)?;
    let pos = request.binary_search(&j_star).expect("target in request set");
    let value = gf::solve_for(&a_sub, &x_i, pos)?;
    Ok((j_star, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sec3b_instance;

    fn sec3b4_scheme() -> CodingScheme {
        let a = GfMatrix::from_rows(Field::gf2(), &[vec![0, 0, 1, 1], vec![1, 1, 0, 0]]).unwrap();
        CodingScheme::new(a)
    }

    #[test]
    fn encode_examples() {
        let ident = CodingScheme::new(GfMatrix::identity(Field::gf2(), 3));
        assert_eq!(encode(&ident, &[1, 0, 1]).unwrap(), vec![1, 0, 1]);
        let s = sec3b4_scheme();
        assert_eq!(encode(&s, &[1, 0, 1, 0]).unwrap(), vec![1, 1]);
        let zero = CodingScheme::new(GfMatrix::zero(Field::gf2(), 2, 3));
        assert_eq!(encode(&zero, &[1, 1, 1]).unwrap(), vec![0, 0]);
        assert!(encode(&s, &[1, 0]).is_err());
    }

    #[test]
    fn decodable_sets_sec3b() {
        let inst = sec3b_instance(4).unwrap();
        let s = sec3b4_scheme();
        // client 0 (R = {1,2,3} 1-based): only message 3 decodable
        assert_eq!(decodable_set(&s, &inst, 0).unwrap(), vec![2]);
        assert_eq!(decodable_set(&s, &inst, 2).unwrap(), vec![0]);
        let zero = CodingScheme::new(GfMatrix::zero(Field::gf2(), 2, 4));
        assert_eq!(decodable_set(&zero, &inst, 0).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn verify_sec3b() {
        let inst = sec3b_instance(4).unwrap();
        let s = sec3b4_scheme();
        let out = verify_scheme(&s, &inst).unwrap();
        let a = out.assignment().expect("satisfied");
        assert_eq!(a.assigned, vec![2, 3, 0, 1]);
    }

    #[test]
    fn verify_pigeonhole() {
        let inst = PicInstance::new(1, 1, vec![vec![0], vec![0]]).unwrap();
        let s = CodingScheme::new(GfMatrix::from_rows(Field::gf2(), &[vec![1]]).unwrap());
        match verify_scheme(&s, &inst).unwrap() {
            VerifyOutcome::Unsatisfied { unmatched } => assert_eq!(unmatched, vec![1]),
            _ => panic!("capacity 1 cannot serve two clients"),
        }
        let inst2 = inst.with_c(2).unwrap();
        let out = verify_scheme(&s, &inst2).unwrap();
        assert_eq!(out.assignment().unwrap().assigned, vec![0, 0]);
        assert!(!is_satisfiable(&inst));
        assert!(is_satisfiable(&inst2));
    }

    #[test]
    fn decode_sec3b_client0() {
        let inst = sec3b_instance(4).unwrap();
        let s = sec3b4_scheme();
        let b = [0, 1, 1, 0];
        let x = encode(&s, &b).unwrap();
        let (j, v) = client_decode(&s, &x, &inst, 0, &b, None).unwrap();
        assert_eq!((j, v), (2, 1));
    }

    #[test]
    fn decode_single_transmission() {
        // A = [1, 0], client with side information {2} (so R = {1}).
        let inst = PicInstance::new(2, 1, vec![vec![0]]).unwrap();
        let s = CodingScheme::new(GfMatrix::from_rows(Field::gf2(), &[vec![1, 0]]).unwrap());
        let b = [1, 0];
        let x = encode(&s, &b).unwrap();
        assert_eq!(client_decode(&s, &x, &inst, 0, &b, None).unwrap(), (0, 1));
    }

    #[test]
    fn decode_nothing_decodable() {
        let inst = sec3b_instance(4).unwrap();
        let zero = CodingScheme::new(GfMatrix::zero(Field::gf2(), 2, 4));
        let err = client_decode(&zero, &[0, 0], &inst, 0, &[0; 4], None);
        assert_eq!(err, Err(CodecError::NothingDecodable(0)));
    }

    #[test]
    fn round_trip_all_b_vectors() {
        // Every accepted scheme decodes b[j_i] for every message vector.
        let inst = sec3b_instance(4).unwrap();
        let s = sec3b4_scheme();
        let assignment = verify_scheme(&s, &inst).unwrap().assignment().unwrap().clone();
        for bits in 0..16u32 {
            let b: Vec<u32> = (0..4).map(|j| (bits >> j) & 1).collect();
            let x = encode(&s, &b).unwrap();
            for i in 0..4 {
                let j_i = assignment.assigned[i];
                let (j, v) = client_decode(&s, &x, &inst, i, &b, Some(j_i)).unwrap();
                assert_eq!(j, j_i);
                assert_eq!(v, b[j_i]);
            }
        }
    }

    #[test]
    fn monotone_in_c() {
        let inst = sec3b_instance(4).unwrap();
        let s = sec3b4_scheme();
        for c in 1..4 {
            let relaxed = inst.with_c(c).unwrap();
            assert!(verify_scheme(&s, &relaxed).unwrap().is_satisfied());
        }
    }

    #[test]
    fn scheme_json_round_trip() {
        let s = sec3b4_scheme();
        let text = s.to_json();
        assert!(text.contains("\"q\": 2"));
        let back = CodingScheme::from_json(&text).unwrap();
        assert_eq!(s, back);
    }
}
