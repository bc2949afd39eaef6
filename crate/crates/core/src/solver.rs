//! End-to-end recovery of the hidden shift `s = s1‖s2`.
//!
//! The distributed solver samples `y ∈ s1^⊥` from circuit runs, keeps the
//! samples in a [`Gf2Basis`], and takes `s1` from the null space once the rank
//! is high enough. `s2` then comes from a handful of classical queries, and the
//! whole candidate is checked against the oracles before it is reported, so a
//! verified report is always correct.
//!
//! For `s2` the solver compares `f_w(s1)` with `f(0^n)`: under the promise
//! the only `w` with `f(s1‖w) = f(0^n)` is `s2`. Looking for a collision among
//! the zero-prefix values `f(0^{n−t}‖w)` only works when `s1 = 0^{n−t}` and
//! is used in that case alone.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::circuit::{sample_outcome, CostLedger, CostModel};
use crate::error::{Error, Result};
use crate::gf2::{BitString, Gf2Basis};
use crate::instance::{NodeNetwork, SimonFunction};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Distributed,
    Centralized,
    Classical,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::Distributed,
        Algorithm::Centralized,
        Algorithm::Classical,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Distributed => "distributed",
            Algorithm::Centralized => "centralized",
            Algorithm::Classical => "classical",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm {s:?}")))
    }
}

/// Per-node query counts, serialized as an object keyed by node id text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeCounts {
    t: usize,
    counts: Vec<u64>,
}

impl NodeCounts {
    pub fn new(t: usize, counts: Vec<u64>) -> Self {
        assert_eq!(counts.len(), 1 << t);
        NodeCounts { t, counts }
    }

    pub fn get(&self, w: &BitString) -> u64 {
        assert_eq!(w.len(), self.t);
        self.counts[w.value() as usize]
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn max(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

impl Serialize for NodeCounts {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.counts.len()))?;
        for (w, c) in self.counts.iter().enumerate() {
            map.serialize_entry(&BitString::from_value(self.t, w as u64).to_string(), c)?;
        }
        map.end()
    }
}

/// Outcome of one solver invocation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub n: usize,
    pub m: usize,
    pub t: usize,
    pub seed: u64,
    pub recovered_s: Option<BitString>,
    pub s1: Option<BitString>,
    pub s2: Option<BitString>,
    pub runs: u64,
    pub node_queries: NodeCounts,
    pub extra_classical_queries: u64,
    pub teleported_qubits: u64,
    pub ebits: u64,
    pub classical_bits: u64,
    pub verified: bool,
    pub wall_time_ms: Option<u64>,
}

impl RunReport {
    pub fn total_queries(&self) -> u64 {
        self.node_queries.total()
    }
}

/// How a zero candidate is confirmed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZeroCheck {
    /// Queries all `2^n` points and requires them distinct. Test use only.
    Exhaustive,
    /// Queries the `2^t` zero-prefix points `0^{n−t}‖w` and `1^n`, and
    /// requires those `2^t + 1` values distinct.
    SpotCheck,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Defaults to `4·(n − t) + 20`.
    pub max_runs: Option<u64>,
    pub cost_model: CostModel,
    pub zero_check: ZeroCheck,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_runs: None,
            cost_model: CostModel::default(),
            zero_check: ZeroCheck::SpotCheck,
        }
    }
}

pub fn default_max_runs(n: usize, t: usize) -> u64 {
    4 * (n - t) as u64 + 20
}

/// Finds `s2` given `s1`, using at most `2^t + 1` oracle queries.
pub fn recover_s2(network: &NodeNetwork, s1: &BitString) -> Result<BitString> {
    let (n, t) = (network.n(), network.t());
    let k = n - t;
    if s1.len() != k {
        return Err(Error::invalid(format!(
            "s1 has {} bits, expected {k}",
            s1.len()
        )));
    }
    let origin = network
        .node(&BitString::zeros(t))?
        .query(&BitString::zeros(k))?;
    if s1.is_zero() {
        // a zero-prefix collision f(0‖w1) = f(0‖w2) means s2 = w1 ⊕ w2; with
        // w1 = 0^t one pass over the other nodes suffices
        let mut hits = Vec::new();
        for node in &network.nodes()[1..] {
            if node.query(s1)? == origin {
                hits.push(node.id());
            }
        }
        return match hits.as_slice() {
            [] => Ok(BitString::zeros(t)),
            [w] => Ok(*w),
            _ => Err(Error::promise(format!(
                "{} zero-prefix points collide with f(0^n)",
                hits.len()
            ))),
        };
    }
    let mut hits = Vec::new();
    for node in network.nodes() {
        if node.query(s1)? == origin {
            hits.push(node.id());
        }
    }
    match hits.as_slice() {
        [w] => Ok(*w),
        [] => Err(Error::promise(format!("no node w has f({s1}‖w) = f(0^n)"))),
        _ => Err(Error::promise(format!(
            "{} nodes w have f({s1}‖w) = f(0^n)",
            hits.len()
        ))),
    }
}

/// Checks a candidate shift against the oracles.
pub fn verify_solution(
    network: &NodeNetwork,
    candidate: &BitString,
    zero_check: ZeroCheck,
) -> Result<bool> {
    let (n, t) = (network.n(), network.t());
    if candidate.len() != n {
        return Err(Error::invalid(format!(
            "candidate has {} bits, expected {n}",
            candidate.len()
        )));
    }
    let k = n - t;
    if !candidate.is_zero() {
        let (s1, s2) = candidate.split_at(k)?;
        let origin = network
            .node(&BitString::zeros(t))?
            .query(&BitString::zeros(k))?;
        let image = network.node(&s2)?.query(&s1)?;
        return Ok(origin == image);
    }
    let points: Vec<BitString> = match zero_check {
        ZeroCheck::Exhaustive => BitString::all(n).collect(),
        ZeroCheck::SpotCheck => BitString::all(t)
            .map(|w| BitString::zeros(k).concat(&w))
            .chain(std::iter::once(Ok(BitString::ones(n))))
            .collect::<Result<_>>()?,
    };
    let mut seen = HashMap::with_capacity(points.len());
    for x in points {
        let (u, w) = x.split_at(k)?;
        let v = network.node(&w)?.query(&u)?;
        if seen.insert(v, x).is_some() {
            return Ok(false);
        }
    }
    Ok(true)
}

struct Snapshot {
    counts: Vec<u64>,
    started: Instant,
}

impl Snapshot {
    fn take(network: &NodeNetwork) -> Self {
        Snapshot {
            counts: network.query_counts(),
            started: Instant::now(),
        }
    }

    fn node_counts(&self, network: &NodeNetwork) -> NodeCounts {
        let now = network.query_counts();
        NodeCounts::new(
            network.t(),
            now.iter().zip(&self.counts).map(|(a, b)| a - b).collect(),
        )
    }
}

/// Las Vegas solver over the node oracles of one split.
pub fn solve_distributed(
    network: &NodeNetwork,
    seed: u64,
    options: &SolveOptions,
) -> Result<RunReport> {
    run_quantum(network, seed, options, Algorithm::Distributed)
}

/// The unsplit baseline: the same pipeline with a single node holding all of `f`.
pub fn solve_centralized(
    f: &SimonFunction,
    seed: u64,
    options: &SolveOptions,
) -> Result<RunReport> {
    let network = NodeNetwork::split(f, 0)?;
    run_quantum(&network, seed, options, Algorithm::Centralized)
}

fn run_quantum(
    network: &NodeNetwork,
    seed: u64,
    options: &SolveOptions,
    algorithm: Algorithm,
) -> Result<RunReport> {
    let (n, t) = (network.n(), network.t());
    let k = n - t;
    let max_runs = options.max_runs.unwrap_or_else(|| default_max_runs(n, t));
    if max_runs < k as u64 {
        return Err(Error::invalid(format!(
            "max_runs = {max_runs} is below n − t = {k}"
        )));
    }
    let snapshot = Snapshot::take(network);
    let mut rng = rng::seeded(seed);
    let mut ledger = CostLedger::with_model(t, options.cost_model);
    let mut basis = Gf2Basis::new(k)?;
    let mut candidate_tried = false;

    let finish = |s1: BitString, s2: BitString, ledger: &CostLedger| -> Result<RunReport> {
        let s = s1.concat(&s2)?;
        let verified = verify_solution(network, &s, options.zero_check)?;
        let node_queries = snapshot.node_counts(network);
        let circuit_queries = 2 * ledger.runs * (1u64 << t);
        Ok(RunReport {
            algorithm,
            n,
            m: network.m(),
            t,
            seed,
            recovered_s: verified.then_some(s),
            s1: Some(s1),
            s2: Some(s2),
            runs: ledger.runs,
            extra_classical_queries: node_queries.total() - circuit_queries,
            node_queries,
            teleported_qubits: ledger.teleported_qubits,
            ebits: ledger.ebits,
            classical_bits: ledger.classical_bits,
            verified,
            wall_time_ms: Some(snapshot.started.elapsed().as_millis() as u64),
        })
    };

    while ledger.runs < max_runs {
        let y = sample_outcome(network, &mut rng, &mut ledger)?;
        if basis.insert(y)? {
            candidate_tried = false;
        }
        if basis.rank() == k {
            // only 0 is orthogonal to everything
            let s1 = BitString::zeros(k);
            let s2 = recover_s2(network, &s1)?;
            let report = finish(s1, s2, &ledger)?;
            if !report.verified {
                return Err(Error::promise(format!(
                    "candidate {}{} failed verification",
                    s1, s2
                )));
            }
            return Ok(report);
        }
        if basis.rank() + 1 == k && !candidate_tried {
            candidate_tried = true;
            let s1 = basis.null_space()[0];
            match recover_s2(network, &s1) {
                Ok(s2) => {
                    let report = finish(s1, s2, &ledger)?;
                    if report.verified {
                        return Ok(report);
                    }
                }
                // the candidate is wrong when s1 = 0; keep sampling
                Err(Error::PromiseViolation(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Err(Error::BudgetExhausted {
        max_runs,
        rank: basis.rank(),
        target: k,
    })
}

/// Draws distinct values from `0..len` without replacement, lazily.
struct LazyPermutation {
    len: u64,
    drawn: u64,
    swaps: HashMap<u64, u64>,
}

impl LazyPermutation {
    fn new(len: u64) -> Self {
        LazyPermutation {
            len,
            drawn: 0,
            swaps: HashMap::new(),
        }
    }

    fn next<R: Rng>(&mut self, rng: &mut R) -> Option<u64> {
        if self.drawn == self.len {
            return None;
        }
        let i = self.drawn;
        let j = rng.random_range(i..self.len);
        let at_j = *self.swaps.get(&j).unwrap_or(&j);
        let at_i = *self.swaps.get(&i).unwrap_or(&i);
        self.swaps.insert(j, at_i);
        self.drawn += 1;
        Some(at_j)
    }
}

/// Birthday-style collision search spread round-robin over the nodes.
///
/// Each node draws fresh inputs without replacement. The first repeated
/// value reveals `s = x ⊕ y`; after `2^{n−1} + 1` distinct points without a
/// repeat the function is injective and `s = 0^n`.
pub fn solve_classical(network: &NodeNetwork, seed: u64) -> Result<RunReport> {
    let (n, t) = (network.n(), network.t());
    let k = n - t;
    let snapshot = Snapshot::take(network);
    let mut rng = rng::seeded(seed);
    let mut draws: Vec<LazyPermutation> = (0..1u64 << t)
        .map(|_| LazyPermutation::new(1 << k))
        .collect();
    let mut seen: HashMap<BitString, BitString> = HashMap::new();
    let limit = (1u64 << (n - 1)) + 1;
    let mut found = BitString::zeros(n);
    let mut asked = 0u64;
    while asked < limit {
        let w = (asked % (1u64 << t)) as usize;
        asked += 1;
        let u = draws[w]
            .next(&mut rng)
            .expect("round-robin never exhausts a node before the limit");
        let node = &network.nodes()[w];
        let x = BitString::from_value(k, u).concat(&node.id())?;
        let v = node.query(&BitString::from_value(k, u))?;
        if let Some(prev) = seen.insert(v, x) {
            found = prev.xor(&x)?;
            break;
        }
    }
    let (s1, s2) = found.split_at(k)?;
    let node_queries = snapshot.node_counts(network);
    Ok(RunReport {
        algorithm: Algorithm::Classical,
        n,
        m: network.m(),
        t,
        seed,
        recovered_s: Some(found),
        s1: Some(s1),
        s2: Some(s2),
        runs: 0,
        extra_classical_queries: node_queries.total(),
        node_queries,
        teleported_qubits: 0,
        ebits: 0,
        classical_bits: 0,
        verified: true,
        wall_time_ms: Some(snapshot.started.elapsed().as_millis() as u64),
    })
}

/// Runs `algorithm` on `f` split at `t` (ignored by the centralized solver).
pub fn solve(
    f: &SimonFunction,
    t: usize,
    algorithm: Algorithm,
    seed: u64,
    options: &SolveOptions,
) -> Result<RunReport> {
    match algorithm {
        Algorithm::Distributed => solve_distributed(&NodeNetwork::split(f, t)?, seed, options),
        Algorithm::Centralized => solve_centralized(f, seed, options),
        Algorithm::Classical => solve_classical(&NodeNetwork::split(f, t)?, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, TruthTable};

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn recover_s2_on_worked_example() {
        let f = SimonFunction::appendix_a();
        let net = NodeNetwork::split(&f, 2).unwrap();
        assert_eq!(recover_s2(&net, &b("10")).unwrap(), b("01"));
        assert_eq!(net.total_queries(), 1 + 4);
        // the zero-prefix values are all distinct here, yet s2 ≠ 00
        let zero_prefix: Vec<BitString> = BitString::all(2)
            .map(|w| f.table().get(&b("00").concat(&w).unwrap()).unwrap())
            .collect();
        let mut dedup = zero_prefix.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 4);
    }

    #[test]
    fn recover_s2_zero_shift() {
        let f = generate(5, 5, b("00000"), 3).unwrap();
        let net = NodeNetwork::split(&f, 2).unwrap();
        assert_eq!(recover_s2(&net, &b("000")).unwrap(), b("00"));
        assert!(net.total_queries() <= 5);
    }

    #[test]
    fn recover_s2_zero_prefix_collision() {
        let f = generate(5, 5, b("00011"), 8).unwrap();
        let net = NodeNetwork::split(&f, 2).unwrap();
        assert_eq!(recover_s2(&net, &b("000")).unwrap(), b("11"));
    }

    #[test]
    fn recover_s2_wrong_candidate_is_a_promise_violation() {
        let f = SimonFunction::appendix_a();
        let net = NodeNetwork::split(&f, 2).unwrap();
        assert!(matches!(
            recover_s2(&net, &b("11")),
            Err(Error::PromiseViolation(_))
        ));
        assert!(recover_s2(&net, &b("1")).is_err());
    }

    #[test]
    fn verify_solution_examples() {
        let f = SimonFunction::appendix_a();
        let net = NodeNetwork::split(&f, 2).unwrap();
        assert!(verify_solution(&net, &b("1001"), ZeroCheck::SpotCheck).unwrap());
        assert_eq!(net.total_queries(), 2);
        assert!(!verify_solution(&net, &b("1000"), ZeroCheck::SpotCheck).unwrap());
        assert!(!verify_solution(&net, &b("0000"), ZeroCheck::Exhaustive).unwrap());
        assert!(verify_solution(&net, &b("100"), ZeroCheck::SpotCheck).is_err());

        let g = generate(4, 4, b("0000"), 2).unwrap();
        let net = NodeNetwork::split(&g, 1).unwrap();
        assert!(verify_solution(&net, &b("0000"), ZeroCheck::Exhaustive).unwrap());
        assert!(verify_solution(&net, &b("0000"), ZeroCheck::SpotCheck).unwrap());
        assert_eq!(net.total_queries(), 16 + 3);
    }

    #[test]
    fn distributed_solves_worked_example() {
        let f = SimonFunction::appendix_a();
        let net = NodeNetwork::split(&f, 2).unwrap();
        let report = solve_distributed(&net, 1, &SolveOptions::default()).unwrap();
        assert_eq!(report.recovered_s, Some(b("1001")));
        assert_eq!(report.s1, Some(b("10")));
        assert_eq!(report.s2, Some(b("01")));
        assert!(report.verified);
        for w in BitString::all(2) {
            let extra = report.node_queries.get(&w) - 2 * report.runs;
            assert!(extra <= 3, "node {w}: {extra}");
        }
        assert_eq!(report.extra_classical_queries, 4 + 1 + 2);
    }

    #[test]
    fn zero_prefix_shift_found_through_full_rank() {
        let f = generate(6, 6, b("000101"), 21).unwrap();
        let net = NodeNetwork::split(&f, 3).unwrap();
        let report = solve_distributed(&net, 4, &SolveOptions::default()).unwrap();
        assert_eq!(report.s1, Some(b("000")));
        assert_eq!(report.recovered_s, Some(b("000101")));
        assert!(report.runs >= 3);
    }

    #[test]
    fn injective_instance_yields_zero() {
        let f = generate(5, 6, b("00000"), 2).unwrap();
        for t in 0..3 {
            let report = solve(&f, t, Algorithm::Distributed, 9, &SolveOptions::default()).unwrap();
            assert_eq!(report.recovered_s, Some(b("00000")));
        }
        let report = solve_centralized(&f, 9, &SolveOptions::default()).unwrap();
        assert_eq!(report.recovered_s, Some(b("00000")));
        assert_eq!(report.t, 0);
        assert_eq!(report.ebits, 0);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let f = generate(10, 10, b("0000000000"), 2).unwrap();
        let net = NodeNetwork::split(&f, 1).unwrap();
        let opts = SolveOptions {
            max_runs: Some(9),
            ..SolveOptions::default()
        };
        // rank 9 is reachable in 9 runs, but it only yields a wrong candidate
        match solve_distributed(&net, 0, &opts) {
            Err(Error::BudgetExhausted {
                max_runs: 9,
                target: 9,
                ..
            })
            | Ok(_) => {}
            other => panic!("{other:?}"),
        }
        let tight = SolveOptions {
            max_runs: Some(8),
            ..SolveOptions::default()
        };
        assert!(matches!(
            solve_distributed(&net, 0, &tight),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn classical_solves_worked_example() {
        let f = SimonFunction::appendix_a();
        let net = NodeNetwork::split(&f, 2).unwrap();
        let report = solve_classical(&net, 1).unwrap();
        assert_eq!(report.recovered_s, Some(b("1001")));
        assert_eq!(report.runs, 0);
        assert!(report.total_queries() >= 2);
    }

    #[test]
    fn classical_exhausts_on_injective_function() {
        let f = generate(6, 7, b("000000"), 5).unwrap();
        let net = NodeNetwork::split(&f, 1).unwrap();
        let report = solve_classical(&net, 3).unwrap();
        assert_eq!(report.recovered_s, Some(b("000000")));
        assert_eq!(report.total_queries(), 33);
        assert_eq!(report.node_queries.as_slice(), &[17, 16]);
    }

    #[test]
    fn lazy_permutation_is_a_permutation() {
        let mut rng = rng::seeded(3);
        let mut p = LazyPermutation::new(100);
        let mut out: Vec<u64> = std::iter::from_fn(|| p.next(&mut rng)).collect();
        out.sort();
        assert_eq!(out, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn corrupt_oracle_does_not_verify() {
        // f(000) = f(011) = f(101): no consistent shift exists
        let table = TruthTable::new(3, 3, vec![0, 1, 2, 0, 4, 0, 6, 7]).unwrap();
        let f = SimonFunction::new(table, b("011"));
        let net = NodeNetwork::split(&f, 1).unwrap();
        for seed in 0..20 {
            match solve_distributed(&net, seed, &SolveOptions::default()) {
                Ok(report) => assert!(report.verified && report.recovered_s.is_some()),
                Err(Error::PromiseViolation(_) | Error::BudgetExhausted { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn report_json_shape() {
        let f = SimonFunction::appendix_a();
        let mut report = solve(&f, 2, Algorithm::Distributed, 1, &SolveOptions::default()).unwrap();
        report.wall_time_ms = None;
        let text = serde_json::to_string(&report).unwrap();
        let order = [
            "algorithm",
            "n",
            "m",
            "t",
            "seed",
            "recovered_s",
            "s1",
            "s2",
            "runs",
            "node_queries",
            "extra_classical_queries",
            "teleported_qubits",
            "ebits",
            "classical_bits",
            "verified",
            "wall_time_ms",
        ];
        let positions: Vec<usize> = order
            .iter()
            .map(|k| text.find(&format!("\"{k}\":")).unwrap())
            .collect();
        assert!(positions.windows(2).all(|p| p[0] < p[1]), "{text}");
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(json.as_object().unwrap().len(), order.len());
        assert_eq!(json["algorithm"], "distributed");
        assert_eq!(json["recovered_s"], "1001");
        assert!(json["node_queries"]["01"].is_u64());
        assert!(json["wall_time_ms"].is_null());
    }
}
