//! Simulation of the distributed Simon circuit.
//!
//! After the second round of oracle queries the node registers are back in
//! `|0^m⟩`, so the pre-measurement state is `2^{-k/2} Σ_u |u⟩|S(u)⟩` with
//! `k = n − t`. The structured path here works only with the classes
//! `{u : S(u) = c}`; the full state vector in [`statevector_run`] is kept as
//! an independent check at small sizes.
//!
//! All probabilities are exact dyadic rationals.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::gf2::{BitString, Gf2Basis, LongBits};
use crate::instance::{NodeNetwork, TruthTable};

/// Largest first-register width accepted by [`exact_distribution`].
pub const MAX_DISTRIBUTION_BITS: usize = 20;
/// Default cap on state-vector size, overridable with `DSIMON_MAX_QUBITS`.
pub const DEFAULT_MAX_QUBITS: usize = 22;
const HARD_MAX_QUBITS: usize = 30;
/// Widest sorted concatenation [`sort_network`] builds. The structured
/// simulator compares slices directly and has no such limit.
pub const MAX_SORT_BITS: usize = 1024;

/// Nonnegative rational `num / 2^log2_den` in lowest terms.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct Dyadic {
    num: u64,
    log2_den: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic {
        num: 0,
        log2_den: 0,
    };
    pub const ONE: Dyadic = Dyadic {
        num: 1,
        log2_den: 0,
    };

    pub fn new(num: u64, log2_den: u32) -> Self {
        if num == 0 {
            return Self::ZERO;
        }
        let shift = num.trailing_zeros().min(log2_den);
        Dyadic {
            num: num >> shift,
            log2_den: log2_den - shift,
        }
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn log2_denominator(&self) -> u32 {
        self.log2_den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn checked_add(self, other: Dyadic) -> Option<Dyadic> {
        let den = self.log2_den.max(other.log2_den);
        let a = (self.num as u128) << (den - self.log2_den);
        let b = (other.num as u128) << (den - other.log2_den);
        let sum = a + b;
        let shift = if sum == 0 {
            0
        } else {
            sum.trailing_zeros().min(den)
        };
        let num = u64::try_from(sum >> shift).ok()?;
        Some(Dyadic::new(num, den - shift))
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / (self.log2_den as f64).exp2()
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.log2_den == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, 1u128 << self.log2_den)
        }
    }
}

/// Outcome law of the first register.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasurementDistribution {
    width: usize,
    probs: Vec<Dyadic>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DistributionRecord {
    pub y: BitString,
    pub numerator: u64,
    pub log2_denominator: u32,
}

impl MeasurementDistribution {
    /// Builds the law `weights[y] / 2^log2_den`.
    fn from_weights(width: usize, weights: &[u64], log2_den: u32) -> Self {
        MeasurementDistribution {
            width,
            probs: weights.iter().map(|&w| Dyadic::new(w, log2_den)).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn prob(&self, y: &BitString) -> Dyadic {
        assert_eq!(y.len(), self.width);
        self.probs[y.value() as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (BitString, Dyadic)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(y, &p)| (BitString::from_value(self.width, y as u64), p))
    }

    pub fn support(&self) -> Vec<BitString> {
        self.iter()
            .filter(|(_, p)| !p.is_zero())
            .map(|(y, _)| y)
            .collect()
    }

    pub fn total(&self) -> Option<Dyadic> {
        self.probs
            .iter()
            .try_fold(Dyadic::ZERO, |acc, &p| acc.checked_add(p))
    }

    /// The support records, in increasing order of `y`.
    pub fn records(&self) -> Vec<DistributionRecord> {
        self.iter()
            .filter(|(_, p)| !p.is_zero())
            .map(|(y, p)| DistributionRecord {
                y,
                numerator: p.numerator(),
                log2_denominator: p.log2_denominator(),
            })
            .collect()
    }

    /// True when every outcome in the support has the same probability.
    pub fn is_uniform_on_support(&self) -> bool {
        let mut nonzero = self.probs.iter().filter(|p| !p.is_zero());
        match nonzero.next() {
            None => false,
            Some(first) => nonzero.all(|p| p == first),
        }
    }
}

impl Serialize for MeasurementDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.records().serialize(serializer)
    }
}

/// `c ⊕ (min(a,b) ‖ max(a,b))`; `a` and `b` are controls and stay as they are.
pub fn u_sort(a: &BitString, b: &BitString, c: &BitString) -> Result<BitString> {
    if a.len() != b.len() || c.len() != 2 * a.len() {
        return Err(Error::invalid(format!(
            "u_sort expects widths (m, m, 2m), got ({}, {}, {})",
            a.len(),
            b.len(),
            c.len()
        )));
    }
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    c.xor(&lo.concat(hi)?)
}

/// Batcher odd-even merge sorting network on a power-of-two number of wires.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SortNetwork {
    wires: usize,
    /// Comparators grouped by layer; within a layer no wire repeats.
    layers: Vec<Vec<(usize, usize)>>,
}

impl SortNetwork {
    pub fn batcher(wires: usize) -> Result<Self> {
        if wires == 0 || !wires.is_power_of_two() {
            return Err(Error::invalid(format!(
                "{wires} wires is not a power of two"
            )));
        }
        let mut layers = Vec::new();
        let mut p = 1;
        while p < wires {
            let mut k = p;
            while k >= 1 {
                let mut layer = Vec::new();
                let mut j = k % p;
                while j + k < wires {
                    for i in 0..k.min(wires - j - k) {
                        if (i + j) / (2 * p) == (i + j + k) / (2 * p) {
                            layer.push((i + j, i + j + k));
                        }
                    }
                    j += 2 * k;
                }
                layers.push(layer);
                k /= 2;
            }
            p *= 2;
        }
        Ok(SortNetwork { wires, layers })
    }

    pub fn wires(&self) -> usize {
        self.wires
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn comparator_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn comparators(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.layers.iter().flatten().copied()
    }

    /// Runs the network in place. Equal values pass through unswapped.
    pub fn apply<T: Ord>(&self, values: &mut [T]) {
        assert_eq!(values.len(), self.wires);
        for (i, j) in self.comparators() {
            if values[i] > values[j] {
                values.swap(i, j);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SortedConcat {
    pub bits: LongBits,
    pub comparators: usize,
    pub depth: usize,
}

/// Sorts `2^t` equal-width values with the Batcher network and concatenates.
pub fn sort_network(values: &[BitString]) -> Result<SortedConcat> {
    let network = SortNetwork::batcher(values.len())?;
    if let Some(first) = values.first() {
        if values.iter().any(|v| v.len() != first.len()) {
            return Err(Error::invalid("sort_network inputs differ in width"));
        }
        if values.len() * first.len() > MAX_SORT_BITS {
            return Err(Error::invalid(format!(
                "sorted concatenation exceeds {MAX_SORT_BITS} bits"
            )));
        }
    }
    let mut wires = values.to_vec();
    network.apply(&mut wires);
    Ok(SortedConcat {
        bits: wires.iter().collect(),
        comparators: network.comparator_count(),
        depth: network.depth(),
    })
}

fn check_split(table: &TruthTable, t: usize) -> Result<usize> {
    if t >= table.n() {
        return Err(Error::invalid(format!(
            "t = {t} must be below n = {}",
            table.n()
        )));
    }
    Ok(table.n() - t)
}

/// Groups first-register values by `S(u)`.
fn classes(table: &TruthTable, t: usize) -> Vec<Vec<u64>> {
    let k = table.n() - t;
    let mut by_key: HashMap<Vec<u64>, Vec<u64>> = HashMap::new();
    for u in 0..1u64 << k {
        by_key.entry(table.slice_sorted(t, u)).or_default().push(u);
    }
    let mut out: Vec<Vec<u64>> = by_key.into_values().collect();
    out.sort_unstable();
    out
}

/// In-place Walsh-Hadamard transform without normalisation.
fn walsh_hadamard(values: &mut [i64]) {
    let mut h = 1;
    while h < values.len() {
        for block in values.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Exact first-register law of one run, computed from the table alone.
///
/// `Pr[y] = 2^{-2k} Σ_c |Σ_{u∈c} (−1)^{u·y}|²`. Expanding the square turns the
/// inner sum into `Σ_d N(d) (−1)^{d·y}` where `N(d)` counts ordered pairs in a
/// common class with `u ⊕ v = d`, so one Walsh-Hadamard transform of `N`
/// yields every numerator.
pub fn exact_distribution(table: &TruthTable, t: usize) -> Result<MeasurementDistribution> {
    let k = check_split(table, t)?;
    if k > MAX_DISTRIBUTION_BITS {
        return Err(Error::invalid(format!(
            "first register of {k} bits exceeds {MAX_DISTRIBUTION_BITS}"
        )));
    }
    let mut pair_counts = vec![0i64; 1 << k];
    for class in classes(table, t) {
        for &u in &class {
            for &v in &class {
                pair_counts[(u ^ v) as usize] += 1;
            }
        }
    }
    walsh_hadamard(&mut pair_counts);
    let weights: Vec<u64> = pair_counts
        .into_iter()
        .map(|w| u64::try_from(w).expect("squared amplitudes are nonnegative"))
        .collect();
    Ok(MeasurementDistribution::from_weights(
        k,
        &weights,
        2 * k as u32,
    ))
}

/// Per-run communication model knob.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostModel {
    /// Result registers travel to the sorting node and back again.
    pub round_trip_results: bool,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            round_trip_results: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Communication {
    pub teleported_qubits: u64,
    pub ebits: u64,
    pub classical_bits: u64,
}

/// Teleportation cost of `runs` circuit executions.
///
/// Each run sends the `n − t` control qubits to each of the `2^t` nodes and
/// the `2^t` result registers of `m` qubits to the sorting node, and with
/// `round_trip_results` back again. Each teleported qubit consumes one ebit
/// and two classical bits. A single node (`t = 0`) communicates nothing.
pub fn communication_cost(
    n: usize,
    t: usize,
    m: usize,
    runs: u64,
    model: CostModel,
) -> Communication {
    if t == 0 {
        return Communication::default();
    }
    let nodes = 1u64 << t;
    let legs = if model.round_trip_results { 2 } else { 1 };
    let per_run = nodes * (n - t) as u64 + legs * nodes * m as u64;
    let teleported_qubits = runs * per_run;
    Communication {
        teleported_qubits,
        ebits: teleported_qubits,
        classical_bits: 2 * teleported_qubits,
    }
}

/// Logical resource use of circuit runs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostLedger {
    t: usize,
    pub runs: u64,
    /// Indexed by the value of the node id `w`.
    pub node_queries: Vec<u64>,
    pub teleported_qubits: u64,
    pub ebits: u64,
    pub classical_bits: u64,
    pub model: CostModel,
}

impl CostLedger {
    pub fn new(t: usize) -> Self {
        Self::with_model(t, CostModel::default())
    }

    pub fn with_model(t: usize, model: CostModel) -> Self {
        CostLedger {
            t,
            runs: 0,
            node_queries: vec![0; 1 << t],
            teleported_qubits: 0,
            ebits: 0,
            classical_bits: 0,
            model,
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn queries_of(&self, w: &BitString) -> u64 {
        assert_eq!(w.len(), self.t);
        self.node_queries[w.value() as usize]
    }

    fn add_communication(&mut self, c: Communication) {
        self.teleported_qubits += c.teleported_qubits;
        self.ebits += c.ebits;
        self.classical_bits += c.classical_bits;
    }

    pub fn communication(&self) -> Communication {
        Communication {
            teleported_qubits: self.teleported_qubits,
            ebits: self.ebits,
            classical_bits: self.classical_bits,
        }
    }

    /// Folds in a ledger kept by another worker for the same split.
    pub fn merge(&mut self, other: &CostLedger) {
        assert_eq!(self.t, other.t, "ledgers for different splits");
        self.runs += other.runs;
        for (a, b) in self.node_queries.iter_mut().zip(&other.node_queries) {
            *a += b;
        }
        self.add_communication(other.communication());
    }
}

/// Executes one run of the circuit and returns the measured `y`.
///
/// A uniformly random `u₀` fixes the observed `S` value; the outcome is then
/// drawn with weight `|Σ_{u∈P} (−1)^{u·y}|²` over the class `P` of `u₀`.
/// When `P` is a coset of a subspace `V` that law is uniform on `V^⊥`.
pub fn sample_outcome<R: Rng + ?Sized>(
    network: &NodeNetwork,
    rng: &mut R,
    ledger: &mut CostLedger,
) -> Result<BitString> {
    let t = network.t();
    if ledger.t() != t {
        return Err(Error::invalid("ledger belongs to a different split"));
    }
    let table = network.table();
    let k = check_split(table, t)?;

    let u0 = rng.random_range(0..1u64 << k);
    let key = table.slice_sorted(t, u0);
    let class: Vec<u64> = (0..1u64 << k)
        .filter(|&u| u == u0 || table.slice_sorted(t, u) == key)
        .collect();

    let y = if class.len() == 1 {
        BitString::from_value(k, rng.random_range(0..1u64 << k))
    } else {
        let mut span = Gf2Basis::new(k)?;
        for &u in &class {
            span.insert(BitString::from_value(k, u ^ u0))?;
        }
        if class.len() == 1usize << span.rank() {
            span.null_space()
                .iter()
                .filter(|_| rng.random::<bool>())
                .fold(BitString::zeros(k), |acc, v| acc.xor_unchecked(v))
        } else {
            sample_by_weight(k, &class, rng)
        }
    };

    ledger.runs += 1;
    for (node, count) in network.nodes().iter().zip(ledger.node_queries.iter_mut()) {
        node.charge(2);
        *count += 2;
    }
    let cost = communication_cost(network.n(), t, network.m(), 1, ledger.model);
    ledger.add_communication(cost);
    Ok(y)
}

/// Fallback for classes that are not affine subspaces, which the promise
/// rules out.
fn sample_by_weight<R: Rng + ?Sized>(k: usize, class: &[u64], rng: &mut R) -> BitString {
    let weights: Vec<u64> = (0..1u64 << k)
        .map(|y| {
            let s: i64 = class
                .iter()
                .map(|&u| if (u & y).count_ones() & 1 == 0 { 1 } else { -1 })
                .sum();
            (s * s) as u64
        })
        .collect();
    let total: u64 = weights.iter().sum();
    let mut r = rng.random_range(0..total);
    for (y, w) in weights.iter().enumerate() {
        if r < *w {
            return BitString::from_value(k, y as u64);
        }
        r -= w;
    }
    unreachable!("weights sum to total")
}

/// State-vector size cap from `DSIMON_MAX_QUBITS`, or the default.
pub fn max_qubits_from_env() -> usize {
    std::env::var("DSIMON_MAX_QUBITS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .map(|q: usize| q.min(HARD_MAX_QUBITS))
        .unwrap_or(DEFAULT_MAX_QUBITS)
}

/// Qubits used by the full simulation of a split at `t`.
pub fn statevector_qubits(n: usize, m: usize, t: usize) -> usize {
    (n - t) + 2 * (m << t)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatevectorReport {
    pub distribution: MeasurementDistribution,
    pub qubits: usize,
    /// Squared norm, in units of the final denominator, left outside
    /// `|0^m⟩…|0^m⟩` on the node registers after uncomputation.
    pub leakage: u128,
    /// Squared norm inside that subspace, in the same units.
    pub retained: u128,
    pub log2_norm: u32,
}

/// Register layout: `u` (k bits) ‖ node registers (2^t · m) ‖ target (2^t · m).
struct Layout {
    k: usize,
    m: usize,
    nodes: usize,
    target_bits: usize,
}

impl Layout {
    fn mid_bits(&self) -> usize {
        self.nodes * self.m
    }

    fn u(&self, idx: usize) -> u64 {
        (idx >> (self.mid_bits() + self.target_bits)) as u64
    }

    fn node_reg(&self, idx: usize, w: usize) -> u64 {
        let shift = self.target_bits + (self.nodes - 1 - w) * self.m;
        ((idx >> shift) as u64) & ((1u64 << self.m) - 1)
    }

    fn mid(&self, idx: usize) -> usize {
        (idx >> self.target_bits) & ((1usize << self.mid_bits()) - 1)
    }
}

/// Applies a basis-state permutation `|i⟩ ↦ |perm(i)⟩`.
fn permute(state: &mut Vec<i64>, scratch: &mut Vec<i64>, perm: impl Fn(usize) -> usize) {
    scratch.iter_mut().for_each(|a| *a = 0);
    for (i, &a) in state.iter().enumerate() {
        if a != 0 {
            let j = perm(i);
            debug_assert_eq!(scratch[j], 0, "map is not injective");
            scratch[j] = a;
        }
    }
    std::mem::swap(state, scratch);
}

/// Unnormalised Hadamard on every qubit of the first register.
fn hadamard_first_register(state: &mut [i64], layout: &Layout) {
    let low = layout.mid_bits() + layout.target_bits;
    for q in 0..layout.k {
        let stride = 1usize << (low + q);
        for block in state.chunks_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
    }
}

/// Full state-vector run of the circuit, with integer amplitudes.
pub fn statevector_report(table: &TruthTable, t: usize) -> Result<StatevectorReport> {
    let k = check_split(table, t)?;
    let m = table.m();
    let qubits = statevector_qubits(table.n(), m, t);
    let cap = max_qubits_from_env();
    if qubits > cap {
        return Err(Error::TooManyQubits { qubits, cap });
    }
    let layout = Layout {
        k,
        m,
        nodes: 1 << t,
        target_bits: m << t,
    };
    let network = SortNetwork::batcher(layout.nodes)?;
    let mut state = vec![0i64; 1usize << qubits];
    let mut scratch = vec![0i64; state.len()];
    state[0] = 1;

    hadamard_first_register(&mut state, &layout);

    let query_all = |state: &mut Vec<i64>, scratch: &mut Vec<i64>| {
        for w in 0..layout.nodes {
            let shift = layout.target_bits + (layout.nodes - 1 - w) * m;
            permute(state, scratch, |i| {
                let x = (layout.u(i) << t) | w as u64;
                i ^ ((table.raw()[x as usize] as usize) << shift)
            });
        }
    };
    query_all(&mut state, &mut scratch);

    permute(&mut state, &mut scratch, |i| {
        let mut regs: Vec<u64> = (0..layout.nodes).map(|w| layout.node_reg(i, w)).collect();
        network.apply(&mut regs);
        let sorted = regs.iter().fold(0usize, |acc, &r| (acc << m) | r as usize);
        i ^ sorted
    });

    query_all(&mut state, &mut scratch);
    hadamard_first_register(&mut state, &layout);

    let log2_norm = 2 * k as u32;
    let mut weights = vec![0u64; 1 << k];
    let mut leakage = 0u128;
    let mut retained = 0u128;
    for (i, &a) in state.iter().enumerate() {
        if a == 0 {
            continue;
        }
        let sq = (a as i128 * a as i128) as u128;
        if layout.mid(i) != 0 {
            leakage += sq;
        } else {
            retained += sq;
            weights[layout.u(i) as usize] += sq as u64;
        }
    }
    Ok(StatevectorReport {
        distribution: MeasurementDistribution::from_weights(k, &weights, log2_norm),
        qubits,
        leakage,
        retained,
        log2_norm,
    })
}

/// First-register law from the full state vector; fails if any amplitude
/// survives outside the uncomputed node registers.
pub fn statevector_run(table: &TruthTable, t: usize) -> Result<MeasurementDistribution> {
    let report = statevector_report(table, t)?;
    if report.leakage != 0 {
        return Err(Error::SimulationIntegrity(format!(
            "{} / 2^{} of the norm left outside |0…0⟩ on the node registers",
            report.leakage, report.log2_norm
        )));
    }
    Ok(report.distribution)
}
