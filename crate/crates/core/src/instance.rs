//! Simon functions: construction, promise checking, and the per-node split.
//!
//! A function `f: {0,1}^n → {0,1}^m` is held as a dense [`TruthTable`]. The
//! table itself carries no knowledge of the hidden shift; [`SimonFunction`]
//! pairs it with the shift for test oracles and counts logical queries.
//! [`NodeOracle`] is node `w`'s restricted view `u ↦ f(u‖w)`.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gf2::{BitString, LongBits};
use crate::rng;

pub const MAX_N: usize = 24;
pub const MAX_M: usize = 64;
/// Largest codomain for which values are drawn by shuffling an explicit pool.
const POOL_BITS: usize = 26;

/// Truth table of the worked example: n = 4, m = 6, s = 1001.
pub const APPENDIX_A_TT: &str = include_str!("../fixtures/appendix_a.tt");

/// Dense table of `f`, indexed by the big-endian value of `x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthTable {
    n: usize,
    m: usize,
    values: Vec<u64>,
}

impl TruthTable {
    pub fn new(n: usize, m: usize, values: Vec<u64>) -> Result<Self> {
        if n > MAX_N {
            return Err(Error::invalid(format!("n = {n} exceeds {MAX_N}")));
        }
        if m == 0 || m > MAX_M {
            return Err(Error::invalid(format!("m = {m} outside 1..={MAX_M}")));
        }
        if values.len() != 1usize << n {
            return Err(Error::invalid(format!(
                "table has {} entries, expected 2^{n}",
                values.len()
            )));
        }
        if m < 64 {
            if let Some(v) = values.iter().find(|&&v| v >> m != 0) {
                return Err(Error::invalid(format!("value {v:#x} wider than {m} bits")));
            }
        }
        Ok(TruthTable { n, m, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn raw(&self) -> &[u64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: u64) -> BitString {
        BitString::from_value(self.m, self.values[x as usize])
    }

    pub fn get(&self, x: &BitString) -> Result<BitString> {
        if x.len() != self.n {
            return Err(Error::invalid(format!(
                "input of length {} for a function on {} bits",
                x.len(),
                self.n
            )));
        }
        Ok(self.at(x.value()))
    }

    /// Sorted values of `f(u‖w)` over all `w ∈ {0,1}^t`, as raw words.
    pub(crate) fn slice_sorted(&self, t: usize, u: u64) -> Vec<u64> {
        let base = (u << t) as usize;
        let mut out = self.values[base..base + (1usize << t)].to_vec();
        out.sort_unstable();
        out
    }

    /// Parses the text format: `n m`, an optional `# s=<bits>` line, then
    /// `2^n` lines of `m` bits each.
    pub fn parse(text: &str) -> Result<ParsedTable> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (line_no, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty file".into(),
        })?;
        let mut fields = header.split_whitespace().map(str::parse::<usize>);
        let (n, m) = match (fields.next(), fields.next(), fields.next()) {
            (Some(Ok(n)), Some(Ok(m)), None) => (n, m),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected header `n m`, found {header:?}"),
                })
            }
        };
        if n == 0 || n > MAX_N || m == 0 || m > MAX_M {
            return Err(Error::Parse {
                line: line_no,
                message: format!("unsupported dimensions n = {n}, m = {m}"),
            });
        }

        let mut declared_s = None;
        let mut values = Vec::with_capacity(1 << n);
        for (line_no, line) in lines {
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if line_no != 2 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "comment allowed only on line 2".into(),
                    });
                }
                if let Some(bits) = comment.trim().strip_prefix("s=") {
                    let s: BitString = bits.trim().parse().map_err(|e: Error| Error::Parse {
                        line: line_no,
                        message: e.to_string(),
                    })?;
                    if s.len() != n {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("declared s has {} bits, expected {n}", s.len()),
                        });
                    }
                    declared_s = Some(s);
                }
                continue;
            }
            if line.len() != m {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {m} bits, found {line:?}"),
                });
            }
            let v: BitString = line.parse().map_err(|e: Error| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            values.push(v.value());
        }
        if values.len() != 1 << n {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: format!("found {} values, expected {}", values.len(), 1u64 << n),
            });
        }
        let table = TruthTable::new(n, m, values)?;
        Ok(ParsedTable { table, declared_s })
    }

    /// Renders the text format; the `# s=` line is written only when given.
    pub fn to_text(&self, reveal: Option<&BitString>) -> String {
        let mut out = String::with_capacity((self.m + 1) << self.n);
        let _ = writeln!(out, "{} {}", self.n, self.m);
        if let Some(s) = reveal {
            let _ = writeln!(out, "# s={s}");
        }
        for x in 0..self.values.len() as u64 {
            let _ = writeln!(out, "{}", self.at(x));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct ParsedTable {
    pub table: TruthTable,
    pub declared_s: Option<BitString>,
}

/// Recovers the unique shift consistent with the table, or reports why none
/// exists.
pub fn verify_promise(table: &TruthTable) -> Result<BitString> {
    let mut first_seen: HashMap<u64, u64> = HashMap::with_capacity(table.values.len());
    let mut shift: Option<u64> = None;
    let mut pairs = 0usize;
    for (x, &v) in table.values.iter().enumerate() {
        let x = x as u64;
        match first_seen.get(&v) {
            None => {
                first_seen.insert(v, x);
            }
            Some(&y) => {
                let d = x ^ y;
                match shift {
                    None => shift = Some(d),
                    Some(s) if s == d => {}
                    Some(s) => return Err(Error::promise(format!(
                        "value {} at x = {} collides with shift {} but s = {} was implied earlier",
                        table.at(x),
                        BitString::from_value(table.n, x),
                        BitString::from_value(table.n, d),
                        BitString::from_value(table.n, s),
                    ))),
                }
                pairs += 1;
            }
        }
    }
    let s = shift.unwrap_or(0);
    // with s ≠ 0 every point must have its partner
    if s != 0 && pairs != table.values.len() / 2 {
        return Err(Error::promise(format!(
            "only {pairs} of {} points paired under s = {}",
            table.values.len() / 2,
            BitString::from_value(table.n, s)
        )));
    }
    Ok(BitString::from_value(table.n, s))
}

/// Draws a table satisfying the promise for `s`. Each coset `{x, x⊕s}` gets a
/// distinct value sampled without replacement from `{0,1}^m`.
pub fn generate(n: usize, m: usize, s: BitString, seed: u64) -> Result<SimonFunction> {
    if n == 0 || n > MAX_N {
        return Err(Error::invalid(format!("n = {n} outside 1..={MAX_N}")));
    }
    if m == 0 || m > MAX_M {
        return Err(Error::invalid(format!("m = {m} outside 1..={MAX_M}")));
    }
    if s.len() != n {
        return Err(Error::invalid(format!(
            "s has {} bits, expected {n}",
            s.len()
        )));
    }
    let distinct_bits = if s.is_zero() { n } else { n - 1 };
    if m < distinct_bits {
        return Err(Error::invalid(format!(
            "codomain of {m} bits cannot hold 2^{distinct_bits} distinct values"
        )));
    }
    let distinct = 1usize << distinct_bits;
    let mut rng = rng::seeded(seed);
    let pool: Vec<u64> = if m <= POOL_BITS {
        index::sample(&mut rng, 1usize << m, distinct)
            .into_iter()
            .map(|v| v as u64)
            .collect()
    } else {
        let mut seen = HashSet::with_capacity(distinct);
        let mut out = Vec::with_capacity(distinct);
        let mask = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
        while out.len() < distinct {
            let v = rng.random::<u64>() & mask;
            if seen.insert(v) {
                out.push(v);
            }
        }
        out
    };

    let mut values = vec![0u64; 1 << n];
    let mut next = pool.into_iter();
    for x in 0..1u64 << n {
        let partner = x ^ s.value();
        if partner < x {
            values[x as usize] = values[partner as usize];
        } else {
            values[x as usize] = next.next().expect("pool sized to coset count");
        }
    }
    let table = TruthTable::new(n, m, values)?;
    Ok(SimonFunction::new(table, s))
}

/// Uniformly random nonzero shift of `n` bits.
pub fn random_nonzero_shift<R: Rng>(n: usize, rng: &mut R) -> BitString {
    BitString::from_value(n, rng.random_range(1..1u64 << n))
}

/// A truth table together with its hidden shift and a query counter.
#[derive(Debug)]
pub struct SimonFunction {
    table: Arc<TruthTable>,
    hidden_s: BitString,
    queries: AtomicU64,
}

impl SimonFunction {
    pub fn new(table: TruthTable, hidden_s: BitString) -> Self {
        SimonFunction {
            table: Arc::new(table),
            hidden_s,
            queries: AtomicU64::new(0),
        }
    }

    /// Wraps a table whose shift is unknown, deriving it by exhaustive check.
    pub fn from_table(table: TruthTable) -> Result<Self> {
        let s = verify_promise(&table)?;
        Ok(Self::new(table, s))
    }

    pub fn appendix_a() -> Self {
        let parsed = TruthTable::parse(APPENDIX_A_TT).expect("bundled fixture parses");
        Self::new(parsed.table, BitString::from_value(4, 0b1001))
    }

    pub fn n(&self) -> usize {
        self.table.n
    }

    pub fn m(&self) -> usize {
        self.table.m
    }

    pub fn table(&self) -> &TruthTable {
        &self.table
    }

    pub(crate) fn shared_table(&self) -> Arc<TruthTable> {
        Arc::clone(&self.table)
    }

    /// The shift the table was built for. Test oracles only; solvers never
    /// see it.
    pub fn hidden_s(&self) -> BitString {
        self.hidden_s
    }

    pub fn query(&self, x: &BitString) -> Result<BitString> {
        let v = self.table.get(x)?;
        self.queries.fetch_add(1, Ordering::Relaxed);
        Ok(v)
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }
}

/// Node `w`'s oracle for `f_w(u) = f(u‖w)`.
#[derive(Debug)]
pub struct NodeOracle {
    w: BitString,
    table: Arc<TruthTable>,
    queries: AtomicU64,
}

impl NodeOracle {
    pub fn id(&self) -> BitString {
        self.w
    }

    /// Width of this node's input, `n − t`.
    pub fn input_len(&self) -> usize {
        self.table.n - self.w.len()
    }

    pub fn query(&self, u: &BitString) -> Result<BitString> {
        if u.len() != self.input_len() {
            return Err(Error::invalid(format!(
                "node {} takes {} input bits, got {}",
                self.w,
                self.input_len(),
                u.len()
            )));
        }
        self.queries.fetch_add(1, Ordering::Relaxed);
        Ok(self.peek(u.value()))
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    /// Charges `k` logical queries made in superposition by the circuit.
    pub(crate) fn charge(&self, k: u64) {
        self.queries.fetch_add(k, Ordering::Relaxed);
    }

    /// Uncounted read, for simulator internals.
    #[inline]
    pub(crate) fn peek(&self, u: u64) -> BitString {
        self.table.at((u << self.w.len()) | self.w.value())
    }
}

/// Builds node `w`'s oracle for a split at `t` trailing bits.
pub fn subfunction(f: &SimonFunction, t: usize, w: BitString) -> Result<NodeOracle> {
    if t >= f.n() {
        return Err(Error::invalid(format!(
            "t = {t} must be below n = {}",
            f.n()
        )));
    }
    if w.len() != t {
        return Err(Error::invalid(format!(
            "node id has {} bits, expected {t}",
            w.len()
        )));
    }
    Ok(NodeOracle {
        w,
        table: f.shared_table(),
        queries: AtomicU64::new(0),
    })
}

/// All `2^t` node oracles of one split, indexed by the value of `w`.
#[derive(Debug)]
pub struct NodeNetwork {
    n: usize,
    t: usize,
    nodes: Vec<NodeOracle>,
}

impl NodeNetwork {
    pub fn split(f: &SimonFunction, t: usize) -> Result<Self> {
        let nodes = BitString::all(t)
            .map(|w| subfunction(f, t, w))
            .collect::<Result<Vec<_>>>()?;
        Ok(NodeNetwork { n: f.n(), t, nodes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn m(&self) -> usize {
        self.nodes[0].table.m
    }

    pub fn nodes(&self) -> &[NodeOracle] {
        &self.nodes
    }

    pub fn node(&self, w: &BitString) -> Result<&NodeOracle> {
        if w.len() != self.t {
            return Err(Error::invalid(format!(
                "node id has {} bits, expected {}",
                w.len(),
                self.t
            )));
        }
        Ok(&self.nodes[w.value() as usize])
    }

    pub fn query_counts(&self) -> Vec<u64> {
        self.nodes.iter().map(NodeOracle::queries).collect()
    }

    pub fn total_queries(&self) -> u64 {
        self.nodes.iter().map(NodeOracle::queries).sum()
    }

    pub(crate) fn table(&self) -> &TruthTable {
        &self.nodes[0].table
    }
}

/// Sorted multiset of `m`-bit values; duplicates stay adjacent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Multiset {
    elements: Vec<BitString>,
}

impl Multiset {
    pub fn from_unsorted(mut elements: Vec<BitString>) -> Self {
        elements.sort();
        Multiset { elements }
    }

    pub fn elements(&self) -> &[BitString] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn has_duplicates(&self) -> bool {
        self.elements.windows(2).any(|p| p[0] == p[1])
    }

    /// Lexicographic concatenation of the elements.
    pub fn concatenation(&self) -> LongBits {
        self.elements.iter().collect()
    }
}

fn check_slice_args(table: &TruthTable, t: usize, u: &BitString) -> Result<()> {
    if t >= table.n {
        return Err(Error::invalid(format!(
            "t = {t} must be below n = {}",
            table.n
        )));
    }
    if u.len() != table.n - t {
        return Err(Error::invalid(format!(
            "u has {} bits, expected {}",
            u.len(),
            table.n - t
        )));
    }
    Ok(())
}

/// `G(u) = {f(u‖w) : w ∈ {0,1}^t}`.
pub fn multiset_g(table: &TruthTable, t: usize, u: &BitString) -> Result<Multiset> {
    check_slice_args(table, t, u)?;
    let elements = table
        .slice_sorted(t, u.value())
        .into_iter()
        .map(|v| BitString::from_value(table.m, v))
        .collect();
    Ok(Multiset { elements })
}

/// `S(u)`: the elements of `G(u)` concatenated in lexicographic order.
pub fn big_s(table: &TruthTable, t: usize, u: &BitString) -> Result<LongBits> {
    Ok(multiset_g(table, t, u)?.concatenation())
}

/// Exhaustive check that `S(u) = S(v) ⇔ u ⊕ v ∈ {0, s1}` over all pairs.
/// Requires a nonzero shift.
pub fn check_theorem1(table: &TruthTable, s: &BitString, t: usize) -> Result<bool> {
    if s.len() != table.n {
        return Err(Error::invalid(format!(
            "s has {} bits, expected {}",
            s.len(),
            table.n
        )));
    }
    if s.is_zero() {
        return Err(Error::invalid("the shift must be nonzero"));
    }
    if t >= table.n {
        return Err(Error::invalid(format!(
            "t = {t} must be below n = {}",
            table.n
        )));
    }
    let k = table.n - t;
    if k > 14 {
        return Err(Error::invalid(format!(
            "pair scan over 2^{} pairs is too large",
            2 * k
        )));
    }
    let s1 = s.value() >> t;
    let keys: Vec<Vec<u64>> = (0..1u64 << k).map(|u| table.slice_sorted(t, u)).collect();
    for u in 0..keys.len() {
        for v in u..keys.len() {
            let d = (u ^ v) as u64;
            let related = d == 0 || d == s1;
            if (keys[u] == keys[v]) != related {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

impl SimonFunction {
    pub fn check_theorem1(&self, t: usize) -> Result<bool> {
        check_theorem1(&self.table, &self.hidden_s, t)
    }
}
