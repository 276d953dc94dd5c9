//! Recurrent LimAvg automata: the recurrence test, saturating words, rounded
//! block tables, block chains, and the approximation of the almost-sure value
//! by doubling the block length.
//!
//! A block chain reads words in blocks of `k` letters. Its states are pairs
//! `(s, S)` of a chain state and the subset of automaton states reachable so
//! far; the weight of a block is the least average weight of a run segment
//! over the block that starts anywhere in `S`. Its mean payoff is a lower
//! bound on the value that tends to the value as `k` grows.

use std::collections::{HashMap, HashSet};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::markov::WeightedChain;
use crate::model::{
    validate_model, ChainEdge, ExtendedValue, MarkovChain, Transition, ValueFunction, WeightedAutomaton,
};
use crate::rational::{self, Rational};
use crate::report::{ApproxReport, Bound, Parameters};
use crate::scc;
use crate::stateset::StateSet;

/// Grid value marking a missing run.
pub const INF: i64 = i64::MAX;

// ---------------------------------------------------------------------------
// Recurrence

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecurrenceCertificate {
    pub recurrent: bool,
    /// For each state `q`, a word leading from `{q}` to exactly `Q0`.
    pub return_words: Vec<Option<Vec<usize>>>,
    /// First state without a return word.
    pub stuck_state: Option<usize>,
    /// A subset reachable from `Q0` that cannot reach `Q0`, with a word
    /// leading to it.
    pub no_return: Option<(StateSet, Vec<usize>)>,
    /// Independent verdict: `Q0` lies in a bottom component of the subset
    /// graph and every singleton reaches `Q0`.
    pub bottom_component_check: bool,
}

struct SubsetGraph {
    sets: Vec<StateSet>,
    index: HashMap<StateSet, usize>,
    // parent[i] = (predecessor, letter) on a BFS tree from the start sets
    parent: Vec<Option<(usize, usize)>>,
    adj: Vec<Vec<usize>>,
}

impl SubsetGraph {
    fn explore(aut: &WeightedAutomaton, starts: &[StateSet], feasible: &dyn Fn(&StateSet, usize) -> bool) -> Self {
        let mut g = SubsetGraph { sets: Vec::new(), index: HashMap::new(), parent: Vec::new(), adj: Vec::new() };
        for s in starts {
            g.intern(s.clone(), None);
        }
        let mut i = 0;
        while i < g.sets.len() {
            let mut out = Vec::new();
            for a in 0..aut.num_letters() {
                if !feasible(&g.sets[i], a) {
                    continue;
                }
                let next = aut.step(&g.sets[i], a);
                let j = g.intern(next, Some((i, a)));
                if !out.contains(&j) {
                    out.push(j);
                }
            }
            g.adj.push(out);
            i += 1;
        }
        g
    }

    fn intern(&mut self, set: StateSet, parent: Option<(usize, usize)>) -> usize {
        if let Some(&i) = self.index.get(&set) {
            return i;
        }
        let i = self.sets.len();
        self.index.insert(set.clone(), i);
        self.sets.push(set);
        self.parent.push(parent);
        i
    }

    fn word_to(&self, mut i: usize) -> Vec<usize> {
        let mut w = Vec::new();
        while let Some((p, a)) = self.parent[i] {
            w.push(a);
            i = p;
        }
        w.reverse();
        w
    }

    /// Vertices from which `target` is reachable.
    fn reaching(&self, target: usize) -> Vec<bool> {
        let mut rev = vec![Vec::new(); self.sets.len()];
        for (u, out) in self.adj.iter().enumerate() {
            for &v in out {
                rev[v].push(u);
            }
        }
        let mut seen = vec![false; self.sets.len()];
        seen[target] = true;
        let mut stack = vec![target];
        while let Some(v) = stack.pop() {
            for &u in &rev[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen
    }
}

fn certify(aut: &WeightedAutomaton, feasible: &dyn Fn(&StateSet, usize) -> bool) -> RecurrenceCertificate {
    let n = aut.num_states();
    let q0 = aut.initial().clone();
    let mut return_words = Vec::with_capacity(n);
    for q in 0..n {
        let g = SubsetGraph::explore(aut, &[StateSet::from_iter(n, [q])], feasible);
        return_words.push(g.index.get(&q0).map(|&i| g.word_to(i)));
    }
    let stuck_state = return_words.iter().position(Option::is_none);

    let from_q0 = SubsetGraph::explore(aut, std::slice::from_ref(&q0), feasible);
    let back = from_q0.reaching(0);
    let no_return = back.iter().position(|&b| !b).map(|i| (from_q0.sets[i].clone(), from_q0.word_to(i)));

    // Cross-check on one graph holding Q0 and every singleton.
    let mut starts = vec![q0.clone()];
    starts.extend((0..n).map(|q| StateSet::from_iter(n, [q])));
    let all = SubsetGraph::explore(aut, &starts, feasible);
    let comps = scc::components(&all.adj);
    let idx = scc::component_index(&comps, all.sets.len());
    let c0 = idx[0];
    let bottom = comps[c0].iter().all(|&u| all.adj[u].iter().all(|&v| idx[v] == c0));
    let reach_q0 = all.reaching(0);
    let singletons = (0..n).all(|q| reach_q0[all.index[&StateSet::from_iter(n, [q])]]);

    RecurrenceCertificate {
        recurrent: stuck_state.is_none() && no_return.is_none(),
        return_words,
        stuck_state,
        no_return,
        bottom_component_check: bottom && singletons,
    }
}

/// Decides whether the automaton is recurrent: every state `q` has a word
/// leading from `{q}` to `Q0`, and every subset reachable from `Q0` can
/// return to `Q0`.
pub fn check_recurrent(automaton: &WeightedAutomaton) -> RecurrenceCertificate {
    certify(automaton, &|_, _| true)
}

/// Recurrence of the letter-state product of [`prepare_nonuniform`], where
/// only letters the chain can emit are followed. For a single-state chain
/// emitting every letter this agrees with [`check_recurrent`].
pub fn check_recurrent_under(automaton: &WeightedAutomaton, chain: &MarkovChain) -> Result<RecurrenceCertificate> {
    let (ar, _) = prepare_nonuniform(automaton, chain)?;
    let nq = automaton.num_states();
    let ns = chain.num_states();
    let allowed: HashSet<(usize, usize, usize)> =
        chain.edges().iter().filter_map(|e| e.letter.map(|a| (e.src, a, e.dst))).collect();
    let feasible = move |set: &StateSet, letter: usize| match set.first() {
        Some(x) => allowed.contains(&(x / nq, letter / ns, letter % ns)),
        None => true,
    };
    Ok(certify(&ar, &feasible))
}

fn emits_every_letter_from_one_state(chain: &MarkovChain) -> bool {
    chain.num_states() == 1 && {
        let letters: HashSet<usize> = chain.edges().iter().filter_map(|e| e.letter).collect();
        letters.len() == chain.alphabet().len()
    }
}

/// True iff `δ̂(Q0, uv) = δ̂(q, v)`.
pub fn saturates(automaton: &WeightedAutomaton, q: usize, u: &[usize], v: &[usize]) -> Result<bool> {
    if q >= automaton.num_states() {
        return Err(Error::Invalid(format!("state index {q} out of range")));
    }
    if u.iter().chain(v).any(|&a| a >= automaton.num_letters()) {
        return Err(Error::Invalid("letter index out of range".into()));
    }
    let after_u = automaton.step_word(automaton.initial(), u);
    if !after_u.contains(q) {
        return Err(Error::Invalid(format!(
            "state {} is not reachable over the word '{}'",
            automaton.states()[q],
            automaton.format_word(u)
        )));
    }
    let single = StateSet::from_iter(automaton.num_states(), [q]);
    Ok(automaton.step_word(&after_u, v) == automaton.step_word(&single, v))
}

/// The product `A^R` over the alphabet `Σ × S` together with the chain that
/// emits `(a, s')` whenever it moves to `s'` on `a`.
///
/// State `(s, q)` is named `q@s` and has index `s·|Q| + q`; letter `(a, s')`
/// is named `a@s'` and has index `a·|S| + s'`. The automaton component
/// ignores the chain state, and `(s, q)` moves on `(a, s')` only if the chain
/// can move from `s` to `s'` emitting `a`.
pub fn prepare_nonuniform(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
) -> Result<(WeightedAutomaton, MarkovChain)> {
    if automaton.alphabet() != chain.alphabet() {
        return Err(Error::Invalid("automaton and chain alphabets differ".into()));
    }
    let nq = automaton.num_states();
    let ns = chain.num_states();
    let mut alphabet = Vec::with_capacity(automaton.num_letters() * ns);
    for a in automaton.alphabet() {
        for s in chain.states() {
            alphabet.push(format!("{a}@{s}"));
        }
    }
    let mut states = Vec::with_capacity(nq * ns);
    for s in chain.states() {
        for q in automaton.states() {
            states.push(format!("{q}@{s}"));
        }
    }
    let s0 = chain.initial();
    let initial = automaton.initial().iter().map(|q| s0 * nq + q);
    let accepting: Vec<usize> = (0..ns).flat_map(|s| automaton.accepting().iter().map(move |q| s * nq + q)).collect();
    let mut transitions = Vec::new();
    let mut edges = Vec::new();
    for e in chain.edges() {
        let Some(a) = e.letter else {
            edges.push(e.clone());
            continue;
        };
        let letter = a * ns + e.dst;
        edges.push(ChainEdge { src: e.src, letter: Some(letter), dst: e.dst, prob: e.prob.clone() });
        for t in automaton.transitions().iter().filter(|t| t.letter == a) {
            transitions.push(Transition {
                src: e.src * nq + t.src,
                letter,
                dst: e.dst * nq + t.dst,
                weight: t.weight.clone(),
            });
        }
    }
    let ar = WeightedAutomaton::new(alphabet.clone(), states, initial, accepting, transitions, automaton.value_fn())?;
    let terminal: Vec<usize> = chain.terminal_states().collect();
    let mr = MarkovChain::new(alphabet, chain.states().to_vec(), s0, terminal, edges)?;
    Ok((ar, mr))
}

// ---------------------------------------------------------------------------
// Options

/// How block weights are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockMethod {
    /// Rounded block tables while they fit the table budget, exact scans
    /// afterwards.
    Auto,
    /// Rounded block tables only.
    Cluster,
    /// Exact forward scans over each block.
    Scan,
}

impl BlockMethod {
    pub fn name(self) -> &'static str {
        match self {
            BlockMethod::Auto => "auto",
            BlockMethod::Cluster => "cluster",
            BlockMethod::Scan => "scan",
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlockOptions {
    pub exec: Exec,
    pub method: BlockMethod,
    /// Block length to use (strict) or to start doubling from.
    pub k: Option<u64>,
    pub strict_k: bool,
    /// Largest block length exponent tried while doubling.
    pub max_level: u32,
    /// Most entries a rounded block table may hold.
    pub table_budget: usize,
    /// Most distinct scan states per block position.
    pub state_budget: usize,
}

impl Default for BlockOptions {
    fn default() -> Self {
        BlockOptions {
            exec: Exec::default(),
            method: BlockMethod::Auto,
            k: None,
            strict_k: false,
            max_level: 16,
            table_budget: 4096,
            state_budget: 1_000_000,
        }
    }
}

// ---------------------------------------------------------------------------
// Shared arithmetic

/// Least common multiple of the chain's probability denominators, and the
/// outgoing letter edges of every state with integer numerators over it.
struct ChainNumerators {
    denominator: BigUint,
    out: Vec<Vec<(usize, usize, BigUint)>>,
}

fn chain_numerators(chain: &MarkovChain) -> Result<ChainNumerators> {
    if chain.is_terminating() {
        return Err(Error::Unsupported("block chains need a non-terminating chain".into()));
    }
    let mut d = BigInt::one();
    for e in chain.edges() {
        d = d.lcm(e.prob.denom());
    }
    let dr = Rational::from_integer(d.clone());
    let mut out = vec![Vec::new(); chain.num_states()];
    for e in chain.edges() {
        let a = e.letter.expect("non-terminating chains emit letters");
        let num = (&e.prob * &dr).to_integer();
        out[e.src].push((a, e.dst, num.to_biguint().expect("probabilities are positive")));
    }
    Ok(ChainNumerators { denominator: d.to_biguint().expect("positive"), out })
}

fn power(base: &BigUint, exp: u64) -> BigUint {
    num_traits::pow(base.clone(), exp as usize)
}

// ---------------------------------------------------------------------------
// Rounded block tables

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClusterEntry {
    /// Chain state at the start of the block.
    pub from: usize,
    /// Chain state at the end of the block.
    pub to: usize,
    /// Row-major `|Q|×|Q|` matrix of rounded least run averages in grid
    /// units, [`INF`] where no run exists.
    pub f: Vec<i64>,
    /// Probability of the blocks with this matrix, as a numerator over
    /// `denominator^(2^level)`.
    pub mass: BigUint,
}

/// Blocks of length `2^level` grouped by their rounded matrix of least run
/// averages `ĥ(q, u, q')`, each entry a multiple of `epsilon0`, rounded down.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterTable {
    pub level: u32,
    pub epsilon0: Rational,
    pub num_states: usize,
    pub denominator: BigUint,
    /// Smallest and largest grid index a finite entry may take.
    pub grid: (i64, i64),
    /// Sorted by `(from, to, f)`.
    pub entries: Vec<ClusterEntry>,
}

impl ClusterTable {
    pub fn block_length(&self) -> u64 {
        1u64 << self.level
    }

    /// `ĥ(q, ·, q')` of an entry as a rational.
    pub fn value(&self, entry: &ClusterEntry, q: usize, q2: usize) -> Option<Rational> {
        let j = entry.f[q * self.num_states + q2];
        (j != INF).then(|| Rational::from_integer(BigInt::from(j)) * &self.epsilon0)
    }

    /// Total mass of the blocks starting in chain state `from`.
    pub fn total_mass(&self, from: usize) -> BigUint {
        self.entries.iter().filter(|e| e.from == from).map(|e| &e.mass).sum()
    }

    /// Denominator of the masses: `denominator^(2^level)`.
    pub fn mass_denominator(&self) -> BigUint {
        power(&self.denominator, self.block_length())
    }
}

fn grid_index(x: &Rational, step: &Rational) -> Result<i64> {
    rational::floor_steps(x, step)
        .to_i64()
        .filter(|&j| j.abs() < i64::MAX / 4)
        .ok_or_else(|| Error::Budget("grid index does not fit in 64 bits".into()))
}

fn combine(n: usize, f1: &[i64], f2: &[i64]) -> Vec<i64> {
    let mut f = vec![INF; n * n];
    for q in 0..n {
        for m in 0..n {
            let a = f1[q * n + m];
            if a == INF {
                continue;
            }
            for q2 in 0..n {
                let b = f2[m * n + q2];
                if b == INF {
                    continue;
                }
                let v = (a + b).div_euclid(2);
                let slot = &mut f[q * n + q2];
                if v < *slot {
                    *slot = v;
                }
            }
        }
    }
    f
}

type TableKey = (usize, usize, Vec<i64>);

fn square(entries: &[ClusterEntry], n: usize, budget: usize, exec: Exec) -> Result<Vec<ClusterEntry>> {
    let mut by_from: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, e) in entries.iter().enumerate() {
        by_from.entry(e.from).or_default().push(i);
    }
    let pairs: usize = entries.iter().map(|e| by_from.get(&e.to).map_or(0, Vec::len)).sum();
    if pairs > budget.saturating_mul(budget) {
        return Err(Error::Budget(format!("squaring a block table needs {pairs} combinations")));
    }
    let chunks: Vec<&[ClusterEntry]> = entries.chunks(64).collect();
    let partial = exec.map(&chunks, |chunk| {
        let mut local: HashMap<TableKey, BigUint> = HashMap::new();
        for e1 in chunk.iter() {
            for &j in by_from.get(&e1.to).map_or(&[][..], Vec::as_slice) {
                let e2 = &entries[j];
                let f = combine(n, &e1.f, &e2.f);
                *local.entry((e1.from, e2.to, f)).or_default() += &e1.mass * &e2.mass;
            }
        }
        local
    });
    let mut merged: HashMap<TableKey, BigUint> = HashMap::new();
    for part in partial {
        for (k, m) in part {
            *merged.entry(k).or_default() += m;
        }
        if merged.len() > budget {
            return Err(Error::Budget(format!("block table exceeds {budget} entries")));
        }
    }
    let mut out: Vec<ClusterEntry> =
        merged.into_iter().map(|((from, to, f), mass)| ClusterEntry { from, to, f, mass }).collect();
    out.sort_unstable();
    Ok(out)
}

/// Builds the rounded block table for blocks of length `2^level`: one-letter
/// weights rounded down to the grid, then `level` squarings with
/// `ĥ(q, u1u2, q') = ⌊min_m (ĥ(q, u1, m) + ĥ(m, u2, q'))/2⌋`. Every entry
/// satisfies `ĥ ≤ h ≤ ĥ + (level+1)·ε0`.
pub fn clusterize(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
    level: u32,
    epsilon0: &Rational,
    opts: &BlockOptions,
) -> Result<ClusterTable> {
    if !epsilon0.is_positive() {
        return Err(Error::Invalid("grid step must be positive".into()));
    }
    if automaton.alphabet() != chain.alphabet() {
        return Err(Error::Invalid("automaton and chain alphabets differ".into()));
    }
    if level > 62 {
        return Err(Error::Budget("block length exponent too large".into()));
    }
    let nums = chain_numerators(chain)?;
    let n = automaton.num_states();
    let grid = match (automaton.min_weight(), automaton.max_weight()) {
        (Some(lo), Some(hi)) => (grid_index(lo, epsilon0)?, grid_index(hi, epsilon0)?),
        _ => (0, 0),
    };
    let mut base: HashMap<TableKey, BigUint> = HashMap::new();
    for (s, out) in nums.out.iter().enumerate() {
        for (a, dst, p) in out {
            let mut f = vec![INF; n * n];
            for q in 0..n {
                for &(q2, t) in automaton.successors(q, *a) {
                    f[q * n + q2] = grid_index(automaton.weight(t), epsilon0)?;
                }
            }
            *base.entry((s, *dst, f)).or_default() += p;
        }
    }
    let mut entries: Vec<ClusterEntry> =
        base.into_iter().map(|((from, to, f), mass)| ClusterEntry { from, to, f, mass }).collect();
    entries.sort_unstable();
    for _ in 0..level {
        entries = square(&entries, n, opts.table_budget, opts.exec)?;
    }
    Ok(ClusterTable { level, epsilon0: epsilon0.clone(), num_states: n, denominator: nums.denominator, grid, entries })
}

// ---------------------------------------------------------------------------
// Block chains

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockEdge {
    pub to: usize,
    pub prob: Rational,
    /// Expected least average weight of a block, given this transition.
    pub weight: Rational,
}

/// Finite chain over block states `(s, S)`. State 0 is the start. Blocks
/// after which no run survives lead to a single absorbing `dead` state
/// without edges.
#[derive(Clone, Debug)]
pub struct BlockChain {
    pub k: u64,
    pub method: BlockMethod,
    /// Grid step, for chains built from rounded tables.
    pub epsilon0: Option<Rational>,
    pub states: Vec<(usize, StateSet)>,
    pub edges: Vec<Vec<BlockEdge>>,
    pub dead: Option<usize>,
}

/// Long-run behaviour of a block chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockChainValue {
    /// Probability of never reaching the dead state.
    pub live_mass: Rational,
    /// Mean payoff conditioned on staying alive, if that has positive
    /// probability.
    pub live_value: Option<Rational>,
    /// Reach probability and mean payoff of each live bottom component.
    pub components: Vec<(Rational, Rational)>,
}

impl BlockChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn value(&self) -> Result<BlockChainValue> {
        let mut edges: Vec<Vec<(usize, Rational, Rational)>> =
            self.edges.iter().map(|es| es.iter().map(|e| (e.to, e.prob.clone(), e.weight.clone())).collect()).collect();
        if let Some(d) = self.dead {
            edges[d] = vec![(d, Rational::one(), Rational::zero())];
        }
        let wc = WeightedChain { initial: 0, edges };
        let mut live_mass = Rational::zero();
        let mut total = Rational::zero();
        let mut components = Vec::new();
        for (comp, p, v) in wc.bottom_values()? {
            if Some(comp[0]) == self.dead {
                continue;
            }
            live_mass += &p;
            total += &p * &v;
            components.push((p, v));
        }
        let live_value = (!live_mass.is_zero()).then(|| total / &live_mass);
        Ok(BlockChainValue { live_mass, live_value, components })
    }
}

/// Outcome of one block from a block state: target (`None` when no run
/// survives), probability and expected weight given the target.
type BlockStep = (Option<(usize, StateSet)>, Rational, Rational);

trait BlockSource: Sync {
    fn step(&self, chain_state: usize, set: &StateSet) -> Result<Vec<BlockStep>>;
}

struct TableSource<'a> {
    table: &'a ClusterTable,
    by_from: HashMap<usize, Vec<usize>>,
}

impl<'a> TableSource<'a> {
    fn new(table: &'a ClusterTable) -> Self {
        let mut by_from: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, e) in table.entries.iter().enumerate() {
            by_from.entry(e.from).or_default().push(i);
        }
        TableSource { table, by_from }
    }
}

impl BlockSource for TableSource<'_> {
    fn step(&self, chain_state: usize, set: &StateSet) -> Result<Vec<BlockStep>> {
        let t = self.table;
        let n = t.num_states;
        // (target) -> (mass, Σ mass·grid index)
        let mut acc: HashMap<Option<(usize, StateSet)>, (BigUint, BigInt)> = HashMap::new();
        for &i in self.by_from.get(&chain_state).map_or(&[][..], Vec::as_slice) {
            let e = &t.entries[i];
            let mut target = StateSet::empty(n);
            let mut best = INF;
            for q in set.iter() {
                for q2 in 0..n {
                    let j = e.f[q * n + q2];
                    if j != INF {
                        target.insert(q2);
                        best = best.min(j);
                    }
                }
            }
            let key = (!target.is_empty()).then_some((e.to, target));
            let slot = acc.entry(key).or_default();
            slot.0 += &e.mass;
            if best != INF {
                slot.1 += BigInt::from(e.mass.clone()) * BigInt::from(best);
            }
        }
        let denom = BigInt::from(t.mass_denominator());
        let mut out: Vec<BlockStep> = acc
            .into_iter()
            .map(|(key, (mass, weighted))| {
                let mass = BigInt::from(mass);
                let weight =
                    if key.is_some() { Rational::new(weighted, mass.clone()) * &t.epsilon0 } else { Rational::zero() };
                (key, Rational::new(mass, denom.clone()), weight)
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }
}

/// Exact block weights by a forward scan over the block, keeping for each
/// chain state and normalized cost vector the probability mass and the
/// probability-weighted offset.
struct ScanSource<'a> {
    automaton: &'a WeightedAutomaton,
    nums: ChainNumerators,
    // trans[q][a] = (dst, scaled integer weight)
    trans: Vec<Vec<Vec<(usize, i64)>>>,
    scale: BigInt,
    k: u64,
    state_budget: usize,
}

impl<'a> ScanSource<'a> {
    fn new(automaton: &'a WeightedAutomaton, chain: &MarkovChain, k: u64, state_budget: usize) -> Result<Self> {
        let nums = chain_numerators(chain)?;
        let mut scale = BigInt::one();
        for t in automaton.transitions() {
            scale = scale.lcm(t.weight.denom());
        }
        let sr = Rational::from_integer(scale.clone());
        let bound = (automaton.max_abs_weight() * &sr).to_integer() * BigInt::from(k);
        if bound >= BigInt::from(i64::MAX / 4) {
            return Err(Error::Budget("scaled block costs do not fit in 64 bits".into()));
        }
        let n = automaton.num_states();
        let mut trans = vec![vec![Vec::new(); automaton.num_letters()]; n];
        for (q, row) in trans.iter_mut().enumerate() {
            for (a, slot) in row.iter_mut().enumerate() {
                for &(q2, t) in automaton.successors(q, a) {
                    let w = (automaton.weight(t) * &sr).to_integer().to_i64().expect("bounded above");
                    slot.push((q2, w));
                }
            }
        }
        Ok(ScanSource { automaton, nums, trans, scale, k, state_budget })
    }
}

impl BlockSource for ScanSource<'_> {
    fn step(&self, chain_state: usize, set: &StateSet) -> Result<Vec<BlockStep>> {
        let n = self.automaton.num_states();
        let mut start = vec![INF; n];
        for q in set.iter() {
            start[q] = 0;
        }
        // (chain state, normalized costs) -> (mass, Σ mass·offset)
        let mut layer: HashMap<(usize, Vec<i64>), (BigUint, BigInt)> = HashMap::new();
        layer.insert((chain_state, start), (BigUint::one(), BigInt::zero()));
        let mut dead = BigUint::zero();
        for _ in 0..self.k {
            let mut next: HashMap<(usize, Vec<i64>), (BigUint, BigInt)> = HashMap::with_capacity(layer.len());
            dead *= &self.nums.denominator;
            for ((s, costs), (mass, off)) in &layer {
                for (a, s2, p) in &self.nums.out[*s] {
                    let mut u = vec![INF; n];
                    for (q, &c) in costs.iter().enumerate() {
                        if c == INF {
                            continue;
                        }
                        for &(q2, w) in &self.trans[q][*a] {
                            let v = c + w;
                            if v < u[q2] {
                                u[q2] = v;
                            }
                        }
                    }
                    let m = mass * p;
                    let Some(&low) = u.iter().filter(|&&c| c != INF).min() else {
                        dead += m;
                        continue;
                    };
                    for c in u.iter_mut().filter(|c| **c != INF) {
                        *c -= low;
                    }
                    let shifted = off * BigInt::from(p.clone()) + BigInt::from(m.clone()) * BigInt::from(low);
                    let slot = next.entry((*s2, u)).or_default();
                    slot.0 += m;
                    slot.1 += shifted;
                }
            }
            if next.len() > self.state_budget {
                return Err(Error::Budget(format!("block scan exceeds {} states", self.state_budget)));
            }
            layer = next;
        }
        let mut acc: HashMap<Option<(usize, StateSet)>, (BigUint, BigInt)> = HashMap::new();
        for ((s, costs), (mass, off)) in layer {
            let target = StateSet::from_iter(n, (0..n).filter(|&q| costs[q] != INF));
            let slot = acc.entry(Some((s, target))).or_default();
            slot.0 += mass;
            slot.1 += off;
        }
        if !dead.is_zero() {
            acc.entry(None).or_default().0 += dead;
        }
        let denom = BigInt::from(power(&self.nums.denominator, self.k));
        let per_letter = &self.scale * BigInt::from(self.k);
        let mut out: Vec<BlockStep> = acc
            .into_iter()
            .map(|(key, (mass, off))| {
                let mass = BigInt::from(mass);
                let weight = if key.is_some() { Rational::new(off, &mass * &per_letter) } else { Rational::zero() };
                (key, Rational::new(mass, denom.clone()), weight)
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }
}

fn build_chain(
    source: &dyn BlockSource,
    chain_start: usize,
    start: &StateSet,
    k: u64,
    method: BlockMethod,
    epsilon0: Option<Rational>,
    exec: Exec,
) -> Result<BlockChain> {
    let mut bc = BlockChain { k, method, epsilon0, states: Vec::new(), edges: Vec::new(), dead: None };
    let mut index: HashMap<(usize, StateSet), usize> = HashMap::new();
    if start.is_empty() {
        bc.states.push((chain_start, start.clone()));
        bc.edges.push(Vec::new());
        bc.dead = Some(0);
        return Ok(bc);
    }
    index.insert((chain_start, start.clone()), 0);
    bc.states.push((chain_start, start.clone()));
    bc.edges.push(Vec::new());
    let mut frontier = vec![0usize];
    while !frontier.is_empty() {
        let work: Vec<(usize, StateSet)> = frontier.iter().map(|&i| bc.states[i].clone()).collect();
        let steps = exec.map(&work, |(s, set)| source.step(*s, set));
        let mut next = Vec::new();
        for (&row, steps) in frontier.iter().zip(steps) {
            let mut out = Vec::new();
            for (target, prob, weight) in steps? {
                let to = match target {
                    None => *bc.dead.get_or_insert_with(|| {
                        bc.states.push((chain_start, StateSet::empty(start.capacity())));
                        bc.edges.push(Vec::new());
                        bc.states.len() - 1
                    }),
                    Some(key) => match index.get(&key) {
                        Some(&i) => i,
                        None => {
                            let i = bc.states.len();
                            index.insert(key.clone(), i);
                            bc.states.push(key);
                            bc.edges.push(Vec::new());
                            next.push(i);
                            i
                        }
                    },
                };
                out.push(BlockEdge { to, prob, weight });
            }
            bc.edges[row] = out;
        }
        frontier = next;
    }
    Ok(bc)
}

#[allow(clippy::too_many_arguments)]
fn level_chain(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
    chain_start: usize,
    start: &StateSet,
    level: u32,
    epsilon0: &Rational,
    method: BlockMethod,
    opts: &BlockOptions,
) -> Result<BlockChain> {
    let k = 1u64 << level;
    match method {
        BlockMethod::Scan => {
            let src = ScanSource::new(automaton, chain, k, opts.state_budget)?;
            build_chain(&src, chain_start, start, k, BlockMethod::Scan, None, opts.exec)
        }
        _ => {
            let table = clusterize(automaton, chain, level, epsilon0, opts)?;
            let src = TableSource::new(&table);
            build_chain(&src, chain_start, start, k, BlockMethod::Cluster, Some(epsilon0.clone()), opts.exec)
        }
    }
}

/// The block chain `N[k]` of a recurrent automaton from `(s0, Q0)`, with
/// block weights from the rounded table of grid step `epsilon0`.
pub fn block_chain(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
    k: u64,
    epsilon0: &Rational,
    opts: &BlockOptions,
) -> Result<BlockChain> {
    let level = block_level(k)?;
    require_recurrent(automaton, chain)?;
    level_chain(automaton, chain, chain.initial(), automaton.initial(), level, epsilon0, BlockMethod::Cluster, opts)
}

fn block_level(k: u64) -> Result<u32> {
    if k == 0 || !k.is_power_of_two() {
        return Err(Error::Invalid(format!("block length {k} is not a power of two")));
    }
    Ok(k.trailing_zeros())
}

// ---------------------------------------------------------------------------
// Approximation by doubling

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelValue {
    pub k: u64,
    pub method: BlockMethod,
    pub epsilon0: Option<Rational>,
    pub block_states: usize,
    pub live_mass: Rational,
    pub live_value: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockValue {
    /// `Infinite` when runs die out with positive probability.
    pub value: ExtendedValue,
    pub live_mass: Rational,
    pub live_value: Option<Rational>,
    /// Block length of the reported value.
    pub k: u64,
    pub epsilon0: Option<Rational>,
    pub levels: Vec<LevelValue>,
    pub warnings: Vec<String>,
}

/// Approximates the almost-sure value of `automaton` started in `start_set`
/// while the chain starts in `chain_start`, doubling the block length until
/// two successive values differ by at most `ε/4` (or at the given `k` in
/// strict mode). Tables at exponent `l` use the grid step `ε/(4(l+1))`.
pub fn approximate_value(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
    chain_start: usize,
    start_set: &StateSet,
    epsilon: &Rational,
    opts: &BlockOptions,
) -> Result<BlockValue> {
    if !epsilon.is_positive() {
        return Err(Error::Invalid("epsilon must be positive".into()));
    }
    if automaton.alphabet() != chain.alphabet() {
        return Err(Error::Invalid("automaton and chain alphabets differ".into()));
    }
    if chain_start >= chain.num_states() {
        return Err(Error::Invalid("chain start out of range".into()));
    }
    let (first, last) = match opts.k {
        Some(k) if opts.strict_k => {
            let l = block_level(k)?;
            (l, l)
        }
        Some(k) => {
            let l = block_level(k)?;
            (l, l.max(opts.max_level))
        }
        None => (1, opts.max_level.max(1)),
    };
    let mut method = opts.method;
    let mut levels: Vec<LevelValue> = Vec::new();
    let mut warnings = Vec::new();
    let mut converged = false;
    let tolerance = epsilon / rational::int(4);
    for l in first..=last {
        let eps0 = epsilon / rational::int(4 * (l as i64 + 1));
        let attempt = match method {
            BlockMethod::Auto => {
                match level_chain(automaton, chain, chain_start, start_set, l, &eps0, BlockMethod::Cluster, opts) {
                    Err(Error::Budget(msg)) => {
                        warnings.push(format!(
                            "rounded block tables exceeded their budget at block length {} ({msg}); \
                             switched to exact block scans",
                            1u64 << l
                        ));
                        method = BlockMethod::Scan;
                        level_chain(automaton, chain, chain_start, start_set, l, &eps0, method, opts)
                    }
                    other => other,
                }
            }
            m => level_chain(automaton, chain, chain_start, start_set, l, &eps0, m, opts),
        };
        let bc = attempt?;
        let v = bc.value()?;
        levels.push(LevelValue {
            k: bc.k,
            method: bc.method,
            epsilon0: bc.epsilon0.clone(),
            block_states: bc.len(),
            live_mass: v.live_mass.clone(),
            live_value: v.live_value.clone(),
        });
        let Some(cur) = &v.live_value else {
            converged = true;
            break;
        };
        if let [.., prev, _] = levels.as_slice() {
            if let Some(p) = &prev.live_value {
                if (cur - p).abs() <= tolerance {
                    converged = true;
                    break;
                }
            }
        }
    }
    let last_level = levels.last().expect("at least one level").clone();
    if opts.strict_k {
        warnings.push(format!(
            "block length {} fixed by the caller; the error bound assumes it is long enough",
            last_level.k
        ));
    } else if converged {
        warnings.push(format!(
            "convergence is empirical: block length {} was reached by doubling until successive values differed by at most epsilon/4",
            last_level.k
        ));
    } else {
        warnings
            .push(format!("successive values still differed by more than epsilon/4 at block length {}", last_level.k));
    }
    let value = match &last_level.live_value {
        Some(v) if last_level.live_mass.is_one() => ExtendedValue::Finite(v.clone()),
        _ => ExtendedValue::Infinite,
    };
    Ok(BlockValue {
        value,
        live_mass: last_level.live_mass.clone(),
        live_value: last_level.live_value.clone(),
        k: last_level.k,
        epsilon0: last_level.epsilon0.clone(),
        levels,
        warnings,
    })
}

fn require_recurrent(automaton: &WeightedAutomaton, chain: &MarkovChain) -> Result<()> {
    let cert = if emits_every_letter_from_one_state(chain) {
        check_recurrent(automaton)
    } else {
        check_recurrent_under(automaton, chain)?
    };
    if cert.recurrent {
        return Ok(());
    }
    let reason = match (&cert.stuck_state, &cert.no_return) {
        (Some(q), _) => format!("no word leads from state {q} back to the initial set"),
        (None, Some((set, _))) => format!("a reachable subset of size {} cannot return to the initial set", set.len()),
        (None, None) => "recurrence conditions fail".into(),
    };
    Err(Error::NotRecurrent(reason))
}

/// ε-approximation of the expected value of a recurrent LimAvg automaton,
/// which almost every word attains.
pub fn recurrent_expected_approx(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
    epsilon: &Rational,
    opts: &BlockOptions,
) -> Result<(ApproxReport, BlockValue)> {
    if automaton.value_fn() != ValueFunction::LimAvg {
        return Err(Error::Unsupported(format!("expected a limavg automaton, found {}", automaton.value_fn())));
    }
    validate_model(automaton, chain)?;
    require_recurrent(automaton, chain)?;
    let bv = approximate_value(automaton, chain, chain.initial(), automaton.initial(), epsilon, opts)?;
    let bound = if bv.value.is_infinite() { Bound::Exact } else { Bound::Absolute(epsilon.clone()) };
    let report = ApproxReport {
        value: bv.value.clone(),
        bound,
        params: Parameters {
            epsilon: Some(epsilon.clone()),
            k: Some(bv.k),
            epsilon0: bv.epsilon0.clone(),
            ..Default::default()
        },
        warnings: bv.warnings.clone(),
    };
    Ok((report, bv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AutomatonBuilder;
    use crate::rational::{int, ratio};

    fn ab_balance() -> WeightedAutomaton {
        AutomatonBuilder::new(&["a", "b"])
            .initial("qx")
            .initial("qa")
            .initial("qb")
            .t("qx", "a", "qa", 0)
            .t("qx", "a", "qb", 1)
            .t("qa", "a", "qa", 0)
            .t("qa", "b", "qa", 1)
            .t("qa", "b", "qx", 1)
            .t("qb", "a", "qb", 1)
            .t("qb", "b", "qb", 0)
            .t("qb", "b", "qx", 0)
            .build(ValueFunction::LimAvg)
            .unwrap()
    }

    fn swing(initial: &[&str]) -> WeightedAutomaton {
        let mut b = AutomatonBuilder::new(&["a"]).state("qL").state("qR");
        for q in initial {
            b = b.initial(q);
        }
        b.t("qL", "a", "qR", 0).t("qR", "a", "qL", 0).build(ValueFunction::LimAvg).unwrap()
    }

    fn single(weight: i64) -> WeightedAutomaton {
        AutomatonBuilder::new(&["a", "b"])
            .initial("q")
            .t("q", "a", "q", weight)
            .t("q", "b", "q", weight)
            .build(ValueFunction::LimAvg)
            .unwrap()
    }

    fn word(a: &WeightedAutomaton, w: &str) -> Vec<usize> {
        a.parse_word(w).unwrap()
    }

    #[test]
    fn recurrence_examples() {
        let c = check_recurrent(&ab_balance());
        assert!(c.recurrent && c.bottom_component_check);
        assert!(c.return_words.iter().all(Option::is_some));

        let both = check_recurrent(&swing(&["qL", "qR"]));
        assert!(!both.recurrent && !both.bottom_component_check);
        assert_eq!(both.stuck_state, Some(0));

        let left = check_recurrent(&swing(&["qL"]));
        assert!(left.recurrent && left.bottom_component_check);
        assert_eq!(left.return_words[1], Some(vec![0]));
    }

    #[test]
    fn return_words_lead_to_the_initial_set() {
        let a = ab_balance();
        let c = check_recurrent(&a);
        for (q, w) in c.return_words.iter().enumerate() {
            let w = w.as_ref().unwrap();
            let single = StateSet::from_iter(3, [q]);
            assert_eq!(&a.step_word(&single, w), a.initial());
        }
    }

    #[test]
    fn recurrence_under_uniform_chain_matches() {
        for a in [ab_balance(), swing(&["qL", "qR"]), swing(&["qL"])] {
            let m = MarkovChain::uniform(a.alphabet());
            let under = check_recurrent_under(&a, &m).unwrap();
            assert_eq!(under.recurrent, check_recurrent(&a).recurrent);
        }
    }

    #[test]
    fn saturation() {
        let a = ab_balance();
        let qa = a.state_index("qa").unwrap();
        // Any v'abab over which q keeps a run saturates (q, u).
        for q in 0..3 {
            let single = StateSet::from_iter(3, [q]);
            for u in ["", "a", "b", "ab", "ba"] {
                let u = word(&a, u);
                if !a.step_word(a.initial(), &u).contains(q) {
                    continue;
                }
                for prefix in ["", "a", "b", "ab", "bb", "aab"] {
                    if a.step_word(&single, &word(&a, prefix)).is_empty() {
                        continue;
                    }
                    let v = word(&a, &format!("{prefix}abab"));
                    assert!(saturates(&a, q, &u, &v).unwrap());
                }
            }
        }
        // qx has no b-transition, so a v starting with b loses it.
        let qx = a.state_index("qx").unwrap();
        assert!(!saturates(&a, qx, &[], &word(&a, "babab")).unwrap());
        // δ̂(Q0, ba) = {qa,qb}; δ̂({qa}, a) = {qa}.
        assert!(!saturates(&a, qa, &word(&a, "b"), &word(&a, "a")).unwrap());
        // From {qa}: b → {qa,qx}, then a → {qa,qb}, matching δ̂(Q0, bba).
        assert!(saturates(&a, qa, &word(&a, "b"), &word(&a, "ba")).unwrap());

        let left = swing(&["qL"]);
        assert!(saturates(&left, 0, &[], &[]).unwrap());
        assert!(saturates(&left, 1, &[], &[]).is_err());
    }

    #[test]
    fn single_state_tables() {
        let a = single(3);
        let m = MarkovChain::uniform(&["a", "b"]);
        for l in 0..4 {
            let t = clusterize(&a, &m, l, &ratio(1, 7), &BlockOptions::default()).unwrap();
            assert_eq!(t.entries.len(), 1);
            let e = &t.entries[0];
            assert_eq!(e.f, vec![21]);
            assert_eq!(e.mass, t.mass_denominator());
        }
    }

    #[test]
    fn level_zero_rounds_letter_weights_down() {
        let a = AutomatonBuilder::new(&["a", "b"])
            .initial("p")
            .trans("p", "a", "p", ratio(1, 3))
            .trans("p", "b", "r", ratio(-1, 3))
            .t("r", "a", "p", 0)
            .t("r", "b", "r", 2)
            .build(ValueFunction::LimAvg)
            .unwrap();
        let m = MarkovChain::uniform(&["a", "b"]);
        let t = clusterize(&a, &m, 0, &ratio(1, 4), &BlockOptions::default()).unwrap();
        assert_eq!(t.entries.len(), 2);
        assert_eq!(t.entries[0].f, vec![1, INF, 0, INF]);
        assert_eq!(t.entries[1].f, vec![INF, -2, INF, 8]);
        assert_eq!(t.grid, (-2, 8));
        assert!(t.entries.iter().all(|e| e.mass == BigUint::one()));
    }

    #[test]
    fn tables_agree_across_execution_modes() {
        let a = ab_balance();
        let m = MarkovChain::uniform(&["a", "b"]);
        let par = BlockOptions { exec: Exec::parallel(), ..Default::default() };
        let seq = BlockOptions { exec: Exec::sequential(), ..Default::default() };
        let eps0 = ratio(1, 20);
        assert_eq!(clusterize(&a, &m, 4, &eps0, &par).unwrap(), clusterize(&a, &m, 4, &eps0, &seq).unwrap());
    }

    #[test]
    fn table_budget_is_enforced() {
        let a = ab_balance();
        let m = MarkovChain::uniform(&["a", "b"]);
        let opts = BlockOptions { table_budget: 8, ..Default::default() };
        assert!(matches!(clusterize(&a, &m, 6, &ratio(1, 100), &opts), Err(Error::Budget(_))));
    }

    #[test]
    fn block_chain_of_the_balance_automaton() {
        let a = ab_balance();
        let m = MarkovChain::uniform(&["a", "b"]);
        let bc = block_chain(&a, &m, 2, &ratio(1, 8), &BlockOptions::default()).unwrap();
        let names: Vec<String> = bc.states.iter().map(|(_, s)| a.format_set(s)).collect();
        assert_eq!(names, vec!["{qx,qa,qb}", "{qa,qb}"]);
        assert_eq!(bc.dead, None);
        for es in &bc.edges {
            // aa, ba lead to {qa,qb}; ab, bb lead back to Q0.
            assert_eq!(es.len(), 2);
            assert!(es.iter().all(|e| e.prob == ratio(1, 2)));
        }
        // Back to Q0 via ab (least cost 1) or bb (least cost 0): average 1/4.
        // Into {qa,qb} via aa or ba (qb -b:0-> qx -a:0-> qa), both cost 0.
        let to_q0 = bc.edges[0].iter().find(|e| e.to == 0).unwrap();
        assert_eq!(to_q0.weight, ratio(1, 4));
        let to_ab = bc.edges[0].iter().find(|e| e.to == 1).unwrap();
        assert_eq!(to_ab.weight, int(0));
    }

    #[test]
    fn non_recurrent_block_chain_is_rejected() {
        let a = swing(&["qL", "qR"]);
        let m = MarkovChain::uniform(&["a"]);
        let r = block_chain(&a, &m, 2, &ratio(1, 8), &BlockOptions::default());
        assert!(matches!(r, Err(Error::NotRecurrent(_))));
    }

    #[test]
    fn single_state_value_is_exact() {
        let a = single(5);
        let m = MarkovChain::uniform(&["a", "b"]);
        let (r, bv) = recurrent_expected_approx(&a, &m, &ratio(1, 100), &BlockOptions::default()).unwrap();
        assert_eq!(r.value, ExtendedValue::Finite(int(5)));
        assert_eq!(bv.levels.len(), 2);
    }

    #[test]
    fn scan_and_tables_agree_up_to_rounding() {
        let a = ab_balance();
        let m = MarkovChain::uniform(&["a", "b"]);
        let opts = BlockOptions::default();
        for l in 1..5u32 {
            let eps0 = ratio(1, 64);
            let s = level_chain(&a, &m, 0, a.initial(), l, &eps0, BlockMethod::Scan, &opts).unwrap();
            let c = level_chain(&a, &m, 0, a.initial(), l, &eps0, BlockMethod::Cluster, &opts).unwrap();
            let vs = s.value().unwrap().live_value.unwrap();
            let vc = c.value().unwrap().live_value.unwrap();
            assert!(vc <= vs);
            assert!(&vs - &vc <= &eps0 * int(l as i64 + 1));
        }
    }

    #[test]
    fn exact_values_grow_with_the_block_length() {
        let a = ab_balance();
        let m = MarkovChain::uniform(&["a", "b"]);
        let opts = BlockOptions::default();
        let mut prev = None;
        for l in 0..7u32 {
            let bc = level_chain(&a, &m, 0, a.initial(), l, &int(1), BlockMethod::Scan, &opts).unwrap();
            let v = bc.value().unwrap().live_value.unwrap();
            if let Some(p) = prev {
                assert!(v >= p);
            }
            prev = Some(v);
        }
    }

    #[test]
    fn prepared_product_shapes() {
        let a = ab_balance();
        let m = MarkovChain::uniform(&["a", "b"]);
        let (ar, mr) = prepare_nonuniform(&a, &m).unwrap();
        assert_eq!(ar.num_states(), 3);
        assert_eq!(ar.transitions().len(), a.transitions().len());
        assert_eq!(ar.alphabet(), &["a@s0".to_string(), "b@s0".to_string()]);
        assert_eq!(mr.num_states(), 1);

        let one = swing(&["qL"]);
        let two = MarkovChain::new(
            vec!["a".into()],
            vec!["x".into(), "y".into()],
            0,
            [],
            vec![
                ChainEdge { src: 0, letter: Some(0), dst: 1, prob: int(1) },
                ChainEdge { src: 1, letter: Some(0), dst: 0, prob: int(1) },
            ],
        )
        .unwrap();
        let (ar, _) = prepare_nonuniform(&one, &two).unwrap();
        assert_eq!(ar.num_states(), 4);
        assert_eq!(ar.transitions().len(), 4);
        // (a, x) is never emitted from x.
        let ax = ar.letter_index("a@x").unwrap();
        let start = ar.initial().clone();
        assert!(ar.step(&start, ax).is_empty());
    }

    #[test]
    fn balance_automaton_converges_near_one_third() {
        let a = ab_balance();
        let m = MarkovChain::uniform(&["a", "b"]);
        let eps = ratio(1, 100);
        let (r, bv) = recurrent_expected_approx(&a, &m, &eps, &BlockOptions::default()).unwrap();
        let v = r.value.finite().unwrap().clone();
        assert!((v - ratio(1, 3)).abs() <= eps, "{:?}", bv.levels);
        assert!(r.warnings.iter().any(|w| w.contains("convergence is empirical")));
    }
}
