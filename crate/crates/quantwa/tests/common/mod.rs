#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};
use std::path::PathBuf;

use num_traits::Zero;
use proptest::prelude::*;
use quantwa::format::{parse_model, ModelDocument};
use quantwa::oracle::block_min_average;
use quantwa::rational::{int, ratio};
use quantwa::recurrent::ClusterTable;
use quantwa::{ChainEdge, MarkovChain, Rational, StateSet, Transition, ValueFunction, WeightedAutomaton};

pub const LETTERS: [&str; 2] = ["a", "b"];

pub fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

pub fn fixture_text(name: &str) -> String {
    let path = models_dir().join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn fixture(name: &str) -> ModelDocument {
    parse_model(&fixture_text(name)).unwrap()
}

/// Raw description of an automaton over two letters: for every
/// `(src, letter, dst)` an optional weight.
#[derive(Clone, Debug)]
pub struct RawAutomaton {
    pub n: usize,
    pub cells: Vec<Option<Rational>>,
    pub initial: Vec<bool>,
    pub accepting: Vec<bool>,
}

impl RawAutomaton {
    pub fn build(&self, vf: ValueFunction) -> WeightedAutomaton {
        let n = self.n;
        let mut transitions = Vec::new();
        for (i, w) in self.cells.iter().enumerate() {
            if let Some(w) = w {
                let (src, rest) = (i / (2 * n), i % (2 * n));
                transitions.push(Transition { src, letter: rest / n, dst: rest % n, weight: w.clone() });
            }
        }
        let mut initial: Vec<usize> = (0..n).filter(|&q| self.initial[q]).collect();
        if initial.is_empty() {
            initial.push(0);
        }
        WeightedAutomaton::new(
            LETTERS.iter().map(|s| s.to_string()).collect(),
            (0..n).map(|q| format!("q{q}")).collect(),
            initial,
            (0..n).filter(|&q| self.accepting[q]),
            transitions,
            vf,
        )
        .unwrap()
    }
}

pub fn raw_automaton(max_states: usize, density: f64, weights: Vec<Rational>) -> impl Strategy<Value = RawAutomaton> {
    (1..=max_states).prop_flat_map(move |n| {
        let cell = prop::option::weighted(density, prop::sample::select(weights.clone()));
        (
            Just(n),
            prop::collection::vec(cell, 2 * n * n),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(|(n, cells, initial, accepting)| RawAutomaton { n, cells, initial, accepting })
    })
}

pub fn integers(range: std::ops::RangeInclusive<i64>) -> Vec<Rational> {
    range.map(int).collect()
}

/// A few integers and fractions that do not sit on the usual grids.
pub fn mixed_weights() -> Vec<Rational> {
    vec![int(-2), int(-1), ratio(-1, 2), int(0), ratio(1, 3), int(1), ratio(5, 7), int(2)]
}

pub fn automaton(max_states: usize, vf: ValueFunction) -> impl Strategy<Value = WeightedAutomaton> {
    raw_automaton(max_states, 0.5, integers(-2..=2)).prop_map(move |r| r.build(vf))
}

/// Integer edge weights of a chain over two letters: per live state, one
/// weight per `(letter, dst)` and, when terminating, one for ending.
#[derive(Clone, Debug)]
pub struct RawChain {
    pub n: usize,
    pub weights: Vec<u32>,
    pub stop: Vec<u32>,
}

impl RawChain {
    pub fn build(&self, terminating: bool) -> MarkovChain {
        let n = self.n;
        let mut edges = Vec::new();
        for s in 0..n {
            let mut row: Vec<(Option<usize>, usize, u32)> = Vec::new();
            for a in 0..2 {
                for d in 0..n {
                    row.push((Some(a), d, self.weights[s * 2 * n + a * n + d]));
                }
            }
            if terminating {
                row.push((None, n, self.stop[s].max(1)));
            } else if row.iter().all(|r| r.2 == 0) {
                row[s].2 = 1;
            }
            let total: u32 = row.iter().map(|r| r.2).sum();
            for (letter, dst, w) in row {
                if w > 0 {
                    edges.push(ChainEdge { src: s, letter, dst, prob: ratio(w as i64, total as i64) });
                }
            }
        }
        let mut states: Vec<String> = (0..n).map(|s| format!("s{s}")).collect();
        let terminal: Vec<usize> = if terminating {
            states.push("t".into());
            vec![n]
        } else {
            Vec::new()
        };
        MarkovChain::new(LETTERS.iter().map(|s| s.to_string()).collect(), states, 0, terminal, edges).unwrap()
    }
}

pub fn raw_chain(max_states: usize) -> impl Strategy<Value = RawChain> {
    (1..=max_states).prop_flat_map(|n| {
        (Just(n), prop::collection::vec(0u32..=2, 2 * n * n), prop::collection::vec(1u32..=3, n))
            .prop_map(|(n, weights, stop)| RawChain { n, weights, stop })
    })
}

pub fn chain(max_states: usize, terminating: bool) -> impl Strategy<Value = MarkovChain> {
    raw_chain(max_states).prop_map(move |r| r.build(terminating))
}

/// Recurrence straight from its definition: every state has a word leading
/// exactly to `Q0`, and every subset reachable from `Q0` can return to it.
pub fn recurrent_by_definition(a: &WeightedAutomaton) -> bool {
    let reach = |from: &StateSet| -> HashSet<StateSet> {
        let mut seen = HashSet::from([from.clone()]);
        let mut queue = VecDeque::from([from.clone()]);
        while let Some(s) = queue.pop_front() {
            for l in 0..a.num_letters() {
                let t = a.step(&s, l);
                if seen.insert(t.clone()) {
                    queue.push_back(t);
                }
            }
        }
        seen
    };
    let q0 = a.initial().clone();
    let n = a.num_states();
    (0..n).all(|q| reach(&StateSet::from_iter(n, [q])).contains(&q0))
        && reach(&q0).iter().all(|s| reach(s).contains(&q0))
}

/// Whether the rounded matrix of a table entry sandwiches the exact least
/// run averages of `word`: `ĥ ≤ h ≤ ĥ + (level+1)·ε0`, with missing runs on
/// both sides alike.
pub fn sandwiched(a: &WeightedAutomaton, table: &ClusterTable, entry: usize, word: &[usize]) -> bool {
    let n = a.num_states();
    let slack = &table.epsilon0 * int(table.level as i64 + 1);
    let e = &table.entries[entry];
    (0..n).all(|q| {
        (0..n).all(|q2| match (block_min_average(a, q, word, q2), table.value(e, q, q2)) {
            (None, None) => true,
            (Some(h), Some(low)) => low <= h && h <= &low + &slack,
            _ => false,
        })
    })
}

/// Whether words can be assigned one-to-one to table slots, each entry
/// offering `capacity` slots and word `w` fitting the entries in `fits[w]`.
pub fn words_match_entries(fits: &[Vec<usize>], capacity: &[usize]) -> bool {
    let slots: Vec<usize> = capacity.iter().enumerate().flat_map(|(e, &c)| std::iter::repeat_n(e, c)).collect();
    if slots.len() != fits.len() {
        return false;
    }
    let mut owner: Vec<Option<usize>> = vec![None; slots.len()];
    fn augment(w: usize, fits: &[Vec<usize>], slots: &[usize], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for (i, &e) in slots.iter().enumerate() {
            if seen[i] || !fits[w].contains(&e) {
                continue;
            }
            seen[i] = true;
            if owner[i].is_none_or(|o| augment(o, fits, slots, owner, seen)) {
                owner[i] = Some(w);
                return true;
            }
        }
        false
    }
    (0..fits.len()).all(|w| augment(w, fits, &slots, &mut owner, &mut vec![false; slots.len()]))
}

/// Probability that a non-terminating chain emits the prefix `word`.
pub fn prefix_probability(m: &MarkovChain, word: &[usize]) -> Rational {
    let mut dist = vec![Rational::zero(); m.num_states()];
    dist[m.initial()] = int(1);
    for &l in word {
        let mut next = vec![Rational::zero(); dist.len()];
        for (s, p) in dist.iter().enumerate() {
            for e in m.edges_from(s).filter(|e| e.letter == Some(l)) {
                next[e.dst] += p * &e.prob;
            }
        }
        dist = next;
    }
    dist.into_iter().sum()
}

/// Checks the sandwich for every word of length `2^level` against the
/// rounded table of `a` under the uniform two-letter chain.
pub fn table_sandwiches_words(a: &WeightedAutomaton, level: u32, epsilon0: &Rational) -> bool {
    use num_traits::ToPrimitive;
    use quantwa::oracle::all_words;
    use quantwa::recurrent::{clusterize, BlockOptions};
    let m = MarkovChain::uniform(&LETTERS);
    let opts = BlockOptions { exec: quantwa::Exec::sequential(), ..BlockOptions::default() };
    let table = clusterize(a, &m, level, epsilon0, &opts).unwrap();
    let words = all_words(2, 1 << level);
    let capacity: Vec<usize> = table.entries.iter().map(|e| e.mass.to_usize().unwrap()).collect();
    let fits: Vec<Vec<usize>> =
        words.iter().map(|w| (0..table.entries.len()).filter(|&e| sandwiched(a, &table, e, w)).collect()).collect();
    words_match_entries(&fits, &capacity)
}
