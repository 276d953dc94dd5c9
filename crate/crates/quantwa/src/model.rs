//! Weighted automata, Markov chains and the values they assign to words.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::rational::{self, Rational};
use crate::stateset::StateSet;

pub type Weight = Rational;

/// A word value: a rational, or `Infinite` when no (accepting) run exists.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExtendedValue {
    Finite(Rational),
    Infinite,
}

impl ExtendedValue {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            ExtendedValue::Finite(x) => Some(x),
            ExtendedValue::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedValue::Infinite)
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExtendedValue::Finite(x) => rational::to_f64(x),
            ExtendedValue::Infinite => f64::INFINITY,
        }
    }
}

impl Ord for ExtendedValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtendedValue::Finite(a), ExtendedValue::Finite(b)) => a.cmp(b),
            (ExtendedValue::Finite(_), ExtendedValue::Infinite) => Ordering::Less,
            (ExtendedValue::Infinite, ExtendedValue::Finite(_)) => Ordering::Greater,
            (ExtendedValue::Infinite, ExtendedValue::Infinite) => Ordering::Equal,
        }
    }
}

impl PartialOrd for ExtendedValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedValue::Finite(x) => f.write_str(&rational::format(x)),
            ExtendedValue::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ValueFunction {
    Min,
    Max,
    Sum,
    Avg,
    Inf,
    Sup,
    LimAvg,
}

impl ValueFunction {
    pub const ALL: [ValueFunction; 7] = [
        ValueFunction::Min,
        ValueFunction::Max,
        ValueFunction::Sum,
        ValueFunction::Avg,
        ValueFunction::Inf,
        ValueFunction::Sup,
        ValueFunction::LimAvg,
    ];

    /// True for the value functions defined on finite words.
    pub fn is_finite_word(self) -> bool {
        matches!(self, ValueFunction::Min | ValueFunction::Max | ValueFunction::Sum | ValueFunction::Avg)
    }

    pub fn name(self) -> &'static str {
        match self {
            ValueFunction::Min => "min",
            ValueFunction::Max => "max",
            ValueFunction::Sum => "sum",
            ValueFunction::Avg => "avg",
            ValueFunction::Inf => "inf",
            ValueFunction::Sup => "sup",
            ValueFunction::LimAvg => "limavg",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

impl fmt::Display for ValueFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub src: usize,
    pub letter: usize,
    pub dst: usize,
    pub weight: Weight,
}

/// A weighted automaton `(Σ, Q, Q0, F, δ, C)` with a value function.
///
/// Transitions are kept sorted by `(src, letter, dst)`; each triple carries
/// exactly one weight. Accepting states only matter for finite-word value
/// functions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedAutomaton {
    alphabet: Vec<String>,
    states: Vec<String>,
    initial: StateSet,
    accepting: StateSet,
    transitions: Vec<Transition>,
    value_fn: ValueFunction,
    // out[q][a] = (dst, transition index)
    out: Vec<Vec<Vec<(usize, usize)>>>,
}

fn check_unique(kind: &str, names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if n.is_empty() {
            return invalid(format!("empty {kind} name"));
        }
        if !seen.insert(n) {
            return invalid(format!("duplicate {kind} '{n}'"));
        }
    }
    Ok(())
}

impl WeightedAutomaton {
    pub fn new(
        alphabet: Vec<String>,
        states: Vec<String>,
        initial: impl IntoIterator<Item = usize>,
        accepting: impl IntoIterator<Item = usize>,
        mut transitions: Vec<Transition>,
        value_fn: ValueFunction,
    ) -> Result<Self> {
        check_unique("letter", &alphabet)?;
        check_unique("state", &states)?;
        if alphabet.is_empty() {
            return invalid("alphabet is empty");
        }
        let n = states.len();
        let mut init = StateSet::empty(n);
        for q in initial {
            if q >= n {
                return invalid(format!("initial state index {q} out of range"));
            }
            init.insert(q);
        }
        if init.is_empty() {
            return invalid("initial set is empty");
        }
        let mut acc = StateSet::empty(n);
        for q in accepting {
            if q >= n {
                return invalid(format!("accepting state index {q} out of range"));
            }
            acc.insert(q);
        }
        transitions.sort_by_key(|t| (t.src, t.letter, t.dst));
        let mut out = vec![vec![Vec::new(); alphabet.len()]; n];
        for (i, t) in transitions.iter().enumerate() {
            if t.src >= n || t.dst >= n {
                return invalid(format!("transition {i} refers to an unknown state"));
            }
            if t.letter >= alphabet.len() {
                return invalid(format!("transition {i} refers to an unknown letter"));
            }
            if i > 0 {
                let p = &transitions[i - 1];
                if (p.src, p.letter, p.dst) == (t.src, t.letter, t.dst) {
                    return invalid(format!(
                        "duplicate transition {} -{}-> {}",
                        states[t.src], alphabet[t.letter], states[t.dst]
                    ));
                }
            }
            out[t.src][t.letter].push((t.dst, i));
        }
        Ok(WeightedAutomaton { alphabet, states, initial: init, accepting: acc, transitions, value_fn, out })
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_letters(&self) -> usize {
        self.alphabet.len()
    }

    pub fn initial(&self) -> &StateSet {
        &self.initial
    }

    pub fn accepting(&self) -> &StateSet {
        &self.accepting
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting.contains(q)
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn value_fn(&self) -> ValueFunction {
        self.value_fn
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn letter_index(&self, name: &str) -> Option<usize> {
        self.alphabet.iter().position(|s| s == name)
    }

    /// Outgoing `(dst, transition index)` pairs of `q` on `letter`.
    pub fn successors(&self, q: usize, letter: usize) -> &[(usize, usize)] {
        &self.out[q][letter]
    }

    pub fn weight(&self, transition: usize) -> &Weight {
        &self.transitions[transition].weight
    }

    pub fn min_weight(&self) -> Option<&Weight> {
        self.transitions.iter().map(|t| &t.weight).min()
    }

    pub fn max_weight(&self) -> Option<&Weight> {
        self.transitions.iter().map(|t| &t.weight).max()
    }

    /// Largest absolute weight, zero when there are no transitions.
    pub fn max_abs_weight(&self) -> Rational {
        self.transitions.iter().map(|t| t.weight.abs()).max().unwrap_or_else(Rational::zero)
    }

    /// Sorted distinct weights.
    pub fn distinct_weights(&self) -> Vec<Weight> {
        let set: BTreeSet<&Weight> = self.transitions.iter().map(|t| &t.weight).collect();
        set.into_iter().cloned().collect()
    }

    /// `δ(S, a)`: all successors of states in `set` on `letter`.
    pub fn step(&self, set: &StateSet, letter: usize) -> StateSet {
        let mut next = StateSet::empty(self.num_states());
        for q in set.iter() {
            for &(d, _) in &self.out[q][letter] {
                next.insert(d);
            }
        }
        next
    }

    /// `δ̂(S, w)`.
    pub fn step_word(&self, set: &StateSet, word: &[usize]) -> StateSet {
        word.iter().fold(set.clone(), |s, &a| self.step(&s, a))
    }

    pub fn with_initial(&self, initial: &StateSet) -> Result<Self> {
        Self::new(
            self.alphabet.clone(),
            self.states.clone(),
            initial.iter(),
            self.accepting.iter(),
            self.transitions.clone(),
            self.value_fn,
        )
    }

    pub fn with_value_fn(&self, value_fn: ValueFunction) -> Self {
        let mut a = self.clone();
        a.value_fn = value_fn;
        a
    }

    /// Keeps the transitions satisfying `keep`; states and sets unchanged.
    pub fn filter_transitions(&self, keep: impl Fn(&Transition) -> bool) -> Self {
        let ts = self.transitions.iter().filter(|t| keep(t)).cloned().collect();
        Self::new(
            self.alphabet.clone(),
            self.states.clone(),
            self.initial.iter(),
            self.accepting.iter(),
            ts,
            self.value_fn,
        )
        .expect("filtering preserves validity")
    }

    /// The automaton with only transitions inside `states`, started in
    /// `initial`. State numbering is preserved.
    pub fn restrict(&self, states: &StateSet, initial: &StateSet) -> Result<Self> {
        let ts =
            self.transitions.iter().filter(|t| states.contains(t.src) && states.contains(t.dst)).cloned().collect();
        Self::new(self.alphabet.clone(), self.states.clone(), initial.iter(), self.accepting.iter(), ts, self.value_fn)
    }

    /// Adjacency of the underlying graph, ignoring letters and weights.
    pub fn graph(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_states()];
        for t in &self.transitions {
            if !adj[t.src].contains(&t.dst) {
                adj[t.src].push(t.dst);
            }
        }
        adj
    }

    pub fn format_set(&self, set: &StateSet) -> String {
        let names: Vec<&str> = set.iter().map(|q| self.states[q].as_str()).collect();
        format!("{{{}}}", names.join(","))
    }

    pub fn format_word(&self, word: &[usize]) -> String {
        word.iter().map(|&a| self.alphabet[a].as_str()).collect::<Vec<_>>().join(" ")
    }

    /// Parses a word written as space-separated letters, or as a plain string
    /// when every letter is a single character.
    pub fn parse_word(&self, text: &str) -> Result<Vec<usize>> {
        let parts: Vec<String> = if text.contains(char::is_whitespace) {
            text.split_whitespace().map(str::to_string).collect()
        } else {
            text.chars().map(|c| c.to_string()).collect()
        };
        parts
            .iter()
            .map(|p| self.letter_index(p).ok_or_else(|| Error::Invalid(format!("unknown letter '{p}'"))))
            .collect()
    }
}

/// Builds automata from state and letter names.
#[derive(Clone, Debug, Default)]
pub struct AutomatonBuilder {
    alphabet: Vec<String>,
    states: Vec<String>,
    initial: Vec<String>,
    accepting: Vec<String>,
    transitions: Vec<(String, String, String, Weight)>,
}

impl AutomatonBuilder {
    pub fn new<S: AsRef<str>>(alphabet: &[S]) -> Self {
        AutomatonBuilder { alphabet: alphabet.iter().map(|s| s.as_ref().to_string()).collect(), ..Default::default() }
    }

    pub fn state(mut self, name: &str) -> Self {
        if !self.states.iter().any(|s| s == name) {
            self.states.push(name.to_string());
        }
        self
    }

    pub fn initial(mut self, name: &str) -> Self {
        self = self.state(name);
        self.initial.push(name.to_string());
        self
    }

    pub fn accepting(mut self, name: &str) -> Self {
        self = self.state(name);
        self.accepting.push(name.to_string());
        self
    }

    pub fn trans(mut self, src: &str, letter: &str, dst: &str, weight: Weight) -> Self {
        self = self.state(src).state(dst);
        self.transitions.push((src.to_string(), letter.to_string(), dst.to_string(), weight));
        self
    }

    /// Shorthand for an integer weight.
    pub fn t(self, src: &str, letter: &str, dst: &str, weight: i64) -> Self {
        self.trans(src, letter, dst, rational::int(weight))
    }

    pub fn build(self, value_fn: ValueFunction) -> Result<WeightedAutomaton> {
        let find = |names: &[String], n: &str, kind: &str| {
            names.iter().position(|s| s == n).ok_or_else(|| Error::Invalid(format!("unknown {kind} '{n}'")))
        };
        let initial = self.initial.iter().map(|n| find(&self.states, n, "state")).collect::<Result<Vec<_>>>()?;
        let accepting = self.accepting.iter().map(|n| find(&self.states, n, "state")).collect::<Result<Vec<_>>>()?;
        let mut ts = Vec::new();
        for (s, a, d, w) in &self.transitions {
            ts.push(Transition {
                src: find(&self.states, s, "state")?,
                letter: find(&self.alphabet, a, "letter")?,
                dst: find(&self.states, d, "state")?,
                weight: w.clone(),
            });
        }
        WeightedAutomaton::new(self.alphabet, self.states, initial, accepting, ts, value_fn)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainEdge {
    pub src: usize,
    /// `None` marks an ε-edge into a terminal state.
    pub letter: Option<usize>,
    pub dst: usize,
    pub prob: Rational,
}

/// A Markov chain labelled by letters. With a nonempty terminal set it is
/// terminating: generation stops on entering a terminal state, and ε-edges
/// into terminal states end the word without emitting a letter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkovChain {
    alphabet: Vec<String>,
    states: Vec<String>,
    initial: usize,
    terminal: Vec<bool>,
    edges: Vec<ChainEdge>,
    out: Vec<Vec<usize>>,
}

impl MarkovChain {
    pub fn new(
        alphabet: Vec<String>,
        states: Vec<String>,
        initial: usize,
        terminal: impl IntoIterator<Item = usize>,
        mut edges: Vec<ChainEdge>,
    ) -> Result<Self> {
        check_unique("letter", &alphabet)?;
        check_unique("chain state", &states)?;
        let n = states.len();
        if initial >= n {
            return invalid("chain initial state out of range");
        }
        let mut term = vec![false; n];
        for t in terminal {
            if t >= n {
                return invalid(format!("terminal state index {t} out of range"));
            }
            term[t] = true;
        }
        let terminating = term.iter().any(|&t| t);
        edges.sort_by(|x, y| {
            (x.src, x.letter.map_or(0, |a| a + 1), x.dst).cmp(&(y.src, y.letter.map_or(0, |a| a + 1), y.dst))
        });
        let mut out = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            let label = |e: &ChainEdge| match e.letter {
                Some(a) => alphabet.get(a).cloned().unwrap_or_else(|| "?".into()),
                None => "END".to_string(),
            };
            if e.src >= n || e.dst >= n {
                return invalid(format!("chain edge {i} refers to an unknown state"));
            }
            if let Some(a) = e.letter {
                if a >= alphabet.len() {
                    return invalid(format!("chain edge {i} refers to an unknown letter"));
                }
            }
            if !(e.prob.is_positive() && e.prob <= Rational::one()) {
                return invalid(format!(
                    "edge {} -{}-> {} has probability {} outside (0, 1]",
                    states[e.src],
                    label(e),
                    states[e.dst],
                    rational::format(&e.prob)
                ));
            }
            if term[e.src] {
                return invalid(format!("terminal state {} has outgoing edges", states[e.src]));
            }
            if e.letter.is_none() && !term[e.dst] {
                if terminating {
                    return invalid(format!("END edge from {} must lead into a terminal state", states[e.src]));
                }
                return invalid("END edges require a terminating chain");
            }
            if i > 0 {
                let p = &edges[i - 1];
                if (p.src, p.letter, p.dst) == (e.src, e.letter, e.dst) {
                    return invalid(format!("duplicate edge {} -{}-> {}", states[e.src], label(e), states[e.dst]));
                }
            }
            out[e.src].push(i);
        }
        for s in 0..n {
            if term[s] {
                continue;
            }
            let sum: Rational = out[s].iter().map(|&i| edges[i].prob.clone()).sum();
            if !sum.is_one() {
                return invalid(format!("probabilities leaving {} sum to {}", states[s], rational::format(&sum)));
            }
        }
        if terminating {
            // Every state must reach a terminal state.
            let mut rev = vec![Vec::new(); n];
            for e in &edges {
                rev[e.dst].push(e.src);
            }
            let mut seen = term.clone();
            let mut queue: VecDeque<usize> = (0..n).filter(|&s| term[s]).collect();
            while let Some(s) = queue.pop_front() {
                for &p in &rev[s] {
                    if !seen[p] {
                        seen[p] = true;
                        queue.push_back(p);
                    }
                }
            }
            if let Some(s) = (0..n).find(|&s| !seen[s]) {
                return invalid(format!("state {} cannot reach a terminal state", states[s]));
            }
        }
        Ok(MarkovChain { alphabet, states, initial, terminal: term, edges, out })
    }

    /// Single state emitting every letter with probability `1/|Σ|`.
    pub fn uniform<S: AsRef<str>>(alphabet: &[S]) -> Self {
        let k = alphabet.len() as i64;
        let edges = (0..alphabet.len())
            .map(|a| ChainEdge { src: 0, letter: Some(a), dst: 0, prob: rational::ratio(1, k) })
            .collect();
        Self::new(alphabet.iter().map(|s| s.as_ref().to_string()).collect(), vec!["s0".into()], 0, [], edges)
            .expect("uniform chain is valid")
    }

    /// Uniform terminating chain: each letter and termination with
    /// probability `1/(|Σ|+1)`.
    pub fn uniform_terminating<S: AsRef<str>>(alphabet: &[S]) -> Self {
        let k = alphabet.len() as i64 + 1;
        let mut edges: Vec<ChainEdge> = (0..alphabet.len())
            .map(|a| ChainEdge { src: 0, letter: Some(a), dst: 0, prob: rational::ratio(1, k) })
            .collect();
        edges.push(ChainEdge { src: 0, letter: None, dst: 1, prob: rational::ratio(1, k) });
        Self::new(
            alphabet.iter().map(|s| s.as_ref().to_string()).collect(),
            vec!["s0".into(), "t".into()],
            0,
            [1],
            edges,
        )
        .expect("uniform terminating chain is valid")
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states()).filter(|&s| self.terminal[s])
    }

    pub fn is_terminating(&self) -> bool {
        self.terminal.iter().any(|&t| t)
    }

    pub fn edges(&self) -> &[ChainEdge] {
        &self.edges
    }

    pub fn edges_from(&self, s: usize) -> impl Iterator<Item = &ChainEdge> + '_ {
        self.out[s].iter().map(move |&i| &self.edges[i])
    }

    /// Same chain started in `s`.
    pub fn started_at(&self, s: usize) -> Self {
        let mut c = self.clone();
        c.initial = s;
        c
    }

    /// Expected number of emitted letters of a terminating chain, per state.
    pub fn expected_lengths(&self) -> Result<Vec<Rational>> {
        if !self.is_terminating() {
            return Err(Error::Unsupported("chain is not terminating".into()));
        }
        let live: Vec<usize> = (0..self.num_states()).filter(|&s| !self.terminal[s]).collect();
        let pos: HashMap<usize, usize> = live.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let m = live.len();
        let mut a = vec![vec![Rational::zero(); m]; m];
        let mut b = vec![Rational::zero(); m];
        for (i, &s) in live.iter().enumerate() {
            a[i][i] = Rational::one();
            for e in self.edges_from(s) {
                if e.letter.is_some() {
                    b[i] += &e.prob;
                }
                if let Some(&j) = pos.get(&e.dst) {
                    a[i][j] -= &e.prob;
                }
            }
        }
        let x = linalg::solve(a, b)?;
        let mut out = vec![Rational::zero(); self.num_states()];
        for (i, &s) in live.iter().enumerate() {
            out[s] = x[i].clone();
        }
        Ok(out)
    }
}

/// Derived quantities of a validated automaton/chain pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub value_fn: ValueFunction,
    pub states: usize,
    pub letters: usize,
    pub transitions: usize,
    pub chain_states: usize,
    pub min_weight: Option<Weight>,
    pub max_weight: Option<Weight>,
    /// `D = max − min`, zero without transitions.
    pub span: Weight,
    pub terminating: bool,
    pub expected_length: Option<Rational>,
}

/// Checks that the automaton and chain fit together and reports derived
/// constants. Individual invariants are enforced by the constructors.
pub fn validate_model(automaton: &WeightedAutomaton, chain: &MarkovChain) -> Result<ValidationReport> {
    if automaton.alphabet() != chain.alphabet() {
        return invalid("automaton and chain alphabets differ");
    }
    let vf = automaton.value_fn();
    if vf.is_finite_word() && !chain.is_terminating() {
        return invalid(format!("value function {vf} needs a terminating chain"));
    }
    if !vf.is_finite_word() && chain.is_terminating() {
        return invalid(format!("value function {vf} needs a non-terminating chain"));
    }
    let min = automaton.min_weight().cloned();
    let max = automaton.max_weight().cloned();
    let span = match (&min, &max) {
        (Some(a), Some(b)) => b - a,
        _ => Rational::zero(),
    };
    let expected_length =
        if chain.is_terminating() { Some(chain.expected_lengths()?[chain.initial()].clone()) } else { None };
    Ok(ValidationReport {
        value_fn: vf,
        states: automaton.num_states(),
        letters: automaton.num_letters(),
        transitions: automaton.transitions().len(),
        chain_states: chain.num_states(),
        min_weight: min,
        max_weight: max,
        span,
        terminating: chain.is_terminating(),
        expected_length,
    })
}
