//! Brute-force references: explicit run enumeration and exhaustive word
//! enumeration. Exponential, for cross-checking the real algorithms on small
//! inputs.

use num_traits::{One, Zero};

use crate::model::{ExtendedValue, MarkovChain, ValueFunction, WeightedAutomaton};
use crate::rational::{self, Rational};

/// Every run of `word` from `start`, as the sequence of its transition
/// indices paired with the final state.
fn runs_from(automaton: &WeightedAutomaton, start: usize, word: &[usize]) -> Vec<(Vec<usize>, usize)> {
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(word.len());
    fn go(a: &WeightedAutomaton, q: usize, word: &[usize], path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, usize)>) {
        let Some((&letter, rest)) = word.split_first() else {
            out.push((path.clone(), q));
            return;
        };
        for &(to, t) in a.successors(q, letter) {
            path.push(t);
            go(a, to, rest, path, out);
            path.pop();
        }
    }
    go(automaton, start, word, &mut path, &mut out);
    out
}

/// Value of a finite word as the minimum over its accepting runs, each run
/// valued by folding its weights directly.
pub fn word_value_by_runs(automaton: &WeightedAutomaton, word: &[usize]) -> ExtendedValue {
    let vf = automaton.value_fn();
    let mut best = ExtendedValue::Infinite;
    for q in automaton.initial().iter() {
        for (path, end) in runs_from(automaton, q, word) {
            if !automaton.is_accepting(end) {
                continue;
            }
            let ws: Vec<&Rational> = path.iter().map(|&t| automaton.weight(t)).collect();
            let v = match vf {
                ValueFunction::Sum => ws.iter().copied().sum::<Rational>(),
                _ if ws.is_empty() => continue,
                ValueFunction::Avg => ws.iter().copied().sum::<Rational>() / rational::int(ws.len() as i64),
                ValueFunction::Min => ws.iter().copied().min().unwrap().clone(),
                ValueFunction::Max => ws.iter().copied().max().unwrap().clone(),
                _ => panic!("{vf} is not a finite-word value function"),
            };
            let v = ExtendedValue::Finite(v);
            if v < best {
                best = v;
            }
        }
    }
    best
}

/// Least average weight of a run from `q` to `q2` over a nonempty `word`.
pub fn block_min_average(automaton: &WeightedAutomaton, q: usize, word: &[usize], q2: usize) -> Option<Rational> {
    runs_from(automaton, q, word)
        .into_iter()
        .filter(|(_, end)| *end == q2)
        .map(|(path, _)| path.iter().map(|&t| automaton.weight(t)).sum::<Rational>())
        .min()
        .map(|s| s / rational::int(word.len() as i64))
}

/// All words of length at most `max_len` emitted by a terminating chain,
/// with the probability that the chain emits exactly that word.
pub fn finite_words(chain: &MarkovChain, max_len: usize) -> Vec<(Vec<usize>, Rational)> {
    let n = chain.num_states();
    let letters = chain.alphabet().len();
    let mut out = Vec::new();
    // dist[s]: probability of having emitted the current prefix and being in
    // the non-terminal state s.
    let mut start = vec![Rational::zero(); n];
    let mut stopped = Rational::zero();
    if chain.is_terminal(chain.initial()) {
        stopped = Rational::one();
    } else {
        start[chain.initial()] = Rational::one();
    }
    fn go(
        chain: &MarkovChain,
        letters: usize,
        max_len: usize,
        prefix: &mut Vec<usize>,
        dist: Vec<Rational>,
        stopped: Rational,
        out: &mut Vec<(Vec<usize>, Rational)>,
    ) {
        let mut end = stopped;
        for (s, m) in dist.iter().enumerate() {
            for e in chain.edges_from(s) {
                if e.letter.is_none() {
                    end += m * &e.prob;
                }
            }
        }
        if !end.is_zero() {
            out.push((prefix.clone(), end));
        }
        if prefix.len() == max_len {
            return;
        }
        for a in 0..letters {
            let mut next = vec![Rational::zero(); dist.len()];
            let mut halt = Rational::zero();
            for (s, m) in dist.iter().enumerate() {
                for e in chain.edges_from(s) {
                    if e.letter == Some(a) {
                        if chain.is_terminal(e.dst) {
                            halt += m * &e.prob;
                        } else {
                            next[e.dst] += m * &e.prob;
                        }
                    }
                }
            }
            if halt.is_zero() && next.iter().all(Zero::is_zero) {
                continue;
            }
            prefix.push(a);
            go(chain, letters, max_len, prefix, next, halt, out);
            prefix.pop();
        }
    }
    go(chain, letters, max_len, &mut Vec::new(), start, stopped, &mut out);
    out
}

/// `P(|w| > max_len)` for a terminating chain, from the enumerated words.
pub fn tail_mass(chain: &MarkovChain, max_len: usize) -> Rational {
    let seen: Rational = finite_words(chain, max_len).into_iter().map(|(_, p)| p).sum();
    Rational::one() - seen
}

/// `Σ P(w)` over words of length at most `max_len` with value at most
/// `lambda`, valued by [`word_value_by_runs`].
pub fn distribution_up_to(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
    lambda: &Rational,
    max_len: usize,
) -> Rational {
    finite_words(chain, max_len)
        .into_iter()
        .filter(|(w, _)| matches!(word_value_by_runs(automaton, w), ExtendedValue::Finite(v) if v <= *lambda))
        .map(|(_, p)| p)
        .sum()
}

/// `Σ P(w)·value(w)` over words of length at most `max_len`; `None` if some
/// enumerated word of positive probability has infinite value.
pub fn expectation_up_to(automaton: &WeightedAutomaton, chain: &MarkovChain, max_len: usize) -> Option<Rational> {
    let mut total = Rational::zero();
    for (w, p) in finite_words(chain, max_len) {
        match word_value_by_runs(automaton, &w) {
            ExtendedValue::Finite(v) => total += p * v,
            ExtendedValue::Infinite => return None,
        }
    }
    Some(total)
}

/// Every word of length `len` over `letters` letters, in lexicographic order.
pub fn all_words(letters: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                (0..letters).map(move |a| {
                    let mut v = w.clone();
                    v.push(a);
                    v
                })
            })
            .collect();
    }
    out
}
