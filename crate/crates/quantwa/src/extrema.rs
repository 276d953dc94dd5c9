//! Exact distribution and expected value of Min, Max, Inf and Sup automata.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::general::scc_structure;
use crate::model::{validate_model, ExtendedValue, MarkovChain, Transition, ValueFunction, WeightedAutomaton};
use crate::rational::Rational;
use crate::runprob::{empty_word_probability, run_probability, RunMode};

/// Distinct weights `x_1 < … < x_k` with `p_i = P(value > x_i)`; `p_0 = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightLadder {
    pub weights: Vec<Rational>,
    pub exceed: Vec<Rational>,
}

fn check_extrema(automaton: &WeightedAutomaton, chain: &MarkovChain) -> Result<()> {
    match automaton.value_fn() {
        ValueFunction::Min | ValueFunction::Max | ValueFunction::Inf | ValueFunction::Sup => {}
        vf => return Err(Error::Unsupported(format!("{vf} is not an extremum value function"))),
    }
    validate_model(automaton, chain)?;
    Ok(())
}

/// Two copies of the automaton; a run moves to copy 1 on its first
/// transition of weight at most `lambda` and stays there. State `(q, f)` has
/// index `q + f·|Q|`. Only copy-1 states accept.
pub fn flagged_automaton(automaton: &WeightedAutomaton, lambda: &Rational) -> Result<WeightedAutomaton> {
    let n = automaton.num_states();
    let states: Vec<String> =
        [0, 1].iter().flat_map(|f| automaton.states().iter().map(move |q| format!("{q}#{f}"))).collect();
    let mut transitions = Vec::with_capacity(2 * automaton.transitions().len());
    for t in automaton.transitions() {
        let low = t.weight <= *lambda;
        for f in [0, 1] {
            let g = if low { 1 } else { f };
            transitions.push(Transition {
                src: t.src + f * n,
                letter: t.letter,
                dst: t.dst + g * n,
                weight: t.weight.clone(),
            });
        }
    }
    WeightedAutomaton::new(
        automaton.alphabet().to_vec(),
        states,
        automaton.initial().iter().collect::<Vec<_>>(),
        automaton.accepting().iter().map(|q| q + n).collect::<Vec<_>>(),
        transitions,
        automaton.value_fn(),
    )
}

/// `P(value ≤ λ)`, exactly.
///
/// Sup and Max keep only transitions of weight at most `λ` and ask for a
/// surviving (accepting) run. Inf and Min ask for a run using some
/// transition of weight at most `λ`, through [`flagged_automaton`]; for Inf
/// the flagged run must stay forever in a permanent component of copy 1.
pub fn extrema_distribution(automaton: &WeightedAutomaton, chain: &MarkovChain, lambda: &Rational) -> Result<Rational> {
    check_extrema(automaton, chain)?;
    distribution(automaton, chain, lambda)
}

fn distribution(automaton: &WeightedAutomaton, chain: &MarkovChain, lambda: &Rational) -> Result<Rational> {
    match automaton.value_fn() {
        ValueFunction::Sup => {
            let low = automaton.filter_transitions(|t| t.weight <= *lambda);
            run_probability(&low, chain, RunMode::InfiniteRun)
        }
        ValueFunction::Max => {
            let low = automaton.filter_transitions(|t| t.weight <= *lambda);
            let mut p = run_probability(&low, chain, RunMode::FiniteAcceptance)?;
            // The empty word has no maximum.
            if automaton.initial().intersects(automaton.accepting()) {
                p -= empty_word_probability(chain);
            }
            Ok(p)
        }
        ValueFunction::Min => {
            let flagged = flagged_automaton(automaton, lambda)?;
            run_probability(&flagged, chain, RunMode::FiniteAcceptance)
        }
        ValueFunction::Inf => {
            let n = automaton.num_states();
            let flagged = flagged_automaton(automaton, lambda)?;
            let mut total = Rational::zero();
            for b in scc_structure(&flagged, chain)? {
                if b.sccs.iter().any(|s| s.permanent && s.states.first().is_some_and(|q| q >= n)) {
                    total += &b.reach;
                }
            }
            Ok(total)
        }
        _ => unreachable!("checked by the caller"),
    }
}

/// Exceedance probabilities at every distinct weight.
pub fn weight_ladder(automaton: &WeightedAutomaton, chain: &MarkovChain) -> Result<WeightLadder> {
    check_extrema(automaton, chain)?;
    let weights = automaton.distinct_weights();
    let exceed =
        weights.iter().map(|x| Ok(Rational::one() - distribution(automaton, chain, x)?)).collect::<Result<Vec<_>>>()?;
    Ok(WeightLadder { weights, exceed })
}

/// `E = Σ (p_{i−1} − p_i)·x_i`, or `Infinite` when words without an
/// (accepting) run have positive probability.
pub fn extrema_expected(automaton: &WeightedAutomaton, chain: &MarkovChain) -> Result<ExtendedValue> {
    let ladder = weight_ladder(automaton, chain)?;
    match ladder.exceed.last() {
        None => return Ok(ExtendedValue::Infinite),
        Some(p) if !p.is_zero() => return Ok(ExtendedValue::Infinite),
        _ => {}
    }
    let mut prev = Rational::one();
    let mut total = Rational::zero();
    for (x, p) in ladder.weights.iter().zip(&ladder.exceed) {
        total += (&prev - p) * x;
        prev = p.clone();
    }
    Ok(ExtendedValue::Finite(total))
}

/// Notes attached to extremum answers.
pub fn extrema_notes(value_fn: ValueFunction) -> Vec<String> {
    match value_fn {
        ValueFunction::Inf | ValueFunction::Min => vec![format!(
            "{value_fn}: deleting the transitions of weight at most x yields the words with a run avoiding them, \
             which is not the complement of value <= x; the flagged two-copy construction is used instead"
        )],
        _ => Vec::new(),
    }
}
