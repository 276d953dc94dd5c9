//! Probability that a random word admits a run.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::{MarkovChain, WeightedAutomaton};
use crate::product::{bscc_reach, ProductChain};
use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    /// `P(the infinite word has at least one infinite run)`.
    InfiniteRun,
    /// `P(the finite word is accepted)` under a terminating chain.
    FiniteAcceptance,
}

/// Exact probability of the event selected by `mode`. Weights and the value
/// function of `automaton` are ignored.
pub fn run_probability(automaton: &WeightedAutomaton, chain: &MarkovChain, mode: RunMode) -> Result<Rational> {
    match mode {
        RunMode::InfiniteRun if chain.is_terminating() => {
            return Err(Error::Unsupported("infinite-run mode needs a non-terminating chain".into()))
        }
        RunMode::FiniteAcceptance if !chain.is_terminating() => {
            return Err(Error::Unsupported("finite-acceptance mode needs a terminating chain".into()))
        }
        _ => {}
    }
    let pc = ProductChain::explore(automaton, chain, chain.initial(), automaton.initial().clone());
    let reach = bscc_reach(&pc)?;
    let mut total = Rational::zero();
    for (comp, p) in reach.bsccs.iter().zip(&reach.probs) {
        let (s, set) = pc.state(comp[0]);
        let counts = match mode {
            // Subsets inside a bottom component are all empty or all nonempty.
            RunMode::InfiniteRun => !set.is_empty(),
            RunMode::FiniteAcceptance => chain.is_terminal(s) && set.intersects(automaton.accepting()),
        };
        if counts {
            total += p;
        }
    }
    Ok(total)
}

/// Probability that a terminating chain emits the empty word.
pub fn empty_word_probability(chain: &MarkovChain) -> Rational {
    let s0 = chain.initial();
    if chain.is_terminal(s0) {
        return Rational::one();
    }
    chain.edges_from(s0).filter(|e| e.letter.is_none()).map(|e| e.prob.clone()).sum()
}
