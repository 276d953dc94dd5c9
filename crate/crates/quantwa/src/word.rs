//! Values of finite words by dynamic programming over positions.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::model::{ExtendedValue, ValueFunction, WeightedAutomaton};
use crate::rational::{self, Rational};

/// Minimum over accepting runs of the run value; `Infinite` when the word has
/// no accepting run.
///
/// The empty word has Sum value 0 when some initial state accepts. Min, Max
/// and Avg have no value on the empty sequence, so the empty word is
/// `Infinite` for them.
pub fn word_value(automaton: &WeightedAutomaton, word: &[usize]) -> Result<ExtendedValue> {
    let vf = automaton.value_fn();
    if !vf.is_finite_word() {
        return Err(Error::Unsupported(format!("{vf} is not a finite-word value function")));
    }
    if let Some(&a) = word.iter().find(|&&a| a >= automaton.num_letters()) {
        return Err(Error::Invalid(format!("letter index {a} out of range")));
    }
    if word.is_empty() {
        let accepts = automaton.initial().intersects(automaton.accepting());
        return Ok(if vf == ValueFunction::Sum && accepts {
            ExtendedValue::Finite(Rational::zero())
        } else {
            ExtendedValue::Infinite
        });
    }
    let combine = |acc: &Rational, w: &Rational| -> Rational {
        match vf {
            ValueFunction::Sum | ValueFunction::Avg => acc + w,
            ValueFunction::Min => acc.min(w).clone(),
            _ => acc.max(w).clone(),
        }
    };
    let n = automaton.num_states();
    // First letter seeds the accumulator with the transition weight itself.
    let mut d: Vec<Option<Rational>> = vec![None; n];
    for q in automaton.initial().iter() {
        for &(to, t) in automaton.successors(q, word[0]) {
            let w = automaton.weight(t);
            relax(&mut d[to], w.clone());
        }
    }
    for &a in &word[1..] {
        let mut next: Vec<Option<Rational>> = vec![None; n];
        for (q, acc) in d.iter().enumerate() {
            let Some(acc) = acc else { continue };
            for &(to, t) in automaton.successors(q, a) {
                relax(&mut next[to], combine(acc, automaton.weight(t)));
            }
        }
        d = next;
    }
    let best = automaton.accepting().iter().filter_map(|q| d[q].as_ref()).min().cloned();
    Ok(match best {
        None => ExtendedValue::Infinite,
        Some(v) if vf == ValueFunction::Avg => ExtendedValue::Finite(v / rational::int(word.len() as i64)),
        Some(v) => ExtendedValue::Finite(v),
    })
}

fn relax(slot: &mut Option<Rational>, v: Rational) {
    match slot {
        Some(cur) if *cur <= v => {}
        _ => *slot = Some(v),
    }
}

/// Incremental Sum evaluation: the vector of minimal accumulated weights per
/// state after a prefix. Used by enumerations that extend words letter by
/// letter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SumFrontier(pub Vec<Option<Rational>>);

impl SumFrontier {
    pub fn start(automaton: &WeightedAutomaton) -> Self {
        let mut d = vec![None; automaton.num_states()];
        for q in automaton.initial().iter() {
            d[q] = Some(Rational::zero());
        }
        SumFrontier(d)
    }

    pub fn step(&self, automaton: &WeightedAutomaton, letter: usize) -> Self {
        let mut next: Vec<Option<Rational>> = vec![None; self.0.len()];
        for (q, acc) in self.0.iter().enumerate() {
            let Some(acc) = acc else { continue };
            for &(to, t) in automaton.successors(q, letter) {
                relax(&mut next[to], acc + automaton.weight(t));
            }
        }
        SumFrontier(next)
    }

    pub fn is_dead(&self) -> bool {
        self.0.iter().all(Option::is_none)
    }

    /// Sum value of the prefix read so far.
    pub fn value(&self, automaton: &WeightedAutomaton) -> ExtendedValue {
        automaton
            .accepting()
            .iter()
            .filter_map(|q| self.0[q].as_ref())
            .min()
            .map_or(ExtendedValue::Infinite, |v| ExtendedValue::Finite(v.clone()))
    }
}
