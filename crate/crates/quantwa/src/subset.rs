//! Power-set construction over reachable subsets.

use std::collections::HashMap;

use crate::model::WeightedAutomaton;
use crate::stateset::StateSet;

/// Deterministic automaton over the subsets reachable from its start sets.
/// Subset 0 is the first start set (`Q0` for [`subset_construct`]). The empty
/// set appears as an ordinary absorbing state when reachable.
#[derive(Clone, Debug)]
pub struct SubsetAutomaton {
    sets: Vec<StateSet>,
    index: HashMap<StateSet, usize>,
    delta: Vec<Vec<usize>>,
    letters: usize,
}

/// Subset construction started at `Q0`.
pub fn subset_construct(automaton: &WeightedAutomaton) -> SubsetAutomaton {
    SubsetAutomaton::explore(automaton, std::slice::from_ref(automaton.initial()))
}

impl SubsetAutomaton {
    /// Explores every subset reachable from any of `starts`, breadth first.
    pub fn explore(automaton: &WeightedAutomaton, starts: &[StateSet]) -> Self {
        let mut sa = SubsetAutomaton {
            sets: Vec::new(),
            index: HashMap::new(),
            delta: Vec::new(),
            letters: automaton.num_letters(),
        };
        for s in starts {
            sa.intern(s.clone());
        }
        let mut i = 0;
        while i < sa.sets.len() {
            let row: Vec<usize> = (0..sa.letters)
                .map(|a| {
                    let next = automaton.step(&sa.sets[i], a);
                    sa.intern(next)
                })
                .collect();
            sa.delta.push(row);
            i += 1;
        }
        sa
    }

    fn intern(&mut self, set: StateSet) -> usize {
        if let Some(&i) = self.index.get(&set) {
            return i;
        }
        let i = self.sets.len();
        self.index.insert(set.clone(), i);
        self.sets.push(set);
        i
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn set(&self, i: usize) -> &StateSet {
        &self.sets[i]
    }

    pub fn sets(&self) -> &[StateSet] {
        &self.sets
    }

    pub fn find(&self, set: &StateSet) -> Option<usize> {
        self.index.get(set).copied()
    }

    pub fn delta(&self, i: usize, letter: usize) -> usize {
        self.delta[i][letter]
    }

    pub fn delta_word(&self, i: usize, word: &[usize]) -> usize {
        word.iter().fold(i, |s, &a| self.delta[s][a])
    }

    pub fn num_letters(&self) -> usize {
        self.letters
    }

    /// Letter-free adjacency between subsets.
    pub fn graph(&self) -> Vec<Vec<usize>> {
        self.delta
            .iter()
            .map(|row| {
                let mut r = row.clone();
                r.sort_unstable();
                r.dedup();
                r
            })
            .collect()
    }
}
