//! The product of a Markov chain with a subset automaton, and its bottom
//! strongly connected components.

use std::collections::HashMap;

use crate::error::Result;
use crate::markov;
use crate::model::{MarkovChain, WeightedAutomaton};
use crate::rational::Rational;
use crate::stateset::StateSet;
use crate::subset::SubsetAutomaton;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductEdge {
    /// `None` for an ε-edge of a terminating chain.
    pub letter: Option<usize>,
    pub to: usize,
    pub prob: Rational,
}

/// Reachable part of `M × A^D`. State 0 is the start pair. Pairs whose chain
/// state is terminal have no outgoing edges.
#[derive(Clone, Debug)]
pub struct ProductChain {
    states: Vec<(usize, StateSet)>,
    index: HashMap<(usize, StateSet), usize>,
    edges: Vec<Vec<ProductEdge>>,
}

/// `M × A^D` started at `(s0, Q0)`.
pub fn product_chain(chain: &MarkovChain, subsets: &SubsetAutomaton) -> ProductChain {
    let start = (chain.initial(), 0usize);
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut order = vec![start];
    ids.insert(start, 0);
    let mut edges = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let (s, q) = order[i];
        let mut out = Vec::new();
        if !chain.is_terminal(s) {
            for e in chain.edges_from(s) {
                let nq = match e.letter {
                    Some(a) => subsets.delta(q, a),
                    None => q,
                };
                let key = (e.dst, nq);
                let to = *ids.entry(key).or_insert_with(|| {
                    order.push(key);
                    order.len() - 1
                });
                out.push(ProductEdge { letter: e.letter, to, prob: e.prob.clone() });
            }
        }
        edges.push(out);
        i += 1;
    }
    let states: Vec<(usize, StateSet)> = order.iter().map(|&(s, q)| (s, subsets.set(q).clone())).collect();
    let index = states.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    ProductChain { states, index, edges }
}

impl ProductChain {
    /// Product of `chain` started in `chain_start` with the subset automaton
    /// of `automaton` started in `start`.
    pub fn explore(automaton: &WeightedAutomaton, chain: &MarkovChain, chain_start: usize, start: StateSet) -> Self {
        let mut pc = ProductChain { states: Vec::new(), index: HashMap::new(), edges: Vec::new() };
        pc.intern((chain_start, start));
        let mut i = 0;
        while i < pc.states.len() {
            let (s, set) = pc.states[i].clone();
            let mut out = Vec::new();
            if !chain.is_terminal(s) {
                for e in chain.edges_from(s) {
                    let next = match e.letter {
                        Some(a) => automaton.step(&set, a),
                        None => set.clone(),
                    };
                    let to = pc.intern((e.dst, next));
                    out.push(ProductEdge { letter: e.letter, to, prob: e.prob.clone() });
                }
            }
            pc.edges.push(out);
            i += 1;
        }
        pc
    }

    fn intern(&mut self, key: (usize, StateSet)) -> usize {
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.states.len();
        self.index.insert(key.clone(), i);
        self.states.push(key);
        i
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> (usize, &StateSet) {
        (self.states[i].0, &self.states[i].1)
    }

    pub fn find(&self, chain_state: usize, set: &StateSet) -> Option<usize> {
        self.index.get(&(chain_state, set.clone())).copied()
    }

    pub fn edges(&self, i: usize) -> &[ProductEdge] {
        &self.edges[i]
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        self.edges
            .iter()
            .map(|es| {
                let mut v: Vec<usize> = es.iter().map(|e| e.to).collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect()
    }

    fn prob_edges(&self) -> Vec<Vec<(usize, Rational)>> {
        self.edges.iter().map(|es| es.iter().map(|e| (e.to, e.prob.clone())).collect()).collect()
    }

    /// True when some product state with an empty subset is reachable.
    pub fn reaches_empty(&self) -> bool {
        self.states.iter().any(|(_, s)| s.is_empty())
    }
}

/// Bottom components `R_1..R_k` of a product chain and the probabilities
/// `p_1..p_k` of reaching them from the start pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BsccReach {
    pub bsccs: Vec<Vec<usize>>,
    pub probs: Vec<Rational>,
}

pub fn bscc_reach(product: &ProductChain) -> Result<BsccReach> {
    let (bsccs, probs) = markov::reach_bottom(&product.prob_edges(), 0)?;
    Ok(BsccReach { bsccs, probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AutomatonBuilder, ValueFunction};
    use crate::rational::{int, ratio};
    use crate::subset::subset_construct;
    use num_traits::{One, Zero};

    fn escape() -> WeightedAutomaton {
        AutomatonBuilder::new(&["a", "b"])
            .initial("qI")
            .t("qI", "a", "qI", 1)
            .t("qI", "b", "qI", 1)
            .t("qI", "a", "qF", 0)
            .t("qI", "b", "qF", 0)
            .t("qF", "b", "qF", 0)
            .build(ValueFunction::LimAvg)
            .unwrap()
    }

    #[test]
    fn product_with_uniform_chain() {
        let a = escape();
        let m = MarkovChain::uniform(&["a", "b"]);
        let pc = product_chain(&m, &subset_construct(&a));
        assert_eq!(pc.len(), 2);
        let names: Vec<String> = (0..pc.len()).map(|i| a.format_set(pc.state(i).1)).collect();
        assert_eq!(names, vec!["{qI}", "{qI,qF}"]);
        for i in 0..pc.len() {
            assert!(pc.edges(i).iter().all(|e| e.prob == ratio(1, 2)));
            let total: Rational = pc.edges(i).iter().map(|e| e.prob.clone()).sum();
            assert!(total.is_one());
        }
        let r = bscc_reach(&pc).unwrap();
        assert_eq!(r.bsccs, vec![vec![1]]);
        assert_eq!(r.probs, vec![int(1)]);
    }

    #[test]
    fn explore_matches_full_construction() {
        let a = escape();
        let m = MarkovChain::uniform(&["a", "b"]);
        let lazy = ProductChain::explore(&a, &m, 0, a.initial().clone());
        let full = product_chain(&m, &subset_construct(&a));
        assert_eq!(lazy.len(), full.len());
        for i in 0..lazy.len() {
            assert_eq!(lazy.state(i), full.state(i));
            assert_eq!(lazy.edges(i), full.edges(i));
        }
        assert!(!lazy.reaches_empty());
        let total: Rational = bscc_reach(&lazy).unwrap().probs.iter().sum();
        assert!(!total.is_zero());
    }
}
