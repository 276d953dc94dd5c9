//! Absorption into bottom components and mean payoff of finite chains.

use std::collections::HashMap;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rational::Rational;
use crate::scc;

/// Bottom components reachable from `initial` and the probability of ending
/// in each. `edges[s]` lists `(target, probability)`; a state without edges
/// is absorbing. Components are sorted by their smallest state.
pub fn reach_bottom(edges: &[Vec<(usize, Rational)>], initial: usize) -> Result<(Vec<Vec<usize>>, Vec<Rational>)> {
    let n = edges.len();
    let adj: Vec<Vec<usize>> = edges
        .iter()
        .map(|es| {
            let mut v: Vec<usize> = es.iter().filter(|(_, p)| !p.is_zero()).map(|(t, _)| *t).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    // Restrict to the part reachable from `initial`.
    let mut seen = vec![false; n];
    let mut stack = vec![initial];
    seen[initial] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    let bottoms: Vec<Vec<usize>> = scc::bottom_components(&adj).into_iter().filter(|c| seen[c[0]]).collect();
    let mut which = vec![usize::MAX; n];
    for (j, c) in bottoms.iter().enumerate() {
        for &s in c {
            which[s] = j;
        }
    }
    let k = bottoms.len();
    if which[initial] != usize::MAX {
        let mut p = vec![Rational::zero(); k];
        p[which[initial]] = Rational::one();
        return Ok((bottoms, p));
    }
    let transient: Vec<usize> = (0..n).filter(|&s| seen[s] && which[s] == usize::MAX).collect();
    let pos: HashMap<usize, usize> = transient.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let m = transient.len();
    let mut a = vec![vec![Rational::zero(); m]; m];
    let mut b = vec![vec![Rational::zero(); k]; m];
    for (i, &s) in transient.iter().enumerate() {
        a[i][i] += Rational::one();
        for (t, p) in &edges[s] {
            if let Some(&j) = pos.get(t) {
                a[i][j] -= p;
            } else if which[*t] != usize::MAX {
                b[i][which[*t]] += p;
            }
        }
    }
    let x = linalg::solve_multi(a, b)?;
    Ok((bottoms, x[pos[&initial]].clone()))
}

/// A finite chain whose edges carry a probability and a weight.
#[derive(Clone, Debug, Default)]
pub struct WeightedChain {
    pub initial: usize,
    /// `edges[s]` lists `(target, probability, weight)`.
    pub edges: Vec<Vec<(usize, Rational, Rational)>>,
}

impl WeightedChain {
    fn prob_edges(&self) -> Vec<Vec<(usize, Rational)>> {
        self.edges.iter().map(|es| es.iter().map(|(t, p, _)| (*t, p.clone())).collect()).collect()
    }

    /// Bottom components reachable from the initial state with their reach
    /// probabilities and long-run average weights.
    pub fn bottom_values(&self) -> Result<Vec<(Vec<usize>, Rational, Rational)>> {
        let (bottoms, probs) = reach_bottom(&self.prob_edges(), self.initial)?;
        bottoms
            .into_iter()
            .zip(probs)
            .map(|(c, p)| {
                let v = self.component_mean(&c)?;
                Ok((c, p, v))
            })
            .collect()
    }

    /// Mean payoff of a closed component via its stationary distribution.
    fn component_mean(&self, comp: &[usize]) -> Result<Rational> {
        let pos: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let m = comp.len();
        if comp.iter().all(|&s| self.edges[s].is_empty()) {
            return Err(Error::Unsupported("absorbing state without a self-loop has no mean payoff".into()));
        }
        // Rows j < m-1: sum_i pi_i (delta_ij - P_ij) = 0; last row: sum pi = 1.
        let mut a = vec![vec![Rational::zero(); m]; m];
        for (i, &s) in comp.iter().enumerate() {
            a[i][i] += Rational::one();
            for (t, p, _) in &self.edges[s] {
                let j = *pos.get(t).ok_or_else(|| Error::Internal("component is not closed".into()))?;
                a[j][i] -= p;
            }
        }
        for x in a[m - 1].iter_mut() {
            *x = Rational::one();
        }
        let mut b = vec![Rational::zero(); m];
        b[m - 1] = Rational::one();
        let pi = linalg::solve(a, b)?;
        let mut total = Rational::zero();
        for (i, &s) in comp.iter().enumerate() {
            let local: Rational = self.edges[s].iter().map(|(_, p, w)| p * w).sum();
            total += &pi[i] * local;
        }
        Ok(total)
    }
}

/// Long-run average weight of a chain with a single reachable bottom
/// component.
pub fn chain_mean_payoff(chain: &WeightedChain) -> Result<Rational> {
    let parts = chain.bottom_values()?;
    if parts.len() != 1 {
        return Err(Error::Unsupported(format!("chain has {} bottom components, expected one", parts.len())));
    }
    Ok(parts.into_iter().next().unwrap().2)
}
