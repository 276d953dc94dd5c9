//! LimAvg automata without structural assumptions: bottom components of
//! `M × A^D`, permanent and transitory automaton SCCs, and the per-component
//! values that combine into the expected value and the distribution.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{validate_model, ExtendedValue, MarkovChain, ValueFunction, WeightedAutomaton};
use crate::product::{bscc_reach, ProductChain};
use crate::rational::{self, Rational};
use crate::recurrent::{approximate_value, BlockOptions, BlockValue};
use crate::report::{ApproxReport, Bound, Parameters};
use crate::scc;
use crate::stateset::StateSet;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SccVerdict {
    pub states: StateSet,
    /// Almost every word has a run that eventually stays in `states`.
    pub permanent: bool,
}

/// One bottom component `R_i` of `M × A^D`.
#[derive(Clone, Debug)]
pub struct BsccStructure {
    /// Product states of the component, sorted.
    pub product_states: Vec<usize>,
    /// Probability of reaching the component.
    pub reach: Rational,
    /// The pair `(s, A)` with the smallest product index.
    pub chain_state: usize,
    pub subset: StateSet,
    /// Automaton SCCs inside the union of the component's subsets, ordered by
    /// smallest state.
    pub sccs: Vec<SccVerdict>,
}

/// Builds `M × A^D` from `(s0, Q0)`, its bottom components, and classifies
/// the automaton SCCs each component can host.
pub fn scc_structure(automaton: &WeightedAutomaton, chain: &MarkovChain) -> Result<Vec<BsccStructure>> {
    if chain.is_terminating() {
        return Err(Error::Unsupported("SCC classification needs a non-terminating chain".into()));
    }
    let pc = ProductChain::explore(automaton, chain, chain.initial(), automaton.initial().clone());
    let reach = bscc_reach(&pc)?;
    let n = automaton.num_states();
    let mut out = Vec::new();
    for (comp, p) in reach.bsccs.into_iter().zip(reach.probs) {
        let (s, a) = pc.state(comp[0]);
        let a = a.clone();
        let mut union = StateSet::empty(n);
        for &i in &comp {
            union.union_with(pc.state(i).1);
        }
        let inside = automaton.restrict(&union, automaton.initial())?;
        let adj = inside.graph();
        let sccs = scc::components(&adj)
            .into_iter()
            .filter(|c| union.contains(c[0]))
            .map(|c| {
                let states = StateSet::from_iter(n, c);
                let permanent = is_permanent(automaton, chain, s, &a, &states)?;
                Ok(SccVerdict { states, permanent })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(BsccStructure { product_states: comp, reach: p, chain_state: s, subset: a, sccs });
    }
    Ok(out)
}

/// `S` is transitory iff `M × {∅}` is reachable from `(s, A ∩ S)` in the
/// product of the chain with the subset automaton of `A` restricted to `S`.
fn is_permanent(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
    s: usize,
    a: &StateSet,
    scc_states: &StateSet,
) -> Result<bool> {
    let start = a.intersection(scc_states);
    if start.is_empty() {
        return Ok(false);
    }
    let restricted = automaton.restrict(scc_states, &start)?;
    let pc = ProductChain::explore(&restricted, chain, s, start);
    Ok(!pc.reaches_empty())
}

#[derive(Clone, Debug)]
pub struct ClassifiedScc {
    pub states: StateSet,
    pub permanent: bool,
    /// Approximate value of the automaton restricted to this SCC, for
    /// permanent SCCs.
    pub value: Option<BlockValue>,
}

#[derive(Clone, Debug)]
pub struct ClassifiedBscc {
    pub product_states: Vec<usize>,
    pub reach: Rational,
    pub chain_state: usize,
    pub subset: StateSet,
    pub sccs: Vec<ClassifiedScc>,
    /// Minimum over the permanent SCC values, `Infinite` without any.
    pub gamma: ExtendedValue,
}

#[derive(Clone, Debug)]
pub struct SccClassification {
    pub bsccs: Vec<ClassifiedBscc>,
    pub epsilon: Rational,
}

fn check_limavg(automaton: &WeightedAutomaton, chain: &MarkovChain) -> Result<()> {
    if automaton.value_fn() != ValueFunction::LimAvg {
        return Err(Error::Unsupported(format!("expected a limavg automaton, found {}", automaton.value_fn())));
    }
    validate_model(automaton, chain)?;
    Ok(())
}

/// Classifies the SCCs of every bottom component and approximates the value
/// of each permanent SCC to within `ε`.
pub fn classify_sccs(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
    epsilon: &Rational,
    opts: &BlockOptions,
) -> Result<SccClassification> {
    check_limavg(automaton, chain)?;
    if !epsilon.is_positive() {
        return Err(Error::Invalid("epsilon must be positive".into()));
    }
    let structure = scc_structure(automaton, chain)?;
    let mut jobs = Vec::new();
    for (i, b) in structure.iter().enumerate() {
        for (j, v) in b.sccs.iter().enumerate() {
            if v.permanent {
                jobs.push((i, j));
            }
        }
    }
    let inner = BlockOptions { exec: Exec::sequential(), ..opts.clone() };
    let values = opts.exec.map(&jobs, |&(i, j)| {
        let b = &structure[i];
        let states = &b.sccs[j].states;
        let start = b.subset.intersection(states);
        let restricted = automaton.restrict(states, &start)?;
        approximate_value(&restricted, chain, b.chain_state, &start, epsilon, &inner)
    });
    let mut values = values.into_iter();
    let mut bsccs = Vec::new();
    for b in structure {
        let mut sccs = Vec::new();
        let mut gamma = ExtendedValue::Infinite;
        for v in b.sccs {
            let value = if v.permanent { Some(values.next().unwrap()?) } else { None };
            if let Some(bv) = &value {
                if bv.value < gamma {
                    gamma = bv.value.clone();
                }
            }
            sccs.push(ClassifiedScc { states: v.states, permanent: v.permanent, value });
        }
        bsccs.push(ClassifiedBscc {
            product_states: b.product_states,
            reach: b.reach,
            chain_state: b.chain_state,
            subset: b.subset,
            sccs,
            gamma,
        });
    }
    Ok(SccClassification { bsccs, epsilon: epsilon.clone() })
}

fn summary_params(c: &SccClassification) -> Parameters {
    let k = c.bsccs.iter().flat_map(|b| b.sccs.iter()).filter_map(|s| s.value.as_ref().map(|v| v.k)).max();
    Parameters { epsilon: Some(c.epsilon.clone()), k, ..Default::default() }
}

fn collect_warnings(c: &SccClassification) -> Vec<String> {
    let mut w: Vec<String> = c
        .bsccs
        .iter()
        .flat_map(|b| b.sccs.iter())
        .filter_map(|s| s.value.as_ref())
        .flat_map(|v| v.warnings.iter().cloned())
        .collect();
    w.sort();
    w.dedup();
    w
}

/// `E = Σ p_i·γ_i` over the bottom components, `Infinite` if a component of
/// positive probability has no permanent SCC.
pub fn limavg_expected_approx(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
    epsilon: &Rational,
    opts: &BlockOptions,
) -> Result<(ApproxReport, SccClassification)> {
    let c = classify_sccs(automaton, chain, epsilon, opts)?;
    let mut total = Rational::zero();
    let mut infinite = false;
    for b in &c.bsccs {
        match &b.gamma {
            ExtendedValue::Finite(g) => total += &b.reach * g,
            ExtendedValue::Infinite => infinite = true,
        }
    }
    let (value, bound) = if infinite {
        (ExtendedValue::Infinite, Bound::Exact)
    } else {
        (ExtendedValue::Finite(total), Bound::Absolute(epsilon.clone()))
    };
    let report = ApproxReport { value, bound, params: summary_params(&c), warnings: collect_warnings(&c) };
    Ok((report, c))
}

/// `Σ p_i` over the components with `γ_i ≤ λ`. Components with
/// `|γ_i − λ| ≤ ε` are counted and reported as boundary-ambiguous.
pub fn limavg_distribution_approx(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
    lambda: &Rational,
    epsilon: &Rational,
    opts: &BlockOptions,
) -> Result<(ApproxReport, SccClassification)> {
    let c = classify_sccs(automaton, chain, epsilon, opts)?;
    let mut total = Rational::zero();
    let mut warnings = collect_warnings(&c);
    for (i, b) in c.bsccs.iter().enumerate() {
        if let ExtendedValue::Finite(g) = &b.gamma {
            if g <= lambda {
                total += &b.reach;
            }
            if (g - lambda).abs() <= *epsilon {
                warnings.push(format!(
                    "component {i} has value {} within epsilon of lambda; counted as <= lambda",
                    rational::format(g)
                ));
            }
        }
    }
    let mut params = summary_params(&c);
    params.lambda = Some(lambda.clone());
    let report = ApproxReport {
        value: ExtendedValue::Finite(total),
        bound: Bound::Skorokhod(epsilon.clone()),
        params,
        warnings,
    };
    Ok((report, c))
}
