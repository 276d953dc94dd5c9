//! ε-approximate determinisation of LimAvg automata.
//!
//! The result is the power-set automaton of the input. Every state `Y`
//! carries one weight on all its outgoing transitions: the least
//! approximated value `v_i` over the automaton SCCs `C_i` meeting `Y`, or
//! the largest weight of the input when no such value is finite.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{validate_model, ExtendedValue, MarkovChain, Transition, ValueFunction, WeightedAutomaton};
use crate::montecarlo::{sample_estimates, summarize, SampleConfig, SampleStats};
use crate::rational::{self, Rational};
use crate::recurrent::{approximate_value, BlockOptions, BlockValue};
use crate::scc;
use crate::stateset::StateSet;
use crate::subset::SubsetAutomaton;

#[derive(Clone, Debug)]
pub struct SccValue {
    pub states: StateSet,
    /// `Infinite` when almost no word keeps a run inside the component.
    pub value: ExtendedValue,
    pub block: Option<BlockValue>,
}

#[derive(Clone, Debug)]
pub struct DeterministicLimAvg {
    pub automaton: WeightedAutomaton,
    /// Input states behind each output state.
    pub subsets: Vec<StateSet>,
    /// Index into `sccs` of the component whose value weights each state;
    /// `None` where the largest weight is used.
    pub provenance: Vec<Option<usize>>,
    pub sccs: Vec<SccValue>,
    pub epsilon: Rational,
    pub warnings: Vec<String>,
}

fn state_name(automaton: &WeightedAutomaton, set: &StateSet) -> String {
    if set.is_empty() {
        return "_empty".into();
    }
    set.iter().map(|q| automaton.states()[q].as_str()).collect::<Vec<_>>().join("+")
}

/// Values of the components, each approximated within `ε/2` and then
/// replaced by the simplest rational within `ε/8` unless the component has
/// a single weight.
fn component_values(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
    epsilon: &Rational,
    opts: &BlockOptions,
) -> Result<Vec<SccValue>> {
    let adj = automaton.graph();
    let comps = scc::components(&adj);
    let half = epsilon / rational::int(2);
    let slack = epsilon / rational::int(8);
    let inner = BlockOptions { exec: Exec::sequential(), ..opts.clone() };
    let n = automaton.num_states();
    let results = opts.exec.map(&comps, |comp| {
        let states = StateSet::from_iter(n, comp.iter().copied());
        if !scc::is_nontrivial(comp, &adj) {
            return Ok(SccValue { states, value: ExtendedValue::Infinite, block: None });
        }
        let restricted = automaton.restrict(&states, &states)?;
        let bv = approximate_value(&restricted, chain, chain.initial(), &states, &half, &inner)?;
        let value = match &bv.live_value {
            None => ExtendedValue::Infinite,
            Some(v) => {
                let ws = restricted.distinct_weights();
                if ws.len() == 1 {
                    ExtendedValue::Finite(ws[0].clone())
                } else {
                    ExtendedValue::Finite(rational::simplest_between(&(v - &slack), &(v + &slack)))
                }
            }
        };
        Ok(SccValue { states, value, block: Some(bv) })
    });
    results.into_iter().collect()
}

/// Deterministic LimAvg automaton whose value is within `ε` of the input's
/// on almost every word.
pub fn approx_determinise(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
    epsilon: &Rational,
    opts: &BlockOptions,
) -> Result<DeterministicLimAvg> {
    if automaton.value_fn() != ValueFunction::LimAvg {
        return Err(Error::Unsupported(format!("expected a limavg automaton, found {}", automaton.value_fn())));
    }
    validate_model(automaton, chain)?;
    if !epsilon.is_positive() {
        return Err(Error::Invalid("epsilon must be positive".into()));
    }
    let sccs = component_values(automaton, chain, epsilon, opts)?;
    let fallback = automaton.max_weight().cloned().unwrap_or_else(Rational::zero);
    let subsets = SubsetAutomaton::explore(automaton, std::slice::from_ref(automaton.initial()));
    let mut provenance = Vec::with_capacity(subsets.len());
    let mut weights = Vec::with_capacity(subsets.len());
    for y in subsets.sets() {
        let best = sccs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.states.intersects(y))
            .filter_map(|(i, c)| c.value.finite().map(|v| (v, i)))
            .min();
        match best {
            Some((v, i)) => {
                weights.push(v.clone());
                provenance.push(Some(i));
            }
            None => {
                weights.push(fallback.clone());
                provenance.push(None);
            }
        }
    }
    let mut transitions = Vec::with_capacity(subsets.len() * automaton.num_letters());
    for (i, w) in weights.iter().enumerate() {
        for a in 0..automaton.num_letters() {
            transitions.push(Transition { src: i, letter: a, dst: subsets.delta(i, a), weight: w.clone() });
        }
    }
    let names = subsets.sets().iter().map(|s| state_name(automaton, s)).collect();
    let det =
        WeightedAutomaton::new(automaton.alphabet().to_vec(), names, [0], [], transitions, ValueFunction::LimAvg)?;
    let mut warnings: Vec<String> =
        sccs.iter().filter_map(|c| c.block.as_ref()).flat_map(|b| b.warnings.iter().cloned()).collect();
    if provenance.iter().any(Option::is_none) {
        warnings.push(format!(
            "states meeting no component of finite value carry the largest weight {}",
            rational::format(&fallback)
        ));
    }
    warnings.sort();
    warnings.dedup();
    Ok(DeterministicLimAvg {
        automaton: det,
        subsets: subsets.sets().to_vec(),
        provenance,
        sccs,
        epsilon: epsilon.clone(),
        warnings,
    })
}

/// Statistical comparison of two automata on the same sampled prefixes.
#[derive(Clone, Debug, PartialEq)]
pub struct AgreementReport {
    pub config: SampleConfig,
    pub epsilon: f64,
    /// Three sample standard deviations of the original's estimates.
    pub tolerance: f64,
    /// Samples where both estimates are finite.
    pub compared: usize,
    /// Samples where exactly one estimate is infinite.
    pub mismatched: usize,
    /// Compared samples whose gap exceeds `epsilon + tolerance`, plus the
    /// mismatched ones.
    pub violations: usize,
    pub max_gap: f64,
    pub original: SampleStats,
    pub determinised: SampleStats,
}

impl AgreementReport {
    pub fn agreement_rate(&self) -> f64 {
        let total = self.compared + self.mismatched;
        if total == 0 {
            return 1.0;
        }
        1.0 - self.violations as f64 / total as f64
    }
}

/// Samples prefixes and compares the least run averages of `original` and
/// `determinised` on each. A statistical check, not a proof.
pub fn compare_on_samples(
    original: &WeightedAutomaton,
    determinised: &WeightedAutomaton,
    chain: &MarkovChain,
    epsilon: &Rational,
    config: &SampleConfig,
    exec: Exec,
) -> Result<AgreementReport> {
    if epsilon.is_negative() {
        return Err(Error::Invalid("epsilon must not be negative".into()));
    }
    let rows = sample_estimates(&[original, determinised], chain, config, exec)?;
    let left: Vec<ExtendedValue> = rows.iter().map(|r| r[0].clone()).collect();
    let right: Vec<ExtendedValue> = rows.iter().map(|r| r[1].clone()).collect();
    let original_stats = summarize(&left);
    let tolerance = if original_stats.count > 1 { 3.0 * original_stats.std_dev } else { 0.0 };
    let eps = rational::to_f64(epsilon);
    let mut compared = 0;
    let mut mismatched = 0;
    let mut violations = 0;
    let mut max_gap: f64 = 0.0;
    for (l, r) in left.iter().zip(&right) {
        match (l, r) {
            (ExtendedValue::Finite(x), ExtendedValue::Finite(y)) => {
                compared += 1;
                let gap = rational::to_f64(&(x - y).abs());
                max_gap = max_gap.max(gap);
                if gap > eps + tolerance {
                    violations += 1;
                }
            }
            (ExtendedValue::Infinite, ExtendedValue::Infinite) => {}
            _ => {
                mismatched += 1;
                violations += 1;
            }
        }
    }
    Ok(AgreementReport {
        config: *config,
        epsilon: eps,
        tolerance,
        compared,
        mismatched,
        violations,
        max_gap,
        original: original_stats,
        determinised: summarize(&right),
    })
}
