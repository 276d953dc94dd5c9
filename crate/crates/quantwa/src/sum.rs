//! Approximate distribution and expected value of Sum automata over
//! terminating chains, by exhaustive enumeration up to an exact tail cutoff.

use std::sync::atomic::{AtomicU64, Ordering};

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{validate_model, ExtendedValue, MarkovChain, ValueFunction, WeightedAutomaton};
use crate::rational::{self, Rational};
use crate::report::{ApproxReport, Bound, Parameters};
use crate::runprob::{run_probability, RunMode};
use crate::word::SumFrontier;

const MAX_CUTOFF: usize = 100_000;

/// Cutoff length chosen from exact survival probabilities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutoffPlan {
    pub budget: Rational,
    /// Words up to this length are enumerated.
    pub n: usize,
    /// `P(|w| > n)`.
    pub tail: Rational,
    /// In weighted mode, the bound on `|Σ_{|w|>n} P(w)·value(w)|`.
    pub residual: Option<Rational>,
    pub weight_bound: Option<Rational>,
}

/// Survival iteration: `alpha[s]` is the probability of having emitted `n`
/// letters and sitting in the live state `s`.
struct Survival<'a> {
    chain: &'a MarkovChain,
    alpha: Vec<Rational>,
}

impl<'a> Survival<'a> {
    fn from_state(chain: &'a MarkovChain, s: usize) -> Self {
        let mut alpha = vec![Rational::zero(); chain.num_states()];
        if !chain.is_terminal(s) {
            alpha[s] = Rational::one();
        }
        Survival { chain, alpha }
    }

    /// Advances one letter and returns the probability of emitting it.
    fn step(&mut self) -> Rational {
        let mut next = vec![Rational::zero(); self.alpha.len()];
        let mut emitted = Rational::zero();
        for (s, mass) in self.alpha.iter().enumerate() {
            if mass.is_zero() {
                continue;
            }
            for e in self.chain.edges_from(s) {
                if e.letter.is_none() {
                    continue;
                }
                let m = mass * &e.prob;
                emitted += &m;
                if !self.chain.is_terminal(e.dst) {
                    next[e.dst] += m;
                }
            }
        }
        self.alpha = next;
        emitted
    }
}

/// Chooses the cutoff `N` for a terminating chain.
///
/// Unweighted: the least `N` with `P(|w| ≥ N) ≤ budget`. Weighted with bound
/// `W` on absolute weights: the least `N` whose residual
/// `W·(N·t + h·t/(1−r))` is at most the budget, where `t = P(|w| > N)`, `h`
/// is the number of live chain states plus one and `r < 1` the largest
/// probability of emitting at least `h` more letters from a live state.
pub fn tail_cutoff(chain: &MarkovChain, budget: &Rational, weight_bound: Option<&Rational>) -> Result<CutoffPlan> {
    if !chain.is_terminating() {
        return Err(Error::Unsupported("tail cutoff needs a terminating chain".into()));
    }
    if !budget.is_positive() {
        return Err(Error::Invalid("cutoff budget must be positive".into()));
    }
    let mut surv = Survival::from_state(chain, chain.initial());
    // s[n] = P(|w| ≥ n)
    let mut s = vec![Rational::one()];
    let mut next = |s: &mut Vec<Rational>| s.push(surv.step());

    if weight_bound.is_some_and(|w| w.is_zero()) {
        next(&mut s);
        return Ok(CutoffPlan {
            budget: budget.clone(),
            n: 0,
            tail: s[1].clone(),
            residual: Some(Rational::zero()),
            weight_bound: weight_bound.cloned(),
        });
    }
    let Some(w) = weight_bound else {
        let mut n = 0;
        while s[n] > *budget {
            n += 1;
            if n > MAX_CUTOFF {
                return Err(Error::Budget(format!("no cutoff below {MAX_CUTOFF} meets the budget")));
            }
            next(&mut s);
        }
        next(&mut s);
        return Ok(CutoffPlan {
            budget: budget.clone(),
            n,
            tail: s[n + 1].clone(),
            residual: None,
            weight_bound: None,
        });
    };

    let live: Vec<usize> = (0..chain.num_states()).filter(|&x| !chain.is_terminal(x)).collect();
    let h = live.len() + 1;
    let mut r = Rational::zero();
    for &x in &live {
        let mut sv = Survival::from_state(chain, x);
        let mut p = Rational::one();
        for _ in 0..h {
            p = sv.step();
        }
        // p = P(at least h letters from x)
        if p > r {
            r = p;
        }
    }
    if r >= Rational::one() {
        return Err(Error::Internal("chain survives with certainty".into()));
    }
    let envelope = rational::int(h as i64) / (Rational::one() - &r);
    next(&mut s);
    let mut n = 0;
    loop {
        let t = &s[n + 1];
        let residual = w * (rational::int(n as i64) * t + &envelope * t);
        if residual <= *budget {
            return Ok(CutoffPlan {
                budget: budget.clone(),
                n,
                tail: t.clone(),
                residual: Some(residual),
                weight_bound: Some(w.clone()),
            });
        }
        n += 1;
        if n > MAX_CUTOFF {
            return Err(Error::Budget(format!("no cutoff below {MAX_CUTOFF} meets the budget")));
        }
        next(&mut s);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SumOptions {
    /// Maximal number of enumerated word prefixes.
    pub node_budget: u64,
    pub exec: Exec,
}

impl Default for SumOptions {
    fn default() -> Self {
        SumOptions { node_budget: 200_000_000, exec: Exec::default() }
    }
}

/// A node of the word enumeration: the chain mass over live states after the
/// prefix, the mass of having stopped right after its last letter, and the
/// Sum frontier of the automaton.
#[derive(Clone)]
struct Node {
    depth: usize,
    alpha: Vec<Rational>,
    stopped: Rational,
    frontier: SumFrontier,
}

struct Enumeration<'a> {
    automaton: &'a WeightedAutomaton,
    chain: &'a MarkovChain,
    max_len: usize,
    budget: u64,
    nodes: AtomicU64,
}

impl Enumeration<'_> {
    fn stop_mass(&self, node: &Node) -> Rational {
        let mut m = node.stopped.clone();
        for (s, mass) in node.alpha.iter().enumerate() {
            if mass.is_zero() {
                continue;
            }
            for e in self.chain.edges_from(s) {
                if e.letter.is_none() {
                    m += mass * &e.prob;
                }
            }
        }
        m
    }

    fn children(&self, node: &Node) -> Vec<Node> {
        let mut out = Vec::new();
        if node.depth >= self.max_len {
            return out;
        }
        for a in 0..self.automaton.num_letters() {
            let mut alpha = vec![Rational::zero(); node.alpha.len()];
            let mut stopped = Rational::zero();
            let mut any = false;
            for (s, mass) in node.alpha.iter().enumerate() {
                if mass.is_zero() {
                    continue;
                }
                for e in self.chain.edges_from(s) {
                    if e.letter != Some(a) {
                        continue;
                    }
                    any = true;
                    let m = mass * &e.prob;
                    if self.chain.is_terminal(e.dst) {
                        stopped += m;
                    } else {
                        alpha[e.dst] += m;
                    }
                }
            }
            if !any {
                continue;
            }
            let frontier = node.frontier.step(self.automaton, a);
            if frontier.is_dead() {
                continue;
            }
            out.push(Node { depth: node.depth + 1, alpha, stopped, frontier });
        }
        out
    }

    fn count(&self) -> Result<()> {
        let n = self.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        if n > self.budget {
            return Err(Error::Budget(format!("word enumeration exceeded {} prefixes", self.budget)));
        }
        Ok(())
    }

    fn visit<F>(&self, node: &Node, f: &F) -> Result<Rational>
    where
        F: Fn(&ExtendedValue, &Rational) -> Result<Rational>,
    {
        self.count()?;
        let stop = self.stop_mass(node);
        let mut total = if stop.is_zero() { Rational::zero() } else { f(&node.frontier.value(self.automaton), &stop)? };
        for child in self.children(node) {
            total += self.visit(&child, f)?;
        }
        Ok(total)
    }

    /// Sums `f(value, P(word))` over all words of length at most `max_len`
    /// with positive probability and at least one live run.
    fn run<F>(&self, exec: Exec, f: F) -> Result<Rational>
    where
        F: Fn(&ExtendedValue, &Rational) -> Result<Rational> + Sync + Send,
    {
        let mut alpha = vec![Rational::zero(); self.chain.num_states()];
        let s0 = self.chain.initial();
        let stopped = if self.chain.is_terminal(s0) {
            Rational::one()
        } else {
            alpha[s0] = Rational::one();
            Rational::zero()
        };
        let root = Node { depth: 0, alpha, stopped, frontier: SumFrontier::start(self.automaton) };
        if root.frontier.is_dead() {
            return Ok(Rational::zero());
        }
        // Expand breadth-first until there is enough independent work.
        let mut total = Rational::zero();
        let mut layer = vec![root];
        while !layer.is_empty() && layer.len() < 512 && layer[0].depth < self.max_len {
            let mut next = Vec::new();
            for node in &layer {
                self.count()?;
                let stop = self.stop_mass(node);
                if !stop.is_zero() {
                    total += f(&node.frontier.value(self.automaton), &stop)?;
                }
                next.extend(self.children(node));
            }
            layer = next;
        }
        let parts = exec.map(&layer, |node| self.visit(node, &f));
        for p in parts {
            total += p?;
        }
        Ok(total)
    }
}

fn check_sum_model(automaton: &WeightedAutomaton, chain: &MarkovChain) -> Result<()> {
    if automaton.value_fn() != ValueFunction::Sum {
        return Err(Error::Unsupported(format!("expected a sum automaton, found {}", automaton.value_fn())));
    }
    validate_model(automaton, chain)?;
    Ok(())
}

fn enumeration<'a>(automaton: &'a WeightedAutomaton, chain: &'a MarkovChain, n: usize, budget: u64) -> Enumeration<'a> {
    Enumeration { automaton, chain, max_len: n, budget, nodes: AtomicU64::new(0) }
}

/// `P(value ≤ λ)` restricted to words of length at most `N`, where `N` comes
/// from [`tail_cutoff`] with budget `ε/2`. The true distribution lies in the
/// reported window `[answer, answer + P(|w| > N)]`.
pub fn sum_distribution_approx(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
    lambda: &Rational,
    epsilon: &Rational,
    opts: &SumOptions,
) -> Result<ApproxReport> {
    check_sum_model(automaton, chain)?;
    if !epsilon.is_positive() {
        return Err(Error::Invalid("epsilon must be positive".into()));
    }
    let plan = tail_cutoff(chain, &(epsilon / rational::int(2)), None)?;
    let answer = enumeration(automaton, chain, plan.n, opts.node_budget).run(opts.exec, |v, p| {
        Ok(match v {
            ExtendedValue::Finite(x) if x <= lambda => p.clone(),
            _ => Rational::zero(),
        })
    })?;
    let upper = &answer + &plan.tail;
    Ok(ApproxReport {
        value: ExtendedValue::Finite(answer.clone()),
        bound: Bound::Window { lower: answer, upper },
        params: Parameters {
            epsilon: Some(epsilon.clone()),
            lambda: Some(lambda.clone()),
            cutoff: Some(plan.n),
            tail: Some(plan.tail),
            ..Default::default()
        },
        warnings: Vec::new(),
    })
}

/// Expected value truncated at the weighted cutoff; the reported absolute
/// bound is the residual of [`tail_cutoff`]. Returns `Infinite` exactly when
/// a word of positive probability has no accepting run.
pub fn sum_expected_approx(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
    epsilon: &Rational,
    opts: &SumOptions,
) -> Result<ApproxReport> {
    check_sum_model(automaton, chain)?;
    if !epsilon.is_positive() {
        return Err(Error::Invalid("epsilon must be positive".into()));
    }
    let accept = run_probability(automaton, chain, RunMode::FiniteAcceptance)?;
    if !accept.is_one() {
        let mut r = ApproxReport::exact(ExtendedValue::Infinite);
        r.warnings.push(format!(
            "words without an accepting run have probability {}",
            rational::format(&(Rational::one() - accept))
        ));
        return Ok(r);
    }
    let w = automaton.max_abs_weight();
    let plan = tail_cutoff(chain, epsilon, Some(&w))?;
    let answer = enumeration(automaton, chain, plan.n, opts.node_budget).run(opts.exec, |v, p| match v {
        ExtendedValue::Finite(x) => Ok(x * p),
        ExtendedValue::Infinite => Err(Error::Internal("accepted word without a value".into())),
    })?;
    let residual = plan.residual.clone().unwrap_or_else(Rational::zero);
    Ok(ApproxReport {
        value: ExtendedValue::Finite(answer),
        bound: Bound::Absolute(residual),
        params: Parameters {
            epsilon: Some(epsilon.clone()),
            cutoff: Some(plan.n),
            tail: Some(plan.tail),
            ..Default::default()
        },
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AutomatonBuilder;
    use crate::rational::{int, ratio};

    fn ab() -> MarkovChain {
        MarkovChain::uniform_terminating(&["a", "b"])
    }

    fn counter() -> WeightedAutomaton {
        AutomatonBuilder::new(&["a", "b"])
            .initial("p")
            .accepting("p")
            .t("p", "a", "p", 1)
            .t("p", "b", "p", 0)
            .build(ValueFunction::Sum)
            .unwrap()
    }

    #[test]
    fn cutoff_for_uniform_chain() {
        let p = tail_cutoff(&ab(), &ratio(1, 200), None).unwrap();
        assert_eq!(p.n, 14);
        assert_eq!(p.tail, ratio(2i64.pow(15), 3i64.pow(15)));
        assert_eq!(tail_cutoff(&ab(), &int(1), None).unwrap().n, 0);
        assert_eq!(tail_cutoff(&ab(), &int(2), None).unwrap().n, 0);
    }

    #[test]
    fn weighted_cutoff_with_zero_weights() {
        let p = tail_cutoff(&ab(), &ratio(1, 200), Some(&int(0))).unwrap();
        assert_eq!(p.n, 0);
        assert_eq!(p.residual, Some(int(0)));
    }

    #[test]
    fn weighted_residual_dominates_true_tail() {
        // E[|w|; |w| > N] for the geometric length distribution, in closed form.
        let p = tail_cutoff(&ab(), &ratio(1, 1000), Some(&int(1))).unwrap();
        let q = ratio(2, 3);
        let n = p.n as i64;
        let t = num_traits::pow(q.clone(), p.n + 1);
        let exact = &t * (int(n + 1) + &q / (int(1) - &q));
        assert!(p.residual.clone().unwrap() >= exact);
        assert!(p.residual.unwrap() <= ratio(1, 1000));
    }

    #[test]
    fn expected_letter_count() {
        let r = sum_expected_approx(&counter(), &ab(), &ratio(1, 100), &SumOptions::default()).unwrap();
        let v = r.value.finite().unwrap().clone();
        let Bound::Absolute(b) = r.bound else { panic!() };
        assert!((v - int(1)).abs() <= b);
        assert!(b <= ratio(1, 100));
    }

    #[test]
    fn zero_weights_give_zero() {
        let a = AutomatonBuilder::new(&["a", "b"])
            .initial("p")
            .accepting("p")
            .t("p", "a", "p", 0)
            .t("p", "b", "p", 0)
            .build(ValueFunction::Sum)
            .unwrap();
        let r = sum_expected_approx(&a, &ab(), &ratio(1, 100), &SumOptions::default()).unwrap();
        assert_eq!(r.value, ExtendedValue::Finite(int(0)));
        let d = sum_distribution_approx(&a, &ab(), &int(0), &ratio(1, 100), &SumOptions::default()).unwrap();
        let Bound::Window { lower, upper } = d.bound else { panic!() };
        assert!(lower <= int(1) && int(1) <= upper);
        assert!(int(1) - lower <= ratio(1, 100));
    }

    #[test]
    fn rejecting_automaton_is_infinite() {
        let a = AutomatonBuilder::new(&["a", "b"])
            .initial("p")
            .accepting("p")
            .t("p", "a", "p", 1)
            .build(ValueFunction::Sum)
            .unwrap();
        let r = sum_expected_approx(&a, &ab(), &ratio(1, 100), &SumOptions::default()).unwrap();
        assert_eq!(r.value, ExtendedValue::Infinite);
        assert!(r.is_exact());
    }

    #[test]
    fn threshold_below_all_values() {
        let r = sum_distribution_approx(&counter(), &ab(), &int(-1), &ratio(1, 100), &SumOptions::default()).unwrap();
        assert_eq!(r.value, ExtendedValue::Finite(int(0)));
    }

    #[test]
    fn node_budget_is_enforced() {
        let opts = SumOptions { node_budget: 10, ..Default::default() };
        let r = sum_distribution_approx(&counter(), &ab(), &int(0), &ratio(1, 100), &opts);
        assert!(matches!(r, Err(Error::Budget(_))));
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let seq = SumOptions { exec: Exec::sequential(), ..Default::default() };
        let par = SumOptions { exec: Exec::parallel(), ..Default::default() };
        let a = sum_distribution_approx(&counter(), &ab(), &int(2), &ratio(1, 500), &seq).unwrap();
        let b = sum_distribution_approx(&counter(), &ab(), &int(2), &ratio(1, 500), &par).unwrap();
        assert_eq!(a, b);
    }
}
