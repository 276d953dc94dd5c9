//! Reproducible word sampling and best-run prefix averages.
//!
//! Sample `i` of a run with seed `s` draws from ChaCha20 keyed with the
//! eight little-endian bytes of `s` followed by 24 zero bytes, on stream `i`.
//! Each letter consumes 64-bit outputs: the chain state's probabilities are
//! written over their least common denominator `D`, an integer in `[0, D)` is
//! drawn by masking outputs to the bit length of `D − 1` and rejecting values
//! `≥ D`, and the first edge (in canonical edge order) whose cumulative numerator
//! exceeds it is taken.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{ExtendedValue, MarkovChain, ValueFunction, WeightedAutomaton};
use crate::rational::Rational;

pub const GENERATOR: &str = "chacha20";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleConfig {
    pub samples: usize,
    /// Prefix length, a power of two.
    pub length: usize,
    pub seed: u64,
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Invalid("sample count must be at least 1".into()));
        }
        if !self.length.is_power_of_two() {
            return Err(Error::Invalid(format!("prefix length {} is not a power of two", self.length)));
        }
        Ok(())
    }
}

// (cumulative numerator, edge letter, edge target)
type Step = (u64, Option<usize>, usize);

/// Integer form of a chain for sampling.
pub struct Sampler<'a> {
    chain: &'a MarkovChain,
    // per state: denominator and steps
    rows: Vec<(u64, Vec<Step>)>,
}

impl<'a> Sampler<'a> {
    pub fn new(chain: &'a MarkovChain) -> Result<Self> {
        let mut rows = Vec::with_capacity(chain.num_states());
        for s in 0..chain.num_states() {
            let edges: Vec<_> = chain.edges_from(s).collect();
            let mut d = BigInt::one();
            for e in &edges {
                d = d.lcm(e.prob.denom());
            }
            let dr = Rational::from_integer(d.clone());
            let mut acc = 0u64;
            let mut cumulative = Vec::with_capacity(edges.len());
            for e in &edges {
                let num = (&e.prob * &dr).to_integer().to_u64();
                acc = num
                    .and_then(|n| acc.checked_add(n))
                    .ok_or_else(|| Error::Unsupported("chain probabilities need more than 64 bits to sample".into()))?;
                cumulative.push((acc, e.letter, e.dst));
            }
            let d = d.to_u64().ok_or_else(|| Error::Unsupported("chain denominators exceed 64 bits".into()))?;
            rows.push((d, cumulative));
        }
        Ok(Sampler { chain, rows })
    }

    /// Seeded generator for sample `stream`.
    pub fn rng(seed: u64, stream: u64) -> ChaCha20Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(stream);
        rng
    }

    fn below(rng: &mut ChaCha20Rng, d: u64) -> u64 {
        if d <= 1 {
            return 0;
        }
        let bits = 64 - (d - 1).leading_zeros();
        let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
        loop {
            let x = rng.next_u64() & mask;
            if x < d {
                return x;
            }
        }
    }

    /// Draws one chain move from `s`: `(letter, next state)`.
    fn step(&self, rng: &mut ChaCha20Rng, s: usize) -> (Option<usize>, usize) {
        let (d, cumulative) = &self.rows[s];
        let x = Self::below(rng, *d);
        let i = cumulative.partition_point(|&(c, _, _)| c <= x);
        let (_, letter, dst) = cumulative[i];
        (letter, dst)
    }

    /// Feeds up to `length` letters to `visit`, stopping early when a
    /// terminating chain ends the word.
    pub fn for_each_letter(&self, rng: &mut ChaCha20Rng, length: usize, mut visit: impl FnMut(usize)) {
        let mut s = self.chain.initial();
        let mut emitted = 0;
        while emitted < length && !self.chain.is_terminal(s) {
            let (letter, next) = self.step(rng, s);
            if let Some(a) = letter {
                visit(a);
                emitted += 1;
            }
            s = next;
        }
    }
}

/// Word of `length` letters (or up to termination) for sample `stream`.
pub fn sample_word(chain: &MarkovChain, length: usize, seed: u64, stream: u64) -> Result<Vec<usize>> {
    let sampler = Sampler::new(chain)?;
    let mut rng = Sampler::rng(seed, stream);
    let mut w = Vec::with_capacity(length);
    sampler.for_each_letter(&mut rng, length, |a| w.push(a));
    Ok(w)
}

/// Min-plus forward pass with weights scaled to integers.
pub struct PrefixEstimator<'a> {
    automaton: &'a WeightedAutomaton,
    scale: BigInt,
    // trans[q][a] = (dst, scaled weight)
    trans: Vec<Vec<Vec<(usize, i128)>>>,
    cost: Vec<Option<i128>>,
    next: Vec<Option<i128>>,
    len: usize,
}

impl<'a> PrefixEstimator<'a> {
    pub fn new(automaton: &'a WeightedAutomaton) -> Result<Self> {
        let mut scale = BigInt::one();
        for t in automaton.transitions() {
            scale = scale.lcm(t.weight.denom());
        }
        let sr = Rational::from_integer(scale.clone());
        let n = automaton.num_states();
        let mut trans = vec![vec![Vec::new(); automaton.num_letters()]; n];
        for (q, row) in trans.iter_mut().enumerate() {
            for (a, slot) in row.iter_mut().enumerate() {
                for &(q2, t) in automaton.successors(q, a) {
                    let w = (automaton.weight(t) * &sr)
                        .to_integer()
                        .to_i128()
                        .filter(|w| w.abs() < 1i128 << 80)
                        .ok_or_else(|| Error::Unsupported("scaled weights exceed 80 bits".into()))?;
                    slot.push((q2, w));
                }
            }
        }
        let mut est = PrefixEstimator { automaton, scale, trans, cost: vec![None; n], next: vec![None; n], len: 0 };
        est.reset();
        Ok(est)
    }

    pub fn reset(&mut self) {
        self.cost.iter_mut().for_each(|c| *c = None);
        for q in self.automaton.initial().iter() {
            self.cost[q] = Some(0);
        }
        self.len = 0;
    }

    pub fn push(&mut self, letter: usize) {
        self.next.iter_mut().for_each(|c| *c = None);
        for (q, c) in self.cost.iter().enumerate() {
            let Some(c) = *c else { continue };
            for &(q2, w) in &self.trans[q][letter] {
                let v = c + w;
                let slot = &mut self.next[q2];
                if slot.is_none_or(|x| v < x) {
                    *slot = Some(v);
                }
            }
        }
        std::mem::swap(&mut self.cost, &mut self.next);
        self.len += 1;
    }

    /// Least average weight of a run over the letters pushed so far;
    /// `Infinite` when no run survives or nothing was pushed.
    pub fn value(&self) -> ExtendedValue {
        match self.cost.iter().flatten().min() {
            Some(&c) if self.len > 0 => {
                ExtendedValue::Finite(Rational::new(BigInt::from(c), &self.scale * BigInt::from(self.len)))
            }
            _ => ExtendedValue::Infinite,
        }
    }
}

/// Least run average over `word` for each word.
pub fn estimate_values(automaton: &WeightedAutomaton, words: &[Vec<usize>]) -> Result<Vec<ExtendedValue>> {
    let mut est = PrefixEstimator::new(automaton)?;
    Ok(words
        .iter()
        .map(|w| {
            est.reset();
            w.iter().for_each(|&a| est.push(a));
            est.value()
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleStats {
    pub count: usize,
    /// Samples without a run, excluded from the statistics.
    pub infinite: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation (`n − 1` in the denominator).
    pub std_dev: f64,
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Statistics of the finite values.
pub fn summarize(values: &[ExtendedValue]) -> SampleStats {
    let xs: Vec<f64> = values.iter().filter_map(|v| v.finite().map(crate::rational::to_f64)).collect();
    let infinite = values.len() - xs.len();
    if xs.is_empty() {
        return SampleStats { count: 0, infinite, mean: f64::NAN, min: f64::NAN, max: f64::NAN, std_dev: f64::NAN };
    }
    let n = xs.len() as f64;
    let mean = pairwise_sum(&xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let std_dev = if xs.len() > 1 { (pairwise_sum(&dev) / (n - 1.0)).sqrt() } else { 0.0 };
    SampleStats {
        count: xs.len(),
        infinite,
        mean,
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        std_dev,
    }
}

/// Samples `config.samples` words and returns each one's prefix estimate
/// under every automaton, in sample order: `result[i][j]` is automaton `j`
/// on sample `i`.
pub fn sample_estimates(
    automata: &[&WeightedAutomaton],
    chain: &MarkovChain,
    config: &SampleConfig,
    exec: Exec,
) -> Result<Vec<Vec<ExtendedValue>>> {
    config.validate()?;
    for a in automata {
        if a.alphabet() != chain.alphabet() {
            return Err(Error::Invalid("automaton and chain alphabets differ".into()));
        }
    }
    let sampler = Sampler::new(chain)?;
    let seeds: Vec<u64> = (0..config.samples as u64).collect();
    exec.map(&seeds, |&i| {
        let mut rng = Sampler::rng(config.seed, i);
        let mut ests = automata.iter().map(|a| PrefixEstimator::new(a)).collect::<Result<Vec<_>>>()?;
        sampler.for_each_letter(&mut rng, config.length, |a| ests.iter_mut().for_each(|e| e.push(a)));
        Ok(ests.iter().map(PrefixEstimator::value).collect())
    })
    .into_iter()
    .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleReport {
    pub config: SampleConfig,
    pub generator: &'static str,
    pub stats: SampleStats,
    pub notes: Vec<String>,
}

/// The sampling experiment for one LimAvg automaton.
pub fn run_experiment(
    automaton: &WeightedAutomaton,
    chain: &MarkovChain,
    config: &SampleConfig,
    exec: Exec,
) -> Result<SampleReport> {
    if automaton.value_fn() != ValueFunction::LimAvg {
        return Err(Error::Unsupported(format!("expected a limavg automaton, found {}", automaton.value_fn())));
    }
    if chain.is_terminating() {
        return Err(Error::Unsupported("prefix estimates need a non-terminating chain".into()));
    }
    let values: Vec<ExtendedValue> =
        sample_estimates(&[automaton], chain, config, exec)?.into_iter().map(|mut v| v.remove(0)).collect();
    Ok(SampleReport {
        config: *config,
        generator: GENERATOR,
        stats: summarize(&values),
        notes: vec![
            "each estimate is the least run average over a finite prefix, a low-biased estimate of the limit average"
                .into(),
        ],
    })
}
