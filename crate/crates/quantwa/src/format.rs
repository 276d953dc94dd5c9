//! Line-oriented text format for an automaton together with its chain.
//!
//! ```text
//! wqa 1
//! alphabet a b
//! automaton
//! value limavg
//! states p r
//! initial p
//! accepting
//! trans p a p 1 2
//! trans p b r -3 1
//! trans r a p 0 1
//! trans r b r 0 1
//! chain
//! states s0
//! initial s0
//! terminal
//! edge s0 a s0 1 2
//! edge s0 b s0 1 2
//! end
//! ```
//!
//! Tokens are separated by whitespace; blank lines and text after `#` are
//! ignored. Weights and probabilities are written as a numerator followed by
//! a positive denominator. `END` in place of a letter marks an edge that ends
//! the word; it is reserved and cannot name a letter.
//!
//! The canonical form, produced by [`emit_model`], uses single spaces, no
//! comments, the section order above, reduced fractions, and transitions and
//! edges sorted by source, letter (with `END` first) and target in
//! declaration order. Parsing and re-emitting a canonical document
//! reproduces it byte for byte.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::model::{ChainEdge, MarkovChain, Transition, ValueFunction, WeightedAutomaton};
use crate::rational::Rational;

pub const END: &str = "END";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelDocument {
    pub automaton: WeightedAutomaton,
    pub chain: MarkovChain,
}

fn err<T>(line: usize, msg: impl AsRef<str>) -> Result<T> {
    Err(Error::Invalid(format!("line {line}: {}", msg.as_ref())))
}

fn fraction(line: usize, num: &str, den: &str) -> Result<Rational> {
    let n: BigInt = match num.parse() {
        Ok(n) => n,
        Err(_) => return err(line, format!("'{num}' is not an integer numerator")),
    };
    let d: BigInt = match den.parse() {
        Ok(d) => d,
        Err(_) => return err(line, format!("'{den}' is not an integer denominator")),
    };
    if !d.is_positive() {
        return err(line, "denominators must be positive");
    }
    Ok(Rational::new(n, d))
}

#[derive(Default)]
struct Section {
    fields: HashMap<&'static str, (usize, Vec<String>)>,
    rows: Vec<(usize, Vec<String>)>,
}

impl Section {
    fn set(&mut self, line: usize, key: &'static str, values: Vec<String>) -> Result<()> {
        if self.fields.insert(key, (line, values)).is_some() {
            return err(line, format!("'{key}' given twice"));
        }
        Ok(())
    }

    fn take(&mut self, key: &'static str, section: &str, end_line: usize) -> Result<(usize, Vec<String>)> {
        match self.fields.remove(key) {
            Some(v) => Ok(v),
            None => err(end_line, format!("{section} section lacks a '{key}' line")),
        }
    }
}

fn lookup(line: usize, index: &HashMap<String, usize>, name: &str, kind: &str) -> Result<usize> {
    match index.get(name) {
        Some(&i) => Ok(i),
        None => err(line, format!("unknown {kind} '{name}'")),
    }
}

fn index_of(names: &[String]) -> HashMap<String, usize> {
    names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect()
}

/// Parses a model document.
pub fn parse_model(text: &str) -> Result<ModelDocument> {
    #[derive(PartialEq)]
    enum At {
        Header,
        Alphabet,
        Opening,
        Automaton,
        Chain,
        Done,
    }
    let mut at = At::Header;
    let mut alphabet: Vec<String> = Vec::new();
    let mut aut = Section::default();
    let mut chain = Section::default();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<String> = content.split_whitespace().map(str::to_string).collect();
        let Some(key) = tokens.first() else { continue };
        let rest = tokens[1..].to_vec();
        match at {
            At::Header => {
                if key != "wqa" || rest != ["1"] {
                    return err(line, "expected the header 'wqa 1'");
                }
                at = At::Alphabet;
            }
            At::Alphabet => {
                if key != "alphabet" {
                    return err(line, "expected an 'alphabet' line");
                }
                if rest.is_empty() {
                    return err(line, "the alphabet is empty");
                }
                if rest.iter().any(|a| a == END) {
                    return err(line, "'END' is reserved and cannot be a letter");
                }
                alphabet = rest;
                at = At::Opening;
            }
            At::Opening => {
                if key != "automaton" || !rest.is_empty() {
                    return err(line, "expected an 'automaton' line");
                }
                at = At::Automaton;
            }
            At::Automaton => match key.as_str() {
                "value" => aut.set(line, "value", rest)?,
                "states" => aut.set(line, "states", rest)?,
                "initial" => aut.set(line, "initial", rest)?,
                "accepting" => aut.set(line, "accepting", rest)?,
                "trans" => aut.rows.push((line, rest)),
                "chain" if rest.is_empty() => at = At::Chain,
                _ => return err(line, format!("unexpected '{key}' in the automaton section")),
            },
            At::Chain => match key.as_str() {
                "states" => chain.set(line, "states", rest)?,
                "initial" => chain.set(line, "initial", rest)?,
                "terminal" => chain.set(line, "terminal", rest)?,
                "edge" => chain.rows.push((line, rest)),
                "end" if rest.is_empty() => at = At::Done,
                _ => return err(line, format!("unexpected '{key}' in the chain section")),
            },
            At::Done => return err(line, "text after 'end'"),
        }
    }
    if at != At::Done {
        return err(last_line, "document ends before 'end'");
    }
    let end = last_line;

    let (vl, value) = aut.take("value", "automaton", end)?;
    let value_fn = match value.as_slice() {
        [v] => match ValueFunction::from_name(v) {
            Some(vf) => vf,
            None => return err(vl, format!("unknown value function '{v}'")),
        },
        _ => return err(vl, "expected one value function"),
    };
    let (_, states) = aut.take("states", "automaton", end)?;
    let (il, initial) = aut.take("initial", "automaton", end)?;
    let (al, accepting) = aut.take("accepting", "automaton", end)?;
    let sidx = index_of(&states);
    let lidx = index_of(&alphabet);
    let initial = initial.iter().map(|q| lookup(il, &sidx, q, "state")).collect::<Result<Vec<_>>>()?;
    let accepting = accepting.iter().map(|q| lookup(al, &sidx, q, "state")).collect::<Result<Vec<_>>>()?;
    let mut transitions = Vec::with_capacity(aut.rows.len());
    for (line, row) in &aut.rows {
        let [src, letter, dst, num, den] = row.as_slice() else {
            return err(*line, "expected 'trans SRC LETTER DST NUM DEN'");
        };
        transitions.push(Transition {
            src: lookup(*line, &sidx, src, "state")?,
            letter: lookup(*line, &lidx, letter, "letter")?,
            dst: lookup(*line, &sidx, dst, "state")?,
            weight: fraction(*line, num, den)?,
        });
    }
    let automaton = WeightedAutomaton::new(alphabet.clone(), states, initial, accepting, transitions, value_fn)?;

    let (_, cstates) = chain.take("states", "chain", end)?;
    let (cil, cinit) = chain.take("initial", "chain", end)?;
    let (tl, terminal) = chain.take("terminal", "chain", end)?;
    let cidx = index_of(&cstates);
    let cinit = match cinit.as_slice() {
        [s] => lookup(cil, &cidx, s, "chain state")?,
        _ => return err(cil, "expected one initial chain state"),
    };
    let terminal = terminal.iter().map(|s| lookup(tl, &cidx, s, "chain state")).collect::<Result<Vec<_>>>()?;
    let mut edges = Vec::with_capacity(chain.rows.len());
    for (line, row) in &chain.rows {
        let [src, letter, dst, num, den] = row.as_slice() else {
            return err(*line, "expected 'edge SRC LETTER|END DST NUM DEN'");
        };
        let letter = if letter == END { None } else { Some(lookup(*line, &lidx, letter, "letter")?) };
        edges.push(ChainEdge {
            src: lookup(*line, &cidx, src, "chain state")?,
            letter,
            dst: lookup(*line, &cidx, dst, "chain state")?,
            prob: fraction(*line, num, den)?,
        });
    }
    let chain = MarkovChain::new(alphabet, cstates, cinit, terminal, edges)?;
    Ok(ModelDocument { automaton, chain })
}

fn write_fraction(out: &mut String, x: &Rational) {
    let (n, d) = if x.is_zero() { (BigInt::zero(), BigInt::from(1)) } else { (x.numer().clone(), x.denom().clone()) };
    let _ = write!(out, " {n} {d}");
}

/// Canonical text of an automaton and chain over the same alphabet.
pub fn emit_model(automaton: &WeightedAutomaton, chain: &MarkovChain) -> Result<String> {
    if automaton.alphabet() != chain.alphabet() {
        return Err(Error::Invalid("automaton and chain alphabets differ".into()));
    }
    let mut out = String::new();
    out.push_str("wqa 1\n");
    let _ = writeln!(out, "alphabet {}", automaton.alphabet().join(" "));
    out.push_str("automaton\n");
    let _ = writeln!(out, "value {}", automaton.value_fn().name());
    let _ = writeln!(out, "states {}", automaton.states().join(" "));
    let names =
        |set: &crate::stateset::StateSet| set.iter().map(|q| format!(" {}", automaton.states()[q])).collect::<String>();
    let _ = writeln!(out, "initial{}", names(automaton.initial()));
    let _ = writeln!(out, "accepting{}", names(automaton.accepting()));
    for t in automaton.transitions() {
        let _ = write!(
            out,
            "trans {} {} {}",
            automaton.states()[t.src],
            automaton.alphabet()[t.letter],
            automaton.states()[t.dst]
        );
        write_fraction(&mut out, &t.weight);
        out.push('\n');
    }
    out.push_str("chain\n");
    let _ = writeln!(out, "states {}", chain.states().join(" "));
    let _ = writeln!(out, "initial {}", chain.states()[chain.initial()]);
    let terminal: String = chain.terminal_states().map(|s| format!(" {}", chain.states()[s])).collect();
    let _ = writeln!(out, "terminal{terminal}");
    for e in chain.edges() {
        let letter = e.letter.map_or(END, |a| chain.alphabet()[a].as_str());
        let _ = write!(out, "edge {} {} {}", chain.states()[e.src], letter, chain.states()[e.dst]);
        write_fraction(&mut out, &e.prob);
        out.push('\n');
    }
    out.push_str("end\n");
    Ok(out)
}
