//! Answers with their error guarantees.

use crate::model::ExtendedValue;
use crate::rational::Rational;

/// How far the reported value may be from the true answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Bound {
    Exact,
    /// `|reported − true| ≤ bound`.
    Absolute(Rational),
    /// The true value lies in `[lower, upper]`.
    Window {
        lower: Rational,
        upper: Rational,
    },
    /// For a distribution query at `λ`, the reported value lies in
    /// `[D(λ−ε)−ε, D(λ+ε)+ε]`.
    Skorokhod(Rational),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Parameters {
    pub epsilon: Option<Rational>,
    pub lambda: Option<Rational>,
    /// Block length.
    pub k: Option<u64>,
    /// Longest enumerated word.
    pub cutoff: Option<usize>,
    /// Exact probability of words longer than the cutoff.
    pub tail: Option<Rational>,
    /// Grid step of the rounded block tables.
    pub epsilon0: Option<Rational>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApproxReport {
    pub value: ExtendedValue,
    pub bound: Bound,
    pub params: Parameters,
    pub warnings: Vec<String>,
}

impl ApproxReport {
    pub fn exact(value: ExtendedValue) -> Self {
        ApproxReport { value, bound: Bound::Exact, params: Parameters::default(), warnings: Vec::new() }
    }

    pub fn is_exact(&self) -> bool {
        self.bound == Bound::Exact
    }
}
