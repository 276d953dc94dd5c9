//! Expected value and distribution of weighted automata under Markov chain
//! measures.

pub mod determinise;
pub mod error;
pub mod exec;
pub mod extrema;
pub mod format;
pub mod general;
pub mod linalg;
pub mod markov;
pub mod model;
pub mod montecarlo;
pub mod oracle;
pub mod product;
pub mod rational;
pub mod recurrent;
pub mod report;
pub mod runprob;
pub mod scc;
pub mod stateset;
pub mod subset;
pub mod sum;
pub mod word;

pub use error::{Error, Result};
pub use exec::Exec;
pub use model::{
    validate_model, AutomatonBuilder, ChainEdge, ExtendedValue, MarkovChain, Transition, ValidationReport,
    ValueFunction, Weight, WeightedAutomaton,
};
pub use rational::Rational;
pub use report::{ApproxReport, Bound, Parameters};
pub use stateset::StateSet;
