use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use quantwa::Rational;

fn rational(text: &str) -> Result<Rational, String> {
    quantwa::rational::parse(text)
        .ok_or_else(|| format!("'{text}' is not a rational number (use p/q, an integer or a decimal)"))
}

#[derive(Parser, Debug)]
#[command(
    name = "quantwa",
    version,
    about = "Expected value and distribution of weighted automata under Markov chains"
)]
pub struct Cli {
    /// Cap on worker threads; 0 lets the pool decide.
    #[arg(long, global = true, env = "QUANTWA_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and validate a model; report derived constants.
    Validate {
        model: PathBuf,
        /// Print the canonical form of the model instead of a report.
        #[arg(long)]
        canonical: bool,
    },
    /// Min, Max, Inf and Sup automata (exact).
    Extrema {
        #[arg(value_enum)]
        question: Question,
        model: PathBuf,
        #[arg(long, value_parser = rational, allow_hyphen_values = true, required_if_eq("question", "dist"))]
        lambda: Option<Rational>,
    },
    /// Sum automata over terminating chains.
    Sum {
        #[arg(value_enum)]
        question: Question,
        model: PathBuf,
        #[command(flatten)]
        approx: Approx,
        /// Most word prefixes the enumeration may visit.
        #[arg(long, default_value_t = 200_000_000)]
        cutoff_budget: u64,
    },
    /// LimAvg automata over non-terminating chains.
    Limavg {
        #[arg(value_enum)]
        question: Question,
        model: PathBuf,
        #[command(flatten)]
        approx: Approx,
        #[command(flatten)]
        blocks: Blocks,
    },
    /// Decide whether an automaton is recurrent and show the witnesses.
    RecurrentCheck { model: PathBuf },
    /// Build a deterministic LimAvg automaton within epsilon of the model.
    Determinise {
        model: PathBuf,
        #[arg(long, value_parser = rational)]
        epsilon: Rational,
        /// Write the deterministic model here.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Compare both automata on sampled words.
        #[arg(long)]
        compare: bool,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        blocks: Blocks,
    },
    /// Estimate LimAvg values from sampled words.
    Sample {
        model: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Question {
    Expected,
    Dist,
}

impl Question {
    pub fn tag(self) -> &'static str {
        match self {
            Question::Expected => "expected",
            Question::Dist => "dist",
        }
    }
}

#[derive(Args, Debug)]
pub struct Approx {
    #[arg(long, value_parser = rational)]
    pub epsilon: Rational,
    /// Threshold of the distribution question.
    #[arg(long, value_parser = rational, allow_hyphen_values = true, required_if_eq("question", "dist"))]
    pub lambda: Option<Rational>,
}

#[derive(Args, Debug)]
pub struct Blocks {
    /// Block length (a power of two) to start from, or to use with --strict-k.
    #[arg(long)]
    pub k: Option<u64>,
    /// Use exactly the given block length instead of doubling.
    #[arg(long, requires = "k")]
    pub strict_k: bool,
}

#[derive(Args, Debug)]
pub struct Sampling {
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Letters per sampled word; a power of two.
    #[arg(long, default_value_t = 1 << 14)]
    pub length: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn rationals_accept_fractions_and_decimals() {
        assert_eq!(rational("-1/4"), rational("-0.25"));
        assert!(rational("1/0").is_err());
        assert!(rational("one").is_err());
    }

    #[test]
    fn dist_requires_a_threshold() {
        assert!(Cli::try_parse_from(["quantwa", "extrema", "dist", "m.wqa"]).is_err());
        let cli = Cli::try_parse_from(["quantwa", "extrema", "dist", "m.wqa", "--lambda", "-2"]).unwrap();
        let Command::Extrema { lambda, .. } = cli.command else { panic!() };
        assert_eq!(lambda, Some(quantwa::rational::int(-2)));
    }

    #[test]
    fn strict_k_needs_k() {
        let base = ["quantwa", "limavg", "expected", "m.wqa", "--epsilon", "1/10", "--strict-k"];
        assert!(Cli::try_parse_from(base).is_err());
        assert!(Cli::try_parse_from(base.iter().chain(&["--k", "8"])).is_ok());
    }
}
