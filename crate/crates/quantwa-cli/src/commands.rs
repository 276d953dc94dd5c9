use std::path::{Path, PathBuf};
use std::time::Instant;

use quantwa::determinise::{approx_determinise, compare_on_samples};
use quantwa::extrema::{extrema_distribution, extrema_expected, extrema_notes, weight_ladder};
use quantwa::format::{emit_model, parse_model, ModelDocument};
use quantwa::general::{limavg_distribution_approx, limavg_expected_approx, SccClassification};
use quantwa::montecarlo::{run_experiment, SampleConfig, SampleStats};
use quantwa::recurrent::{check_recurrent, check_recurrent_under, BlockOptions, BlockValue};
use quantwa::sum::{sum_distribution_approx, sum_expected_approx, SumOptions};
use quantwa::{validate_model, Exec, ExtendedValue};
use serde_json::{json, Value};
use thiserror::Error;

use crate::args::{Blocks, Command, Question, Sampling};
use crate::report::{rat, value, ReportDocument};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Model { path: PathBuf, source: quantwa::Error },
    #[error(transparent)]
    Library(#[from] quantwa::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        let lib = match self {
            CliError::Io { .. } => return 2,
            CliError::Model { source, .. } | CliError::Library(source) => source,
        };
        match lib {
            quantwa::Error::Invalid(_) | quantwa::Error::Unsupported(_) | quantwa::Error::NotRecurrent(_) => 2,
            quantwa::Error::Budget(_) => 3,
            quantwa::Error::Internal(_) => 4,
        }
    }
}

pub enum Output {
    Report(Box<ReportDocument>),
    Text(String),
}

fn load(path: &Path) -> Result<ModelDocument, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    let doc = parse_model(&text).map_err(|source| CliError::Model { path: path.into(), source })?;
    validate_model(&doc.automaton, &doc.chain).map_err(|source| CliError::Model { path: path.into(), source })?;
    Ok(doc)
}

fn block_options(b: &Blocks) -> BlockOptions {
    BlockOptions { exec: Exec::parallel(), k: b.k, strict_k: b.strict_k, ..BlockOptions::default() }
}

fn sample_config(s: &Sampling) -> SampleConfig {
    SampleConfig { samples: s.samples, length: s.length, seed: s.seed }
}

fn stats(s: &SampleStats) -> Value {
    json!({
        "count": s.count,
        "infinite": s.infinite,
        "mean": s.mean,
        "min": s.min,
        "max": s.max,
        "std_dev": s.std_dev,
    })
}

fn block_value(b: &BlockValue) -> Value {
    json!({
        "value": value(&b.value),
        "k": b.k,
        "epsilon0": b.epsilon0.as_ref().map(rat),
        "live_mass": rat(&b.live_mass),
        "levels": b.levels.iter().map(|l| json!({
            "k": l.k,
            "method": l.method.name(),
            "block_states": l.block_states,
            "live_mass": rat(&l.live_mass),
            "live_value": l.live_value.as_ref().map(rat),
        })).collect::<Vec<_>>(),
    })
}

fn classification(doc: &ModelDocument, c: &SccClassification) -> Value {
    let a = &doc.automaton;
    let bsccs: Vec<Value> = c
        .bsccs
        .iter()
        .map(|b| {
            json!({
                "probability": rat(&b.reach),
                "chain_state": doc.chain.states()[b.chain_state],
                "subset": a.format_set(&b.subset),
                "gamma": value(&b.gamma),
                "sccs": b.sccs.iter().map(|s| json!({
                    "states": a.format_set(&s.states),
                    "permanent": s.permanent,
                    "value": s.value.as_ref().map(block_value),
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({ "bottom_components": bsccs })
}

pub fn run(command: Command) -> Result<Output, CliError> {
    let started = Instant::now();
    let mut out = match command {
        Command::Validate { model, canonical } => {
            let doc = load(&model)?;
            if canonical {
                return Ok(Output::Text(emit_model(&doc.automaton, &doc.chain)?));
            }
            let v = validate_model(&doc.automaton, &doc.chain)?;
            let mut r = ReportDocument::new("validate", &model, &doc);
            r.details = json!({
                "states": v.states,
                "letters": v.letters,
                "transitions": v.transitions,
                "chain_states": v.chain_states,
                "min_weight": v.min_weight.as_ref().map(rat),
                "max_weight": v.max_weight.as_ref().map(rat),
                "span": rat(&v.span),
                "terminating": v.terminating,
                "expected_length": v.expected_length.as_ref().map(rat),
            });
            r
        }
        Command::Extrema { question, model, lambda } => {
            let doc = load(&model)?;
            let (a, m) = (&doc.automaton, &doc.chain);
            let mut r = ReportDocument::new(format!("extrema {}", question.tag()), &model, &doc);
            match (question, lambda) {
                (Question::Dist, Some(lambda)) => {
                    let p = extrema_distribution(a, m, &lambda)?;
                    r = r.exact(&ExtendedValue::Finite(p));
                    r.param("lambda", rat(&lambda));
                }
                _ => {
                    let e = extrema_expected(a, m)?;
                    let ladder = weight_ladder(a, m)?;
                    r = r.exact(&e);
                    r.details = json!({
                        "weights": ladder.weights.iter().map(rat).collect::<Vec<_>>(),
                        "exceed": ladder.exceed.iter().map(rat).collect::<Vec<_>>(),
                    });
                }
            }
            r.warnings.extend(extrema_notes(a.value_fn()));
            r
        }
        Command::Sum { question, model, approx, cutoff_budget } => {
            let doc = load(&model)?;
            let opts = SumOptions { node_budget: cutoff_budget, exec: Exec::parallel() };
            let report = match &approx.lambda {
                Some(lambda) if question == Question::Dist => {
                    sum_distribution_approx(&doc.automaton, &doc.chain, lambda, &approx.epsilon, &opts)?
                }
                _ => sum_expected_approx(&doc.automaton, &doc.chain, &approx.epsilon, &opts)?,
            };
            let mut r = ReportDocument::new(format!("sum {}", question.tag()), &model, &doc).approx(&report);
            r.param("node_budget", cutoff_budget);
            r
        }
        Command::Limavg { question, model, approx, blocks } => {
            let doc = load(&model)?;
            let opts = block_options(&blocks);
            let (report, c) = match &approx.lambda {
                Some(lambda) if question == Question::Dist => {
                    limavg_distribution_approx(&doc.automaton, &doc.chain, lambda, &approx.epsilon, &opts)?
                }
                _ => limavg_expected_approx(&doc.automaton, &doc.chain, &approx.epsilon, &opts)?,
            };
            let mut r = ReportDocument::new(format!("limavg {}", question.tag()), &model, &doc).approx(&report);
            r.details = classification(&doc, &c);
            r
        }
        Command::RecurrentCheck { model } => {
            let doc = load(&model)?;
            let a = &doc.automaton;
            let plain = check_recurrent(a);
            let under = check_recurrent_under(a, &doc.chain)?;
            let mut r = ReportDocument::new("recurrent-check", &model, &doc);
            let witness = |c: &quantwa::recurrent::RecurrenceCertificate| {
                json!({
                    "recurrent": c.recurrent,
                    "bottom_component_check": c.bottom_component_check,
                    "return_words": c.return_words.iter().enumerate().map(|(q, w)| json!({
                        "state": a.states()[q],
                        "word": w.as_ref().map(|w| a.format_word(w)),
                    })).collect::<Vec<_>>(),
                    "stuck_state": c.stuck_state.map(|q| a.states()[q].clone()),
                    "no_return": c.no_return.as_ref().map(|(set, w)| json!({
                        "subset": a.format_set(set),
                        "word": a.format_word(w),
                    })),
                })
            };
            r.details = json!({ "all_words": witness(&plain), "chain_support": witness(&under) });
            if plain.recurrent != under.recurrent {
                r.warnings.push("recurrent on the words the chain can emit, but not on every word".into());
            }
            r
        }
        Command::Determinise { model, epsilon, output, compare, sampling, blocks } => {
            let doc = load(&model)?;
            let det = approx_determinise(&doc.automaton, &doc.chain, &epsilon, &block_options(&blocks))?;
            let text = emit_model(&det.automaton, &doc.chain)?;
            let Some(path) = output else {
                return Ok(Output::Text(text));
            };
            std::fs::write(&path, &text).map_err(|source| CliError::Io { path: path.clone(), source })?;
            let mut r = ReportDocument::new("determinise", &model, &doc);
            r.param("epsilon", rat(&epsilon));
            r.warnings.extend(det.warnings.iter().cloned());
            let mut details = json!({
                "output": path.display().to_string(),
                "states": det.automaton.num_states(),
                "transitions": det.automaton.transitions().len(),
                "components": det.sccs.iter().map(|s| json!({
                    "states": doc.automaton.format_set(&s.states),
                    "value": value(&s.value),
                })).collect::<Vec<_>>(),
            });
            if compare {
                let cfg = sample_config(&sampling);
                let cmp =
                    compare_on_samples(&doc.automaton, &det.automaton, &doc.chain, &epsilon, &cfg, Exec::parallel())?;
                r.param("samples", cfg.samples);
                r.param("length", cfg.length);
                r.param("seed", cfg.seed);
                details["comparison"] = json!({
                    "compared": cmp.compared,
                    "mismatched": cmp.mismatched,
                    "violations": cmp.violations,
                    "agreement_rate": cmp.agreement_rate(),
                    "max_gap": cmp.max_gap,
                    "tolerance": cmp.tolerance,
                    "original": stats(&cmp.original),
                    "determinised": stats(&cmp.determinised),
                });
            }
            r.details = details;
            r
        }
        Command::Sample { model, sampling } => {
            let doc = load(&model)?;
            let cfg = sample_config(&sampling);
            let s = run_experiment(&doc.automaton, &doc.chain, &cfg, Exec::parallel())?;
            let mut r = ReportDocument::new("sample", &model, &doc);
            r.param("samples", cfg.samples);
            r.param("length", cfg.length);
            r.param("seed", cfg.seed);
            r.param("generator", s.generator);
            r.warnings.extend(s.notes.iter().cloned());
            r.estimate = Some(stats(&s.stats));
            r
        }
    };
    out.timing.seconds = started.elapsed().as_secs_f64();
    Ok(Output::Report(Box::new(out)))
}
