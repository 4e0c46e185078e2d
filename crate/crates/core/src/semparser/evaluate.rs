use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{parse_case, ParserModel};
use crate::augment::{instantiate, AugmentedSample, Dataset};
use crate::lang::{Atom, Program};
use crate::reasoner::{Solver, Verdict};

/// Gold versus predicted output for one test sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub sample_id: String,
    pub facts_exact: bool,
    pub gold_spans: usize,
    pub predicted_spans: usize,
    pub matched_spans: usize,
    /// None when no program or goal applies to the sample.
    pub entailment_agrees: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub samples: usize,
    pub fact_exact_match_accuracy: f64,
    pub entity_precision: f64,
    pub entity_recall: f64,
    pub entity_f1: f64,
    pub entailment_samples: usize,
    pub entailment_accuracy: Option<f64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    /// Micro-averaged over all outcomes.
    pub fn from_outcomes(outcomes: &[SampleOutcome]) -> Self {
        let exact = outcomes.iter().filter(|o| o.facts_exact).count();
        let gold: usize = outcomes.iter().map(|o| o.gold_spans).sum();
        let predicted: usize = outcomes.iter().map(|o| o.predicted_spans).sum();
        let matched: usize = outcomes.iter().map(|o| o.matched_spans).sum();
        let precision = ratio(matched, predicted);
        let recall = ratio(matched, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let judged: Vec<bool> = outcomes
            .iter()
            .filter_map(|o| o.entailment_agrees)
            .collect();
        let agree = judged.iter().filter(|b| **b).count();
        Metrics {
            samples: outcomes.len(),
            fact_exact_match_accuracy: ratio(exact, outcomes.len()),
            entity_precision: precision,
            entity_recall: recall,
            entity_f1: f1,
            entailment_samples: judged.len(),
            entailment_accuracy: if judged.is_empty() {
                None
            } else {
                Some(ratio(agree, judged.len()))
            },
        }
    }
}

/// Everything learned from parsing one test sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleEvaluation {
    pub outcome: SampleOutcome,
    pub predicted_facts: Vec<Atom>,
    pub gold_verdict: Option<Verdict>,
    pub predicted_verdict: Option<Verdict>,
    /// Why parsing or entailment checking could not run.
    pub errors: Vec<String>,
}

fn verdicts(
    model: &ParserModel,
    sample: &AugmentedSample,
    predicted: &[Atom],
    programs: &BTreeMap<String, Program>,
) -> Result<(Verdict, Verdict), String> {
    let program = programs
        .get(&sample.contract_id)
        .ok_or_else(|| format!("no program for contract {}", sample.contract_id))?;
    let goal_template = model
        .schemas()
        .get(&sample.contract_id)
        .and_then(|c| c.goal_template.as_ref())
        .ok_or_else(|| format!("no goal template for contract {}", sample.contract_id))?;
    let goal = instantiate(goal_template, &sample.slot_holders());
    if !goal.is_ground() {
        return Err(format!("goal {goal} is not ground"));
    }
    let verdict = |facts: &[Atom]| {
        Solver::new(program, facts)
            .and_then(|mut s| s.solve(&goal))
            .map(|p| p.result)
            .map_err(|e| format!("{e}"))
    };
    Ok((verdict(&sample.facts)?, verdict(predicted)?))
}

/// Parses one sample and, when `programs` is given, compares the goal
/// verdict on predicted facts with the verdict on gold facts.
pub fn evaluate_sample(
    model: &ParserModel,
    sample: &AugmentedSample,
    programs: Option<&BTreeMap<String, Program>>,
) -> SampleEvaluation {
    let mut errors = Vec::new();
    let gold_facts: BTreeSet<&Atom> = sample.facts.iter().collect();
    let gold_spans: BTreeSet<(&str, usize, usize)> = sample
        .entities
        .iter()
        .map(|e| (e.role.as_str(), e.start, e.end))
        .collect();
    let (predicted_facts, predicted_spans) = match parse_case(model, &sample.case_text) {
        Ok(r) => {
            let spans: BTreeSet<(String, usize, usize)> = r
                .extraction
                .iter()
                .map(|e| (e.role.clone(), e.start, e.end))
                .collect();
            (r.facts, spans)
        }
        Err(e) => {
            errors.push(format!("{e}"));
            (Vec::new(), BTreeSet::new())
        }
    };
    let matched = predicted_spans
        .iter()
        .filter(|(r, s, e)| gold_spans.contains(&(r.as_str(), *s, *e)))
        .count();
    let predicted_set: BTreeSet<&Atom> = predicted_facts.iter().collect();
    let (gold_verdict, predicted_verdict) = match programs {
        None => (None, None),
        Some(ps) => match verdicts(model, sample, &predicted_facts, ps) {
            Ok((g, p)) => (Some(g), Some(p)),
            Err(e) => {
                errors.push(e);
                (None, None)
            }
        },
    };
    SampleEvaluation {
        outcome: SampleOutcome {
            sample_id: sample.id.clone(),
            facts_exact: predicted_set == gold_facts,
            gold_spans: gold_spans.len(),
            predicted_spans: predicted_spans.len(),
            matched_spans: matched,
            entailment_agrees: gold_verdict.zip(predicted_verdict).map(|(g, p)| g == p),
        },
        predicted_facts,
        gold_verdict,
        predicted_verdict,
        errors,
    }
}

/// Parses every sample's text and compares against its gold annotation.
pub fn evaluate_samples(
    model: &ParserModel,
    test: &Dataset,
    programs: Option<&BTreeMap<String, Program>>,
) -> Vec<SampleOutcome> {
    test.samples
        .iter()
        .map(|s| evaluate_sample(model, s, programs).outcome)
        .collect()
}

pub fn evaluate_model(
    model: &ParserModel,
    test: &Dataset,
    programs: Option<&BTreeMap<String, Program>>,
) -> Metrics {
    Metrics::from_outcomes(&evaluate_samples(model, test, programs))
}
