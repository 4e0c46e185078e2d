//! End-to-end run: generate → augment → split → train → evaluate.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::thread;

use log::{info, warn};
use proleg_core::augment::{
    build_dataset, dataset_stats, split_dataset, AugmentedSample, Dataset, SamplingPolicy,
    SlotHolderSet, SlotSchema, Template,
};
use proleg_core::generator::{
    generate_llm, generate_offline, AssetKind, GeneratedAssets, GenerationRequest,
    LlmBackendConfig, OfflineBackendConfig, Reject,
};
use proleg_core::lang::{Atom, Program};
use proleg_core::reasoner::Verdict;
use proleg_core::semparser::{evaluate_sample, train_model, Metrics, ParserModel};
use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result, Stage};
use crate::formats::{
    load_bundle, read_text, to_json, write_jsonl, write_model, write_text, LoadedBundle,
};
use crate::llm::{load_canned_dir, HttpChat, MockServer};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    #[default]
    Offline,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub templates_per_contract: usize,
    pub slot_sets_per_contract: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
}

/// Pipeline settings. Relative paths resolve against the config file's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Contract bundle files.
    pub contracts: Vec<PathBuf>,
    #[serde(default)]
    pub backend: BackendChoice,
    #[serde(default)]
    pub llm: LlmBackendConfig,
    /// Canned chat responses; when set, the LLM backend talks to a local
    /// mock endpoint instead of `llm.base_url`.
    #[serde(default)]
    pub mock_dir: Option<PathBuf>,
    pub generation: GenerationConfig,
    pub dataset: DatasetConfig,
    pub split: SplitConfig,
    /// Receives dataset.jsonl, train.jsonl, test.jsonl, model.json and
    /// report.json.
    pub output_dir: PathBuf,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path).map_err(|e| ForgeError::new(Stage::LoadConfig, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| ForgeError::new(Stage::LoadConfig, format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for c in &mut cfg.contracts {
            *c = base.join(&*c);
        }
        if let Some(d) = &mut cfg.mock_dir {
            *d = base.join(&*d);
        }
        cfg.output_dir = base.join(&cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ForgeError::new(Stage::LoadConfig, m));
        if self.contracts.is_empty() {
            return bad(String::from("no contract bundles listed"));
        }
        if let Some(p) = self.contracts.iter().find(|p| !p.is_file()) {
            return bad(format!("contract bundle {} does not exist", p.display()));
        }
        if self.dataset.samples == 0 {
            return bad(String::from("dataset.samples must be positive"));
        }
        let f = self.split.test_fraction;
        if !(f > 0.0 && f < 1.0) {
            return bad(format!("split.test_fraction {f} is not in (0, 1)"));
        }
        if let Some(d) = &self.mock_dir {
            if !d.is_dir() {
                return bad(format!("mock_dir {} does not exist", d.display()));
            }
        }
        self.llm
            .validate()
            .map_err(|e| ForgeError::new(Stage::LoadConfig, e))
    }

    pub fn load_bundles(&self) -> Result<Vec<LoadedBundle>> {
        let mut out: Vec<LoadedBundle> = Vec::new();
        for p in &self.contracts {
            let b = load_bundle(p).map_err(|e| ForgeError::new(Stage::LoadConfig, e))?;
            if out.iter().any(|x| x.contract_id() == b.contract_id()) {
                return Err(ForgeError::new(
                    Stage::LoadConfig,
                    format!("contract {} listed twice", b.contract_id()),
                ));
            }
            out.push(b);
        }
        Ok(out)
    }
}

/// Outcome of parsing and judging one test sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntailmentRecord {
    pub sample_id: String,
    pub contract_id: String,
    pub gold_facts: Vec<Atom>,
    pub predicted_facts: Vec<Atom>,
    pub gold_verdict: Option<Verdict>,
    pub predicted_verdict: Option<Verdict>,
    pub facts_exact: bool,
    pub gold_spans: usize,
    pub predicted_spans: usize,
    pub matched_spans: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

impl EntailmentRecord {
    fn outcome(&self) -> proleg_core::semparser::SampleOutcome {
        proleg_core::semparser::SampleOutcome {
            sample_id: self.sample_id.clone(),
            facts_exact: self.facts_exact,
            gold_spans: self.gold_spans,
            predicted_spans: self.predicted_spans,
            matched_spans: self.matched_spans,
            entailment_agrees: self
                .gold_verdict
                .zip(self.predicted_verdict)
                .map(|(g, p)| g == p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentReport {
    pub metrics: Metrics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub records: Vec<EntailmentRecord>,
}

impl EntailmentReport {
    /// Metrics recomputed from the records alone.
    pub fn recompute(&self) -> Metrics {
        let outcomes: Vec<_> = self.records.iter().map(EntailmentRecord::outcome).collect();
        Metrics::from_outcomes(&outcomes)
    }
}

fn record(
    model: &ParserModel,
    s: &AugmentedSample,
    programs: Option<&BTreeMap<String, Program>>,
) -> EntailmentRecord {
    let ev = evaluate_sample(model, s, programs);
    EntailmentRecord {
        sample_id: s.id.clone(),
        contract_id: s.contract_id.clone(),
        gold_facts: s.facts.clone(),
        predicted_facts: ev.predicted_facts,
        gold_verdict: ev.gold_verdict,
        predicted_verdict: ev.predicted_verdict,
        facts_exact: ev.outcome.facts_exact,
        gold_spans: ev.outcome.gold_spans,
        predicted_spans: ev.outcome.predicted_spans,
        matched_spans: ev.outcome.matched_spans,
        errors: ev.errors,
    }
}

/// Parses every test sample and compares goal verdicts on predicted and
/// gold facts. Missing programs become per-sample errors.
pub fn entailment_evaluate(
    model: &ParserModel,
    test: &Dataset,
    programs: &BTreeMap<String, Program>,
) -> EntailmentReport {
    evaluation_report(model, test, Some(programs))
}

/// Like [`entailment_evaluate`]; without programs only facts and spans
/// are scored.
pub fn evaluation_report(
    model: &ParserModel,
    test: &Dataset,
    programs: Option<&BTreeMap<String, Program>>,
) -> EntailmentReport {
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(8);
    let chunk = test.samples.len().div_ceil(workers).max(1);
    let records: Vec<EntailmentRecord> = thread::scope(|scope| {
        let handles: Vec<_> = test
            .samples
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|s| record(model, s, programs))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation worker"))
            .collect()
    });
    let mut warnings = Vec::new();
    if records.is_empty() {
        warnings.push(String::from("test set is empty"));
    }
    let failed = records.iter().filter(|r| !r.errors.is_empty()).count();
    if failed > 0 {
        warnings.push(format!("{failed} sample(s) recorded errors"));
    }
    let mut report = EntailmentReport {
        metrics: Metrics::from_outcomes(&[]),
        warnings,
        records,
    };
    report.metrics = report.recompute();
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub seed_templates: usize,
    pub generated_templates: usize,
    pub seed_slot_sets: usize,
    pub generated_slot_sets: usize,
    pub shortfall: BTreeMap<AssetKind, usize>,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub samples: usize,
    pub distinct_surfaces: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub train_templates: BTreeMap<String, Vec<String>>,
    pub test_templates: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub backend: BackendChoice,
    pub contracts: Vec<String>,
    pub generation: BTreeMap<String, GenerationSummary>,
    pub dataset: DatasetSummary,
    /// Held-out templates.
    pub test: EntailmentReport,
    /// The training split parsed by the model trained on it.
    pub resubstitution: Metrics,
}

pub struct PipelineOutput {
    pub report: PipelineReport,
    pub dataset: Dataset,
    pub train: Dataset,
    pub test: Dataset,
    pub model: ParserModel,
}

fn request(b: &LoadedBundle, g: &GenerationConfig) -> GenerationRequest {
    GenerationRequest {
        schema: b.bundle.schema.clone(),
        seed_templates: b.bundle.templates.clone(),
        seed_slot_sets: b.bundle.slot_sets.clone(),
        want_templates: g.templates_per_contract,
        want_slot_sets: g.slot_sets_per_contract,
    }
}

/// Runs the configured backend for every bundle; results keep bundle
/// order.
pub fn generate(cfg: &PipelineConfig, bundles: &[LoadedBundle]) -> Result<Vec<GeneratedAssets>> {
    let gen_err = |e: proleg_core::generator::GenError| ForgeError::new(Stage::Generate, e);
    let requests: Vec<GenerationRequest> = bundles
        .iter()
        .map(|b| request(b, &cfg.generation))
        .collect();
    match cfg.backend {
        BackendChoice::Offline => {
            let offline = OfflineBackendConfig {
                seed: cfg.generation.seed,
                banks: bundles
                    .iter()
                    .filter_map(|b| {
                        b.bundle
                            .bank
                            .clone()
                            .map(|k| (b.contract_id().to_string(), k))
                    })
                    .collect(),
            };
            requests
                .iter()
                .map(|r| generate_offline(&offline, r).map_err(gen_err))
                .collect()
        }
        BackendChoice::Llm => {
            let mock = match &cfg.mock_dir {
                Some(d) => {
                    let canned =
                        load_canned_dir(d).map_err(|e| ForgeError::new(Stage::LoadConfig, e))?;
                    Some(
                        MockServer::start(canned)
                            .map_err(|e| ForgeError::new(Stage::Generate, e))?,
                    )
                }
                None => None,
            };
            let mut llm = cfg.llm.clone();
            if let Some(m) = &mock {
                llm.base_url = m.base_url();
            }
            let client =
                HttpChat::from_env(&llm).map_err(|e| ForgeError::new(Stage::Generate, e))?;
            let mut out = Vec::with_capacity(requests.len());
            // requests run max_in_flight at a time; merged in request order
            for batch in requests.chunks(llm.max_in_flight.max(1)) {
                let results: Vec<_> = thread::scope(|scope| {
                    let handles: Vec<_> = batch
                        .iter()
                        .map(|r| {
                            let mut c = client.clone();
                            scope.spawn(move || generate_llm(&mut c, r))
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("generation worker"))
                        .collect()
                });
                for r in results {
                    out.push(r.map_err(gen_err)?);
                }
            }
            Ok(out)
        }
    }
}

fn template_ids(d: &Dataset) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for t in &d.templates {
        out.entry(t.contract_id.clone())
            .or_default()
            .push(t.id.clone());
    }
    out
}

/// Augmented dataset plus what produced it.
pub struct Augmented {
    pub contracts: Vec<String>,
    pub dataset: Dataset,
    pub generation: BTreeMap<String, GenerationSummary>,
    pub programs: BTreeMap<String, Program>,
}

/// Generates assets and expands `cfg.dataset.samples` samples.
pub fn augment(cfg: &PipelineConfig) -> Result<Augmented> {
    let bundles = cfg.load_bundles()?;
    let generated = generate(cfg, &bundles)?;

    let mut templates: Vec<Template> = Vec::new();
    let mut slot_sets: BTreeMap<String, Vec<SlotHolderSet>> = BTreeMap::new();
    let mut schemas: BTreeMap<String, SlotSchema> = BTreeMap::new();
    let mut programs: BTreeMap<String, Program> = BTreeMap::new();
    let mut generation = BTreeMap::new();
    for (b, g) in bundles.iter().zip(&generated) {
        let id = b.contract_id().to_string();
        for (kind, n) in &g.shortfall {
            warn!("{id}: {n} {} short", kind.as_str());
        }
        templates.extend(b.bundle.templates.iter().cloned());
        templates.extend(g.templates.iter().cloned());
        let sets = slot_sets.entry(id.clone()).or_default();
        sets.extend(b.bundle.slot_sets.iter().cloned());
        sets.extend(g.slot_sets.iter().cloned());
        schemas.insert(id.clone(), b.bundle.schema.clone());
        if let Some(p) = &b.program {
            programs.insert(id.clone(), p.clone());
        }
        generation.insert(
            id,
            GenerationSummary {
                seed_templates: b.bundle.templates.len(),
                generated_templates: g.templates.len(),
                seed_slot_sets: b.bundle.slot_sets.len(),
                generated_slot_sets: g.slot_sets.len(),
                shortfall: g.shortfall.clone(),
                rejects: g.rejects.clone(),
            },
        );
    }
    info!("generated {} templates in total", templates.len());

    let policy = SamplingPolicy::Sampled {
        n: cfg.dataset.samples,
        seed: cfg.dataset.seed,
    };
    let dataset = build_dataset(&templates, &slot_sets, &schemas, policy)
        .map_err(|e| ForgeError::new(Stage::Augment, e))?;
    Ok(Augmented {
        contracts: bundles
            .iter()
            .map(|b| b.contract_id().to_string())
            .collect(),
        dataset,
        generation,
        programs,
    })
}

/// Runs every stage without writing files.
pub fn run_pipeline_in_memory(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let Augmented {
        contracts,
        dataset,
        generation,
        programs,
    } = augment(cfg)?;
    let (train, test) = split_dataset(&dataset, cfg.split.test_fraction, cfg.split.seed)
        .map_err(|e| ForgeError::new(Stage::Split, e))?;
    info!(
        "{} samples: {} train, {} test",
        dataset.len(),
        train.len(),
        test.len()
    );

    let model = train_model(&train).map_err(|e| ForgeError::new(Stage::Train, e))?;
    let test_report = entailment_evaluate(&model, &test, &programs);
    let resubstitution = entailment_evaluate(&model, &train, &programs).metrics;

    let report = PipelineReport {
        backend: cfg.backend,
        contracts,
        generation,
        dataset: DatasetSummary {
            samples: dataset.len(),
            distinct_surfaces: dataset_stats(&dataset).distinct_surfaces,
            train_samples: train.len(),
            test_samples: test.len(),
            train_templates: template_ids(&train),
            test_templates: template_ids(&test),
        },
        test: test_report,
        resubstitution,
    };
    Ok(PipelineOutput {
        report,
        dataset,
        train,
        test,
        model,
    })
}

/// Runs the pipeline and writes its artifacts; `report_path` overrides
/// `output_dir/report.json`.
pub fn run_pipeline(cfg: &PipelineConfig, report_path: Option<&Path>) -> Result<PipelineOutput> {
    let out = run_pipeline_in_memory(cfg)?;
    let dir = &cfg.output_dir;
    let w = |e: crate::formats::FormatError| ForgeError::new(Stage::Write, e);
    write_jsonl(&dir.join("dataset.jsonl"), &out.dataset.samples).map_err(w)?;
    write_jsonl(&dir.join("train.jsonl"), &out.train.samples).map_err(w)?;
    write_jsonl(&dir.join("test.jsonl"), &out.test.samples).map_err(w)?;
    write_model(&dir.join("model.json"), &out.model).map_err(w)?;
    let report = report_path.map_or_else(|| dir.join("report.json"), Path::to_path_buf);
    write_text(&report, &to_json(&out.report)).map_err(w)?;
    Ok(out)
}
