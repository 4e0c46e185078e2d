//! On-disk formats: JSONL datasets, contract bundles, model files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use proleg_core::augment::{AugmentedSample, SlotHolderSet, SlotSchema, Template};
use proleg_core::generator::ContractBank;
use proleg_core::lang::{parse_atom, parse_program, Atom, Program};
use proleg_core::semparser::{ContractInfo, FactSchemaTable, Gazetteer, ParserModel, Provenance};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Document { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn doc_err(path: &Path, message: impl std::fmt::Display) -> FormatError {
    FormatError::Document {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn samples_to_jsonl(samples: &[AugmentedSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("serializable sample"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(path: &Path, samples: &[AugmentedSample]) -> Result<(), FormatError> {
    write_text(path, &samples_to_jsonl(samples))
}

/// Reads one sample per line; blank lines are skipped. Records whose spans
/// do not slice the case text are rejected.
pub fn parse_jsonl(path: &Path, reader: impl BufRead) -> Result<Vec<AugmentedSample>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = |message: String| FormatError::Record {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let sample: AugmentedSample =
            serde_json::from_str(&line).map_err(|e| record(e.to_string()))?;
        if !sample.spans_consistent() {
            return Err(record(format!(
                "sample {} has spans that do not slice its text",
                sample.id
            )));
        }
        out.push(sample);
    }
    Ok(out)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<AugmentedSample>, FormatError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    parse_jsonl(path, BufReader::new(f))
}

/// One contract's seeds, offline bank and program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractBundle {
    pub schema: SlotSchema,
    pub templates: Vec<Template>,
    pub slot_sets: Vec<SlotHolderSet>,
    /// Path of the `.proleg` program, relative to the bundle file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bank: Option<ContractBank>,
}

/// A bundle with its program loaded.
#[derive(Debug, Clone)]
pub struct LoadedBundle {
    pub path: PathBuf,
    pub bundle: ContractBundle,
    pub program: Option<Program>,
}

impl LoadedBundle {
    pub fn contract_id(&self) -> &str {
        &self.bundle.schema.contract_id
    }
}

pub fn load_bundle(path: &Path) -> Result<LoadedBundle, FormatError> {
    let bundle: ContractBundle =
        serde_json::from_str(&read_text(path)?).map_err(|e| doc_err(path, e))?;
    proleg_core::augment::validate_schema(&bundle.schema).map_err(|e| doc_err(path, e))?;
    let program = match &bundle.program {
        Some(rel) => {
            let p = path.parent().unwrap_or(Path::new(".")).join(rel);
            let program = parse_program(&read_text(&p)?).map_err(|e| doc_err(&p, e))?;
            Some(program)
        }
        None => None,
    };
    Ok(LoadedBundle {
        path: path.to_path_buf(),
        bundle,
        program,
    })
}

/// Parses a fact file: ground facts only.
pub fn read_facts(path: &Path) -> Result<Vec<Atom>, FormatError> {
    proleg_core::lang::parse_facts(&read_text(path)?).map_err(|e| doc_err(path, e))
}

pub fn read_program(path: &Path) -> Result<Program, FormatError> {
    parse_program(&read_text(path)?).map_err(|e| doc_err(path, e))
}

/// `<contract>.proleg` files of a directory, keyed by file stem.
pub fn read_program_dir(dir: &Path) -> Result<BTreeMap<String, Program>, FormatError> {
    let mut out = BTreeMap::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "proleg"))
        .collect();
    entries.sort();
    for p in entries {
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        out.insert(stem.to_string(), read_program(&p)?);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct GazetteerRow {
    surface: String,
    contract: String,
    role: String,
    count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SchemaRow {
    contract: String,
    roles: Vec<String>,
    fact_templates: Vec<Atom>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    gazetteer: Vec<GazetteerRow>,
    schema_table: Vec<SchemaRow>,
    goals: BTreeMap<String, Atom>,
    #[serde(default)]
    roles: BTreeMap<String, Vec<String>>,
    provenance: Provenance,
}

pub const MODEL_VERSION: u32 = 1;

pub fn model_to_json(model: &ParserModel) -> String {
    let file = ModelFile {
        version: MODEL_VERSION,
        gazetteer: model
            .gazetteer()
            .iter()
            .map(|(s, c, r, n)| GazetteerRow {
                surface: s.to_string(),
                contract: c.to_string(),
                role: r.to_string(),
                count: n,
            })
            .collect(),
        schema_table: model
            .schema_table()
            .iter()
            .map(|(c, roles, facts)| SchemaRow {
                contract: c.to_string(),
                roles: roles.iter().cloned().collect(),
                fact_templates: facts.clone(),
            })
            .collect(),
        goals: model
            .schemas()
            .iter()
            .filter_map(|(c, info)| info.goal_template.clone().map(|g| (c.clone(), g)))
            .collect(),
        roles: model
            .schemas()
            .iter()
            .map(|(c, info)| (c.clone(), info.roles.clone()))
            .collect(),
        provenance: model.provenance().clone(),
    };
    to_json(&file)
}

pub fn model_from_json(path: &Path, text: &str) -> Result<ParserModel, FormatError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| doc_err(path, e))?;
    if file.version != MODEL_VERSION {
        return Err(doc_err(
            path,
            format!("unsupported model version {}", file.version),
        ));
    }
    let mut gazetteer = Gazetteer::default();
    let mut schemas: BTreeMap<String, ContractInfo> = BTreeMap::new();
    for row in &file.gazetteer {
        gazetteer.add_count(&row.surface, &row.contract, &row.role, row.count);
        let info = schemas.entry(row.contract.clone()).or_insert(ContractInfo {
            roles: Vec::new(),
            goal_template: None,
        });
        if !info.roles.contains(&row.role) {
            info.roles.push(row.role.clone());
        }
    }
    for (c, roles) in file.roles {
        schemas
            .entry(c)
            .or_insert(ContractInfo {
                roles: Vec::new(),
                goal_template: None,
            })
            .roles = roles;
    }
    for (c, goal) in file.goals {
        schemas
            .entry(c)
            .or_insert(ContractInfo {
                roles: Vec::new(),
                goal_template: None,
            })
            .goal_template = Some(goal);
    }
    let mut table = FactSchemaTable::default();
    for row in file.schema_table {
        table.insert(
            row.contract,
            row.roles.into_iter().collect(),
            row.fact_templates,
        );
    }
    ParserModel::new(gazetteer, table, schemas, file.provenance).map_err(|e| doc_err(path, e))
}

pub fn read_model(path: &Path) -> Result<ParserModel, FormatError> {
    model_from_json(path, &read_text(path)?)
}

pub fn write_model(path: &Path, model: &ParserModel) -> Result<(), FormatError> {
    write_text(path, &model_to_json(model))
}

/// Parses a goal given on the command line.
pub fn parse_goal(text: &str) -> Result<Atom, String> {
    parse_atom(text).map_err(|e| e.to_string())
}

pub fn write_stdout(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}
