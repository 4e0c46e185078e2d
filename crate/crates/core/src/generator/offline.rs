use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GenError, GeneratedAssets, GenerationRequest};
use crate::augment::{check_slot_set, parse_template_text, Segment, SlotHolderSet, Template};

/// Material the offline backend recombines for one contract.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractBank {
    /// Sentences with `{Role}` placeholders; the roles a fragment mentions
    /// are read from its placeholders.
    pub fragments: Vec<String>,
    /// Joiners placed between fragments, e.g. `" Later, "`.
    pub connectors: Vec<String>,
    /// Closing question, e.g. `"Can {Creditor} reclaim {Object}?"`.
    pub question: String,
    /// Role → candidate surfaces.
    pub values: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfflineBackendConfig {
    pub seed: u64,
    pub banks: BTreeMap<String, ContractBank>,
}

const MIN_FRAGMENTS: usize = 4;
const MAX_FRAGMENTS: usize = 7;
const TEMPLATE_ATTEMPTS: usize = 4096;
const SLOT_ATTEMPTS: usize = 256;

fn roles_in(text: &str) -> Result<BTreeSet<String>, String> {
    let segs = parse_template_text(text).map_err(|v| format!("{v}"))?;
    Ok(segs
        .into_iter()
        .filter_map(|s| match s {
            Segment::Slot(r) => Some(r),
            Segment::Literal(_) => None,
        })
        .collect())
}

fn rng_for(seed: u64, contract: &str, stream: u64) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in contract.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ h);
    rng.set_stream(stream);
    rng
}

/// Deterministic stand-in for the LLM: exactly the requested counts,
/// reproducible from `cfg.seed`.
pub fn generate_offline(
    cfg: &OfflineBackendConfig,
    req: &GenerationRequest,
) -> Result<GeneratedAssets, GenError> {
    req.validate()?;
    let schema = &req.schema;
    let contract = &schema.contract_id;
    let insufficient = |reason: String| GenError::InsufficientBank {
        contract: contract.clone(),
        reason,
    };
    let bank = cfg
        .banks
        .get(contract)
        .ok_or_else(|| insufficient(String::from("no bank for this contract")))?;

    let mut fragment_roles = Vec::with_capacity(bank.fragments.len());
    for f in &bank.fragments {
        let roles = roles_in(f).map_err(|e| insufficient(format!("fragment {f:?}: {e}")))?;
        if let Some(r) = roles.iter().find(|r| !schema.has_role(r)) {
            return Err(insufficient(format!(
                "fragment {f:?} names unknown role {r}"
            )));
        }
        fragment_roles.push(roles);
    }
    let question_roles =
        roles_in(&bank.question).map_err(|e| insufficient(format!("question: {e}")))?;
    if let Some(r) = question_roles.iter().find(|r| !schema.has_role(r)) {
        return Err(insufficient(format!("question names unknown role {r}")));
    }
    for role in &schema.roles {
        let values = bank.values.get(role).map_or(0, Vec::len);
        if values < 2 {
            return Err(insufficient(format!(
                "role {role} has {values} value(s); 2 needed"
            )));
        }
        if !question_roles.contains(role) && !fragment_roles.iter().any(|f| f.contains(role)) {
            return Err(insufficient(format!("no fragment mentions role {role}")));
        }
    }

    let mut out = GeneratedAssets::default();

    if req.want_templates > 0 {
        if bank.fragments.len() < MIN_FRAGMENTS {
            return Err(insufficient(format!("{MIN_FRAGMENTS} fragments needed")));
        }
        if bank.connectors.is_empty() || bank.question.trim().is_empty() {
            return Err(insufficient(String::from(
                "connectors and a question are needed",
            )));
        }
        let mut rng = rng_for(cfg.seed, contract, 0);
        let mut seen: BTreeSet<String> =
            req.seed_templates.iter().map(|t| t.text.clone()).collect();
        let top = MAX_FRAGMENTS.min(bank.fragments.len());
        for k in 0..req.want_templates {
            let mut made = None;
            for _ in 0..TEMPLATE_ATTEMPTS {
                let n = rng.gen_range(MIN_FRAGMENTS..=top);
                let picks = index::sample(&mut rng, bank.fragments.len(), n).into_vec();
                let mut covered = question_roles.clone();
                for &i in &picks {
                    covered.extend(fragment_roles[i].iter().cloned());
                }
                if schema.roles.iter().any(|r| !covered.contains(r)) {
                    continue;
                }
                let mut text = String::new();
                for (j, &i) in picks.iter().enumerate() {
                    if j > 0 {
                        text.push_str(bank.connectors.choose(&mut rng).map_or(" ", String::as_str));
                    }
                    text.push_str(&bank.fragments[i]);
                }
                text.push(' ');
                text.push_str(&bank.question);
                if seen.insert(text.clone()) {
                    made = Some(text);
                    break;
                }
            }
            let text = made.ok_or_else(|| insufficient(format!("could not build template {k}")))?;
            out.templates.push(Template {
                id: format!("syn{k}"),
                contract_id: contract.clone(),
                text,
                fact_templates: req.fact_templates().to_vec(),
            });
        }
    }

    if req.want_slot_sets > 0 {
        let mut rng = rng_for(cfg.seed, contract, 1);
        let mut seen: BTreeSet<SlotHolderSet> = req.seed_slot_sets.iter().cloned().collect();
        for k in 0..req.want_slot_sets {
            let mut valid = None;
            for _ in 0..SLOT_ATTEMPTS {
                let set: SlotHolderSet = schema
                    .roles
                    .iter()
                    .map(|r| {
                        (
                            r.clone(),
                            bank.values[r].choose(&mut rng).cloned().unwrap_or_default(),
                        )
                    })
                    .collect();
                if check_slot_set(&set, schema).is_err() {
                    continue;
                }
                let fresh = !seen.contains(&set);
                valid = Some(set);
                if fresh {
                    break;
                }
            }
            let set = valid.ok_or_else(|| insufficient(format!("no overlap-free slot set {k}")))?;
            seen.insert(set.clone());
            out.slot_sets.push(set);
        }
    }
    Ok(out)
}
