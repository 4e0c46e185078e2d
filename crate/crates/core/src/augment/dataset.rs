use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_slot_set, expand, validate_template, AugmentError, Dataset, SlotHolderSet, SlotSchema,
    Template,
};

/// How (template, slot set) pairs are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingPolicy {
    CrossProduct,
    /// `n` pairs drawn uniformly from all contracts' pairs with a ChaCha8
    /// generator seeded from `seed`: without replacement when `n` fits,
    /// with replacement otherwise.
    Sampled {
        n: usize,
        seed: u64,
    },
}

/// Expands templates with slot-holder sets into a dataset. Samples are
/// ordered by (contract, template id, running index).
pub fn build_dataset(
    templates: &[Template],
    slot_sets: &BTreeMap<String, Vec<SlotHolderSet>>,
    schemas: &BTreeMap<String, SlotSchema>,
    policy: SamplingPolicy,
) -> Result<Dataset, AugmentError> {
    if templates.is_empty() {
        return Err(AugmentError::EmptyInput("no templates"));
    }
    for t in templates {
        let schema = schemas
            .get(&t.contract_id)
            .ok_or_else(|| AugmentError::UnknownContract(t.contract_id.clone()))?;
        let violations = validate_template(t, schema);
        if !violations.is_empty() {
            return Err(AugmentError::InvalidTemplate {
                id: t.id.clone(),
                violations,
            });
        }
    }
    for (contract, sets) in slot_sets {
        let schema = schemas
            .get(contract)
            .ok_or_else(|| AugmentError::UnknownContract(contract.clone()))?;
        for s in sets {
            check_slot_set(s, schema)?;
        }
    }

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for contract in schemas.keys() {
        let Some(sets) = slot_sets.get(contract) else {
            continue;
        };
        for (ti, _) in templates
            .iter()
            .enumerate()
            .filter(|(_, t)| &t.contract_id == contract)
        {
            pairs.extend((0..sets.len()).map(|si| (ti, si)));
        }
    }
    if pairs.is_empty() {
        return Err(AugmentError::EmptyInput("no (template, slot set) pairs"));
    }

    let chosen: Vec<(usize, usize)> = match policy {
        SamplingPolicy::CrossProduct => pairs,
        SamplingPolicy::Sampled { n, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picks: Vec<usize> = if n <= pairs.len() {
                index::sample(&mut rng, pairs.len(), n).into_vec()
            } else {
                (0..n).map(|_| rng.gen_range(0..pairs.len())).collect()
            };
            picks.sort_unstable();
            picks.into_iter().map(|i| pairs[i]).collect()
        }
    };

    let mut counters: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut samples = Vec::with_capacity(chosen.len());
    for (ti, si) in chosen {
        let t = &templates[ti];
        let schema = &schemas[&t.contract_id];
        let set = &slot_sets[&t.contract_id][si];
        let k = counters
            .entry((t.contract_id.clone(), t.id.clone()))
            .or_insert(0);
        let id = format!("{}-{}-{}", t.contract_id, t.id, k);
        *k += 1;
        samples.push((k.saturating_sub(1), expand(t, set, schema, &id)?));
    }
    samples.sort_by(|(ka, a), (kb, b)| {
        (&a.contract_id, &a.template_id, ka).cmp(&(&b.contract_id, &b.template_id, kb))
    });

    Ok(Dataset {
        schemas: schemas.clone(),
        samples: samples.into_iter().map(|(_, s)| s).collect(),
        templates: templates.to_vec(),
    })
}

/// Partitions templates (not samples) per contract into train and test;
/// every sample follows its template.
pub fn split_dataset(
    data: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), AugmentError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(AugmentError::InvalidFraction);
    }
    // template ids per contract, from the registry or else from the samples
    let mut by_contract: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for t in &data.templates {
        by_contract
            .entry(t.contract_id.clone())
            .or_default()
            .insert(t.id.clone());
    }
    for s in &data.samples {
        by_contract
            .entry(s.contract_id.clone())
            .or_default()
            .insert(s.template_id.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_ids: BTreeSet<(String, String)> = BTreeSet::new();
    for (contract, ids) in &by_contract {
        if ids.len() < 2 {
            return Err(AugmentError::TooFewTemplates {
                contract: contract.clone(),
                found: ids.len(),
            });
        }
        let mut ids: Vec<&String> = ids.iter().collect();
        ids.shuffle(&mut rng);
        // round half up; at least one template on each side
        let n_test = ((ids.len() as f64) * test_fraction + 0.5) as usize;
        let n_test = n_test.clamp(1, ids.len() - 1);
        for id in &ids[..n_test] {
            test_ids.insert((contract.clone(), (*id).clone()));
        }
    }
    let is_test = |contract: &str, template: &str| {
        test_ids.contains(&(String::from(contract), String::from(template)))
    };
    let mut train = Dataset {
        schemas: data.schemas.clone(),
        ..Dataset::default()
    };
    let mut test = train.clone();
    for t in &data.templates {
        if is_test(&t.contract_id, &t.id) {
            test.templates.push(t.clone());
        } else {
            train.templates.push(t.clone());
        }
    }
    for s in &data.samples {
        if is_test(&s.contract_id, &s.template_id) {
            test.samples.push(s.clone());
        } else {
            train.samples.push(s.clone());
        }
    }
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Count {
    pub key: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceCount {
    pub role: String,
    pub surface: String,
    pub count: usize,
}

/// Entity-span distribution of a dataset. Every list is sorted by
/// descending count, then by key.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub samples: usize,
    pub total_entities: usize,
    pub distinct_surfaces: usize,
    pub contracts: Vec<Count>,
    pub roles: Vec<Count>,
    pub surfaces: Vec<SurfaceCount>,
}

fn sorted_counts(map: BTreeMap<String, usize>) -> Vec<Count> {
    let mut v: Vec<Count> = map
        .into_iter()
        .map(|(key, count)| Count { key, count })
        .collect();
    v.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
    v
}

pub fn dataset_stats(data: &Dataset) -> DatasetStats {
    let mut contracts: BTreeMap<String, usize> = BTreeMap::new();
    let mut roles: BTreeMap<String, usize> = BTreeMap::new();
    let mut surfaces: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut total = 0;
    for s in &data.samples {
        *contracts.entry(s.contract_id.clone()).or_default() += 1;
        for e in &s.entities {
            total += 1;
            *roles.entry(e.role.clone()).or_default() += 1;
            *surfaces
                .entry((e.role.clone(), e.surface.clone()))
                .or_default() += 1;
        }
    }
    let distinct_surfaces = surfaces
        .keys()
        .map(|(_, s)| s.as_str())
        .collect::<BTreeSet<_>>()
        .len();
    let mut surfaces: Vec<SurfaceCount> = surfaces
        .into_iter()
        .map(|((role, surface), count)| SurfaceCount {
            role,
            surface,
            count,
        })
        .collect();
    surfaces.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| (&a.role, &a.surface).cmp(&(&b.role, &b.surface)))
    });
    DatasetStats {
        samples: data.samples.len(),
        total_entities: total,
        distinct_surfaces,
        contracts: sorted_counts(contracts),
        roles: sorted_counts(roles),
        surfaces,
    }
}
