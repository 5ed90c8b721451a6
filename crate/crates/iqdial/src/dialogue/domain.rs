//! Domain ontologies and their entity databases.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Deserialize;

use super::DialogueError;

#[derive(Clone, Debug)]
pub struct SlotDef {
    pub name: String,
    pub values: Vec<String>,
}

/// One database row: a value index per constraint slot plus an opaque
/// result payload (e.g. a schedule identifier).
#[derive(Clone, Debug, PartialEq)]
pub struct Entity {
    pub values: Vec<u16>,
    pub payload: String,
}

#[derive(Clone, Debug)]
pub struct DomainSpec {
    pub name: String,
    pub slots: Vec<SlotDef>,
    pub database: Vec<Entity>,
}

impl DomainSpec {
    pub fn db_size(&self) -> usize {
        self.database.len()
    }

    pub fn slot_index(&self, name: &str) -> Result<usize, DialogueError> {
        self.slots
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| DialogueError::UnknownSlot { name: name.to_string() })
    }

    pub fn value_index(&self, slot: usize, value: &str) -> Result<u16, DialogueError> {
        let def = &self.slots[slot];
        def.values
            .iter()
            .position(|v| v == value)
            .map(|i| i as u16)
            .ok_or_else(|| DialogueError::UnknownValue {
                slot: def.name.clone(),
                value: value.to_string(),
            })
    }

    pub fn value_name(&self, slot: usize, value: usize) -> &str {
        &self.slots[slot].values[value]
    }
}

#[derive(Deserialize)]
struct OntologyFile {
    name: String,
    slots: Vec<OntologySlot>,
    #[serde(default)]
    db: Option<Vec<serde_json::Map<String, serde_json::Value>>>,
    #[serde(default)]
    db_gen: Option<DbGen>,
}

#[derive(Deserialize)]
struct OntologySlot {
    name: String,
    values: Vec<String>,
}

#[derive(Deserialize)]
struct DbGen {
    size: usize,
    seed: u64,
}

/// Loads a JSON ontology. The database comes either from explicit `db`
/// rows (slot-name → value, optional `payload`) or from `db_gen`.
pub fn load_domain(path: &Path) -> Result<DomainSpec, DialogueError> {
    let text = std::fs::read_to_string(path)?;
    let file: OntologyFile = serde_json::from_str(&text).map_err(|e| {
        DialogueError::MalformedOntology { path: path.display().to_string(), what: e.to_string() }
    })?;
    let slots: Vec<SlotDef> = file
        .slots
        .into_iter()
        .map(|s| SlotDef { name: s.name, values: s.values })
        .collect();
    if slots.is_empty() {
        return Err(DialogueError::MalformedOntology {
            path: path.display().to_string(),
            what: "no slots".into(),
        });
    }
    let mut spec = DomainSpec { name: file.name, slots, database: Vec::new() };

    if let Some(rows) = file.db {
        for (i, row) in rows.iter().enumerate() {
            let mut values = Vec::with_capacity(spec.slots.len());
            for (slot_idx, slot) in spec.slots.iter().enumerate() {
                let raw = row.get(&slot.name).and_then(|v| v.as_str()).ok_or_else(|| {
                    DialogueError::MalformedOntology {
                        path: path.display().to_string(),
                        what: format!("db row {i}: missing slot {}", slot.name),
                    }
                })?;
                let vi = spec.value_index(slot_idx, raw)?;
                values.push(vi);
            }
            let payload = row
                .get("payload")
                .and_then(|v| v.as_str())
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("entry_{i}"));
            spec.database.push(Entity { values, payload });
        }
    } else if let Some(gen) = file.db_gen {
        spec = generate_db(spec, gen.size, gen.seed);
    }
    Ok(spec)
}

/// Replaces the database with `size` distinct uniform random tuples over
/// the slot value sets. Capped at the number of possible tuples.
pub fn generate_db(mut spec: DomainSpec, size: usize, seed: u64) -> DomainSpec {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let capacity: usize = spec
        .slots
        .iter()
        .map(|s| s.values.len())
        .try_fold(1usize, |acc, n| acc.checked_mul(n))
        .unwrap_or(usize::MAX);
    let target = size.min(capacity);
    let mut seen: HashSet<Vec<u16>> = HashSet::with_capacity(target);
    let mut database = Vec::with_capacity(target);
    while database.len() < target {
        let tuple: Vec<u16> = spec
            .slots
            .iter()
            .map(|s| rng.gen_range(0..s.values.len()) as u16)
            .collect();
        if seen.insert(tuple.clone()) {
            let payload = format!("entry_{}", database.len());
            database.push(Entity { values: tuple, payload });
        }
    }
    spec.database = database;
    spec
}

/// Entities matching every constraint; an empty constraint list matches
/// the whole database.
pub fn db_query<'a>(spec: &'a DomainSpec, constraints: &[(usize, u16)]) -> Vec<&'a Entity> {
    spec.database
        .iter()
        .filter(|e| constraints.iter().all(|&(slot, value)| e.values[slot] == value))
        .collect()
}

/// Count-only variant of [`db_query`].
pub fn db_match_count(spec: &DomainSpec, constraints: &[(usize, u16)]) -> usize {
    spec.database
        .iter()
        .filter(|e| constraints.iter().all(|&(slot, value)| e.values[slot] == value))
        .count()
}
