//! Tabular dataset files: CSV records, train/test split and the generation
//! manifest.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{count_cap, NetworkSpec, VariableDef};
use crate::sampler::PatientRecord;

pub const RECORD_ID: &str = "record_id";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unexpected column `{0}`")]
    UnexpectedColumn(String),
    #[error("row {row}: `{value}` is not a state of `{variable}`")]
    UnknownState { row: usize, variable: String, value: String },
    #[error("row {row}: bad record id `{value}`")]
    BadId { row: usize, value: String },
    #[error("duplicate record id {0}")]
    DuplicateId(u64),
    #[error("split sizes {train} + {test} do not add up to {total} records")]
    SplitSize { train: usize, test: usize, total: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Records with the variable definitions that give their values meaning.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub variables: Vec<VariableDef>,
    pub records: Vec<PatientRecord>,
}

impl Dataset {
    pub fn new(spec: &NetworkSpec, records: Vec<PatientRecord>) -> Self {
        Dataset { variables: spec.variables.clone(), records }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Label of a value: the state name, or the raw count for count variables.
    pub fn label(&self, var: usize, value: u32) -> String {
        let def = &self.variables[var];
        if count_cap(def).is_some() {
            value.to_string()
        } else {
            def.states[value as usize].clone()
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![RECORD_ID.to_string()];
        header.extend(self.variables.iter().map(|v| v.name.clone()));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.id.to_string()];
            row.extend(r.values.iter().enumerate().map(|(v, &x)| self.label(v, x)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads records whose columns are exactly `record_id` plus the spec's
    /// variables, in any order.
    pub fn read_csv<R: Read>(spec: &NetworkSpec, input: R) -> Result<Self, DatasetError> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        let column = |name: &str| header.iter().position(|h| h == name);
        let id_col = column(RECORD_ID).ok_or_else(|| DatasetError::MissingColumn(RECORD_ID.into()))?;
        let cols: Vec<usize> = spec
            .variables
            .iter()
            .map(|v| column(&v.name).ok_or_else(|| DatasetError::MissingColumn(v.name.clone())))
            .collect::<Result<_, _>>()?;
        if let Some(extra) = header.iter().find(|h| *h != RECORD_ID && spec.variable(h).is_none()) {
            return Err(DatasetError::UnexpectedColumn(extra.to_string()));
        }
        let counts: Vec<bool> = spec.variables.iter().map(|v| count_cap(v).is_some()).collect();
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let id_text = &rec[id_col];
            let id: u64 = id_text.parse().map_err(|_| DatasetError::BadId { row, value: id_text.to_string() })?;
            if !seen.insert(id) {
                return Err(DatasetError::DuplicateId(id));
            }
            let mut values = Vec::with_capacity(cols.len());
            for (v, &c) in cols.iter().enumerate() {
                let text = &rec[c];
                let def = &spec.variables[v];
                let parsed = if counts[v] { text.parse::<u32>().ok() } else { def.state_index(text).map(|s| s as u32) };
                values.push(parsed.ok_or_else(|| DatasetError::UnknownState {
                    row,
                    variable: def.name.clone(),
                    value: text.to_string(),
                })?);
            }
            records.push(PatientRecord { id, values });
        }
        Ok(Dataset { variables: spec.variables.clone(), records })
    }

    pub fn load_csv(spec: &NetworkSpec, path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(spec, std::io::BufReader::new(file))
    }

    /// Seeded random partition into `train_n` and `test_n` records; each part
    /// keeps the original record order.
    pub fn split(&self, train_n: usize, test_n: usize, seed: u64) -> Result<(Dataset, Dataset), DatasetError> {
        let total = self.records.len();
        if train_n + test_n != total {
            return Err(DatasetError::SplitSize { train: train_n, test: test_n, total });
        }
        let mut idx: Vec<usize> = (0..total).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut train_idx = idx[..train_n].to_vec();
        let mut test_idx = idx[train_n..].to_vec();
        train_idx.sort_unstable();
        test_idx.sort_unstable();
        let pick = |ids: &[usize]| Dataset {
            variables: self.variables.clone(),
            records: ids.iter().map(|&i| self.records[i].clone()).collect(),
        };
        Ok((pick(&train_idx), pick(&test_idx)))
    }
}

/// Written next to a generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub count: usize,
    pub spec_hash: String,
    pub version: String,
    pub records_file: String,
    pub rng: String,
}

impl Manifest {
    pub fn new(seed: u64, count: usize, spec: &NetworkSpec, records_file: &str) -> Self {
        Manifest {
            seed,
            count,
            spec_hash: spec.content_hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            records_file: records_file.to_string(),
            rng: "ChaCha20, seeded with the dataset seed, stream = record index".to_string(),
        }
    }
}
