//! Symptom prediction scores: F1 for yes/no symptoms, macro-F1 for the rest.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::inference::{EvidenceSetting, InferenceEngine, InferenceError};
use crate::network::{NetworkError, VariableKind};
use crate::par::Execution;
use crate::sampler::PatientRecord;

/// A yes/no symptom is predicted positive when P(yes) exceeds this.
pub const THRESHOLD: f64 = 0.5;

/// `confusion[truth][predicted]`.
pub fn confusion(truth: &[u32], predicted: &[u32], classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; classes]; classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        m[t as usize][p as usize] += 1;
    }
    m
}

/// F1 of one class. Zero when the class is neither present nor predicted.
pub fn class_f1(m: &[Vec<usize>], class: usize) -> f64 {
    let tp = m[class][class];
    let fn_: usize = m[class].iter().sum::<usize>() - tp;
    let fp: usize = m.iter().map(|row| row[class]).sum::<usize>() - tp;
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

pub fn f1(truth: &[u32], predicted: &[u32], positive: u32) -> f64 {
    let classes = truth.iter().chain(predicted).chain([&positive]).max().map_or(1, |&m| m as usize + 1);
    class_f1(&confusion(truth, predicted, classes), positive as usize)
}

/// Unweighted mean of per-class F1 over `classes` classes.
pub fn macro_f1(truth: &[u32], predicted: &[u32], classes: usize) -> f64 {
    let m = confusion(truth, predicted, classes);
    (0..classes).map(|c| class_f1(&m, c)).sum::<f64>() / classes as f64
}

/// Index of the largest probability; ties go to the earliest state.
pub fn argmax(probs: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best as u32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    F1,
    MacroF1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub symptom: String,
    pub setting: EvidenceSetting,
    pub metric: Metric,
    pub score: f64,
    pub n: usize,
    /// Only for thresholded yes/no symptoms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub states: Vec<String>,
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub entries: Vec<EvalEntry>,
}

impl EvalReport {
    pub fn score(&self, symptom: &str, setting: EvidenceSetting) -> Option<f64> {
        self.entries.iter().find(|e| e.symptom == symptom && e.setting == setting).map(|e| e.score)
    }

    /// Symptoms as rows, settings as columns.
    pub fn table(&self) -> String {
        let mut settings: Vec<EvidenceSetting> = Vec::new();
        let mut symptoms: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !settings.contains(&e.setting) {
                settings.push(e.setting);
            }
            if !symptoms.contains(&e.symptom.as_str()) {
                symptoms.push(&e.symptom);
            }
        }
        let mut out = format!("{:<10}", "symptom");
        for s in &settings {
            out += &format!(" {:>10}", s.name());
        }
        out.push('\n');
        for sym in symptoms {
            out += &format!("{sym:<10}");
            for &s in &settings {
                match self.score(sym, s) {
                    Some(v) => out += &format!(" {v:>10.4}"),
                    None => out += &format!(" {:>10}", "-"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Prediction for one record: P(yes) > threshold for yes/no variables,
/// argmax otherwise.
fn decide(probs: &[f64], yes: Option<usize>) -> u32 {
    match yes {
        Some(y) if probs[y] > THRESHOLD => y as u32,
        Some(y) => 1 - y as u32,
        None => argmax(probs),
    }
}

/// Scores every symptom of the engine's network under each setting on
/// `test`. Dataset columns are matched to network variables by name.
pub fn evaluate(
    engine: &InferenceEngine,
    test: &Dataset,
    settings: &[EvidenceSetting],
    exec: Execution,
) -> Result<EvalReport, InferenceError> {
    let net = engine.network();
    let columns: Vec<usize> = net
        .variables()
        .iter()
        .map(|v| test.index_of(&v.name).ok_or_else(|| NetworkError::UnknownVariable(v.name.clone())))
        .collect::<Result<_, _>>()?;
    let records: Vec<PatientRecord> = test
        .records
        .iter()
        .map(|r| PatientRecord { id: r.id, values: columns.iter().map(|&c| r.values[c]).collect() })
        .collect();
    let mut entries = Vec::new();
    for symptom in (0..net.len()).filter(|&v| net.variable(v).kind == VariableKind::Symptom) {
        let def = net.variable(symptom);
        let yes = def.is_binary_yes_no().then_some(1usize);
        let truth: Vec<u32> = records.iter().map(|r| r.values[symptom]).collect();
        for &setting in settings {
            let predicted: Vec<u32> = exec
                .map(records.len(), |i| engine.predict_symptom(&records[i], symptom, setting).map(|p| decide(&p, yes)))
                .into_iter()
                .collect::<Result<_, _>>()?;
            let classes = def.states.len();
            let (metric, score, threshold) = match yes {
                Some(y) => (Metric::F1, f1(&truth, &predicted, y as u32), Some(THRESHOLD)),
                None => (Metric::MacroF1, macro_f1(&truth, &predicted, classes), None),
            };
            entries.push(EvalEntry {
                symptom: def.name.clone(),
                setting,
                metric,
                score,
                n: records.len(),
                threshold,
                states: def.states.clone(),
                confusion: confusion(&truth, &predicted, classes),
            });
        }
    }
    Ok(EvalReport { entries })
}
