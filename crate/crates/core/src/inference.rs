//! Exact inference by variable elimination.
//!
//! Every CPD is compiled once into a [`Factor`]; a query reduces the factors
//! of the query's ancestral set by the evidence, eliminates the hidden
//! variables in min-fill order and normalizes what is left.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor::{compile_factor, Factor};
use crate::network::{Assignment, Network, NetworkError, VariableKind};
use crate::sampler::PatientRecord;

/// Normalizers at or below this are treated as impossible evidence.
pub const IMPOSSIBLE_EVIDENCE: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("query variable `{0}` is also part of the evidence")]
    QueryInEvidence(String),
    #[error("impossible evidence: probability of the evidence is zero")]
    ImpossibleEvidence,
    #[error("`{0}` is not a symptom")]
    NotSymptom(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EvidenceSetting {
    #[serde(rename = "all")]
    All,
    #[serde(rename = "no-sympt")]
    NoSympt,
    #[serde(rename = "realistic")]
    Realistic,
}

impl EvidenceSetting {
    pub const ALL: [EvidenceSetting; 3] = [EvidenceSetting::All, EvidenceSetting::NoSympt, EvidenceSetting::Realistic];

    pub fn name(self) -> &'static str {
        match self {
            EvidenceSetting::All => "all",
            EvidenceSetting::NoSympt => "no-sympt",
            EvidenceSetting::Realistic => "realistic",
        }
    }

    /// Evidence variables used when predicting `target`.
    ///
    /// `all` is every other variable; `no-sympt` drops the other symptoms;
    /// `realistic` further drops variables not recorded in a patient record.
    pub fn evidence_vars(self, net: &Network, target: usize) -> Vec<usize> {
        (0..net.len())
            .filter(|&v| v != target)
            .filter(|&v| {
                let def = net.variable(v);
                match self {
                    EvidenceSetting::All => true,
                    EvidenceSetting::NoSympt => def.kind != VariableKind::Symptom,
                    EvidenceSetting::Realistic => def.kind != VariableKind::Symptom && def.recorded,
                }
            })
            .collect()
    }
}

impl fmt::Display for EvidenceSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvidenceSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(EvidenceSetting::All),
            "no-sympt" => Ok(EvidenceSetting::NoSympt),
            "realistic" => Ok(EvidenceSetting::Realistic),
            other => Err(format!("unknown evidence setting `{other}` (expected all, no-sympt or realistic)")),
        }
    }
}

/// A network together with its compiled factors.
#[derive(Clone, Debug)]
pub struct InferenceEngine {
    net: Network,
    factors: Vec<Factor>,
}

impl InferenceEngine {
    pub fn new(net: Network) -> Self {
        let factors = (0..net.len()).map(|v| compile_factor(&net, v)).collect();
        InferenceEngine { net, factors }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn factor(&self, var: usize) -> &Factor {
        &self.factors[var]
    }

    /// `P(query | evidence)`; evidence states are inference states (the
    /// count variable must already be bucketed).
    pub fn posterior(&self, query: usize, evidence: &[(usize, u32)]) -> Result<Vec<f64>, InferenceError> {
        self.run(query, evidence, None)
    }

    /// Same as [`posterior`](Self::posterior) with a caller-chosen order for
    /// the hidden variables. Variables missing from `order` are eliminated
    /// last, in min-fill order.
    pub fn posterior_with_order(
        &self,
        query: usize,
        evidence: &[(usize, u32)],
        order: &[usize],
    ) -> Result<Vec<f64>, InferenceError> {
        self.run(query, evidence, Some(order))
    }

    fn run(
        &self,
        query: usize,
        evidence: &[(usize, u32)],
        order: Option<&[usize]>,
    ) -> Result<Vec<f64>, InferenceError> {
        if evidence.iter().any(|(v, _)| *v == query) {
            return Err(InferenceError::QueryInEvidence(self.net.variable(query).name.clone()));
        }
        let mut observed = vec![None; self.net.len()];
        for &(v, s) in evidence {
            observed[v] = Some(s as usize);
        }
        let mut roots: Vec<usize> = evidence.iter().map(|(v, _)| *v).collect();
        roots.push(query);
        let relevant = self.net.ancestral_set(&roots);

        let mut factors: Vec<Factor> = Vec::new();
        for v in (0..self.net.len()).filter(|&v| relevant[v]) {
            let mut f = self.factors[v].clone();
            for &u in self.factors[v].scope() {
                if let Some(s) = observed[u] {
                    f = f.reduce(u, s);
                }
            }
            factors.push(f);
        }
        let hidden: Vec<usize> =
            (0..self.net.len()).filter(|&v| relevant[v] && v != query && observed[v].is_none()).collect();

        let mut remaining: BTreeSet<usize> = hidden.iter().copied().collect();
        let mut plan: Vec<usize> = Vec::with_capacity(hidden.len());
        if let Some(order) = order {
            for &v in order {
                if remaining.remove(&v) {
                    plan.push(v);
                }
            }
        }
        while !remaining.is_empty() {
            let scopes = simulate_scopes(&factors, &plan);
            let v = self.min_fill(&scopes, &remaining);
            remaining.remove(&v);
            plan.push(v);
        }

        for v in plan {
            let (with, without): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.contains(v));
            factors = without;
            if let Some(joined) = with.into_iter().reduce(|a, b| a.product(&b)) {
                factors.push(joined.sum_out(v));
            }
        }
        let joint = factors.into_iter().fold(Factor::scalar(1.0), |a, b| a.product(&b));
        debug_assert_eq!(joint.scope(), &[query]);
        let z = joint.total();
        if z.is_nan() || z <= IMPOSSIBLE_EVIDENCE {
            return Err(InferenceError::ImpossibleEvidence);
        }
        Ok(joint.values().iter().map(|p| p / z).collect())
    }

    /// Hidden variable whose elimination adds the fewest fill edges; ties go
    /// to the alphabetically first name.
    fn min_fill(&self, scopes: &[BTreeSet<usize>], candidates: &BTreeSet<usize>) -> usize {
        let mut best: Option<(usize, &str, usize)> = None;
        for &v in candidates {
            let mut neighbours = BTreeSet::new();
            for s in scopes.iter().filter(|s| s.contains(&v)) {
                neighbours.extend(s.iter().copied().filter(|&u| u != v));
            }
            let nb: Vec<usize> = neighbours.into_iter().collect();
            let mut fill = 0;
            for i in 0..nb.len() {
                for j in i + 1..nb.len() {
                    if !scopes.iter().any(|s| s.contains(&nb[i]) && s.contains(&nb[j])) {
                        fill += 1;
                    }
                }
            }
            let name = self.net.variable(v).name.as_str();
            let better = match best {
                None => true,
                Some((_, bn, bf)) => fill < bf || (fill == bf && name < bn),
            };
            if better {
                best = Some((v, name, fill));
            }
        }
        best.expect("non-empty candidate set").0
    }

    /// Name-based query. Evidence labels for the count variable may be a raw
    /// count, which is mapped to its bucket.
    pub fn eliminate(&self, query: &str, evidence: &Assignment) -> Result<Vec<(String, f64)>, InferenceError> {
        let q = self.net.index_of(query)?;
        let mut ev = Vec::with_capacity(evidence.len());
        for (name, label) in evidence {
            let v = self.net.index_of(name)?;
            ev.push((v, self.net.bucket(v, self.net.state_of(v, label)?)));
        }
        let post = self.posterior(q, &ev)?;
        Ok(self.net.variable(q).states.iter().cloned().zip(post).collect())
    }

    /// Posterior of `symptom` with the record's values for the setting's
    /// evidence variables.
    pub fn predict_symptom(
        &self,
        record: &PatientRecord,
        symptom: usize,
        setting: EvidenceSetting,
    ) -> Result<Vec<f64>, InferenceError> {
        if self.net.variable(symptom).kind != VariableKind::Symptom {
            return Err(InferenceError::NotSymptom(self.net.variable(symptom).name.clone()));
        }
        let evidence: Vec<(usize, u32)> = setting
            .evidence_vars(&self.net, symptom)
            .into_iter()
            .map(|v| (v, self.net.bucket(v, record.values[v])))
            .collect();
        self.posterior(symptom, &evidence)
    }
}

/// Factor scopes after eliminating `done` in order, without touching values.
fn simulate_scopes(factors: &[Factor], done: &[usize]) -> Vec<BTreeSet<usize>> {
    let mut scopes: Vec<BTreeSet<usize>> = factors.iter().map(|f| f.scope().iter().copied().collect()).collect();
    for &v in done {
        let (with, mut without): (Vec<_>, Vec<_>) = scopes.into_iter().partition(|s| s.contains(&v));
        let mut merged: BTreeSet<usize> = with.into_iter().flatten().collect();
        merged.remove(&v);
        without.push(merged);
        scopes = without;
    }
    scopes
}
