//! Network structure and the four conditional-distribution families.
//!
//! A [`NetworkSpec`] is the serializable, name-based description of a network.
//! [`Network`] is its validated, index-resolved form used by sampling,
//! inference and learning. Variable values are carried as `u32`: a state index
//! for categorical variables and the raw count for the Poisson outcome.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label of the tail bucket for count variables, e.g. `"≥15"`.
pub const TAIL_PREFIX: &str = "≥";

/// Tolerance for CPT rows summing to one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("network spec is invalid: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("cycle detected among variables: {0}")]
    Cycle(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}` has no state `{state}`")]
    UnknownState { variable: String, state: String },
    #[error("assignment is missing parent `{parent}` of `{child}`")]
    MissingParent { child: String, parent: String },
    #[error("`{0}` is not a Poisson-pair variable")]
    NotPoisson(String),
    #[error("failed to read network spec: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse network spec: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    Underlying,
    External,
    Diagnosis,
    Symptom,
    Treatment,
    Outcome,
}

fn default_true() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableDef {
    pub name: String,
    pub kind: VariableKind,
    pub states: Vec<String>,
    /// Whether the variable would be recorded in a realistic patient record.
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub recorded: bool,
}

impl VariableDef {
    pub fn new(name: &str, kind: VariableKind, states: &[&str]) -> Self {
        VariableDef {
            name: name.to_string(),
            kind,
            states: states.iter().map(|s| s.to_string()).collect(),
            recorded: true,
        }
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub fn is_binary_yes_no(&self) -> bool {
        self.states.len() == 2 && self.states[0] == "no" && self.states[1] == "yes"
    }
}

/// Explicit table. `table[r]` is the child distribution for the `r`-th parent
/// configuration, enumerated row-major with the last parent varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalCpt {
    pub child: String,
    #[serde(default)]
    pub parents: Vec<String>,
    pub table: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyOrCause {
    pub variable: String,
    pub activation: f64,
}

/// `P(child = yes | x) = 1 - (1 - leak) * prod_i (1 - p_i)^{x_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyOrCpd {
    pub child: String,
    pub leak: f64,
    pub causes: Vec<NoisyOrCause>,
}

/// Indicator coefficients for the non-reference states of one input.
/// States absent from `weights` contribute zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearTerm {
    pub variable: String,
    pub weights: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearForm {
    pub bias: f64,
    pub inputs: Vec<LinearTerm>,
}

/// `P(child = yes | x) = sigmoid(bias + sum of active indicator weights)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticCpd {
    pub child: String,
    #[serde(flatten)]
    pub form: LinearForm,
}

/// Count outcome with one Poisson regression per state of `switch`;
/// `λ = exp(linear form)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonPairCpd {
    pub child: String,
    pub switch: String,
    pub branches: BTreeMap<String, LinearForm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Cpd {
    Cpt(CategoricalCpt),
    NoisyOr(NoisyOrCpd),
    Logistic(LogisticCpd),
    PoissonPair(PoissonPairCpd),
}

impl Cpd {
    pub fn child(&self) -> &str {
        match self {
            Cpd::Cpt(c) => &c.child,
            Cpd::NoisyOr(c) => &c.child,
            Cpd::Logistic(c) => &c.child,
            Cpd::PoissonPair(c) => &c.child,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Cpd::Cpt(_) => Family::Cpt,
            Cpd::NoisyOr(_) => Family::NoisyOr,
            Cpd::Logistic(_) => Family::Logistic,
            Cpd::PoissonPair(_) => Family::PoissonPair,
        }
    }

    /// Parent names in the order used for factor scopes. For a Poisson pair
    /// this is the switch followed by the regression inputs in `declared`
    /// order.
    pub fn parent_names(&self, declared: &[String]) -> Vec<String> {
        match self {
            Cpd::Cpt(c) => c.parents.clone(),
            Cpd::NoisyOr(c) => c.causes.iter().map(|c| c.variable.clone()).collect(),
            Cpd::Logistic(c) => c.form.inputs.iter().map(|t| t.variable.clone()).collect(),
            Cpd::PoissonPair(c) => {
                let mut inputs: Vec<&String> =
                    c.branches.values().flat_map(|f| f.inputs.iter().map(|t| &t.variable)).collect();
                inputs.sort_by_key(|n| declared.iter().position(|d| d == *n).unwrap_or(usize::MAX));
                inputs.dedup();
                let mut out = vec![c.switch.clone()];
                out.extend(inputs.into_iter().filter(|n| **n != c.switch).cloned());
                out
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Cpt,
    NoisyOr,
    Logistic,
    PoissonPair,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Cpt => "cpt",
            Family::NoisyOr => "noisy_or",
            Family::Logistic => "logistic",
            Family::PoissonPair => "poisson_pair",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub variables: Vec<VariableDef>,
    pub cpds: Vec<Cpd>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub variable: String,
    pub reason: String,
}

impl Violation {
    fn new(variable: &str, reason: impl Into<String>) -> Self {
        Violation { variable: variable.to_string(), reason: reason.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.variable, self.reason)
    }
}

impl NetworkSpec {
    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network spec serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NetworkError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn variable(&self, name: &str) -> Option<&VariableDef> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn cpd(&self, child: &str) -> Option<&Cpd> {
        self.cpds.iter().find(|c| c.child() == child)
    }

    fn declared_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    /// Parent names per declared variable (empty when the CPD is missing).
    fn parent_lists(&self) -> Vec<Vec<String>> {
        let declared = self.declared_names();
        self.variables
            .iter()
            .map(|v| self.cpd(&v.name).map(|c| c.parent_names(&declared)).unwrap_or_default())
            .collect()
    }

    /// Every invariant violation; an empty list means the spec is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = HashMap::new();
        for v in &self.variables {
            if seen.insert(v.name.as_str(), ()).is_some() {
                out.push(Violation::new(&v.name, "duplicate variable name"));
            }
            if v.states.len() < 2 {
                out.push(Violation::new(&v.name, "fewer than two states"));
            }
            let mut labels: Vec<&String> = v.states.iter().collect();
            labels.sort();
            if labels.windows(2).any(|w| w[0] == w[1]) {
                out.push(Violation::new(&v.name, "duplicate state label"));
            }
        }
        for v in &self.variables {
            let n = self.cpds.iter().filter(|c| c.child() == v.name).count();
            if n == 0 {
                out.push(Violation::new(&v.name, "no conditional distribution"));
            } else if n > 1 {
                out.push(Violation::new(&v.name, "more than one conditional distribution"));
            }
        }
        for cpd in &self.cpds {
            let child = cpd.child();
            let Some(child_def) = self.variable(child) else {
                out.push(Violation::new(child, "distribution for undeclared variable"));
                continue;
            };
            let parents = cpd.parent_names(&self.declared_names());
            let mut parents_ok = true;
            for p in &parents {
                if p == child {
                    out.push(Violation::new(child, "variable is its own parent"));
                    parents_ok = false;
                } else if self.variable(p).is_none() {
                    out.push(Violation::new(child, format!("unknown parent `{p}`")));
                    parents_ok = false;
                }
            }
            let mut sorted = parents.clone();
            sorted.sort();
            if sorted.windows(2).any(|w| w[0] == w[1]) && !matches!(cpd, Cpd::PoissonPair(_)) {
                out.push(Violation::new(child, "duplicate parent"));
                parents_ok = false;
            }
            if parents_ok {
                self.validate_family(cpd, child_def, &mut out);
            }
        }
        if let Err(NetworkError::Cycle(names)) = self.topological_order() {
            let first = names.split(", ").next().unwrap_or_default().to_string();
            out.push(Violation::new(&first, format!("cycle detected among: {names}")));
        }
        out
    }

    fn validate_family(&self, cpd: &Cpd, child: &VariableDef, out: &mut Vec<Violation>) {
        let name = child.name.as_str();
        let prob_ok = |p: f64| p.is_finite() && (0.0..=1.0).contains(&p);
        match cpd {
            Cpd::Cpt(c) => {
                let rows: usize = c.parents.iter().map(|p| self.variable(p).map_or(1, |d| d.states.len())).product();
                if c.table.len() != rows {
                    out.push(Violation::new(name, format!("table has {} rows, expected {rows}", c.table.len())));
                    return;
                }
                for (r, row) in c.table.iter().enumerate() {
                    if row.len() != child.states.len() {
                        out.push(Violation::new(
                            name,
                            format!("row {r} has {} entries, expected {}", row.len(), child.states.len()),
                        ));
                        continue;
                    }
                    if !row.iter().all(|&p| prob_ok(p)) {
                        out.push(Violation::new(name, format!("row {r} has an entry outside [0, 1]")));
                    }
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > NORMALIZATION_TOLERANCE {
                        out.push(Violation::new(name, format!("column not normalized (row {r} sums to {s})")));
                    }
                }
            }
            Cpd::NoisyOr(c) => {
                if !child.is_binary_yes_no() {
                    out.push(Violation::new(name, "noisy-or child must have states [no, yes]"));
                }
                if !prob_ok(c.leak) {
                    out.push(Violation::new(name, "leak probability outside [0, 1]"));
                }
                for cause in &c.causes {
                    if !prob_ok(cause.activation) {
                        out.push(Violation::new(name, format!("activation for `{}` outside [0, 1]", cause.variable)));
                    }
                    if let Some(d) = self.variable(&cause.variable) {
                        if !d.is_binary_yes_no() {
                            out.push(Violation::new(
                                name,
                                format!("noisy-or cause `{}` must have states [no, yes]", d.name),
                            ));
                        }
                    }
                }
            }
            Cpd::Logistic(c) => {
                if !child.is_binary_yes_no() {
                    out.push(Violation::new(name, "logistic child must have states [no, yes]"));
                }
                self.validate_form(name, &c.form, out);
            }
            Cpd::PoissonPair(c) => {
                if count_cap(child).is_none() {
                    out.push(Violation::new(name, "count states must be \"0\", \"1\", ..., \"N\", \"≥N\""));
                }
                match self.variable(&c.switch) {
                    Some(sw) => {
                        let mut keys: Vec<&String> = c.branches.keys().collect();
                        let mut states: Vec<&String> = sw.states.iter().collect();
                        keys.sort();
                        states.sort();
                        if keys != states {
                            out.push(Violation::new(name, "branches must match the switch states one to one"));
                        }
                    }
                    None => out.push(Violation::new(name, format!("unknown switch `{}`", c.switch))),
                }
                for form in c.branches.values() {
                    self.validate_form(name, form, out);
                }
            }
        }
    }

    fn validate_form(&self, name: &str, form: &LinearForm, out: &mut Vec<Violation>) {
        if !form.bias.is_finite() {
            out.push(Violation::new(name, "non-finite bias"));
        }
        for term in &form.inputs {
            let Some(def) = self.variable(&term.variable) else { continue };
            for (state, w) in &term.weights {
                if def.state_index(state).is_none() {
                    out.push(Violation::new(name, format!("weight for unknown state `{state}` of `{}`", def.name)));
                }
                if !w.is_finite() {
                    out.push(Violation::new(name, format!("non-finite weight for `{}`", def.name)));
                }
            }
        }
    }

    /// Variables ordered so every variable follows all of its parents; ties
    /// are broken by declaration order.
    pub fn topological_order(&self) -> Result<Vec<String>, NetworkError> {
        let names = self.declared_names();
        let parents = self.parent_lists();
        let mut placed = vec![false; names.len()];
        let mut order = Vec::with_capacity(names.len());
        while order.len() < names.len() {
            let next = (0..names.len()).find(|&i| {
                !placed[i]
                    && parents[i].iter().all(|p| match names.iter().position(|n| n == p) {
                        Some(j) => placed[j],
                        None => true,
                    })
            });
            match next {
                Some(i) => {
                    placed[i] = true;
                    order.push(names[i].clone());
                }
                None => {
                    let stuck: Vec<String> =
                        (0..names.len()).filter(|&i| !placed[i]).map(|i| names[i].clone()).collect();
                    return Err(NetworkError::Cycle(stuck.join(", ")));
                }
            }
        }
        Ok(order)
    }

    /// Copy of the spec with the count variable's buckets rewritten to
    /// `"0"..="cap"` plus the tail state.
    pub fn with_day_cap(&self, cap: u32) -> NetworkSpec {
        let mut spec = self.clone();
        let counts: Vec<String> =
            spec.cpds.iter().filter(|c| matches!(c, Cpd::PoissonPair(_))).map(|c| c.child().to_string()).collect();
        for v in spec.variables.iter_mut().filter(|v| counts.contains(&v.name)) {
            v.states = count_states(cap);
        }
        spec
    }

    /// Stable content hash of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(serde_json::to_vec(self).expect("network spec serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `"0"`, `"1"`, ..., `"cap"`, `"≥cap"`.
pub fn count_states(cap: u32) -> Vec<String> {
    let mut s: Vec<String> = (0..=cap).map(|k| k.to_string()).collect();
    s.push(format!("{TAIL_PREFIX}{cap}"));
    s
}

/// Cap of a count variable, recognised by its `"0".."N", "≥N"` states.
pub fn count_cap(def: &VariableDef) -> Option<u32> {
    let n = def.states.len();
    if n < 2 {
        return None;
    }
    let cap = (n - 2) as u32;
    (def.states == count_states(cap)).then_some(cap)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Poisson probability mass at `k`.
pub fn poisson_pmf(lambda: f64, k: u32) -> f64 {
    if k < 400 {
        let mut p = (-lambda).exp();
        for i in 1..=k {
            p *= lambda / i as f64;
        }
        p
    } else {
        let log_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
        (k as f64 * lambda.ln() - lambda - log_fact).exp()
    }
}

/// `P(K >= from)` for `K ~ Poisson(lambda)`. Equal to one minus the mass
/// below `from`, but summed directly when that difference would cancel.
pub fn poisson_tail(lambda: f64, from: u32) -> f64 {
    if lambda >= from as f64 {
        return (1.0 - (0..from).map(|k| poisson_pmf(lambda, k)).sum::<f64>()).max(0.0);
    }
    // Terms shrink at least geometrically past the mode.
    let mut term = poisson_pmf(lambda, from);
    let mut total = 0.0;
    let mut k = from;
    while term > total * 1e-17 && term > 0.0 {
        total += term;
        k += 1;
        term *= lambda / k as f64;
    }
    total
}

/// Linear form with variables resolved to indices and one weight per state.
#[derive(Clone, Debug)]
pub struct ResolvedForm {
    pub bias: f64,
    pub terms: Vec<(usize, Vec<f64>)>,
}

impl ResolvedForm {
    pub fn eval(&self, values: &[u32]) -> f64 {
        self.bias + self.terms.iter().map(|(v, w)| w[values[*v] as usize]).sum::<f64>()
    }
}

#[derive(Clone, Debug)]
pub enum Dist {
    Table { rows: Vec<f64> },
    NoisyOr { leak: f64, activations: Vec<f64> },
    Logistic(ResolvedForm),
    PoissonPair { switch: usize, branches: Vec<ResolvedForm> },
}

/// A validated network with every name resolved to an index.
#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    parents: Vec<Vec<usize>>,
    dists: Vec<Dist>,
    order: Vec<usize>,
    index: HashMap<String, usize>,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self, NetworkError> {
        let violations = spec.validate();
        if !violations.is_empty() {
            return Err(NetworkError::Invalid(violations));
        }
        let index: HashMap<String, usize> =
            spec.variables.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
        let declared = spec.declared_names();
        let mut parents = Vec::new();
        let mut dists = Vec::new();
        for v in &spec.variables {
            let cpd = spec.cpd(&v.name).expect("validated");
            parents.push(cpd.parent_names(&declared).iter().map(|p| index[p]).collect::<Vec<_>>());
            let resolve = |form: &LinearForm| ResolvedForm {
                bias: form.bias,
                terms: form
                    .inputs
                    .iter()
                    .map(|t| {
                        let def = &spec.variables[index[&t.variable]];
                        let w = def.states.iter().map(|s| t.weights.get(s).copied().unwrap_or(0.0)).collect();
                        (index[&t.variable], w)
                    })
                    .collect(),
            };
            dists.push(match cpd {
                Cpd::Cpt(c) => Dist::Table { rows: c.table.iter().flatten().copied().collect() },
                Cpd::NoisyOr(c) => {
                    Dist::NoisyOr { leak: c.leak, activations: c.causes.iter().map(|c| c.activation).collect() }
                }
                Cpd::Logistic(c) => Dist::Logistic(resolve(&c.form)),
                Cpd::PoissonPair(c) => {
                    let sw = &spec.variables[index[&c.switch]];
                    Dist::PoissonPair {
                        switch: index[&c.switch],
                        branches: sw.states.iter().map(|s| resolve(&c.branches[s])).collect(),
                    }
                }
            });
        }
        let order = spec.topological_order()?.iter().map(|n| index[n]).collect();
        Ok(Network { spec, parents, dists, order, index })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.variables.is_empty()
    }

    pub fn variables(&self) -> &[VariableDef] {
        &self.spec.variables
    }

    pub fn variable(&self, i: usize) -> &VariableDef {
        &self.spec.variables[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize, NetworkError> {
        self.index.get(name).copied().ok_or_else(|| NetworkError::UnknownVariable(name.to_string()))
    }

    pub fn state_of(&self, var: usize, label: &str) -> Result<u32, NetworkError> {
        let def = self.variable(var);
        if self.is_count(var) {
            if let Ok(k) = label.parse::<u32>() {
                return Ok(k);
            }
        }
        def.state_index(label)
            .map(|s| s as u32)
            .ok_or_else(|| NetworkError::UnknownState { variable: def.name.clone(), state: label.to_string() })
    }

    pub fn parents(&self, var: usize) -> &[usize] {
        &self.parents[var]
    }

    pub fn dist(&self, var: usize) -> &Dist {
        &self.dists[var]
    }

    pub fn family(&self, var: usize) -> Family {
        match self.dists[var] {
            Dist::Table { .. } => Family::Cpt,
            Dist::NoisyOr { .. } => Family::NoisyOr,
            Dist::Logistic(_) => Family::Logistic,
            Dist::PoissonPair { .. } => Family::PoissonPair,
        }
    }

    /// Topological order, ties broken by declaration order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn is_count(&self, var: usize) -> bool {
        matches!(self.dists[var], Dist::PoissonPair { .. })
    }

    /// Largest count with its own bucket; counts above it share the tail state.
    pub fn day_cap(&self, var: usize) -> Option<u32> {
        if self.is_count(var) {
            count_cap(self.variable(var))
        } else {
            None
        }
    }

    /// Number of states used for inference (buckets for the count variable).
    pub fn cardinality(&self, var: usize) -> usize {
        self.variable(var).states.len()
    }

    /// Maps a raw value to its inference state (identity for categoricals).
    pub fn bucket(&self, var: usize, value: u32) -> u32 {
        match self.day_cap(var) {
            Some(cap) => value.min(cap + 1),
            None => value,
        }
    }

    pub fn children(&self, var: usize) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.parents[c].contains(&var)).collect()
    }

    /// Indices of `vars` and all their ancestors.
    pub fn ancestral_set(&self, vars: &[usize]) -> Vec<bool> {
        let mut keep = vec![false; self.len()];
        let mut stack: Vec<usize> = vars.to_vec();
        while let Some(v) = stack.pop() {
            if !keep[v] {
                keep[v] = true;
                stack.extend(self.parents[v].iter().copied());
            }
        }
        keep
    }

    /// Exact conditional probability of `value` for `var` given the parent
    /// values in `values` (indexed by variable; non-parents are ignored).
    /// For the count variable `value` is the raw count.
    pub fn prob(&self, var: usize, value: u32, values: &[u32]) -> f64 {
        let parents = &self.parents[var];
        match &self.dists[var] {
            Dist::Table { rows } => {
                let mut row = 0usize;
                for &p in parents {
                    row = row * self.cardinality(p) + values[p] as usize;
                }
                rows[row * self.cardinality(var) + value as usize]
            }
            Dist::NoisyOr { leak, activations } => {
                let mut off = 1.0 - leak;
                for (&p, &a) in parents.iter().zip(activations) {
                    if values[p] == 1 {
                        off *= 1.0 - a;
                    }
                }
                if value == 1 {
                    1.0 - off
                } else {
                    off
                }
            }
            Dist::Logistic(form) => {
                let on = sigmoid(form.eval(values));
                if value == 1 {
                    on
                } else {
                    1.0 - on
                }
            }
            Dist::PoissonPair { .. } => poisson_pmf(self.lambda(var, values), value),
        }
    }

    /// Probability of the inference bucket `state` for the count variable.
    pub fn bucket_prob(&self, var: usize, state: u32, values: &[u32]) -> f64 {
        let cap = self.day_cap(var).expect("count variable");
        let lambda = self.lambda(var, values);
        if state <= cap {
            poisson_pmf(lambda, state)
        } else {
            poisson_tail(lambda, cap + 1)
        }
    }

    /// Poisson mean of the branch selected by the switch value in `values`.
    pub fn lambda(&self, var: usize, values: &[u32]) -> f64 {
        match &self.dists[var] {
            Dist::PoissonPair { switch, branches } => branches[values[*switch] as usize].eval(values).exp(),
            _ => panic!("`{}` is not a Poisson-pair variable", self.variable(var).name),
        }
    }

    fn values_from(&self, var: usize, assignment: &Assignment) -> Result<Vec<u32>, NetworkError> {
        let mut values = vec![0u32; self.len()];
        for &p in &self.parents[var] {
            let name = &self.variable(p).name;
            let label = assignment.get(name).ok_or_else(|| NetworkError::MissingParent {
                child: self.variable(var).name.clone(),
                parent: name.clone(),
            })?;
            values[p] = self.state_of(p, label)?;
        }
        Ok(values)
    }

    /// Name-based conditional probability. For the count variable the state
    /// is either a raw count (`"6"`) or the tail label (`"≥15"`).
    pub fn eval_cpd(&self, child: &str, child_state: &str, assignment: &Assignment) -> Result<f64, NetworkError> {
        let var = self.index_of(child)?;
        let values = self.values_from(var, assignment)?;
        if self.is_count(var) {
            if let Ok(k) = child_state.parse::<u32>() {
                return Ok(self.prob(var, k, &values));
            }
            let state = self.state_of(var, child_state)?;
            return Ok(self.bucket_prob(var, state, &values));
        }
        Ok(self.prob(var, self.state_of(var, child_state)?, &values))
    }

    /// Poisson mean for an explicit branch (state label of the switch).
    pub fn eval_lambda(&self, child: &str, branch: &str, assignment: &Assignment) -> Result<f64, NetworkError> {
        let var = self.index_of(child)?;
        let Dist::PoissonPair { switch, branches } = &self.dists[var] else {
            return Err(NetworkError::NotPoisson(child.to_string()));
        };
        let b = self.state_of(*switch, branch)?;
        let mut values = vec![0u32; self.len()];
        for &p in &self.parents[var] {
            if p == *switch {
                continue;
            }
            let name = &self.variable(p).name;
            let label = assignment
                .get(name)
                .ok_or_else(|| NetworkError::MissingParent { child: child.to_string(), parent: name.clone() })?;
            values[p] = self.state_of(p, label)?;
        }
        Ok(branches[b as usize].eval(&values).exp())
    }
}

/// Variable name to state label.
pub type Assignment = BTreeMap<String, String>;

/// Builds an [`Assignment`] from `(name, state)` pairs.
pub fn assignment<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Assignment {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}
