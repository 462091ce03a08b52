//! Maximum-likelihood parameter learning for a fixed network structure.
//!
//! Tables are fitted by smoothed counting. Noisy-OR, logistic and Poisson
//! models are fitted by minibatch Adam on the mean negative log-likelihood,
//! with every probability held as an unconstrained logit.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::network::{
    count_states, sigmoid, CategoricalCpt, Cpd, Family, LinearForm, LinearTerm, LogisticCpd, Network, NetworkError,
    NetworkSpec, NoisyOrCause, NoisyOrCpd, PoissonPairCpd, VariableDef,
};
use crate::par::Execution;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("dataset is empty")]
    EmptyData,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("value {value} is not a state of `{variable}`")]
    UnknownState { variable: String, value: u32 },
    #[error("`{0}` must have states [no, yes]")]
    NotBinary(String),
    #[error("branch `{branch}` of `{child}` has no rows")]
    EmptyBranch { child: String, branch: String },
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error("learning failed for {}", .0.iter().map(|(v, e)| format!("`{v}` ({e})")).collect::<Vec<_>>().join(", "))]
    Aggregate(Vec<(String, LearnError)>),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Initial parameters are drawn uniformly from `(-init_range, init_range)`;
    /// zero gives an all-zero start.
    pub init_range: f64,
}

impl FitConfig {
    pub fn noisy_or() -> Self {
        FitConfig { epochs: 10, batch_size: 50, learning_rate: 0.01, seed: 0, init_range: 1.0 }
    }

    pub fn regression() -> Self {
        FitConfig { epochs: 15, ..Self::noisy_or() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn check(&self) -> Result<(), LearnError> {
        if self.epochs < 1 {
            return Err(LearnError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(LearnError::Config("batch size must be at least 1".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(LearnError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// A fitted distribution and the mean full-data negative log-likelihood at
/// initialization (`[0]`) and after each epoch.
#[derive(Clone, Debug)]
pub struct Fit<T> {
    pub cpd: T,
    pub loss_history: Vec<f64>,
}

/// Mean negative log-likelihood whose gradient is accumulated row by row.
trait Objective: Sync {
    fn n_params(&self) -> usize;
    fn n_rows(&self) -> usize;
    /// Adds the row's gradient to `grad` and returns the row's loss.
    fn row(&self, params: &[f64], i: usize, grad: &mut [f64]) -> f64;

    fn full_loss(&self, params: &[f64]) -> f64 {
        let mut scratch = vec![0.0; self.n_params()];
        let n = self.n_rows();
        (0..n).map(|i| self.row(params, i, &mut scratch)).sum::<f64>() / n as f64
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

fn train(obj: &dyn Objective, config: &FitConfig) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params: Vec<f64> = (0..obj.n_params())
        .map(|_| if config.init_range > 0.0 { rng.gen_range(-config.init_range..config.init_range) } else { 0.0 })
        .collect();
    let mut history = vec![obj.full_loss(&params)];
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut order: Vec<usize> = (0..obj.n_rows()).collect();
    let mut grad = vec![0.0; params.len()];
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                obj.row(&params, i, &mut grad);
            }
            let n = batch.len() as f64;
            grad.iter_mut().for_each(|g| *g /= n);
            adam.step(&mut params, &grad);
        }
        history.push(obj.full_loss(&params));
    }
    (params, history)
}

fn var_index(data: &Dataset, name: &str) -> Result<usize, LearnError> {
    data.index_of(name).ok_or_else(|| LearnError::UnknownVariable(name.to_string()))
}

fn check_states(data: &Dataset, var: usize) -> Result<(), LearnError> {
    let card = data.variables[var].states.len() as u32;
    match data.records.iter().find(|r| r.values[var] >= card) {
        Some(r) => Err(LearnError::UnknownState { variable: data.variables[var].name.clone(), value: r.values[var] }),
        None => Ok(()),
    }
}

fn require_binary(data: &Dataset, var: usize) -> Result<(), LearnError> {
    if !data.variables[var].is_binary_yes_no() {
        return Err(LearnError::NotBinary(data.variables[var].name.clone()));
    }
    check_states(data, var)
}

/// Smoothed counting: `(count + a) / (total + a * |child states|)`.
pub fn fit_cpt(data: &Dataset, child: &str, parents: &[&str], pseudocount: f64) -> Result<CategoricalCpt, LearnError> {
    if data.records.is_empty() {
        return Err(LearnError::EmptyData);
    }
    if pseudocount.is_nan() || pseudocount < 0.0 {
        return Err(LearnError::Config("pseudocount must be nonnegative".into()));
    }
    let c = var_index(data, child)?;
    let ps: Vec<usize> = parents.iter().map(|p| var_index(data, p)).collect::<Result<_, _>>()?;
    for &v in ps.iter().chain([&c]) {
        check_states(data, v)?;
    }
    let card = data.variables[c].states.len();
    let rows: usize = ps.iter().map(|&p| data.variables[p].states.len()).product();
    let mut counts = vec![vec![0.0; card]; rows];
    for r in &data.records {
        let row = ps.iter().fold(0usize, |acc, &p| acc * data.variables[p].states.len() + r.values[p] as usize);
        counts[row][r.values[c] as usize] += 1.0;
    }
    let table = counts
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum::<f64>() + pseudocount * card as f64;
            if total > 0.0 {
                row.iter().map(|n| (n + pseudocount) / total).collect()
            } else {
                vec![1.0 / card as f64; card]
            }
        })
        .collect();
    Ok(CategoricalCpt { child: child.to_string(), parents: parents.iter().map(|p| p.to_string()).collect(), table })
}

struct NoisyOrObjective {
    /// Active cause indices (1-based; 0 is the leak) and the child value.
    rows: Vec<(Vec<usize>, bool)>,
    k: usize,
}

impl Objective for NoisyOrObjective {
    fn n_params(&self) -> usize {
        self.k + 1
    }

    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn row(&self, params: &[f64], i: usize, grad: &mut [f64]) -> f64 {
        let (active, y) = &self.rows[i];
        let leak = std::iter::once(&0usize);
        // log P(y = 0 | x) = sum over active mechanisms of log(1 - p_j)
        let mut log_off = 0.0;
        for &j in leak.clone().chain(active) {
            log_off += log_sigmoid(-params[j]);
        }
        if *y {
            let off = log_off.exp();
            let on = (1.0 - off).max(1e-300);
            let scale = off / on;
            for &j in leak.chain(active) {
                grad[j] -= scale * sigmoid(params[j]);
            }
            -on.ln()
        } else {
            for &j in leak.chain(active) {
                grad[j] += sigmoid(params[j]);
            }
            -log_off
        }
    }
}

/// `ln(sigmoid(x))` without overflow.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn fit_noisy_or(
    data: &Dataset,
    child: &str,
    causes: &[&str],
    config: &FitConfig,
) -> Result<Fit<NoisyOrCpd>, LearnError> {
    config.check()?;
    if data.records.is_empty() {
        return Err(LearnError::EmptyData);
    }
    let c = var_index(data, child)?;
    require_binary(data, c)?;
    let xs: Vec<usize> = causes.iter().map(|p| var_index(data, p)).collect::<Result<_, _>>()?;
    for &x in &xs {
        require_binary(data, x)?;
    }
    let rows = data
        .records
        .iter()
        .map(|r| {
            let active = xs.iter().enumerate().filter(|(_, &x)| r.values[x] == 1).map(|(j, _)| j + 1).collect();
            (active, r.values[c] == 1)
        })
        .collect();
    let obj = NoisyOrObjective { rows, k: xs.len() };
    let (params, loss_history) = train(&obj, config);
    let cpd = NoisyOrCpd {
        child: child.to_string(),
        leak: sigmoid(params[0]),
        causes: causes
            .iter()
            .zip(&params[1..])
            .map(|(v, &t)| NoisyOrCause { variable: v.to_string(), activation: sigmoid(t) })
            .collect(),
    };
    Ok(Fit { cpd, loss_history })
}

/// Indicator design: one column per non-reference state of every input.
struct Design {
    /// `(input, state)` per column.
    columns: Vec<(usize, u32)>,
    /// Active column indices per row.
    active: Vec<Vec<usize>>,
}

impl Design {
    fn new(data: &Dataset, inputs: &[usize], rows: &[usize]) -> Self {
        let mut columns = Vec::new();
        for &v in inputs {
            for s in 1..data.variables[v].states.len() as u32 {
                columns.push((v, s));
            }
        }
        let active = rows
            .iter()
            .map(|&i| {
                let r = &data.records[i];
                columns.iter().enumerate().filter(|(_, (v, s))| r.values[*v] == *s).map(|(j, _)| j).collect()
            })
            .collect();
        Design { columns, active }
    }

    fn eta(&self, params: &[f64], i: usize) -> f64 {
        params[0] + self.active[i].iter().map(|&j| params[j + 1]).sum::<f64>()
    }

    fn form(&self, data: &Dataset, inputs: &[usize], params: &[f64]) -> LinearForm {
        let inputs = inputs
            .iter()
            .map(|&v| LinearTerm {
                variable: data.variables[v].name.clone(),
                weights: self
                    .columns
                    .iter()
                    .zip(&params[1..])
                    .filter(|((cv, _), _)| *cv == v)
                    .map(|((_, s), &w)| (data.variables[v].states[*s as usize].clone(), w))
                    .collect(),
            })
            .collect();
        LinearForm { bias: params[0], inputs }
    }
}

struct LogisticObjective {
    design: Design,
    y: Vec<bool>,
}

impl Objective for LogisticObjective {
    fn n_params(&self) -> usize {
        self.design.columns.len() + 1
    }

    fn n_rows(&self) -> usize {
        self.y.len()
    }

    fn row(&self, params: &[f64], i: usize, grad: &mut [f64]) -> f64 {
        let eta = self.design.eta(params, i);
        let y = if self.y[i] { 1.0 } else { 0.0 };
        let residual = sigmoid(eta) - y;
        grad[0] += residual;
        for &j in &self.design.active[i] {
            grad[j + 1] += residual;
        }
        if self.y[i] {
            -log_sigmoid(eta)
        } else {
            -log_sigmoid(-eta)
        }
    }
}

pub fn fit_logistic(
    data: &Dataset,
    child: &str,
    inputs: &[&str],
    config: &FitConfig,
) -> Result<Fit<LogisticCpd>, LearnError> {
    config.check()?;
    if data.records.is_empty() {
        return Err(LearnError::EmptyData);
    }
    let c = var_index(data, child)?;
    require_binary(data, c)?;
    let xs: Vec<usize> = inputs.iter().map(|p| var_index(data, p)).collect::<Result<_, _>>()?;
    for &x in &xs {
        check_states(data, x)?;
    }
    let rows: Vec<usize> = (0..data.records.len()).collect();
    let obj = LogisticObjective {
        design: Design::new(data, &xs, &rows),
        y: data.records.iter().map(|r| r.values[c] == 1).collect(),
    };
    let (params, loss_history) = train(&obj, config);
    Ok(Fit { cpd: LogisticCpd { child: child.to_string(), form: obj.design.form(data, &xs, &params) }, loss_history })
}

struct PoissonObjective {
    design: Design,
    y: Vec<f64>,
}

impl Objective for PoissonObjective {
    fn n_params(&self) -> usize {
        self.design.columns.len() + 1
    }

    fn n_rows(&self) -> usize {
        self.y.len()
    }

    // Drops the constant ln(y!) term.
    fn row(&self, params: &[f64], i: usize, grad: &mut [f64]) -> f64 {
        let eta = self.design.eta(params, i);
        let lambda = eta.exp();
        let residual = lambda - self.y[i];
        grad[0] += residual;
        for &j in &self.design.active[i] {
            grad[j + 1] += residual;
        }
        lambda - self.y[i] * eta
    }
}

/// Fits one Poisson regression per state of `switch` on the rows with that
/// state. The loss history is the concatenation of the branch histories.
pub fn fit_poisson_pair(
    data: &Dataset,
    child: &str,
    switch: &str,
    inputs: &[&str],
    config: &FitConfig,
) -> Result<Fit<PoissonPairCpd>, LearnError> {
    config.check()?;
    if data.records.is_empty() {
        return Err(LearnError::EmptyData);
    }
    let c = var_index(data, child)?;
    let sw = var_index(data, switch)?;
    check_states(data, sw)?;
    let xs: Vec<usize> = inputs.iter().map(|p| var_index(data, p)).collect::<Result<_, _>>()?;
    for &x in &xs {
        check_states(data, x)?;
    }
    let mut branches = std::collections::BTreeMap::new();
    let mut loss_history = Vec::new();
    for (s, label) in data.variables[sw].states.iter().enumerate() {
        let rows: Vec<usize> = (0..data.records.len()).filter(|&i| data.records[i].values[sw] == s as u32).collect();
        if rows.is_empty() {
            return Err(LearnError::EmptyBranch { child: child.to_string(), branch: label.clone() });
        }
        let obj = PoissonObjective {
            design: Design::new(data, &xs, &rows),
            y: rows.iter().map(|&i| data.records[i].values[c] as f64).collect(),
        };
        let branch_config = FitConfig { seed: config.seed.wrapping_add(s as u64), ..*config };
        let (params, history) = train(&obj, &branch_config);
        loss_history.extend(history);
        branches.insert(label.clone(), obj.design.form(data, &xs, &params));
    }
    Ok(Fit { cpd: PoissonPairCpd { child: child.to_string(), switch: switch.to_string(), branches }, loss_history })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub pseudocount: f64,
    pub noisy_or: FitConfig,
    pub regression: FitConfig,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig { pseudocount: 1.0, noisy_or: FitConfig::noisy_or(), regression: FitConfig::regression(), seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariableReport {
    pub variable: String,
    pub family: Family,
    /// Total log-likelihood of the training data under the learned CPD.
    pub log_likelihood: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug)]
pub struct LearnedNetwork {
    pub spec: NetworkSpec,
    pub reports: Vec<VariableReport>,
}

/// Fits every CPD of `structure` from `data`; the parameters in `structure`
/// are ignored. Variables are fitted independently.
pub fn learn_network(
    data: &Dataset,
    structure: &NetworkSpec,
    config: &LearnConfig,
) -> Result<LearnedNetwork, LearnError> {
    learn_network_with(data, structure, config, Execution::default())
}

pub fn learn_network_with(
    data: &Dataset,
    structure: &NetworkSpec,
    config: &LearnConfig,
    exec: Execution,
) -> Result<LearnedNetwork, LearnError> {
    if data.records.is_empty() {
        return Err(LearnError::EmptyData);
    }
    let violations = structure.validate();
    if !violations.is_empty() {
        return Err(NetworkError::Invalid(violations).into());
    }
    for v in &structure.variables {
        let Some(i) = data.index_of(&v.name) else {
            return Err(LearnError::UnknownVariable(v.name.clone()));
        };
        if data.variables[i].states != v.states
            && !structure.cpd(&v.name).is_some_and(|c| matches!(c, Cpd::PoissonPair(_)))
        {
            return Err(LearnError::Config(format!("states of `{}` differ between data and structure", v.name)));
        }
    }
    let results = exec.map(structure.variables.len(), |i| {
        let name = &structure.variables[i].name;
        let cpd = structure.cpd(name).expect("validated");
        let seed = config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
        (name.clone(), fit_one(data, cpd, config, seed))
    });
    let mut cpds = Vec::new();
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for (name, r) in results {
        match r {
            Ok((cpd, note)) => {
                cpds.push(cpd);
                notes.push(note);
            }
            Err(e) => failures.push((name, e)),
        }
    }
    if !failures.is_empty() {
        return Err(LearnError::Aggregate(failures));
    }
    let spec = NetworkSpec { variables: structure.variables.clone(), cpds };
    let net = Network::new(spec.clone())?;
    let order: Vec<usize> = spec.variables.iter().map(|v| data.index_of(&v.name).expect("checked")).collect();
    let reports = (0..net.len())
        .map(|v| {
            let ll = data
                .records
                .iter()
                .map(|r| {
                    let values: Vec<u32> = order.iter().map(|&j| r.values[j]).collect();
                    net.prob(v, values[v], &values).ln()
                })
                .sum();
            VariableReport {
                variable: net.variable(v).name.clone(),
                family: net.family(v),
                log_likelihood: ll,
                note: notes[v].clone(),
            }
        })
        .collect();
    Ok(LearnedNetwork { spec, reports })
}

fn fit_one(data: &Dataset, cpd: &Cpd, config: &LearnConfig, seed: u64) -> Result<(Cpd, Option<String>), LearnError> {
    let child = cpd.child();
    Ok(match cpd {
        Cpd::Cpt(c) => {
            let parents: Vec<&str> = c.parents.iter().map(String::as_str).collect();
            (Cpd::Cpt(fit_cpt(data, child, &parents, config.pseudocount)?), None)
        }
        Cpd::NoisyOr(c) => {
            let causes: Vec<&str> = c.causes.iter().map(|c| c.variable.as_str()).collect();
            (Cpd::NoisyOr(fit_noisy_or(data, child, &causes, &config.noisy_or.with_seed(seed))?.cpd), None)
        }
        Cpd::Logistic(c) => {
            let inputs: Vec<&str> = c.form.inputs.iter().map(|t| t.variable.as_str()).collect();
            (Cpd::Logistic(fit_logistic(data, child, &inputs, &config.regression.with_seed(seed))?.cpd), None)
        }
        Cpd::PoissonPair(c) => {
            let mut inputs: Vec<&str> = Vec::new();
            for form in c.branches.values() {
                for t in &form.inputs {
                    if !inputs.contains(&t.variable.as_str()) {
                        inputs.push(&t.variable);
                    }
                }
            }
            let fc = config.regression.with_seed(seed);
            match fit_poisson_pair(data, child, &c.switch, &inputs, &fc) {
                Ok(fit) => (Cpd::PoissonPair(fit.cpd), None),
                Err(LearnError::EmptyBranch { branch, .. }) => {
                    // Too little data to separate the branches: fit one pooled
                    // regression and use it for both.
                    let pooled = pooled_poisson(data, child, &inputs, &fc)?;
                    let branches = c.branches.keys().map(|k| (k.clone(), pooled.clone())).collect();
                    let note = format!("branch `{branch}` had no rows; both branches share a pooled fit");
                    (
                        Cpd::PoissonPair(PoissonPairCpd { child: child.into(), switch: c.switch.clone(), branches }),
                        Some(note),
                    )
                }
                Err(e) => return Err(e),
            }
        }
    })
}

fn pooled_poisson(data: &Dataset, child: &str, inputs: &[&str], config: &FitConfig) -> Result<LinearForm, LearnError> {
    let c = var_index(data, child)?;
    let xs: Vec<usize> = inputs.iter().map(|p| var_index(data, p)).collect::<Result<_, _>>()?;
    let rows: Vec<usize> = (0..data.records.len()).collect();
    let obj = PoissonObjective {
        design: Design::new(data, &xs, &rows),
        y: data.records.iter().map(|r| r.values[c] as f64).collect(),
    };
    let (params, _) = train(&obj, config);
    Ok(obj.design.form(data, &xs, &params))
}

/// Structure-only copy of a spec: same variables and families, parameters
/// reset to neutral values. Useful as a `learn` structure file.
pub fn structure_of(spec: &NetworkSpec) -> NetworkSpec {
    let cpds = spec
        .cpds
        .iter()
        .map(|cpd| match cpd {
            Cpd::Cpt(c) => {
                let card = spec.variable(&c.child).map_or(2, |v| v.states.len());
                Cpd::Cpt(CategoricalCpt {
                    child: c.child.clone(),
                    parents: c.parents.clone(),
                    table: c.table.iter().map(|_| vec![1.0 / card as f64; card]).collect(),
                })
            }
            Cpd::NoisyOr(c) => Cpd::NoisyOr(NoisyOrCpd {
                child: c.child.clone(),
                leak: 0.5,
                causes: c
                    .causes
                    .iter()
                    .map(|x| NoisyOrCause { variable: x.variable.clone(), activation: 0.5 })
                    .collect(),
            }),
            Cpd::Logistic(c) => Cpd::Logistic(LogisticCpd { child: c.child.clone(), form: zero_form(&c.form) }),
            Cpd::PoissonPair(c) => Cpd::PoissonPair(PoissonPairCpd {
                child: c.child.clone(),
                switch: c.switch.clone(),
                branches: c.branches.iter().map(|(k, f)| (k.clone(), zero_form(f))).collect(),
            }),
        })
        .collect();
    NetworkSpec { variables: spec.variables.clone(), cpds }
}

fn zero_form(form: &LinearForm) -> LinearForm {
    LinearForm {
        bias: 0.0,
        inputs: form
            .inputs
            .iter()
            .map(|t| LinearTerm {
                variable: t.variable.clone(),
                weights: t.weights.keys().map(|k| (k.clone(), 0.0)).collect(),
            })
            .collect(),
    }
}

/// Count variable definition with buckets up to `cap`.
pub fn count_variable(name: &str, kind: crate::network::VariableKind, cap: u32) -> VariableDef {
    VariableDef { name: name.to_string(), kind, states: count_states(cap), recorded: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::VariableKind;
    use crate::sampler::PatientRecord;

    fn binary_data(rows: &[(u32, u32)]) -> Dataset {
        Dataset {
            variables: vec![
                VariableDef::new("x", VariableKind::Underlying, &["no", "yes"]),
                VariableDef::new("y", VariableKind::Symptom, &["no", "yes"]),
            ],
            records: rows
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| PatientRecord { id: i as u64, values: vec![x, y] })
                .collect(),
        }
    }

    #[test]
    fn add_one_smoothing() {
        let data = binary_data(&vec![(1, 0); 100]);
        let cpt = fit_cpt(&data, "x", &[], 1.0).unwrap();
        assert!((cpt.table[0][1] - 101.0 / 102.0).abs() < 1e-15);
    }

    #[test]
    fn unsmoothed_frequencies() {
        let mut rows = vec![(1, 0); 60];
        rows.extend(vec![(0, 0); 40]);
        let cpt = fit_cpt(&binary_data(&rows), "x", &[], 0.0).unwrap();
        assert_eq!(cpt.table[0], vec![0.4, 0.6]);
    }

    #[test]
    fn conditional_counts() {
        let rows = [(0, 0), (0, 0), (0, 1), (1, 1), (1, 1), (1, 0), (1, 1)];
        let cpt = fit_cpt(&binary_data(&rows), "y", &["x"], 0.0).unwrap();
        assert_eq!(cpt.table, vec![vec![2.0 / 3.0, 1.0 / 3.0], vec![0.25, 0.75]]);
    }

    #[test]
    fn unknown_state_in_data() {
        let data = binary_data(&[(0, 2)]);
        assert!(matches!(fit_cpt(&data, "y", &["x"], 1.0), Err(LearnError::UnknownState { .. })));
    }

    #[test]
    fn empty_data_rejected() {
        assert!(matches!(fit_cpt(&binary_data(&[]), "x", &[], 1.0), Err(LearnError::EmptyData)));
    }

    #[test]
    fn bad_config_rejected() {
        let data = binary_data(&[(0, 0)]);
        let cfg = FitConfig { epochs: 0, ..FitConfig::noisy_or() };
        assert!(matches!(fit_noisy_or(&data, "y", &["x"], &cfg), Err(LearnError::Config(_))));
        let cfg = FitConfig { learning_rate: 0.0, ..FitConfig::noisy_or() };
        assert!(matches!(fit_logistic(&data, "y", &["x"], &cfg), Err(LearnError::Config(_))));
    }

    /// Finite-difference check of the analytic Noisy-OR gradient.
    #[test]
    fn noisy_or_gradient_matches_finite_differences() {
        let obj = NoisyOrObjective { rows: vec![(vec![1, 2], true), (vec![2], false), (vec![], true)], k: 2 };
        let params = [0.3, -0.7, 1.1];
        for i in 0..obj.rows.len() {
            let mut g = vec![0.0; 3];
            obj.row(&params, i, &mut g);
            for j in 0..3 {
                let h = 1e-6;
                let mut up = params;
                let mut dn = params;
                up[j] += h;
                dn[j] -= h;
                let mut s = vec![0.0; 3];
                let fd = (obj.row(&up, i, &mut s) - obj.row(&dn, i, &mut s)) / (2.0 * h);
                assert!((fd - g[j]).abs() < 1e-6, "row {i} param {j}: {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn constant_child_drives_activations_down() {
        let rows: Vec<(u32, u32)> = (0..2000).map(|i| ((i % 3 == 0) as u32, 0)).collect();
        let cfg = FitConfig { epochs: 600, batch_size: 2000, ..FitConfig::noisy_or() };
        let fit = fit_noisy_or(&binary_data(&rows), "y", &["x"], &cfg).unwrap();
        // The likelihood keeps rising as both probabilities approach zero.
        assert!(fit.cpd.leak < 0.1, "{}", fit.cpd.leak);
        assert!(fit.cpd.causes[0].activation < 0.1, "{}", fit.cpd.causes[0].activation);
        assert!(fit.loss_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn first_logistic_step_moves_bias_toward_log_odds() {
        // 80% positives: log-odds > 0, so the bias must rise from zero.
        let rows: Vec<(u32, u32)> = (0..100).map(|i| (0, (i % 5 != 0) as u32)).collect();
        let cfg = FitConfig { epochs: 1, batch_size: 100, init_range: 0.0, ..FitConfig::regression() };
        let fit = fit_logistic(&binary_data(&rows), "y", &["x"], &cfg).unwrap();
        assert!(fit.cpd.form.bias > 0.0);
        let rows: Vec<(u32, u32)> = (0..100).map(|i| (0, (i % 5 == 0) as u32)).collect();
        let fit = fit_logistic(&binary_data(&rows), "y", &["x"], &cfg).unwrap();
        assert!(fit.cpd.form.bias < 0.0);
    }

    #[test]
    fn constant_covariate_poisson_bias_is_log_mean() {
        let counts = [0u32, 1, 2, 3, 4, 2, 1, 3];
        let data = Dataset {
            variables: vec![
                VariableDef::new("sw", VariableKind::Treatment, &["no", "yes"]),
                VariableDef::new("x", VariableKind::Symptom, &["no", "yes"]),
                count_variable("days", VariableKind::Outcome, 15),
            ],
            records: (0..4000)
                .map(|i| PatientRecord { id: i, values: vec![(i % 2) as u32, 0, counts[(i / 2) as usize % 8]] })
                .collect(),
        };
        // Full-batch steps, so the optimum is reached without minibatch jitter.
        let cfg = FitConfig { epochs: 400, batch_size: 2000, ..FitConfig::regression() };
        let fit = fit_poisson_pair(&data, "days", "sw", &["x"], &cfg).unwrap();
        let mean = counts.iter().sum::<u32>() as f64 / counts.len() as f64;
        for form in fit.cpd.branches.values() {
            assert!((form.bias - mean.ln()).abs() < 0.01, "{} vs {}", form.bias, mean.ln());
        }
    }

    #[test]
    fn empty_branch_is_named() {
        let data = Dataset {
            variables: vec![
                VariableDef::new("sw", VariableKind::Treatment, &["no", "yes"]),
                count_variable("days", VariableKind::Outcome, 15),
            ],
            records: (0..10).map(|i| PatientRecord { id: i, values: vec![0, 1] }).collect(),
        };
        match fit_poisson_pair(&data, "days", "sw", &[], &FitConfig::regression()) {
            Err(LearnError::EmptyBranch { branch, .. }) => assert_eq!(branch, "yes"),
            other => panic!("{other:?}"),
        }
    }
}
