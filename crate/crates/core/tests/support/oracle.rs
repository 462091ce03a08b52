//! Brute-force reference: the full joint table of a network, built straight
//! from the JSON definition with its own CPD formulas. Shares no evaluation
//! code with the library.

#![allow(dead_code)]

use synsum_core::network::{Cpd, LinearForm, NetworkSpec};

pub struct Joint {
    pub names: Vec<String>,
    pub cards: Vec<usize>,
    pub probs: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn linear(form: &LinearForm, label: &dyn Fn(&str) -> String) -> f64 {
    form.bias + form.inputs.iter().map(|t| t.weights.get(&label(&t.variable)).copied().unwrap_or(0.0)).sum::<f64>()
}

/// Local distribution of variable `v` for the given labelled parent values.
fn local(spec: &NetworkSpec, v: usize, label: &dyn Fn(&str) -> String) -> Vec<f64> {
    let def = &spec.variables[v];
    let cpd = spec.cpds.iter().find(|c| c.child() == def.name).unwrap();
    match cpd {
        Cpd::Cpt(t) => {
            let mut row = 0;
            for p in &t.parents {
                let pdef = spec.variables.iter().find(|d| &d.name == p).unwrap();
                row = row * pdef.states.len() + pdef.states.iter().position(|s| *s == label(p)).unwrap();
            }
            t.table[row].clone()
        }
        Cpd::NoisyOr(n) => {
            let mut off = 1.0 - n.leak;
            for c in &n.causes {
                if label(&c.variable) == "yes" {
                    off *= 1.0 - c.activation;
                }
            }
            vec![off, 1.0 - off]
        }
        Cpd::Logistic(l) => {
            let p = sigmoid(linear(&l.form, label));
            vec![1.0 - p, p]
        }
        Cpd::PoissonPair(pp) => {
            let lambda = linear(&pp.branches[&label(&pp.switch)], label).exp();
            let cap = def.states.len() - 2;
            let mut out: Vec<f64> = (0..=cap).map(|k| (-lambda).exp() * lambda.powi(k as i32) / factorial(k)).collect();
            out.push(1.0 - out.iter().sum::<f64>());
            out
        }
    }
}

fn referenced(cpd: &Cpd) -> Vec<String> {
    let mut out: Vec<String> = match cpd {
        Cpd::Cpt(t) => t.parents.clone(),
        Cpd::NoisyOr(n) => n.causes.iter().map(|c| c.variable.clone()).collect(),
        Cpd::Logistic(l) => l.form.inputs.iter().map(|t| t.variable.clone()).collect(),
        Cpd::PoissonPair(p) => {
            let mut v = vec![p.switch.clone()];
            for f in p.branches.values() {
                v.extend(f.inputs.iter().map(|t| t.variable.clone()));
            }
            v
        }
    };
    let mut seen = Vec::new();
    out.retain(|x| {
        let fresh = !seen.contains(x);
        seen.push(x.clone());
        fresh
    });
    out
}

/// Local table of `v`: parent indices and one distribution per parent
/// configuration (last parent fastest).
fn local_table(spec: &NetworkSpec, v: usize) -> (Vec<usize>, Vec<Vec<f64>>) {
    let cpd = spec.cpds.iter().find(|c| c.child() == spec.variables[v].name).unwrap();
    let parents: Vec<usize> =
        referenced(cpd).iter().map(|n| spec.variables.iter().position(|d| &d.name == n).unwrap()).collect();
    let cards: Vec<usize> = parents.iter().map(|&p| spec.variables[p].states.len()).collect();
    let rows: usize = cards.iter().product();
    let mut table = Vec::with_capacity(rows);
    let mut cfg = vec![0usize; parents.len()];
    for _ in 0..rows {
        let label = |name: &str| {
            let k = parents.iter().position(|&p| spec.variables[p].name == name).unwrap();
            spec.variables[parents[k]].states[cfg[k]].clone()
        };
        table.push(local(spec, v, &label));
        for i in (0..cfg.len()).rev() {
            cfg[i] += 1;
            if cfg[i] < cards[i] {
                break;
            }
            cfg[i] = 0;
        }
    }
    (parents, table)
}

impl Joint {
    pub fn new(spec: &NetworkSpec) -> Joint {
        let names: Vec<String> = spec.variables.iter().map(|v| v.name.clone()).collect();
        let cards: Vec<usize> = spec.variables.iter().map(|v| v.states.len()).collect();
        let tables: Vec<(Vec<usize>, Vec<Vec<f64>>)> = (0..cards.len()).map(|v| local_table(spec, v)).collect();
        let total: usize = cards.iter().product();
        let mut probs = Vec::with_capacity(total);
        let mut states = vec![0usize; cards.len()];
        for _ in 0..total {
            let mut p = 1.0;
            for (v, (parents, table)) in tables.iter().enumerate() {
                let row = parents.iter().fold(0, |acc, &q| acc * cards[q] + states[q]);
                p *= table[row][states[v]];
            }
            probs.push(p);
            for i in (0..cards.len()).rev() {
                states[i] += 1;
                if states[i] < cards[i] {
                    break;
                }
                states[i] = 0;
            }
        }
        Joint { names, cards, probs }
    }

    pub fn index(&self, name: &str) -> usize {
        self.names.iter().position(|n| n == name).unwrap()
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.cards.len()];
        for i in (0..self.cards.len() - 1).rev() {
            s[i] = s[i + 1] * self.cards[i + 1];
        }
        s
    }

    /// Unnormalized `P(query, evidence)` per query state.
    pub fn joint_with(&self, query: usize, evidence: &[(usize, usize)]) -> Vec<f64> {
        let strides = self.strides();
        let mut out = vec![0.0; self.cards[query]];
        'outer: for (i, &p) in self.probs.iter().enumerate() {
            for &(v, s) in evidence {
                if (i / strides[v]) % self.cards[v] != s {
                    continue 'outer;
                }
            }
            out[(i / strides[query]) % self.cards[query]] += p;
        }
        out
    }

    pub fn posterior(&self, query: usize, evidence: &[(usize, usize)]) -> Vec<f64> {
        let j = self.joint_with(query, evidence);
        let z: f64 = j.iter().sum();
        j.iter().map(|x| x / z).collect()
    }

    /// Probability that every listed variable takes its listed state.
    pub fn prob_of(&self, fixed: &[(usize, usize)]) -> f64 {
        let (first, rest) = fixed.split_first().unwrap();
        self.joint_with(first.0, rest)[first.1]
    }
}
