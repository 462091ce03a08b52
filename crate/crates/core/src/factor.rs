//! Nonnegative tables over a set of discrete variables.

use crate::network::Network;

/// Table over `scope`, stored row-major with the last variable varying
/// fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    scope: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(scope.len(), cards.len());
        assert_eq!(values.len(), cards.iter().product::<usize>(), "value count must match scope");
        Factor { scope, cards, values }
    }

    pub fn scalar(value: f64) -> Self {
        Factor { scope: vec![], cards: vec![], values: vec![value] }
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn contains(&self, var: usize) -> bool {
        self.scope.contains(&var)
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![0; self.scope.len()];
        let mut s = 1;
        for i in (0..self.scope.len()).rev() {
            strides[i] = s;
            s *= self.cards[i];
        }
        strides
    }

    /// Value at a full assignment of the scope (states in scope order).
    pub fn get(&self, states: &[usize]) -> f64 {
        let idx: usize = states.iter().zip(self.strides()).map(|(s, st)| s * st).sum();
        self.values[idx]
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.scope.iter().zip(&other.cards) {
            if !scope.contains(v) {
                scope.push(*v);
                cards.push(*c);
            }
        }
        let stride_in = |f: &Factor| -> Vec<usize> {
            let st = f.strides();
            scope.iter().map(|v| f.scope.iter().position(|x| x == v).map_or(0, |i| st[i])).collect()
        };
        let sa = stride_in(self);
        let sb = stride_in(other);
        let total: usize = cards.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut counter = vec![0usize; scope.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..total {
            values.push(self.values[ia] * other.values[ib]);
            for d in (0..scope.len()).rev() {
                counter[d] += 1;
                ia += sa[d];
                ib += sb[d];
                if counter[d] < cards[d] {
                    break;
                }
                ia -= sa[d] * cards[d];
                ib -= sb[d] * cards[d];
                counter[d] = 0;
            }
        }
        Factor { scope, cards, values }
    }

    /// Sums `var` out of the factor; returns a clone when `var` is absent.
    pub fn sum_out(&self, var: usize) -> Factor {
        let Some(pos) = self.scope.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let card = self.cards[pos];
        let inner: usize = self.cards[pos + 1..].iter().product();
        let outer: usize = self.cards[..pos].iter().product();
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..card {
                let base = (o * card + s) * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(pos);
        cards.remove(pos);
        Factor { scope, cards, values }
    }

    /// Restricts `var` to `state` and drops it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Factor {
        let Some(pos) = self.scope.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let card = self.cards[pos];
        assert!(state < card, "state {state} out of range for variable {var}");
        let inner: usize = self.cards[pos + 1..].iter().product();
        let outer: usize = self.cards[..pos].iter().product();
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * card + state) * inner;
            values.extend_from_slice(&self.values[base..base + inner]);
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(pos);
        cards.remove(pos);
        Factor { scope, cards, values }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Reorders the scope; `order` must be a permutation of the scope.
    pub fn permuted(&self, order: &[usize]) -> Factor {
        assert_eq!(order.len(), self.scope.len());
        let st = self.strides();
        let src: Vec<usize> =
            order.iter().map(|v| self.scope.iter().position(|x| x == v).expect("variable in scope")).collect();
        let cards: Vec<usize> = src.iter().map(|&i| self.cards[i]).collect();
        let total = self.values.len();
        let mut values = Vec::with_capacity(total);
        let mut counter = vec![0usize; order.len()];
        for _ in 0..total {
            let idx: usize = counter.iter().zip(&src).map(|(c, &i)| c * st[i]).sum();
            values.push(self.values[idx]);
            for d in (0..order.len()).rev() {
                counter[d] += 1;
                if counter[d] < cards[d] {
                    break;
                }
                counter[d] = 0;
            }
        }
        Factor { scope: order.to_vec(), cards, values }
    }
}

/// The conditional distribution of `var` as a factor over its parents
/// followed by the variable itself. The count variable is compiled onto its
/// buckets, with the tail bucket holding the remaining probability mass.
pub fn compile_factor(net: &Network, var: usize) -> Factor {
    let mut scope: Vec<usize> = net.parents(var).to_vec();
    scope.push(var);
    let cards: Vec<usize> = scope.iter().map(|&v| net.cardinality(v)).collect();
    let total: usize = cards.iter().product();
    let mut values = Vec::with_capacity(total);
    let mut full = vec![0u32; net.len()];
    let mut counter = vec![0usize; scope.len()];
    let count = net.is_count(var);
    for _ in 0..total {
        for (v, c) in scope.iter().zip(&counter) {
            full[*v] = *c as u32;
        }
        let state = full[var];
        values.push(if count { net.bucket_prob(var, state, &full) } else { net.prob(var, state, &full) });
        for d in (0..scope.len()).rev() {
            counter[d] += 1;
            if counter[d] < cards[d] {
                break;
            }
            counter[d] = 0;
        }
    }
    Factor { scope, cards, values }
}
