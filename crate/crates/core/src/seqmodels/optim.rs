//! First-order adaptive-moment optimizer (Adam) with named-parameter state.

use std::collections::HashMap;

use ndarray::Array2;

use super::params::ParamSet;

pub struct Adam {
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: HashMap<String, Array2<f64>>,
    v: HashMap<String, Array2<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: HashMap::new(),
            v: HashMap::new(),
        }
    }

    /// One update over every parameter; missing gradients count as zero.
    /// Iteration follows the ParamSet's insertion order, so updates are
    /// deterministic.
    pub fn step(&mut self, params: &mut ParamSet, grads: &HashMap<String, Array2<f64>>) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for (name, value) in params.iter_mut() {
            let zero = Array2::zeros(value.dim());
            let g = grads.get(name).unwrap_or(&zero);
            let m = self
                .m
                .entry(name.to_string())
                .or_insert_with(|| Array2::zeros(value.dim()));
            let v = self
                .v
                .entry(name.to_string())
                .or_insert_with(|| Array2::zeros(value.dim()));
            *m *= self.beta1;
            *m += &(g * (1.0 - self.beta1));
            *v *= self.beta2;
            *v += &(g.mapv(|x| x * x) * (1.0 - self.beta2));
            let m_hat = &*m / b1t;
            let v_hat = &*v / b2t;
            let update = m_hat / (v_hat.mapv(f64::sqrt) + self.eps);
            *value -= &(update * self.learning_rate);
        }
    }
}

/// Accumulates gradients across a batch of tapes, keyed by parameter name.
#[derive(Default)]
pub struct GradAccumulator {
    grads: HashMap<String, Array2<f64>>,
}

impl GradAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, grad: &Array2<f64>) {
        match self.grads.get_mut(name) {
            Some(g) => *g += grad,
            None => {
                self.grads.insert(name.to_string(), grad.clone());
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.values_mut() {
            *g *= factor;
        }
    }

    pub fn into_map(self) -> HashMap<String, Array2<f64>> {
        self.grads
    }

    pub fn map(&self) -> &HashMap<String, Array2<f64>> {
        &self.grads
    }
}
