//! Named parameter store shared by models, optimizer and checkpoints.

use std::collections::HashMap;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tape::{Tape, Var};

/// Ordered collection of named parameter matrices. Order is insertion
/// order and is part of the checkpoint format.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    entries: Vec<(String, Array2<f64>)>,
    by_name: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Array2<f64>) {
        assert!(
            self.by_name.insert(name.to_string(), self.entries.len()).is_none(),
            "duplicate parameter name {name}"
        );
        self.entries.push((name.to_string(), value));
    }

    pub fn get(&self, name: &str) -> &Array2<f64> {
        let idx = self.by_name[name];
        &self.entries[idx].1
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Array2<f64> {
        let idx = self.by_name[name];
        &mut self.entries[idx].1
    }

    pub fn contains(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Array2<f64>)> {
        self.entries.iter_mut().map(|(n, v)| (n.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.entries.iter().map(|(_, v)| v.len()).sum()
    }

    pub fn into_entries(self) -> Vec<(String, Array2<f64>)> {
        self.entries
    }

    pub fn from_entries(entries: Vec<(String, Array2<f64>)>) -> Self {
        let mut set = Self::new();
        for (name, value) in entries {
            set.insert(&name, value);
        }
        set
    }

    /// Truncates every value to f32 and widens back; this is the canonical
    /// form parameters take at every checkpoint boundary, so a later
    /// save/load round trip is bit-exact.
    pub fn quantized_f32(&self) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|(n, v)| (n.clone(), v.mapv(|x| f64::from(x as f32))))
            .collect();
        Self::from_entries(entries)
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|(_, v)| v.iter().all(|x| x.is_finite()))
    }
}

/// Xavier-uniform init: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
pub fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-a..a))
}

/// Parameter leaves bound into a tape, addressable by name.
pub struct Bindings {
    vars: HashMap<String, Var>,
}

impl Bindings {
    /// Inserts every parameter into the tape as a trainable leaf.
    pub fn bind(tape: &mut Tape, params: &ParamSet) -> Self {
        let mut vars = HashMap::with_capacity(params.len());
        for (name, value) in params.iter() {
            vars.insert(name.to_string(), tape.param(value.clone()));
        }
        Self { vars }
    }

    /// Binds two parameter sets with distinct name prefixes (for jointly
    /// trained model pairs).
    pub fn bind_prefixed(tape: &mut Tape, sets: &[(&str, &ParamSet)]) -> Self {
        let mut vars = HashMap::new();
        for (prefix, params) in sets {
            for (name, value) in params.iter() {
                vars.insert(format!("{prefix}{name}"), tape.param(value.clone()));
            }
        }
        Self { vars }
    }

    /// Binds parameters as constants: gradients flow through them into
    /// earlier nodes but are not accumulated for the parameters themselves
    /// (frozen discriminators during generator updates).
    pub fn bind_frozen_prefixed(&mut self, tape: &mut Tape, sets: &[(&str, &ParamSet)]) {
        for (prefix, params) in sets {
            for (name, value) in params.iter() {
                self.vars.insert(format!("{prefix}{name}"), tape.constant(value.clone()));
            }
        }
    }

    /// Frozen standalone binding (inference-style forward on a tape).
    pub fn bind_frozen(tape: &mut Tape, params: &ParamSet) -> Self {
        let mut binds = Self { vars: HashMap::new() };
        binds.bind_frozen_prefixed(tape, &[("", params)]);
        binds
    }

    pub fn var(&self, name: &str) -> Var {
        *self
            .vars
            .get(name)
            .unwrap_or_else(|| panic!("unbound parameter {name}"))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(String::as_str)
    }
}
