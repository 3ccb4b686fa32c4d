use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A named block of trainable scalars with its gradient accumulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub values: Vec<f64>,
    #[serde(skip)]
    pub grads: Vec<f64>,
}

/// Ordered collection of parameter groups. The number of scalars is fixed at construction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    groups: Vec<ParamGroup>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a group and returns its index.
    pub fn add_group(&mut self, name: impl Into<String>, values: Vec<f64>) -> usize {
        let n = values.len();
        self.groups.push(ParamGroup {
            name: name.into(),
            values,
            grads: vec![0.0; n],
        });
        self.groups.len() - 1
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Option<&ParamGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.name == name)
    }

    pub fn values(&self, idx: usize) -> &[f64] {
        &self.groups[idx].values
    }

    pub fn values_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.groups[idx].values
    }

    pub fn grads(&self, idx: usize) -> &[f64] {
        &self.groups[idx].grads
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.values.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adds `grad` into group `idx`'s accumulator.
    pub fn accumulate(&mut self, idx: usize, grad: &[f64]) -> Result<()> {
        let g = &mut self.groups[idx];
        if grad.len() != g.values.len() {
            return invalid(format!(
                "gradient for `{}` has length {}, expected {}",
                g.name,
                grad.len(),
                g.values.len()
            ));
        }
        if g.grads.len() != g.values.len() {
            g.grads = vec![0.0; g.values.len()];
        }
        for (a, b) in g.grads.iter_mut().zip(grad) {
            *a += b;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.groups {
            g.grads.clear();
            g.grads.resize(g.values.len(), 0.0);
        }
    }

    /// Flattened view over all values, group order preserved.
    pub fn flat_values(&self) -> Vec<f64> {
        self.groups.iter().flat_map(|g| g.values.iter().copied()).collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.groups
            .iter()
            .flat_map(|g| {
                if g.grads.len() == g.values.len() {
                    g.grads.clone()
                } else {
                    vec![0.0; g.values.len()]
                }
            })
            .collect()
    }

    pub fn set_flat_values(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.len() {
            return invalid(format!(
                "flat parameter vector has length {}, expected {}",
                flat.len(),
                self.len()
            ));
        }
        let mut start = 0;
        for g in &mut self.groups {
            let n = g.values.len();
            g.values.copy_from_slice(&flat[start..start + n]);
            start += n;
        }
        Ok(())
    }
}
