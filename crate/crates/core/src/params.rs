use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::collections::HashMap;

/// Index of a parameter inside a [`ParamSet`]. Stable for the lifetime of
/// the set; gradients and optimizer state are keyed by it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Named, ordered collection of trainable tensors.
///
/// Registration order is the canonical order used for gradient maps,
/// optimizer moments, checkpoints, and index-ordered reductions, so
/// training stays deterministic regardless of thread scheduling.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Tensor>,
    by_name: HashMap<String, ParamId>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter name {name:?}"
        );
        let id = ParamId(self.values.len());
        self.by_name.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|t| t.numel()).sum()
    }

    /// Replace every value with the same-named, same-shaped tensors of
    /// `other`. Used by checkpoint loading; any mismatch names the
    /// offending array.
    pub fn load_from(&mut self, arrays: &[(String, Tensor)]) -> Result<()> {
        if arrays.len() != self.values.len() {
            return Err(Error::checkpoint(format!(
                "expected {} arrays, file has {}",
                self.values.len(),
                arrays.len()
            )));
        }
        for (name, tensor) in arrays {
            let id = self.by_name.get(name).ok_or_else(|| {
                Error::checkpoint(format!("unknown array {name:?} in checkpoint"))
            })?;
            if self.values[id.0].shape() != tensor.shape() {
                return Err(Error::checkpoint(format!(
                    "array {name:?}: expected shape {:?}, file has {:?}",
                    self.values[id.0].shape(),
                    tensor.shape()
                )));
            }
            self.values[id.0] = tensor.clone();
        }
        Ok(())
    }
}

/// Gradient of a scalar loss with respect to every parameter of a
/// [`ParamSet`], aligned by index. Parameters that the loss does not
/// reach hold zero tensors.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Gradients {
            grads: params
                .values
                .iter()
                .map(|t| Tensor::zeros(t.shape().to_vec()))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.grads.iter()
    }

    /// In-place `self += other`, index-ordered.
    pub fn add_assign(&mut self, other: &Gradients) {
        assert_eq!(self.grads.len(), other.grads.len());
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            crate::tensor::axpy(a.data_mut(), 1.0, b.data());
        }
    }

    /// In-place scale of every gradient.
    pub fn scale(&mut self, s: f64) {
        for g in &mut self.grads {
            for x in g.data_mut() {
                *x *= s;
            }
        }
    }

    /// Euclidean norm over the concatenation of all gradients.
    pub fn global_norm(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.data())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.grads.iter().all(|g| g.all_finite())
    }

    /// Smallest nonzero |coordinate| across all gradients, or +inf when
    /// every coordinate is exactly zero. Finite-difference checks use
    /// this to reject instances whose tiny-but-nonzero coordinates would
    /// drown in roundoff noise.
    pub fn min_nonzero_abs(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.data())
            .map(|x| x.abs())
            .filter(|x| *x > 0.0)
            .fold(f64::INFINITY, f64::min)
    }
}
