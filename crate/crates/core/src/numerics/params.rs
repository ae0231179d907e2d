use std::collections::BTreeMap;

use indexmap::IndexMap;

use crate::error::{Error, Result};

use super::array::DenseArray;

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: DenseArray,
    pub grad: DenseArray,
}

/// Named parameters and their accumulated gradients, in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: IndexMap<String, Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: DenseArray) -> Result<ParamId> {
        if self.entries.contains_key(name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate parameter name {:?}",
                name
            )));
        }
        let grad = DenseArray::zeros(value.shape());
        let (idx, _) = self.entries.insert_full(name.to_string(), Param { value, grad });
        Ok(ParamId(idx))
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.entries
            .get_index_of(name)
            .map(ParamId)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter {:?}", name)))
    }

    /// Resolve `name` and check its shape.
    pub fn expect(&self, name: &str, shape: &[usize]) -> Result<ParamId> {
        let id = self.id(name)?;
        let got = self.value(id).shape();
        if got != shape {
            return Err(Error::Checkpoint(format!(
                "parameter {:?} has shape {:?}, expected {:?}",
                name, got, shape
            )));
        }
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        self.entries.get_index(id.0).expect("param id").0
    }

    pub fn value(&self, id: ParamId) -> &DenseArray {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut DenseArray {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &DenseArray {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut DenseArray {
        &mut self.entries[id.0].grad
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn num_values(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.entries.values_mut() {
            p.grad.fill(0.0);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.entries
            .values()
            .map(|p| p.grad.sum_squares())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale_grads(&mut self, s: f64) {
        for p in self.entries.values_mut() {
            p.grad.scale(s);
        }
    }

    /// Rescale gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale_grads(max_norm / norm);
        }
        norm
    }

    /// Add a worker-local gradient buffer into the stored gradients, scaled by `scale`.
    pub fn accumulate(&mut self, buf: &GradBuffer, scale: f64) {
        for (idx, slot) in buf.slots.iter().enumerate() {
            let grad = self.entries[idx].grad.values_mut();
            match slot {
                Slot::Empty => {}
                Slot::Dense(d) => {
                    for (g, v) in grad.iter_mut().zip(d) {
                        *g += scale * v;
                    }
                }
                Slot::Rows { cols, rows } => {
                    for (&r, v) in rows {
                        let dst = &mut grad[r * cols..(r + 1) * cols];
                        for (g, x) in dst.iter_mut().zip(v) {
                            *g += scale * x;
                        }
                    }
                }
            }
        }
    }

    /// Overwrite parameter values, keeping gradients; used when copying weights between models.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<usize> {
        let mut copied = 0;
        for (name, p) in self.entries.iter_mut() {
            if let Some(src) = other.entries.get(name) {
                if src.value.shape() != p.value.shape() {
                    return Err(Error::Checkpoint(format!(
                        "parameter {:?}: shape {:?} vs {:?}",
                        name,
                        src.value.shape(),
                        p.value.shape()
                    )));
                }
                p.value = src.value.clone();
                copied += 1;
            }
        }
        Ok(copied)
    }
}

#[derive(Debug, Clone)]
enum Slot {
    Empty,
    Dense(Vec<f64>),
    Rows {
        cols: usize,
        rows: BTreeMap<usize, Vec<f64>>,
    },
}

/// Gradient contributions from one worker, kept separate from the shared
/// store so concurrent sentences never write to the same buffer.
///
/// Embedding tables are accumulated row-sparse.
#[derive(Debug, Clone)]
pub struct GradBuffer {
    slots: Vec<Slot>,
    shapes: Vec<(usize, usize)>,
}

impl GradBuffer {
    pub fn for_store(store: &ParamStore) -> Self {
        GradBuffer {
            slots: vec![Slot::Empty; store.len()],
            shapes: store
                .entries
                .values()
                .map(|p| (p.value.rows(), p.value.cols().max(1)))
                .collect(),
        }
    }

    pub fn dense(&mut self, id: ParamId) -> &mut [f64] {
        let (r, c) = self.shapes[id.0];
        let slot = &mut self.slots[id.0];
        if matches!(slot, Slot::Empty) {
            *slot = Slot::Dense(vec![0.0; r * c]);
        }
        match slot {
            Slot::Dense(v) => v,
            _ => panic!("parameter {} is accumulated row-sparse", id.0),
        }
    }

    pub fn row(&mut self, id: ParamId, row: usize) -> &mut [f64] {
        let (_, c) = self.shapes[id.0];
        let slot = &mut self.slots[id.0];
        if matches!(slot, Slot::Empty) {
            *slot = Slot::Rows {
                cols: c,
                rows: BTreeMap::new(),
            };
        }
        match slot {
            Slot::Rows { rows, .. } => rows.entry(row).or_insert_with(|| vec![0.0; c]),
            Slot::Dense(v) => &mut v[row * c..(row + 1) * c],
            Slot::Empty => unreachable!(),
        }
    }

    /// Dense copy of the gradient for `id` (zeros when untouched).
    pub fn to_dense(&self, id: ParamId) -> Vec<f64> {
        let (r, c) = self.shapes[id.0];
        match &self.slots[id.0] {
            Slot::Empty => vec![0.0; r * c],
            Slot::Dense(v) => v.clone(),
            Slot::Rows { rows, .. } => {
                let mut out = vec![0.0; r * c];
                for (&i, v) in rows {
                    out[i * c..(i + 1) * c].copy_from_slice(v);
                }
                out
            }
        }
    }
}
