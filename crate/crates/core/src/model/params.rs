use crate::error::{Error, Result};

/// Named dense tensors in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    data: Vec<Vec<f64>>,
}

impl ParamStore {
    pub(crate) fn new() -> Self {
        Self {
            names: Vec::new(),
            shapes: Vec::new(),
            data: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> usize {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.names.push(name.into());
        self.shapes.push(shape);
        self.data.push(values);
        self.data.len() - 1
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            names: self.names.clone(),
            shapes: self.shapes.clone(),
            data: self.data.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.data.iter().map(Vec::len).sum()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn shape(&self, i: usize) -> &[usize] {
        &self.shapes[i]
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i]
    }

    /// Two distinct tensors, mutably.
    pub(crate) fn pair_mut(&mut self, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
        assert_ne!(a, b);
        if a < b {
            let (lo, hi) = self.data.split_at_mut(b);
            (&mut lo[a], &mut hi[0])
        } else {
            let (lo, hi) = self.data.split_at_mut(a);
            (&mut hi[0], &mut lo[b])
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[usize], &[f64])> {
        self.names
            .iter()
            .zip(&self.shapes)
            .zip(&self.data)
            .map(|((n, s), d)| (n.as_str(), s.as_slice(), d.as_slice()))
    }

    pub fn fill_zero(&mut self) {
        for t in &mut self.data {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Flatten every tensor into one vector, in order.
    pub fn flatten(&self) -> Vec<f64> {
        self.data.iter().flatten().copied().collect()
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_values() {
            return Err(Error::invalid(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_values()
            )));
        }
        let mut off = 0;
        for t in &mut self.data {
            let n = t.len();
            t.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Replace tensor `name` after checking the shape.
    pub fn set(&mut self, name: &str, shape: &[usize], values: Vec<f64>) -> Result<()> {
        let i = self
            .index_of(name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown tensor {name}")))?;
        if self.shapes[i] != shape || values.len() != self.data[i].len() {
            return Err(Error::Checkpoint(format!(
                "tensor {name}: shape {shape:?} does not match {:?}",
                self.shapes[i]
            )));
        }
        self.data[i] = values;
        Ok(())
    }
}
