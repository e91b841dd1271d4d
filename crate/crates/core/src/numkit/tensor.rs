use crate::error::{Error, Result};

/// A named trainable array with its gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
}

impl ParamTensor {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            values: vec![0.0; n],
            grad: vec![0.0; n],
        }
    }

    pub fn from_values(name: impl Into<String>, shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(Error::Dimension(format!(
                "{name}: shape {shape:?} needs {n} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            name,
            shape: shape.to_vec(),
            grad: vec![0.0; n],
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row `r` of a 2-d tensor.
    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.shape[1];
        &self.values[r * w..(r + 1) * w]
    }

    pub fn grad_row_mut(&mut self, r: usize) -> &mut [f64] {
        let w = self.shape[1];
        &mut self.grad[r * w..(r + 1) * w]
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Ordered collection of tensors; declaration order is the checkpoint order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    pub tensors: Vec<ParamTensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a tensor and returns its slot.
    pub fn push(&mut self, t: ParamTensor) -> usize {
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&ParamTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|t| t.name.as_str())
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(ParamTensor::len).sum()
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(ParamTensor::zero_grad);
    }

    pub fn check_finite(&self) -> Result<()> {
        for t in &self.tensors {
            if t.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("values of {}", t.name)));
            }
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for ParamSet {
    type Output = ParamTensor;

    fn index(&self, idx: usize) -> &ParamTensor {
        &self.tensors[idx]
    }
}

impl std::ops::IndexMut<usize> for ParamSet {
    fn index_mut(&mut self, idx: usize) -> &mut ParamTensor {
        &mut self.tensors[idx]
    }
}
