use crate::error::{Error, Result};

/// Dense row-major f64 tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::shape(format!("tensor dims must be positive, got {dims:?}")));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!("dims {dims:?} need {n} values, got {}", data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            dims: dims.to_vec(),
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self {
            dims: vec![data.len()],
            data,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(mut self, dims: &[usize]) -> Result<Self> {
        if dims.iter().product::<usize>() != self.data.len() {
            return Err(Error::shape(format!("cannot reshape {:?} to {dims:?}", self.dims)));
        }
        self.dims = dims.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.dims, other.dims);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }

    pub fn dot(&self, other: &Tensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// (C, H, W) of a rank-3 tensor.
    pub fn chw(&self) -> Result<(usize, usize, usize)> {
        match self.dims[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::shape(format!("expected a CxHxW tensor, got {:?}", self.dims))),
        }
    }
}
