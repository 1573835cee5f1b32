use std::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Shape of the classifier: `buckets -> hidden (ReLU) -> classes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    pub buckets: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Dims {
    pub fn len(&self) -> usize {
        self.buckets * self.hidden + self.hidden + self.hidden * self.classes + self.classes
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Input projection, row-major `buckets x hidden`.
    pub fn w1(&self) -> Range<usize> {
        0..self.buckets * self.hidden
    }

    pub fn b1(&self) -> Range<usize> {
        let s = self.w1().end;
        s..s + self.hidden
    }

    /// Output weights, row-major `hidden x classes`.
    pub fn w2(&self) -> Range<usize> {
        let s = self.b1().end;
        s..s + self.hidden * self.classes
    }

    pub fn b2(&self) -> Range<usize> {
        let s = self.w2().end;
        s..s + self.classes
    }

    /// The classification head: output weights followed by output bias.
    pub fn head(&self) -> Range<usize> {
        self.w2().start..self.len()
    }

    /// Everything below the head.
    pub fn body(&self) -> Range<usize> {
        0..self.w2().start
    }
}

/// Flat parameter vector of the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    dims: Dims,
    values: Vec<f64>,
}

impl Parameters {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            values: vec![0.0; dims.len()],
        }
    }

    pub fn from_values(dims: Dims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::Dimension {
                expected: dims.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameters"));
        }
        Ok(Self { dims, values })
    }

    /// Weights uniform in `(-s, s)` with `s = scale / sqrt(fan_in)`, biases zero.
    pub fn init(dims: Dims, scale: f64, seed: u64) -> Self {
        let mut p = Self::zeros(dims);
        let mut r = rng::rng(seed);
        let s1 = scale / (dims.buckets as f64).sqrt();
        for v in &mut p.values[dims.w1()] {
            *v = r.random_range(-s1..s1);
        }
        p.init_head(scale, &mut r);
        p
    }

    fn init_head(&mut self, scale: f64, r: &mut rng::Rng) {
        let s2 = scale / (self.dims.hidden as f64).sqrt();
        for v in &mut self.values[self.dims.w2()] {
            *v = r.random_range(-s2..s2);
        }
        for v in &mut self.values[self.dims.b2()] {
            *v = 0.0;
        }
    }

    /// Replaces the head with a freshly initialized one of `classes` outputs,
    /// keeping every body coordinate.
    pub fn with_new_head(&self, classes: usize, scale: f64, seed: u64) -> Self {
        let dims = Dims { classes, ..self.dims };
        let mut values = Vec::with_capacity(dims.len());
        values.extend_from_slice(&self.values[self.dims.body()]);
        values.resize(dims.len(), 0.0);
        let mut p = Self { dims, values };
        p.init_head(scale, &mut rng::rng(seed));
        p
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn head(&self) -> &[f64] {
        &self.values[self.dims.head()]
    }

    pub fn body(&self) -> &[f64] {
        &self.values[self.dims.body()]
    }

    pub fn set_head(&mut self, head: &[f64]) -> Result<()> {
        let r = self.dims.head();
        if head.len() != r.len() {
            return Err(Error::Dimension {
                expected: r.len(),
                got: head.len(),
            });
        }
        self.values[r].copy_from_slice(head);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Rounds every coordinate through `f32`.
    pub fn quantize_f32(&mut self) {
        for v in &mut self.values {
            *v = *v as f32 as f64;
        }
    }
}
