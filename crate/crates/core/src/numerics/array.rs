//! Row-major dense arrays and the small set of vector kernels the networks
//! are written against.

use crate::error::{Error, Result};

/// A shape-tagged, row-major array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseArray {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl DenseArray {
    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        DenseArray {
            shape: shape.to_vec(),
            values: vec![value; len],
        }
    }

    pub fn from_vec(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("zero extent in shape {:?}", shape)));
        }
        let len: usize = shape.iter().product();
        if len != values.len() {
            return Err(Error::Shape(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                len,
                values.len()
            )));
        }
        Ok(DenseArray {
            shape: shape.to_vec(),
            values,
        })
    }

    pub fn vector(values: Vec<f64>) -> Self {
        DenseArray {
            shape: vec![values.len()],
            values,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Number of rows when viewed as a matrix (first extent).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Row width when viewed as a matrix (product of trailing extents).
    pub fn cols(&self) -> usize {
        if self.shape.is_empty() {
            0
        } else {
            self.shape[1..].iter().product()
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.values[i * c..(i + 1) * c]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let c = self.cols();
        self.values[i * c + j] = v;
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &DenseArray) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "cannot add {:?} into {:?}",
                other.shape, self.shape
            )));
        }
        axpy(1.0, &other.values, &mut self.values);
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn sum_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// `(outer, extent, inner)` strides for iterating 1-D lanes along `axis`.
    fn lanes(&self, axis: usize) -> Result<(usize, usize, usize)> {
        if axis >= self.rank() {
            return Err(Error::InvalidArgument(format!(
                "axis {} out of range for rank {}",
                axis,
                self.rank()
            )));
        }
        let extent = self.shape[axis];
        if extent == 0 {
            return Err(Error::Empty(format!("axis {} has zero extent", axis)));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        Ok((outer, extent, inner))
    }

    fn map_lanes(&self, axis: usize, f: impl Fn(&[f64], &mut [f64])) -> Result<(Vec<f64>, usize)> {
        let (outer, extent, inner) = self.lanes(axis)?;
        let mut out = vec![0.0; outer * extent * inner];
        let mut lane = vec![0.0; extent];
        let mut res = vec![0.0; extent];
        for o in 0..outer {
            for i in 0..inner {
                for k in 0..extent {
                    lane[k] = self.values[(o * extent + k) * inner + i];
                }
                f(&lane, &mut res);
                for k in 0..extent {
                    out[(o * extent + k) * inner + i] = res[k];
                }
            }
        }
        Ok((out, extent))
    }
}

/// `max + ln Σ exp(x − max)` along `axis`; the axis is removed from the result.
pub fn log_sum_exp(v: &DenseArray, axis: usize) -> Result<DenseArray> {
    let (outer, extent, inner) = v.lanes(axis)?;
    let mut out = Vec::with_capacity(outer * inner);
    let mut lane = vec![0.0; extent];
    for o in 0..outer {
        for i in 0..inner {
            for (k, slot) in lane.iter_mut().enumerate() {
                *slot = v.values[(o * extent + k) * inner + i];
            }
            out.push(logsumexp(&lane));
        }
    }
    let mut shape: Vec<usize> = v.shape.clone();
    shape.remove(axis);
    if shape.is_empty() {
        shape.push(1);
    }
    Ok(DenseArray { shape, values: out })
}

/// Softmax along `axis`, computed through [`log_sum_exp`].
pub fn softmax(v: &DenseArray, axis: usize) -> Result<DenseArray> {
    let (values, _) = v.map_lanes(axis, |lane, out| {
        let z = logsumexp(lane);
        for (o, &x) in out.iter_mut().zip(lane) {
            *o = (x - z).exp();
        }
    })?;
    Ok(DenseArray {
        shape: v.shape.clone(),
        values,
    })
}

/// Log-sum-exp of a slice. Returns `-inf` for an empty slice or one made of
/// `-inf` entries only.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

pub fn log_softmax_into(xs: &[f64], out: &mut [f64]) {
    let z = logsumexp(xs);
    for (o, &x) in out.iter_mut().zip(xs) {
        *o = x - z;
    }
}

pub fn log_softmax(xs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; xs.len()];
    log_softmax_into(xs, &mut out);
    out
}

pub fn softmax_slice(xs: &[f64]) -> Vec<f64> {
    let z = logsumexp(xs);
    xs.iter().map(|&x| (x - z).exp()).collect()
}

/// Index of the first maximal element.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out += W x` for a row-major `rows × cols` matrix.
pub fn matvec_acc(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(w.len(), cols * out.len());
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += Wᵀ d` for a row-major `rows × cols` matrix.
pub fn matvec_t_acc(w: &[f64], cols: usize, d: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), cols);
    for (&di, row) in d.iter().zip(w.chunks_exact(cols)) {
        if di != 0.0 {
            axpy(di, row, out);
        }
    }
}

/// `dst += a bᵀ` where `dst` is row-major `a.len() × b.len()`.
pub fn outer_acc(dst: &mut [f64], a: &[f64], b: &[f64]) {
    debug_assert_eq!(dst.len(), a.len() * b.len());
    for (&ai, row) in a.iter().zip(dst.chunks_exact_mut(b.len())) {
        if ai != 0.0 {
            axpy(ai, b, row);
        }
    }
}
