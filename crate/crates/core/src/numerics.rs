//! Dense kernels, loss, optimizer and gradient checking.
//!
//! Everything here is generic over [`Real`] so the model can run in `f32`
//! for training and inference and in `f64` when gradients are checked
//! against finite differences.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

use crate::error::{IcnnError, Result};

/// Floating point element type used throughout the crate.
pub trait Real:
    Float + Debug + Default + Sum + AddAssign + SubAssign + MulAssign + DivAssign + Send + Sync + 'static
{
    /// Converts an `f64` constant into this type.
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Real> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(IcnnError::ShapeMismatch {
                context: "matrix data",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(IcnnError::ShapeMismatch {
                    context: "matrix row",
                    expected: cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[F] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: F) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `x · self` for a row vector `x` of length `rows`.
    pub fn vec_mul(&self, x: &[F]) -> Vec<F> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![F::zero(); self.cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == F::zero() {
                continue;
            }
            axpy(xr, self.row(r), &mut out);
        }
        out
    }

    /// `self · y` for a column vector `y` of length `cols`.
    pub fn mul_vec(&self, y: &[F]) -> Vec<F> {
        debug_assert_eq!(y.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), y)).collect()
    }

    /// Sum of each column.
    pub fn column_sums(&self) -> Vec<F> {
        let mut out = vec![F::zero(); self.cols];
        for r in 0..self.rows {
            for (o, &v) in out.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix<F>) -> Result<Matrix<F>> {
        if self.cols != other.rows {
            return Err(IcnnError::ShapeMismatch {
                context: "matmul inner dimension",
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                axpy(a, other.row(k), dst);
            }
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<G: Real>(&self) -> Matrix<G> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| G::lit(v.as_f64())).collect(),
        }
    }
}

#[inline]
pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `y += alpha * x`
#[inline]
pub fn axpy<F: Real>(alpha: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Index of the first maximum.
pub fn argmax<F: Real>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn log_sum_exp<F: Real>(values: &[F]) -> F {
    let max = values.iter().copied().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return max;
    }
    max + values.iter().map(|&v| (v - max).exp()).sum::<F>().ln()
}

/// Max-shifted softmax.
pub fn softmax<F: Real>(scores: &[F]) -> Result<Vec<F>> {
    if scores.is_empty() {
        return Err(IcnnError::ShapeMismatch {
            context: "softmax input",
            expected: 1,
            actual: 0,
        });
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(IcnnError::NonFinite("softmax input"));
    }
    let max = scores.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: F = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Returns `-log softmax(s)[gold]` and its gradient with respect to `s`.
pub fn cross_entropy_with_grad<F: Real>(scores: &[F], gold: usize) -> Result<(F, Vec<F>)> {
    if gold >= scores.len() {
        return Err(IcnnError::IndexOutOfRange {
            index: gold,
            len: scores.len(),
        });
    }
    let probs = softmax(scores)?;
    let loss = log_sum_exp(scores) - scores[gold];
    let mut grad = probs;
    grad[gold] -= F::one();
    Ok((loss.max(F::zero()), grad))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one parameter array.
#[derive(Clone, Debug)]
pub struct AdamState<F> {
    pub config: AdamConfig,
    first: Vec<F>,
    second: Vec<F>,
    step: u64,
}

impl<F: Real> AdamState<F> {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            config,
            first: vec![F::zero(); len],
            second: vec![F::zero(); len],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<F: Real>(params: &mut [F], grads: &[F], state: &mut AdamState<F>) -> Result<()> {
    if params.len() != grads.len() {
        return Err(IcnnError::ShapeMismatch {
            context: "adam gradients",
            expected: params.len(),
            actual: grads.len(),
        });
    }
    if params.len() != state.first.len() {
        return Err(IcnnError::ShapeMismatch {
            context: "adam state",
            expected: params.len(),
            actual: state.first.len(),
        });
    }
    state.step += 1;
    let cfg = state.config;
    let t = state.step as i32;
    let b1 = F::lit(cfg.beta1);
    let b2 = F::lit(cfg.beta2);
    let one_b1 = F::lit(1.0 - cfg.beta1);
    let one_b2 = F::lit(1.0 - cfg.beta2);
    // Bias corrections folded into the step size and epsilon.
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let step_size = F::lit(cfg.lr / bc1);
    let inv_sqrt_bc2 = F::lit(1.0 / bc2.sqrt());
    let eps = F::lit(cfg.eps);

    for ((p, &g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        *m = b1 * *m + one_b1 * g;
        *v = b2 * *v + one_b2 * g * g;
        let denom = v.sqrt() * inv_sqrt_bc2 + eps;
        *p -= step_size * *m / denom;
    }
    Ok(())
}

/// Maximum relative error between `analytic` and central differences of
/// `loss` around `params`, using `|a - n| / max(1e-8, |a| + |n|)`.
pub fn finite_difference_gradcheck<L>(mut loss: L, params: &[f64], analytic: &[f64], step: f64) -> f64
where
    L: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length");
    let mut probe = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = loss(&probe);
        probe[i] = orig - step;
        let down = loss(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[i];
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    worst
}
