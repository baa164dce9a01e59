use thiserror::Error;

use crate::scalar::Scalar;
use crate::tensor::{SeededRng, Tensor, TensorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, ModelError> {
        if data.len() != rows * cols {
            return Err(ModelError::Shape(format!(
                "{rows}×{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy of rows `start..start + len`.
    pub fn rows_slice(&self, start: usize, len: usize) -> Self {
        Self {
            rows: len,
            cols: self.cols,
            data: self.data[start * self.cols..(start + len) * self.cols].to_vec(),
        }
    }

    /// `self · other`
    pub fn matmul(&self, other: &Self) -> Result<Self, ModelError> {
        if self.cols != other.rows {
            return Err(ModelError::Shape(format!(
                "cannot multiply {}×{} by {}×{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                for (o, &b) in dst.iter_mut().zip(other.row(k)) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &Self) -> Result<Self, ModelError> {
        if self.rows != other.rows {
            return Err(ModelError::Shape(format!(
                "cannot multiply ({}×{})ᵀ by {}×{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            for (i, &a) in self.row(r).iter().enumerate() {
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in dst.iter_mut().zip(other.row(r)) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`
    pub fn matmul_t(&self, other: &Self) -> Result<Self, ModelError> {
        if self.cols != other.cols {
            return Err(ModelError::Shape(format!(
                "cannot multiply {}×{} by ({}×{})ᵀ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                out.data[i * other.rows + j] =
                    self.row(i).iter().zip(other.row(j)).map(|(&a, &b)| a * b).sum();
            }
        }
        Ok(out)
    }

    fn add_row_vector(&mut self, v: &[T]) {
        for row in self.data.chunks_mut(self.cols) {
            for (x, &b) in row.iter_mut().zip(v) {
                *x = *x + b;
            }
        }
    }

    fn column_sums(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for row in self.data.chunks(self.cols) {
            for (o, &x) in out.iter_mut().zip(row) {
                *o = *o + x;
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn to_tensor(&self) -> Result<Tensor<T>, ModelError> {
        Ok(Tensor::new(vec![self.rows, self.cols], self.data.clone())?)
    }

    pub fn from_tensor(t: &Tensor<T>, rows: usize, cols: usize) -> Result<Self, ModelError> {
        Self::new(rows, cols, t.data().to_vec())
    }
}

/// Affine layer `x ↦ x·W + b`, also used to hold that layer's gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Matrix::zeros(fan_in, fan_out),
            bias: vec![T::zero(); fan_out],
        }
    }

    /// Normal weights with standard deviation `√(2/fan_in)`, zero bias.
    pub fn he_normal(fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Self {
        let scale = (2.0 / fan_in as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| T::lit(rng.standard_normal() * scale))
            .collect();
        Self {
            weights: Matrix {
                rows: fan_in,
                cols: fan_out,
                data,
            },
            bias: vec![T::zero(); fan_out],
        }
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>, ModelError> {
        let mut out = x.matmul(&self.weights)?;
        out.add_row_vector(&self.bias);
        Ok(out)
    }

    fn values(&self) -> impl Iterator<Item = T> + '_ {
        self.weights.data.iter().chain(&self.bias).copied()
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        self.weights.data.iter_mut().chain(self.bias.iter_mut())
    }

    pub fn norm_sq(&self) -> f64 {
        self.values().map(|v| v.as_f64().powi(2)).sum()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.values().zip(other.values()).map(|(a, b)| a.as_f64() * b.as_f64()).sum()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.values()
            .zip(other.values())
            .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `self += s · other`
    pub fn axpy(&mut self, s: T, other: &Self) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a = *a + s * b;
        }
    }

    pub fn scale(&mut self, s: T) {
        for a in self.values_mut() {
            *a = *a * s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }
}

/// Two-layer split network: the client computes `z = ReLU(x·W1 + b1)`, the
/// server computes `z·W2 + b2`. The width of `z` is the cut-layer width.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub client: Layer<T>,
    pub server: Layer<T>,
}

/// Gradients have the same layout as the parameters.
pub type Gradients<T> = Model<T>;

impl<T: Scalar> Model<T> {
    pub fn init(input_dim: usize, hidden: usize, output_dim: usize, seed: u64) -> Self {
        let mut rng = SeededRng::new(seed);
        let client = Layer::he_normal(input_dim, hidden, &mut rng);
        let server = Layer::he_normal(hidden, output_dim, &mut rng);
        Self { client, server }
    }

    pub fn zeros(input_dim: usize, hidden: usize, output_dim: usize) -> Self {
        Self {
            client: Layer::zeros(input_dim, hidden),
            server: Layer::zeros(hidden, output_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.client.weights.rows
    }

    pub fn hidden(&self) -> usize {
        self.client.weights.cols
    }

    pub fn output_dim(&self) -> usize {
        self.server.weights.cols
    }

    pub fn norm(&self) -> f64 {
        (self.client.norm_sq() + self.server.norm_sq()).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.client.dot(&other.client) + self.server.dot(&other.server)
    }

    pub fn axpy(&mut self, s: T, other: &Self) {
        self.client.axpy(s, &other.client);
        self.server.axpy(s, &other.server);
    }

    pub fn scale(&mut self, s: T) {
        self.client.scale(s);
        self.server.scale(s);
    }

    pub fn is_finite(&self) -> bool {
        self.client.is_finite() && self.server.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets<T> {
    /// One row of real targets per sample.
    Regression(Matrix<T>),
    Classes(Vec<usize>),
}

impl<T: Scalar> Targets<T> {
    pub fn len(&self) -> usize {
        match self {
            Targets::Regression(m) => m.rows,
            Targets::Classes(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice(&self, start: usize, len: usize) -> Self {
        match self {
            Targets::Regression(m) => Targets::Regression(m.rows_slice(start, len)),
            Targets::Classes(c) => Targets::Classes(c[start..start + len].to_vec()),
        }
    }
}

/// Inputs and labels for one mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub x: Matrix<T>,
    pub y: Targets<T>,
}

fn pre_activation<T: Scalar>(m: &Model<T>, x: &Matrix<T>) -> Result<Matrix<T>, ModelError> {
    if x.cols != m.input_dim() {
        return Err(ModelError::Shape(format!(
            "batch width {} does not match input dimension {}",
            x.cols,
            m.input_dim()
        )));
    }
    m.client.forward(x)
}

/// Smashed data `ReLU(x·W1 + b1)` as a `[batch, hidden]` tensor.
pub fn client_forward<T: Scalar>(m: &Model<T>, x: &Matrix<T>) -> Result<Tensor<T>, ModelError> {
    let mut a = pre_activation(m, x)?;
    for v in a.data.iter_mut() {
        *v = v.max(T::zero());
    }
    a.to_tensor()
}

fn as_batch_matrix<T: Scalar>(m: &Model<T>, z: &Tensor<T>, rows: usize) -> Result<Matrix<T>, ModelError> {
    if z.len() != rows * m.hidden() {
        return Err(ModelError::Shape(format!(
            "feature map of {} values does not match {rows} rows of width {}",
            z.len(),
            m.hidden()
        )));
    }
    Matrix::from_tensor(z, rows, m.hidden())
}

/// Loss and its gradient with respect to the server outputs.
fn loss_and_output_grad<T: Scalar>(
    out: &Matrix<T>,
    y: &Targets<T>,
) -> Result<(f64, Matrix<T>), ModelError> {
    if y.len() != out.rows {
        return Err(ModelError::Shape(format!(
            "{} labels for a batch of {}",
            y.len(),
            out.rows
        )));
    }
    let b = out.rows;
    match y {
        Targets::Regression(t) => {
            if t.cols != out.cols {
                return Err(ModelError::Shape(format!(
                    "target width {} does not match output width {}",
                    t.cols, out.cols
                )));
            }
            let n = (b * out.cols) as f64;
            let mut grad = Matrix::zeros(b, out.cols);
            let mut loss = 0.0;
            for (i, (&p, &q)) in out.data.iter().zip(&t.data).enumerate() {
                let e = p - q;
                loss += e.as_f64().powi(2);
                grad.data[i] = T::lit(2.0 / n) * e;
            }
            Ok((loss / n, grad))
        }
        Targets::Classes(labels) => {
            let classes = out.cols;
            let mut grad = Matrix::zeros(b, classes);
            let mut loss = 0.0;
            for (r, &label) in labels.iter().enumerate() {
                if label >= classes {
                    return Err(ModelError::Label { label, classes });
                }
                let logits = out.row(r);
                let max = logits.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
                let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
                let total: T = exps.iter().copied().sum();
                loss += (total.ln() + max - logits[label]).as_f64();
                for (c, &e) in exps.iter().enumerate() {
                    let target = if c == label { T::one() } else { T::zero() };
                    grad.data[r * classes + c] = (e / total - target) / T::lit(b as f64);
                }
            }
            Ok((loss / b as f64, grad))
        }
    }
}

/// Batch-averaged server loss on the feature map `z` actually received.
pub fn server_forward_loss<T: Scalar>(m: &Model<T>, z: &Tensor<T>, y: &Targets<T>) -> Result<f64, ModelError> {
    let z = as_batch_matrix(m, z, y.len())?;
    let out = m.server.forward(&z)?;
    Ok(loss_and_output_grad(&out, y)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backward<T> {
    pub loss: f64,
    pub grads: Gradients<T>,
    /// `∂L/∂z`, sent back to the client uncompressed.
    pub dz: Matrix<T>,
}

/// Exact gradients of the split network when the server is fed `z_used`.
///
/// Compression is treated as the identity in the backward pass: the server
/// gradient uses `z_used`, and `∂L/∂z` flows into the client through the
/// ReLU pattern of the client's own pre-activation.
pub fn backward_split<T: Scalar>(
    m: &Model<T>,
    batch: &Batch<T>,
    z_used: &Tensor<T>,
) -> Result<Backward<T>, ModelError> {
    let rows = batch.x.rows;
    let z = as_batch_matrix(m, z_used, rows)?;
    let out = m.server.forward(&z)?;
    let (loss, dout) = loss_and_output_grad(&out, &batch.y)?;
    let server = Layer {
        weights: z.t_matmul(&dout)?,
        bias: dout.column_sums(),
    };
    let dz = dout.matmul_t(&m.server.weights)?;
    let a = pre_activation(m, &batch.x)?;
    let mut da = dz.clone();
    for (g, &pre) in da.data.iter_mut().zip(&a.data) {
        if pre <= T::zero() {
            *g = T::zero();
        }
    }
    let client = Layer {
        weights: batch.x.t_matmul(&da)?,
        bias: da.column_sums(),
    };
    Ok(Backward {
        loss,
        grads: Model { client, server },
        dz,
    })
}

/// Uncompressed end-to-end loss.
pub fn full_loss<T: Scalar>(m: &Model<T>, batch: &Batch<T>) -> Result<f64, ModelError> {
    let z = client_forward(m, &batch.x)?;
    server_forward_loss(m, &z, &batch.y)
}
