use serde::{Deserialize, Serialize};

use super::model::{Batch, Matrix, ModelError, Targets};
use crate::scalar::Scalar;
use crate::tensor::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    /// `y = x·w* + noise` with heavy-tailed inputs: every sample is a
    /// standard normal vector scaled by `exp(s·N(0,1)) / exp(s²)`, so a few
    /// samples produce much larger activations than the rest.
    SyntheticRegression {
        #[serde(default = "default_input_dim")]
        input_dim: usize,
        #[serde(default = "default_noise")]
        noise_std: f64,
        #[serde(default = "default_scale_sigma")]
        scale_sigma: f64,
    },
    /// Two interleaved half circles in the plane, binary labels.
    TwoClassMoons {
        #[serde(default = "default_moons_noise")]
        noise_std: f64,
    },
}

fn default_input_dim() -> usize {
    4
}

fn default_noise() -> f64 {
    1.0
}

fn default_scale_sigma() -> f64 {
    1.0
}

fn default_moons_noise() -> f64 {
    0.1
}

impl Default for Task {
    fn default() -> Self {
        Task::SyntheticRegression {
            input_dim: default_input_dim(),
            noise_std: default_noise(),
            scale_sigma: default_scale_sigma(),
        }
    }
}

impl Task {
    pub fn input_dim(&self) -> usize {
        match self {
            Task::SyntheticRegression { input_dim, .. } => *input_dim,
            Task::TwoClassMoons { .. } => 2,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Task::SyntheticRegression { .. } => 1,
            Task::TwoClassMoons { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Task::SyntheticRegression {
                input_dim,
                noise_std,
                scale_sigma,
            } => {
                if input_dim == 0 {
                    return Err("input_dim must be positive".into());
                }
                if !(noise_std.is_finite() && noise_std >= 0.0) {
                    return Err(format!("noise_std = {noise_std} must be finite and non-negative"));
                }
                if !(scale_sigma.is_finite() && (0.0..=3.0).contains(&scale_sigma)) {
                    return Err(format!("scale_sigma = {scale_sigma} must lie in [0, 3]"));
                }
            }
            Task::TwoClassMoons { noise_std } => {
                if !(noise_std.is_finite() && noise_std >= 0.0) {
                    return Err(format!("noise_std = {noise_std} must be finite and non-negative"));
                }
            }
        }
        Ok(())
    }

    pub fn generate<T: Scalar>(&self, samples: usize, seed: u64) -> Dataset<T> {
        let mut rng = SeededRng::new(seed);
        match *self {
            Task::SyntheticRegression {
                input_dim,
                noise_std,
                scale_sigma,
            } => {
                let w: Vec<f64> = (0..input_dim)
                    .map(|_| rng.standard_normal() / (input_dim as f64).sqrt())
                    .collect();
                let norm = (scale_sigma * scale_sigma).exp();
                let mut x = Vec::with_capacity(samples * input_dim);
                let mut y = Vec::with_capacity(samples);
                for _ in 0..samples {
                    let scale = (scale_sigma * rng.standard_normal()).exp() / norm;
                    let row: Vec<f64> = (0..input_dim).map(|_| rng.standard_normal() * scale).collect();
                    let target = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
                        + noise_std * rng.standard_normal();
                    x.extend(row.into_iter().map(T::lit));
                    y.push(T::lit(target));
                }
                Dataset {
                    x: Matrix::new(samples, input_dim, x).expect("sized"),
                    y: Targets::Regression(Matrix::new(samples, 1, y).expect("sized")),
                }
            }
            Task::TwoClassMoons { noise_std } => {
                let mut x = Vec::with_capacity(samples * 2);
                let mut y = Vec::with_capacity(samples);
                for i in 0..samples {
                    let label = i % 2;
                    let t = std::f64::consts::PI * rng.uniform();
                    let (px, py) = if label == 0 {
                        (t.cos(), t.sin())
                    } else {
                        (1.0 - t.cos(), 0.5 - t.sin())
                    };
                    x.push(T::lit(px + noise_std * rng.standard_normal()));
                    x.push(T::lit(py + noise_std * rng.standard_normal()));
                    y.push(label);
                }
                Dataset {
                    x: Matrix::new(samples, 2, x).expect("sized"),
                    y: Targets::Classes(y),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub x: Matrix<T>,
    pub y: Targets<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(x: Matrix<T>, y: Targets<T>) -> Result<Self, ModelError> {
        if x.rows() != y.len() {
            return Err(ModelError::Shape(format!("{} inputs but {} labels", x.rows(), y.len())));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Consecutive equal parts, client `i` taking rows `i·n .. (i+1)·n`.
    /// Leftover rows are dropped.
    pub fn shard(&self, parts: usize) -> Vec<Dataset<T>> {
        let n = self.len() / parts;
        (0..parts)
            .map(|i| Dataset {
                x: self.x.rows_slice(i * n, n),
                y: self.y.slice(i * n, n),
            })
            .collect()
    }

    pub fn batch(&self, start: usize, len: usize) -> Batch<T> {
        Batch {
            x: self.x.rows_slice(start, len),
            y: self.y.slice(start, len),
        }
    }

    pub fn batches(&self, batch_size: usize) -> usize {
        self.len() / batch_size
    }
}
