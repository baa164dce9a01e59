//! Dense feature-map container plus the norm, activation and statistics
//! helpers every other module builds on.

mod rng;
pub mod stats;

pub use rng::{mix_seed, SeededRng};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("shape must have at least one dimension and no zero dimensions, got {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("shape {shape:?} holds {expected} elements but {actual} were given")]
    LengthMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
}

/// Row-major dense tensor. The shape is metadata; every codec works on the
/// flat element vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

/// Number of elements described by `shape`, or `None` on overflow.
pub fn shape_len(shape: &[usize]) -> Option<usize> {
    shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self, TensorError> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(TensorError::InvalidShape(shape));
        }
        let expected = shape_len(&shape).ok_or_else(|| TensorError::InvalidShape(shape.clone()))?;
        if expected != data.len() {
            return Err(TensorError::LengthMismatch {
                shape,
                expected,
                actual: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(i));
        }
        Ok(Self { shape, data })
    }

    /// One-dimensional tensor over `data`.
    pub fn from_vec(data: Vec<T>) -> Result<Self, TensorError> {
        Self::new(vec![data.len()], data)
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self, TensorError> {
        let len = shape_len(&shape).unwrap_or(0);
        Self::new(shape, vec![T::zero(); len])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Flat element count `d`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn l2_norm(&self) -> T {
        l2_norm(&self.data)
    }

    pub fn relu(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| relu_scalar(v)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise conversion to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    /// `‖self − other‖₂`, requiring equal shapes.
    pub fn distance(&self, other: &Self) -> Result<T, TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let sq: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| {
                let d = a.as_f64() - b.as_f64();
                d * d
            })
            .sum();
        Ok(T::lit(sq.sqrt()))
    }
}

/// Euclidean norm, accumulated in `f64`. An empty slice has norm zero.
pub fn l2_norm<T: Scalar>(values: &[T]) -> T {
    let sq: f64 = values
        .iter()
        .map(|v| {
            let v = v.as_f64();
            v * v
        })
        .sum();
    T::lit(sq.sqrt())
}

#[inline]
pub fn relu_scalar<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.relu()
}

/// Synthetic post-ReLU activations shaped `[channels, width]`.
///
/// Each channel draws a log-normal scale `exp(0.75·N(0,1))`; entries are
/// `ReLU((N(0,1) − 0.5)·scale)`. About 30% of entries are non-zero and the
/// per-channel scales give the heavy upper tail typical of convolutional
/// feature maps.
pub fn post_relu_feature_map<T: Scalar>(
    channels: usize,
    width: usize,
    rng: &mut SeededRng,
) -> Tensor<T> {
    let mut data = Vec::with_capacity(channels * width);
    for _ in 0..channels {
        let scale = (0.75 * rng.standard_normal()).exp();
        for _ in 0..width {
            let pre = (rng.standard_normal() - 0.5) * scale;
            data.push(T::lit(pre.max(0.0)));
        }
    }
    Tensor::new(vec![channels, width], data).expect("generator produces a valid tensor")
}

/// Uniform non-negative vector on `[0, 1)^d`.
pub fn uniform_nonnegative<T: Scalar>(d: usize, rng: &mut SeededRng) -> Tensor<T> {
    let data = (0..d).map(|_| T::lit(rng.uniform())).collect();
    Tensor::from_vec(data).expect("generator produces a valid tensor")
}

/// Standard-normal vector.
pub fn standard_normal<T: Scalar>(d: usize, rng: &mut SeededRng) -> Tensor<T> {
    let data = (0..d).map(|_| T::lit(rng.standard_normal())).collect();
    Tensor::from_vec(data).expect("generator produces a valid tensor")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_loop_norm(v: &[f32]) -> f64 {
        let mut acc = 0.0f64;
        for x in v {
            acc += (*x as f64) * (*x as f64);
        }
        acc.sqrt()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(l2_norm(&[0.0f32, 0.0, 0.0]), 0.0);
        assert_eq!(l2_norm(&[3.0f32, 4.0]), 5.0);
        assert_eq!(l2_norm::<f64>(&[]), 0.0);

        let mut rng = SeededRng::new(11);
        let x = standard_normal::<f32>(16, &mut rng);
        let oracle = straight_loop_norm(x.data());
        let got = x.l2_norm() as f64;
        assert!((got - oracle).abs() <= 1e-6 * oracle);
    }

    #[test]
    fn relu_examples() {
        let x = Tensor::from_vec(vec![-1.0f32, 0.0, 2.0]).unwrap();
        assert_eq!(x.relu().data(), &[0.0, 0.0, 2.0]);

        let neg = Tensor::from_vec(vec![-3.0f64, -0.5, -1e-9]).unwrap();
        assert!(neg.relu().data().iter().all(|&v| v == 0.0));

        let mut rng = SeededRng::new(5);
        let x = standard_normal::<f64>(64, &mut rng);
        let r = x.relu();
        for (a, b) in x.data().iter().zip(r.data()) {
            let expected = if *a > 0.0 { *a } else { 0.0 };
            assert_eq!(*b, expected);
        }
        assert_eq!(r.shape(), x.shape());
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(
            Tensor::new(vec![2, 2], vec![1.0f32; 3]),
            Err(TensorError::LengthMismatch { .. })
        ));
        assert!(matches!(
            Tensor::new(vec![2, 0], Vec::<f32>::new()),
            Err(TensorError::InvalidShape(_))
        ));
        assert_eq!(
            Tensor::from_vec(vec![1.0f32, f32::NAN]),
            Err(TensorError::NonFinite(1))
        );
        assert!(matches!(
            Tensor::new(vec![usize::MAX, 2], vec![0.0f32]),
            Err(TensorError::InvalidShape(_))
        ));
    }

    #[test]
    fn post_relu_generator_is_nonnegative_and_sparse() {
        let mut rng = SeededRng::new(1);
        let x = post_relu_feature_map::<f32>(64, 64, &mut rng);
        assert_eq!(x.shape(), &[64, 64]);
        assert!(x.data().iter().all(|&v| v >= 0.0));
        let nonzero = x.data().iter().filter(|&&v| v > 0.0).count();
        assert!(nonzero > 800 && nonzero < 2000, "nonzero = {nonzero}");
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn norm_is_absolutely_homogeneous(
                v in proptest::collection::vec(-1e3f64..1e3, 1..64),
                c in -50.0f64..50.0,
            ) {
                let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
                let lhs = l2_norm(&scaled);
                let rhs = c.abs() * l2_norm(&v);
                prop_assert!((lhs - rhs).abs() <= 1e-6 * rhs.max(1e-300));
            }

            #[test]
            fn relu_is_idempotent(v in proptest::collection::vec(-10.0f32..10.0, 1..64)) {
                let x = Tensor::from_vec(v).unwrap();
                prop_assert_eq!(x.relu().relu(), x.relu());
            }
        }
    }
}
