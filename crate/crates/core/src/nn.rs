//! Shared building blocks for the two hand-written networks: weight
//! initialization, activations, and an Adam optimizer that steps a list of
//! tensors in lockstep with their gradients.
//!
//! All parameters live as 2-D arrays; bias vectors are `1 x d` rows so the
//! optimizer can treat every parameter uniformly and broadcasting against
//! `n x d` activations works without reshaping.

use crate::scalar::Scalar;
use ndarray::Array2;
use rand::Rng;
use thiserror::Error;

/// Negative-side slope shared by every leaky rectifier in the crate.
pub const LEAKY_SLOPE: f64 = 0.1;

/// Derives an independent stream seed from a root seed and a caller-chosen
/// tag (splitmix64 finalizer over `root ^ tag * golden-ratio`). Components
/// seeded from the same root but different tags get unrelated streams, so
/// e.g. adding an epoch to one trainer cannot shift another's draws.
pub fn subseed(root: u64, tag: u64) -> u64 {
    let mut z = root ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Glorot (Xavier) uniform init: entries drawn from
/// `U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out)))` where
/// `fan_in = rows` and `fan_out = cols`.
pub fn glorot_uniform<T: Scalar, R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| {
        T::of(limit * (2.0 * rng.gen::<f64>() - 1.0))
    })
}

/// One dense layer: `rows = fan_in`, `cols = fan_out`, bias is `1 x fan_out`.
#[derive(Clone, Debug)]
pub struct Layer<T> {
    pub w: Array2<T>,
    pub b: Array2<T>,
}

impl<T: Scalar> Layer<T> {
    /// Glorot-initialized weights, zero biases.
    pub fn glorot<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        Layer {
            w: glorot_uniform(fan_in, fan_out, rng),
            b: Array2::zeros((1, fan_out)),
        }
    }

    /// `x @ w + b` for an `n x fan_in` input.
    pub fn affine(&self, x: &Array2<T>) -> Array2<T> {
        x.dot(&self.w) + &self.b
    }
}

pub fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// Subgradient of ReLU with the kink resolved to 0 at exactly 0.
pub fn relu_deriv<T: Scalar>(pre: T) -> T {
    if pre > T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

pub fn leaky_relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::of(LEAKY_SLOPE) * x
    }
}

pub fn leaky_relu_deriv<T: Scalar>(pre: T) -> T {
    if pre > T::zero() {
        T::one()
    } else {
        T::of(LEAKY_SLOPE)
    }
}

/// Error raised when a gradient passed to [`Adam::step`] contains a
/// non-finite entry; trainers surface this with context instead of letting
/// NaNs spread through the parameters.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("non-finite gradient in tensor {tensor_index}")]
pub struct NonFiniteGradient {
    pub tensor_index: usize,
}

/// Adam with the standard bias-corrected update:
/// `m ← β1 m + (1-β1) g`, `v ← β2 v + (1-β2) g²`,
/// `p ← p - lr · m̂ / (√v̂ + ε)`.
///
/// Moment buffers are allocated lazily on the first step and keyed by
/// position, so the same tensors (in the same order) must be passed on
/// every step.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    t: i32,
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
}

impl<T: Scalar> Adam<T> {
    /// β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(lr: T) -> Self {
        Adam {
            lr,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Adjusts the learning rate (used by per-epoch decay schedules);
    /// moment estimates are kept.
    pub fn set_lr(&mut self, lr: T) {
        self.lr = lr;
    }

    pub fn lr(&self) -> T {
        self.lr
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> i32 {
        self.t
    }

    /// Applies one update to every `(param, grad)` pair. Checks gradients
    /// for non-finite entries before touching any parameter.
    pub fn step(
        &mut self,
        params: &mut [&mut Array2<T>],
        grads: &[&Array2<T>],
    ) -> Result<(), NonFiniteGradient> {
        assert_eq!(
            params.len(),
            grads.len(),
            "parameter and gradient lists must align"
        );
        for (tensor_index, grad) in grads.iter().enumerate() {
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(NonFiniteGradient { tensor_index });
            }
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| Array2::zeros(g.raw_dim())).collect();
            self.v = grads.iter().map(|g| Array2::zeros(g.raw_dim())).collect();
        }
        self.t += 1;
        let b1 = self.beta1;
        let b2 = self.beta2;
        let m_corr = T::one() - b1.powi(self.t);
        let v_corr = T::one() - b2.powi(self.t);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            assert_eq!(param.raw_dim(), grad.raw_dim(), "param/grad shape mismatch");
            ndarray::azip!((p in param.view_mut(), &g in &grad.view(), m in m, v in v) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let m_hat = *m / m_corr;
                let v_hat = *v / v_corr;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            });
        }
        Ok(())
    }
}
