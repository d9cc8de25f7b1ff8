//! Adam optimizer and global-norm gradient clipping over tensor views.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;
use crate::nn::TensorMut;

/// Adam with bias correction. Moment buffers are allocated lazily on the
/// first step and keyed by tensor traversal order, so the same tensor
/// list must be passed every step.
///
/// After each update every parameter is rounded to the nearest f32
/// value. Training effectively runs at single precision (plenty for
/// these models) and checkpoints, which store f32, round-trip the live
/// parameters bit-exactly.
#[derive(Debug, Clone)]
pub struct Adam {
    /// Learning rate.
    pub lr: f64,
    /// First-moment decay.
    pub beta1: f64,
    /// Second-moment decay.
    pub beta2: f64,
    /// Denominator stabilizer.
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

/// Snapshot of an optimizer's mutable state, for checkpointing.
/// Restoring it makes a resumed run continue the exact parameter
/// trajectory of the run that exported it.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    /// Number of steps taken.
    pub t: u64,
    /// Per-tensor (first, second) moment buffers, in step order.
    pub slots: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    /// New optimizer with zeroed state.
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self { lr, beta1, beta2, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }

    /// Number of steps taken.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Exports the mutable state (step count and moment buffers).
    pub fn export(&self) -> AdamState {
        let slots = self.m.iter().cloned().zip(self.v.iter().cloned()).collect();
        AdamState { t: self.t, slots }
    }

    /// Restores exported state. The next `step` call must pass a tensor
    /// list with the same shapes the state was exported under.
    pub fn restore(&mut self, state: AdamState) {
        self.t = state.t;
        (self.m, self.v) = state.slots.into_iter().unzip();
    }

    /// Applies one update from the accumulated gradients.
    pub fn step(&mut self, tensors: &mut [TensorMut<'_>]) {
        if self.m.is_empty() {
            self.m = tensors.iter().map(|t| vec![0.0; t.data.len()]).collect();
            self.v = tensors.iter().map(|t| vec![0.0; t.data.len()]).collect();
        }
        debug_assert_eq!(self.m.len(), tensors.len(), "tensor list changed between steps");
        self.t += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for (i, t) in tensors.iter_mut().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            debug_assert_eq!(m.len(), t.data.len(), "tensor {} resized", t.name);
            for j in 0..t.data.len() {
                let g = t.grad[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                let next = t.data[j] - self.lr * m_hat / (sqrt(v_hat) + self.eps);
                t.data[j] = next as f32 as f64;
            }
        }
    }
}

/// Scales all gradients so their joint Euclidean norm is at most
/// `max_norm`; `max_norm <= 0` disables clipping. Returns the pre-clip
/// norm.
pub fn clip_global_norm(tensors: &mut [TensorMut<'_>], max_norm: f64) -> f64 {
    let mut sum_sq = 0.0;
    for t in tensors.iter() {
        for &g in t.grad.iter() {
            sum_sq += g * g;
        }
    }
    let norm = sqrt(sum_sq);
    if max_norm > 0.0 && norm > max_norm {
        let scale = max_norm / norm;
        for t in tensors.iter_mut() {
            for g in t.grad.iter_mut() {
                *g *= scale;
            }
        }
    }
    norm
}
