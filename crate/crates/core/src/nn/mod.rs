//! Two-layer ReLU perceptron with hand-derived gradients.

mod analytic;
mod train;

pub use analytic::{build_analytic_q_network, build_analytic_rcsl_policy};
pub use train::{train_mse, OptimizerKind, TrainConfig, Trainer};

use rand::distributions::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::episode_rng;

/// `forward(x) = w2 . relu(w1 . x + b1) + b2`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp2 {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

/// Hidden pre-activations and activations from a forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl Mlp2 {
    pub fn zeros(in_dim: usize, width: usize, out_dim: usize) -> Self {
        Mlp2 {
            w1: vec![vec![0.0; in_dim]; width],
            b1: vec![0.0; width],
            w2: vec![vec![0.0; width]; out_dim],
            b2: vec![0.0; out_dim],
        }
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` initialization of all
    /// weights and biases.
    pub fn random(in_dim: usize, width: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = episode_rng(seed, u64::MAX);
        let mut layer = |fan_in: usize, rows: usize, cols: usize| {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            let w: Vec<Vec<f64>> =
                (0..rows).map(|_| (0..cols).map(|_| dist.sample(&mut rng)).collect()).collect();
            let b: Vec<f64> = (0..rows).map(|_| dist.sample(&mut rng)).collect();
            (w, b)
        };
        let (w1, b1) = layer(in_dim, width, in_dim);
        let (w2, b2) = layer(width, out_dim, width);
        Mlp2 { w1, b1, w2, b2 }
    }

    pub fn in_dim(&self) -> usize {
        self.w1.first().map_or(0, Vec::len)
    }

    pub fn width(&self) -> usize {
        self.b1.len()
    }

    pub fn out_dim(&self) -> usize {
        self.b2.len()
    }

    pub fn n_params(&self) -> usize {
        self.width() * (self.in_dim() + 1) + self.out_dim() * (self.width() + 1)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::DimensionMismatch { expected: self.in_dim(), got: x.len() });
        }
        let mut cache = ForwardCache::default();
        let mut out = vec![0.0; self.out_dim()];
        self.forward_into(x, &mut cache, &mut out);
        Ok(out)
    }

    /// Unchecked forward pass that keeps the hidden layer for `backward`.
    pub fn forward_into(&self, x: &[f64], cache: &mut ForwardCache, out: &mut [f64]) {
        cache.pre.clear();
        cache.hidden.clear();
        for (row, b) in self.w1.iter().zip(&self.b1) {
            let z = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b;
            cache.pre.push(z);
            cache.hidden.push(z.max(0.0));
        }
        for ((o, row), b) in out.iter_mut().zip(&self.w2).zip(&self.b2) {
            *o = row.iter().zip(&cache.hidden).map(|(w, h)| w * h).sum::<f64>() + b;
        }
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d out`.
    /// The ReLU derivative at 0 is taken as 0.
    pub fn backward(&self, x: &[f64], cache: &ForwardCache, d_out: &[f64], grad: &mut Mlp2) {
        for (o, &g) in d_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.b2[o] += g;
            for (gw, h) in grad.w2[o].iter_mut().zip(&cache.hidden) {
                *gw += g * h;
            }
        }
        for j in 0..self.width() {
            if cache.pre[j] <= 0.0 {
                continue;
            }
            let d_hidden: f64 = d_out.iter().zip(&self.w2).map(|(g, row)| g * row[j]).sum();
            if d_hidden == 0.0 {
                continue;
            }
            grad.b1[j] += d_hidden;
            for (gw, xi) in grad.w1[j].iter_mut().zip(x) {
                *gw += d_hidden * xi;
            }
        }
    }

    /// Parameters in a fixed order: `w1` rows, `b1`, `w2` rows, `b2`.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().flatten().chain(&self.b1).chain(self.w2.iter().flatten()).chain(&self.b2)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .flatten()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut().flatten())
            .chain(self.b2.iter_mut())
    }

    pub fn zeroed(&self) -> Mlp2 {
        Mlp2::zeros(self.in_dim(), self.width(), self.out_dim())
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    /// Checks a deserialized network for consistent shapes and finite values.
    pub fn validate(&self) -> Result<()> {
        let (i, w, o) = (self.in_dim(), self.width(), self.out_dim());
        if self.w1.len() != w || self.w1.iter().any(|r| r.len() != i) {
            return Err(Error::InvalidParameter("w1 shape inconsistent with b1".into()));
        }
        if self.w2.len() != o || self.w2.iter().any(|r| r.len() != w) {
            return Err(Error::InvalidParameter("w2 shape inconsistent with b1/b2".into()));
        }
        if !self.is_finite() {
            return Err(Error::InvalidParameter("non-finite network parameter".into()));
        }
        Ok(())
    }
}
