use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ForwardCache, Mlp2};
use crate::error::{Error, Result};
use crate::rng::{episode_rng, StreamRng};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 300,
            seed: 0,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        TrainConfig { seed, ..self.clone() }
    }
}

/// Minibatch gradient descent state that persists across epochs.
///
/// The per-sample objective is supplied to [`Trainer::epoch`] as a closure,
/// so the same loop serves plain regression and bootstrapped Q targets.
pub struct Trainer {
    config: TrainConfig,
    rng: StreamRng,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    steps: i32,
    epoch: usize,
    order: Vec<usize>,
}

impl Trainer {
    pub fn new(config: &TrainConfig, net: &Mlp2) -> Result<Self> {
        config.validate()?;
        let n = net.n_params();
        Ok(Trainer {
            config: config.clone(),
            rng: episode_rng(config.seed, 0),
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            steps: 0,
            epoch: 0,
            order: Vec::new(),
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// One shuffled pass over `inputs`. `loss_grad(i, out, d_out)` returns the
    /// loss of sample `i` and writes its gradient with respect to the output.
    /// Returns the mean per-sample loss of the epoch.
    pub fn epoch<X, F>(&mut self, net: &mut Mlp2, inputs: &[X], mut loss_grad: F) -> Result<f64>
    where
        X: AsRef<[f64]>,
        F: FnMut(usize, &[f64], &mut [f64]) -> f64,
    {
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        self.order.clear();
        self.order.extend(0..inputs.len());
        self.order.shuffle(&mut self.rng);

        let mut grad = net.zeroed();
        let mut cache = ForwardCache::default();
        let mut out = vec![0.0; net.out_dim()];
        let mut d_out = vec![0.0; net.out_dim()];
        let mut total = 0.0;
        let order = std::mem::take(&mut self.order);
        for batch in order.chunks(self.config.batch_size) {
            grad.params_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let x = inputs[i].as_ref();
                net.forward_into(x, &mut cache, &mut out);
                d_out.iter_mut().for_each(|d| *d = 0.0);
                total += loss_grad(i, &out, &mut d_out);
                d_out.iter_mut().for_each(|d| *d *= scale);
                net.backward(x, &cache, &d_out, &mut grad);
            }
            self.apply(net, &grad);
        }
        self.order = order;

        let mean = total / inputs.len() as f64;
        let epoch = self.epoch;
        self.epoch += 1;
        if !mean.is_finite() || !net.is_finite() {
            return Err(Error::Divergence { epoch, loss: mean });
        }
        Ok(mean)
    }

    fn apply(&mut self, net: &mut Mlp2, grad: &Mlp2) {
        let lr = self.config.learning_rate;
        match self.config.optimizer {
            OptimizerKind::Sgd => {
                for (p, g) in net.params_mut().zip(grad.params()) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                self.steps += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(self.steps);
                let c2 = 1.0 - ADAM_BETA2.powi(self.steps);
                for (((p, g), m), v) in net
                    .params_mut()
                    .zip(grad.params())
                    .zip(self.first_moment.iter_mut())
                    .zip(self.second_moment.iter_mut())
                {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Squared-error loss `|out - target|^2` and its output gradient.
pub(crate) fn squared_error(out: &[f64], target: &[f64], d_out: &mut [f64]) -> f64 {
    let mut loss = 0.0;
    for ((d, o), t) in d_out.iter_mut().zip(out).zip(target) {
        let e = o - t;
        loss += e * e;
        *d = 2.0 * e;
    }
    loss
}

/// Minibatch MSE regression. Returns the trained copy and the per-epoch mean
/// loss.
pub fn train_mse(
    net: &Mlp2,
    data: &[(Vec<f64>, Vec<f64>)],
    config: &TrainConfig,
) -> Result<(Mlp2, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (x, y) in data {
        if x.len() != net.in_dim() {
            return Err(Error::DimensionMismatch { expected: net.in_dim(), got: x.len() });
        }
        if y.len() != net.out_dim() {
            return Err(Error::DimensionMismatch { expected: net.out_dim(), got: y.len() });
        }
    }
    let mut trained = net.clone();
    let mut trainer = Trainer::new(config, net)?;
    let inputs: Vec<&[f64]> = data.iter().map(|(x, _)| x.as_slice()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let loss = trainer.epoch(&mut trained, &inputs, |i, out, d| squared_error(out, &data[i].1, d))?;
        curve.push(loss);
    }
    Ok((trained, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::distributions::{Distribution, Uniform};

    fn eval_mse(net: &Mlp2, data: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        data.iter()
            .map(|(x, y)| {
                let o = net.forward(x).unwrap();
                o.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            })
            .sum::<f64>()
            / data.len() as f64
    }

    #[test]
    fn fits_a_teacher_of_the_same_width() {
        let teacher = Mlp2::random(2, 8, 1, 42);
        let mut rng = episode_rng(5, 0);
        let dist = Uniform::new(-1.0, 1.0);
        let data: Vec<(Vec<f64>, Vec<f64>)> = (0..256)
            .map(|_| {
                let x = vec![dist.sample(&mut rng), dist.sample(&mut rng)];
                let y = teacher.forward(&x).unwrap();
                (x, y)
            })
            .collect();
        let student = Mlp2::random(2, 8, 1, 7);
        let cfg = TrainConfig { learning_rate: 3e-3, batch_size: 16, epochs: 400, ..Default::default() };
        let (trained, curve) = train_mse(&student, &data, &cfg).unwrap();
        assert_eq!(curve.len(), 400);
        assert!(eval_mse(&trained, &data) < 1e-3, "final loss {}", eval_mse(&trained, &data));
    }

    #[test]
    fn single_point_loss_decreases() {
        let net = Mlp2 { w1: vec![vec![0.5]], b1: vec![1.0], w2: vec![vec![0.3]], b2: vec![0.0] };
        let data = vec![(vec![1.0], vec![2.0])];
        let cfg = TrainConfig {
            learning_rate: 0.01,
            batch_size: 1,
            epochs: 10,
            optimizer: OptimizerKind::Sgd,
            ..Default::default()
        };
        let (_, curve) = train_mse(&net, &data, &cfg).unwrap();
        assert!(curve.windows(2).all(|w| w[1] < w[0]), "{curve:?}");
    }

    #[test]
    fn zero_features_only_move_output_bias() {
        let mut net = Mlp2::random(1, 4, 1, 3);
        net.w1.iter_mut().flatten().for_each(|w| *w = 0.0);
        net.b1.iter_mut().for_each(|b| *b = 0.0);
        let targets = [1.0, 2.0, 6.0];
        let data: Vec<_> = targets.iter().enumerate().map(|(i, &t)| (vec![i as f64], vec![t])).collect();
        let cfg = TrainConfig {
            learning_rate: 0.05,
            batch_size: 3,
            epochs: 2000,
            optimizer: OptimizerKind::Sgd,
            ..Default::default()
        };
        let (trained, _) = train_mse(&net, &data, &cfg).unwrap();
        assert_eq!(trained.w1, net.w1);
        assert_eq!(trained.b1, net.b1);
        assert_eq!(trained.w2, net.w2);
        assert!((trained.b2[0] - 3.0).abs() < 1e-9, "b2 = {}", trained.b2[0]);
    }

    #[test]
    fn identical_seeds_give_identical_parameters() {
        let net = Mlp2::random(2, 6, 1, 1);
        let data: Vec<_> = (0..40).map(|i| (vec![i as f64 / 40.0, 1.0], vec![(i % 3) as f64])).collect();
        let cfg = TrainConfig { epochs: 5, batch_size: 8, seed: 9, ..Default::default() };
        let (a, ca) = train_mse(&net, &data, &cfg).unwrap();
        let (b, cb) = train_mse(&net, &data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
        let (c, _) = train_mse(&net, &data, &cfg.with_seed(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn divergence_is_reported() {
        let net = Mlp2::random(1, 4, 1, 2);
        let data = vec![(vec![1e3], vec![1e6])];
        let cfg = TrainConfig {
            learning_rate: 10.0,
            batch_size: 1,
            epochs: 200,
            optimizer: OptimizerKind::Sgd,
            ..Default::default()
        };
        assert!(matches!(train_mse(&net, &data, &cfg), Err(Error::Divergence { .. })));
    }

    #[test]
    fn invalid_config_and_data() {
        let net = Mlp2::zeros(1, 1, 1);
        let bad = TrainConfig { learning_rate: 0.0, ..Default::default() };
        assert!(train_mse(&net, &[(vec![0.0], vec![0.0])], &bad).is_err());
        assert!(matches!(train_mse(&net, &[], &TrainConfig::default()), Err(Error::EmptyDataset)));
        assert!(train_mse(&net, &[(vec![0.0, 1.0], vec![0.0])], &TrainConfig::default()).is_err());
    }
}
