//! Bellman-completeness tools: the tabular Bellman operator, difference
//! arrays, and a hidden-width lower bound for two-layer ReLU networks.

use serde::{Deserialize, Serialize};

use crate::environments::build_linearq;
use crate::error::{Error, Result};
use crate::mdp::MdpSpec;
use crate::nn::{train_mse, Mlp2, TrainConfig};

/// `(BQ)(s,a) = r_0(s,a) + sum_s' T(s'|s,a) max_a' q_next(s',a')`.
pub fn bellman_apply(q_next: &[Vec<f64>], mdp: &MdpSpec) -> Result<Vec<Vec<f64>>> {
    bellman_apply_at(q_next, mdp, 0)
}

/// As [`bellman_apply`] with the reward of step `h`.
pub fn bellman_apply_at(q_next: &[Vec<f64>], mdp: &MdpSpec, h: usize) -> Result<Vec<Vec<f64>>> {
    if q_next.len() != mdp.n_states() {
        return Err(Error::DimensionMismatch { expected: mdp.n_states(), got: q_next.len() });
    }
    if let Some(row) = q_next.iter().find(|row| row.len() != mdp.n_actions()) {
        return Err(Error::DimensionMismatch { expected: mdp.n_actions(), got: row.len() });
    }
    let v_next: Vec<f64> =
        q_next.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    Ok((0..mdp.n_states())
        .map(|s| {
            (0..mdp.n_actions())
                .map(|a| {
                    let future: f64 = mdp.successors(s, a).iter().map(|&(n, p)| p * v_next[n]).sum();
                    mdp.reward(h, s, a) + future
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceArray {
    pub values: Vec<f64>,
    pub order: usize,
}

/// `t`-th order forward differences, `D^t v(k) = D^(t-1) v(k+1) - D^(t-1) v(k)`.
pub fn difference_array(values: &[f64], order: usize) -> Result<DifferenceArray> {
    if values.is_empty() || order >= values.len() {
        return Err(Error::InvalidParameter(format!(
            "difference order {order} needs at least {} values, got {}",
            order + 1,
            values.len()
        )));
    }
    let mut cur = values.to_vec();
    for _ in 0..order {
        cur = cur.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(DifferenceArray { values: cur, order })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LowerBoundCertificate {
    pub nonzero_count: usize,
    pub min_hidden_neurons: usize,
    pub slice_description: String,
}

/// Each hidden ReLU contributes at most two nonzero second differences on an
/// integer grid, so a network matching `slice` exactly needs at least
/// `ceil(nonzero / 2)` hidden units.
pub fn relu_lower_bound(slice: &[f64]) -> Result<LowerBoundCertificate> {
    relu_lower_bound_described(slice, format!("{} consecutive grid values", slice.len()))
}

pub fn relu_lower_bound_described(slice: &[f64], description: String) -> Result<LowerBoundCertificate> {
    if slice.len() < 3 {
        return Err(Error::InvalidParameter(format!("slice needs at least 3 values, got {}", slice.len())));
    }
    let scale = slice.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    let d2 = difference_array(slice, 2)?;
    let nonzero_count = d2.values.iter().filter(|v| v.abs() > tol).count();
    Ok(LowerBoundCertificate {
        nonzero_count,
        min_hidden_neurons: nonzero_count.div_ceil(2),
        slice_description: description,
    })
}

/// `r(s, 0)` of LinearQ for `s` in `u+1..=2u`.
pub fn linearq_reward_slice(u: usize) -> Result<Vec<f64>> {
    let env = build_linearq(u)?;
    Ok((u + 1..=2 * u).map(|s| env.mdp.reward(0, s, 0)).collect())
}

/// Certificate for the LinearQ reward slice of size `u`.
pub fn linearq_certificate(u: usize) -> Result<LowerBoundCertificate> {
    let slice = linearq_reward_slice(u)?;
    relu_lower_bound_described(&slice, format!("LinearQ u={u}: r(s, a=0) for s in {}..={}", u + 1, 2 * u))
}

/// Diagnostic only, not a certificate: fits a width-`width` network to
/// `B q_hat` over all `(s, a)` and reports the worst residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessProbe {
    pub width: usize,
    pub residual_sup: f64,
    pub final_loss: f64,
}

pub fn completeness_probe(
    q_hat: &[Vec<f64>],
    mdp: &MdpSpec,
    width: usize,
    config: &TrainConfig,
) -> Result<CompletenessProbe> {
    let target = bellman_apply(q_hat, mdp)?;
    let scale = mdp.n_states().saturating_sub(1).max(1) as f64;
    let data: Vec<(Vec<f64>, Vec<f64>)> = target
        .iter()
        .enumerate()
        .flat_map(|(s, row)| {
            row.iter().enumerate().map(move |(a, &y)| (vec![s as f64 / scale, a as f64], vec![y]))
        })
        .collect();
    let init = Mlp2::random(2, width, 1, config.seed);
    let (net, curve) = train_mse(&init, &data, config)?;
    let mut residual_sup = 0.0f64;
    for (x, y) in &data {
        residual_sup = residual_sup.max((net.forward(x)?[0] - y[0]).abs());
    }
    Ok(CompletenessProbe { width, residual_sup, final_loss: curve.last().copied().unwrap_or(f64::NAN) })
}
