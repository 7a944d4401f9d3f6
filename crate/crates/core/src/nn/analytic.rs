//! Hand-set weights for the LinearQ instance.

use super::Mlp2;
use crate::error::{Error, Result};

struct Builder {
    state_scale: f64,
    net: Mlp2,
}

impl Builder {
    /// Adds `out_weight * relu(ws * s + wg * g + bias)` where `s` is the raw
    /// state index and `g` the RTG in units of `k`.
    fn neuron(&mut self, ws: f64, wg: f64, bias: f64, out_weight: f64) {
        self.net.w1.push(vec![ws * self.state_scale, wg]);
        self.net.b1.push(bias);
        self.net.w2[0].push(out_weight);
    }

    /// `coeff * 1[x == c]` for integer-valued `x = ws * s + wg * g`, using
    /// `1[x == c] = -relu(c - x) + relu(c + 1 - x) - relu(x - c) + relu(x - c + 1) - 1`.
    fn equals(&mut self, ws: f64, wg: f64, c: f64, coeff: f64) {
        self.neuron(-ws, -wg, c, -coeff);
        self.neuron(-ws, -wg, c + 1.0, coeff);
        self.neuron(ws, wg, -c, -coeff);
        self.neuron(ws, wg, -c + 1.0, coeff);
        self.net.b2[0] -= coeff;
    }

    /// `coeff * 1[s <= c]` as the average of the two one-sided forms
    /// `1[s <= c]` and `1 - 1[s >= c + 1]`.
    fn at_most(&mut self, c: f64, coeff: f64) {
        let half = 0.5 * coeff;
        self.neuron(-1.0, 0.0, c, -half);
        self.neuron(-1.0, 0.0, c + 1.0, half);
        self.neuron(1.0, 0.0, -c - 1.0, half);
        self.neuron(1.0, 0.0, -c, -half);
        self.net.b2[0] += half;
    }
}

/// 16-neuron network over `(s / (|S|-1), g / k)` whose output thresholded at
/// 0.5 reproduces the deviation-aware policy that fits every LinearQ
/// dataset triple:
///
/// `1[g+s = 3u+1.5] - 1[g+2s = 4u+2] - 2*1[g = 0] - 1[s <= u] + 1`
///
/// with `g` in units of `k`. The first indicator marks the RTG of the
/// deviating action `a=1` for `s <= u` (`Q*(s,1) = k(3u+1.5-s)`), the
/// second that of `a=0` for `s > u` (`Q*(s,0) = 2k(2u+1-s)`). Indicator
/// arguments are doubled so they stay integral on half-integer RTGs.
pub fn build_analytic_rcsl_policy(u: usize) -> Result<Mlp2> {
    if u == 0 {
        return Err(Error::InvalidParameter("LinearQ size parameter u must be >= 1".into()));
    }
    let uf = u as f64;
    let mut b = Builder {
        state_scale: (3 * u + 2) as f64,
        net: Mlp2 { w1: Vec::new(), b1: Vec::new(), w2: vec![Vec::new()], b2: vec![1.0] },
    };
    b.equals(2.0, 2.0, 6.0 * uf + 3.0, 1.0);
    b.equals(4.0, 2.0, 8.0 * uf + 4.0, -1.0);
    b.equals(0.0, 2.0, 0.0, -2.0);
    b.at_most(uf, -1.0);
    debug_assert_eq!(b.net.width(), 16);
    Ok(b.net)
}

/// Two-neuron network over raw `(s, a)`:
/// `Q*(s,a) = 2k relu(-s - (2u+1)a + 2u+1) + k relu(-s + (3u+1.5)a)`.
pub fn build_analytic_q_network(u: usize) -> Result<Mlp2> {
    if u == 0 {
        return Err(Error::InvalidParameter("LinearQ size parameter u must be >= 1".into()));
    }
    let uf = u as f64;
    let k = 1.0 / (3.0 * uf + 1.0);
    Ok(Mlp2 {
        w1: vec![vec![-1.0, -(2.0 * uf + 1.0)], vec![-1.0, 3.0 * uf + 1.5]],
        b1: vec![2.0 * uf + 1.0, 0.0],
        w2: vec![vec![2.0 * k, k]],
        b2: vec![0.0],
    })
}
