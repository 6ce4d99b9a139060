//! Feed-forward consumption policy.
//!
//! Four inputs (time, nominal wealth, last portfolio return, deflator) pass
//! through three ReLU layers of widths `[k1, k2, k3]` to a scalar output `z`.
//! Consumption is `(W + A) * sigmoid(z)`, which keeps every decision inside
//! the feasible interval `(0, W + A)`. One network serves every decision
//! time; time enters only as an input.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tape::{Real, Tape};

pub const INPUTS: usize = 4;

/// Smallest and largest share of `W + A` the sigmoid head may return.
///
/// The sigmoid saturates to exactly 0 or 1 in floating point for
/// `|z| > ~37`; clamping keeps consumption strictly inside the interval.
pub const MIN_SHARE: f64 = 1e-16;
pub const MAX_SHARE: f64 = 1.0 - f64::EPSILON / 2.0;

/// All weights and biases, stored layer by layer (row-major weights, then bias).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    widths: [usize; 3],
    values: Vec<f64>,
}

#[derive(Clone, Copy)]
struct LayerView {
    inputs: usize,
    outputs: usize,
    weights: usize,
    bias: usize,
}

fn layers(widths: [usize; 3]) -> [LayerView; 4] {
    let dims = [
        (INPUTS, widths[0]),
        (widths[0], widths[1]),
        (widths[1], widths[2]),
        (widths[2], 1),
    ];
    let mut offset = 0;
    dims.map(|(inputs, outputs)| {
        let weights = offset;
        let bias = weights + inputs * outputs;
        offset = bias + outputs;
        LayerView {
            inputs,
            outputs,
            weights,
            bias,
        }
    })
}

fn param_count(widths: [usize; 3]) -> usize {
    let l = layers(widths)[3];
    l.bias + l.outputs
}

impl MlpParams {
    pub fn zeros(widths: [usize; 3]) -> Self {
        Self {
            widths,
            values: vec![0.0; param_count(widths)],
        }
    }

    pub fn from_values(widths: [usize; 3], values: Vec<f64>) -> Result<Self> {
        if widths.contains(&0) {
            return Err(Error::Config(format!("layer widths must be positive, got {widths:?}")));
        }
        if values.len() != param_count(widths) {
            return Err(Error::Dimension(format!(
                "{} parameters supplied, widths {widths:?} need {}",
                values.len(),
                param_count(widths)
            )));
        }
        Ok(Self { widths, values })
    }

    pub fn widths(&self) -> [usize; 3] {
        self.widths
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Weight matrix (row per output neuron) and bias of layer `l` in `0..4`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let v = layers(self.widths)[l];
        (
            &self.values[v.weights..v.bias],
            &self.values[v.bias..v.bias + v.outputs],
        )
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn hidden_len(&self) -> usize {
        self.widths.iter().sum()
    }

    /// Pre-sigmoid output for already-normalized features.
    pub fn evaluate(&self, x: [f64; INPUTS]) -> f64 {
        let mut acts = [0.0; 256];
        if self.hidden_len() <= acts.len() {
            self.forward_into(x, &mut acts[..self.hidden_len()])
        } else {
            let mut acts = vec![0.0; self.hidden_len()];
            self.forward_into(x, &mut acts)
        }
    }

    /// Forward pass writing post-ReLU activations of the three hidden layers
    /// into `acts` (length `k1 + k2 + k3`).
    pub(crate) fn forward_into(&self, x: [f64; INPUTS], acts: &mut [f64]) -> f64 {
        let views = layers(self.widths);
        let w = &self.values;
        let [k1, k2, _] = self.widths;
        let (h0, rest) = acts.split_at_mut(k1);
        let (h1, h2) = rest.split_at_mut(k2);
        dense_relu(w, views[0], &x, h0);
        dense_relu(w, views[1], h0, h1);
        dense_relu(w, views[2], h1, h2);
        let out = views[3];
        let row = &w[out.weights..out.weights + out.inputs];
        w[out.bias] + dot(row, h2)
    }

    /// Accumulates `g * dz/dparams` into `grad` and returns `g * dz/dx`.
    pub(crate) fn backward_into(
        &self,
        x: [f64; INPUTS],
        acts: &[f64],
        g: f64,
        grad: &mut MlpParams,
        scratch: &mut Vec<f64>,
    ) -> [f64; INPUTS] {
        let views = layers(self.widths);
        let w = &self.values;
        let gw = &mut grad.values;
        let [k1, k2, k3] = self.widths;
        let (h0, rest) = acts.split_at(k1);
        let (h1, h2) = rest.split_at(k2);

        scratch.clear();
        scratch.resize(k1 + k2 + k3, 0.0);
        let (d0, rest) = scratch.split_at_mut(k1);
        let (d1, d2) = rest.split_at_mut(k2);

        let out = views[3];
        gw[out.bias] += g;
        for j in 0..k3 {
            gw[out.weights + j] += g * h2[j];
            d2[j] = if h2[j] > 0.0 { g * w[out.weights + j] } else { 0.0 };
        }
        dense_backward(w, gw, views[2], h1, d2, d1);
        dense_backward(w, gw, views[1], h0, d1, d0);

        let first = views[0];
        let mut dx = [0.0; INPUTS];
        for (j, &d) in d0.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gw[first.bias + j] += d;
            let row = first.weights + j * INPUTS;
            for i in 0..INPUTS {
                gw[row + i] += d * x[i];
                dx[i] += d * w[row + i];
            }
        }
        dx
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dense_relu(w: &[f64], v: LayerView, input: &[f64], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        let row = &w[v.weights + j * v.inputs..v.weights + (j + 1) * v.inputs];
        let pre = w[v.bias + j] + dot(row, input);
        *o = if pre > 0.0 { pre } else { 0.0 };
    }
}

/// Given output deltas `d_out` (already masked by the ReLU of this layer),
/// accumulate weight/bias gradients and write masked deltas for the layer
/// below into `d_in`.
fn dense_backward(
    w: &[f64],
    gw: &mut [f64],
    v: LayerView,
    input: &[f64],
    d_out: &[f64],
    d_in: &mut [f64],
) {
    d_in.iter_mut().for_each(|d| *d = 0.0);
    for (j, &d) in d_out.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        gw[v.bias + j] += d;
        let row = v.weights + j * v.inputs;
        for i in 0..v.inputs {
            gw[row + i] += d * input[i];
            d_in[i] += d * w[row + i];
        }
    }
    for (di, &h) in d_in.iter_mut().zip(input) {
        if h <= 0.0 {
            *di = 0.0;
        }
    }
}

/// He initialization: weights ~ N(0, 2 / fan_in), biases zero.
pub fn he_init(widths: [usize; 3], seed: u64) -> Result<MlpParams> {
    let mut params = MlpParams::from_values(widths, vec![0.0; param_count(widths)])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in layers(widths) {
        let normal = Normal::new(0.0, (2.0 / v.inputs as f64).sqrt())
            .map_err(|e| Error::Numeric(e.to_string()))?;
        for w in &mut params.values[v.weights..v.bias] {
            *w = normal.sample(&mut rng);
        }
    }
    Ok(params)
}

/// Constants mapping raw state to network features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Decision horizon in years; time enters as `t / horizon`.
    pub horizon: f64,
    /// Wealth enters as `W / wealth_scale` (the initial balance by default).
    pub wealth_scale: f64,
}

impl Normalization {
    pub fn new(horizon: usize, wealth_scale: f64) -> Result<Self> {
        if !(wealth_scale > 0.0) || !wealth_scale.is_finite() {
            return Err(Error::Config(format!("wealth scale must be positive, got {wealth_scale}")));
        }
        Ok(Self {
            horizon: horizon.max(1) as f64,
            wealth_scale,
        })
    }

    pub fn features<T: Real>(&self, input: &PolicyInput<T>) -> [T; INPUTS] {
        let w = input.wealth / self.wealth_scale;
        [
            w.lift(input.t as f64 / self.horizon),
            w,
            w.lift(input.last_return),
            w.lift(input.deflator),
        ]
    }
}

/// Raw state observed by the policy at a decision time.
#[derive(Clone, Copy, Debug)]
pub struct PolicyInput<T> {
    pub t: usize,
    /// Nominal wealth before the decision.
    pub wealth: T,
    /// Portfolio return over the previous year (0 at retirement).
    pub last_return: f64,
    pub deflator: f64,
}

/// Consumption `resources * sigmoid(net(features))` in any scalar context.
pub fn consumption<T: Real>(
    params: &MlpParams,
    norm: &Normalization,
    input: &PolicyInput<T>,
    resources: T,
) -> T {
    let z = T::policy_net(params, norm.features(input));
    let share = z.sigmoid().max_c(MIN_SHARE).min_c(MAX_SHARE);
    resources * share
}

/// Evaluates one decision on a fresh tape whose inputs are leaves.
///
/// Returns the consumption and the tape; the consumption is the last node.
pub fn forward(
    params: &MlpParams,
    norm: &Normalization,
    input: &PolicyInput<f64>,
    resources: f64,
) -> Result<(f64, Tape)> {
    if !params.is_finite() {
        return Err(Error::Numeric("non-finite network parameter".into()));
    }
    if !(resources >= 0.0) {
        return Err(Error::Domain(format!("resources W + A must be non-negative, got {resources}")));
    }
    let tape = Tape::new();
    let c = {
        let wealth = tape.var(input.wealth);
        let res = tape.var(resources);
        let taped = PolicyInput {
            t: input.t,
            wealth,
            last_return: input.last_return,
            deflator: input.deflator,
        };
        consumption(params, norm, &taped, res).value()
    };
    Ok((c, tape))
}

/// Parameter gradient of the last node of `tape`, scaled by `output_grad`.
pub fn backward(tape: &Tape, output_grad: f64, params: &MlpParams) -> Result<MlpParams> {
    let last = tape
        .len()
        .checked_sub(1)
        .ok_or_else(|| Error::Structural("empty tape".into()))?;
    let grads = tape.gradient_at(last, output_grad, Some(params))?;
    grads
        .into_net()
        .ok_or_else(|| Error::Structural("tape holds no network evaluation".into()))
}

pub const CHECKPOINT_FORMAT: &str = "decumulation-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized policy: widths, every weight, normalization, and the training
/// configuration that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub iteration: usize,
    pub params: MlpParams,
    pub normalization: Normalization,
    pub config_hash: String,
    pub config: serde_json::Value,
}

impl Checkpoint {
    pub fn new(
        iteration: usize,
        params: MlpParams,
        normalization: Normalization,
        config: serde_json::Value,
    ) -> Self {
        let config_hash = hash_json(&config);
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            iteration,
            params,
            normalization,
            config_hash,
            config,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        if !self.params.is_finite() {
            return Err(Error::Numeric("refusing to serialize non-finite parameters".into()));
        }
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Structural(format!("not a policy checkpoint: format {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Structural(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        if ck.params.len() != param_count(ck.params.widths) {
            return Err(Error::Structural("parameter count does not match widths".into()));
        }
        if hash_json(&ck.config) != ck.config_hash {
            return Err(Error::Structural("configuration hash mismatch".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub(crate) fn hash_json(value: &serde_json::Value) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm() -> Normalization {
        Normalization::new(41, 500_000.0).unwrap()
    }

    fn input(wealth: f64) -> PolicyInput<f64> {
        PolicyInput {
            t: 3,
            wealth,
            last_return: 0.05,
            deflator: 1.1,
        }
    }

    #[test]
    fn zero_network_consumes_half() {
        let p = MlpParams::zeros([20, 20, 20]);
        let (c, _) = forward(&p, &norm(), &input(400_000.0), 410_000.0).unwrap();
        assert_eq!(c, 205_000.0);
    }

    #[test]
    fn zero_resources_zero_consumption() {
        let p = he_init([20, 20, 20], 3).unwrap();
        let (c, _) = forward(&p, &norm(), &input(0.0), 0.0).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn he_init_is_seeded_with_zero_biases() {
        let a = he_init([8, 6, 4], 11).unwrap();
        let b = he_init([8, 6, 4], 11).unwrap();
        let c = he_init([8, 6, 4], 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for l in 0..4 {
            assert!(a.layer(l).1.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn he_init_variance_matches_fan_in() {
        let k1 = 10_000;
        let p = he_init([k1, 2, 1], 5).unwrap();
        let (w1, _) = p.layer(1);
        let n = w1.len() as f64;
        let mean = w1.iter().sum::<f64>() / n;
        let var = w1.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = 2.0 / k1 as f64;
        assert!((var / target - 1.0).abs() < 0.1, "variance {var} vs {target}");
    }

    #[test]
    fn saturated_output_stays_strictly_feasible() {
        let mut p = MlpParams::zeros([2, 2, 2]);
        let n = p.len();
        p.as_mut_slice()[n - 1] = 1e4;
        let (c, _) = forward(&p, &norm(), &input(1.0), 100.0).unwrap();
        assert!(c < 100.0 && c > 0.0);
        p.as_mut_slice()[n - 1] = -1e4;
        let (c, _) = forward(&p, &norm(), &input(1.0), 100.0).unwrap();
        assert!(c > 0.0 && c < 100.0);
    }

    #[test]
    fn non_finite_parameters_are_rejected() {
        let mut p = MlpParams::zeros([2, 2, 2]);
        p.as_mut_slice()[0] = f64::NAN;
        assert!(matches!(
            forward(&p, &norm(), &input(1.0), 1.0),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradient() {
        let p = he_init([5, 4, 3], 1).unwrap();
        let (_, tape) = forward(&p, &norm(), &input(300_000.0), 320_000.0).unwrap();
        let g = backward(&tape, 0.0, &p).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_parameters_are_a_structural_error() {
        let p = he_init([5, 4, 3], 1).unwrap();
        let q = he_init([5, 4, 4], 1).unwrap();
        let (_, tape) = forward(&p, &norm(), &input(300_000.0), 320_000.0).unwrap();
        assert!(matches!(backward(&tape, 1.0, &q), Err(Error::Structural(_))));
        assert!(matches!(backward(&Tape::new(), 1.0, &p), Err(Error::Structural(_))));
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let p = he_init([20, 20, 20], 99).unwrap();
        let ck = Checkpoint::new(7, p, norm(), serde_json::json!({"rho": 5.0, "phi": 0.5}));
        let text = ck.to_json().unwrap();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back, ck);
        for (a, b) in back.params.as_slice().iter().zip(ck.params.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn tampered_checkpoint_is_rejected() {
        let ck = Checkpoint::new(0, MlpParams::zeros([2, 2, 2]), norm(), serde_json::json!({"a": 1}));
        let text = ck.to_json().unwrap().replace("\"a\": 1", "\"a\": 2");
        assert!(matches!(Checkpoint::from_json(&text), Err(Error::Structural(_))));
    }
}
