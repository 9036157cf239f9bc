//! Three-layer perceptron trained by online backpropagation with an adaptive
//! sigmoid gain.
//!
//! Every node computes `1 / (1 + exp(-g * y))` where `y` is the bias-augmented
//! weighted sum of its inputs and `g` is a single gain shared by the whole
//! network. Before each weight update the gain is reset from how far the
//! output layer is from its target on the current pattern (see
//! [`adaptive_gain`]): when the worst output error exceeds one half the gain
//! drops below one, flattening every sigmoid so saturated nodes can move.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub const DEFAULT_HIDDEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpTopology {
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub n_outputs: usize,
}

impl MlpTopology {
    pub fn new(n_inputs: usize, n_hidden: usize, n_outputs: usize) -> Result<Self> {
        if n_inputs == 0 || n_hidden == 0 || n_outputs == 0 {
            return Err(Error::invalid(format!(
                "topology {n_inputs}-{n_hidden}-{n_outputs} has an empty layer"
            )));
        }
        Ok(Self {
            n_inputs,
            n_hidden,
            n_outputs,
        })
    }

    /// `n_inputs`-8-`n_outputs`.
    pub fn with_default_hidden(n_inputs: usize, n_outputs: usize) -> Result<Self> {
        Self::new(n_inputs, DEFAULT_HIDDEN, n_outputs)
    }

    pub fn hidden_weight_count(&self) -> usize {
        self.n_hidden * (self.n_inputs + 1)
    }

    pub fn output_weight_count(&self) -> usize {
        self.n_outputs * (self.n_hidden + 1)
    }
}

/// Logistic sigmoid with gain: `1 / (1 + exp(-g * y))`.
pub fn sigmoid_gain(y: f64, g: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::invalid(format!(
            "sigmoid input must be finite, got {y}"
        )));
    }
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::invalid(format!(
            "sigmoid gain must be positive, got {g}"
        )));
    }
    Ok(logistic(g * y))
}

#[inline]
fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Worst absolute componentwise error between target and output.
pub fn pattern_error(target: &[f64], output: &[f64]) -> Result<f64> {
    check_len("pattern_error", target.len(), output.len())?;
    Ok(target
        .iter()
        .zip(output)
        .map(|(t, o)| (t - o).abs())
        .fold(0.0, f64::max))
}

/// Gain for a pattern whose worst output error is `e_p`.
///
/// With `Ap = 2 * e_p`, the gain is `1 / Ap` when `Ap > 1` and `1` otherwise,
/// so it is always in `(0, 1]` and equals one exactly when `e_p <= 0.5`.
pub fn adaptive_gain(e_p: f64) -> Result<f64> {
    if !e_p.is_finite() || e_p < 0.0 {
        return Err(Error::invalid(format!(
            "pattern error must be a non-negative finite value, got {e_p}"
        )));
    }
    let ap = 2.0 * e_p;
    Ok(if ap > 1.0 { 1.0 / ap } else { 1.0 })
}

/// One normalized training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl Pattern {
    pub fn new(input: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        for (what, values) in [("input", &input), ("target", &target)] {
            if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::invalid(format!(
                    "pattern {what} component {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self { input, target })
    }
}

/// Gradient of `0.5 * sum((t - o)^2)` with respect to every weight, laid out
/// like [`Mlp`]'s weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

/// Outcome of a single [`backprop_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Summed squared output error before the weight update.
    pub squared_error: f64,
    /// Worst absolute output error before the update.
    pub pattern_error: f64,
    /// Gain the update was computed with.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    topology: MlpTopology,
    /// Row-major `n_hidden x (n_inputs + 1)`; column 0 is the bias.
    w_hidden: Vec<f64>,
    /// Row-major `n_outputs x (n_hidden + 1)`; column 0 is the bias.
    w_output: Vec<f64>,
    gain: f64,
}

struct Activations {
    hidden: Vec<f64>,
    output: Vec<f64>,
}

impl Mlp {
    /// All weights zero, gain 1. Every output is exactly 0.5.
    pub fn zeros(topology: MlpTopology) -> Self {
        Self {
            topology,
            w_hidden: vec![0.0; topology.hidden_weight_count()],
            w_output: vec![0.0; topology.output_weight_count()],
            gain: 1.0,
        }
    }

    pub fn from_weights(
        topology: MlpTopology,
        w_hidden: Vec<f64>,
        w_output: Vec<f64>,
        gain: f64,
    ) -> Result<Self> {
        check_len(
            "hidden weights",
            topology.hidden_weight_count(),
            w_hidden.len(),
        )?;
        check_len(
            "output weights",
            topology.output_weight_count(),
            w_output.len(),
        )?;
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::invalid(format!("gain must be positive, got {gain}")));
        }
        if let Some(w) = w_hidden.iter().chain(&w_output).find(|w| !w.is_finite()) {
            return Err(Error::invalid(format!("non-finite weight {w}")));
        }
        Ok(Self {
            topology,
            w_hidden,
            w_output,
            gain,
        })
    }

    /// Weights drawn uniformly from `[-half_width, half_width]`, hidden layer
    /// first, each matrix in row-major order.
    pub fn random<R: Rng + ?Sized>(topology: MlpTopology, half_width: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(topology);
        for w in net.w_hidden.iter_mut().chain(net.w_output.iter_mut()) {
            *w = rng.random_range(-half_width..=half_width);
        }
        net
    }

    pub fn topology(&self) -> MlpTopology {
        self.topology
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn set_gain(&mut self, gain: f64) -> Result<()> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::invalid(format!("gain must be positive, got {gain}")));
        }
        self.gain = gain;
        Ok(())
    }

    pub fn hidden_weights(&self) -> &[f64] {
        &self.w_hidden
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.w_output
    }

    pub fn hidden_weights_mut(&mut self) -> &mut [f64] {
        &mut self.w_hidden
    }

    pub fn output_weights_mut(&mut self) -> &mut [f64] {
        &mut self.w_output
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", self.topology.n_inputs, input.len())?;
        Ok(self.activations(input, self.gain).output)
    }

    fn activations(&self, input: &[f64], gain: f64) -> Activations {
        let MlpTopology {
            n_inputs, n_hidden, ..
        } = self.topology;
        let hidden: Vec<f64> = self
            .w_hidden
            .chunks_exact(n_inputs + 1)
            .map(|row| logistic(gain * weighted_sum(row, input)))
            .collect();
        let output = self
            .w_output
            .chunks_exact(n_hidden + 1)
            .map(|row| logistic(gain * weighted_sum(row, &hidden)))
            .collect();
        Activations { hidden, output }
    }

    fn check_pattern(&self, p: &Pattern) -> Result<()> {
        check_len("pattern input", self.topology.n_inputs, p.input.len())?;
        check_len("pattern target", self.topology.n_outputs, p.target.len())
    }
}

/// `row[0] + sum(row[i + 1] * x[i])`.
#[inline]
fn weighted_sum(row: &[f64], x: &[f64]) -> f64 {
    row[1..]
        .iter()
        .zip(x)
        .fold(row[0], |acc, (w, xi)| acc + w * xi)
}

/// Half summed squared error of the network on `p`, evaluated at `gain`.
pub fn half_squared_error(net: &Mlp, p: &Pattern, gain: f64) -> Result<f64> {
    net.check_pattern(p)?;
    let out = net.activations(&p.input, gain).output;
    Ok(0.5
        * p.target
            .iter()
            .zip(&out)
            .map(|(t, o)| (t - o) * (t - o))
            .sum::<f64>())
}

/// Analytic gradient of [`half_squared_error`] at a fixed `gain`.
pub fn gradients(net: &Mlp, p: &Pattern, gain: f64) -> Result<Gradients> {
    net.check_pattern(p)?;
    let act = net.activations(&p.input, gain);
    Ok(backward(net, p, &act, gain))
}

fn backward(net: &Mlp, p: &Pattern, act: &Activations, gain: f64) -> Gradients {
    let MlpTopology {
        n_inputs, n_hidden, ..
    } = net.topology;

    // dE/dy at each output node, with d(sigma)/dy = g * o * (1 - o)
    let delta_out: Vec<f64> = act
        .output
        .iter()
        .zip(&p.target)
        .map(|(o, t)| -(t - o) * gain * o * (1.0 - o))
        .collect();

    let mut output = vec![0.0; net.w_output.len()];
    for (k, grad_row) in output.chunks_exact_mut(n_hidden + 1).enumerate() {
        grad_row[0] = delta_out[k];
        for (g, h) in grad_row[1..].iter_mut().zip(&act.hidden) {
            *g = delta_out[k] * h;
        }
    }

    let mut hidden = vec![0.0; net.w_hidden.len()];
    for (j, grad_row) in hidden.chunks_exact_mut(n_inputs + 1).enumerate() {
        let back: f64 = net
            .w_output
            .chunks_exact(n_hidden + 1)
            .zip(&delta_out)
            .map(|(row, d)| d * row[j + 1])
            .sum();
        let h = act.hidden[j];
        let delta = back * gain * h * (1.0 - h);
        grad_row[0] = delta;
        for (g, x) in grad_row[1..].iter_mut().zip(&p.input) {
            *g = delta * x;
        }
    }

    Gradients { hidden, output }
}

/// One online update on a single pattern.
///
/// Runs a forward pass with the current gain to measure the pattern error,
/// resets the gain with [`adaptive_gain`], then backpropagates at that gain
/// and takes a gradient step of size `lr`. When the gain changes the forward
/// pass is repeated at the new gain so activations and derivatives agree.
pub fn backprop_step(net: &mut Mlp, p: &Pattern, lr: f64) -> Result<StepReport> {
    net.check_pattern(p)?;
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::invalid(format!(
            "learning rate must be >= 0, got {lr}"
        )));
    }

    let measured = net.activations(&p.input, net.gain);
    let squared_error = p
        .target
        .iter()
        .zip(&measured.output)
        .map(|(t, o)| (t - o) * (t - o))
        .sum();
    let e_p = pattern_error(&p.target, &measured.output)?;
    let gain = adaptive_gain(e_p)?;

    let act = if gain == net.gain {
        measured
    } else {
        net.activations(&p.input, gain)
    };
    net.gain = gain;

    let grads = backward(net, p, &act, gain);
    for (w, g) in net.w_hidden.iter_mut().zip(&grads.hidden) {
        *w -= lr * g;
    }
    for (w, g) in net.w_output.iter_mut().zip(&grads.output) {
        *w -= lr * g;
    }

    Ok(StepReport {
        squared_error,
        pattern_error: e_p,
        gain,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub init_half_width: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            learning_rate: 0.2,
            seed: 0,
            init_half_width: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.init_half_width > 0.0 && self.init_half_width.is_finite()) {
            return Err(Error::invalid(format!(
                "init half width must be positive, got {}",
                self.init_half_width
            )));
        }
        Ok(())
    }
}

/// One entry of a training trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub epoch: usize,
    pub pattern: usize,
    pub report: StepReport,
}

/// A model together with the per-epoch loss of the run that produced it.
#[derive(Debug, Clone)]
pub struct Fit<M> {
    pub model: M,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub net: Mlp,
    /// Mean per-pattern squared error of each epoch.
    pub loss_history: Vec<f64>,
}

/// Seeded initialization followed by `cfg.epochs` in-order passes over
/// `patterns`.
pub fn train(topology: MlpTopology, patterns: &[Pattern], cfg: &TrainConfig) -> Result<Trained> {
    train_traced(topology, patterns, cfg, |_| {})
}

/// [`train`], reporting every step to `trace`.
pub fn train_traced<F>(
    topology: MlpTopology,
    patterns: &[Pattern],
    cfg: &TrainConfig,
    mut trace: F,
) -> Result<Trained>
where
    F: FnMut(&TraceEvent),
{
    cfg.validate()?;
    if patterns.is_empty() {
        return Err(Error::invalid("cannot train on an empty pattern set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = Mlp::random(topology, cfg.init_half_width, &mut rng);
    for p in patterns {
        net.check_pattern(p)?;
    }

    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for (i, p) in patterns.iter().enumerate() {
            let report = backprop_step(&mut net, p, cfg.learning_rate)?;
            total += report.squared_error;
            trace(&TraceEvent {
                epoch,
                pattern: i,
                report,
            });
        }
        loss_history.push(total / patterns.len() as f64);
    }
    Ok(Trained { net, loss_history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn topo(i: usize, h: usize, o: usize) -> MlpTopology {
        MlpTopology::new(i, h, o).unwrap()
    }

    #[test]
    fn sigmoid_fixed_points() {
        assert_eq!(sigmoid_gain(0.0, 1.0).unwrap(), 0.5);
        assert_eq!(sigmoid_gain(0.0, 0.37).unwrap(), 0.5);
        assert_abs_diff_eq!(sigmoid_gain(3f64.ln(), 1.0).unwrap(), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn sigmoid_rejects_bad_arguments() {
        assert!(sigmoid_gain(f64::NAN, 1.0).is_err());
        assert!(sigmoid_gain(f64::INFINITY, 1.0).is_err());
        assert!(sigmoid_gain(1.0, 0.0).is_err());
        assert!(sigmoid_gain(1.0, -2.0).is_err());
    }

    #[test]
    fn zero_weights_give_half() {
        let net = Mlp::zeros(topo(3, 8, 2));
        assert_eq!(net.forward(&[0.1, 0.9, 0.4]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn one_one_one_hand_chain() {
        // h = 1/(1+exp(-1.5)); o = 1/(1+exp(-(1+h)))
        let h = 0.817_574_476_193_643_7_f64;
        let expected = 0.860_274_828_805_290_8_f64;
        let net = Mlp::from_weights(topo(1, 1, 1), vec![1.0, 1.0], vec![1.0, 1.0], 1.0).unwrap();
        let out = net.forward(&[0.5]).unwrap();
        assert_abs_diff_eq!(out[0], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(1.0 / (1.0 + (-(1.0 + h)).exp()), expected, epsilon = 1e-12);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let net = Mlp::zeros(topo(3, 8, 1));
        assert!(matches!(
            net.forward(&[0.1, 0.2]),
            Err(Error::Dimension {
                expected: 3,
                got: 2,
                ..
            })
        ));
    }

    #[test]
    fn pattern_error_cases() {
        assert_eq!(pattern_error(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            pattern_error(&[0.9, 0.2], &[0.4, 0.1]).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert!(matches!(
            pattern_error(&[0.1, 0.2], &[0.1, 0.2, 0.3]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn adaptive_gain_branches() {
        assert_eq!(adaptive_gain(0.2).unwrap(), 1.0);
        assert_abs_diff_eq!(adaptive_gain(0.75).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(adaptive_gain(0.5).unwrap(), 1.0);
        assert!(adaptive_gain(-0.1).is_err());
        assert!(adaptive_gain(f64::NAN).is_err());
    }

    #[test]
    fn pattern_rejects_out_of_range() {
        assert!(Pattern::new(vec![1.2], vec![0.5]).is_err());
        assert!(Pattern::new(vec![0.2], vec![-0.1]).is_err());
    }

    #[test]
    fn zero_error_means_no_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut net = Mlp::random(topo(3, 8, 1), 0.5, &mut rng);
        let input = vec![0.2, 0.4, 0.6];
        let out = net.forward(&input).unwrap();
        let p = Pattern::new(input, out).unwrap();
        let before = net.clone();
        let report = backprop_step(&mut net, &p, 0.2).unwrap();
        assert_eq!(report.squared_error, 0.0);
        assert_eq!(net, before);
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut net = Mlp::random(topo(3, 8, 1), 0.5, &mut rng);
        let p = Pattern::new(vec![0.1, 0.5, 0.9], vec![0.8]).unwrap();
        let pre = 2.0 * half_squared_error(&net, &p, net.gain()).unwrap();
        let before = net.clone();
        let report = backprop_step(&mut net, &p, 0.0).unwrap();
        assert_eq!(net.hidden_weights(), before.hidden_weights());
        assert_eq!(net.output_weights(), before.output_weights());
        assert_abs_diff_eq!(report.squared_error, pre, epsilon = 1e-15);
    }

    #[test]
    fn backprop_step_checks_dimensions() {
        let mut net = Mlp::zeros(topo(3, 8, 1));
        let p = Pattern::new(vec![0.1, 0.5], vec![0.8]).unwrap();
        assert!(matches!(
            backprop_step(&mut net, &p, 0.2),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn large_error_lowers_gain() {
        // Output saturated near 1 against a target of 0.
        let net0 = Mlp::from_weights(topo(1, 1, 1), vec![0.0, 0.0], vec![8.0, 0.0], 1.0).unwrap();
        let mut net = net0.clone();
        let p = Pattern::new(vec![0.5], vec![0.0]).unwrap();
        let out = net0.forward(&[0.5]).unwrap()[0];
        let report = backprop_step(&mut net, &p, 0.1).unwrap();
        assert_abs_diff_eq!(report.pattern_error, out, epsilon = 1e-15);
        assert_abs_diff_eq!(report.gain, 1.0 / (2.0 * out), epsilon = 1e-15);
        assert_eq!(net.gain(), report.gain);
    }

    #[test]
    fn train_rejects_empty_and_mismatched() {
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(topo(1, 8, 1), &[], &cfg),
            Err(Error::InvalidArgument(_))
        ));
        let p = Pattern::new(vec![0.1, 0.2], vec![0.3]).unwrap();
        assert!(matches!(
            train(topo(1, 8, 1), &[p], &cfg),
            Err(Error::Dimension { .. })
        ));
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let p = Pattern::new(vec![0.1], vec![0.3]).unwrap();
        assert!(train(topo(1, 8, 1), &[p], &bad).is_err());
    }

    #[test]
    fn history_length_matches_epochs() {
        let p = Pattern::new(vec![0.1], vec![0.3]).unwrap();
        let out = train(topo(1, 8, 1), &[p], &TrainConfig::default()).unwrap();
        assert_eq!(out.loss_history.len(), 1000);
    }

    #[test]
    fn learns_a_line() {
        let patterns: Vec<Pattern> = (0..50)
            .map(|i| {
                let x = i as f64 / 49.0;
                Pattern::new(vec![x], vec![0.3 * x + 0.2]).unwrap()
            })
            .collect();
        let out = train(topo(1, 8, 1), &patterns, &TrainConfig::default()).unwrap();
        let first = out.loss_history[0];
        let last = *out.loss_history.last().unwrap();
        assert!(last < first, "first {first}, last {last}");
    }

    proptest! {
        #[test]
        fn sigmoid_in_open_unit_interval(y in -30.0f64..30.0, g in 1e-3f64..1.0) {
            let s = sigmoid_gain(y, g).unwrap();
            prop_assert!(s > 0.0 && s < 1.0);
        }

        #[test]
        fn sigmoid_monotone(y in -20.0f64..20.0, dy in 1e-3f64..5.0, g in 1e-2f64..1.0) {
            prop_assert!(sigmoid_gain(y + dy, g).unwrap() > sigmoid_gain(y, g).unwrap());
        }

        #[test]
        fn gain_in_unit_interval(e in 0.0f64..10.0) {
            let g = adaptive_gain(e).unwrap();
            prop_assert!(g > 0.0 && g <= 1.0);
            prop_assert_eq!(g == 1.0, e <= 0.5);
        }
    }
}
